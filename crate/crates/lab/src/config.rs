//! Experiment configuration (JSON, `"schema": 1`). Unknown keys are rejected.

use std::path::{Path, PathBuf};

use gneiting_core::covariance::{make_radial, Family, GneitingCovariance, RadialCovariance, Role};
use gneiting_core::cyclic::Budget;
use gneiting_core::geometry::{BodyKind, ConvexBody, GrowthSchedule, WindowSpec};
use gneiting_core::hermite::{FunctionalKind, HermiteFunctional};
use gneiting_core::regimes::{classify, RegimeReport};
use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleOptions;
use crate::error::{Error, Result};
use crate::fieldsim::SamplerOptions;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialConfig {
    pub family: String,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceConfig {
    pub d1: usize,
    pub d2: usize,
    pub factor1: RadialConfig,
    pub factor2: RadialConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyConfig {
    pub kind: String,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extent: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub body1: BodyConfig,
    pub body2: BodyConfig,
    #[serde(default = "one")]
    pub gamma1: f64,
    #[serde(default = "one")]
    pub gamma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionalConfig {
    HermitePoly { q: usize },
    IndicatorAbs { u: f64 },
    Indicator { u: f64 },
    Power { p: f64 },
}

impl FunctionalConfig {
    pub fn kind(&self) -> FunctionalKind {
        match *self {
            FunctionalConfig::HermitePoly { q } => FunctionalKind::HermitePoly(q),
            FunctionalConfig::IndicatorAbs { u } => FunctionalKind::IndicatorAbs(u),
            FunctionalConfig::Indicator { u } => FunctionalKind::Indicator(u),
            FunctionalConfig::Power { p } => FunctionalKind::Power(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    /// Grid mesh.
    pub h: f64,
    pub node_cap: usize,
    pub eps_clip: f64,
    pub max_embedding_factor: usize,
    pub mc_batches: usize,
    pub mc_per_batch: usize,
    pub quad_cells: usize,
    pub qmax: usize,
    /// Cyclic order for the separability and appendix suites.
    pub k: usize,
    pub series_order: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            h: 1.0,
            node_cap: crate::fieldsim::DEFAULT_NODE_CAP,
            eps_clip: crate::fieldsim::DEFAULT_EPS_CLIP,
            max_embedding_factor: crate::fieldsim::MAX_EMBEDDING_FACTOR,
            mc_batches: 32,
            mc_per_batch: 20_000,
            quad_cells: 100,
            qmax: gneiting_core::hermite::DEFAULT_QMAX,
            k: 3,
            series_order: gneiting_core::rosenblatt::DEFAULT_ORDER,
        }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub covariance: CovarianceConfig,
    pub window: WindowConfig,
    pub functional: FunctionalConfig,
    pub t_ladder: Vec<f64>,
    pub n_reps: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

/// Validated experiment, ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub covariance: GneitingCovariance,
    pub window: WindowSpec,
    pub functional: HermiteFunctional,
    pub report: RegimeReport,
    /// SHA-256 of the config bytes as read, or of the canonical JSON.
    pub config_hash: String,
}

pub fn radial(cfg: &RadialConfig, dim: usize, role: Role) -> Result<RadialCovariance> {
    let family = Family::parse(&cfg.family).ok_or_else(|| Error::Config(format!("unknown covariance family '{}'", cfg.family)))?;
    Ok(make_radial(family, &cfg.params, dim, role)?)
}

pub fn body(cfg: &BodyConfig) -> Result<ConvexBody> {
    let kind = BodyKind::parse(&cfg.kind).ok_or_else(|| Error::Config(format!("unknown body kind '{}'", cfg.kind)))?;
    Ok(ConvexBody::new(kind, cfg.dim, &cfg.extent)?)
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!("schema {} not supported (expected {SCHEMA_VERSION})", cfg.schema)));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Experiment> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let text = String::from_utf8(bytes.clone()).map_err(|e| Error::Config(e.to_string()))?;
        let mut exp = Self::from_json(&text)?.validate()?;
        exp.config_hash = crate::io::sha256_hex(&bytes);
        Ok(exp)
    }

    /// Builds every sub-spec; nothing random happens before this succeeds.
    pub fn validate(self) -> Result<Experiment> {
        let c = &self.covariance;
        let f1 = radial(&c.factor1, c.d1, Role::Factor1)?;
        let f2 = radial(&c.factor2, c.d2, Role::Factor2)?;
        let covariance = GneitingCovariance::new(f1, f2)?;
        let b1 = body(&self.window.body1)?;
        let b2 = body(&self.window.body2)?;
        if b1.dim != c.d1 || b2.dim != c.d2 {
            return Err(Error::Config(format!("window dims ({}, {}) do not match covariance dims ({}, {})", b1.dim, b2.dim, c.d1, c.d2)));
        }
        let window = WindowSpec::new(b1, b2, GrowthSchedule::new(self.window.gamma1, self.window.gamma2)?);
        let functional = HermiteFunctional::new(self.functional.kind(), self.budgets.qmax)?;
        if self.t_ladder.is_empty() || self.t_ladder.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::Config("t_ladder needs positive finite values".into()));
        }
        if self.n_reps < 2 {
            return Err(Error::Config("n_reps must be at least 2".into()));
        }
        let b = &self.budgets;
        if b.h.is_nan() || b.h <= 0.0 || b.mc_batches < 2 || b.mc_per_batch == 0 || b.quad_cells < 4 || !(2..=8).contains(&b.k) {
            return Err(Error::Config(format!("invalid budgets {b:?}")));
        }
        let report = classify(c.d1, c.d2, functional.rank, covariance.factor1.rho, covariance.factor2.rho);
        let config_hash = crate::io::sha256_hex(serde_json::to_string(&self)?.as_bytes());
        Ok(Experiment { config: self, covariance, window, functional, report, config_hash })
    }
}

impl Experiment {
    pub fn ensemble_options(&self) -> EnsembleOptions {
        let b = &self.config.budgets;
        EnsembleOptions {
            h: b.h,
            node_cap: b.node_cap,
            sampler: SamplerOptions { eps_clip: b.eps_clip, max_factor: b.max_embedding_factor },
        }
    }

    pub fn mc_budget(&self) -> Budget {
        let b = &self.config.budgets;
        Budget { batches: b.mc_batches, per_batch: b.mc_per_batch, seed: self.config.master_seed, cells: b.quad_cells }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const CASE4: &str = r#"{
        "schema": 1,
        "covariance": {"d1": 1, "d2": 1,
            "factor1": {"family": "gen-cauchy", "params": [1.0, 0.3]},
            "factor2": {"family": "gen-cauchy", "params": [1.0, 0.4]}},
        "window": {"body1": {"kind": "unit-box", "dim": 1}, "body2": {"kind": "unit-box", "dim": 1}},
        "functional": {"kind": "hermite-poly", "q": 2},
        "t_ladder": [8, 16],
        "n_reps": 10,
        "master_seed": 1
    }"#;

    #[test]
    fn parses_and_classifies() {
        let e = ExperimentConfig::from_json(CASE4).unwrap().validate().unwrap();
        assert_eq!(e.report.regime.name(), "case4-rosenblatt");
        assert_eq!(e.config.budgets, Budgets::default());
        assert_eq!(e.config_hash.len(), 64);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let bad = CASE4.replace("\"n_reps\"", "\"n_rep\": 3, \"n_reps\"");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(Error::Config(_))));
        let bad = CASE4.replace("\"q\": 2", "\"q\": 2, \"u\": 1.0");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn schema_and_validation() {
        let bad = CASE4.replace("\"schema\": 1", "\"schema\": 2");
        assert!(ExperimentConfig::from_json(&bad).is_err());
        let bad = CASE4.replace("[1.0, 0.4]", "[1.0, 1.4]");
        let e = ExperimentConfig::from_json(&bad).unwrap().validate().unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
