//! Riemann sums of `phi(B)` over a grid and the replicate ensemble reducer.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hermite::FunctionalKind;
use crate::stats::{self, JackknifeEstimate, KStats};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalResult {
    pub t: f64,
    /// `h^d sum_nodes phi(B_node)`.
    pub y_raw: f64,
    pub window_volume: f64,
    pub grid_cell_volume: f64,
}

/// Midpoint Riemann sum of `phi` over the node values of one field sample.
pub fn evaluate_functional(
    values: &[f64],
    phi: &FunctionalKind,
    t: f64,
    window_volume: f64,
    grid_cell_volume: f64,
) -> Result<FunctionalResult> {
    let mut terms = Vec::with_capacity(values.len());
    for (i, &b) in values.iter().enumerate() {
        let v = phi.eval(b);
        if !v.is_finite() {
            return Err(Error::NonFinite(i));
        }
        terms.push(v);
    }
    let y_raw = grid_cell_volume * stats::pairwise_sum(&terms);
    Ok(FunctionalResult { t, y_raw, window_volume, grid_cell_volume })
}

/// Replicates of `Y(t)` at one `t` with moments and jackknife errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateEnsemble {
    pub t: f64,
    pub results: Vec<FunctionalResult>,
    pub n: usize,
    pub mean: f64,
    pub var: f64,
    pub k_stats: KStats,
    pub mean_stderr: f64,
    pub var_stderr: f64,
    /// Standardised `k3 / k2^(3/2)`, when at least five replicates exist.
    pub skewness: Option<JackknifeEstimate>,
    /// Standardised `k4 / k2^2`.
    pub excess_kurtosis: Option<JackknifeEstimate>,
}

impl ReplicateEnsemble {
    /// Reduces results given in replicate order.
    pub fn new(results: Vec<FunctionalResult>) -> Result<Self> {
        if results.len() < 2 {
            return Err(Error::VarUndefined);
        }
        let t = results[0].t;
        if results.iter().any(|r| r.t != t) {
            return Err(Error::InvalidParams("ensemble mixes different t".into()));
        }
        let y = Self::raw(&results);
        let k_stats = stats::k_statistics(&y)?;
        let n = y.len();
        let (var_stderr, skewness, excess_kurtosis) = if n >= 5 {
            (
                stats::jackknife_kstat(&y, &|k| k.k2)?.stderr,
                Some(stats::standardized_cumulant(&y, 3)?),
                Some(stats::standardized_cumulant(&y, 4)?),
            )
        } else {
            (f64::NAN, None, None)
        };
        Ok(Self {
            t,
            n,
            mean: k_stats.mean,
            var: k_stats.k2,
            mean_stderr: libm::sqrt(k_stats.k2 / n as f64),
            var_stderr,
            skewness,
            excess_kurtosis,
            k_stats,
            results,
        })
    }

    fn raw(results: &[FunctionalResult]) -> Vec<f64> {
        results.iter().map(|r| r.y_raw).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        Self::raw(&self.results)
    }

    /// `(Y - mean) / sd` per replicate.
    pub fn standardized(&self) -> Vec<f64> {
        let sd = libm::sqrt(self.var);
        self.results.iter().map(|r| (r.y_raw - self.mean) / sd).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::norm_sf;
    use rand_chacha::ChaCha8Rng;
    use rand_core::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn constant_functional_is_volume() {
        let phi = FunctionalKind::HermitePoly(0);
        let r = evaluate_functional(&[0.3, -1.0, 2.0, 0.0], &phi, 2.0, 4.0, 0.25).unwrap();
        assert!((r.y_raw - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_node_h2() {
        let phi = FunctionalKind::HermitePoly(2);
        let r = evaluate_functional(&[1.7], &phi, 1.0, 0.5, 0.5).unwrap();
        assert!((r.y_raw - 0.5 * (1.7 * 1.7 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn non_finite_values_are_reported() {
        let phi = FunctionalKind::HermitePoly(2);
        assert_eq!(evaluate_functional(&[0.0, f64::NAN], &phi, 1.0, 1.0, 1.0), Err(Error::NonFinite(1)));
    }

    #[test]
    fn indicator_mean_rate() {
        let phi = FunctionalKind::IndicatorAbs(1.0);
        let z = normals(200_000, 1);
        let r = evaluate_functional(&z, &phi, 1.0, 200_000.0, 1.0).unwrap();
        let p = 2.0 * norm_sf(1.0);
        let se = libm::sqrt(p * (1.0 - p) / 200_000.0);
        assert!((r.y_raw / r.window_volume - p).abs() < 4.0 * se);
    }

    #[test]
    fn ensemble_cumulants_of_chi_square() {
        let phi = FunctionalKind::HermitePoly(2);
        let res: Vec<FunctionalResult> =
            normals(100_000, 2).iter().map(|&b| evaluate_functional(&[b], &phi, 1.0, 1.0, 1.0).unwrap()).collect();
        let e = ReplicateEnsemble::new(res).unwrap();
        let g = e.skewness.unwrap();
        assert!((g.value - 2.0 * libm::sqrt(2.0)).abs() < 3.0 * g.stderr, "{g:?}");
        let one = ReplicateEnsemble::new(e.results[..1].to_vec());
        assert_eq!(one, Err(Error::VarUndefined));
    }
}
