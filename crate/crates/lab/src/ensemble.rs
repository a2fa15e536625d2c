//! Replicated evaluation of `Y(t)` over simulated fields.

use gneiting_core::covariance::GneitingCovariance;
use gneiting_core::functional::{evaluate_functional, FunctionalResult, ReplicateEnsemble};
use gneiting_core::geometry::{rate_admissible, WindowSpec};
use gneiting_core::hermite::FunctionalKind;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fieldsim::{ClipReport, FieldSampler, GridSpec, SampleMethod, SamplerOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleOptions {
    pub h: f64,
    pub node_cap: usize,
    pub sampler: SamplerOptions,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self { h: 1.0, node_cap: crate::fieldsim::DEFAULT_NODE_CAP, sampler: SamplerOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRun {
    pub ensemble: ReplicateEnsemble,
    pub method: SampleMethod,
    pub embedding_factor: usize,
    pub clip: Option<ClipReport>,
    /// Rate condition on the growth schedule; a violation is reported, not fatal.
    pub assumption_ok: bool,
    pub nodes: usize,
}

/// `n_reps` replicates of `Y(t)`; replicate `2p` and `2p + 1` share stream `p`.
/// Runs on the current rayon pool and is deterministic for any pool size.
pub fn run_ensemble(
    c: &GneitingCovariance,
    window: &WindowSpec,
    t: f64,
    phi: &FunctionalKind,
    n_reps: usize,
    master_seed: u64,
    opts: &EnsembleOptions,
) -> Result<EnsembleRun> {
    if n_reps < 2 {
        return Err(gneiting_core::Error::VarUndefined.into());
    }
    let assumption_ok = rate_admissible(&window.schedule, &c.factor2, c.d1());
    if !assumption_ok {
        log::warn!("growth schedule violates the rate condition; results are reported with a flag");
    }
    let grid = GridSpec::with_cap(window, t, opts.h, opts.node_cap)?;
    let sampler = FieldSampler::new(c, &grid, &opts.sampler)?;
    let pairs = n_reps.div_ceil(2);
    let cell = grid.cell_volume();
    let eval = |values: &[f64], index: usize| {
        evaluate_functional(&grid.active_values(values), phi, t, grid.window_volume, cell)
            .map_err(|e| Error::Replicate { index, source: Box::new(e.into()) })
    };
    let per_pair: Vec<Result<(FunctionalResult, FunctionalResult)>> = (0..pairs)
        .into_par_iter()
        .map(|p| {
            let (a, b) = sampler.sample_pair(&mut FieldSampler::stream(master_seed, p as u64));
            Ok((eval(&a, 2 * p)?, eval(&b, 2 * p + 1)?))
        })
        .collect();
    let mut results = Vec::with_capacity(2 * pairs);
    for r in per_pair {
        let (a, b) = r?;
        results.push(a);
        results.push(b);
    }
    results.truncate(n_reps);
    Ok(EnsembleRun {
        ensemble: ReplicateEnsemble::new(results)?,
        method: sampler.method,
        embedding_factor: sampler.embedding_factor,
        clip: sampler.clip,
        assumption_ok,
        nodes: grid.active_nodes(),
    })
}
