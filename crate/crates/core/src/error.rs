use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("hermite polynomial overflow at q={q}, x={x}")]
    Overflow { q: usize, x: f64 },
    #[error("quadrature did not converge (change {change:e})")]
    QuadratureNotConverged { change: f64 },
    #[error("no nonzero hermite coefficient up to order {0}")]
    RankNotFound(usize),
    #[error("series tail bound {bound:e} exceeds 1% of partial sum {sum:e}")]
    SeriesTail { bound: f64, sum: f64 },
    #[error("relative standard error {rel_stderr:.4} exceeds budget tolerance")]
    SingularityBudget { rel_stderr: f64 },
    #[error("power-law exponent {alpha} must lie in (0, {limit})")]
    InvalidAlpha { alpha: f64, limit: f64 },
    #[error("characteristic-function series diverging: last term {last:e}, sum {sum:e}")]
    SeriesDiverging { last: f64, sum: f64 },
    #[error("fourier inversion unstable: aliasing bound {bound:e}")]
    InversionUnstable { bound: f64 },
    #[error("cdf unavailable: {0}")]
    CdfUnavailable(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("t values must be strictly increasing")]
    DegenerateLadder,
    #[error("variance undefined for fewer than two replicates")]
    VarUndefined,
    #[error("non-finite functional value at node {0}")]
    NonFinite(usize),
}

pub type Result<T> = core::result::Result<T, Error>;
