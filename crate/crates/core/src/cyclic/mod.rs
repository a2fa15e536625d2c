//! Cyclic-product integrals `c_k(D; f)` and their diagnostics.

pub mod galerkin;
pub mod mc;
pub mod profile;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use mc::{jackknife, BatchSums, Block, ChainSampler};
pub use profile::Profile;

use crate::covariance::{GneitingCovariance, RadialCovariance};
use crate::error::{Error, Result};
use crate::geometry::{ConvexBody, WindowSpec};
use crate::regimes::effective_separable_factors;

pub const MAX_K: usize = 8;
/// Relative standard error above which Monte Carlo results are rejected.
pub const MAX_REL_STDERR: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// `|z|^-alpha` on a single body.
    PowerLaw { alpha: f64 },
    Radial(RadialCovariance),
    /// `c(t |z|) / c(t)`.
    Rescaled(RadialCovariance, f64),
    Gneiting(GneitingCovariance),
    /// `f1(|z1|) f2(|z2|)` on a product domain.
    Separable(Profile, Profile),
}

impl Kernel {
    pub fn blocks(&self) -> usize {
        match self {
            Kernel::Gneiting(_) | Kernel::Separable(..) => 2,
            _ => 1,
        }
    }

    /// Kernel value from the per-block norms of the increment.
    #[inline]
    pub fn eval(&self, norms: &[f64]) -> f64 {
        match self {
            Kernel::PowerLaw { alpha } => {
                if *alpha == 0.0 {
                    1.0
                } else {
                    libm::pow(norms[0], -alpha)
                }
            }
            Kernel::Radial(c) => c.eval(norms[0]),
            Kernel::Rescaled(c, t) => c.eval(t * norms[0]) / c.eval(*t),
            Kernel::Gneiting(g) => g.eval_norms(norms[0], norms[1]),
            Kernel::Separable(a, b) => a.eval(norms[0]) * b.eval(norms[1]),
        }
    }

    /// Single-block radial profile, if any.
    pub fn profile(&self) -> Option<Profile> {
        match self {
            Kernel::PowerLaw { alpha } => Some(Profile::Power(*alpha)),
            Kernel::Radial(c) => Some(Profile::Radial(c.clone())),
            Kernel::Rescaled(c, t) => Some(Profile::Rescaled(c.clone(), *t)),
            _ => None,
        }
    }

    fn singular(&self) -> bool {
        match self {
            Kernel::PowerLaw { alpha } => *alpha > 0.0,
            Kernel::Separable(a, b) => a.singular_exponent() > 0.0 || b.singular_exponent() > 0.0,
            _ => false,
        }
    }

    fn proposal_exponents(&self, dims: &[usize]) -> Vec<f64> {
        let cap = |rho: f64, d: usize| if rho.is_finite() { rho.min(0.9 * d as f64) } else { 0.9 * d as f64 };
        match self {
            Kernel::PowerLaw { alpha } => vec![*alpha],
            Kernel::Radial(c) | Kernel::Rescaled(c, _) => vec![cap(c.rho, dims[0])],
            Kernel::Gneiting(g) => {
                let rho2 = match effective_separable_factors(g, 2) {
                    Ok((_, c2)) => c2.rho,
                    Err(_) => g.factor2.rho,
                };
                vec![cap(g.factor1.rho, dims[0]), cap(rho2, dims[1])]
            }
            Kernel::Separable(a, b) => {
                let e = |p: &Profile, d: usize| match p {
                    Profile::Power(al) => *al,
                    _ => cap(p.tail_index(), d),
                };
                vec![e(a, dims[0]), e(b, dims[1])]
            }
        }
    }

    fn check(&self, domain: &Domain) -> Result<()> {
        if self.blocks() != domain.blocks.len() {
            return Err(Error::InvalidParams(format!(
                "kernel has {} blocks, domain has {}",
                self.blocks(),
                domain.blocks.len()
            )));
        }
        let dims: Vec<usize> = domain.blocks.iter().map(|(b, _)| b.dim).collect();
        let check_alpha = |a: f64, d: usize| {
            if !(a >= 0.0 && a < 0.5 * d as f64) {
                Err(Error::InvalidAlpha { alpha: a, limit: 0.5 * d as f64 })
            } else {
                Ok(())
            }
        };
        let check_dim = |c: &RadialCovariance, d: usize| {
            if c.dim != d {
                Err(Error::InvalidParams(format!("profile dim {} does not match body dim {d}", c.dim)))
            } else {
                Ok(())
            }
        };
        let check_profile = |p: &Profile, d: usize| match p {
            Profile::Power(a) => check_alpha(*a, d),
            Profile::Radial(c) | Profile::Rescaled(c, _) => check_dim(c, d),
        };
        match self {
            Kernel::PowerLaw { alpha } => check_alpha(*alpha, dims[0]),
            Kernel::Radial(c) | Kernel::Rescaled(c, _) => check_dim(c, dims[0]),
            Kernel::Gneiting(g) => {
                check_dim(&g.factor1, dims[0])?;
                check_dim(&g.factor2, dims[1])
            }
            Kernel::Separable(a, b) => {
                check_profile(a, dims[0])?;
                check_profile(b, dims[1])
            }
        }
    }
}

/// Product of scaled bodies `prod s_b B_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub blocks: Vec<(ConvexBody, f64)>,
}

impl Domain {
    pub fn body(b: ConvexBody) -> Self {
        Self { blocks: vec![(b, 1.0)] }
    }

    pub fn scaled(b: ConvexBody, t: f64) -> Self {
        Self { blocks: vec![(b, t)] }
    }

    pub fn product(b1: ConvexBody, s1: f64, b2: ConvexBody, s2: f64) -> Self {
        Self { blocks: vec![(b1, s1), (b2, s2)] }
    }

    /// `t1 D1 x t2 D2`.
    pub fn window(w: &WindowSpec, t: f64) -> Self {
        Self::product(w.body1.clone(), w.schedule.t1(t), w.body2.clone(), w.schedule.t2(t))
    }

    fn scaled_body(&self, b: usize) -> ConvexBody {
        let (body, s) = &self.blocks[b];
        body.scaled(*s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    TensorQuadrature,
    MonteCarlo,
    QuasiMonteCarlo,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::TensorQuadrature => "tensor-quadrature",
            Method::MonteCarlo => "monte-carlo",
            Method::QuasiMonteCarlo => "quasi-monte-carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub batches: usize,
    pub per_batch: usize,
    pub seed: u64,
    /// Coarsest quadrature resolution; the path uses `cells`, `2 cells`, `4 cells`.
    pub cells: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self { batches: 32, per_batch: 20_000, seed: 1, cells: 100 }
    }
}

impl Budget {
    pub fn points(&self) -> usize {
        self.batches * self.per_batch
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CyclicCoefficient {
    pub k: usize,
    pub value: f64,
    pub method: Method,
    pub stderr: Option<f64>,
    pub n_points: usize,
}

/// Runs independent batches; implementations may parallelise.
pub trait BatchExecutor {
    fn run(&self, n: usize, f: &(dyn Fn(usize) -> BatchSums + Sync)) -> Vec<BatchSums>;
}

/// In-order execution on the calling thread.
pub struct Sequential;

impl BatchExecutor for Sequential {
    fn run(&self, n: usize, f: &(dyn Fn(usize) -> BatchSums + Sync)) -> Vec<BatchSums> {
        (0..n).map(f).collect()
    }
}

fn check_k(k: usize) -> Result<()> {
    if !(2..=MAX_K).contains(&k) {
        return Err(Error::InvalidParams(format!("k={k} outside 2..={MAX_K}")));
    }
    Ok(())
}

fn sampler(kernel: &Kernel, domain: &Domain, k: usize, surrogate: Option<(Profile, Profile)>) -> ChainSampler {
    let dims: Vec<usize> = domain.blocks.iter().map(|(b, _)| b.dim).collect();
    let expo = kernel.proposal_exponents(&dims);
    let blocks = domain
        .blocks
        .iter()
        .zip(expo)
        .map(|((b, s), a)| Block::new(b.clone(), *s, a))
        .collect();
    ChainSampler { blocks, kernel: kernel.clone(), surrogate, k }
}

fn run_batches(s: &ChainSampler, budget: &Budget, qmc: bool, exec: &dyn BatchExecutor) -> Vec<BatchSums> {
    let (seed, per) = (budget.seed, budget.per_batch);
    exec.run(budget.batches, &|b| s.run_batch(seed, b, per, qmc))
}

fn ratio(v: &[f64; 6], num: usize, den: usize, k: usize) -> f64 {
    if k == 2 {
        v[num] / v[den]
    } else {
        v[num] / libm::pow(v[den], 0.5 * k as f64)
    }
}

/// Estimate with an optional standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: Option<f64>,
    pub n_points: usize,
    pub method: Method,
}

/// Quadrature of `N_k` for `k = 2..=kmax` (index `k`) on a single interval.
fn quadrature_table(f: &Profile, body: &ConvexBody, kmax: usize, cells: usize) -> Result<(Vec<f64>, usize)> {
    if body.dim != 1 {
        return Err(Error::Unsupported("tensor quadrature is implemented for one-dimensional bodies".into()));
    }
    let n2 = galerkin::pair_integral(f, 2.0, body)?;
    let mut out = vec![0.0; kmax + 1];
    if kmax >= 2 {
        out[2] = n2;
    }
    if kmax < 3 {
        return Ok((out, 0));
    }
    let sums: Vec<Vec<f64>> = (0..3)
        .map(|i| galerkin::power_sums(&galerkin::spectrum(f, body, cells << i), kmax))
        .collect();
    for k in 3..=kmax {
        out[k] = galerkin::aitken([sums[0][k], sums[1][k], sums[2][k]]);
    }
    Ok((out, 7 * cells))
}

/// Quadrature of `N_k` and `N_2` on a single interval.
fn quadrature_block(f: &Profile, body: &ConvexBody, k: usize, cells: usize) -> Result<(f64, f64, usize)> {
    let (t, pts) = quadrature_table(f, body, k, cells)?;
    Ok((t[k], t[2], pts))
}

fn block_profiles(kernel: &Kernel) -> Option<Vec<Profile>> {
    match kernel {
        Kernel::Separable(a, b) => Some(vec![a.clone(), b.clone()]),
        _ => kernel.profile().map(|p| vec![p]),
    }
}

pub fn cyclic_integral(kernel: &Kernel, domain: &Domain, k: usize, method: Method, budget: &Budget) -> Result<CyclicCoefficient> {
    cyclic_integral_with(kernel, domain, k, method, budget, &Sequential)
}

/// `c_k = N_k / N_2^(k/2)` with the numerator and denominator from one estimator.
pub fn cyclic_integral_with(
    kernel: &Kernel,
    domain: &Domain,
    k: usize,
    method: Method,
    budget: &Budget,
    exec: &dyn BatchExecutor,
) -> Result<CyclicCoefficient> {
    check_k(k)?;
    kernel.check(domain)?;
    if *kernel == (Kernel::PowerLaw { alpha: 0.0 }) {
        // N_k = vol^k
        let stderr = (method != Method::TensorQuadrature).then_some(0.0);
        return Ok(CyclicCoefficient { k, value: 1.0, method, stderr, n_points: 0 });
    }
    match method {
        Method::TensorQuadrature => {
            let profiles = block_profiles(kernel)
                .ok_or_else(|| Error::Unsupported("tensor quadrature needs a separable kernel".into()))?;
            let mut value = 1.0;
            let mut pts = 0;
            for (b, f) in profiles.iter().enumerate() {
                let (nk, n2, p) = quadrature_block(f, &domain.scaled_body(b), k, budget.cells)?;
                value *= if k == 2 { nk / n2 } else { nk / libm::pow(n2, 0.5 * k as f64) };
                pts += p;
            }
            Ok(CyclicCoefficient { k, value, method, stderr: None, n_points: pts })
        }
        Method::MonteCarlo | Method::QuasiMonteCarlo => {
            let qmc = method == Method::QuasiMonteCarlo;
            if qmc && kernel.singular() {
                return Err(Error::Unsupported("quasi-Monte Carlo is offered for bounded kernels only".into()));
            }
            let s = sampler(kernel, domain, k, None);
            let batches = run_batches(&s, budget, qmc, exec);
            let (value, se) = jackknife(&[&batches], &|m| ratio(&m[0], 0, 1, k));
            let se = if k == 2 { 0.0 } else { se };
            check_budget(value, se)?;
            Ok(CyclicCoefficient { k, value, method, stderr: Some(se), n_points: budget.points() })
        }
    }
}

fn check_budget(value: f64, se: f64) -> Result<()> {
    let rel = se / value.abs();
    if (rel.is_nan() || rel > MAX_REL_STDERR) && !(value == 0.0 && se == 0.0) {
        return Err(Error::SingularityBudget { rel_stderr: rel });
    }
    Ok(())
}

/// Un-normalised cyclic integral `N_k(D; f) = int_{D^k} prod f(x_i - x_{i+1})`.
pub fn cyclic_numerator_with(
    kernel: &Kernel,
    domain: &Domain,
    k: usize,
    method: Method,
    budget: &Budget,
    exec: &dyn BatchExecutor,
) -> Result<Estimate> {
    check_k(k)?;
    kernel.check(domain)?;
    match method {
        Method::TensorQuadrature => {
            let profiles = block_profiles(kernel)
                .ok_or_else(|| Error::Unsupported("tensor quadrature needs a separable kernel".into()))?;
            let mut value = 1.0;
            let mut pts = 0;
            for (b, f) in profiles.iter().enumerate() {
                let (nk, _, p) = quadrature_block(f, &domain.scaled_body(b), k, budget.cells)?;
                value *= nk;
                pts += p;
            }
            Ok(Estimate { value, stderr: None, n_points: pts, method })
        }
        Method::MonteCarlo | Method::QuasiMonteCarlo => {
            let qmc = method == Method::QuasiMonteCarlo;
            if qmc && kernel.singular() {
                return Err(Error::Unsupported("quasi-Monte Carlo is offered for bounded kernels only".into()));
            }
            let s = sampler(kernel, domain, k, None);
            let batches = run_batches(&s, budget, qmc, exec);
            let (value, se) = jackknife(&[&batches], &|m| m[0][0]);
            check_budget(value, se)?;
            Ok(Estimate { value, stderr: Some(se), n_points: budget.points(), method })
        }
    }
}

/// Normalised per-block coefficient for the kernel `|z|^-alpha`.
fn power_block_ck(alpha: f64, body: &ConvexBody, k: usize, budget: &Budget, exec: &dyn BatchExecutor) -> Result<CyclicCoefficient> {
    let kernel = Kernel::PowerLaw { alpha };
    let method = if body.dim == 1 { Method::TensorQuadrature } else { Method::MonteCarlo };
    cyclic_integral_with(&kernel, &Domain::body(body.clone()), k, method, budget, exec)
}

pub fn rosenblatt_ck(alpha: f64, beta: f64, body1: &ConvexBody, body2: &ConvexBody, k: usize, budget: &Budget) -> Result<CyclicCoefficient> {
    rosenblatt_ck_with(alpha, beta, body1, body2, k, budget, &Sequential)
}

/// `c_k^{alpha,beta} = 2^(-k/2) c_k(D1; |.|^-alpha) c_k(D2; |.|^-beta)`.
pub fn rosenblatt_ck_with(
    alpha: f64,
    beta: f64,
    body1: &ConvexBody,
    body2: &ConvexBody,
    k: usize,
    budget: &Budget,
    exec: &dyn BatchExecutor,
) -> Result<CyclicCoefficient> {
    for (a, b) in [(alpha, body1), (beta, body2)] {
        if !(a > 0.0 && a < 0.5 * b.dim as f64) {
            return Err(Error::InvalidAlpha { alpha: a, limit: 0.5 * b.dim as f64 });
        }
    }
    check_k(k)?;
    let scale = libm::pow(2.0, -0.5 * k as f64);
    if k == 2 {
        return Ok(CyclicCoefficient { k, value: 0.5, method: Method::TensorQuadrature, stderr: None, n_points: 0 });
    }
    let c1 = power_block_ck(alpha, body1, k, budget, exec)?;
    let c2 = power_block_ck(beta, body2, k, budget, exec)?;
    let value = scale * c1.value * c2.value;
    let rel = |c: &CyclicCoefficient| c.stderr.map_or(0.0, |s| s / c.value);
    let stderr = if c1.stderr.is_some() || c2.stderr.is_some() {
        Some(value * libm::sqrt(rel(&c1) * rel(&c1) + rel(&c2) * rel(&c2)))
    } else {
        None
    };
    let method = if stderr.is_some() { Method::MonteCarlo } else { Method::TensorQuadrature };
    Ok(CyclicCoefficient { k, value, method, stderr, n_points: c1.n_points + c2.n_points })
}

/// `c_k^{alpha,beta}` for `k = 2..=kmax`, sharing the per-block work across orders.
pub fn rosenblatt_ck_table_with(
    alpha: f64,
    beta: f64,
    body1: &ConvexBody,
    body2: &ConvexBody,
    kmax: usize,
    budget: &Budget,
    exec: &dyn BatchExecutor,
) -> Result<Vec<CyclicCoefficient>> {
    check_k(kmax)?;
    if body1.dim != 1 || body2.dim != 1 {
        return (2..=kmax).map(|k| rosenblatt_ck_with(alpha, beta, body1, body2, k, budget, exec)).collect();
    }
    for (a, b) in [(alpha, body1), (beta, body2)] {
        if !(a > 0.0 && a < 0.5 * b.dim as f64) {
            return Err(Error::InvalidAlpha { alpha: a, limit: 0.5 * b.dim as f64 });
        }
    }
    let (t1, p1) = quadrature_table(&Profile::Power(alpha), body1, kmax, budget.cells)?;
    let (t2, p2) = quadrature_table(&Profile::Power(beta), body2, kmax, budget.cells)?;
    Ok((2..=kmax)
        .map(|k| {
            let value = if k == 2 {
                0.5
            } else {
                let h = 0.5 * k as f64;
                libm::pow(2.0, -h) * t1[k] / libm::pow(t1[2], h) * t2[k] / libm::pow(t2[2], h)
            };
            CyclicCoefficient { k, value, method: Method::TensorQuadrature, stderr: None, n_points: p1 + p2 }
        })
        .collect())
}

/// `||C^{ok}||_{L^1((t D)^k)} / (t^d c(t))^k`, computed on `D` with the rescaled kernel.
pub fn appendix_a_ratio(c: &RadialCovariance, body: &ConvexBody, k: usize, t: f64, method: Method, budget: &Budget) -> Result<Estimate> {
    appendix_a_ratio_with(c, body, k, t, method, budget, &Sequential)
}

pub fn appendix_a_ratio_with(
    c: &RadialCovariance,
    body: &ConvexBody,
    k: usize,
    t: f64,
    method: Method,
    budget: &Budget,
    exec: &dyn BatchExecutor,
) -> Result<Estimate> {
    let d = body.dim as f64;
    if !(c.rho > 0.0 && c.rho < 0.5 * d) {
        return Err(Error::InvalidParams(format!("needs 0 < rho < d/2, got rho={}", c.rho)));
    }
    cyclic_numerator_with(&Kernel::Rescaled(c.clone(), t), &Domain::body(body.clone()), k, method, budget, exec)
}

/// Limit `||f_rho^{ok}||_{L^1(D^k)}` of the ratio sequence.
pub fn appendix_a_target(rho: f64, body: &ConvexBody, k: usize, method: Method, budget: &Budget) -> Result<Estimate> {
    cyclic_numerator_with(&Kernel::PowerLaw { alpha: rho }, &Domain::body(body.clone()), k, method, budget, &Sequential)
}

/// One point of a separability-gap sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapPoint {
    pub t: f64,
    pub gap: f64,
    pub stderr: f64,
    /// `c_k` of the kernel on the window.
    pub joint: f64,
    /// Product of the block coefficients of the separable surrogate.
    pub product: f64,
    /// Standard error of `gap(t) - gap(previous t)` from the paired streams.
    pub diff_stderr: Option<f64>,
}

pub fn separability_gap(c: &GneitingCovariance, window: &WindowSpec, k: usize, ts: &[f64], budget: &Budget) -> Result<Vec<GapPoint>> {
    separability_gap_with(c, window, k, ts, budget, &Sequential)
}

pub fn separability_gap_with(
    c: &GneitingCovariance,
    window: &WindowSpec,
    k: usize,
    ts: &[f64],
    budget: &Budget,
    exec: &dyn BatchExecutor,
) -> Result<Vec<GapPoint>> {
    let (c1, c2) = effective_separable_factors(c, 2)?;
    let kernel = Kernel::Gneiting(c.clone());
    kernel_gap_with(&kernel, (Profile::Radial(c1), Profile::Radial(c2)), window, k, ts, budget, exec)
}

/// `|c_k(window; kernel) - c_k(t1 D1; f1) c_k(t2 D2; f2)|` along `ts`, all
/// terms estimated from the same chains; every `t` reuses the same streams.
pub fn kernel_gap_with(
    kernel: &Kernel,
    surrogate: (Profile, Profile),
    window: &WindowSpec,
    k: usize,
    ts: &[f64],
    budget: &Budget,
    exec: &dyn BatchExecutor,
) -> Result<Vec<GapPoint>> {
    check_k(k)?;
    let gap_of = move |m: &[f64; 6]| {
        let joint = ratio(m, 0, 1, k);
        let prod = ratio(m, 2, 3, k) * ratio(m, 4, 5, k);
        (joint - prod).abs()
    };
    let mut out: Vec<GapPoint> = Vec::with_capacity(ts.len());
    let mut prev: Option<Vec<BatchSums>> = None;
    for &t in ts {
        let domain = Domain::window(window, t);
        kernel.check(&domain)?;
        let s = sampler(kernel, &domain, k, Some(surrogate.clone()));
        let batches = run_batches(&s, budget, false, exec);
        let (gap, se) = jackknife(&[&batches], &|m| gap_of(&m[0]));
        let totals = batches.iter().fold(BatchSums::default(), |a, b| a.merge(b));
        let mut mean = totals.v;
        for v in mean.iter_mut() {
            *v /= totals.n as f64;
        }
        let diff_stderr = prev
            .as_ref()
            .map(|p| jackknife(&[p, &batches], &|m| gap_of(&m[1]) - gap_of(&m[0])).1);
        out.push(GapPoint {
            t,
            gap,
            stderr: se,
            joint: ratio(&mean, 0, 1, k),
            product: ratio(&mean, 2, 3, k) * ratio(&mean, 4, 5, k),
            diff_stderr,
        });
        prev = Some(batches);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{make_radial, Family, Role};
    use approx::assert_relative_eq;

    const C3_02: f64 = 0.9008431283869999;
    const C4_02: f64 = 0.8625298424814809;
    const C3_04: f64 = 0.4183498886027492;
    const C4_04: f64 = 0.28262622962326156;

    fn unit() -> Domain {
        Domain::body(ConvexBody::unit_box(1))
    }

    fn small() -> Budget {
        Budget { batches: 16, per_batch: 4000, seed: 7, cells: 100 }
    }

    #[test]
    fn quadrature_golden_values() {
        let b = Budget::default();
        for (alpha, k, expect) in [(0.2, 3, C3_02), (0.2, 4, C4_02), (0.4, 3, C3_04), (0.4, 4, C4_04)] {
            let c = cyclic_integral(&Kernel::PowerLaw { alpha }, &unit(), k, Method::TensorQuadrature, &b).unwrap();
            assert_relative_eq!(c.value, expect, max_relative = 1e-4);
        }
    }

    #[test]
    fn k2_is_exactly_one() {
        let g = make_radial(Family::GenCauchy, &[0.5, 0.7], 1, Role::Factor1).unwrap();
        for kernel in [Kernel::PowerLaw { alpha: 0.4 }, Kernel::Radial(g)] {
            for m in [Method::TensorQuadrature, Method::MonteCarlo] {
                let c = cyclic_integral(&kernel, &unit(), 2, m, &small()).unwrap();
                assert_eq!(c.value, 1.0);
            }
        }
    }

    #[test]
    fn constant_kernel_gives_one() {
        let d = Domain::body(ConvexBody::ball(2, 1.3));
        for k in 2..=5 {
            let c = cyclic_integral(&Kernel::PowerLaw { alpha: 0.0 }, &d, k, Method::MonteCarlo, &small()).unwrap();
            assert_eq!(c.value, 1.0);
        }
    }

    #[test]
    fn monte_carlo_agrees_with_quadrature() {
        let b = Budget { batches: 32, per_batch: 20_000, seed: 3, cells: 100 };
        let c = cyclic_integral(&Kernel::PowerLaw { alpha: 0.4 }, &unit(), 3, Method::MonteCarlo, &b).unwrap();
        let se = c.stderr.unwrap();
        assert!((c.value - C3_04).abs() < 4.0 * se, "{} +- {se}", c.value);
    }

    #[test]
    fn invalid_alpha_rejected() {
        let e = cyclic_integral(&Kernel::PowerLaw { alpha: 0.5 }, &unit(), 3, Method::MonteCarlo, &small());
        assert!(matches!(e, Err(Error::InvalidAlpha { .. })));
        let e = cyclic_integral(&Kernel::PowerLaw { alpha: 0.3 }, &unit(), 9, Method::MonteCarlo, &small());
        assert!(e.is_err());
    }

    #[test]
    fn qmc_refuses_singular_kernels() {
        let e = cyclic_integral(&Kernel::PowerLaw { alpha: 0.3 }, &unit(), 3, Method::QuasiMonteCarlo, &small());
        assert!(matches!(e, Err(Error::Unsupported(_))));
    }

    #[test]
    fn qmc_matches_quadrature_for_smooth_kernel() {
        let g = make_radial(Family::GenCauchy, &[1.0, 0.3], 1, Role::Factor1).unwrap();
        let d = Domain::scaled(ConvexBody::unit_box(1), 8.0);
        let q = cyclic_integral(&Kernel::Radial(g.clone()), &d, 3, Method::TensorQuadrature, &Budget::default()).unwrap();
        let m = cyclic_integral(&Kernel::Radial(g), &d, 3, Method::QuasiMonteCarlo, &small()).unwrap();
        assert!((q.value - m.value).abs() < 4.0 * m.stderr.unwrap() + 1e-3, "{} vs {}", q.value, m.value);
    }

    #[test]
    fn rosenblatt_k2_and_constant_limit() {
        let u = ConvexBody::unit_box(1);
        let c = rosenblatt_ck(0.3, 0.28, &u, &u, 2, &Budget::default()).unwrap();
        assert_eq!(c.value, 0.5);
        let c = rosenblatt_ck(1e-9, 1e-9, &u, &u, 3, &Budget::default()).unwrap();
        assert_relative_eq!(c.value, 2f64.powf(-1.5), max_relative = 1e-6);
    }

    #[test]
    fn rosenblatt_ck_golden_product() {
        let u = ConvexBody::unit_box(1);
        let c = rosenblatt_ck(0.3, 0.28, &u, &u, 3, &Budget::default()).unwrap();
        assert_relative_eq!(c.value, 2f64.powf(-1.5) * 0.7308192149497349 * 0.7743843388860522, max_relative = 1e-4);
    }

    #[test]
    fn table_matches_single_orders() {
        let u = ConvexBody::unit_box(1);
        let b = Budget::default();
        let t = rosenblatt_ck_table_with(0.3, 0.28, &u, &u, 5, &b, &Sequential).unwrap();
        for c in &t {
            let one = rosenblatt_ck(0.3, 0.28, &u, &u, c.k, &b).unwrap();
            assert_relative_eq!(c.value, one.value, max_relative = 1e-12);
        }
    }

    #[test]
    fn appendix_ratio_is_scale_free_for_power_laws() {
        // a pure power law rescales exactly: the ratio equals the target at every t
        let u = ConvexBody::unit_box(1);
        let b = Budget::default();
        let target = appendix_a_target(0.3, &u, 3, Method::TensorQuadrature, &b).unwrap();
        assert_relative_eq!(target.value, 4.932566061490959, max_relative = 1e-4);
    }

    #[test]
    fn separable_kernel_has_no_gap() {
        let c1 = make_radial(Family::GenCauchy, &[1.0, 0.4], 1, Role::Factor1).unwrap();
        let c2 = make_radial(Family::GenCauchy, &[1.0, 0.3], 1, Role::Factor1).unwrap();
        let (p1, p2) = (Profile::Radial(c1), Profile::Radial(c2));
        let kernel = Kernel::Separable(p1.clone(), p2.clone());
        let u = ConvexBody::unit_box(1);
        let w = WindowSpec { body1: u.clone(), body2: u, schedule: crate::geometry::GrowthSchedule::new(1.0, 1.0).unwrap() };
        let pts = kernel_gap_with(&kernel, (p1, p2), &w, 3, &[4.0, 8.0], &small(), &Sequential).unwrap();
        for p in &pts {
            assert!(p.gap < 3.0 * p.stderr, "{p:?}");
        }
        assert!(pts[1].diff_stderr.is_some());
    }
}
