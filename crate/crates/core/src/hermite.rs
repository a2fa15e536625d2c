//! Probabilists' Hermite polynomials and Hermite expansions.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::quad;
use crate::special::{factorial, gamma, norm_pdf, norm_sf};

pub const DEFAULT_QMAX: usize = 40;
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Pointwise map `phi` whose Hermite expansion is needed.
#[derive(Clone)]
pub enum FunctionalKind {
    HermitePoly(usize),
    /// `1(|x| >= u)`.
    IndicatorAbs(f64),
    /// `1(x >= u)`.
    Indicator(f64),
    /// `x^p` for integer `p`, `|x|^p` otherwise.
    Power(f64),
    UserCallable(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for FunctionalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionalKind::HermitePoly(q) => write!(f, "HermitePoly({q})"),
            FunctionalKind::IndicatorAbs(u) => write!(f, "IndicatorAbs({u})"),
            FunctionalKind::Indicator(u) => write!(f, "Indicator({u})"),
            FunctionalKind::Power(p) => write!(f, "Power({p})"),
            FunctionalKind::UserCallable(_) => write!(f, "UserCallable"),
        }
    }
}

impl FunctionalKind {
    pub fn name(&self) -> &'static str {
        match self {
            FunctionalKind::HermitePoly(_) => "hermite-poly",
            FunctionalKind::IndicatorAbs(_) => "indicator-abs",
            FunctionalKind::Indicator(_) => "indicator",
            FunctionalKind::Power(_) => "power",
            FunctionalKind::UserCallable(_) => "user-callable",
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            FunctionalKind::HermitePoly(q) => match q {
                0 => 1.0,
                1 => x,
                2 => x * x - 1.0,
                3 => x * (x * x - 3.0),
                _ => hermite_unchecked(*q, x),
            },
            FunctionalKind::IndicatorAbs(u) => (x.abs() >= *u) as u8 as f64,
            FunctionalKind::Indicator(u) => (x >= *u) as u8 as f64,
            FunctionalKind::Power(p) => {
                if is_integer(*p) {
                    libm::pow(x, *p)
                } else {
                    libm::pow(x.abs(), *p)
                }
            }
            FunctionalKind::UserCallable(f) => f(x),
        }
    }

    /// `E[phi(N)^2]`.
    pub fn second_moment(&self) -> Result<f64> {
        Ok(match self {
            FunctionalKind::HermitePoly(q) => factorial(*q),
            FunctionalKind::IndicatorAbs(u) => 2.0 * norm_sf(*u),
            FunctionalKind::Indicator(u) => norm_sf(*u),
            FunctionalKind::Power(p) => abs_moment(2.0 * p),
            FunctionalKind::UserCallable(f) => {
                let g = |x: f64| {
                    let v = f(x);
                    v * v
                };
                GhRules::new().expectation(&g)?
            }
        })
    }
}

fn is_integer(p: f64) -> bool {
    p >= 0.0 && libm::floor(p) == p
}

/// `E|N|^p`.
fn abs_moment(p: f64) -> f64 {
    libm::pow(2.0, 0.5 * p) * gamma(0.5 * (p + 1.0)) / libm::sqrt(core::f64::consts::PI)
}

fn hermite_unchecked(q: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, x);
    if q == 0 {
        return 1.0;
    }
    for k in 1..q {
        let h2 = x * h1 - k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// `H_q(x)` by the three-term recurrence.
pub fn hermite_poly(q: usize, x: f64) -> Result<f64> {
    if q > 60 && x.abs() > 30.0 {
        return Err(Error::Overflow { q, x });
    }
    let v = hermite_unchecked(q, x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow { q, x })
    }
}

/// Pair of Gauss-Hermite rules (200 and 400 nodes) for the doubling check.
pub(crate) struct GhRules {
    coarse: (Vec<f64>, Vec<f64>),
    fine: (Vec<f64>, Vec<f64>),
}

impl GhRules {
    pub(crate) fn new() -> Self {
        Self { coarse: quad::gauss_hermite_prob(200), fine: quad::gauss_hermite_prob(400) }
    }

    /// `E[g(N)]`, failing if the two rules disagree.
    pub(crate) fn expectation(&self, g: &dyn Fn(f64) -> f64) -> Result<f64> {
        let e = |r: &(Vec<f64>, Vec<f64>)| r.0.iter().zip(&r.1).map(|(x, w)| w * g(*x)).sum::<f64>();
        let (a, b) = (e(&self.coarse), e(&self.fine));
        let change = (a - b).abs();
        if change > 1e-10 * b.abs().max(1.0) {
            return Err(Error::QuadratureNotConverged { change });
        }
        Ok(b)
    }
}

/// `a_q = E[H_q(N) phi(N)] / q!`.
pub fn hermite_coeff(kind: &FunctionalKind, q: usize) -> Result<f64> {
    coeff_with(kind, q, &mut None)
}

fn coeff_with(kind: &FunctionalKind, q: usize, rules: &mut Option<GhRules>) -> Result<f64> {
    let qf = factorial(q);
    match kind {
        FunctionalKind::HermitePoly(p) => Ok((*p == q) as u8 as f64),
        FunctionalKind::IndicatorAbs(u) => {
            if q == 0 {
                Ok(2.0 * norm_sf(*u))
            } else if q % 2 == 1 {
                Ok(0.0)
            } else {
                Ok(2.0 * hermite_poly(q - 1, *u)? * norm_pdf(*u) / qf)
            }
        }
        FunctionalKind::Indicator(u) => {
            if q == 0 {
                Ok(norm_sf(*u))
            } else {
                Ok(hermite_poly(q - 1, *u)? * norm_pdf(*u) / qf)
            }
        }
        FunctionalKind::Power(p) if is_integer(*p) => {
            let p = *p as usize;
            if q > p || (p - q) % 2 == 1 {
                return Ok(0.0);
            }
            let j = (p - q) / 2;
            Ok(factorial(p) / (libm::pow(2.0, j as f64) * factorial(j) * factorial(q)))
        }
        FunctionalKind::Power(p) => {
            if q % 2 == 1 {
                return Ok(0.0);
            }
            if *p <= -0.5 {
                return Err(Error::InvalidParams(format!("|x|^{p} is not square integrable")));
            }
            let h = |x: f64| hermite_unchecked(q, x) * libm::pow(x, *p) * norm_pdf(x);
            let near = quad::tanh_sinh(0.0, 1.0, 1e-13, |x, _, _| h(x));
            let (far, _) = quad::adaptive(1.0, 40.0, 1e-15, 1e-13, h);
            Ok(2.0 * (near + far) / qf)
        }
        FunctionalKind::UserCallable(f) => {
            let g = |x: f64| hermite_unchecked(q, x) * f(x);
            Ok(rules.get_or_insert_with(GhRules::new).expectation(&g)? / qf)
        }
    }
}

/// Functional with its coefficient table `a_0..=a_qmax`.
#[derive(Debug, Clone)]
pub struct HermiteFunctional {
    pub kind: FunctionalKind,
    pub coeffs: Vec<f64>,
    pub rank: usize,
    /// `sum_q q! a_q^2` over the table.
    pub l2_norm_sq: f64,
}

impl HermiteFunctional {
    pub fn new(kind: FunctionalKind, qmax: usize) -> Result<Self> {
        Self::with_tol(kind, qmax, DEFAULT_RANK_TOL)
    }

    pub fn with_tol(kind: FunctionalKind, qmax: usize, rank_tol: f64) -> Result<Self> {
        if let FunctionalKind::HermitePoly(p) = kind {
            if p > qmax {
                return Err(Error::InvalidParams(format!("hermite order {p} exceeds Qmax {qmax}")));
            }
        }
        let mut rules = None;
        let coeffs = (0..=qmax).map(|q| coeff_with(&kind, q, &mut rules)).collect::<Result<Vec<_>>>()?;
        let rank = rank_of(&coeffs, rank_tol)?;
        let l2_norm_sq = coeffs.iter().enumerate().map(|(q, a)| factorial(q) * a * a).sum();
        Ok(Self { kind, coeffs, rank, l2_norm_sq })
    }

    pub fn qmax(&self) -> usize {
        self.coeffs.len() - 1
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.kind.eval(x)
    }

    /// `Var(phi(N)) - sum_{1<=q<=qmax} q! a_q^2`.
    pub fn parseval_deficit(&self) -> Result<f64> {
        let var = self.kind.second_moment()? - self.coeffs[0] * self.coeffs[0];
        Ok(var - (self.l2_norm_sq - self.coeffs[0] * self.coeffs[0]))
    }
}

fn rank_of(coeffs: &[f64], tol: f64) -> Result<usize> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, a)| a.abs() > tol)
        .map(|(q, _)| q)
        .ok_or(Error::RankNotFound(coeffs.len() - 1))
}

pub fn hermite_rank(phi: &HermiteFunctional, rank_tol: f64) -> Result<usize> {
    rank_of(&phi.coeffs, rank_tol)
}
