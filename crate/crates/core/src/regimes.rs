//! Range dependence, variance regimes and the limit-law identity.

use alloc::format;

use crate::covariance::{GneitingCovariance, RadialCovariance};
use crate::error::{Error, Result};
use crate::geometry::{ConvexBody, GrowthSchedule};
use crate::hermite::HermiteFunctional;
use crate::special::factorial;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeDependence {
    Short,
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Case1Gaussian,
    Case2Gaussian,
    Case3Gaussian,
    Case4Rosenblatt,
    /// Hermite rank one: Gaussian limit for every index pair.
    Rank1Gaussian,
    Critical,
    Unsupported,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Case1Gaussian => "case1-gaussian",
            Regime::Case2Gaussian => "case2-gaussian",
            Regime::Case3Gaussian => "case3-gaussian",
            Regime::Case4Rosenblatt => "case4-rosenblatt",
            Regime::Rank1Gaussian => "rank1-gaussian",
            Regime::Critical => "critical",
            Regime::Unsupported => "unsupported",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitLaw {
    Gaussian,
    Rosenblatt { alpha: f64, beta: f64 },
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeInputs {
    pub d1: usize,
    pub d2: usize,
    pub rank: usize,
    pub rho1: f64,
    pub rho2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub regime: Regime,
    /// Growth exponents of `Var Y(t)` in `t1` and `t2`; `None` when no claim is made.
    pub exponent1: Option<f64>,
    pub exponent2: Option<f64>,
    pub limit_law: LimitLaw,
    pub leading_constant: Option<f64>,
    pub inputs: RegimeInputs,
}

pub fn range_dependence(rho1: f64, rho2: f64, d1: usize, d2: usize, rank: usize) -> RangeDependence {
    let (d1, d2) = (d1 as f64, d2 as f64);
    if rank <= 1 {
        return RangeDependence::Long;
    }
    let r = rank as f64;
    if rho1 <= d1 / r || rho2 <= d2 / (r - 1.0) {
        RangeDependence::Long
    } else {
        RangeDependence::Short
    }
}

pub fn classify(d1: usize, d2: usize, rank: usize, rho1: f64, rho2: f64) -> RegimeReport {
    let inputs = RegimeInputs { d1, d2, rank, rho1, rho2 };
    let report = |regime, e: Option<(f64, f64)>, limit_law| RegimeReport {
        regime,
        exponent1: e.map(|e| e.0),
        exponent2: e.map(|e| e.1),
        limit_law,
        leading_constant: None,
        inputs,
    };
    let (d1f, d2f) = (d1 as f64, d2 as f64);
    if rank == 0 || rho1.is_nan() || rho2.is_nan() || rho1 <= 0.0 || rho2 <= 0.0 {
        return report(Regime::Unsupported, None, LimitLaw::Unknown);
    }
    if rank == 1 {
        return rank_one(d1f, d2f, rho1, rho2, inputs);
    }
    let r = rank as f64;
    let thr1 = d1f / r;
    let thr2 = d2f / (r - 1.0);
    if rho1 == thr1 {
        return report(Regime::Critical, None, LimitLaw::Unknown);
    }
    if rho1 > thr1 {
        return if rho2 > thr2 {
            report(Regime::Case1Gaussian, Some((d1f, d2f)), LimitLaw::Gaussian)
        } else if rho2 < thr2 {
            report(Regime::Case2Gaussian, Some((d1f, 2.0 * d2f - (r - 1.0) * rho2)), LimitLaw::Gaussian)
        } else {
            report(Regime::Critical, None, LimitLaw::Unknown)
        };
    }
    let tau = d1f * d2f / (r * (d1f - rho1));
    if rho2 > tau {
        report(Regime::Case3Gaussian, Some((2.0 * d1f - r * rho1, d2f)), LimitLaw::Gaussian)
    } else if rho2 == tau {
        report(Regime::Critical, None, LimitLaw::Unknown)
    } else if rank == 2 {
        let beta = rho2 * (1.0 - rho1 / d1f);
        report(
            Regime::Case4Rosenblatt,
            Some((2.0 * d1f - 2.0 * rho1, 2.0 * d2f - 2.0 * beta)),
            LimitLaw::Rosenblatt { alpha: rho1, beta },
        )
    } else {
        report(Regime::Unsupported, None, LimitLaw::Unknown)
    }
}

/// Rank one: `int C dx1` over `t1 D1` behaves like `t1^(d1-rho1) c2^(1-rho1/d1)` when
/// `rho1 < d1` and is constant in `x2` when `rho1 > d1`.
fn rank_one(d1: f64, d2: f64, rho1: f64, rho2: f64, inputs: RegimeInputs) -> RegimeReport {
    let exps = if rho1 > d1 {
        Some((d1, 2.0 * d2))
    } else if rho1 < d1 {
        let b = rho2 * (1.0 - rho1 / d1);
        if b < d2 {
            Some((2.0 * d1 - rho1, 2.0 * d2 - b))
        } else if b > d2 {
            Some((2.0 * d1 - rho1, d2))
        } else {
            None
        }
    } else {
        None
    };
    RegimeReport {
        regime: Regime::Rank1Gaussian,
        exponent1: exps.map(|e| e.0),
        exponent2: exps.map(|e| e.1),
        limit_law: LimitLaw::Gaussian,
        leading_constant: None,
        inputs,
    }
}

/// `gamma1 e1 + gamma2 e2`, the growth exponent of the variance in the master parameter.
pub fn combined_exponent(report: &RegimeReport, schedule: &GrowthSchedule) -> Option<f64> {
    Some(schedule.gamma1 * report.exponent1? + schedule.gamma2 * report.exponent2?)
}

/// Leading constant with the truncation bound of its chaos series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeadingConstant {
    pub value: f64,
    pub tail_bound: f64,
}

pub fn leading_constant_case1(
    c: &GneitingCovariance,
    phi: &HermiteFunctional,
    body1: &ConvexBody,
    body2: &ConvexBody,
) -> Result<LeadingConstant> {
    leading_constant_case1_factors(&c.factor1, &c.factor2, phi, body1, body2)
}

/// Case-1 constant `vol(D1) vol(D2) sum_q q! a_q^2 ||C1||_q^q ||C2||_{q-1}^{q-1}` from the two factors.
pub fn leading_constant_case1_factors(
    c1: &RadialCovariance,
    c2: &RadialCovariance,
    phi: &HermiteFunctional,
    body1: &ConvexBody,
    body2: &ConvexBody,
) -> Result<LeadingConstant> {
    let rank = phi.rank;
    let rep = classify(c1.dim, c2.dim, rank, c1.rho, c2.rho);
    if rep.regime != Regime::Case1Gaussian {
        return Err(Error::Unsupported(format!("leading constant needs case 1, got {}", rep.regime.name())));
    }
    let qmax = phi.qmax();
    let mut sum = 0.0;
    for q in rank..=qmax {
        let a = phi.coeffs[q];
        if a == 0.0 {
            continue;
        }
        let qf = q as f64;
        sum += factorial(q) * a * a * c1.lq_norm_pow(qf)? * c2.lq_norm_pow(qf - 1.0)?;
    }
    let deficit = phi.parseval_deficit()?.max(0.0);
    let tail_bound = if deficit > 1e-14 * phi.l2_norm_sq {
        deficit * c1.lq_norm_pow(qmax as f64 + 1.0)? * c2.lq_norm_pow(qmax as f64)?
    } else {
        0.0
    };
    if tail_bound > 0.01 * sum {
        return Err(Error::SeriesTail { bound: tail_bound, sum });
    }
    let vol = body1.vol() * body2.vol();
    Ok(LeadingConstant { value: vol * sum, tail_bound: vol * tail_bound })
}

/// Separable surrogate `(C1, c2^e)` for rank two.
pub fn effective_separable_factors(c: &GneitingCovariance, rank: usize) -> Result<(RadialCovariance, RadialCovariance)> {
    if rank != 2 {
        return Err(Error::Unsupported(format!("separable surrogate defined for rank 2, got {rank}")));
    }
    let d1 = c.d1() as f64;
    let rho1 = c.factor1.rho;
    let e = if 2.0 * rho1 > d1 {
        0.5
    } else if 2.0 * rho1 < d1 {
        1.0 - rho1 / d1
    } else {
        return Err(Error::Unsupported("critical index rho1 = d1/2".into()));
    };
    Ok((c.factor1.clone(), c.factor2.powered(e)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{make_radial, Family, Role};
    use crate::hermite::FunctionalKind;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn range_examples() {
        assert_eq!(range_dependence(1.5, 1.2, 2, 1, 2), RangeDependence::Short);
        assert_eq!(range_dependence(5.0, 5.0, 1, 1, 1), RangeDependence::Long);
        assert_eq!(range_dependence(0.3, 5.0, 1, 1, 2), RangeDependence::Long);
    }

    #[test]
    fn classify_examples() {
        let r = classify(2, 1, 2, 0.5, 0.3);
        assert_eq!(r.regime, Regime::Case4Rosenblatt);
        assert_eq!((r.exponent1, r.exponent2), (Some(3.0), Some(1.55)));
        match r.limit_law {
            LimitLaw::Rosenblatt { alpha, beta } => {
                assert_eq!(alpha, 0.5);
                assert_relative_eq!(beta, 0.225, max_relative = 1e-15);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(classify(2, 1, 2, 0.5, 2.0 / 3.0).regime, Regime::Critical);
        let r = classify(1, 1, 2, 2.0, 0.4);
        assert_eq!(r.regime, Regime::Case2Gaussian);
        assert_eq!((r.exponent1, r.exponent2), (Some(1.0), Some(1.6)));
        assert_eq!(classify(1, 1, 3, 0.1, 0.2).regime, Regime::Unsupported);
        assert_eq!(classify(1, 1, 1, 0.3, 0.4).regime, Regime::Rank1Gaussian);
        assert_eq!(classify(1, 1, 2, f64::INFINITY, 2.0).regime, Regime::Case1Gaussian);
    }

    #[test]
    fn leading_constant_exponential_oracle() {
        let c1 = make_radial(Family::Exponential, &[1.0], 1, Role::Factor1).unwrap();
        let c2 = make_radial(Family::Exponential, &[1.0], 1, Role::Factor1).unwrap();
        let phi = HermiteFunctional::new(FunctionalKind::HermitePoly(3), 10).unwrap();
        let b = ConvexBody::unit_box(1);
        let l = leading_constant_case1_factors(&c1, &c2, &phi, &b, &b).unwrap();
        assert_relative_eq!(l.value, 4.0, max_relative = 1e-10);
        assert_eq!(l.tail_bound, 0.0);
    }

    #[test]
    fn leading_constant_series_matches_beta_closed_forms() {
        // gen-cauchy(1, rho) on the line: ||c||_q^q = 2/(q rho - 1)
        let c1 = make_radial(Family::GenCauchy, &[1.0, 2.5], 1, Role::Factor1).unwrap();
        let c2 = make_radial(Family::GenCauchy, &[1.0, 0.9], 1, Role::Factor2).unwrap();
        let c = GneitingCovariance::new(c1, c2).unwrap();
        // H3 + H4, rank 3
        let h = |x: f64| x * x * x - 3.0 * x + x * x * x * x - 6.0 * x * x + 3.0;
        let phi = HermiteFunctional::new(FunctionalKind::UserCallable(alloc::sync::Arc::new(h)), 12).unwrap();
        assert_eq!(phi.rank, 3);
        let b = ConvexBody::interval(2.0);
        let l = leading_constant_case1(&c, &phi, &b, &b).unwrap();
        let n = |q: f64, rho: f64| 2.0 / (q * rho - 1.0);
        let expect = 4.0 * (6.0 * n(3.0, 2.5) * n(2.0, 0.9) + 24.0 * n(4.0, 2.5) * n(3.0, 0.9));
        assert_relative_eq!(l.value, expect, max_relative = 1e-8);
    }

    #[test]
    fn leading_constant_requires_case1() {
        let c1 = make_radial(Family::GenCauchy, &[1.0, 0.3], 1, Role::Factor1).unwrap();
        let c2 = make_radial(Family::GenCauchy, &[1.0, 0.4], 1, Role::Factor2).unwrap();
        let c = GneitingCovariance::new(c1, c2).unwrap();
        let phi = HermiteFunctional::new(FunctionalKind::HermitePoly(2), 10).unwrap();
        let b = ConvexBody::unit_box(1);
        assert!(matches!(leading_constant_case1(&c, &phi, &b, &b), Err(Error::Unsupported(_))));
    }

    #[test]
    fn separable_factors() {
        let mk = |r1: f64, r2: f64| {
            GneitingCovariance::new(
                make_radial(Family::GenCauchy, &[1.0, r1], 1, Role::Factor1).unwrap(),
                make_radial(Family::GenCauchy, &[1.0, r2], 1, Role::Factor2).unwrap(),
            )
            .unwrap()
        };
        let (a, b) = effective_separable_factors(&mk(0.3, 0.4), 2).unwrap();
        assert_eq!(a.rho, 0.3);
        assert_relative_eq!(b.rho, 0.28, max_relative = 1e-15);
        let (_, b) = effective_separable_factors(&mk(2.0, 0.8), 2).unwrap();
        assert_relative_eq!(b.rho, 0.4, max_relative = 1e-15);
        assert!(effective_separable_factors(&mk(0.5, 0.8), 2).is_err());
        assert!(effective_separable_factors(&mk(2.0, 0.8), 3).is_err());
    }

    proptest! {
        #[test]
        fn case4_exponents_exceed_volume(rho1 in 0.01f64..0.99, frac in 0.01f64..0.99) {
            let (d1, d2) = (2usize, 1usize);
            let tau = 2.0 / (2.0 * (2.0 - rho1));
            let r = classify(d1, d2, 2, rho1, frac * tau);
            prop_assert_eq!(r.regime, Regime::Case4Rosenblatt);
            prop_assert!(r.exponent1.unwrap() > 2.0 && r.exponent2.unwrap() > 1.0);
        }

        #[test]
        fn every_point_gets_one_label(rho1 in 0.01f64..4.0, rho2 in 0.01f64..3.0, rank in 2usize..5) {
            let r = classify(2, 1, rank, rho1, rho2);
            let long = range_dependence(rho1, rho2, 2, 1, rank) == RangeDependence::Long;
            match r.regime {
                Regime::Case1Gaussian => prop_assert!(!long),
                Regime::Critical => {}
                _ => prop_assert!(long),
            }
        }
    }
}
