//! Radial covariance profiles and their Gneiting composition.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::quad;
use crate::special::sphere_area;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `(1 + r^gamma)^(-rho/gamma)`, params `[gamma, rho]`.
    GenCauchy,
    /// `exp(-a r)`, params `[a]`.
    Exponential,
    /// `(1 + a r^alpha)^(-beta)`, params `[a, alpha, beta]`.
    InvBernstein,
    /// Tabulated profile, params `[rho, r0, c0, r1, c1, ...]`.
    UserTable,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::GenCauchy => "gen-cauchy",
            Family::Exponential => "exponential",
            Family::InvBernstein => "inv-bernstein",
            Family::UserTable => "user-table",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gen-cauchy" => Some(Family::GenCauchy),
            "exponential" => Some(Family::Exponential),
            "inv-bernstein" => Some(Family::InvBernstein),
            "user-table" => Some(Family::UserTable),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Spatial factor: completely monotone.
    Factor1,
    /// Temporal factor: `1/c` has a completely monotone derivative.
    Factor2,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Factor1 => "factor1",
            Role::Factor2 => "factor2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrability {
    Integrable,
    NonIntegrable,
    Borderline,
}

/// Validated radial profile `c(r)` in dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialCovariance {
    pub family: Family,
    pub params: Vec<f64>,
    /// Regular-variation index; `f64::INFINITY` for the exponential family.
    pub rho: f64,
    pub dim: usize,
    pub role: Role,
}

fn bad(msg: alloc::string::String) -> Error {
    Error::InvalidParams(msg)
}

pub fn make_radial(family: Family, params: &[f64], dim: usize, role: Role) -> Result<RadialCovariance> {
    if dim == 0 {
        return Err(bad("dim must be positive".into()));
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(bad("params must be finite".into()));
    }
    let rho = match family {
        Family::GenCauchy => {
            let [gamma, rho] = params else {
                return Err(bad(format!("gen-cauchy takes [gamma, rho], got {} values", params.len())));
            };
            if !(*gamma > 0.0 && *gamma <= 1.0) {
                return Err(bad(format!("gen-cauchy gamma={gamma} outside (0,1]: complete monotonicity fails")));
            }
            if *rho <= 0.0 {
                return Err(bad(format!("gen-cauchy rho={rho} must be positive")));
            }
            if role == Role::Factor2 && *rho > 1.0 {
                return Err(bad(format!(
                    "gen-cauchy rho={rho} > 1 as factor2: derivative of 1/c2 is not completely monotone"
                )));
            }
            *rho
        }
        Family::Exponential => {
            let [a] = params else {
                return Err(bad(format!("exponential takes [a], got {} values", params.len())));
            };
            if *a <= 0.0 {
                return Err(bad(format!("exponential a={a} must be positive")));
            }
            if role == Role::Factor2 {
                return Err(bad("exponential as factor2: derivative of 1/c2 = a e^(ar) is not completely monotone".into()));
            }
            f64::INFINITY
        }
        Family::InvBernstein => {
            let [a, alpha, beta] = params else {
                return Err(bad(format!("inv-bernstein takes [a, alpha, beta], got {} values", params.len())));
            };
            if *a <= 0.0 || *beta <= 0.0 {
                return Err(bad("inv-bernstein needs a > 0 and beta > 0".into()));
            }
            if !(*alpha > 0.0 && *alpha <= 1.0) {
                return Err(bad(format!("inv-bernstein alpha={alpha} outside (0,1]: complete monotonicity fails")));
            }
            if role == Role::Factor2 && *beta > 1.0 {
                return Err(bad(format!(
                    "inv-bernstein beta={beta} > 1 as factor2: derivative of 1/c2 is not completely monotone"
                )));
            }
            alpha * beta
        }
        Family::UserTable => validate_table(params, role)?,
    };
    let c = RadialCovariance { family, params: params.to_vec(), rho, dim, role };
    if family != Family::UserTable {
        c.alternation_check()?;
    }
    Ok(c)
}

fn validate_table(params: &[f64], role: Role) -> Result<f64> {
    if params.len() < 5 || (params.len() - 1) % 2 != 0 {
        return Err(bad("user-table takes [rho, r0, c0, r1, c1, ...] with at least two points".into()));
    }
    let rho = params[0];
    if rho < 0.0 {
        return Err(bad("user-table rho must be nonnegative".into()));
    }
    let pts: Vec<(f64, f64)> = params[1..].chunks(2).map(|p| (p[0], p[1])).collect();
    if pts[0].0 != 0.0 || pts[0].1 != 1.0 {
        return Err(bad("user-table must start at (0, 1)".into()));
    }
    for w in pts.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(bad("user-table radii must increase".into()));
        }
        if !(w[1].1 > 0.0 && w[1].1 <= w[0].1) {
            return Err(bad("user-table values must be positive and nonincreasing".into()));
        }
    }
    // discrete convexity of c (factor1) or concavity of 1/c (factor2)
    for w in pts.windows(3) {
        let slope = |p: (f64, f64), q: (f64, f64), g: fn(f64) -> f64| (g(q.1) - g(p.1)) / (q.0 - p.0);
        let (s1, s2) = match role {
            Role::Factor1 => (slope(w[0], w[1], |v| v), slope(w[1], w[2], |v| v)),
            Role::Factor2 => (-slope(w[0], w[1], |v| 1.0 / v), -slope(w[1], w[2], |v| 1.0 / v)),
        };
        if s2 < s1 - 1e-12 * s1.abs().max(1.0) {
            return Err(bad(format!("user-table fails the discrete {} shape check", role.name())));
        }
    }
    Ok(rho)
}

impl RadialCovariance {
    /// Profile value `c(r)` for `r >= 0`.
    pub fn eval(&self, r: f64) -> f64 {
        let p = &self.params;
        match self.family {
            Family::GenCauchy => libm::pow(1.0 + libm::pow(r, p[0]), -p[1] / p[0]),
            Family::Exponential => libm::exp(-p[0] * r),
            Family::InvBernstein => libm::pow(1.0 + p[0] * libm::pow(r, p[1]), -p[2]),
            Family::UserTable => self.eval_table(r),
        }
    }

    fn eval_table(&self, r: f64) -> f64 {
        let rho = self.params[0];
        let tab = &self.params[1..];
        let n = tab.len() / 2;
        let (rl, cl) = (tab[2 * (n - 1)], tab[2 * (n - 1) + 1]);
        if r >= rl {
            return cl * libm::pow(r / rl, -rho);
        }
        let mut i = 0;
        while tab[2 * (i + 1)] < r {
            i += 1;
        }
        let (r0, c0, r1, c1) = (tab[2 * i], tab[2 * i + 1], tab[2 * i + 2], tab[2 * i + 3]);
        if r0 == 0.0 {
            c0 + (c1 - c0) * r / r1
        } else {
            let s = libm::log(r / r0) / libm::log(r1 / r0);
            libm::exp(libm::log(c0) + s * (libm::log(c1) - libm::log(c0)))
        }
    }

    /// `c^e` in closed family form, used for the effective separable factor.
    pub fn powered(&self, e: f64) -> RadialCovariance {
        let mut out = self.clone();
        match self.family {
            Family::GenCauchy => out.params[1] *= e,
            Family::Exponential => out.params[0] *= e,
            Family::InvBernstein => out.params[2] *= e,
            Family::UserTable => {
                out.params[0] *= e;
                for i in 0..(out.params.len() - 1) / 2 {
                    let v = &mut out.params[2 + 2 * i];
                    *v = libm::pow(*v, e);
                }
            }
        }
        if self.rho.is_finite() {
            out.rho = self.rho * e;
        }
        out
    }

    pub fn lq_membership(&self, q: f64) -> Result<Integrability> {
        if self.rho.is_infinite() {
            return Ok(Integrability::Integrable);
        }
        if self.family == Family::UserTable && self.rho <= 0.0 {
            return Err(Error::Unsupported("user-table profile without declared rho".into()));
        }
        let s = q * self.rho;
        let d = self.dim as f64;
        Ok(if s > d {
            Integrability::Integrable
        } else if s == d {
            Integrability::Borderline
        } else {
            Integrability::NonIntegrable
        })
    }

    /// `||C||_q^q = S_{d-1} int_0^inf c(r)^q r^{d-1} dr` for the radial field on `R^dim`.
    pub fn lq_norm_pow(&self, q: f64) -> Result<f64> {
        if self.lq_membership(q)? != Integrability::Integrable {
            return Err(Error::InvalidParams(format!("profile is not in L^{q}")));
        }
        let d = self.dim as f64;
        let g = |r: f64| libm::pow(self.eval(r), q) * libm::pow(r, d - 1.0);
        let (head, _) = quad::adaptive(0.0, 1.0, 1e-15, 1e-13, g);
        // r = 1/u turns the algebraic tail into an endpoint singularity
        let tail = quad::tanh_sinh(0.0, 1.0, 1e-13, |_, u, _| {
            let r = 1.0 / u;
            g(r) / (u * u)
        });
        Ok(sphere_area(self.dim) * (head + tail))
    }

    /// Sign pattern of divided differences on a geometric grid, orders 1..=4.
    fn alternation_check(&self) -> Result<()> {
        let ratio: f64 = 1.05;
        let mut r = 1e-3;
        let mut grid = Vec::new();
        while r <= 1e3 {
            grid.push(r);
            r *= ratio;
        }
        let vals: Vec<f64> = grid
            .iter()
            .map(|&r| match self.role {
                Role::Factor1 => self.eval(r),
                Role::Factor2 => 1.0 / self.eval(r),
            })
            .collect();
        for order in 1..=4usize {
            for i in 0..grid.len() - order {
                let xs = &grid[i..=i + order];
                let ys = &vals[i..=i + order];
                let dd = divided_difference(xs, ys);
                let scale = ys.iter().fold(0.0f64, |m, v| m.max(v.abs()))
                    / libm::pow(xs[order] - xs[0], order as f64);
                let sign = match self.role {
                    Role::Factor1 => if order % 2 == 0 { 1.0 } else { -1.0 },
                    Role::Factor2 => if order % 2 == 1 { 1.0 } else { -1.0 },
                };
                if sign * dd < -1e-8 * scale {
                    return Err(bad(format!(
                        "{} {} fails the order-{order} alternation check near r={:.3e}",
                        self.family.name(),
                        self.role.name(),
                        xs[0]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Ratio `c(lambda r) / c(lambda)`; tends to `r^-rho` for regularly varying profiles.
    pub fn rv_ratio(&self, lambda: f64, r: f64) -> f64 {
        self.eval(lambda * r) / self.eval(lambda)
    }
}

fn divided_difference(xs: &[f64], ys: &[f64]) -> f64 {
    let mut t: Vec<f64> = ys.to_vec();
    let n = xs.len();
    for level in 1..n {
        for i in 0..n - level {
            t[i] = (t[i + 1] - t[i]) / (xs[i + level] - xs[i]);
        }
    }
    t[0]
}

/// `C(x1, x2) = c2(|x2|) c1(|x1| c2(|x2|)^(1/d1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GneitingCovariance {
    pub factor1: RadialCovariance,
    pub factor2: RadialCovariance,
    pub valid: bool,
}

impl GneitingCovariance {
    pub fn new(factor1: RadialCovariance, factor2: RadialCovariance) -> Result<Self> {
        if factor1.role != Role::Factor1 || factor2.role != Role::Factor2 {
            return Err(bad("gneiting composition needs a factor1 and a factor2 profile".into()));
        }
        Ok(Self { factor1, factor2, valid: true })
    }

    pub fn d1(&self) -> usize {
        self.factor1.dim
    }

    pub fn d2(&self) -> usize {
        self.factor2.dim
    }

    /// Evaluation from the two norms `|x1|`, `|x2|`.
    pub fn eval_norms(&self, r1: f64, r2: f64) -> f64 {
        let c2 = self.factor2.eval(r2);
        let s = if self.factor1.dim == 1 { c2 } else { libm::pow(c2, 1.0 / self.factor1.dim as f64) };
        c2 * self.factor1.eval(r1 * s)
    }

    pub fn eval(&self, x1: &[f64], x2: &[f64]) -> f64 {
        self.eval_norms(norm(x1), norm(x2))
    }
}

pub fn eval_gneiting(c: &GneitingCovariance, x1: &[f64], x2: &[f64]) -> f64 {
    c.eval(x1, x2)
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    match x {
        [a] => a.abs(),
        _ => libm::sqrt(x.iter().map(|v| v * v).sum()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn gc(g: f64, r: f64, dim: usize, role: Role) -> RadialCovariance {
        make_radial(Family::GenCauchy, &[g, r], dim, role).unwrap()
    }

    #[test]
    fn gen_cauchy_profile() {
        let c = gc(1.0, 0.3, 1, Role::Factor1);
        assert_eq!(c.rho, 0.3);
        assert_relative_eq!(c.eval(2.0), 3f64.powf(-0.3), max_relative = 1e-15);
        assert_eq!(c.eval(0.0), 1.0);
    }

    #[test]
    fn factor2_rejections() {
        let e = make_radial(Family::GenCauchy, &[1.0, 2.0], 1, Role::Factor2).unwrap_err();
        assert!(matches!(e, Error::InvalidParams(_)));
        assert!(make_radial(Family::Exponential, &[1.0], 1, Role::Factor2).is_err());
        assert!(make_radial(Family::InvBernstein, &[1.0, 0.5, 1.5], 1, Role::Factor2).is_err());
        assert!(make_radial(Family::GenCauchy, &[1.5, 0.5], 1, Role::Factor1).is_err());
    }

    #[test]
    fn exponential_sentinel() {
        let c = make_radial(Family::Exponential, &[1.0], 2, Role::Factor1).unwrap();
        assert!(c.rho.is_infinite());
        assert_eq!(c.lq_membership(0.1).unwrap(), Integrability::Integrable);
        assert_relative_eq!(c.eval(1.0), (-1f64).exp());
    }

    #[test]
    fn lq_examples() {
        assert_eq!(gc(1.0, 0.3, 1, Role::Factor1).lq_membership(2.0).unwrap(), Integrability::NonIntegrable);
        assert_eq!(gc(1.0, 0.6, 1, Role::Factor1).lq_membership(2.0).unwrap(), Integrability::Integrable);
        assert_eq!(gc(1.0, 0.5, 1, Role::Factor1).lq_membership(2.0).unwrap(), Integrability::Borderline);
        let t = make_radial(Family::UserTable, &[0.0, 0.0, 1.0, 1.0, 0.5], 1, Role::Factor1).unwrap();
        assert!(matches!(t.lq_membership(2.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn gneiting_golden() {
        let c = GneitingCovariance::new(gc(1.0, 0.3, 1, Role::Factor1), gc(1.0, 0.4, 1, Role::Factor2)).unwrap();
        let expect = 2f64.powf(-0.4) * (1.0 + 2f64.powf(-0.4)).powf(-0.3);
        assert_relative_eq!(c.eval(&[1.0], &[1.0]), expect, max_relative = 1e-15);
        assert_eq!(c.eval(&[0.0], &[0.0]), 1.0);
        assert_relative_eq!(c.eval(&[0.0], &[3.0]), c.factor2.eval(3.0));
    }

    #[test]
    fn radial_norms_match_closed_forms() {
        // exponential(1) in d=1: ||c||_3^3 = 2/3
        let e = make_radial(Family::Exponential, &[1.0], 1, Role::Factor1).unwrap();
        assert_relative_eq!(e.lq_norm_pow(3.0).unwrap(), 2.0 / 3.0, max_relative = 1e-11);
        // gen-cauchy(1, 0.8), d=1, q=2: 2/(2*0.8-1)
        let g = gc(1.0, 0.8, 1, Role::Factor1);
        assert_relative_eq!(g.lq_norm_pow(2.0).unwrap(), 2.0 / 0.6, max_relative = 1e-9);
        // d=2 gen-cauchy(1, 1.5), q=2: 2 pi B(2, 1) = pi
        let g = gc(1.0, 1.5, 2, Role::Factor1);
        assert_relative_eq!(g.lq_norm_pow(2.0).unwrap(), core::f64::consts::PI, max_relative = 1e-9);
    }

    #[test]
    fn powered_profile() {
        let g = gc(1.0, 0.4, 1, Role::Factor2).powered(0.7);
        assert_relative_eq!(g.rho, 0.28, max_relative = 1e-15);
        assert_relative_eq!(g.eval(2.0), 3f64.powf(-0.28), max_relative = 1e-14);
    }

    #[test]
    fn regular_variation_ratio() {
        let c = gc(0.5, 0.7, 1, Role::Factor1);
        let errs: Vec<f64> = [1e2, 1e3, 1e4].iter().map(|&l| (c.rv_ratio(l, 3.0) / 3f64.powf(-0.7) - 1.0).abs()).collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2]);
    }

    proptest! {
        #[test]
        fn profile_bounds_and_monotone(g in 0.1f64..1.0, rho in 0.05f64..3.0, r in 0.0f64..50.0, dr in 0.0f64..5.0) {
            let c = gc(g, rho, 1, Role::Factor1);
            let a = c.eval(r);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(c.eval(r + dr) <= a);
        }

        #[test]
        fn gneiting_symmetric_and_monotone(x1 in -20.0f64..20.0, x2 in -20.0f64..20.0, s in 0.0f64..3.0) {
            let c = GneitingCovariance::new(gc(1.0, 0.3, 1, Role::Factor1), gc(1.0, 0.4, 1, Role::Factor2)).unwrap();
            let v = c.eval(&[x1], &[x2]);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, c.eval(&[-x1], &[x2]));
            prop_assert_eq!(v, c.eval(&[x1], &[-x2]));
            prop_assert!(c.eval(&[x1.abs() + s], &[x2]) <= v);
            prop_assert!(c.eval(&[x1], &[x2.abs() + s]) <= v);
        }

        #[test]
        fn inv_bernstein_factor2_passes_alternation(a in 0.2f64..5.0, al in 0.2f64..1.0, be in 0.1f64..1.0) {
            prop_assert!(make_radial(Family::InvBernstein, &[a, al, be], 1, Role::Factor2).is_ok());
        }
    }
}
