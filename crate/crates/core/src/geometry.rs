//! Convex observation bodies, growth schedules and covariograms.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::covariance::{norm, RadialCovariance};
use crate::error::{Error, Result};
use crate::special::ball_volume;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BodyKind {
    /// `[0,1]^d`.
    UnitBox,
    /// Ball of radius `extent[0]` centred at the origin.
    CenteredBall,
    /// `prod [0, extent_i]`.
    ScaledBox,
}

impl BodyKind {
    pub fn name(self) -> &'static str {
        match self {
            BodyKind::UnitBox => "unit-box",
            BodyKind::CenteredBall => "centered-ball",
            BodyKind::ScaledBox => "scaled-box",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "unit-box" => Some(BodyKind::UnitBox),
            "centered-ball" => Some(BodyKind::CenteredBall),
            "scaled-box" => Some(BodyKind::ScaledBox),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexBody {
    pub kind: BodyKind,
    pub dim: usize,
    pub extent: Vec<f64>,
}

/// Covariogram value with a Monte Carlo standard error when not closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariogram {
    pub value: f64,
    pub stderr: Option<f64>,
}

const MC_COVARIOGRAM_POINTS: usize = 1_000_000;

impl ConvexBody {
    pub fn new(kind: BodyKind, dim: usize, extent: &[f64]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParams("body dim must be positive".into()));
        }
        if extent.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::InvalidParams("body extents must be positive".into()));
        }
        let extent = match kind {
            BodyKind::UnitBox => vec![1.0; dim],
            BodyKind::ScaledBox => match extent.len() {
                1 => vec![extent[0]; dim],
                n if n == dim => extent.to_vec(),
                n => return Err(Error::InvalidParams(alloc::format!("scaled-box needs 1 or {dim} extents, got {n}"))),
            },
            BodyKind::CenteredBall => match extent {
                [r] => vec![*r],
                _ => return Err(Error::InvalidParams("centered-ball takes a single radius".into())),
            },
        };
        Ok(Self { kind, dim, extent })
    }

    pub fn unit_box(dim: usize) -> Self {
        Self { kind: BodyKind::UnitBox, dim, extent: vec![1.0; dim] }
    }

    pub fn interval(len: f64) -> Self {
        Self { kind: BodyKind::ScaledBox, dim: 1, extent: vec![len] }
    }

    pub fn ball(dim: usize, r: f64) -> Self {
        Self { kind: BodyKind::CenteredBall, dim, extent: vec![r] }
    }

    pub fn is_box(&self) -> bool {
        self.kind != BodyKind::CenteredBall
    }

    /// Side lengths of a box, or of the bounding cube of a ball.
    pub fn sides(&self) -> Vec<f64> {
        if self.is_box() {
            self.extent.clone()
        } else {
            vec![2.0 * self.extent[0]; self.dim]
        }
    }

    /// Lower corner of the (bounding) box.
    pub fn lower(&self) -> Vec<f64> {
        if self.is_box() {
            vec![0.0; self.dim]
        } else {
            vec![-self.extent[0]; self.dim]
        }
    }

    pub fn vol(&self) -> f64 {
        if self.is_box() {
            self.extent.iter().product()
        } else {
            ball_volume(self.dim, self.extent[0])
        }
    }

    pub fn diam(&self) -> f64 {
        if self.is_box() {
            norm(&self.extent)
        } else {
            2.0 * self.extent[0]
        }
    }

    /// `t D`, keeping the kind (a scaled unit box becomes a scaled box).
    pub fn scaled(&self, t: f64) -> Self {
        let kind = if self.kind == BodyKind::UnitBox { BodyKind::ScaledBox } else { self.kind };
        Self { kind, dim: self.dim, extent: self.extent.iter().map(|e| e * t).collect() }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if self.is_box() {
            x.iter().zip(&self.extent).all(|(v, a)| *v >= 0.0 && *v <= *a)
        } else {
            let r = self.extent[0];
            x.iter().map(|v| v * v).sum::<f64>() <= r * r
        }
    }

    /// Uniform point, written into `out`.
    pub fn sample_into<R: RngCore>(&self, rng: &mut R, out: &mut [f64]) {
        if self.is_box() {
            for (o, a) in out.iter_mut().zip(&self.extent) {
                *o = uniform(rng) * a;
            }
        } else {
            sample_ball(rng, self.dim, self.extent[0], 0.0, out);
        }
    }

    /// `vol(D ∩ (D + z))`.
    pub fn covariogram(&self, z: &[f64]) -> Covariogram {
        match self.kind {
            BodyKind::UnitBox | BodyKind::ScaledBox => Covariogram {
                value: z.iter().zip(&self.extent).map(|(zi, a)| (a - zi.abs()).max(0.0)).product(),
                stderr: None,
            },
            BodyKind::CenteredBall => {
                let r = self.extent[0];
                let s = norm(z);
                match self.dim {
                    1..=3 => Covariogram { value: ball_lens(self.dim, r, s), stderr: None },
                    _ => self.covariogram_mc(z, MC_COVARIOGRAM_POINTS, 0x5eed),
                }
            }
        }
    }

    /// Monte Carlo covariogram: uniform points of `D` that also lie in `D + z`.
    pub fn covariogram_mc(&self, z: &[f64], n: usize, seed: u64) -> Covariogram {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = vec![0.0; self.dim];
        let mut hits = 0usize;
        for _ in 0..n {
            self.sample_into(&mut rng, &mut x);
            for (xi, zi) in x.iter_mut().zip(z) {
                *xi -= zi;
            }
            if self.contains(&x) {
                hits += 1;
            }
        }
        let p = hits as f64 / n as f64;
        let v = self.vol();
        Covariogram { value: v * p, stderr: Some(v * libm::sqrt(p * (1.0 - p) / n as f64)) }
    }
}

/// Intersection volume of two balls of radius `r` at centre distance `s`.
pub fn ball_lens(dim: usize, r: f64, s: f64) -> f64 {
    if s >= 2.0 * r {
        return 0.0;
    }
    match dim {
        1 => 2.0 * r - s,
        2 => 2.0 * r * r * libm::acos(s / (2.0 * r)) - 0.5 * s * libm::sqrt(4.0 * r * r - s * s),
        3 => PI / 12.0 * (4.0 * r + s) * (2.0 * r - s) * (2.0 * r - s),
        _ => panic!("closed-form lens only for dims 1-3"),
    }
}

pub(crate) fn uniform<R: RngCore>(rng: &mut R) -> f64 {
    // 53 random bits in (0, 1)
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Point in a ball of radius `r` with radial density proportional to `|z|^-a`.
pub(crate) fn sample_ball<R: RngCore>(rng: &mut R, dim: usize, r: f64, a: f64, out: &mut [f64]) {
    let rad = r * libm::pow(uniform(rng), 1.0 / (dim as f64 - a));
    if dim == 1 {
        out[0] = if rng.next_u32() & 1 == 0 { rad } else { -rad };
        return;
    }
    let mut n2 = 0.0;
    for o in out.iter_mut() {
        let g: f64 = StandardNormal.sample(rng);
        *o = g;
        n2 += g * g;
    }
    let s = rad / libm::sqrt(n2);
    for o in out.iter_mut() {
        *o *= s;
    }
}

pub fn covariogram(body: &ConvexBody, z: &[f64]) -> Covariogram {
    body.covariogram(z)
}

/// `(g(tD, z), t^d g(D, z/t))`.
pub fn covariogram_scaling_check(body: &ConvexBody, z: &[f64], t: f64) -> (f64, f64) {
    let lhs = body.scaled(t).covariogram(z).value;
    let zt: Vec<f64> = z.iter().map(|v| v / t).collect();
    let rhs = libm::pow(t, body.dim as f64) * body.covariogram(&zt).value;
    (lhs, rhs)
}

/// Power-law growth `t1 = t^gamma1`, `t2 = t^gamma2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthSchedule {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl GrowthSchedule {
    pub fn new(gamma1: f64, gamma2: f64) -> Result<Self> {
        if !(gamma1 > 0.0 && gamma2 > 0.0 && gamma1.is_finite() && gamma2.is_finite()) {
            return Err(Error::InvalidParams("growth rates must be positive".into()));
        }
        Ok(Self { gamma1, gamma2 })
    }

    pub fn t1(&self, t: f64) -> f64 {
        libm::pow(t, self.gamma1)
    }

    pub fn t2(&self, t: f64) -> f64 {
        libm::pow(t, self.gamma2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpec {
    pub body1: ConvexBody,
    pub body2: ConvexBody,
    pub schedule: GrowthSchedule,
}

impl WindowSpec {
    pub fn new(body1: ConvexBody, body2: ConvexBody, schedule: GrowthSchedule) -> Self {
        Self { body1, body2, schedule }
    }

    /// The two scaled blocks `t1 D1`, `t2 D2`.
    pub fn blocks(&self, t: f64) -> (ConvexBody, ConvexBody) {
        (self.body1.scaled(self.schedule.t1(t)), self.body2.scaled(self.schedule.t2(t)))
    }

    pub fn volume(&self, t: f64) -> f64 {
        let (a, b) = self.blocks(t);
        a.vol() * b.vol()
    }
}

/// Strict power-law condition `gamma1 - gamma2 rho2 / d1 > 0`.
pub fn rate_admissible(schedule: &GrowthSchedule, factor2: &RadialCovariance, d1: usize) -> bool {
    if factor2.rho.is_infinite() {
        return false;
    }
    schedule.gamma1 - schedule.gamma2 * factor2.rho / d1 as f64 > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{make_radial, Family, Role};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn box_covariogram() {
        let b = ConvexBody::unit_box(2);
        assert_eq!(b.covariogram(&[0.5, 0.5]).value, 0.25);
        assert_eq!(b.covariogram(&[0.0, 0.0]).value, b.vol());
    }

    #[test]
    fn ball_lens_golden() {
        let b = ConvexBody::ball(2, 1.0);
        let v = b.covariogram(&[1.0, 0.0]).value;
        assert_relative_eq!(v, 2.0 * (PI / 3.0 - 3f64.sqrt() / 4.0), max_relative = 1e-14);
        assert_relative_eq!(ConvexBody::ball(3, 1.0).covariogram(&[0.0; 3]).value, 4.0 * PI / 3.0, max_relative = 1e-14);
        assert_relative_eq!(ConvexBody::ball(1, 2.0).covariogram(&[1.0]).value, 3.0);
    }

    #[test]
    fn ball_mc_in_high_dim() {
        let b = ConvexBody::ball(4, 1.0);
        let g = b.covariogram(&[0.0; 4]);
        assert_relative_eq!(g.value, b.vol(), max_relative = 1e-12);
        let g = b.covariogram(&[2.5, 0.0, 0.0, 0.0]);
        assert_eq!(g.value, 0.0);
    }

    #[test]
    fn scaling_examples() {
        let (a, b) = covariogram_scaling_check(&ConvexBody::unit_box(1), &[0.5], 2.0);
        assert_eq!((a, b), (1.5, 1.5));
        let (a, b) = covariogram_scaling_check(&ConvexBody::unit_box(2), &[0.2, 0.2], 4.0);
        assert_relative_eq!(a, b, max_relative = 1e-15);
        let (a, b) = covariogram_scaling_check(&ConvexBody::ball(3, 0.7), &[0.0; 3], 3.0);
        assert_relative_eq!(a, 27.0 * ConvexBody::ball(3, 0.7).vol(), max_relative = 1e-14);
        assert_relative_eq!(a, b, max_relative = 1e-14);
    }

    #[test]
    fn rate_examples() {
        let f2 = |rho: f64| make_radial(Family::GenCauchy, &[1.0, rho], 1, Role::Factor2).unwrap();
        assert!(rate_admissible(&GrowthSchedule::new(1.0, 1.0).unwrap(), &f2(0.5), 2));
        assert!(!rate_admissible(&GrowthSchedule::new(0.1, 1.0).unwrap(), &f2(0.4), 1));
        assert!(!rate_admissible(&GrowthSchedule::new(1.0, 2.0).unwrap(), &f2(0.5), 1));
    }

    #[test]
    fn covariogram_increases_toward_volume() {
        let b = ConvexBody::ball(2, 1.0);
        let z = [1.3, 0.4];
        let mut prev = 0.0;
        for n in [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0] {
            let g = b.covariogram(&[z[0] / n, z[1] / n]).value;
            assert!(g > prev);
            prev = g;
        }
        assert!(prev < b.vol());
    }

    proptest! {
        #[test]
        fn symmetric_and_monotone_on_rays(
            zx in -2.0f64..2.0, zy in -2.0f64..2.0, s in 0.0f64..1.0, ds in 0.0f64..1.0, ball in proptest::bool::ANY
        ) {
            let b = if ball { ConvexBody::ball(2, 0.8) } else { ConvexBody::new(BodyKind::ScaledBox, 2, &[1.0, 2.0]).unwrap() };
            let g = |u: f64| b.covariogram(&[u * zx, u * zy]).value;
            prop_assert_eq!(b.covariogram(&[zx, zy]).value, b.covariogram(&[-zx, -zy]).value);
            prop_assert!(g(s) >= g(s + ds));
        }
    }
}
