//! Radial kernel profiles shared by the quadrature and sampling paths.

use crate::covariance::RadialCovariance;

/// A radial function `f(r)` on one block.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// `r^-alpha`.
    Power(f64),
    Radial(RadialCovariance),
    /// `c(t r) / c(t)`.
    Rescaled(RadialCovariance, f64),
}

impl Profile {
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Profile::Power(a) => {
                if *a == 0.0 {
                    1.0
                } else {
                    libm::pow(r, -a)
                }
            }
            Profile::Radial(c) => c.eval(r),
            Profile::Rescaled(c, t) => c.eval(t * r) / c.eval(*t),
        }
    }

    /// Exponent of the singularity at the origin (zero for bounded profiles).
    pub fn singular_exponent(&self) -> f64 {
        match self {
            Profile::Power(a) => *a,
            _ => 0.0,
        }
    }

    /// Tail index used to shape importance proposals.
    pub fn tail_index(&self) -> f64 {
        match self {
            Profile::Power(a) => *a,
            Profile::Radial(c) | Profile::Rescaled(c, _) => c.rho,
        }
    }
}
