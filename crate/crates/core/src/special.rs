//! Scalar special functions.

use core::f64::consts::{PI, SQRT_2};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * libm::exp(-0.5 * x * x)
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Upper tail `P(N > x)`.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Standard normal quantile (Wichura, AS241, PPND16).
#[allow(clippy::excessive_precision)]
pub fn norm_ppf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2509.0809287301226727 * r + 33430.575583588128105) * r
            + 67265.770927008700853)
            * r
            + 45921.953931549871457)
            * r
            + 13731.693765509461125)
            * r
            + 1971.5909503065514427)
            * r
            + 133.14166789178437745)
            * r
            + 3.387132872796366608;
        let den = ((((((5226.495278852545925 * r + 28729.085735721942674) * r
            + 39307.89580009271061)
            * r
            + 21213.794301586595867)
            * r
            + 5394.1960214247511077)
            * r
            + 687.1870074920579083)
            * r
            + 42.313330701600911252)
            * r
            + 1.0;
        return q * num / den;
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = libm::sqrt(-libm::log(r));
    let val = if r <= 5.0 {
        let r = r - 1.6;
        let num = ((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r
            + 0.24178072517745061177)
            * r
            + 1.27045825245236838258)
            * r
            + 3.64784832476320460504)
            * r
            + 5.7694972214606914055)
            * r
            + 4.6303378461565452959)
            * r
            + 1.42343711074968357734;
        let den = ((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
            + 0.0151986665636164571966)
            * r
            + 0.14810397642748007459)
            * r
            + 0.68976733498510000455)
            * r
            + 1.6763848301838038494)
            * r
            + 2.05319162663775882187)
            * r
            + 1.0;
        num / den
    } else {
        let r = r - 5.0;
        let num = ((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
            + 0.0012426609473880784386)
            * r
            + 0.026532189526576123093)
            * r
            + 0.29656057182850489123)
            * r
            + 1.7848265399172913358)
            * r
            + 5.4637849111641143699)
            * r
            + 6.6579046435011037772;
        let den = ((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
            + 1.8463183175100546818e-5)
            * r
            + 7.868691311456132591e-4)
            * r
            + 0.0148753612908506148525)
            * r
            + 0.13692988092273580531)
            * r
            + 0.59983220655588793769)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

pub fn beta(a: f64, b: f64) -> f64 {
    libm::exp(ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b))
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Surface area of the unit sphere in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    let h = 0.5 * d as f64;
    2.0 * libm::pow(PI, h) / gamma(h)
}

pub fn ball_volume(d: usize, r: f64) -> f64 {
    sphere_area(d) / d as f64 * libm::pow(r, d as f64)
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // Jacobi theta form converges fast for small arguments.
        let c = -PI * PI / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for j in 1..=20 {
            let m = (2 * j - 1) as f64;
            s += libm::exp(m * m * c);
        }
        let cdf = libm::sqrt(2.0 * PI) / lambda * s;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = libm::exp(-2.0 * jf * jf * lambda * lambda);
        s += if j % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normal_cdf_values() {
        assert_relative_eq!(norm_cdf(0.0), 0.5, epsilon = 1e-16);
        assert_relative_eq!(norm_cdf(1.0), 0.841_344_746_068_542_9, epsilon = 1e-15);
        assert_relative_eq!(norm_sf(5.0), 2.866_515_718_791_939e-7, max_relative = 1e-12);
    }

    #[test]
    fn ppf_inverts_cdf() {
        for &p in &[1e-12, 1e-6, 0.01, 0.2, 0.5, 0.77, 0.999, 1.0 - 1e-9] {
            assert_relative_eq!(norm_cdf(norm_ppf(p)), p, max_relative = 1e-12);
        }
    }

    #[test]
    fn sphere_and_ball() {
        assert_relative_eq!(sphere_area(1), 2.0, epsilon = 1e-14);
        assert_relative_eq!(sphere_area(2), 2.0 * PI, epsilon = 1e-14);
        assert_relative_eq!(ball_volume(3, 1.0), 4.0 * PI / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn kolmogorov_branches_agree() {
        // both series are valid near lambda = 1
        let a = kolmogorov_sf(0.999_999_9);
        let b = kolmogorov_sf(1.000_000_1);
        assert!((a - b).abs() < 1e-6);
        assert_relative_eq!(kolmogorov_sf(1.36), 0.049_48, max_relative = 2e-3);
    }

    #[test]
    fn beta_matches_gamma_ratio() {
        assert_relative_eq!(beta(0.7, 0.7), gamma(0.7) * gamma(0.7) / gamma(1.4), max_relative = 1e-13);
    }
}
