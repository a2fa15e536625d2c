//! One-dimensional quadrature rules.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Fixed Gauss-Legendre rule mapped onto `[a, b]`.
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + h * x);
        }
        s * h
    }

    /// Nodes and weights on `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (c + h * x, w * h))
    }
}

/// Probabilists' Gauss-Hermite rule: `E[g(N)] ~ sum w_i g(x_i)`, weights sum to one.
///
/// Nodes start from the Jacobi-matrix eigenvalues and are polished by Newton
/// steps on scaled orthonormal Hermite functions; weights use `1 / (n psi_{n-1}^2)`.
pub fn gauss_hermite_prob(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = libm::sqrt(k as f64);
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let mut x: Vec<f64> = j.symmetric_eigen().eigenvalues.iter().copied().collect();
    x.sort_by(f64::total_cmp);
    let mut w = vec![0.0; n];
    for (xi, wi) in x.iter_mut().zip(w.iter_mut()) {
        for _ in 0..3 {
            let (pn, pm) = scaled_hermite_pair(n, *xi);
            *xi -= pn / (libm::sqrt(n as f64) * pm);
        }
        let (_, pm) = scaled_hermite_pair(n, *xi);
        *wi = libm::exp(-0.5 * *xi * *xi) / (n as f64 * pm * pm);
    }
    for i in 0..n / 2 {
        let xs = 0.5 * (x[n - 1 - i] - x[i]);
        let ws = 0.5 * (w[i] + w[n - 1 - i]);
        x[i] = -xs;
        x[n - 1 - i] = xs;
        w[i] = ws;
        w[n - 1 - i] = ws;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `(psi_n, psi_{n-1}) * exp(-x^2/4)` for orthonormal `psi_k = He_k / sqrt(k!)`.
fn scaled_hermite_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 0.0;
    let mut p1 = libm::exp(-0.25 * x * x);
    for k in 0..n {
        let p2 = (x * p1 - libm::sqrt(k as f64) * p0) / libm::sqrt(k as f64 + 1.0);
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// Tanh-sinh quadrature on `[a, b]`, robust to integrable endpoint singularities.
///
/// `f` receives `(x, distance to a, distance to b)` so that singular
/// integrands can be evaluated without cancellation near the endpoints.
pub fn tanh_sinh<F: FnMut(f64, f64, f64) -> f64>(a: f64, b: f64, tol: f64, mut f: F) -> f64 {
    let half = 0.5 * (b - a);
    if half == 0.0 {
        return 0.0;
    }
    let eval = |t: f64, f: &mut F| -> f64 {
        let s = 0.5 * PI * libm::sinh(t);
        let e = libm::exp(-2.0 * s.abs());
        // 1 - tanh|s| computed without cancellation
        let comp = 2.0 * e / (1.0 + e);
        let dx = 0.5 * PI * libm::cosh(t) * 4.0 * e / ((1.0 + e) * (1.0 + e));
        let d = half * comp;
        let (x, da, db) = if s < 0.0 {
            (a + d, d, 2.0 * half - d)
        } else {
            (b - d, 2.0 * half - d, d)
        };
        if d <= 0.0 || !(x > a && x < b) && d < 1e-300 {
            return 0.0;
        }
        let v = f(x, da, db);
        if v.is_finite() {
            v * dx
        } else {
            0.0
        }
    };
    let tmax = 6.5;
    let mut h = 1.0;
    let mut sum = eval(0.0, &mut f);
    let mut k = 1;
    while (k as f64) * h <= tmax {
        let t = k as f64 * h;
        sum += eval(t, &mut f) + eval(-t, &mut f);
        k += 1;
    }
    let mut prev = sum * h * half;
    for _ in 0..12 {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= tmax {
            let t = k as f64 * h;
            sum += eval(t, &mut f) + eval(-t, &mut f);
            k += 2;
        }
        let cur = sum * h * half;
        if (cur - prev).abs() <= tol * cur.abs().max(1e-300) {
            return cur;
        }
        prev = cur;
    }
    prev
}

const GK_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WK[7] * fc;
    let mut g = GK_WG[3] * fc;
    for i in 0..7 {
        let dx = h * GK_X[i];
        let s = f(c - dx) + f(c + dx);
        k += GK_WK[i] * s;
        if i % 2 == 1 {
            g += GK_WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive Gauss-Kronrod (7-15) on a finite interval.
pub fn adaptive<F: FnMut(f64) -> f64>(a: f64, b: f64, abs_tol: f64, rel_tol: f64, mut f: F) -> (f64, f64) {
    let mut parts: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk15(&mut f, a, b);
    parts.push((a, b, v, e));
    for _ in 0..2000 {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    (parts.iter().map(|p| p.2).sum(), parts.iter().map(|p| p.3).sum())
}

/// Adaptive integral over `[a, inf)` through `x = a + u / (1 - u)`.
pub fn adaptive_half_line<F: FnMut(f64) -> f64>(a: f64, abs_tol: f64, rel_tol: f64, mut f: F) -> (f64, f64) {
    adaptive(0.0, 1.0, abs_tol, rel_tol, |u| {
        if u >= 1.0 {
            return 0.0;
        }
        let om = 1.0 - u;
        let v = f(a + u / om) / (om * om);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(6);
        let v = gl.integrate(0.0, 2.0, |x| x.powi(11));
        assert_relative_eq!(v, 2f64.powi(12) / 12.0, max_relative = 1e-13);
        let (_, w) = gauss_legendre(7);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn hermite_moments() {
        let (x, w) = gauss_hermite_prob(20);
        let m = |p: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum::<f64>();
        assert_relative_eq!(m(0), 1.0, max_relative = 1e-13);
        assert_relative_eq!(m(2), 1.0, max_relative = 1e-12);
        assert_relative_eq!(m(4), 3.0, max_relative = 1e-12);
        assert_relative_eq!(m(8), 105.0, max_relative = 1e-11);
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // int_0^1 x^-0.8 dx = 5
        let v = tanh_sinh(0.0, 1.0, 1e-12, |_, da, _| libm::pow(da, -0.8));
        assert_relative_eq!(v, 5.0, max_relative = 1e-9);
        let v = tanh_sinh(0.0, 1.0, 1e-12, |_, da, db| 1.0 / libm::sqrt(da * db));
        assert_relative_eq!(v, PI, max_relative = 1e-9);
    }

    #[test]
    fn adaptive_gk() {
        let (v, _) = adaptive(0.0, PI, 1e-14, 1e-13, libm::sin);
        assert_relative_eq!(v, 2.0, max_relative = 1e-13);
        let (v, _) = adaptive_half_line(0.0, 1e-13, 1e-12, |x| libm::exp(-x));
        assert_relative_eq!(v, 1.0, max_relative = 1e-11);
    }
}
