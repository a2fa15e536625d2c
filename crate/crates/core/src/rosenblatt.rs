//! Two-domain Rosenblatt laws: cumulants, characteristic function, density and CDF.
//!
//! The law is that of `H = sum_j mu_j (Z_j^2 - 1)` where `mu_j` are the
//! normalised eigenvalues of the product kernel `|x1-y1|^-alpha |x2-y2|^-beta`
//! on `D1 x D2`. Eigenvalues come from the Galerkin discretisation of each
//! block; the Hilbert-Schmidt mass the grid misses enters as a Gaussian term,
//! which keeps `kappa_1 = 0` and `kappa_2 = 1` exact.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::cyclic::{
    self, galerkin, BatchExecutor, Budget, CyclicCoefficient, Domain, Kernel, Method, Profile, Sequential,
};
use crate::error::{Error, Result};
use crate::geometry::ConvexBody;
use crate::special::factorial;

pub const DEFAULT_ORDER: usize = 40;
/// Galerkin cells per block.
pub const DEFAULT_CELLS: usize = 400;
/// Relative size of the last retained series term that counts as divergence.
pub const DIVERGENCE_RATIO: f64 = 1e-8;
/// Series terms below this fraction of the partial sum end the summation.
pub const STOP_RATIO: f64 = 1e-12;
/// Largest aliasing mass accepted by the inversion.
pub const MAX_ALIASING: f64 = 1e-6;
const PHI_FLOOR: f64 = 1e-10;
const MAX_XI_POINTS: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cumulant {
    pub k: usize,
    pub value: f64,
    pub stderr: Option<f64>,
}

/// `2^(k-1) (k-1)!`.
pub fn cumulant_factor(k: usize) -> f64 {
    libm::pow(2.0, (k - 1) as f64) * factorial(k - 1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RosenblattOptions {
    /// Truncation order of the tail power series.
    pub order: usize,
    /// Target number of Galerkin cells per block.
    pub cells: usize,
    /// Highest `k` stored in the cyclic-coefficient table.
    pub ck_order: usize,
    pub budget: Budget,
}

impl Default for RosenblattOptions {
    fn default() -> Self {
        Self { order: DEFAULT_ORDER, cells: DEFAULT_CELLS, ck_order: cyclic::MAX_K, budget: Budget::default() }
    }
}

#[derive(Debug, Clone)]
pub struct RosenblattSpec {
    pub alpha: f64,
    pub beta: f64,
    pub body1: ConvexBody,
    pub body2: ConvexBody,
    /// `c_k^{alpha,beta}` for `k = 2..=ck_order`.
    pub ck_table: Vec<CyclicCoefficient>,
    pub order: usize,
    mu: Vec<f64>,
    breaks: Vec<usize>,
    /// `suffix[b][k] = sum_{j >= breaks[b]} mu_j^k`.
    suffix: Vec<Vec<f64>>,
    gauss: f64,
}

fn block_spectrum(a: f64, body: &ConvexBody, cells: usize) -> Result<Vec<f64>> {
    let f = Profile::Power(a);
    let n2 = galerkin::pair_integral(&f, 2.0, body)?;
    let per_axis = if body.dim == 1 {
        cells
    } else {
        (libm::round(libm::pow(cells as f64, 1.0 / body.dim as f64)) as usize).max(2)
    };
    let scale = 1.0 / libm::sqrt(n2);
    Ok(galerkin::spectrum(&f, body, per_axis).into_iter().map(|l| l * scale).collect())
}

impl RosenblattSpec {
    pub fn new(alpha: f64, beta: f64, body1: ConvexBody, body2: ConvexBody) -> Result<Self> {
        Self::with_options(alpha, beta, body1, body2, &RosenblattOptions::default())
    }

    pub fn with_options(alpha: f64, beta: f64, body1: ConvexBody, body2: ConvexBody, opts: &RosenblattOptions) -> Result<Self> {
        Self::with_executor(alpha, beta, body1, body2, opts, &Sequential)
    }

    pub fn with_executor(
        alpha: f64,
        beta: f64,
        body1: ConvexBody,
        body2: ConvexBody,
        opts: &RosenblattOptions,
        exec: &dyn BatchExecutor,
    ) -> Result<Self> {
        if opts.order < 2 {
            return Err(Error::InvalidParams(format!("series order {} < 2", opts.order)));
        }
        if !(2..=cyclic::MAX_K).contains(&opts.ck_order) {
            return Err(Error::InvalidParams(format!("ck_order {} outside 2..={}", opts.ck_order, cyclic::MAX_K)));
        }
        let ck_table = cyclic::rosenblatt_ck_table_with(alpha, beta, &body1, &body2, opts.ck_order, &opts.budget, exec)?;
        let s1 = block_spectrum(alpha, &body1, opts.cells)?;
        let s2 = block_spectrum(beta, &body2, opts.cells)?;
        let r = core::f64::consts::FRAC_1_SQRT_2;
        let mut mu: Vec<f64> = s1.iter().flat_map(|a| s2.iter().map(move |b| r * a * b)).collect();
        mu.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
        let hs: f64 = mu.iter().map(|m| m * m).sum();
        let gauss = (0.5 - hs).max(0.0);
        let mut spec = Self { alpha, beta, body1, body2, ck_table, order: opts.order, mu, breaks: Vec::new(), suffix: Vec::new(), gauss };
        spec.build_suffix();
        Ok(spec)
    }

    /// Same law with a different series truncation.
    pub fn with_order(&self, order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidParams(format!("series order {order} < 2")));
        }
        let mut s = self.clone();
        s.order = order;
        s.build_suffix();
        Ok(s)
    }

    fn build_suffix(&mut self) {
        let n = self.mu.len();
        let mut breaks = vec![0usize];
        let mut b = 16;
        while b < n {
            breaks.push(b);
            b *= 2;
        }
        breaks.push(n);
        let mut suffix = vec![vec![0.0; self.order + 1]; breaks.len()];
        let mut acc = vec![0.0; self.order + 1];
        let mut j = n;
        for bi in (0..breaks.len()).rev() {
            while j > breaks[bi] {
                j -= 1;
                let mut p = 1.0;
                for a in acc.iter_mut() {
                    *a += p;
                    p *= self.mu[j];
                }
            }
            suffix[bi].copy_from_slice(&acc);
        }
        self.breaks = breaks;
        self.suffix = suffix;
    }

    /// Normalised eigenvalue products, largest magnitude first.
    pub fn spectrum(&self) -> &[f64] {
        &self.mu
    }

    /// Variance carried by the Gaussian remainder.
    pub fn gaussian_part(&self) -> f64 {
        2.0 * self.gauss
    }

    /// Cumulants from the coefficient table: `kappa_1 = 0`, `kappa_k = 2^(k-1)(k-1)! c_k`.
    pub fn cumulants(&self) -> Vec<Cumulant> {
        let mut out = vec![Cumulant { k: 1, value: 0.0, stderr: None }];
        out.extend(self.ck_table.iter().map(|c| {
            let f = cumulant_factor(c.k);
            Cumulant { k: c.k, value: f * c.value, stderr: c.stderr.map(|s| f * s) }
        }));
        out
    }

    /// Cumulant of the discretised law used for inversion.
    pub fn spectral_cumulant(&self, k: usize) -> f64 {
        match k {
            0 => 0.0,
            1 => 0.0,
            2 => 1.0,
            _ => cumulant_factor(k) * self.mu.iter().map(|m| libm::pow(*m, k as f64)).sum::<f64>(),
        }
    }

    /// `log E exp(z H)` and the magnitude of the last series term used.
    fn log_mgf(&self, z: Complex64) -> Result<(Complex64, f64)> {
        let az = z.norm();
        if az == 0.0 {
            return Ok((Complex64::new(0.0, 0.0), 0.0));
        }
        let mut bi = 0;
        while self.breaks[bi] < self.mu.len() && 2.0 * az * self.mu[self.breaks[bi]].abs() > 0.25 {
            bi += 1;
        }
        let one = Complex64::new(1.0, 0.0);
        let mut total = z * z * self.gauss;
        for &m in &self.mu[..self.breaks[bi]] {
            let w = z * (2.0 * m);
            total += -0.5 * (one - w).ln() - 0.5 * w;
        }
        let s = &self.suffix[bi];
        let w = z * 2.0;
        let mut wk = w;
        let mut last = 0.0;
        let mut series = Complex64::new(0.0, 0.0);
        for (k, sk) in s.iter().enumerate().skip(2) {
            wk *= w;
            let term = wk * (sk / (2 * k) as f64);
            series += term;
            last = term.norm();
            if last <= STOP_RATIO * series.norm() {
                break;
            }
        }
        if last > DIVERGENCE_RATIO * (total + series).norm() {
            return Err(Error::SeriesDiverging { last, sum: (total + series).norm() });
        }
        Ok((total + series, last))
    }

    /// `E exp(i xi H)`.
    pub fn char_fn(&self, xi: f64) -> Result<Complex64> {
        Ok(self.log_mgf(Complex64::new(0.0, xi))?.0.exp())
    }

    /// Characteristic function with the magnitude of the last series term.
    pub fn char_fn_terms(&self, xi: f64) -> Result<(Complex64, f64)> {
        let (l, last) = self.log_mgf(Complex64::new(0.0, xi))?;
        Ok((l.exp(), last))
    }

    /// `exp(1/2 sum_k (2 i xi)^k c_k / k)` straight from the coefficient table.
    /// Only valid inside the radius of convergence of the cumulant series.
    pub fn char_fn_series(&self, xi: f64) -> Result<Complex64> {
        let w = Complex64::new(0.0, 2.0 * xi);
        let mut wk = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(0.0, 0.0);
        let mut last = 0.0;
        for c in &self.ck_table {
            // table starts at k = 2
            if c.k == 2 {
                wk = w * w;
            } else {
                wk *= w;
            }
            let term = wk * (0.5 * c.value / c.k as f64);
            sum += term;
            last = term.norm();
            if last <= STOP_RATIO * sum.norm() {
                return Ok(sum.exp());
            }
        }
        if last > DIVERGENCE_RATIO * sum.norm() {
            return Err(Error::SeriesDiverging { last, sum: sum.norm() });
        }
        Ok(sum.exp())
    }

    fn cgf(&self, s: f64) -> Option<f64> {
        self.log_mgf(Complex64::new(s, 0.0)).ok().map(|(v, _)| v.re)
    }

    fn s_range(&self) -> (f64, f64) {
        let pos = self.mu.iter().cloned().fold(0.0f64, f64::max);
        let neg = self.mu.iter().cloned().fold(0.0f64, f64::min);
        let hi = if pos > 0.0 { 0.5 / pos } else { 1e3 };
        let lo = if neg < 0.0 { 0.5 / neg } else { -1e3 };
        (lo * (1.0 - 1e-9), hi * (1.0 - 1e-9))
    }

    /// Chernoff bound on `P(H >= y)` for `y > 0`, or on `P(H <= y)` for `y < 0`.
    pub fn tail_bound(&self, y: f64) -> f64 {
        if y == 0.0 {
            return 1.0;
        }
        let (lo, hi) = self.s_range();
        let (mut a, mut b) = if y > 0.0 { (0.0, hi) } else { (lo, 0.0) };
        let g = |s: f64| self.cgf(s).map_or(f64::INFINITY, |k| k - s * y);
        let r = 0.5 * (libm::sqrt(5.0) - 1.0);
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let (mut gc, mut gd) = (g(c), g(d));
        for _ in 0..90 {
            if gc < gd {
                b = d;
                d = c;
                gd = gc;
                c = b - r * (b - a);
                gc = g(c);
            } else {
                a = c;
                c = d;
                gc = gd;
                d = a + r * (b - a);
                gd = g(d);
            }
        }
        libm::exp(gc.min(gd).min(0.0))
    }

    /// `(lo, hi)` with Chernoff tail mass at most `eps` on each side.
    pub fn tail_extent(&self, eps: f64) -> (f64, f64) {
        let find = |sign: f64| {
            let mut y = 1.0;
            while self.tail_bound(sign * y) > eps && y < 1e6 {
                y *= 2.0;
            }
            let (mut a, mut b) = (0.5 * y, y);
            for _ in 0..40 {
                let m = 0.5 * (a + b);
                if self.tail_bound(sign * m) > eps {
                    a = m;
                } else {
                    b = m;
                }
            }
            b
        };
        (-find(-1.0), find(1.0))
    }

    /// Grid covering all but `1e-9` of the mass on each side.
    pub fn auto_grid(&self, n: usize) -> Vec<f64> {
        let (lo, hi) = self.tail_extent(1e-9);
        let n = n.max(2);
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    /// Step and characteristic-function samples for the inversion of points within `reach`.
    fn inversion_grid(&self, reach: f64, offset: f64) -> Result<(f64, Vec<Complex64>, f64)> {
        let (lo, hi) = self.tail_extent(1e-12);
        let w = hi.max(-lo);
        let period = 2.0 * (reach + w);
        let step = 2.0 * PI / period;
        let aliasing = self.tail_bound(period - reach) + self.tail_bound(-(period - reach));
        if aliasing > MAX_ALIASING {
            return Err(Error::InversionUnstable { bound: aliasing });
        }
        // xi extent where |phi| has dropped below the floor
        let mut xmax = 1.0;
        while self.char_fn(xmax)?.norm() > PHI_FLOOR {
            xmax *= 2.0;
            if xmax / step > MAX_XI_POINTS as f64 {
                return Err(Error::InversionUnstable { bound: self.char_fn(xmax)?.norm() });
            }
        }
        let n = libm::ceil(xmax / step) as usize + 1;
        let phi = (0..n)
            .map(|k| self.char_fn((k as f64 + offset) * step))
            .collect::<Result<Vec<_>>>()?;
        Ok((step, phi, aliasing))
    }

    /// Density by trapezoidal Fourier inversion on a uniform `xi` grid.
    pub fn pdf(&self, xs: &[f64]) -> Result<PdfResult> {
        let reach = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let (step, phi, aliasing) = self.inversion_grid(reach, 0.0)?;
        let mut raw: Vec<f64> = xs
            .iter()
            .map(|&x| {
                let mut s = 0.5 * phi[0].re;
                for (k, p) in phi.iter().enumerate().skip(1) {
                    let e = Complex64::from_polar(1.0, -(k as f64) * step * x);
                    s += (p * e).re;
                }
                s * step / PI
            })
            .collect();
        let mut clip_mass = 0.0;
        for (i, r) in raw.iter_mut().enumerate() {
            if *r < 0.0 {
                clip_mass += -*r * cell_width(xs, i);
                *r = 0.0;
            }
        }
        Ok(PdfResult { density: raw, clip_mass, aliasing_bound: aliasing, xi_max: step * (phi.len() - 1) as f64, xi_step: step })
    }

    /// CDF by midpoint Gil-Pelaez inversion.
    pub fn cdf(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let reach = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let (step, phi, _) = self.inversion_grid(reach, 0.5)?;
        Ok(xs
            .iter()
            .map(|&x| {
                let mut s = 0.0;
                for (k, p) in phi.iter().enumerate() {
                    let xi = (k as f64 + 0.5) * step;
                    let e = Complex64::from_polar(1.0, -xi * x);
                    s += (p * e).im / xi;
                }
                (0.5 - s * step / PI).clamp(0.0, 1.0)
            })
            .collect())
    }
}

fn cell_width(xs: &[f64], i: usize) -> f64 {
    match xs.len() {
        0 | 1 => 1.0,
        _ if i == 0 => 0.5 * (xs[1] - xs[0]).abs(),
        n if i == n - 1 => 0.5 * (xs[n - 1] - xs[n - 2]).abs(),
        _ => 0.5 * (xs[i + 1] - xs[i - 1]).abs(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdfResult {
    pub density: Vec<f64>,
    /// Mass removed by clipping negative values to zero.
    pub clip_mass: f64,
    /// Chernoff bound on the mass folded back onto the grid by periodisation.
    pub aliasing_bound: f64,
    pub xi_max: f64,
    pub xi_step: f64,
}

/// Cumulants of the Rosenblatt-type law of parameter `alpha` on `body`,
/// built from the un-normalised cyclic integrals of `|z|^-alpha`.
pub fn rosenblatt_type_cumulants(alpha: f64, body: &ConvexBody, order: usize, budget: &Budget) -> Result<Vec<Cumulant>> {
    if !(alpha > 0.0 && alpha < 0.5 * body.dim as f64) {
        return Err(Error::InvalidAlpha { alpha, limit: 0.5 * body.dim as f64 });
    }
    if !(1..=cyclic::MAX_K).contains(&order) {
        return Err(Error::InvalidParams(format!("order {order} outside 1..={}", cyclic::MAX_K)));
    }
    let method = if body.dim == 1 { Method::TensorQuadrature } else { Method::MonteCarlo };
    let kernel = Kernel::PowerLaw { alpha };
    let domain = Domain::body(body.clone());
    let mut out = vec![Cumulant { k: 1, value: 0.0, stderr: None }];
    for k in 2..=order {
        let e = cyclic::cyclic_numerator_with(&kernel, &domain, k, method, budget, &Sequential)?;
        let f = cumulant_factor(k);
        out.push(Cumulant { k, value: f * e.value, stderr: e.stderr.map(|s| f * s) });
    }
    Ok(out)
}

/// `c_k` of a product of `p` domains from the per-block normalised coefficients.
pub fn multi_domain_ck(block_ck: &[f64], k: usize) -> f64 {
    libm::pow(2.0, -0.5 * k as f64) * block_ck.iter().product::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fixture() -> RosenblattSpec {
        let u = ConvexBody::unit_box(1);
        RosenblattSpec::new(0.3, 0.28, u.clone(), u).unwrap()
    }

    fn trapz(x: &[f64], y: &[f64]) -> f64 {
        x.windows(2).zip(y.windows(2)).map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1])).sum()
    }

    #[test]
    fn cumulant_table_matches_golden() {
        let s = fixture();
        let k = s.cumulants();
        assert_eq!(k[0].value, 0.0);
        assert_relative_eq!(k[1].value, 1.0, epsilon = 1e-15);
        assert_relative_eq!(k[2].value, 1.6007057764724513, max_relative = 1e-4);
        // the discretised spectrum reproduces the table closely
        assert_relative_eq!(s.spectral_cumulant(3), k[2].value, max_relative = 2e-2);
    }

    #[test]
    fn char_fn_basics() {
        let s = fixture();
        assert_eq!(s.char_fn(0.0).unwrap(), Complex64::new(1.0, 0.0));
        let a = s.char_fn(0.7).unwrap();
        let b = s.char_fn(-0.7).unwrap();
        assert_relative_eq!(a.re, b.re, epsilon = 1e-14);
        assert_relative_eq!(a.im, -b.im, epsilon = 1e-14);
        let h = 1e-4;
        let d2 = (s.char_fn(h).unwrap() - 2.0 * s.char_fn(0.0).unwrap() + s.char_fn(-h).unwrap()) / (h * h);
        assert!((d2.re + 1.0).abs() < 1e-6, "{d2}");
    }

    #[test]
    fn series_agrees_near_origin_and_diverges_far_out() {
        let s = fixture();
        let a = s.char_fn(0.05).unwrap();
        let b = s.char_fn_series(0.05).unwrap();
        assert!((a - b).norm() < 1e-4);
        assert!(matches!(s.char_fn_series(3.0), Err(Error::SeriesDiverging { .. })));
    }

    #[test]
    fn density_moments() {
        let s = fixture();
        let xs = s.auto_grid(3001);
        let p = s.pdf(&xs).unwrap();
        let m0 = trapz(&xs, &p.density);
        let x1: Vec<f64> = xs.iter().zip(&p.density).map(|(x, f)| x * f).collect();
        let x2: Vec<f64> = xs.iter().zip(&p.density).map(|(x, f)| x * x * f).collect();
        assert!((m0 - 1.0).abs() < 1e-4, "{m0}");
        assert!(trapz(&xs, &x1).abs() < 1e-3);
        assert!((trapz(&xs, &x2) - 1.0).abs() < 1e-3);
        assert!(p.aliasing_bound < 1e-6);
    }

    #[test]
    fn truncation_drift_is_negligible() {
        let s = fixture();
        let xs = s.auto_grid(201);
        let a = s.with_order(20).unwrap().pdf(&xs).unwrap();
        let b = s.with_order(40).unwrap().pdf(&xs).unwrap();
        let drift = a.density.iter().zip(&b.density).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
        assert!(drift < 1e-8, "{drift}");
    }

    #[test]
    fn cdf_agrees_with_integrated_density() {
        let s = fixture();
        let xs = s.auto_grid(4001);
        let p = s.pdf(&xs).unwrap();
        let i = xs.iter().position(|x| *x > 0.5).unwrap();
        let integ = trapz(&xs[..=i], &p.density[..=i]);
        let f = s.cdf(&[xs[i]]).unwrap()[0];
        assert!((f - integ).abs() < 1e-5, "{f} vs {integ}");
    }

    #[test]
    fn degenerate_limit_is_scaled_chi_square() {
        let u = ConvexBody::unit_box(1);
        let s = RosenblattSpec::new(1e-9, 1e-9, u.clone(), u).unwrap();
        assert_relative_eq!(s.cumulants()[2].value, 2.0 * libm::sqrt(2.0), max_relative = 1e-6);
        // (Z^2 - 1)/sqrt 2
        let xi = 0.9;
        let r = core::f64::consts::FRAC_1_SQRT_2;
        let expect = (Complex64::new(1.0, -2.0 * xi * r)).powf(-0.5) * Complex64::from_polar(1.0, -xi * r);
        assert!((s.char_fn(xi).unwrap() - expect).norm() < 1e-6);
    }

    #[test]
    fn rosenblatt_type_kappa2_closed_form() {
        let k = rosenblatt_type_cumulants(0.4, &ConvexBody::unit_box(1), 3, &Budget::default()).unwrap();
        assert_eq!(k[0].value, 0.0);
        assert_relative_eq!(k[1].value, 50.0 / 3.0, max_relative = 1e-12);
        let n2: f64 = 2.0 / (0.2 * 1.2);
        assert_relative_eq!(k[2].value, 8.0 * 0.4183498886027492 * n2.powf(1.5), max_relative = 1e-4);
        assert!(matches!(rosenblatt_type_cumulants(0.5, &ConvexBody::unit_box(1), 3, &Budget::default()), Err(Error::InvalidAlpha { .. })));
    }

    #[test]
    fn multi_domain_reduces_to_two_blocks() {
        assert_relative_eq!(multi_domain_ck(&[1.0, 1.0], 3), 2f64.powf(-1.5));
    }
}
