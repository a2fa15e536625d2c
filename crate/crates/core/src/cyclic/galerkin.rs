//! Piecewise-constant Galerkin discretisation of convolution operators on bodies.
//!
//! Cell pair integrals are exact for power laws on intervals (second
//! antiderivative) and use corner-anchored Duffy splits otherwise, so the
//! singular diagonal is integrated without midpoint error.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::profile::Profile;
use crate::error::{Error, Result};
use crate::geometry::{ball_lens, ConvexBody};
use crate::quad::{self, GaussLegendre};
use crate::special::sphere_area;

/// `G(u) = int_0^|u| (|u| - s) f(s) ds`, so that `G'' = f` and `G(0) = 0`.
fn second_antiderivative(f: &Profile, u: f64) -> f64 {
    let u = u.abs();
    if u == 0.0 {
        return 0.0;
    }
    if let Profile::Power(a) = f {
        return libm::pow(u, 2.0 - a) / ((1.0 - a) * (2.0 - a));
    }
    quad::tanh_sinh(0.0, u, 1e-14, |_, s, us| us * f.eval(s))
}

/// Galerkin matrix of `f(|x - y|)` on `[0, len]` with `n` equal cells (orthonormal indicator basis).
pub fn matrix_1d(f: &Profile, len: f64, n: usize) -> DMatrix<f64> {
    let h = len / n as f64;
    let g: Vec<f64> = (0..=n).map(|m| second_antiderivative(f, m as f64 * h)).collect();
    let col: Vec<f64> = (0..n)
        .map(|m| {
            let lo = if m == 0 { g[1] } else { g[m - 1] };
            (g[m + 1] - 2.0 * g[m] + lo) / h
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| col[i.abs_diff(j)])
}

/// `int_{D^2} f(x - y)^p dx dy` for a radial profile.
pub fn pair_integral(f: &Profile, p: f64, body: &ConvexBody) -> Result<f64> {
    let fp = |r: f64| libm::pow(f.eval(r), p);
    let a = f.singular_exponent() * p;
    let d = body.dim;
    if a >= d as f64 {
        return Err(Error::InvalidAlpha { alpha: f.singular_exponent(), limit: d as f64 / p });
    }
    if d == 1 {
        let len = body.sides()[0];
        if let Profile::Power(al) = f {
            let b = al * p;
            return Ok(2.0 * libm::pow(len, 2.0 - b) / ((1.0 - b) * (2.0 - b)));
        }
        return Ok(2.0 * quad::tanh_sinh(0.0, len, 1e-13, |_, s, ls| ls * fp(s)));
    }
    if body.is_box() {
        // z in [-a, a]: 2^d symmetric corner boxes of the covariogram
        let sides = body.sides();
        let cov = |z: &[f64]| z.iter().zip(&sides).map(|(zi, s)| s - zi.abs()).product::<f64>();
        let v = corner_box_integral(&sides, &fp, &cov, 10);
        return Ok(libm::pow(2.0, d as f64) * v);
    }
    let r = body.extent[0];
    if d > 3 {
        return Err(Error::Unsupported("ball pair integrals beyond dimension 3".into()));
    }
    let s_area = sphere_area(d);
    let v = quad::tanh_sinh(0.0, 2.0 * r, 1e-13, |s, _, _| fp(s) * libm::pow(s, d as f64 - 1.0) * ball_lens(d, r, s));
    Ok(s_area * v)
}

/// `int_{[0,b]} f(|z|) P(z) dz` for a box with a corner at the origin, by pyramid
/// decomposition `z = s (b o w)`, `w_j = 1`; tanh-sinh handles the radial singularity.
fn corner_box_integral(
    b: &[f64],
    f: &dyn Fn(f64) -> f64,
    poly: &dyn Fn(&[f64]) -> f64,
    nodes: usize,
) -> f64 {
    let d = b.len();
    let gl = GaussLegendre::new(nodes);
    let pts: Vec<(f64, f64)> = gl.mapped(0.0, 1.0).collect();
    let jac: f64 = b.iter().product();
    let mut total = 0.0;
    let mut z = vec![0.0; d];
    let mut w = vec![0.0; d];
    let mut idx = vec![0usize; d.saturating_sub(1)];
    for j in 0..d {
        loop {
            let mut wt = 1.0;
            let mut k = 0;
            for (m, wm) in w.iter_mut().enumerate() {
                if m == j {
                    *wm = 1.0;
                } else {
                    let (x, ww) = pts[idx[k]];
                    *wm = x;
                    wt *= ww;
                    k += 1;
                }
            }
            let rho = libm::sqrt(w.iter().zip(b).map(|(wi, bi)| (wi * bi) * (wi * bi)).sum());
            // s^(d-1) f(s rho) poly(s w b) on (0, 1); tanh-sinh absorbs the origin singularity
            let inner = quad::tanh_sinh(0.0, 1.0, 1e-13, |s, _, _| {
                for m in 0..d {
                    z[m] = s * w[m] * b[m];
                }
                libm::pow(s, (d - 1) as f64) * f(s * rho) * poly(&z)
            });
            total += wt * inner;
            // next multi-index
            let mut carry = true;
            for i in idx.iter_mut() {
                if !carry {
                    break;
                }
                *i += 1;
                if *i == nodes {
                    *i = 0;
                } else {
                    carry = false;
                }
            }
            if carry {
                break;
            }
        }
    }
    jac * total
}

/// `int f(|z|) prod_m hat(z_m - delta_m) dz` with `hat(u) = (h - |u|)_+`, i.e. the
/// integral of the kernel over a pair of cubic cells with centre offset `delta`.
fn cell_pair_integral(f: &dyn Fn(f64) -> f64, h: f64, delta: &[f64], nodes: usize) -> f64 {
    let d = delta.len();
    // axis breakpoints: support ends, hat apex, origin
    let cuts: Vec<Vec<f64>> = delta
        .iter()
        .map(|&dm| {
            let mut c = vec![dm - h, dm, dm + h];
            if dm - h < 0.0 && 0.0 < dm + h && dm != 0.0 {
                c.push(0.0);
            }
            c.sort_by(f64::total_cmp);
            c.dedup();
            c
        })
        .collect();
    let hat = |z: &[f64]| z.iter().zip(delta).map(|(zm, dm)| (h - (zm - dm).abs()).max(0.0)).product::<f64>();
    let gl = GaussLegendre::new(nodes);
    let mut total = 0.0;
    let mut sel = vec![0usize; d];
    loop {
        let lo: Vec<f64> = (0..d).map(|m| cuts[m][sel[m]]).collect();
        let hi: Vec<f64> = (0..d).map(|m| cuts[m][sel[m] + 1]).collect();
        let corner = (0..d).all(|m| lo[m] == 0.0 || hi[m] == 0.0);
        if corner {
            // reflect so the origin is the lower corner
            let sgn: Vec<f64> = (0..d).map(|m| if hi[m] == 0.0 { -1.0 } else { 1.0 }).collect();
            let b: Vec<f64> = (0..d).map(|m| hi[m] - lo[m]).collect();
            let poly = |z: &[f64]| {
                let zz: Vec<f64> = z.iter().zip(&sgn).map(|(a, s)| a * s).collect();
                hat(&zz)
            };
            total += corner_box_integral(&b, f, &poly, nodes);
        } else {
            total += tensor_box(&gl, &lo, &hi, &|z: &[f64]| f(libm::sqrt(z.iter().map(|v| v * v).sum())) * hat(z));
        }
        let mut m = 0;
        loop {
            if m == d {
                return total;
            }
            sel[m] += 1;
            if sel[m] + 1 < cuts[m].len() {
                break;
            }
            sel[m] = 0;
            m += 1;
        }
    }
}

fn tensor_box(gl: &GaussLegendre, lo: &[f64], hi: &[f64], g: &dyn Fn(&[f64]) -> f64) -> f64 {
    let d = lo.len();
    let axes: Vec<Vec<(f64, f64)>> = (0..d).map(|m| gl.mapped(lo[m], hi[m]).collect()).collect();
    let n = axes[0].len();
    let mut idx = vec![0usize; d];
    let mut z = vec![0.0; d];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for m in 0..d {
            let (x, wm) = axes[m][idx[m]];
            z[m] = x;
            w *= wm;
        }
        total += w * g(&z);
        let mut m = 0;
        loop {
            if m == d {
                return total;
            }
            idx[m] += 1;
            if idx[m] < n {
                break;
            }
            idx[m] = 0;
            m += 1;
        }
    }
}

/// Galerkin matrix on a body of any dimension using cubic cells of side `h`.
/// Balls keep the cells whose centres lie inside.
pub fn matrix_cells(f: &Profile, body: &ConvexBody, per_axis: usize) -> DMatrix<f64> {
    let d = body.dim;
    let sides = body.sides();
    let h = sides.iter().fold(0.0f64, |m, s| m.max(*s)) / per_axis as f64;
    let counts: Vec<usize> = sides.iter().map(|s| (libm::round(s / h) as usize).max(1)).collect();
    let lower = body.lower();
    let mut centres: Vec<Vec<usize>> = Vec::new();
    let total: usize = counts.iter().product();
    for lin in 0..total {
        let mut rem = lin;
        let mut ix = vec![0usize; d];
        for m in 0..d {
            ix[m] = rem % counts[m];
            rem /= counts[m];
        }
        let c: Vec<f64> = (0..d).map(|m| lower[m] + (ix[m] as f64 + 0.5) * h).collect();
        if body.contains(&c) {
            centres.push(ix);
        }
    }
    let fe = |r: f64| f.eval(r);
    // cache by absolute offset
    let mut cache: Vec<Option<f64>> = vec![None; total];
    let n = centres.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    let vol = libm::pow(h, d as f64);
    for i in 0..n {
        for j in i..n {
            let off: Vec<usize> = (0..d).map(|k| centres[i][k].abs_diff(centres[j][k])).collect();
            let mut lin = 0usize;
            for k in (0..d).rev() {
                lin = lin * counts[k] + off[k];
            }
            let v = match cache[lin] {
                Some(v) => v,
                None => {
                    let delta: Vec<f64> = off.iter().map(|o| *o as f64 * h).collect();
                    let v = cell_pair_integral(&fe, h, &delta, 6) / vol;
                    cache[lin] = Some(v);
                    v
                }
            };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Eigenvalues of a symmetric matrix, sorted by decreasing magnitude.
pub fn eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    ev
}

/// Galerkin spectrum of `f` on a body with resolution `n` (cells per axis).
pub fn spectrum(f: &Profile, body: &ConvexBody, n: usize) -> Vec<f64> {
    if body.dim == 1 {
        eigenvalues(matrix_1d(f, body.sides()[0], n))
    } else {
        eigenvalues(matrix_cells(f, body, n))
    }
}

/// Power sums `sum lambda^k` for `k = 0..=kmax`.
pub fn power_sums(ev: &[f64], kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    for &l in ev {
        let mut p = 1.0;
        for o in out.iter_mut() {
            *o += p;
            p *= l;
        }
    }
    out
}

/// Aitken extrapolation of a sequence at geometric resolutions.
pub fn aitken(v: [f64; 3]) -> f64 {
    let d1 = v[1] - v[0];
    let d2 = v[2] - v[1];
    if d1 == 0.0 || d2.abs() <= 1e-15 * v[2].abs() {
        return v[2];
    }
    let r = d2 / d1;
    if !(r > 0.0 && r < 0.95) {
        return v[2];
    }
    v[2] + d2 * r / (1.0 - r)
}
