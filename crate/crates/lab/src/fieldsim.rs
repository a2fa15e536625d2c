//! Gaussian field sampling on regular grids: circulant embedding with a dense
//! Cholesky fallback for small grids.

use std::sync::Arc;

use gneiting_core::covariance::GneitingCovariance;
use gneiting_core::geometry::WindowSpec;
use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const DEFAULT_NODE_CAP: usize = 1 << 22;
pub const DEFAULT_EPS_CLIP: f64 = 1e-3;
pub const CHOLESKY_MAX_NODES: usize = 4096;
pub const MAX_EMBEDDING_FACTOR: usize = 8;

/// Regular grid over the bounding box of `t1 D1 x t2 D2`, nodes at cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub d1: usize,
    pub t: f64,
    pub h: f64,
    pub node_counts: Vec<usize>,
    /// Centre of the first node.
    pub origin: Vec<f64>,
    /// Nodes inside the window, row-major; `None` when every node is inside.
    pub mask: Option<Vec<bool>>,
    pub window_volume: f64,
}

impl GridSpec {
    pub fn new(window: &WindowSpec, t: f64, h: f64) -> Result<Self> {
        Self::with_cap(window, t, h, DEFAULT_NODE_CAP)
    }

    pub fn with_cap(window: &WindowSpec, t: f64, h: f64, cap: usize) -> Result<Self> {
        if !(t > 0.0 && h > 0.0) {
            return Err(Error::Config(format!("grid needs t > 0 and h > 0, got t={t}, h={h}")));
        }
        let (b1, b2) = window.blocks(t);
        let mut counts = Vec::new();
        let mut origin = Vec::new();
        for b in [&b1, &b2] {
            for (lo, side) in b.lower().into_iter().zip(b.sides()) {
                let n = ((side / h).round() as usize).max(1);
                counts.push(n);
                // centre the node block on the body
                origin.push(lo + 0.5 * side - 0.5 * (n as f64 - 1.0) * h);
            }
        }
        let nodes = counts.iter().try_fold(1usize, |a, &n| a.checked_mul(n)).unwrap_or(usize::MAX);
        if nodes > cap {
            return Err(Error::GridTooLarge { nodes, cap });
        }
        let d1 = b1.dim;
        let mask = if b1.is_box() && b2.is_box() {
            None
        } else {
            let mut m = Vec::with_capacity(nodes);
            let mut x = vec![0.0; counts.len()];
            for_each_index(&counts, |idx| {
                for (j, &i) in idx.iter().enumerate() {
                    x[j] = origin[j] + i as f64 * h;
                }
                m.push(b1.contains(&x[..d1]) && b2.contains(&x[d1..]));
            });
            Some(m)
        };
        Ok(Self { d1, t, h, node_counts: counts, origin, mask, window_volume: b1.vol() * b2.vol() })
    }

    /// Box grid with explicit counts; `d1` leading axes belong to the first block.
    pub fn from_counts(d1: usize, node_counts: Vec<usize>, h: f64) -> Result<Self> {
        if node_counts.is_empty() || d1 > node_counts.len() || node_counts.contains(&0) {
            return Err(Error::Config(format!("bad grid counts {node_counts:?} with d1={d1}")));
        }
        let vol = node_counts.iter().map(|&n| n as f64 * h).product();
        let origin = vec![0.5 * h; node_counts.len()];
        Ok(Self { d1, t: 1.0, h, node_counts, origin, mask: None, window_volume: vol })
    }

    pub fn dim(&self) -> usize {
        self.node_counts.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.node_counts.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    pub fn active_nodes(&self) -> usize {
        self.mask.as_ref().map_or(self.n_nodes(), |m| m.iter().filter(|b| **b).count())
    }

    /// Values at nodes inside the window.
    pub fn active_values(&self, values: &[f64]) -> Vec<f64> {
        match &self.mask {
            None => values.to_vec(),
            Some(m) => values.iter().zip(m).filter(|(_, k)| **k).map(|(v, _)| *v).collect(),
        }
    }
}

/// Calls `f` on every multi-index of `counts` in row-major order.
fn for_each_index(counts: &[usize], mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; counts.len()];
    if counts.contains(&0) {
        return;
    }
    loop {
        f(&idx);
        let mut a = counts.len();
        loop {
            if a == 0 {
                return;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < counts[a] {
                break;
            }
            idx[a] = 0;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMethod {
    Circulant,
    Cholesky,
}

impl SampleMethod {
    pub fn name(self) -> &'static str {
        match self {
            SampleMethod::Circulant => "circulant",
            SampleMethod::Cholesky => "cholesky",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    /// Row-major over `node_counts`.
    pub values: Vec<f64>,
    pub seed: u64,
    pub method: SampleMethod,
}

/// Negative embedding eigenvalues set to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipReport {
    /// `lambda_min / lambda_max` before clipping.
    pub lambda_min: f64,
    /// Discarded share of the total absolute spectral mass.
    pub discarded_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerOptions {
    pub eps_clip: f64,
    pub max_factor: usize,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self { eps_clip: DEFAULT_EPS_CLIP, max_factor: MAX_EMBEDDING_FACTOR }
    }
}

enum Inner {
    Circulant { embed: Vec<usize>, sqrt_eig: Vec<f64>, ffts: Vec<Arc<dyn Fft<f64>>> },
    Cholesky { l: DMatrix<f64> },
}

/// Prepared sampler for one covariance and grid; cheap to share across threads.
pub struct FieldSampler {
    counts: Vec<usize>,
    inner: Inner,
    pub method: SampleMethod,
    pub embedding_factor: usize,
    pub clip: Option<ClipReport>,
}

fn lag_cov(c: &GneitingCovariance, d1: usize, lag: &[f64]) -> f64 {
    let n1 = lag[..d1].iter().map(|v| v * v).sum::<f64>().sqrt();
    let n2 = lag[d1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    c.eval_norms(n1, n2)
}

/// In-place multi-dimensional FFT of a row-major array.
fn fft_nd(data: &mut [Complex64], dims: &[usize], ffts: &[Arc<dyn Fft<f64>>], line: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>) {
    let total = data.len();
    let mut stride = 1;
    for a in (0..dims.len()).rev() {
        let m = dims[a];
        let fft = &ffts[a];
        if m > 1 {
            scratch.resize(fft.get_inplace_scratch_len(), Complex64::default());
            if stride == 1 {
                for chunk in data.chunks_exact_mut(m) {
                    fft.process_with_scratch(chunk, scratch);
                }
            } else {
                line.resize(m, Complex64::default());
                let block = m * stride;
                for outer in (0..total).step_by(block) {
                    for inner in 0..stride {
                        let base = outer + inner;
                        for (i, v) in line.iter_mut().enumerate() {
                            *v = data[base + i * stride];
                        }
                        fft.process_with_scratch(line, scratch);
                        for (i, v) in line.iter().enumerate() {
                            data[base + i * stride] = *v;
                        }
                    }
                }
            }
        }
        stride *= m;
    }
}

impl FieldSampler {
    pub fn new(c: &GneitingCovariance, grid: &GridSpec, opts: &SamplerOptions) -> Result<Self> {
        if !c.valid {
            return Err(Error::Config("covariance is not a valid Gneiting model".into()));
        }
        if c.d1() + c.d2() != grid.dim() || c.d1() != grid.d1 {
            return Err(Error::Config(format!(
                "covariance dims ({}, {}) do not match grid dims ({}, {})",
                c.d1(),
                c.d2(),
                grid.d1,
                grid.dim() - grid.d1
            )));
        }
        let counts = grid.node_counts.clone();
        let mut planner = FftPlanner::new();
        let mut factor = 2;
        let mut last = (0.0, 0.0);
        while factor <= opts.max_factor.max(2) {
            let embed: Vec<usize> = counts.iter().map(|&n| if n == 1 { 1 } else { factor * n }).collect();
            let ffts: Vec<Arc<dyn Fft<f64>>> = embed.iter().map(|&m| planner.plan_fft_forward(m)).collect();
            let size: usize = embed.iter().product();
            let mut base = Vec::with_capacity(size);
            let mut lag = vec![0.0; embed.len()];
            for_each_index(&embed, |idx| {
                for (j, (&i, &m)) in idx.iter().zip(&embed).enumerate() {
                    lag[j] = i.min(m - i) as f64 * grid.h;
                }
                base.push(Complex64::new(lag_cov(c, grid.d1, &lag), 0.0));
            });
            fft_nd(&mut base, &embed, &ffts, &mut Vec::new(), &mut Vec::new());
            let lam: Vec<f64> = base.iter().map(|z| z.re).collect();
            let lmax = lam.iter().cloned().fold(f64::MIN, f64::max);
            let lmin = lam.iter().cloned().fold(f64::MAX, f64::min);
            let neg: f64 = lam.iter().filter(|l| **l < 0.0).map(|l| -l).sum();
            let tot: f64 = lam.iter().map(|l| l.abs()).sum();
            let exact = lmin >= -1e-10 * lmax;
            let last_try = factor * 2 > opts.max_factor.max(2);
            last = (lmin / lmax, neg / tot);
            if exact || (last_try && neg / tot <= opts.eps_clip) {
                let clip = (!exact).then_some(ClipReport { lambda_min: lmin / lmax, discarded_mass: neg / tot });
                if let Some(r) = clip {
                    log::warn!("clipping embedding spectrum: lambda_min/lambda_max {:e}, discarded mass {:e}", r.lambda_min, r.discarded_mass);
                }
                let sqrt_eig = lam.iter().map(|l| (l.max(0.0) / size as f64).sqrt()).collect();
                return Ok(Self {
                    counts,
                    inner: Inner::Circulant { embed, sqrt_eig, ffts },
                    method: SampleMethod::Circulant,
                    embedding_factor: factor,
                    clip,
                });
            }
            factor *= 2;
        }
        if grid.n_nodes() <= CHOLESKY_MAX_NODES {
            if let Some(l) = Self::cholesky(c, grid) {
                log::info!("circulant embedding not definite; using dense Cholesky");
                return Ok(Self { counts, inner: Inner::Cholesky { l }, method: SampleMethod::Cholesky, embedding_factor: 0, clip: None });
            }
        }
        Err(Error::EmbeddingFailed { lambda_min: last.0, threshold: opts.eps_clip })
    }

    fn cholesky(c: &GneitingCovariance, grid: &GridSpec) -> Option<DMatrix<f64>> {
        let n = grid.n_nodes();
        let mut pts = Vec::with_capacity(n);
        for_each_index(&grid.node_counts, |idx| pts.push(idx.iter().map(|&i| i as f64 * grid.h).collect::<Vec<_>>()));
        let mut lag = vec![0.0; grid.dim()];
        let m = DMatrix::from_fn(n, n, |i, j| {
            for (l, (a, b)) in lag.iter_mut().zip(pts[i].iter().zip(&pts[j])) {
                *l = a - b;
            }
            lag_cov(c, grid.d1, &lag)
        });
        m.cholesky().map(|ch| ch.l())
    }

    pub fn n_nodes(&self) -> usize {
        self.counts.iter().product()
    }

    /// Two independent fields from one stream.
    pub fn sample_pair(&self, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
        match &self.inner {
            Inner::Circulant { embed, sqrt_eig, ffts } => {
                let mut buf: Vec<Complex64> = sqrt_eig
                    .iter()
                    .map(|s| {
                        let a: f64 = StandardNormal.sample(rng);
                        let b: f64 = StandardNormal.sample(rng);
                        Complex64::new(s * a, s * b)
                    })
                    .collect();
                fft_nd(&mut buf, embed, ffts, &mut Vec::new(), &mut Vec::new());
                let n = self.n_nodes();
                let (mut re, mut im) = (Vec::with_capacity(n), Vec::with_capacity(n));
                for_each_index(&self.counts, |idx| {
                    let k = idx.iter().zip(embed).fold(0, |acc, (&i, &m)| acc * m + i);
                    re.push(buf[k].re);
                    im.push(buf[k].im);
                });
                (re, im)
            }
            Inner::Cholesky { l } => {
                let n = l.nrows();
                let z1 = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
                let z2 = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
                ((l * z1).as_slice().to_vec(), (l * z2).as_slice().to_vec())
            }
        }
    }

    /// Replicate `index` of the ensemble seeded by `master_seed`: pair `index / 2`,
    /// real or imaginary part by parity.
    pub fn stream(master_seed: u64, pair: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(pair);
        rng
    }

    pub fn sample(&self, seed: u64) -> FieldSample {
        let (a, _) = self.sample_pair(&mut Self::stream(seed, 0));
        FieldSample { values: a, seed, method: self.method }
    }
}

/// One realisation of the field on the grid.
pub fn sample_field(c: &GneitingCovariance, grid: &GridSpec, seed: u64) -> Result<FieldSample> {
    Ok(FieldSampler::new(c, grid, &SamplerOptions::default())?.sample(seed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovRow {
    pub lag: Vec<isize>,
    pub theoretical: f64,
    pub empirical: f64,
    pub stderr: f64,
}

/// Empirical covariance at on-grid lags (in mesh units), averaged over all
/// node pairs at that lag and then over replicates.
pub fn empirical_cov_check(c: &GneitingCovariance, grid: &GridSpec, lags: &[Vec<isize>], n_reps: usize, seed: u64) -> Result<Vec<CovRow>> {
    for lag in lags {
        if lag.len() != grid.dim() || lag.iter().zip(&grid.node_counts).any(|(l, &n)| l.unsigned_abs() >= n) {
            return Err(Error::OffGrid(lag.clone()));
        }
    }
    if n_reps < 2 {
        return Err(gneiting_core::Error::VarUndefined.into());
    }
    let sampler = FieldSampler::new(c, grid, &SamplerOptions::default())?;
    let counts = &grid.node_counts;
    let strides: Vec<isize> = (0..counts.len()).map(|a| counts[a + 1..].iter().product::<usize>() as isize).collect();
    let mut per_rep = vec![Vec::with_capacity(n_reps); lags.len()];
    let mut fields = Vec::with_capacity(n_reps);
    for p in 0..n_reps.div_ceil(2) {
        let (a, b) = sampler.sample_pair(&mut FieldSampler::stream(seed, p as u64));
        fields.push(a);
        if fields.len() < n_reps {
            fields.push(b);
        }
    }
    for f in &fields {
        for (li, lag) in lags.iter().enumerate() {
            let off: isize = lag.iter().zip(&strides).map(|(l, s)| l * s).sum();
            let (mut s, mut cnt) = (0.0, 0usize);
            for_each_index(counts, |idx| {
                if idx.iter().zip(lag).zip(counts).all(|((&i, &l), &n)| {
                    let j = i as isize + l;
                    j >= 0 && (j as usize) < n
                }) {
                    let k = idx.iter().zip(&strides).map(|(&i, s)| i as isize * s).sum::<isize>();
                    s += f[k as usize] * f[(k + off) as usize];
                    cnt += 1;
                }
            });
            per_rep[li].push(s / cnt as f64);
        }
    }
    Ok(lags
        .iter()
        .zip(per_rep)
        .map(|(lag, v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
            let x: Vec<f64> = lag.iter().map(|&l| l as f64 * grid.h).collect();
            CovRow { lag: lag.clone(), theoretical: lag_cov(c, grid.d1, &x), empirical: mean, stderr: (var / n).sqrt() }
        })
        .collect())
}
