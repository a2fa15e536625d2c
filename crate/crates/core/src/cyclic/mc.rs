//! Importance-sampled cyclic chains.
//!
//! A chain starts at a uniform point of the domain and moves by increments
//! drawn per block from a density proportional to `|z|^-a` on a ball of radius
//! `diam`. Samples are drawn in the unscaled body and stretched by the block
//! scale, so runs at different scales reuse the same random numbers.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use super::profile::Profile;
use super::Kernel;
use crate::geometry::ConvexBody;
use crate::special::{norm_ppf, sphere_area};

/// Per-batch sums: joint numerator and denominator, then one pair per block
/// for the separable surrogate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BatchSums {
    pub n: usize,
    pub v: [f64; 6],
}

impl BatchSums {
    pub fn merge(&self, other: &Self) -> Self {
        let mut v = self.v;
        for (a, b) in v.iter_mut().zip(other.v) {
            *a += b;
        }
        Self { n: self.n + other.n, v }
    }
}

pub(crate) trait Source {
    fn uniform(&mut self) -> f64;
    fn normal(&mut self) -> f64;
}

pub(crate) struct RngSource(pub ChaCha8Rng);

impl Source for RngSource {
    #[inline]
    fn uniform(&mut self) -> f64 {
        crate::geometry::uniform(&mut self.0)
    }

    #[inline]
    fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }
}

/// Randomly shifted Halton points; one point per chain sample.
pub(crate) struct HaltonSource {
    primes: Vec<u64>,
    shifts: Vec<f64>,
    index: u64,
    coord: usize,
}

impl HaltonSource {
    pub(crate) fn new(dims: usize, rng: &mut ChaCha8Rng) -> Self {
        let primes = first_primes(dims);
        let shifts = (0..dims).map(|_| crate::geometry::uniform(rng)).collect();
        Self { primes, shifts, index: 0, coord: 0 }
    }

    pub(crate) fn next_point(&mut self) {
        self.index += 1;
        self.coord = 0;
    }
}

impl Source for HaltonSource {
    fn uniform(&mut self) -> f64 {
        let j = self.coord;
        self.coord += 1;
        let b = self.primes[j];
        let mut n = self.index;
        let mut f = 1.0;
        let mut r = 0.0;
        while n > 0 {
            f /= b as f64;
            r += f * (n % b) as f64;
            n /= b;
        }
        let u = r + self.shifts[j];
        let u = if u >= 1.0 { u - 1.0 } else { u };
        u.clamp(1e-16, 1.0 - 1e-16)
    }

    fn normal(&mut self) -> f64 {
        norm_ppf(self.uniform())
    }
}

fn first_primes(n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut c = 2u64;
    while out.len() < n {
        if out.iter().take_while(|p| *p * *p <= c).all(|p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

/// One block of a (product) domain with its proposal.
#[derive(Debug, Clone)]
pub struct Block {
    pub base: ConvexBody,
    pub scale: f64,
    /// Proposal exponent `a` in `|z|^-a`.
    pub expo: f64,
    dim: usize,
    vol: f64,
    radius: f64,
    /// `S_{d-1} R^{d-a} / (d-a)`: inverse normalising constant of the proposal.
    inv_norm: f64,
}

impl Block {
    pub fn new(base: ConvexBody, scale: f64, expo: f64) -> Self {
        let dim = base.dim;
        let radius = base.diam() * scale;
        let vol = base.vol() * libm::pow(scale, dim as f64);
        let da = dim as f64 - expo;
        let inv_norm = sphere_area(dim) * libm::pow(radius, da) / da;
        Self { base, scale, expo, dim, vol, radius, inv_norm }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Uniform coordinates consumed per chain sample.
    pub(crate) fn source_dims(&self, k: usize) -> usize {
        let x = if self.base.is_box() { self.dim } else { 1 + self.dim.max(2) };
        let z = 1 + if self.dim == 1 { 1 } else { self.dim };
        x + (k - 1) * z
    }

    #[inline]
    fn inv_density(&self, r: f64) -> f64 {
        if self.expo == 0.0 {
            self.inv_norm
        } else {
            self.inv_norm * libm::pow(r, self.expo)
        }
    }

    fn start<S: Source>(&self, src: &mut S, out: &mut [f64]) {
        if self.base.is_box() {
            for (o, a) in out.iter_mut().zip(&self.base.extent) {
                *o = src.uniform() * a * self.scale;
            }
        } else {
            let r = self.base.extent[0] * self.scale;
            let rad = r * libm::pow(src.uniform(), 1.0 / self.dim as f64);
            direction(src, self.dim, rad, out);
        }
    }

    /// Increment with its norm.
    #[inline]
    fn step<S: Source>(&self, src: &mut S, out: &mut [f64]) -> f64 {
        let rad = self.radius * libm::pow(src.uniform(), 1.0 / (self.dim as f64 - self.expo));
        direction(src, self.dim, rad, out);
        rad
    }

    #[inline]
    fn inside(&self, x: &[f64]) -> bool {
        let s = self.scale;
        if self.base.is_box() {
            x.iter().zip(&self.base.extent).all(|(v, a)| *v >= 0.0 && *v <= a * s)
        } else {
            let r = self.base.extent[0] * s;
            x.iter().map(|v| v * v).sum::<f64>() <= r * r
        }
    }
}

#[inline]
fn direction<S: Source>(src: &mut S, dim: usize, rad: f64, out: &mut [f64]) {
    if dim == 1 {
        out[0] = if src.uniform() < 0.5 { -rad } else { rad };
        return;
    }
    let mut n2 = 0.0;
    for o in out.iter_mut() {
        let g = src.normal();
        *o = g;
        n2 += g * g;
    }
    let s = rad / libm::sqrt(n2);
    for o in out.iter_mut() {
        *o *= s;
    }
}

#[inline]
fn norm(x: &[f64]) -> f64 {
    match x {
        [a] => a.abs(),
        _ => libm::sqrt(x.iter().map(|v| v * v).sum()),
    }
}

/// Cyclic chain estimator over a product of blocks.
#[derive(Debug, Clone)]
pub struct ChainSampler {
    pub blocks: Vec<Block>,
    pub kernel: Kernel,
    pub surrogate: Option<(Profile, Profile)>,
    pub k: usize,
}

impl ChainSampler {
    pub(crate) fn source_dims(&self) -> usize {
        self.blocks.iter().map(|b| b.source_dims(self.k)).sum()
    }

    pub(crate) fn sample<S: Source>(&self, src: &mut S, scratch: &mut Scratch) -> [f64; 6] {
        let nb = self.blocks.len();
        let k = self.k;
        let mut out = [0.0; 6];
        // positions are tracked relative to the start, per block
        for (b, blk) in self.blocks.iter().enumerate() {
            let d = blk.dim;
            blk.start(src, &mut scratch.x0[b][..d]);
            scratch.pos[b][..d].copy_from_slice(&scratch.x0[b][..d]);
            scratch.sum[b][..d].iter_mut().for_each(|v| *v = 0.0);
            scratch.inside[b] = true;
            scratch.inside_first[b] = true;
            scratch.ratio[b] = 1.0;
            scratch.first_ratio[b] = 0.0;
            scratch.first_f[b] = 0.0;
        }
        let mut joint_ratio = 1.0;
        let mut joint_first_ratio = 0.0;
        let mut joint_first_f = 0.0;
        for i in 0..k - 1 {
            for (b, blk) in self.blocks.iter().enumerate() {
                let d = blk.dim;
                let rad = blk.step(src, &mut scratch.z[..d]);
                scratch.norms[b] = rad;
                scratch.inv_p[b] = blk.inv_density(rad);
                for m in 0..d {
                    scratch.pos[b][m] += scratch.z[m];
                    scratch.sum[b][m] += scratch.z[m];
                }
                if scratch.inside[b] && !blk.inside(&scratch.pos[b][..d]) {
                    scratch.inside[b] = false;
                }
                if i == 0 {
                    scratch.inside_first[b] = scratch.inside[b];
                }
            }
            let fj = self.kernel.eval(&scratch.norms[..nb]);
            let inv_p: f64 = scratch.inv_p[..nb].iter().product();
            let r = fj * inv_p;
            joint_ratio *= r;
            if i == 0 {
                joint_first_ratio = r;
                joint_first_f = fj;
            }
            if let Some((p1, p2)) = &self.surrogate {
                for (b, prof) in [p1, p2].into_iter().enumerate().take(nb) {
                    let fb = prof.eval(scratch.norms[b]);
                    let rb = fb * scratch.inv_p[b];
                    scratch.ratio[b] *= rb;
                    if i == 0 {
                        scratch.first_ratio[b] = rb;
                        scratch.first_f[b] = fb;
                    }
                }
            }
        }
        let vol: f64 = self.blocks.iter().map(|b| b.vol).product();
        let all_first = scratch.inside_first[..nb].iter().all(|v| *v);
        let all_in = scratch.inside[..nb].iter().all(|v| *v);
        if all_first {
            out[1] = vol * joint_first_ratio * joint_first_f;
        }
        for b in 0..nb {
            scratch.norms[b] = norm(&scratch.sum[b][..self.blocks[b].dim]);
        }
        if all_in {
            out[0] = vol * joint_ratio * self.kernel.eval(&scratch.norms[..nb]);
        }
        if let Some((p1, p2)) = &self.surrogate {
            for (b, prof) in [p1, p2].into_iter().enumerate().take(nb) {
                let vb = self.blocks[b].vol;
                if scratch.inside[b] {
                    out[2 + 2 * b] = vb * scratch.ratio[b] * prof.eval(scratch.norms[b]);
                }
                if scratch.inside_first[b] {
                    out[3 + 2 * b] = vb * scratch.first_ratio[b] * scratch.first_f[b];
                }
            }
        }
        out
    }

    /// Sums over one batch; the batch index selects an independent stream.
    pub fn run_batch(&self, seed: u64, batch: usize, per_batch: usize, qmc: bool) -> BatchSums {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(batch as u64);
        let mut scratch = Scratch::new(&self.blocks);
        let mut acc = [0.0; 6];
        if qmc {
            let mut src = HaltonSource::new(self.source_dims(), &mut rng);
            for _ in 0..per_batch {
                src.next_point();
                let s = self.sample(&mut src, &mut scratch);
                for (a, v) in acc.iter_mut().zip(s) {
                    *a += v;
                }
            }
        } else {
            let mut src = RngSource(rng);
            for _ in 0..per_batch {
                let s = self.sample(&mut src, &mut scratch);
                for (a, v) in acc.iter_mut().zip(s) {
                    *a += v;
                }
            }
        }
        BatchSums { n: per_batch, v: acc }
    }
}

pub(crate) struct Scratch {
    x0: Vec<Vec<f64>>,
    pos: Vec<Vec<f64>>,
    sum: Vec<Vec<f64>>,
    z: Vec<f64>,
    norms: Vec<f64>,
    inv_p: Vec<f64>,
    inside: Vec<bool>,
    inside_first: Vec<bool>,
    ratio: Vec<f64>,
    first_ratio: Vec<f64>,
    first_f: Vec<f64>,
}

impl Scratch {
    fn new(blocks: &[Block]) -> Self {
        let nb = blocks.len();
        let dmax = blocks.iter().map(|b| b.dim).max().unwrap_or(1);
        let per = |_: &Block| vec![0.0; dmax];
        Self {
            x0: blocks.iter().map(per).collect(),
            pos: blocks.iter().map(per).collect(),
            sum: blocks.iter().map(per).collect(),
            z: vec![0.0; dmax],
            norms: vec![0.0; nb],
            inv_p: vec![0.0; nb],
            inside: vec![true; nb],
            inside_first: vec![true; nb],
            ratio: vec![1.0; nb],
            first_ratio: vec![0.0; nb],
            first_f: vec![0.0; nb],
        }
    }
}

/// Delete-one-batch jackknife of a statistic of pooled means.
///
/// `stat` receives the pooled per-sample means of the six accumulators for
/// each of the `runs` (aligned batch by batch).
pub fn jackknife(runs: &[&[BatchSums]], stat: &dyn Fn(&[[f64; 6]]) -> f64) -> (f64, f64) {
    let nb = runs[0].len();
    let totals: Vec<BatchSums> = runs
        .iter()
        .map(|r| r.iter().fold(BatchSums::default(), |a, b| a.merge(b)))
        .collect();
    let means = |skip: Option<usize>| -> Vec<[f64; 6]> {
        totals
            .iter()
            .zip(runs)
            .map(|(t, r)| {
                let (n, mut v) = match skip {
                    Some(b) => (t.n - r[b].n, {
                        let mut v = t.v;
                        for (a, x) in v.iter_mut().zip(r[b].v) {
                            *a -= x;
                        }
                        v
                    }),
                    None => (t.n, t.v),
                };
                for a in v.iter_mut() {
                    *a /= n as f64;
                }
                v
            })
            .collect()
    };
    let full = stat(&means(None));
    if nb < 2 {
        return (full, f64::NAN);
    }
    let loo: Vec<f64> = (0..nb).map(|b| stat(&means(Some(b)))).collect();
    let mean = loo.iter().sum::<f64>() / nb as f64;
    let var = loo.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() * (nb as f64 - 1.0) / nb as f64;
    (full, libm::sqrt(var))
}
