//! Sample cumulants, goodness of fit and variance-exponent regression.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rosenblatt::{Cumulant, RosenblattSpec};
use crate::special::{kolmogorov_sf, norm_cdf};

/// Minimum sample size for the asymptotic Kolmogorov distribution.
pub const KS_MIN_SAMPLES: usize = 100;

/// Pairwise summation; the result does not depend on how the slice was produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Fisher k-statistics; `k3` needs three samples and `k4` four.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KStats {
    pub n: usize,
    pub mean: f64,
    pub k2: f64,
    pub k3: Option<f64>,
    pub k4: Option<f64>,
}

impl KStats {
    /// `k_r / k_2^(r/2)`.
    pub fn standardized(&self, r: usize) -> Option<f64> {
        let k = match r {
            2 => Some(self.k2),
            3 => self.k3,
            4 => self.k4,
            _ => None,
        }?;
        Some(k / libm::pow(self.k2, 0.5 * r as f64))
    }
}

/// Sums of powers 1..=4 of deviations from a fixed centre.
#[derive(Debug, Clone, Copy)]
struct Moments {
    n: f64,
    s: [f64; 5],
}

impl Moments {
    fn kstats(&self, shift: f64) -> KStats {
        let n = self.n;
        let mu = self.s[1] / n;
        // central moments about the sample mean
        let m2 = self.s[2] / n - mu * mu;
        let m3 = self.s[3] / n - 3.0 * mu * self.s[2] / n + 2.0 * mu * mu * mu;
        let m4 = self.s[4] / n - 4.0 * mu * self.s[3] / n + 6.0 * mu * mu * self.s[2] / n - 3.0 * mu * mu * mu * mu;
        let k2 = n / (n - 1.0) * m2;
        let k3 = (n >= 3.0).then(|| n * n / ((n - 1.0) * (n - 2.0)) * m3);
        let k4 = (n >= 4.0).then(|| n * n * ((n + 1.0) * m4 - 3.0 * (n - 1.0) * m2 * m2) / ((n - 1.0) * (n - 2.0) * (n - 3.0)));
        KStats { n: n as usize, mean: shift + mu, k2, k3, k4 }
    }

    fn without(&self, y: f64) -> Self {
        let mut s = self.s;
        let mut p = 1.0;
        for v in s.iter_mut() {
            *v -= p;
            p *= y;
        }
        Self { n: self.n - 1.0, s }
    }
}

fn centred(xs: &[f64]) -> (f64, Vec<f64>, Moments) {
    let c = pairwise_sum(xs) / xs.len() as f64;
    let ys: Vec<f64> = xs.iter().map(|x| x - c).collect();
    let mut s = [0.0; 5];
    let mut buf = vec![0.0; ys.len()];
    for (p, sp) in s.iter_mut().enumerate() {
        for (b, y) in buf.iter_mut().zip(&ys) {
            *b = libm::pow(*y, p as f64);
        }
        *sp = pairwise_sum(&buf);
    }
    (c, ys, Moments { n: xs.len() as f64, s })
}

pub fn k_statistics(xs: &[f64]) -> Result<KStats> {
    if xs.len() < 2 {
        return Err(Error::VarUndefined);
    }
    let (c, _, m) = centred(xs);
    Ok(m.kstats(c))
}

/// Point estimate with a delete-one jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JackknifeEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// Delete-one jackknife of a statistic of the k-statistics, in `O(n)`.
pub fn jackknife_kstat(xs: &[f64], stat: &dyn Fn(&KStats) -> f64) -> Result<JackknifeEstimate> {
    let n = xs.len();
    if n < 5 {
        return Err(Error::TooFewSamples { needed: 5, got: n });
    }
    let (c, ys, m) = centred(xs);
    let full = stat(&m.kstats(c));
    let loo: Vec<f64> = ys.iter().map(|&y| stat(&m.without(y).kstats(c))).collect();
    let mean = pairwise_sum(&loo) / n as f64;
    let dev: Vec<f64> = loo.iter().map(|v| (v - mean) * (v - mean)).collect();
    let stderr = libm::sqrt((n as f64 - 1.0) / n as f64 * pairwise_sum(&dev));
    Ok(JackknifeEstimate { value: full, stderr })
}

/// Standardised cumulant `k_r / k_2^(r/2)` with jackknife error, `r` in 2..=4.
pub fn standardized_cumulant(xs: &[f64], r: usize) -> Result<JackknifeEstimate> {
    if !(2..=4).contains(&r) {
        return Err(Error::InvalidParams(alloc::format!("cumulant order {r} outside 2..=4")));
    }
    jackknife_kstat(xs, &|k| k.standardized(r).unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZScore {
    pub k: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub theory: f64,
    pub z: f64,
}

/// `z_k = (g_k - kappa_k) / se_k` for `k = 3, 4`, with `g_k` the standardised
/// k-statistic of the sample and `kappa_k` the theoretical standardised cumulant.
/// Orders missing from `theory` are compared against 0.
pub fn cumulant_compare(xs: &[f64], theory: &[Cumulant]) -> Result<Vec<ZScore>> {
    let kappa2 = theory.iter().find(|c| c.k == 2).map_or(1.0, |c| c.value);
    [3usize, 4]
        .iter()
        .map(|&k| {
            let e = standardized_cumulant(xs, k)?;
            let t = theory.iter().find(|c| c.k == k).map_or(0.0, |c| c.value / libm::pow(kappa2, 0.5 * k as f64));
            Ok(ZScore { k, estimate: e.value, stderr: e.stderr, theory: t, z: (e.value - t) / e.stderr })
        })
        .collect()
}

/// Reference law for the Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy)]
pub enum Law<'a> {
    StdNormal,
    Rosenblatt(&'a RosenblattSpec),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub n: usize,
    /// `sup |F_n - F|`.
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sided Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_against(samples: &[f64], law: Law<'_>) -> Result<KsResult> {
    let n = samples.len();
    if n < KS_MIN_SAMPLES {
        return Err(Error::TooFewSamples { needed: KS_MIN_SAMPLES, got: n });
    }
    if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let cdf: Vec<f64> = match law {
        Law::StdNormal => xs.iter().map(|&x| norm_cdf(x)).collect(),
        Law::Rosenblatt(spec) => spec.cdf(&xs).map_err(|e| Error::CdfUnavailable(e.to_string()))?,
    };
    Ok(ks_from_sorted_cdf(&cdf))
}

/// Statistic and p-value from reference CDF values at the sorted sample.
pub fn ks_from_sorted_cdf(cdf: &[f64]) -> KsResult {
    let n = cdf.len();
    let nf = n as f64;
    let d = cdf.iter().enumerate().fold(0.0f64, |d, (i, &f)| {
        d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf)
    });
    KsResult { n, statistic: d, p_value: kolmogorov_sf(libm::sqrt(nf) * d) }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Residuals of `log var` in the order of `t_values`.
    pub residuals: Vec<f64>,
    pub t_values: Vec<f64>,
    pub slope_stderr: f64,
}

/// One rung of a variance ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarPoint {
    pub t: f64,
    pub var: f64,
    pub stderr: f64,
}

/// Weighted least squares of `log var` on `log t`. Weights are `(var / stderr)^2`,
/// the inverse delta-method variance of `log var`; ordinary least squares when
/// any standard error is not positive.
pub fn exponent_fit(points: &[VarPoint]) -> Result<ExponentFit> {
    if points.len() < 4 {
        return Err(Error::TooFewSamples { needed: 4, got: points.len() });
    }
    if points.windows(2).any(|w| w[1].t.partial_cmp(&w[0].t) != Some(core::cmp::Ordering::Greater)) || points[0].t <= 0.0 {
        return Err(Error::DegenerateLadder);
    }
    if let Some(i) = points.iter().position(|p| p.var <= 0.0 || !p.var.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let x: Vec<f64> = points.iter().map(|p| libm::log(p.t)).collect();
    let y: Vec<f64> = points.iter().map(|p| libm::log(p.var)).collect();
    let w: Vec<f64> = if points.iter().all(|p| p.stderr > 0.0) {
        points.iter().map(|p| (p.var / p.stderr) * (p.var / p.stderr)).collect()
    } else {
        vec![1.0; points.len()]
    };
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(a, b)| b * (a - xm) * (a - xm)).sum();
    let sxy: f64 = x.iter().zip(&y).zip(&w).map(|((a, c), b)| b * (a - xm) * (c - ym)).sum();
    let syy: f64 = y.iter().zip(&w).map(|(c, b)| b * (c - ym) * (c - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let residuals: Vec<f64> = x.iter().zip(&y).map(|(a, c)| c - intercept - slope * a).collect();
    let ssr: f64 = residuals.iter().zip(&w).map(|(r, b)| b * r * r).sum();
    let r2 = if syy > 0.0 { (1.0 - ssr / syy).clamp(0.0, 1.0) } else { 1.0 };
    let dof = (points.len() - 2) as f64;
    let slope_stderr = libm::sqrt(ssr / dof / sxx);
    Ok(ExponentFit { slope, intercept, r2, residuals, t_values: points.iter().map(|p| p.t).collect(), slope_stderr })
}

/// Pearson correlation with its large-sample standard error `(1 - r^2)/sqrt(n - 1)`.
pub fn correlation(xs: &[f64], ys: &[f64]) -> Result<JackknifeEstimate> {
    let n = xs.len();
    if n != ys.len() || n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n.min(ys.len()) });
    }
    let mx = pairwise_sum(xs) / n as f64;
    let my = pairwise_sum(ys) / n as f64;
    let cxy: Vec<f64> = xs.iter().zip(ys).map(|(a, b)| (a - mx) * (b - my)).collect();
    let cxx: Vec<f64> = xs.iter().map(|a| (a - mx) * (a - mx)).collect();
    let cyy: Vec<f64> = ys.iter().map(|b| (b - my) * (b - my)).collect();
    let r = pairwise_sum(&cxy) / libm::sqrt(pairwise_sum(&cxx) * pairwise_sum(&cyy));
    Ok(JackknifeEstimate { value: r, stderr: (1.0 - r * r) / libm::sqrt(n as f64 - 1.0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_core::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn kstats_small_exact() {
        // reference values from scipy.stats.kstat
        let k = k_statistics(&[1.0, 2.0, 4.0, 8.0]).unwrap();
        assert_relative_eq!(k.mean, 3.75);
        assert_relative_eq!(k.k2, 9.583333333333334, max_relative = 1e-14);
        assert_relative_eq!(k.k3.unwrap(), 33.75, max_relative = 1e-13);
        assert_relative_eq!(k.k4.unwrap(), 69.58333333333333, max_relative = 1e-12);
        assert_eq!(k_statistics(&[1.0]), Err(Error::VarUndefined));
    }

    #[test]
    fn chi_square_skewness() {
        let z = normals(200_000, 11);
        let y: Vec<f64> = z.iter().map(|v| (v * v - 1.0) / libm::sqrt(2.0)).collect();
        let e = jackknife_kstat(&y, &|k| k.k3.unwrap()).unwrap();
        assert!((e.value - 2.0 * libm::sqrt(2.0)).abs() < 3.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn jackknife_of_mean_is_classical() {
        let z = normals(1000, 3);
        let e = jackknife_kstat(&z, &|k| k.mean).unwrap();
        let k = k_statistics(&z).unwrap();
        assert_relative_eq!(e.stderr, libm::sqrt(k.k2 / 1000.0), max_relative = 1e-9);
    }

    #[test]
    fn ks_null_and_power() {
        let z = normals(10_000, 5);
        assert!(ks_against(&z, Law::StdNormal).unwrap().p_value > 1e-3);
        let s: Vec<f64> = z.iter().map(|v| v + 0.5).collect();
        assert!(ks_against(&s, Law::StdNormal).unwrap().p_value < 1e-6);
        assert!(matches!(ks_against(&[], Law::StdNormal), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn gaussian_vs_rosenblatt_skewness_separates() {
        let z = normals(20_000, 9);
        let g = cumulant_compare(&z, &[]).unwrap();
        assert!(g.iter().all(|s| s.z.abs() < 4.0), "{g:?}");
        let r = cumulant_compare(&z, &[Cumulant { k: 3, value: 2.5, stderr: None }]).unwrap();
        assert!(r[0].z.abs() > 5.0);
    }

    #[test]
    fn exact_power_law_fit() {
        let pts: Vec<VarPoint> = [4.0, 8.0, 16.0, 32.0, 64.0]
            .iter()
            .map(|&t: &f64| VarPoint { t, var: 7.0 * t.powf(2.84), stderr: 0.1 * t.powf(2.84) })
            .collect();
        let f = exponent_fit(&pts).unwrap();
        assert!((f.slope - 2.84).abs() < 1e-10);
        assert_relative_eq!(f.r2, 1.0, epsilon = 1e-12);
        assert!(f.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn contaminated_power_law_fit() {
        let pts: Vec<VarPoint> = [32.0, 64.0, 128.0, 256.0, 512.0]
            .iter()
            .map(|&t: &f64| VarPoint { t, var: t.powf(1.4) * (1.0 + 3.0 / libm::log(t)), stderr: 0.0 })
            .collect();
        assert!((exponent_fit(&pts).unwrap().slope - 1.4).abs() < 0.1);
    }

    #[test]
    fn fit_preconditions() {
        let p = |t| VarPoint { t, var: 1.0, stderr: 0.1 };
        assert!(matches!(exponent_fit(&[p(1.0), p(2.0)]), Err(Error::TooFewSamples { .. })));
        assert_eq!(exponent_fit(&[p(1.0), p(2.0), p(2.0), p(4.0)]), Err(Error::DegenerateLadder));
    }

    proptest! {
        #[test]
        fn ks_invariant_under_monotone_maps(seed in 0u64..1000) {
            let z = normals(300, seed);
            let a = ks_against(&z, Law::StdNormal).unwrap();
            // x -> exp(x) with reference CDF Phi(log y)
            let mut e: Vec<f64> = z.iter().map(|v| libm::exp(*v)).collect();
            e.sort_by(f64::total_cmp);
            let b = ks_from_sorted_cdf(&e.iter().map(|y| norm_cdf(libm::log(*y))).collect::<Vec<_>>());
            prop_assert!((a.statistic - b.statistic).abs() < 1e-12);
        }

        #[test]
        fn standardized_cumulants_affine_invariant(seed in 0u64..1000, a in 0.1f64..10.0, b in -5.0f64..5.0) {
            let z: Vec<f64> = normals(200, seed).iter().map(|v| v * v).collect();
            let w: Vec<f64> = z.iter().map(|v| a * v + b).collect();
            let g = k_statistics(&z).unwrap();
            let h = k_statistics(&w).unwrap();
            for r in 3..=4 {
                prop_assert!((g.standardized(r).unwrap() - h.standardized(r).unwrap()).abs() < 1e-8);
            }
        }
    }
}
