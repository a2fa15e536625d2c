use gneiting_core::covariance::{make_radial, Family, GneitingCovariance, Role};
use gneiting_core::geometry::{ConvexBody, GrowthSchedule, WindowSpec};
use gneiting_core::functional::evaluate_functional;
use gneiting_core::hermite::FunctionalKind;
use gneiting_core::stats::{correlation, ks_against, Law};
use gneiting_lab::ensemble::{run_ensemble, EnsembleOptions};
use gneiting_lab::fieldsim::{empirical_cov_check, FieldSampler, GridSpec, SampleMethod, SamplerOptions};

fn model(rho1: f64, rho2: f64) -> GneitingCovariance {
    let c1 = make_radial(Family::GenCauchy, &[1.0, rho1], 1, Role::Factor1).unwrap();
    let c2 = make_radial(Family::GenCauchy, &[1.0, rho2], 1, Role::Factor2).unwrap();
    GneitingCovariance::new(c1, c2).unwrap()
}

fn unit_window() -> WindowSpec {
    WindowSpec::new(ConvexBody::unit_box(1), ConvexBody::unit_box(1), GrowthSchedule::new(1.0, 1.0).unwrap())
}

#[test]
fn two_node_correlation_matches_the_model() {
    let c = model(0.3, 0.4);
    let grid = GridSpec::from_counts(1, vec![2, 1], 1.0).unwrap();
    let s = FieldSampler::new(&c, &grid, &SamplerOptions::default()).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for p in 0..2500u64 {
        let (u, v) = s.sample_pair(&mut FieldSampler::stream(11, p));
        a.extend([u[0], v[0]]);
        b.extend([u[1], v[1]]);
    }
    let r = correlation(&a, &b).unwrap();
    let theory = c.eval(&[1.0], &[0.0]);
    assert!((r.value - theory).abs() < 4.0 * r.stderr, "{r:?} vs {theory}");
}

#[test]
fn lagged_covariances_on_a_grid() {
    let c = model(0.3, 0.4);
    let grid = GridSpec::from_counts(1, vec![16, 16], 0.5).unwrap();
    let rows = empirical_cov_check(&c, &grid, &[vec![0, 0], vec![1, 0], vec![0, 2], vec![3, -2]], 400, 5).unwrap();
    for r in rows {
        assert!((r.empirical - r.theoretical).abs() < 4.0 * r.stderr, "{r:?}");
    }
}

#[test]
fn node_marginals_are_standard_normal() {
    let c = model(0.5, 0.3);
    let grid = GridSpec::from_counts(1, vec![32, 8], 1.0).unwrap();
    let s = FieldSampler::new(&c, &grid, &SamplerOptions::default()).unwrap();
    assert_eq!(s.method, SampleMethod::Circulant);
    let (mut re, mut im) = (Vec::new(), Vec::new());
    for p in 0..1000u64 {
        let (u, v) = s.sample_pair(&mut FieldSampler::stream(3, p));
        re.push(u[77]);
        im.push(v[77]);
    }
    let both: Vec<f64> = re.iter().chain(&im).copied().collect();
    assert!(ks_against(&both, Law::StdNormal).unwrap().p_value > 1e-3);
    let r = correlation(&re, &im).unwrap();
    assert!(r.value.abs() < 4.0 * r.stderr, "paired fields correlated: {r:?}");
}

#[test]
fn ensemble_is_independent_of_pool_size() {
    let c = model(0.3, 0.4);
    let w = unit_window();
    let phi = FunctionalKind::HermitePoly(2);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_ensemble(&c, &w, 16.0, &phi, 21, 99, &EnsembleOptions::default()).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.ensemble.values(), b.ensemble.values());
    assert_eq!(a.ensemble.n, 21);
}

#[test]
fn node_cap_is_enforced() {
    let c = model(0.3, 0.4);
    let opts = EnsembleOptions { node_cap: 100, ..EnsembleOptions::default() };
    let err = run_ensemble(&c, &unit_window(), 64.0, &FunctionalKind::HermitePoly(2), 4, 1, &opts).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn mean_matches_rank_zero_coefficient() {
    let c = model(0.3, 0.4);
    let phi = FunctionalKind::IndicatorAbs(1.0);
    let a0 = gneiting_core::hermite::hermite_coeff(&phi, 0).unwrap();
    let run = run_ensemble(&c, &unit_window(), 16.0, &phi, 400, 8, &EnsembleOptions::default()).unwrap();
    let e = &run.ensemble;
    let expected = a0 * e.results[0].window_volume;
    assert!((e.mean - expected).abs() < 3.0 * e.mean_stderr, "{} vs {expected} (se {})", e.mean, e.mean_stderr);
}

#[test]
fn second_and_third_chaos_are_uncorrelated() {
    let c = model(0.3, 0.4);
    let grid = GridSpec::from_counts(1, vec![16, 16], 1.0).unwrap();
    let s = FieldSampler::new(&c, &grid, &SamplerOptions::default()).unwrap();
    let (h2, h3) = (FunctionalKind::HermitePoly(2), FunctionalKind::HermitePoly(3));
    let (mut y2, mut y3) = (Vec::new(), Vec::new());
    for p in 0..600u64 {
        let (u, v) = s.sample_pair(&mut FieldSampler::stream(21, p));
        for f in [u, v] {
            y2.push(evaluate_functional(&f, &h2, 1.0, 256.0, 1.0).unwrap().y_raw);
            y3.push(evaluate_functional(&f, &h3, 1.0, 256.0, 1.0).unwrap().y_raw);
        }
    }
    let r = correlation(&y2, &y3).unwrap();
    assert!(r.value.abs() < 3.0 * r.stderr, "{r:?}");
}

#[test]
fn covariance_depends_only_on_lag() {
    let c = model(0.4, 0.5);
    let grid = GridSpec::from_counts(1, vec![12, 12], 1.0).unwrap();
    let s = FieldSampler::new(&c, &grid, &SamplerOptions::default()).unwrap();
    // node pairs with lag (2, 1) at three positions
    let pairs = [(0usize, 2 * 12 + 1), (5 * 12 + 3, 7 * 12 + 4), (9 * 12 + 10, 11 * 12 + 11)];
    let theory = c.eval(&[2.0], &[1.0]);
    let mut xs = vec![(Vec::new(), Vec::new()); pairs.len()];
    for p in 0..1500u64 {
        let (u, v) = s.sample_pair(&mut FieldSampler::stream(4, p));
        for f in [&u, &v] {
            for (k, (i, j)) in pairs.iter().enumerate() {
                xs[k].0.push(f[*i]);
                xs[k].1.push(f[*j]);
            }
        }
    }
    for (a, b) in &xs {
        let r = correlation(a, b).unwrap();
        assert!((r.value - theory).abs() < 4.0 * r.stderr, "{r:?} vs {theory}");
    }
}
