use osc_unwrap::bounds::theorem_bound;
use osc_unwrap::montecarlo::{
    clopper_pearson, estimate_psucc, estimate_psucc_with_threads, logical_error_samples, ExperimentSpec,
};
use osc_unwrap::OscillatorCode;

fn identity_code() -> OscillatorCode {
    OscillatorCode::identity(2, 1).unwrap()
}

#[test]
fn identity_code_matches_rayleigh_law() {
    let trials = 20_000;
    for (j, sigma) in [0.1, 0.3, 0.5].into_iter().enumerate() {
        let eps = vec![0.05, 0.1, 0.25, 0.5];
        let spec = ExperimentSpec::new(identity_code(), sigma, eps, trials, 100 + j as u64).unwrap();
        let report = estimate_psucc(&spec).unwrap();
        for r in &report.records {
            let want = 1.0 - (-r.eps * r.eps / (2.0 * sigma * sigma)).exp();
            let half = (r.ci_high - r.ci_low) / 2.0;
            assert!((r.p_hat - want).abs() <= half, "σ={sigma} ε={}: {} vs {want}", r.eps, r.p_hat);
            let bound = theorem_bound(&spec.code, sigma, r.eps).unwrap();
            assert!((bound - want).abs() < 1e-12);
        }
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let code = OscillatorCode::two_mode_squeezing(2.0).unwrap();
    let spec = ExperimentSpec::new(code, 0.3, vec![0.1, 0.25], 10_000, 42).unwrap();
    let base = estimate_psucc_with_threads(&spec, 1).unwrap();
    for threads in [2, 3, 8] {
        let other = estimate_psucc_with_threads(&spec, threads).unwrap();
        assert_eq!(base.records, other.records, "threads = {threads}");
        assert_eq!(base.logical, other.logical, "threads = {threads}");
        assert_eq!(base.tie_count, other.tie_count);
    }
}

#[test]
fn success_is_monotone_in_eps() {
    let code = OscillatorCode::two_mode_squeezing(1.5).unwrap();
    let eps: Vec<f64> = (1..=12).map(|i| 0.05 * i as f64).collect();
    let spec = ExperimentSpec::new(code, 0.4, eps, 5_000, 3).unwrap();
    let report = estimate_psucc(&spec).unwrap();
    for w in report.records.windows(2) {
        assert!(w[0].successes <= w[1].successes);
    }
}

#[test]
fn huge_tolerance_almost_always_succeeds() {
    for g in [1.5, 2.0, 4.0] {
        let code = OscillatorCode::two_mode_squeezing(g).unwrap();
        let sigma = 0.3;
        let eps = 10.0 * sigma * code.squeezing_measure() * 2f64.sqrt();
        let spec = ExperimentSpec::new(code, sigma, vec![eps], 5_000, 8).unwrap();
        let report = estimate_psucc(&spec).unwrap();
        assert!(report.records[0].p_hat >= 0.99, "g = {g}: {}", report.records[0].p_hat);
    }
}

#[test]
fn identity_logical_spread_is_sigma() {
    let sigma = 0.2;
    let spec = ExperimentSpec::new(identity_code(), sigma, vec![0.1], 40_000, 17).unwrap();
    let report = estimate_psucc(&spec).unwrap();
    for s in &report.logical.coord_std {
        assert!((s - sigma).abs() < 0.02 * sigma, "{s}");
    }
    assert!((report.logical.rms_coord_std() - sigma).abs() < 0.02 * sigma);
}

#[test]
fn logical_samples_follow_trial_order() {
    let code = OscillatorCode::two_mode_squeezing(2.0).unwrap();
    let spec = ExperimentSpec::new(code, 0.3, vec![0.1], 100, 5).unwrap();
    let a = logical_error_samples(&spec, 50).unwrap();
    let b = logical_error_samples(&spec, 50).unwrap();
    assert_eq!(a, b);
    let spec_other = ExperimentSpec::new(spec.code.clone(), 0.3, vec![0.1], 100, 6).unwrap();
    let c = logical_error_samples(&spec_other, 50).unwrap();
    assert_ne!(a, c);
}

#[test]
fn clopper_pearson_brackets_estimate() {
    for (s, n) in [(0, 10), (3, 10), (10, 10), (500, 1000), (99_990, 100_000)] {
        let (lo, hi) = clopper_pearson(s, n, 0.99);
        let p = s as f64 / n as f64;
        assert!(lo <= p && p <= hi && 0.0 <= lo && hi <= 1.0);
    }
    // 0 of n: upper limit is 1 − (α/2)^{1/n}
    let (_, hi) = clopper_pearson(0, 10, 0.99);
    assert!((hi - (1.0 - 0.005f64.powf(0.1))).abs() < 1e-10);
}

#[test]
fn unwrapped_logical_spread_matches_schur_complement() {
    // at small σ no trial wraps, so x_A − x̂_A = x_A − Λ̂x_B has covariance Σ*
    let sigma = 0.05;
    for g in [1.5, 2.0, 4.0] {
        let code = OscillatorCode::two_mode_squeezing(g).unwrap();
        let cov = code.covariance(sigma).unwrap();
        let schur = osc_unwrap::bounds::schur_complement(cov.covariance(), 2).unwrap();
        let spec = ExperimentSpec::new(code, sigma, vec![0.1], 40_000, 23).unwrap();
        let report = estimate_psucc(&spec).unwrap();
        for (i, s) in report.logical.coord_std.iter().enumerate() {
            let want = schur[(i, i)].sqrt();
            assert!((s - want).abs() < 0.02 * want, "g={g} coord {i}: {s} vs {want}");
        }
    }
}

#[test]
fn tuned_gain_suppresses_faster_than_linear() {
    let best_std = |sigma: f64| {
        [1.5, 2.0, 4.0, 8.0]
            .iter()
            .map(|&g| {
                let code = OscillatorCode::two_mode_squeezing(g).unwrap();
                let spec = ExperimentSpec::new(code, sigma, vec![0.1], 20_000, 31).unwrap();
                estimate_psucc(&spec).unwrap().logical.std_norm
            })
            .fold(f64::INFINITY, f64::min)
    };
    let sigmas = [0.2, 0.1, 0.05];
    let stds: Vec<f64> = sigmas.iter().map(|&s| best_std(s)).collect();
    for i in 1..sigmas.len() {
        let linear = stds[i - 1] * sigmas[i] / sigmas[i - 1];
        assert!(stds[i] < linear, "σ={}: {} not below {linear}", sigmas[i], stds[i]);
    }
}
