use dogates_core::pipeline::{
    dr_pseudo_outcomes, fit_nuisances, gates_baseline_y0, gates_orthogonal, gates_rct, horvitz_thompson, run_split,
};
use dogates_core::*;

fn small_forest() -> ForestParams {
    ForestParams {
        n_trees: 40,
        ..ForestParams::default()
    }
}

fn sim(id: ScenarioId, n: usize, seed: u64) -> SimulatedDataset {
    gen_scenario(&ScenarioConfig::new(id, n, seed)).unwrap()
}

#[test]
fn nuisance_audit_is_clean() {
    let s = sim(ScenarioId::C, 400, 1);
    let split = make_split(400, 77).unwrap();
    let fit = fit_nuisances(&s.base, &split, &small_forest(), 0.01).unwrap();
    let audit = fit.audit();
    assert!(audit.is_clean());
    for (role, train) in &audit.trained_on {
        assert!(train.iter().all(|i| split.aux_idx.binary_search(i).is_ok()), "{role} trained off aux");
        assert!(train.iter().all(|i| split.main_idx.binary_search(i).is_err()));
    }
    let av = fit.aux_values();
    assert_eq!(av.e.len(), split.aux_idx.len());
    assert!(av.e.iter().all(|&e| (0.01..=0.99).contains(&e)));
}

#[test]
fn split_audit_covers_proxy() {
    let s = sim(ScenarioId::A, 400, 2);
    let config = RunConfig {
        forest: small_forest(),
        ..RunConfig::default()
    };
    let rec = run_split(&s.base, &config, 0).unwrap();
    assert!(rec.audit.is_clean());
    assert!(rec.audit.trained_on.iter().any(|(r, _)| r == "proxy"));
    assert_eq!(rec.s_tilde.len(), rec.main_idx.len());
}

#[test]
fn single_split_median_is_that_split() {
    let s = sim(ScenarioId::C, 300, 3);
    let config = RunConfig {
        b: 1,
        forest: small_forest(),
        ..RunConfig::default()
    };
    let out = run_dogates(&s.base, &config).unwrap();
    assert_eq!(out.gates.gamma_median, out.splits[0].estimates.gamma);
    assert_eq!(out.gates.gamma_per_split.len(), 1);
}

#[test]
fn runs_are_deterministic_across_pools() {
    let s = sim(ScenarioId::C, 300, 4);
    let config = RunConfig {
        b: 6,
        forest: small_forest(),
        seed: 11,
        ..RunConfig::default()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_dogates(&s.base, &config).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.gates, b.gates);
    assert_eq!(a.cate, b.cate);
}

#[test]
fn k1_rct_collapses_to_ate_coefficient() {
    let s = sim(ScenarioId::A, 400, 5);
    let n = s.base.len();
    let e = vec![0.5; n];
    let baseline: Vec<f64> = (0..n).map(|i| s.base.x().get(i, 0)).collect();
    let groups = assign_groups(&vec![0.0; n], 1).unwrap();
    let est = gates_rct(s.base.y(), s.base.d(), &e, &baseline, &groups, 0.05).unwrap();
    let h = horvitz_thompson(s.base.d(), &e).unwrap();
    let x = Matrix::from_fn(n, 3, |i, j| [h[i], baseline[i] * h[i], 1.0][j]);
    let yh: Vec<f64> = s.base.y().iter().zip(&h).map(|(a, b)| a * b).collect();
    let fit = wls(&x, &yh, &vec![1.0; n], 0.05).unwrap();
    assert!((est.gamma[0] - fit.coef[2]).abs() < 1e-12);
}

#[test]
fn baseline_grouping_with_proxy_scores_matches_orthogonal() {
    let s = sim(ScenarioId::C, 200, 6);
    let n = s.base.len();
    let mu = vec![0.1; n];
    let e: Vec<f64> = s.e_true.iter().map(|v| v.clamp(0.05, 0.95)).collect();
    let scores = s.tau_true.clone();
    let groups = assign_groups(&scores, 4).unwrap();
    let a = gates_orthogonal(s.base.y(), s.base.d(), &mu, &e, &groups, 0.05).unwrap();
    let b = gates_baseline_y0(s.base.y(), s.base.d(), &scores, &mu, &e, 4, 0.05).unwrap();
    assert_eq!(a, b);
}

#[test]
fn constant_effect_gives_flat_baseline_gates() {
    // Y0 varies with x1, the effect is 0.5 everywhere; grouping by the true
    // baseline must not create spurious heterogeneity.
    use rand::Rng;
    let n = 6000;
    let mut rng = rng::rng_from(8, &[]);
    let x = Matrix::from_fn(n, 2, |_, _| rng.random_range(-2.0..2.0));
    let e: Vec<f64> = (0..n).map(|i| 0.3 + 0.1 * x.get(i, 1).tanh()).collect();
    let d: Vec<u8> = e.iter().map(|&p| u8::from(rng.random_bool(p))).collect();
    let y0: Vec<f64> = (0..n).map(|i| 2.0 * x.get(i, 0)).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| y0[i] + 0.5 * f64::from(d[i]) + rng.random_range(-1.0..1.0))
        .collect();
    let mu: Vec<f64> = (0..n).map(|i| y0[i] + 0.5 * e[i]).collect();
    let est = gates_baseline_y0(&y, &d, &y0, &mu, &e, 5, 0.05).unwrap();
    for (g, se) in est.gamma.iter().zip(&est.se) {
        assert!((g - 0.5).abs() < 3.0 * se, "{g} vs 0.5 (se {se})");
    }
}

#[test]
fn oracle_dr_scores_recover_ate_with_k1() {
    let s = sim(ScenarioId::C, 20_000, 9);
    let m0 = dogates_core::simulation::mu0(s.base.x()).unwrap();
    let m1: Vec<f64> = m0.iter().zip(&s.tau_true).map(|(a, b)| a + b).collect();
    let shat = dr_pseudo_outcomes(s.base.y(), s.base.d(), &m0, &m1, &s.e_true).unwrap();
    let mean_s = stats::mean(&shat);
    let se = stats::std_dev(&shat) / (shat.len() as f64).sqrt();
    let mean_tau = stats::mean(&s.tau_true);
    assert!((mean_s - mean_tau).abs() < 3.0 * se);
}

#[test]
fn failing_splits_are_counted() {
    // A constant outcome makes every proxy constant, so grouping fails in
    // every split.
    let n = 200;
    let x = Matrix::from_fn(n, 2, |i, j| ((i * (j + 3)) % 17) as f64);
    let d: Vec<u8> = (0..n).map(|i| u8::from(i % 3 == 0)).collect();
    let data = Dataset::new(vec![1.5; n], d, x, None).unwrap();
    let config = RunConfig {
        b: 5,
        forest: small_forest(),
        ..RunConfig::default()
    };
    match run_dogates(&data, &config) {
        Err(Error::TooManyFailedSplits { failed, total, limit, first }) => {
            assert_eq!((failed, total, limit), (5, 5, 1));
            assert!(first.contains("no heterogeneity"));
        }
        other => panic!("expected split failures, got {other:?}"),
    }
}

#[test]
fn invalid_data_is_reported() {
    let x = Matrix::from_fn(10, 2, |i, _| i as f64);
    let data = Dataset::new(vec![1.0; 10], vec![1; 10], x, None).unwrap();
    let v = validate_dataset(&data, 2);
    assert!(v.iter().any(|v| v.0.contains("no control observations")));
    assert!(matches!(run_dogates(&data, &RunConfig::default()), Err(Error::Validation(_))));
}
