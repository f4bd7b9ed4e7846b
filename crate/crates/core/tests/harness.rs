use std::fs;
use std::path::Path;

use dogates_core::harness::{self, BenchmarkConfig};
use dogates_core::*;

fn quick_run() -> RunConfig {
    RunConfig {
        b: 12,
        forest: ForestParams {
            n_trees: 25,
            ..ForestParams::default()
        },
        seed: 5,
        ..RunConfig::default()
    }
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .filter(|(name, _)| name != harness::TIMING)
        .collect();
    files.sort();
    files
}

#[test]
fn benchmark_bundle_is_independent_of_pool_size() {
    let config = BenchmarkConfig::new(vec![ScenarioId::A], 300, 3, quick_run());
    let run = |threads: usize, dir: &Path| {
        let out = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| harness::run_benchmark(&config).unwrap());
        harness::write_benchmark_bundle(&out, dir).unwrap();
        out
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let out = run(1, a.path());
    run(3, b.path());
    assert_eq!(read_dir_sorted(a.path()), read_dir_sorted(b.path()));
    assert!(a.path().join(harness::TIMING).is_file());

    let s = out.summary(ScenarioId::A).unwrap();
    assert!(s.valid);
    assert_eq!(s.reps_ok, 3);
    assert!(s.do_gates.as_ref().unwrap().mae >= 0.0);
}

#[test]
fn single_rep_bias_equals_squared_error() {
    let config = BenchmarkConfig::new(vec![ScenarioId::C], 300, 1, quick_run());
    let out = harness::run_benchmark(&config).unwrap();
    let r = &out.reps[0];
    let s = out.summary(ScenarioId::C).unwrap().do_gates.clone().unwrap();
    for g in 0..5 {
        let err = r.do_gates[g] - r.gamma_true[g];
        assert!((s.bias2_by_group[g] - err * err).abs() < 1e-12);
    }
}

#[test]
fn both_methods_share_data_and_seed() {
    let config = BenchmarkConfig::new(vec![ScenarioId::C], 300, 2, quick_run());
    let r = harness::run_rep(&config, ScenarioId::C, 1).unwrap();
    let [dg, cq] = r.records();
    assert_eq!(dg.gamma_true, cq.gamma_true);
    assert_eq!(dg.rep, cq.rep);
    let sim = gen_scenario(&config.scenario_config(ScenarioId::C, 1)).unwrap();
    assert_eq!(r.gamma_true, metrics::true_group_effects(&sim.tau_true, 5).unwrap());
}

#[test]
fn estimate_bundle_and_report() {
    let sim = gen_scenario(&ScenarioConfig::new(ScenarioId::C, 300, 2)).unwrap();
    let config = quick_run();
    let out = run_dogates(&sim.base, &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    harness::write_estimate_bundle(&out, &sim.base, &config, Some(&sim.tau_true), dir.path()).unwrap();
    for f in ["gates.json", "cate.csv", "cate_draws.csv", "run_manifest.json", "truth.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["kind"], "estimate");
    assert_eq!(manifest["seeds"]["master"], 5);

    let files = harness::write_report(dir.path(), dir.path()).unwrap();
    let ae = fs::read_to_string(files.ae_by_b.unwrap()).unwrap();
    // one row per (method, b, group)
    assert_eq!(ae.lines().count(), 1 + 2 * 12 * 5);
    let hist = fs::read_to_string(files.estimate_counts).unwrap();
    let total: usize = hist.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 300);

    // the last prefix of the DO GATES curve is the reported estimate
    let truth = metrics::true_group_effects(&sim.tau_true, 5).unwrap();
    let last: Vec<f64> = ae
        .lines()
        .filter(|l| l.starts_with("data,0,do_gates,12,"))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    for g in 0..5 {
        assert!((last[g] - (out.gates.gamma_median[g] - truth[g]).abs()).abs() < 1e-12);
    }
}

#[test]
fn benchmark_report_averages_reps() {
    let config = BenchmarkConfig::new(vec![ScenarioId::A], 300, 2, quick_run());
    let out = harness::run_benchmark(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    harness::write_benchmark_bundle(&out, dir.path()).unwrap();
    let report = dir.path().join("report");
    let files = harness::write_report(dir.path(), &report).unwrap();
    let text = fs::read_to_string(files.ae_by_b.unwrap()).unwrap();
    assert!(text.starts_with("scenario,method,b,group,mean_ae,reps\n"));
    assert!(text.lines().any(|l| l.starts_with("A,do_gates,12,5,") && l.ends_with(",2")));
}

#[test]
fn report_on_empty_dir_names_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    match harness::write_report(dir.path(), dir.path()) {
        Err(Error::MissingBundleFiles(f)) => assert!(f[0].ends_with("run_manifest.json")),
        other => panic!("{other:?}"),
    }
}
