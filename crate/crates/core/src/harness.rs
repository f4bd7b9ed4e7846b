//! Monte Carlo benchmark runs and on-disk result bundles.
//!
//! A bundle is a directory holding JSON for structured results and CSV for
//! tables. `run_manifest.json` records everything needed to rerun it.
//! Wall-clock times go to `timing.json`, the only file whose contents depend
//! on the machine.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{fmt_f64, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{self, summarize_records, BenchmarkRecord, MethodSummary, Method};
use crate::pipeline::{benchmark_or_constant, run_dogates, DoGatesOutput, RunConfig};
use crate::rng::{derive_seed, tag};
use crate::simulation::{gen_scenario, ScenarioConfig, ScenarioId, DEFAULT_COVARIATE_SEED};

pub const FORMAT_VERSION: u32 = 1;
pub const MAX_FAILED_REP_FRACTION: f64 = 0.1;

pub const MANIFEST: &str = "run_manifest.json";
pub const TIMING: &str = "timing.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub scenarios: Vec<ScenarioId>,
    pub n: usize,
    pub reps: usize,
    pub covariate_seed: u64,
    /// Estimator settings; `run.seed` is the master seed.
    pub run: RunConfig,
}

impl BenchmarkConfig {
    pub fn new(scenarios: Vec<ScenarioId>, n: usize, reps: usize, run: RunConfig) -> Self {
        Self {
            scenarios,
            n,
            reps,
            covariate_seed: DEFAULT_COVARIATE_SEED,
            run,
        }
    }

    /// Seed for the outcome, treatment and effect noise of one rep.
    pub fn rep_seed(&self, scenario: ScenarioId, rep: usize) -> u64 {
        derive_seed(self.run.seed, &[tag::REP, scenario.letter() as u64, rep as u64])
    }

    /// Estimator seed for one rep, shared by both methods.
    pub fn estimator_seed(&self, scenario: ScenarioId, rep: usize) -> u64 {
        derive_seed(self.rep_seed(scenario, rep), &[tag::SPLIT])
    }

    pub fn scenario_config(&self, scenario: ScenarioId, rep: usize) -> ScenarioConfig {
        ScenarioConfig::new(scenario, self.n, self.rep_seed(scenario, rep)).with_covariate_seed(self.covariate_seed)
    }
}

/// Absolute error of each method after the first `b` splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub method: Method,
    /// `ae[b - 1][k]` for `b = 1..=B`.
    pub ae: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepResult {
    pub scenario_id: ScenarioId,
    pub rep: usize,
    pub gamma_true: Vec<f64>,
    pub do_gates: Vec<f64>,
    pub cate_quantiles: Vec<f64>,
    pub failed_splits: usize,
    /// Histogram of per-observation estimate counts: `(count, observations)`.
    pub estimate_counts: Vec<(usize, usize)>,
    pub trajectories: Vec<Trajectory>,
}

impl RepResult {
    pub fn records(&self) -> [BenchmarkRecord; 2] {
        let mk = |method, gamma_hat: &Vec<f64>| BenchmarkRecord {
            scenario_id: self.scenario_id,
            rep: self.rep,
            method,
            gamma_hat: gamma_hat.clone(),
            gamma_true: self.gamma_true.clone(),
        };
        [mk(Method::DoGates, &self.do_gates), mk(Method::CateQuantiles, &self.cate_quantiles)]
    }
}

fn count_histogram(counts: &[usize]) -> Vec<(usize, usize)> {
    let mut h = BTreeMap::new();
    for &c in counts {
        *h.entry(c).or_insert(0) += 1;
    }
    h.into_iter().collect()
}

fn abs_err(hat: &[f64], truth: &[f64]) -> Vec<f64> {
    hat.iter().zip(truth).map(|(h, t)| (h - t).abs()).collect()
}

/// AE-vs-B curves for both methods from a finished run.
pub fn trajectories(out: &DoGatesOutput, gamma_true: &[f64]) -> Result<Vec<Trajectory>> {
    let k = out.gates.k;
    let nb = out.splits.len();
    let dg = (1..=nb).map(|b| abs_err(&out.gates.gamma_median_prefix(b), gamma_true)).collect();
    let cq = (1..=nb)
        .map(|b| {
            let prefix = out.cate_prefix(b);
            if prefix.is_complete() {
                Ok(abs_err(&benchmark_or_constant(&prefix, k)?, gamma_true))
            } else {
                Ok(vec![f64::NAN; k])
            }
        })
        .collect::<Result<_>>()?;
    Ok(vec![
        Trajectory {
            method: Method::DoGates,
            ae: dg,
        },
        Trajectory {
            method: Method::CateQuantiles,
            ae: cq,
        },
    ])
}

/// Simulates one dataset and scores both methods on it.
pub fn run_rep(config: &BenchmarkConfig, scenario: ScenarioId, rep: usize) -> Result<RepResult> {
    let sim = gen_scenario(&config.scenario_config(scenario, rep))?;
    let gamma_true = metrics::true_group_effects(&sim.tau_true, config.run.k)?;
    let run = RunConfig {
        seed: config.estimator_seed(scenario, rep),
        ..config.run.clone()
    };
    let out = run_dogates(&sim.base, &run)?;
    let cate_quantiles = benchmark_or_constant(&out.cate, run.k)?;
    Ok(RepResult {
        scenario_id: scenario,
        rep,
        do_gates: out.gates.gamma_median.clone(),
        cate_quantiles,
        failed_splits: out.gates.failures.len(),
        estimate_counts: count_histogram(&out.cate.counts()),
        trajectories: trajectories(&out, &gamma_true)?,
        gamma_true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepFailure {
    pub scenario_id: ScenarioId,
    pub rep: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScores {
    pub mae: f64,
    pub bias2: f64,
    pub mae_by_group: Vec<f64>,
    pub bias2_by_group: Vec<f64>,
}

/// One row of the scenario summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario: ScenarioId,
    pub assignment: String,
    pub effect: String,
    pub misspecified: bool,
    pub n: usize,
    pub reps_ok: usize,
    pub reps_failed: usize,
    pub valid: bool,
    pub do_gates: Option<MethodScores>,
    pub cate_quantiles: Option<MethodScores>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutput {
    pub config: BenchmarkConfig,
    pub reps: Vec<RepResult>,
    pub failures: Vec<RepFailure>,
    pub summaries: Vec<ScenarioSummary>,
    pub method_summaries: Vec<MethodSummary>,
    /// Seconds per scenario, in scenario order.
    pub seconds: Vec<(ScenarioId, f64)>,
}

impl BenchmarkOutput {
    pub fn summary(&self, scenario: ScenarioId) -> Option<&ScenarioSummary> {
        self.summaries.iter().find(|s| s.scenario == scenario)
    }

    pub fn records(&self) -> Vec<BenchmarkRecord> {
        self.reps.iter().flat_map(|r| r.records()).collect()
    }
}

fn scores(summaries: &[MethodSummary], s: ScenarioId, m: Method) -> Option<MethodScores> {
    summaries
        .iter()
        .find(|x| x.scenario_id == s && x.method == m)
        .map(|x| MethodScores {
            mae: x.mae.overall,
            bias2: x.bias2.overall,
            mae_by_group: x.mae.per_group.clone(),
            bias2_by_group: x.bias2.per_group.clone(),
        })
}

/// Runs every scenario and rep. Reps run in parallel on the current rayon
/// pool; results are independent of the pool size.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkOutput> {
    config.run.check()?;
    if config.reps == 0 {
        return Err(Error::InvalidInput("reps must be at least 1".into()));
    }
    if config.scenarios.is_empty() {
        return Err(Error::InvalidInput("no scenarios selected".into()));
    }
    let mut reps = Vec::new();
    let mut failures = Vec::new();
    let mut seconds = Vec::new();
    for &scenario in &config.scenarios {
        let start = Instant::now();
        let outcomes: Vec<Result<RepResult>> = (0..config.reps)
            .into_par_iter()
            .map(|j| run_rep(config, scenario, j))
            .collect();
        seconds.push((scenario, start.elapsed().as_secs_f64()));
        for (j, o) in outcomes.into_iter().enumerate() {
            match o {
                Ok(r) => reps.push(r),
                Err(e) => failures.push(RepFailure {
                    scenario_id: scenario,
                    rep: j,
                    error: e.to_string(),
                }),
            }
        }
    }
    let records: Vec<BenchmarkRecord> = reps.iter().flat_map(|r| r.records()).collect();
    let method_summaries = if records.is_empty() {
        Vec::new()
    } else {
        summarize_records(&records)?
    };
    let summaries = config
        .scenarios
        .iter()
        .map(|&s| {
            let failed = failures.iter().filter(|f| f.scenario_id == s).count();
            let (assignment, effect, misspecified) = s.design();
            ScenarioSummary {
                scenario: s,
                assignment: format!("{assignment:?}"),
                effect: format!("{effect:?}"),
                misspecified,
                n: config.n,
                reps_ok: config.reps - failed,
                reps_failed: failed,
                valid: failed as f64 <= MAX_FAILED_REP_FRACTION * config.reps as f64 && failed < config.reps,
                do_gates: scores(&method_summaries, s, Method::DoGates),
                cate_quantiles: scores(&method_summaries, s, Method::CateQuantiles),
            }
        })
        .collect();
    Ok(BenchmarkOutput {
        config: config.clone(),
        reps,
        failures,
        summaries,
        method_summaries,
        seconds,
    })
}

// ---------------------------------------------------------------------------
// Bundles

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BundleKind {
    Estimate,
    Benchmark,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub tool_version: String,
    pub kind: BundleKind,
    pub config: serde_json::Value,
    /// Seeds actually used, keyed by what they drive.
    pub seeds: BTreeMap<String, u64>,
    pub files: Vec<String>,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(dir, name)?))
}

fn fmt_opt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        fmt_f64(v)
    }
}

fn write_trajectories<'a>(
    w: &mut csv::Writer<BufWriter<File>>,
    label: &str,
    rep: &str,
    trajectories: impl IntoIterator<Item = &'a Trajectory>,
) -> Result<()> {
    for t in trajectories {
        for (b, row) in t.ae.iter().enumerate() {
            for (g, v) in row.iter().enumerate() {
                w.write_record([label, rep, &t.method.to_string(), &(b + 1).to_string(), &(g + 1).to_string(), &fmt_opt(*v)])?;
            }
        }
    }
    Ok(())
}

const TRAJECTORY_HEADER: [&str; 6] = ["scenario", "rep", "method", "b", "group", "ae"];

/// Writes the benchmark bundle into `dir` (created if missing).
pub fn write_benchmark_bundle(out: &BenchmarkOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(dir, "summary.json", &out.summaries)?;
    write_json(dir, "failures.json", &out.failures)?;
    metrics::write_group_table(&out.method_summaries, create(dir, "groups.csv")?)?;

    let mut w = csv_writer(dir, "records.csv")?;
    w.write_record(["scenario", "rep", "method", "group", "gamma_hat", "gamma_true"])?;
    for r in &out.reps {
        for rec in r.records() {
            for (g, (h, t)) in rec.gamma_hat.iter().zip(&rec.gamma_true).enumerate() {
                w.write_record([
                    rec.scenario_id.to_string(),
                    rec.rep.to_string(),
                    rec.method.to_string(),
                    (g + 1).to_string(),
                    fmt_f64(*h),
                    fmt_f64(*t),
                ])?;
            }
        }
    }
    w.flush()?;

    let mut w = csv_writer(dir, "estimate_counts.csv")?;
    w.write_record(["scenario", "rep", "count", "observations"])?;
    for r in &out.reps {
        for (c, m) in &r.estimate_counts {
            w.write_record([r.scenario_id.to_string(), r.rep.to_string(), c.to_string(), m.to_string()])?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(dir, "trajectories.csv")?;
    w.write_record(TRAJECTORY_HEADER)?;
    for r in &out.reps {
        write_trajectories(&mut w, &r.scenario_id.to_string(), &r.rep.to_string(), &r.trajectories)?;
    }
    w.flush()?;

    let c = &out.config;
    let mut seeds = BTreeMap::new();
    seeds.insert("master".to_string(), c.run.seed);
    seeds.insert("covariates".to_string(), c.covariate_seed);
    for &s in &c.scenarios {
        for j in 0..c.reps {
            seeds.insert(format!("{s}/rep{j}/data"), c.rep_seed(s, j));
            seeds.insert(format!("{s}/rep{j}/estimator"), c.estimator_seed(s, j));
        }
    }
    write_json(
        dir,
        MANIFEST,
        &Manifest {
            format_version: FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            kind: BundleKind::Benchmark,
            config: serde_json::to_value(c)?,
            seeds,
            files: [
                "summary.json",
                "failures.json",
                "groups.csv",
                "records.csv",
                "estimate_counts.csv",
                "trajectories.csv",
                MANIFEST,
            ]
            .map(String::from)
            .to_vec(),
        },
    )?;
    let timing: BTreeMap<String, f64> = out.seconds.iter().map(|(s, t)| (s.to_string(), *t)).collect();
    write_json(dir, TIMING, &timing)
}

/// Ground truth stored next to an estimate when the input carried it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub gamma_true: Vec<f64>,
}

/// Writes the estimate bundle for `data` into `dir`.
pub fn write_estimate_bundle(
    out: &DoGatesOutput,
    data: &Dataset,
    config: &RunConfig,
    tau_true: Option<&[f64]>,
    dir: &Path,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(dir, "gates.json", &out.gates)?;

    let mut w = csv_writer(dir, "cate.csv")?;
    w.write_record(["row", "estimates", "s_bar"])?;
    for (i, (e, s)) in out.cate.estimates.iter().zip(&out.cate.s_bar).enumerate() {
        w.write_record([(i + 1).to_string(), e.len().to_string(), s.map(fmt_f64).unwrap_or_default()])?;
    }
    w.flush()?;

    let mut w = csv_writer(dir, "cate_draws.csv")?;
    w.write_record(["split", "row", "s_tilde"])?;
    for s in &out.splits {
        for (&i, &v) in s.main_idx.iter().zip(&s.s_tilde) {
            w.write_record([s.index.to_string(), (i + 1).to_string(), fmt_f64(v)])?;
        }
    }
    w.flush()?;

    let mut files: Vec<String> = ["gates.json", "cate.csv", "cate_draws.csv", MANIFEST].map(String::from).to_vec();
    if let Some(tau) = tau_true {
        write_json(
            dir,
            "truth.json",
            &Truth {
                gamma_true: metrics::true_group_effects(tau, config.k)?,
            },
        )?;
        files.push("truth.json".into());
    }

    let mut seeds = BTreeMap::new();
    seeds.insert("master".to_string(), config.seed);
    for s in &out.splits {
        seeds.insert(format!("split{}", s.index), s.seed);
    }
    write_json(
        dir,
        MANIFEST,
        &Manifest {
            format_version: FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            kind: BundleKind::Estimate,
            config: serde_json::json!({
                "run": config,
                "n": data.len(),
                "features": data.feature_names(),
            }),
            seeds,
            files,
        },
    )
}

// ---------------------------------------------------------------------------
// Report

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}

fn require(dir: &Path, names: &[&str]) -> Result<()> {
    let missing: Vec<String> = names
        .iter()
        .filter(|n| !dir.join(n).is_file())
        .map(|n| dir.join(n).display().to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingBundleFiles(missing))
    }
}

fn col(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::InvalidInput(format!("missing column `{name}`")))
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::InvalidInput(format!("bad {what} `{s}`")))
}

/// Files written by [`write_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub estimate_counts: PathBuf,
    pub ae_by_b: Option<PathBuf>,
}

/// Exports figure data from a bundle into `out_dir`:
/// `estimate_count_hist.csv` (how many observations received each number of
/// CATE estimates) and, when the truth is known, `ae_by_b.csv` (absolute
/// error per group after the first `b` splits, averaged over reps).
pub fn write_report(bundle: &Path, out_dir: &Path) -> Result<ReportFiles> {
    require(bundle, &[MANIFEST])?;
    let manifest: Manifest = read_json(&bundle.join(MANIFEST))?;
    fs::create_dir_all(out_dir)?;
    let hist_path = out_dir.join("estimate_count_hist.csv");
    match manifest.kind {
        BundleKind::Estimate => {
            require(bundle, &["gates.json", "cate.csv", "cate_draws.csv"])?;
            let mut r = csv::Reader::from_path(bundle.join("cate.csv"))?;
            let h = r.headers()?.clone();
            let ci = col(&h, "estimates")?;
            let mut counts = Vec::new();
            for rec in r.records() {
                counts.push(parse::<usize>(&rec?[ci], "estimate count")?);
            }
            let mut w = csv_writer(out_dir, "estimate_count_hist.csv")?;
            w.write_record(["scenario", "count", "observations"])?;
            for (c, m) in count_histogram(&counts) {
                w.write_record(["data".to_string(), c.to_string(), m.to_string()])?;
            }
            w.flush()?;

            if !bundle.join("truth.json").is_file() {
                return Ok(ReportFiles {
                    estimate_counts: hist_path,
                    ae_by_b: None,
                });
            }
            let truth: Truth = read_json(&bundle.join("truth.json"))?;
            let gates: crate::pipeline::GatesResult = read_json(&bundle.join("gates.json"))?;
            let n = counts.len();
            let mut r = csv::Reader::from_path(bundle.join("cate_draws.csv"))?;
            let h = r.headers()?.clone();
            let (si, ri, vi) = (col(&h, "split")?, col(&h, "row")?, col(&h, "s_tilde")?);
            let mut by_split: BTreeMap<usize, (Vec<usize>, Vec<f64>)> = BTreeMap::new();
            for rec in r.records() {
                let rec = rec?;
                let e = by_split.entry(parse(&rec[si], "split")?).or_default();
                let row: usize = parse(&rec[ri], "row")?;
                if row == 0 || row > n {
                    return Err(Error::InvalidInput(format!("row {row} out of range")));
                }
                e.0.push(row - 1);
                e.1.push(parse(&rec[vi], "estimate")?);
            }
            let draws: Vec<(Vec<usize>, Vec<f64>)> = gates
                .split_indices
                .iter()
                .map(|i| by_split.remove(i).unwrap_or_default())
                .collect();
            let k = gates.k;
            let dg: Vec<Vec<f64>> = (1..=draws.len())
                .map(|b| abs_err(&gates.gamma_median_prefix(b), &truth.gamma_true))
                .collect();
            let cq: Vec<Vec<f64>> = (1..=draws.len())
                .map(|b| {
                    let e = crate::pipeline::CateEnsemble::from_splits(
                        n,
                        draws[..b].iter().map(|(r, v)| (r.as_slice(), v.as_slice())),
                    );
                    if e.is_complete() {
                        Ok(abs_err(&benchmark_or_constant(&e, k)?, &truth.gamma_true))
                    } else {
                        Ok(vec![f64::NAN; k])
                    }
                })
                .collect::<Result<_>>()?;
            let ts = [
                Trajectory {
                    method: Method::DoGates,
                    ae: dg,
                },
                Trajectory {
                    method: Method::CateQuantiles,
                    ae: cq,
                },
            ];
            let mut w = csv_writer(out_dir, "ae_by_b.csv")?;
            w.write_record(TRAJECTORY_HEADER)?;
            write_trajectories(&mut w, "data", "0", &ts)?;
            w.flush()?;
            Ok(ReportFiles {
                estimate_counts: hist_path,
                ae_by_b: Some(out_dir.join("ae_by_b.csv")),
            })
        }
        BundleKind::Benchmark => {
            require(bundle, &["estimate_counts.csv", "trajectories.csv"])?;
            let mut r = csv::Reader::from_path(bundle.join("estimate_counts.csv"))?;
            let h = r.headers()?.clone();
            let (sc, cc, oc) = (col(&h, "scenario")?, col(&h, "count")?, col(&h, "observations")?);
            let mut hist: BTreeMap<(String, usize), usize> = BTreeMap::new();
            for rec in r.records() {
                let rec = rec?;
                *hist.entry((rec[sc].to_string(), parse(&rec[cc], "count")?)).or_insert(0) +=
                    parse::<usize>(&rec[oc], "observations")?;
            }
            let mut w = csv_writer(out_dir, "estimate_count_hist.csv")?;
            w.write_record(["scenario", "count", "observations"])?;
            for ((s, c), m) in hist {
                w.write_record([s, c.to_string(), m.to_string()])?;
            }
            w.flush()?;

            // Mean AE over reps for each (scenario, method, b, group).
            let mut r = csv::Reader::from_path(bundle.join("trajectories.csv"))?;
            let h = r.headers()?.clone();
            let idx: Vec<usize> = ["scenario", "method", "b", "group", "ae"]
                .iter()
                .map(|c| col(&h, c))
                .collect::<Result<_>>()?;
            let mut acc: BTreeMap<(String, String, usize, usize), (f64, usize)> = BTreeMap::new();
            for rec in r.records() {
                let rec = rec?;
                if rec[idx[4]].is_empty() {
                    continue;
                }
                let key = (
                    rec[idx[0]].to_string(),
                    rec[idx[1]].to_string(),
                    parse(&rec[idx[2]], "b")?,
                    parse(&rec[idx[3]], "group")?,
                );
                let e = acc.entry(key).or_insert((0.0, 0));
                e.0 += parse::<f64>(&rec[idx[4]], "ae")?;
                e.1 += 1;
            }
            let mut w = csv_writer(out_dir, "ae_by_b.csv")?;
            w.write_record(["scenario", "method", "b", "group", "mean_ae", "reps"])?;
            for ((s, m, b, g), (sum, c)) in acc {
                w.write_record([s, m, b.to_string(), g.to_string(), fmt_f64(sum / c as f64), c.to_string()])?;
            }
            w.flush()?;
            Ok(ReportFiles {
                estimate_counts: hist_path,
                ae_by_b: Some(out_dir.join("ae_by_b.csv")),
            })
        }
    }
}
