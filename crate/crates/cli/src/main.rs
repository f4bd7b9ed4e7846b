use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dogates_core::harness::{self, BenchmarkConfig};
use dogates_core::{gen_scenario, run_dogates, Dataset, Error, ForestParams, GatesMode, RunConfig, ScenarioConfig, ScenarioId};

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Sorted group average treatment effects with doubly-robust, orthogonal scores.
#[derive(Parser, Debug)]
#[command(name = "dogates", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate group effects from a CSV file with columns y, d, x1..xp.
    Estimate(EstimateArgs),
    /// Write one simulated dataset to CSV.
    Simulate(SimulateArgs),
    /// Monte Carlo comparison of DO GATES and the CATE-quantile benchmark.
    Benchmark(BenchmarkArgs),
    /// Export figure data from an estimate or benchmark bundle.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct EstimatorArgs {
    /// Number of groups.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Number of random sample splits.
    #[arg(long, default_value_t = 100)]
    b: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.02)]
    trim_lo: f64,
    #[arg(long, default_value_t = 0.95)]
    trim_hi: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Trees per forest.
    #[arg(long, default_value_t = 200)]
    trees: usize,
    #[arg(long, default_value_t = 5)]
    min_leaf: usize,
    /// Features tried per split (default: ceil(p / 3)).
    #[arg(long)]
    mtry: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "DOGATES_WORKERS")]
    workers: Option<usize>,
}

impl EstimatorArgs {
    fn run_config(&self, mode: GatesMode) -> RunConfig {
        RunConfig {
            k: self.k,
            b: self.b,
            mode,
            forest: ForestParams {
                n_trees: self.trees,
                min_leaf: self.min_leaf,
                mtry: self.mtry,
                max_depth: self.max_depth,
                ..ForestParams::default()
            },
            trim_lo: self.trim_lo,
            trim_hi: self.trim_hi,
            alpha: self.alpha,
            seed: self.seed,
            ..RunConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    data: PathBuf,
    /// rct, observational or baseline_y0.
    #[arg(long, default_value = "observational")]
    mode: GatesMode,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    est: EstimatorArgs,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    scenario: ScenarioId,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed of the fixed covariate law.
    #[arg(long, default_value_t = dogates_core::simulation::DEFAULT_COVARIATE_SEED)]
    covariate_seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    /// Scenario list such as `A..L` or `A,C,F`.
    #[arg(long, default_value = "A..L")]
    scenarios: String,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, default_value = "observational")]
    mode: GatesMode,
    #[arg(long, default_value_t = dogates_core::simulation::DEFAULT_COVARIATE_SEED)]
    covariate_seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    est: EstimatorArgs,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Output directory (default: the bundle itself).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn install_pool(workers: Option<usize>) -> Result<(), Error> {
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::InvalidInput("workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?;
    }
    Ok(())
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:8.4}")).collect::<Vec<_>>().join(" ")
}

fn estimate(args: EstimateArgs) -> Result<(), Error> {
    install_pool(args.est.workers)?;
    let config = args.est.run_config(args.mode);
    config.check()?;
    if !args.data.is_file() {
        return Err(Error::InvalidInput(format!("data file {} not found", args.data.display())));
    }
    let loaded = Dataset::read_csv(&args.data)?;
    let violations = dogates_core::validate_dataset(&loaded.data, config.k);
    if !violations.is_empty() {
        return Err(Error::Validation(violations.into_iter().map(|v| v.0).collect()));
    }
    let out = run_dogates(&loaded.data, &config)?;
    harness::write_estimate_bundle(&out, &loaded.data, &config, loaded.tau_true.as_deref(), &args.out)?;
    let g = &out.gates;
    println!("mode {}  k {}  splits {}/{}", g.mode, g.k, g.split_indices.len(), config.b);
    println!("gamma      {}", fmt_vec(&g.gamma_median));
    println!("ci_low     {}", fmt_vec(&g.ci_median_low));
    println!("ci_high    {}", fmt_vec(&g.ci_median_high));
    println!("p_adjusted {}", fmt_vec(&g.p_adjusted));
    for w in &g.warnings {
        eprintln!("warning: {w}");
    }
    for f in &g.failures {
        eprintln!("warning: split {} skipped: {}", f.index, f.error);
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let config = ScenarioConfig::new(args.scenario, args.n, args.seed).with_covariate_seed(args.covariate_seed);
    let sim = gen_scenario(&config)?;
    sim.write_csv(BufWriter::new(File::create(&args.out)?))?;
    eprintln!(
        "scenario {}: {} rows, {} treated",
        args.scenario,
        sim.base.len(),
        sim.base.n_treated()
    );
    Ok(())
}

fn benchmark(args: BenchmarkArgs) -> Result<(), Error> {
    install_pool(args.est.workers)?;
    let run = args.est.run_config(args.mode);
    let mut config = BenchmarkConfig::new(ScenarioId::parse_list(&args.scenarios)?, args.n, args.reps, run);
    config.covariate_seed = args.covariate_seed;
    let out = harness::run_benchmark(&config)?;
    harness::write_benchmark_bundle(&out, &args.out)?;
    println!("scenario  valid  reps  mae_dogates  mae_cate  bias2_dogates  bias2_cate");
    for s in &out.summaries {
        let get = |m: &Option<harness::MethodScores>| m.as_ref().map_or((f64::NAN, f64::NAN), |x| (x.mae, x.bias2));
        let (dm, db) = get(&s.do_gates);
        let (cm, cb) = get(&s.cate_quantiles);
        println!(
            "{:<8}  {:<5}  {:>4}  {dm:>11.3}  {cm:>8.3}  {db:>13.3}  {cb:>10.3}",
            s.scenario.to_string(),
            s.valid,
            s.reps_ok
        );
    }
    for f in &out.failures {
        eprintln!("warning: scenario {} rep {} failed: {}", f.scenario_id, f.rep, f.error);
    }
    Ok(())
}

fn report(args: ReportArgs) -> Result<(), Error> {
    let out = args.out.unwrap_or_else(|| args.input.clone());
    let files = harness::write_report(&args.input, &out)?;
    println!("{}", files.estimate_counts.display());
    if let Some(p) = files.ae_by_b {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Simulate(a) => simulate(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Validation(v)) => {
            eprintln!("error: input failed validation");
            for line in v {
                eprintln!("  - {line}");
            }
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(e) if e.is_validation() => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
