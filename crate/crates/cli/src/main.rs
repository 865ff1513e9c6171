use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dynbal::config::{parse_config, ScenarioConfig};
use dynbal::dyadic::ExactDecimal;
use dynbal::engine::{run_experiment, run_trial, EngineError, ExperimentResult};
use dynbal::graph::Graph;
use dynbal::output::{write_experiment, write_trial_csv};
use dynbal::parallel::Execution;
use dynbal::smoothing::{calibrate_hitting, uniformity_test, SmoothingError};
use dynbal::verify::{run_directory, run_suite, CriterionReport, Level};

const EXIT_CONFIG: u8 = 1;
const EXIT_INVARIANT: u8 = 2;
const EXIT_REJECTIONS: u8 = 3;

/// Load balancing on adversarial dynamic graphs with random edge noise.
///
/// Thread count comes from DYNBAL_THREADS (0 or unset: all cores, 1: sequential).
#[derive(Parser)]
#[command(name = "dynbal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and write its per-round trace as CSV.
    Run(RunArgs),
    /// Run every trial of a scenario and write CSV tables into a directory.
    Experiment(ExperimentArgs),
    /// Run the built-in acceptance suite, or every scenario in a directory.
    Verify(VerifyArgs),
    /// Measure total-variation distance of the smoothing sampler from uniform.
    SmoothingTest(SmoothingTestArgs),
    /// Estimate the hitting constant of k-smoothing.
    CalibrateC1(CalibrateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON file.
    config: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Trace destination; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the scenario trial count.
    #[arg(long)]
    trials: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Small instances only.
    #[arg(long, conflicts_with = "full")]
    fast: bool,
    /// Full-scale instances (the default).
    #[arg(long)]
    full: bool,
    /// Run every `*.json` scenario in this directory instead of the suite.
    #[arg(long)]
    dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaseGraph {
    Path,
    Star,
    Cycle,
    Complete,
}

impl BaseGraph {
    fn build(self, n: usize) -> Graph {
        match self {
            BaseGraph::Path => Graph::path(n),
            BaseGraph::Star => Graph::star(n),
            BaseGraph::Cycle => Graph::cycle(n),
            BaseGraph::Complete => Graph::complete(n),
        }
    }
}

#[derive(Args)]
struct SmoothingTestArgs {
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, value_enum, default_value_t = BaseGraph::Path)]
    graph: BaseGraph,
    /// Hamming radius of the smoothing.
    #[arg(long, default_value_t = 1)]
    radius: u64,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, default_value_t = 16)]
    n: usize,
    /// Noise level, as a decimal.
    #[arg(long, default_value = "1")]
    k: ExactDecimal,
    /// Samples per (base graph, set size) case.
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl ToString) -> Failure {
        Failure { code: EXIT_CONFIG, message: message.to_string() }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Failure {
        let code = match &e {
            EngineError::Smoothing { source: SmoothingError::RejectionsExhausted { .. }, .. } => EXIT_REJECTIONS,
            EngineError::DisallowedGraph { .. } => EXIT_INVARIANT,
            _ => EXIT_CONFIG,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<SmoothingError> for Failure {
    fn from(e: SmoothingError) -> Failure {
        let code = match e {
            SmoothingError::RejectionsExhausted { .. } => EXIT_REJECTIONS,
            _ => EXIT_CONFIG,
        };
        Failure { code, message: e.to_string() }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::config(format!("{}: {e}", path.display()))
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let mut cfg = parse_config(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn cmd_run(args: RunArgs) -> Result<bool, Failure> {
    let cfg = load_config(&args.config, args.seed)?;
    let t = run_trial(&cfg, cfg.seed)?;
    match &args.out {
        Some(p) => {
            let f = fs::File::create(p).map_err(|e| io_failure(p, e))?;
            write_trial_csv(&t, f).map_err(|e| io_failure(p, e))?;
        }
        None => write_trial_csv(&t, io::stdout().lock()).map_err(|e| Failure::config(e.to_string()))?,
    }
    match t.converged_at_round {
        Some(r) => eprintln!("seed {}: converged at round {r}, final gap {}", t.seed, t.final_gap),
        None => eprintln!("seed {}: not converged after {} rounds, final gap {}", t.seed, t.rounds, t.final_gap),
    }
    if let Some(v) = &t.first_violation {
        eprintln!("invariant {} violated in round {}: {}", v.check, v.round, v.witness);
    }
    Ok(t.total_violations() == 0)
}

fn print_aggregate(e: &ExperimentResult) {
    let a = &e.aggregate;
    println!(
        "trials {}  converged {}  success {:.4}  wilson [{:.4}, {:.4}]  invariant failures {}",
        a.trials, a.converged, a.success_fraction, a.wilson_low, a.wilson_high, a.invariant_failures
    );
    if let (Some(min), Some(med), Some(max)) = (a.min_rounds, a.median_rounds, a.max_rounds) {
        println!("rounds to converge: min {min}  median {med}  max {max}");
    }
    println!("max final gap {}", a.max_final_gap);
}

fn cmd_experiment(args: ExperimentArgs) -> Result<bool, Failure> {
    let mut cfg = load_config(&args.config, args.seed)?;
    if let Some(t) = args.trials {
        cfg.trials = t;
        cfg.validate().map_err(Failure::config)?;
    }
    let e = run_experiment(&cfg, Execution::from_env())?;
    write_experiment(&args.out, &e).map_err(|err| io_failure(&args.out, err))?;
    print_aggregate(&e);
    Ok(e.aggregate.invariant_failures == 0)
}

fn print_reports(reports: &[CriterionReport]) -> bool {
    let mut out = io::stdout().lock();
    for r in reports {
        let _ = writeln!(out, "{r}");
    }
    reports.iter().all(|r| r.passed)
}

fn cmd_verify(args: VerifyArgs) -> Result<bool, Failure> {
    let exec = Execution::from_env();
    if let Some(dir) = args.dir {
        let outcomes = run_directory(&dir, exec).map_err(Failure::config)?;
        let reports: Vec<CriterionReport> = outcomes.iter().map(|o| o.report()).collect();
        let ok = print_reports(&reports);
        if let Some(err) = outcomes.into_iter().find_map(|o| o.result.err()) {
            return Err(err.into());
        }
        return Ok(ok);
    }
    let level = if args.fast { Level::Fast } else { Level::Full };
    Ok(print_reports(&run_suite(level, exec)))
}

fn cmd_smoothing_test(args: SmoothingTestArgs) -> Result<bool, Failure> {
    if args.n < 2 {
        return Err(Failure::config("n: must be at least 2"));
    }
    let g = args.graph.build(args.n);
    let r = uniformity_test(&g, args.radius, args.samples, args.seed, Execution::from_env())?;
    println!(
        "n {}  radius {}  samples {}  ball size {}  outside ball {}  total variation {:.5}",
        r.n, r.radius, r.samples, r.ball_size, r.outside_ball, r.total_variation
    );
    Ok(r.outside_ball == 0)
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<bool, Failure> {
    if args.n < 2 {
        return Err(Failure::config("n: must be at least 2"));
    }
    let c = calibrate_hitting(args.n, &args.k, args.samples, args.seed, Execution::from_env())?;
    println!("base,set_size,hits,samples,constant");
    for case in &c.cases {
        println!("{},{},{},{},{:.4}", case.base, case.set_size, case.hits, case.samples, case.constant);
    }
    println!("c1 {:.4}", c.c1);
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Verify(a) => cmd_verify(a),
        Command::SmoothingTest(a) => cmd_smoothing_test(a),
        Command::CalibrateC1(a) => cmd_calibrate(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_INVARIANT),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
