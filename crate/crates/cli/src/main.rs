use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use mcts_bai::bounds::{depth_two_means, solve_depth2_lower_bound};
use mcts_bai::harness::random_tree_for;
use mcts_bai::tree::{complexity_term, ComplexityVariant};
use mcts_bai::{
    evaluate_tree, render_report, run, run_experiment, theorem1_bound, theorem3_bound, Algorithm, AlgorithmConfig,
    CiFamily, ExperimentSpec, GameTree, HarnessError, LowerBoundSolution, Preset, RateVariant, ReportFormat,
    TreeSource,
};

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "mcts-bai",
    version,
    about = "Best-action identification in stochastic game trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run repeated trials and write an aggregate report.
    Run(RunArgs),
    /// Print complexity terms, upper bounds and (depth two) the lower bound.
    Bounds(BoundsArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Tree specification (JSON).
    #[arg(long, conflicts_with = "random")]
    tree: Option<PathBuf>,
    /// Fresh random tree per repetition, e.g. `b=10,depth=3`.
    #[arg(long, value_parser = parse_random)]
    random: Option<(usize, usize)>,
    /// Start from a bundled experiment; other flags override it.
    #[arg(long)]
    preset: Option<Preset>,
    /// Comma-separated list: ugape, lucb, lucb2, ftw, mlucb.
    #[arg(long, value_delimiter = ',')]
    algo: Vec<Algorithm>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Exploration rate.
    #[arg(long, value_enum)]
    beta: Option<BetaArg>,
    #[arg(long, value_enum)]
    ci: Option<CiArg>,
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    budget_cap: Option<u64>,
    /// Report destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: ReportFormat,
    /// Also record per-round traces of repetition 0 as JSON lines, next to
    /// `--out` or on stderr.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum BetaArg {
    Theoretical,
    Practical,
    Experiments,
}

impl From<BetaArg> for RateVariant {
    fn from(b: BetaArg) -> Self {
        match b {
            BetaArg::Theoretical => RateVariant::Theoretical,
            BetaArg::Practical => RateVariant::Practical,
            BetaArg::Experiments => RateVariant::Experiments,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CiArg {
    Hoeffding,
    Kl,
}

impl From<CiArg> for CiFamily {
    fn from(c: CiArg) -> Self {
        match c {
            CiArg::Hoeffding => CiFamily::Hoeffding,
            CiArg::Kl => CiFamily::Kl,
        }
    }
}

fn parse_random(s: &str) -> Result<(usize, usize), String> {
    let mut branching = None;
    let mut depth = None;
    for part in s.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got '{part}'"))?;
        let value = usize::from_str(value.trim()).map_err(|e| format!("{key}: {e}"))?;
        match key.trim() {
            "b" | "branching" => branching = Some(value),
            "depth" | "d" => depth = Some(value),
            other => return Err(format!("unknown key '{other}'")),
        }
    }
    match (branching, depth) {
        (Some(b), Some(d)) => Ok((b, d)),
        _ => Err("expected b=<branching>,depth=<depth>".into()),
    }
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.to_string(),
        }
    }

    fn internal(message: impl ToString) -> Self {
        Failure {
            code: EXIT_INTERNAL,
            message: message.to_string(),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Encode(_) | HarnessError::Pool(_) => Failure::internal(e),
            _ => Failure::input(e),
        }
    }
}

fn build_spec(args: &RunArgs) -> Result<ExperimentSpec, Failure> {
    let tree = match (&args.tree, args.random) {
        (Some(path), _) => Some(TreeSource::File(path.clone())),
        (None, Some((branching, depth))) => Some(TreeSource::Random { branching, depth }),
        (None, None) => None,
    };
    let mut spec = match (args.preset, tree) {
        (Some(p), tree) => {
            let mut spec = ExperimentSpec::preset(p);
            if let Some(tree) = tree {
                spec.tree = tree;
            }
            spec
        }
        (None, Some(tree)) => ExperimentSpec::new("custom", tree, Algorithm::ALL.to_vec()),
        (None, None) => {
            return Err(Failure {
                code: EXIT_USAGE,
                message: "one of --tree, --random or --preset is required".into(),
            })
        }
    };
    if !args.algo.is_empty() {
        spec.algorithms = args.algo.clone();
    }
    if let Some(e) = args.epsilon {
        spec.epsilon = e;
    }
    if let Some(d) = args.delta {
        spec.delta = d;
    }
    if let Some(b) = args.beta {
        spec.rate = b.into();
    }
    if let Some(c) = args.ci {
        spec.ci = c.into();
    }
    if let Some(r) = args.reps {
        spec.repetitions = r;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(cap) = args.budget_cap {
        spec.budget_cap = cap;
    }
    spec.workers = args.workers;
    Ok(spec)
}

fn load_tree(path: &Path) -> Result<GameTree, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    GameTree::from_json(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn first_tree(spec: &ExperimentSpec) -> Result<GameTree, Failure> {
    match &spec.tree {
        TreeSource::File(path) => load_tree(path),
        TreeSource::Builtin(b) => Ok(b.tree()),
        TreeSource::Inline(s) => GameTree::from_spec(s).map_err(Failure::input),
        TreeSource::Random { branching, depth } => {
            random_tree_for(*branching, *depth, spec.seed, 0).map_err(Failure::input)
        }
    }
}

fn write_traces(spec: &ExperimentSpec, out: Option<&Path>) -> Result<(), Failure> {
    let tree = first_tree(spec)?;
    let mut lines = String::new();
    for &algorithm in &spec.algorithms {
        let config = AlgorithmConfig {
            rate: spec.rate,
            ci: spec.ci,
            budget_cap: spec.budget_cap,
            zero_epsilon: spec.zero_epsilon,
            ftw_constant: spec.ftw_constant,
            seed: spec.seed,
            repetition: 0,
            trace: true,
            ..AlgorithmConfig::new(algorithm, spec.epsilon, spec.delta)
        };
        let result = match run(&tree, &config) {
            Ok(r) => r,
            Err(e) => {
                warn!("{algorithm}: no trace ({e})");
                continue;
            }
        };
        for round in result.trace.iter().flatten() {
            let mut line = serde_json::to_value(round).map_err(Failure::internal)?;
            line["algorithm"] = serde_json::Value::from(algorithm.name());
            lines.push_str(&line.to_string());
            lines.push('\n');
        }
        for round in result.rounds.iter().flatten() {
            let mut line = serde_json::to_value(round).map_err(Failure::internal)?;
            line["algorithm"] = serde_json::Value::from(algorithm.name());
            lines.push_str(&line.to_string());
            lines.push('\n');
        }
    }
    match out {
        Some(path) => {
            let mut name = path.as_os_str().to_owned();
            name.push(".trace.jsonl");
            fs::write(&name, lines).map_err(|e| Failure::input(format!("{}: {e}", Path::new(&name).display())))
        }
        None => std::io::stderr().write_all(lines.as_bytes()).map_err(Failure::internal),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let spec = build_spec(&args)?;
    let start = Instant::now();
    let report = run_experiment(&spec)?;
    info!(
        "{} x {} repetitions in {:.2}s",
        spec.algorithms.len(),
        spec.repetitions,
        start.elapsed().as_secs_f64()
    );
    let text = render_report(&report, args.format)?;
    match &args.out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(Failure::internal)?,
    }
    if args.trace {
        write_traces(&spec, args.out.as_deref())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BoundsReport {
    leaf_count: usize,
    epsilon: f64,
    delta: f64,
    complexity: Option<f64>,
    complexity_tilde: Option<f64>,
    theorem1_bound: Option<f64>,
    theorem3_bound: Option<f64>,
    lower_bound: Option<LowerBoundSolution>,
    notes: Vec<String>,
}

fn cmd_bounds(args: BoundsArgs) -> Result<(), Failure> {
    if !(args.delta > 0.0 && args.delta < 1.0) {
        return Err(Failure::input(format!("delta must lie in (0, 1), got {}", args.delta)));
    }
    if args.epsilon.is_nan() || args.epsilon < 0.0 {
        return Err(Failure::input(format!("epsilon must be >= 0, got {}", args.epsilon)));
    }
    let tree = load_tree(&args.tree)?;
    let analysis = evaluate_tree(&tree);
    let leaf_count = tree.leaf_count();
    let mut notes = Vec::new();
    let mut keep = |label: &str, r: Result<f64, String>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("{label}: {e}"));
            None
        }
    };
    let complexity = keep(
        "complexity",
        complexity_term(&analysis, args.epsilon, ComplexityVariant::Standard).map_err(|e| e.to_string()),
    );
    let complexity_tilde = keep(
        "complexity_tilde",
        complexity_term(&analysis, args.epsilon, ComplexityVariant::Tilde).map_err(|e| e.to_string()),
    );
    let t1 = keep(
        "theorem1_bound",
        theorem1_bound(&analysis, args.epsilon, args.delta, leaf_count).map_err(|e| e.to_string()),
    );
    let t3 = keep(
        "theorem3_bound",
        theorem3_bound(&analysis, args.epsilon, args.delta, leaf_count).map_err(|e| e.to_string()),
    );
    let lower_bound = match depth_two_means(&tree).and_then(|mu| solve_depth2_lower_bound(&mu, args.delta)) {
        Ok(sol) => Some(sol),
        Err(e) => {
            notes.push(format!("lower_bound: {e}"));
            None
        }
    };
    let report = BoundsReport {
        leaf_count,
        epsilon: args.epsilon,
        delta: args.delta,
        complexity,
        complexity_tilde,
        theorem1_bound: t1,
        theorem3_bound: t3,
        lower_bound,
        notes,
    };
    let text = serde_json::to_string_pretty(&report).map_err(Failure::internal)?;
    println!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Bounds(args) => cmd_bounds(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
