//! Repeated-trial experiments and their reports.
//!
//! Every `(algorithm, repetition)` pair is an independent run: its oracle
//! streams come from `(seed, repetition)` and, for generated trees, so does
//! the tree. Runs execute on a bounded rayon pool and are aggregated in
//! repetition order, so a report depends only on the spec and never on the
//! worker count.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::{
    self, Algorithm, AlgorithmConfig, RunResult, StopReason, ZeroEpsilonPolicy, DEFAULT_BUDGET_CAP, FTW_SAMPLE_CONSTANT,
};
use crate::confidence::{CiFamily, RateVariant};
use crate::oracle::{derive_stream, TREE_STREAM};
use crate::tree::{GameTree, TreeError, TreeSpec};

const FIG2_TREE: &str = include_str!("../trees/fig2.json");
const FIG3_TREE: &str = include_str!("../trees/fig3.json");

/// Two-sided 95% normal quantile.
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("tree: {0}")]
    Tree(#[from] TreeError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    TreeFile {
        path: PathBuf,
        #[source]
        source: TreeError,
    },
    #[error("report encoding: {0}")]
    Encode(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinTree {
    /// The 3×3 depth-two benchmark.
    Fig2,
    /// A fixed 3-ary depth-three tree.
    Fig3,
}

impl BuiltinTree {
    pub fn json(self) -> &'static str {
        match self {
            BuiltinTree::Fig2 => FIG2_TREE,
            BuiltinTree::Fig3 => FIG3_TREE,
        }
    }

    pub fn tree(self) -> GameTree {
        GameTree::from_json(self.json()).expect("bundled trees are valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeSource {
    File(PathBuf),
    Builtin(BuiltinTree),
    Inline(TreeSpec),
    /// A fresh full tree with i.i.d. Uniform[0, 1] leaf means for every
    /// repetition.
    Random {
        branching: usize,
        depth: usize,
    },
}

impl fmt::Display for TreeSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeSource::File(p) => write!(f, "file:{}", p.display()),
            TreeSource::Builtin(BuiltinTree::Fig2) => f.write_str("builtin:fig2"),
            TreeSource::Builtin(BuiltinTree::Fig3) => f.write_str("builtin:fig3"),
            TreeSource::Inline(_) => f.write_str("inline"),
            TreeSource::Random { branching, depth } => write!(f, "random:b={branching},depth={depth}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig2,
    Fig3,
    Ensemble,
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig2" => Ok(Preset::Fig2),
            "fig3" => Ok(Preset::Fig3),
            "ensemble" => Ok(Preset::Ensemble),
            _ => Err(format!("unknown preset '{s}' (expected fig2, fig3 or ensemble)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(format!("unknown format '{s}' (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub tree: TreeSource,
    pub algorithms: Vec<Algorithm>,
    pub epsilon: f64,
    pub delta: f64,
    pub rate: RateVariant,
    pub ci: CiFamily,
    pub repetitions: u64,
    pub seed: u64,
    pub budget_cap: u64,
    pub zero_epsilon: ZeroEpsilonPolicy,
    pub ftw_constant: f64,
    /// Worker threads; 0 uses rayon's default. Not part of the report.
    #[serde(skip)]
    pub workers: usize,
}

impl ExperimentSpec {
    pub fn new(name: &str, tree: TreeSource, algorithms: Vec<Algorithm>) -> Self {
        ExperimentSpec {
            name: name.to_string(),
            tree,
            algorithms,
            epsilon: 0.0,
            delta: 0.1,
            rate: RateVariant::Experiments,
            ci: CiFamily::Kl,
            repetitions: 1000,
            seed: 0,
            budget_cap: DEFAULT_BUDGET_CAP,
            zero_epsilon: ZeroEpsilonPolicy::UntilSingleSurvivor,
            ftw_constant: FTW_SAMPLE_CONSTANT,
            workers: 0,
        }
    }

    /// The three published experiment settings at desk scale.
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Fig2 => ExperimentSpec {
                delta: 0.1 * 9.0,
                seed: 2,
                ..Self::new(
                    "fig2",
                    TreeSource::Builtin(BuiltinTree::Fig2),
                    vec![Algorithm::Lucb, Algorithm::Ugape, Algorithm::Ftw, Algorithm::Mlucb],
                )
            },
            Preset::Fig3 => ExperimentSpec {
                delta: 0.1 * 27.0,
                seed: 3,
                ..Self::new(
                    "fig3",
                    TreeSource::Builtin(BuiltinTree::Fig3),
                    vec![Algorithm::Lucb, Algorithm::Ugape, Algorithm::Ftw],
                )
            },
            Preset::Ensemble => ExperimentSpec {
                epsilon: 0.01,
                delta: 0.1,
                rate: RateVariant::Theoretical,
                repetitions: 100,
                seed: 10,
                ..Self::new(
                    "ensemble",
                    TreeSource::Random {
                        branching: 10,
                        depth: 3,
                    },
                    vec![Algorithm::Lucb, Algorithm::Ugape, Algorithm::Ftw],
                )
            },
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if let TreeSource::Random { branching, depth } = self.tree {
            if branching < 2 || depth < 1 {
                return Err(HarnessError::InvalidSpec(format!(
                    "random trees need branching >= 2 and depth >= 1, got b={branching}, depth={depth}"
                )));
            }
        }
        let config = self.algorithm_config(Algorithm::Lucb, 0);
        config.validate().map_err(|e| HarnessError::InvalidSpec(e.to_string()))
    }

    fn algorithm_config(&self, algorithm: Algorithm, repetition: u64) -> AlgorithmConfig {
        AlgorithmConfig {
            rate: self.rate,
            ci: self.ci,
            budget_cap: self.budget_cap,
            zero_epsilon: self.zero_epsilon,
            ftw_constant: self.ftw_constant,
            seed: self.seed,
            repetition,
            ..AlgorithmConfig::new(algorithm, self.epsilon, self.delta)
        }
    }
}

/// Full `branching`-ary tree of the given depth, MAX at the root and
/// alternating by level, with leaf means drawn i.i.d. from Uniform[0, 1].
pub fn generate_random_tree<R: Rng>(branching: usize, depth: usize, rng: &mut R) -> Result<GameTree, TreeError> {
    if branching < 2 || depth < 1 {
        return Err(TreeError::InvalidShape(format!(
            "need branching >= 2 and depth >= 1, got {branching} and {depth}"
        )));
    }
    let means: Vec<f64> = (0..branching.pow(depth as u32)).map(|_| rng.gen::<f64>()).collect();
    GameTree::uniform(branching, depth, &means)
}

/// The tree used by `repetition` of a generated-tree experiment.
pub fn random_tree_for(branching: usize, depth: usize, seed: u64, repetition: u64) -> Result<GameTree, TreeError> {
    generate_random_tree(branching, depth, &mut derive_stream(seed, repetition, TREE_STREAM))
}

fn load_tree(source: &TreeSource) -> Result<Option<GameTree>, HarnessError> {
    match source {
        TreeSource::File(path) => {
            let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
                path: path.clone(),
                source,
            })?;
            GameTree::from_json(&text)
                .map(Some)
                .map_err(|source| HarnessError::TreeFile {
                    path: path.clone(),
                    source,
                })
        }
        TreeSource::Builtin(b) => Ok(Some(b.tree())),
        TreeSource::Inline(spec) => Ok(Some(GameTree::from_spec(spec)?)),
        TreeSource::Random { .. } => Ok(None),
    }
}

/// Wilson score interval for `successes` out of `n` at 95% confidence.
pub fn wilson_interval(successes: u64, n: u64) -> Option<(f64, f64)> {
    if n == 0 {
        return None;
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Some(((center - half).max(0.0), (center + half).min(1.0)))
}

/// Spec fields that determine the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub name: String,
    pub tree: String,
    pub epsilon: f64,
    pub delta: f64,
    pub rate: RateVariant,
    pub ci: CiFamily,
    pub repetitions: u64,
    pub seed: u64,
    pub budget_cap: u64,
    pub zero_epsilon: ZeroEpsilonPolicy,
    pub ftw_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmReport {
    pub algorithm: Algorithm,
    /// Completed runs.
    pub runs: u64,
    pub failures: u64,
    /// Distinct failure messages, in order of first occurrence.
    pub failure_messages: Vec<String>,
    pub tau_mean: Option<f64>,
    pub tau_std: Option<f64>,
    pub tau_min: Option<u64>,
    pub tau_max: Option<u64>,
    pub errors: u64,
    pub error_rate: Option<f64>,
    pub error_rate_ci95: Option<(f64, f64)>,
    pub cap_hits: u64,
    /// Mean pull count of every leaf, in leaf enumeration order.
    pub leaf_pull_means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub config: ConfigEcho,
    pub leaf_count: usize,
    pub algorithms: Vec<AlgorithmReport>,
}

fn aggregate(algorithm: Algorithm, leaf_count: usize, outcomes: &[Result<RunResult, String>]) -> AlgorithmReport {
    let runs: Vec<&RunResult> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let mut failure_messages: Vec<String> = Vec::new();
    for msg in outcomes.iter().filter_map(|o| o.as_ref().err()) {
        if !failure_messages.contains(msg) {
            failure_messages.push(msg.clone());
        }
    }
    let n = runs.len() as u64;
    let taus: Vec<f64> = runs.iter().map(|r| r.tau as f64).collect();
    let tau_mean = (n > 0).then(|| taus.iter().sum::<f64>() / n as f64);
    let tau_std = tau_mean
        .filter(|_| n > 1)
        .map(|m| (taus.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / (n - 1) as f64).sqrt());
    let errors = runs.iter().filter(|r| !r.correct).count() as u64;
    let mut leaf_pull_means = vec![0.0; if n > 0 { leaf_count } else { 0 }];
    for r in &runs {
        for (m, &p) in leaf_pull_means.iter_mut().zip(&r.pulls) {
            *m += p as f64;
        }
    }
    leaf_pull_means.iter_mut().for_each(|m| *m /= n as f64);
    AlgorithmReport {
        algorithm,
        runs: n,
        failures: (outcomes.len() - runs.len()) as u64,
        failure_messages,
        tau_mean,
        tau_std,
        tau_min: runs.iter().map(|r| r.tau).min(),
        tau_max: runs.iter().map(|r| r.tau).max(),
        errors,
        error_rate: (n > 0).then(|| errors as f64 / n as f64),
        error_rate_ci95: wilson_interval(errors, n),
        cap_hits: runs.iter().filter(|r| r.stopped_by == StopReason::BudgetCap).count() as u64,
        leaf_pull_means,
    }
}

/// Runs every algorithm `spec.repetitions` times. Failed runs are counted
/// and reported, never fatal.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<AggregateReport, HarnessError> {
    spec.validate()?;
    let fixed = load_tree(&spec.tree)?;
    let leaf_count = match (&fixed, &spec.tree) {
        (Some(t), _) => t.leaf_count(),
        (None, TreeSource::Random { branching, depth }) => branching.pow(*depth as u32),
        (None, _) => unreachable!("only generated sources have no fixed tree"),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;

    let one_run = |algorithm: Algorithm, rep: u64| -> Result<RunResult, String> {
        let config = spec.algorithm_config(algorithm, rep);
        let generated;
        let tree = match (&fixed, &spec.tree) {
            (Some(t), _) => t,
            (None, TreeSource::Random { branching, depth }) => {
                generated = random_tree_for(*branching, *depth, spec.seed, rep).map_err(|e| e.to_string())?;
                &generated
            }
            (None, _) => unreachable!(),
        };
        algorithms::run(tree, &config).map_err(|e| e.to_string())
    };

    let algorithms = pool.install(|| {
        use rayon::prelude::*;
        spec.algorithms
            .iter()
            .map(|&algorithm| {
                let outcomes: Vec<Result<RunResult, String>> = (0..spec.repetitions)
                    .into_par_iter()
                    .map(|rep| one_run(algorithm, rep))
                    .collect();
                for msg in outcomes.iter().filter_map(|o| o.as_ref().err()) {
                    log::warn!("{algorithm}: run failed: {msg}");
                }
                aggregate(algorithm, leaf_count, &outcomes)
            })
            .collect()
    });

    Ok(AggregateReport {
        config: ConfigEcho {
            name: spec.name.clone(),
            tree: spec.tree.to_string(),
            epsilon: spec.epsilon,
            delta: spec.delta,
            rate: spec.rate,
            ci: spec.ci,
            repetitions: spec.repetitions,
            seed: spec.seed,
            budget_cap: spec.budget_cap,
            zero_epsilon: spec.zero_epsilon,
            ftw_constant: spec.ftw_constant,
        },
        leaf_count,
        algorithms,
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Renders a report. CSV has one row per `(algorithm, statistic)`, then one
/// row per `(algorithm, leaf)`; every row carries the config echo.
pub fn render_report(report: &AggregateReport, format: ReportFormat) -> Result<String, HarnessError> {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(report)
            .map(|s| s + "\n")
            .map_err(|e| HarnessError::Encode(e.to_string())),
        ReportFormat::Csv => {
            let c = &report.config;
            let echo = [
                c.name.clone(),
                c.tree.clone(),
                c.epsilon.to_string(),
                c.delta.to_string(),
                format!("{:?}", c.rate).to_lowercase(),
                format!("{:?}", c.ci).to_lowercase(),
                c.repetitions.to_string(),
                c.seed.to_string(),
            ];
            let mut w = csv::Writer::from_writer(Vec::new());
            let encode = |e: csv::Error| HarnessError::Encode(e.to_string());
            w.write_record([
                "algorithm",
                "kind",
                "key",
                "value",
                "experiment",
                "tree",
                "epsilon",
                "delta",
                "rate",
                "ci",
                "repetitions",
                "seed",
            ])
            .map_err(encode)?;
            for a in &report.algorithms {
                let stats = [
                    ("tau_mean", opt(a.tau_mean)),
                    ("tau_std", opt(a.tau_std)),
                    ("tau_min", opt(a.tau_min)),
                    ("tau_max", opt(a.tau_max)),
                    ("error_rate", opt(a.error_rate)),
                    ("cap_hits", a.cap_hits.to_string()),
                ];
                for (key, value) in stats {
                    let mut row = vec![a.algorithm.to_string(), "summary".into(), key.into(), value];
                    row.extend(echo.iter().cloned());
                    w.write_record(&row).map_err(encode)?;
                }
            }
            for a in &report.algorithms {
                for leaf in 0..report.leaf_count {
                    let value = a.leaf_pull_means.get(leaf).map(|m| m.to_string()).unwrap_or_default();
                    let mut row = vec![a.algorithm.to_string(), "leaf".into(), leaf.to_string(), value];
                    row.extend(echo.iter().cloned());
                    w.write_record(&row).map_err(encode)?;
                }
            }
            let bytes = w.into_inner().map_err(|e| HarnessError::Encode(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| HarnessError::Encode(e.to_string()))
        }
    }
}

pub fn emit_report(report: &AggregateReport, format: ReportFormat, path: &Path) -> Result<(), HarnessError> {
    let text = render_report(report, format)?;
    fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}
