//! Best-action identification loops.
//!
//! [`run_bai_mcts`] drives UGapE-MCTS, LUCB-MCTS and the two-leaf LUCB
//! variant. At every round a BAI index picks a promising pair `(b, c)` of
//! depth-one nodes from the propagated intervals, the stopping rule compares
//! `U_c` with `L_b`, and otherwise the representative leaf of the wider of the
//! two is sampled.
//!
//! [`run_find_top_winner`] (uniform sampling with round-based elimination) and
//! [`run_m_lucb`] (representative leaves first, LUCB step over them second)
//! are the baselines.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::confidence::{CiFamily, ConfidenceError, ExplorationRate, Interval, RateClock, RateVariant, SearchState};
use crate::oracle::{LeafOracle, OracleError};
use crate::tree::{evaluate_tree, GameTree, Node, NodeId, NodeKind, TreeAnalysis};

/// Default per-run sample cap.
pub const DEFAULT_BUDGET_CAP: u64 = 100_000_000;

#[derive(Debug, Error)]
pub enum AlgorithmError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("the root has a single action")]
    SingleAction,
    #[error("{0} cannot run with epsilon = 0")]
    EpsilonZeroUnsupported(Algorithm),
    #[error("{got} is not handled by {runner}")]
    WrongAlgorithm { runner: &'static str, got: Algorithm },
    #[error(transparent)]
    Confidence(#[from] ConfidenceError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ugape,
    Lucb,
    /// LUCB-MCTS sampling both promising leaves and stopping at even rounds.
    Lucb2,
    Ftw,
    Mlucb,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Ugape,
        Algorithm::Lucb,
        Algorithm::Lucb2,
        Algorithm::Ftw,
        Algorithm::Mlucb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ugape => "ugape",
            Algorithm::Lucb => "lucb",
            Algorithm::Lucb2 => "lucb2",
            Algorithm::Ftw => "ftw",
            Algorithm::Mlucb => "mlucb",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown algorithm '{s}' (expected one of ugape, lucb, lucb2, ftw, mlucb)"))
    }
}

/// What FindTopWinner does when asked for `epsilon = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroEpsilonPolicy {
    Reject,
    /// Keep halving the round precision until one action survives.
    UntilSingleSurvivor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub delta: f64,
    pub rate: RateVariant,
    pub ci: CiFamily,
    pub budget_cap: u64,
    /// Record one entry per sample in [`RunResult::trace`].
    pub trace: bool,
    pub zero_epsilon: ZeroEpsilonPolicy,
    /// Leading constant `c` of the FindTopWinner round targets.
    pub ftw_constant: f64,
    pub seed: u64,
    pub repetition: u64,
}

impl AlgorithmConfig {
    pub fn new(algorithm: Algorithm, epsilon: f64, delta: f64) -> Self {
        AlgorithmConfig {
            algorithm,
            epsilon,
            delta,
            rate: RateVariant::Experiments,
            ci: CiFamily::Kl,
            budget_cap: DEFAULT_BUDGET_CAP,
            trace: false,
            zero_epsilon: ZeroEpsilonPolicy::Reject,
            ftw_constant: FTW_SAMPLE_CONSTANT,
            seed: 0,
            repetition: 0,
        }
    }

    pub fn validate(&self) -> Result<(), AlgorithmError> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(AlgorithmError::InvalidConfig(format!(
                "epsilon = {} must be >= 0",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(AlgorithmError::InvalidConfig(format!(
                "delta = {} must be > 0",
                self.delta
            )));
        }
        if !(self.ftw_constant > 0.0 && self.ftw_constant.is_finite()) {
            return Err(AlgorithmError::InvalidConfig(format!(
                "ftw constant = {} must be > 0",
                self.ftw_constant
            )));
        }
        if self.budget_cap == 0 {
            return Err(AlgorithmError::InvalidConfig("budget cap must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    StoppingRule,
    BudgetCap,
}

/// State of one sampling decision, recorded before the draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// Samples taken so far.
    pub t: u64,
    pub b: NodeId,
    pub c: NodeId,
    pub b_interval: Interval,
    pub c_interval: Interval,
    /// Depth-one node whose representative leaf is sampled.
    pub selected: NodeId,
    pub leaf: NodeId,
    /// Pull count of `leaf` before the draw.
    pub leaf_pulls: u64,
    /// Every leaf interval contains its true mean.
    pub leaves_cover: bool,
    /// Every node interval contains its true value.
    pub nodes_cover: bool,
}

/// One FindTopWinner round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationRound {
    pub round: u32,
    pub precision: f64,
    /// Target pull count of every surviving leaf.
    pub target: u64,
    pub surviving_leaves: usize,
    pub surviving_actions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub recommendation: NodeId,
    pub tau: u64,
    /// Indexed by leaf enumeration.
    pub pulls: Vec<u64>,
    pub correct: bool,
    pub stopped_by: StopReason,
    /// `(checks, violations)` of the nested-interval property on
    /// representative-leaf descents.
    pub nesting: (u64, u64),
    pub trace: Option<Vec<RoundRecord>>,
    pub rounds: Option<Vec<EliminationRound>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromisingPair {
    pub b: NodeId,
    pub c: NodeId,
    /// UGapE indices `B_s`, one per root action.
    pub b_indices: Option<Vec<f64>>,
}

/// Position of the first maximal element.
fn argmax_by<I: Iterator<Item = (usize, f64)>>(it: I) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in it {
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// UGapE choice over a list of intervals: `(b, c, B)` as positions.
pub fn ugape_indices(intervals: &[Interval]) -> (usize, usize, Vec<f64>) {
    let k = intervals.len();
    let (mut top, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut top_at = 0;
    for (i, iv) in intervals.iter().enumerate() {
        if iv.upper > top {
            second = top;
            top = iv.upper;
            top_at = i;
        } else if iv.upper > second {
            second = iv.upper;
        }
    }
    let indices: Vec<f64> = (0..k)
        .map(|i| {
            let others = if i == top_at { second } else { top };
            others - intervals[i].lower
        })
        .collect();
    let b = (0..k).fold(0, |m, i| if indices[i] < indices[m] { i } else { m });
    let c = argmax_by((0..k).filter(|&i| i != b).map(|i| (i, intervals[i].upper))).expect("at least two actions");
    (b, c, indices)
}

/// LUCB choice from empirical values and upper bounds: `(b, c)` as positions.
pub fn lucb_indices(values: &[f64], uppers: &[f64]) -> (usize, usize) {
    let b = argmax_by(values.iter().copied().enumerate()).expect("at least two actions");
    let c = argmax_by((0..uppers.len()).filter(|&i| i != b).map(|i| (i, uppers[i]))).expect("at least two actions");
    (b, c)
}

fn root_intervals(state: &SearchState<'_>) -> Vec<Interval> {
    state.tree().root_actions().iter().map(|&a| state.interval(a)).collect()
}

fn require_two_actions(tree: &GameTree) -> Result<(), AlgorithmError> {
    if tree.root_actions().len() < 2 {
        return Err(AlgorithmError::SingleAction);
    }
    Ok(())
}

pub fn ugape_promising(state: &SearchState<'_>) -> Result<PromisingPair, AlgorithmError> {
    let tree = state.tree();
    require_two_actions(tree)?;
    let (b, c, indices) = ugape_indices(&root_intervals(state));
    let actions = tree.root_actions();
    Ok(PromisingPair {
        b: actions[b],
        c: actions[c],
        b_indices: Some(indices),
    })
}

/// `b` maximizes the empirical mean of the representative leaf (0 when that
/// leaf is unvisited), `c` maximizes the upper bound among the others.
pub fn lucb_promising(state: &mut SearchState<'_>) -> Result<PromisingPair, AlgorithmError> {
    let tree = state.tree();
    require_two_actions(tree)?;
    let actions = tree.root_actions();
    let values: Vec<f64> = actions
        .iter()
        .map(|&a| {
            let leaf = state.representative_leaf(a);
            let slot = tree.leaf_index(leaf).expect("representative is a leaf");
            state.empirical_mean(slot)
        })
        .collect();
    let uppers: Vec<f64> = actions.iter().map(|&a| state.upper(a)).collect();
    let (b, c) = lucb_indices(&values, &uppers);
    Ok(PromisingPair {
        b: actions[b],
        c: actions[c],
        b_indices: None,
    })
}

/// The wider of `b` and `c`; `b` on ties.
pub fn select(state: &SearchState<'_>, pair: &PromisingPair) -> NodeId {
    if state.width(pair.c) > state.width(pair.b) {
        pair.c
    } else {
        pair.b
    }
}

pub fn stopping_rule(state: &SearchState<'_>, pair: &PromisingPair, epsilon: f64) -> bool {
    overlap_below(state.upper(pair.c), state.lower(pair.b), epsilon)
}

/// `U_c - L_b < epsilon`.
pub fn overlap_below(upper_c: f64, lower_b: f64, epsilon: f64) -> bool {
    upper_c - lower_b < epsilon
}

/// Draws once from the representative leaf of `node` and updates `state`.
/// Returns the sampled leaf.
pub fn sample_representative(state: &mut SearchState<'_>, oracle: &mut LeafOracle, node: NodeId) -> NodeId {
    let leaf = state.representative_leaf(node);
    draw_leaf(state, oracle, leaf);
    leaf
}

fn draw_leaf(state: &mut SearchState<'_>, oracle: &mut LeafOracle, leaf: NodeId) {
    let slot = state.tree().leaf_index(leaf).expect("leaf");
    let reward = oracle.draw_slot(slot);
    state.record(slot, reward);
}

fn check_runner(config: &AlgorithmConfig, runner: &'static str, allowed: &[Algorithm]) -> Result<(), AlgorithmError> {
    config.validate()?;
    if !allowed.contains(&config.algorithm) {
        return Err(AlgorithmError::WrongAlgorithm {
            runner,
            got: config.algorithm,
        });
    }
    Ok(())
}

fn single_action_result(tree: &GameTree, config: &AlgorithmConfig) -> RunResult {
    RunResult {
        algorithm: config.algorithm,
        recommendation: tree.root_actions()[0],
        tau: 0,
        pulls: vec![0; tree.leaf_count()],
        correct: true,
        stopped_by: StopReason::StoppingRule,
        nesting: (0, 0),
        trace: config.trace.then(Vec::new),
        rounds: None,
    }
}

struct Tracer<'a> {
    analysis: &'a TreeAnalysis,
    means: Vec<f64>,
    records: Option<Vec<RoundRecord>>,
}

impl<'a> Tracer<'a> {
    fn new(tree: &GameTree, analysis: &'a TreeAnalysis, enabled: bool) -> Self {
        Tracer {
            analysis,
            means: if enabled { tree.leaf_means() } else { Vec::new() },
            records: enabled.then(Vec::new),
        }
    }

    fn record(&mut self, state: &SearchState<'_>, pair: &PromisingPair, selected: NodeId, leaf: NodeId) {
        let Some(records) = self.records.as_mut() else {
            return;
        };
        let slot = state.tree().leaf_index(leaf).expect("leaf");
        records.push(RoundRecord {
            t: state.t(),
            b: pair.b,
            c: pair.c,
            b_interval: state.interval(pair.b),
            c_interval: state.interval(pair.c),
            selected,
            leaf,
            leaf_pulls: state.pulls(slot),
            leaves_cover: state.leaves_cover(&self.means),
            nodes_cover: state.nodes_cover(&self.analysis.values),
        });
    }
}

/// UGapE-MCTS, LUCB-MCTS or the two-leaf LUCB variant.
pub fn run_bai_mcts(
    tree: &GameTree,
    oracle: &mut LeafOracle,
    config: &AlgorithmConfig,
) -> Result<RunResult, AlgorithmError> {
    check_runner(
        config,
        "run_bai_mcts",
        &[Algorithm::Ugape, Algorithm::Lucb, Algorithm::Lucb2],
    )?;
    let rate = ExplorationRate::new(config.rate, tree.leaf_count(), config.delta)?;
    if tree.root_actions().len() < 2 {
        return Ok(single_action_result(tree, config));
    }
    let analysis = evaluate_tree(tree);
    let mut state = SearchState::new(tree, rate, config.ci);
    let mut tracer = Tracer::new(tree, &analysis, config.trace);
    let two_leaf = config.algorithm == Algorithm::Lucb2;
    let per_round = if two_leaf { 2 } else { 1 };

    let (recommendation, stopped_by) = loop {
        let pair = match config.algorithm {
            Algorithm::Ugape => ugape_promising(&state)?,
            _ => lucb_promising(&mut state)?,
        };
        if stopping_rule(&state, &pair, config.epsilon) {
            break (pair.b, StopReason::StoppingRule);
        }
        if state.t() + per_round > config.budget_cap {
            break (pair.b, StopReason::BudgetCap);
        }
        if two_leaf {
            // both representatives are taken from the same round-t state
            let leaf_b = state.representative_leaf(pair.b);
            let leaf_c = state.representative_leaf(pair.c);
            tracer.record(&state, &pair, pair.b, leaf_b);
            draw_leaf(&mut state, oracle, leaf_b);
            tracer.record(&state, &pair, pair.c, leaf_c);
            draw_leaf(&mut state, oracle, leaf_c);
        } else {
            let selected = select(&state, &pair);
            let leaf = state.representative_leaf(selected);
            tracer.record(&state, &pair, selected, leaf);
            draw_leaf(&mut state, oracle, leaf);
        }
    };

    Ok(RunResult {
        algorithm: config.algorithm,
        recommendation,
        tau: state.t(),
        pulls: state.pull_counts().to_vec(),
        correct: analysis.is_epsilon_good(recommendation, config.epsilon),
        stopped_by,
        nesting: state.nesting_stats(),
        trace: tracer.records,
        rounds: None,
    })
}

/// Default leading constant of the FindTopWinner round targets.
pub const FTW_SAMPLE_CONSTANT: f64 = 2.0;

/// Target pull count of round `r`: `⌈(c/ε_r²) ln(16|L|/(ε_r δ))⌉` with
/// `ε_r = 2^-r`.
pub fn ftw_round_target(round: u32, leaf_count: usize, delta: f64, constant: f64) -> u64 {
    let eps = 0.5f64.powi(round as i32);
    (constant / (eps * eps) * (16.0 * leaf_count as f64 / (eps * delta)).ln()).ceil() as u64
}

/// FindTopWinner: sample every surviving leaf up to the round target, then
/// prune every node whose estimate is more than `2 ε_r` away from its
/// parent's.
pub fn run_find_top_winner(
    tree: &GameTree,
    oracle: &mut LeafOracle,
    config: &AlgorithmConfig,
) -> Result<RunResult, AlgorithmError> {
    check_runner(config, "run_find_top_winner", &[Algorithm::Ftw])?;
    if config.epsilon == 0.0 && config.zero_epsilon == ZeroEpsilonPolicy::Reject {
        return Err(AlgorithmError::EpsilonZeroUnsupported(Algorithm::Ftw));
    }
    if tree.root_actions().len() < 2 {
        return Ok(single_action_result(tree, config));
    }
    let analysis = evaluate_tree(tree);
    let n = tree.len();
    let leaf_count = tree.leaf_count();
    let mut alive = vec![true; n];
    let mut pulls = vec![0u64; leaf_count];
    let mut sums = vec![0.0f64; leaf_count];
    let mut estimates = vec![0.0f64; n];
    let mut rounds = Vec::new();
    let mut tau = 0u64;
    let mut stopped_by = StopReason::StoppingRule;

    let mut round = 0u32;
    'rounds: loop {
        round += 1;
        let precision = 0.5f64.powi(round as i32);
        let target = ftw_round_target(round, leaf_count, config.delta, config.ftw_constant);
        for (slot, &leaf) in tree.leaves().iter().enumerate() {
            if !alive[leaf.0] {
                continue;
            }
            while pulls[slot] < target {
                if tau >= config.budget_cap {
                    stopped_by = StopReason::BudgetCap;
                    break 'rounds;
                }
                sums[slot] += oracle.draw_slot(slot);
                pulls[slot] += 1;
                tau += 1;
            }
        }

        // minimax of empirical means over surviving children
        for i in (0..n).rev() {
            if !alive[i] {
                continue;
            }
            estimates[i] = match tree.node(NodeId(i)) {
                Node::Leaf { .. } => {
                    let slot = tree.leaf_index(NodeId(i)).expect("leaf");
                    sums[slot] / pulls[slot] as f64
                }
                Node::Internal { kind, children, .. } => {
                    let it = children.iter().filter(|c| alive[c.0]).map(|c| estimates[c.0]);
                    match kind {
                        NodeKind::Max => it.fold(f64::NEG_INFINITY, f64::max),
                        NodeKind::Min => it.fold(f64::INFINITY, f64::min),
                    }
                }
            };
        }
        // nodes are stored in pre-order, so parents are settled first
        for i in 1..n {
            let p = tree.parent(NodeId(i)).expect("non-root").0;
            if !alive[p] || (estimates[i] - estimates[p]).abs() > 2.0 * precision {
                alive[i] = false;
            }
        }

        let surviving_actions = tree.root_actions().iter().filter(|a| alive[a.0]).count();
        if config.trace {
            rounds.push(EliminationRound {
                round,
                precision,
                target,
                surviving_leaves: tree.leaves().iter().filter(|l| alive[l.0]).count(),
                surviving_actions,
            });
        }
        if surviving_actions == 1 || (config.epsilon > 0.0 && precision <= config.epsilon / 2.0) {
            break;
        }
    }

    let recommendation = best_surviving_action(tree, &alive, &estimates);
    Ok(RunResult {
        algorithm: config.algorithm,
        recommendation,
        tau,
        pulls,
        correct: analysis.is_epsilon_good(recommendation, config.epsilon),
        stopped_by,
        nesting: (0, 0),
        trace: None,
        rounds: config.trace.then_some(rounds),
    })
}

fn best_surviving_action(tree: &GameTree, alive: &[bool], estimates: &[f64]) -> NodeId {
    let actions = tree.root_actions();
    let pos = argmax_by(
        actions
            .iter()
            .enumerate()
            .filter(|(_, a)| alive[a.0])
            .map(|(i, a)| (i, estimates[a.0])),
    )
    .unwrap_or(0);
    actions[pos]
}

/// Minimax of empirical means below `node`. An unvisited leaf counts as 0
/// under a MAX parent and 1 under a MIN parent.
fn empirical_maximin(tree: &GameTree, state: &SearchState<'_>, node: NodeId) -> f64 {
    match tree.node(node) {
        Node::Leaf { parent, .. } => {
            let slot = tree.leaf_index(node).expect("leaf");
            if state.pulls(slot) > 0 {
                state.empirical_mean(slot)
            } else if tree.kind(*parent) == Some(NodeKind::Min) {
                1.0
            } else {
                0.0
            }
        }
        Node::Internal { kind, children, .. } => {
            let it = children.iter().map(|&c| empirical_maximin(tree, state, c));
            match kind {
                NodeKind::Max => it.fold(f64::NEG_INFINITY, f64::max),
                NodeKind::Min => it.fold(f64::INFINITY, f64::min),
            }
        }
    }
}

/// M-LUCB: representative leaves of the root actions under a global-time
/// exploration rate, then an LUCB step over those leaves.
pub fn run_m_lucb(
    tree: &GameTree,
    oracle: &mut LeafOracle,
    config: &AlgorithmConfig,
) -> Result<RunResult, AlgorithmError> {
    check_runner(config, "run_m_lucb", &[Algorithm::Mlucb])?;
    let rate = ExplorationRate::new(config.rate, tree.leaf_count(), config.delta)?;
    if tree.root_actions().len() < 2 {
        return Ok(single_action_result(tree, config));
    }
    let analysis = evaluate_tree(tree);
    let mut state = SearchState::with_clock(tree, rate, config.ci, RateClock::Global);
    let mut tracer = Tracer::new(tree, &analysis, config.trace);
    let actions = tree.root_actions();

    let (recommendation, stopped_by) = loop {
        let reps: Vec<NodeId> = actions.iter().map(|&a| state.representative_leaf(a)).collect();
        let values: Vec<f64> = actions.iter().map(|&a| empirical_maximin(tree, &state, a)).collect();
        let uppers: Vec<f64> = reps.iter().map(|&l| state.upper(l)).collect();
        let (b, c) = lucb_indices(&values, &uppers);
        if overlap_below(state.upper(reps[c]), state.lower(reps[b]), config.epsilon) {
            break (actions[b], StopReason::StoppingRule);
        }
        if state.t() + 2 > config.budget_cap {
            break (actions[b], StopReason::BudgetCap);
        }
        let pair = PromisingPair {
            b: actions[b],
            c: actions[c],
            b_indices: None,
        };
        tracer.record(&state, &pair, pair.b, reps[b]);
        tracer.record(&state, &pair, pair.c, reps[c]);
        let (slot_b, slot_c) = (
            tree.leaf_index(reps[b]).expect("leaf"),
            tree.leaf_index(reps[c]).expect("leaf"),
        );
        let samples = [(slot_b, oracle.draw_slot(slot_b)), (slot_c, oracle.draw_slot(slot_c))];
        state.record_all(&samples);
    };

    Ok(RunResult {
        algorithm: config.algorithm,
        recommendation,
        tau: state.t(),
        pulls: state.pull_counts().to_vec(),
        correct: analysis.is_epsilon_good(recommendation, config.epsilon),
        stopped_by,
        nesting: state.nesting_stats(),
        trace: tracer.records,
        rounds: None,
    })
}

/// Dispatches on `config.algorithm` with Bernoulli leaves and the oracle
/// streams of `(config.seed, config.repetition)`.
pub fn run(tree: &GameTree, config: &AlgorithmConfig) -> Result<RunResult, AlgorithmError> {
    let mut oracle = LeafOracle::bernoulli(tree, config.seed, config.repetition);
    run_with_oracle(tree, &mut oracle, config)
}

pub fn run_with_oracle(
    tree: &GameTree,
    oracle: &mut LeafOracle,
    config: &AlgorithmConfig,
) -> Result<RunResult, AlgorithmError> {
    match config.algorithm {
        Algorithm::Ugape | Algorithm::Lucb | Algorithm::Lucb2 => run_bai_mcts(tree, oracle, config),
        Algorithm::Ftw => run_find_top_winner(tree, oracle, config),
        Algorithm::Mlucb => run_m_lucb(tree, oracle, config),
    }
}
