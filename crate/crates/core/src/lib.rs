//! Best-action identification in stochastic minimax game trees.
//!
//! A [`GameTree`] has MAX and MIN internal nodes and leaves that return
//! i.i.d. rewards in [0, 1]. The algorithms sample leaves until they can name
//! a root action whose minimax value is within `epsilon` of the best one with
//! probability at least `1 - delta`.
//!
//! ```
//! use mcts_bai::{run, Algorithm, AlgorithmConfig, GameTree};
//!
//! let tree = GameTree::depth_two(&[vec![0.45, 0.50, 0.55], vec![0.35, 0.40, 0.60]]).unwrap();
//! let result = run(&tree, &AlgorithmConfig::new(Algorithm::Ugape, 0.0, 0.6)).unwrap();
//! assert_eq!(result.tau, result.pulls.iter().sum::<u64>());
//! ```

pub mod algorithms;
pub mod bounds;
pub mod confidence;
pub mod harness;
pub mod oracle;
pub mod tree;

pub use algorithms::{
    run, run_bai_mcts, run_find_top_winner, run_m_lucb, run_with_oracle, Algorithm, AlgorithmConfig, AlgorithmError,
    RunResult, StopReason, ZeroEpsilonPolicy,
};
pub use bounds::{
    invert_loglog, kl_div, solve_depth2_lower_bound, theorem1_bound, theorem3_bound, BoundsError, LowerBoundSolution,
};
pub use confidence::{CiFamily, ExplorationRate, Interval, RateClock, RateVariant, SearchState};
pub use harness::{
    emit_report, generate_random_tree, render_report, run_experiment, AggregateReport, ExperimentSpec, HarnessError,
    Preset, ReportFormat, TreeSource,
};
pub use oracle::{LeafDistribution, LeafOracle};
pub use tree::{evaluate_tree, GameTree, NodeId, NodeKind, TreeAnalysis, TreeError, TreeSpec};
