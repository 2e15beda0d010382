//! Fixtures shared by the benchmarks.

use mcts_bai::harness::{random_tree_for, BuiltinTree};
use mcts_bai::GameTree;

/// The 3×3 depth-two benchmark tree.
pub fn depth_two() -> GameTree {
    BuiltinTree::Fig2.tree()
}

/// The bundled 3-ary depth-three tree.
pub fn depth_three() -> GameTree {
    BuiltinTree::Fig3.tree()
}

/// A 10-ary depth-three tree with uniform leaf means (1000 leaves).
pub fn wide(seed: u64) -> GameTree {
    random_tree_for(10, 3, seed, 0).expect("valid shape")
}
