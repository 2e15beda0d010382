//! Minimax game trees with Bernoulli-mean leaves, and their exact analysis.
//!
//! Nodes are stored in depth-first pre-order, so the root is always
//! `NodeId(0)`, every child has a larger id than its parent and the leaf
//! enumeration is the order in which leaves appear in that traversal.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance under which two values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Internal {
        kind: NodeKind,
        children: Vec<NodeId>,
        parent: Option<NodeId>,
    },
    Leaf {
        mean: f64,
        parent: NodeId,
    },
}

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("internal node has an empty children list")]
    EmptyChildren,
    #[error("leaf mean {0} is outside [0, 1]")]
    MeanOutOfRange(f64),
    #[error("the root must be a MAX node")]
    RootNotMax,
    #[error("node {0} is not a leaf")]
    NotALeaf(NodeId),
    #[error("node {0} is not an internal node")]
    NotInternal(NodeId),
    #[error("complexity term is infinite: a leaf has zero effective gap and epsilon is 0")]
    InfiniteComplexity,
    #[error("invalid tree shape: {0}")]
    InvalidShape(String),
    #[error("malformed tree specification: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Serialized form of a tree: `{"kind":"max","children":[...]}` for internal
/// nodes and `{"mean":0.45}` for leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeSpec {
    Internal { kind: NodeKind, children: Vec<TreeSpec> },
    Leaf { mean: f64 },
}

/// An immutable minimax tree whose root is a MAX node.
#[derive(Debug, Clone, PartialEq)]
pub struct GameTree {
    nodes: Vec<Node>,
    leaves: Vec<NodeId>,
    leaf_slot: Vec<Option<usize>>,
    depth: Vec<usize>,
    top: Vec<Option<NodeId>>,
}

impl GameTree {
    pub fn from_spec(spec: &TreeSpec) -> Result<Self, TreeError> {
        match spec {
            TreeSpec::Internal {
                kind: NodeKind::Max, ..
            } => {}
            _ => return Err(TreeError::RootNotMax),
        }
        let mut tree = GameTree {
            nodes: Vec::new(),
            leaves: Vec::new(),
            leaf_slot: Vec::new(),
            depth: Vec::new(),
            top: Vec::new(),
        };
        tree.push_spec(spec, None)?;
        Ok(tree)
    }

    fn push_spec(&mut self, spec: &TreeSpec, parent: Option<NodeId>) -> Result<NodeId, TreeError> {
        let id = NodeId(self.nodes.len());
        let (depth, top) = match parent {
            None => (0, None),
            Some(p) => {
                let d = self.depth[p.0] + 1;
                (d, if d == 1 { Some(id) } else { self.top[p.0] })
            }
        };
        self.depth.push(depth);
        self.top.push(top);
        match spec {
            TreeSpec::Leaf { mean } => {
                if !(0.0..=1.0).contains(mean) {
                    return Err(TreeError::MeanOutOfRange(*mean));
                }
                let parent = parent.ok_or(TreeError::RootNotMax)?;
                self.nodes.push(Node::Leaf { mean: *mean, parent });
                self.leaf_slot.push(Some(self.leaves.len()));
                self.leaves.push(id);
            }
            TreeSpec::Internal { kind, children } => {
                if children.is_empty() {
                    return Err(TreeError::EmptyChildren);
                }
                self.nodes.push(Node::Internal {
                    kind: *kind,
                    children: Vec::with_capacity(children.len()),
                    parent,
                });
                self.leaf_slot.push(None);
                for child in children {
                    let cid = self.push_spec(child, Some(id))?;
                    if let Node::Internal { children, .. } = &mut self.nodes[id.0] {
                        children.push(cid);
                    }
                }
            }
        }
        Ok(id)
    }

    pub fn from_json(text: &str) -> Result<Self, TreeError> {
        let spec: TreeSpec = serde_json::from_str(text)?;
        Self::from_spec(&spec)
    }

    pub fn to_spec(&self) -> TreeSpec {
        self.spec_at(self.root())
    }

    fn spec_at(&self, id: NodeId) -> TreeSpec {
        match &self.nodes[id.0] {
            Node::Leaf { mean, .. } => TreeSpec::Leaf { mean: *mean },
            Node::Internal { kind, children, .. } => TreeSpec::Internal {
                kind: *kind,
                children: children.iter().map(|&c| self.spec_at(c)).collect(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_spec()).expect("tree spec serializes")
    }

    /// A MAX root directly over one leaf per mean (a plain bandit).
    pub fn depth_one(means: &[f64]) -> Result<Self, TreeError> {
        Self::from_spec(&TreeSpec::Internal {
            kind: NodeKind::Max,
            children: means.iter().map(|&mean| TreeSpec::Leaf { mean }).collect(),
        })
    }

    /// A MAX root over MIN nodes, one per row of `rows`.
    pub fn depth_two(rows: &[Vec<f64>]) -> Result<Self, TreeError> {
        Self::from_spec(&TreeSpec::Internal {
            kind: NodeKind::Max,
            children: rows
                .iter()
                .map(|row| TreeSpec::Internal {
                    kind: NodeKind::Min,
                    children: row.iter().map(|&mean| TreeSpec::Leaf { mean }).collect(),
                })
                .collect(),
        })
    }

    /// Full `branching`-ary tree of the given depth with MAX/MIN levels
    /// alternating from a MAX root. `means` fills the leaves in enumeration
    /// order and must hold exactly `branching^depth` values.
    pub fn uniform(branching: usize, depth: usize, means: &[f64]) -> Result<Self, TreeError> {
        if branching == 0 || depth == 0 {
            return Err(TreeError::InvalidShape("branching and depth must be positive".into()));
        }
        let expected = branching
            .checked_pow(depth as u32)
            .ok_or_else(|| TreeError::InvalidShape("tree too large".into()))?;
        if means.len() != expected {
            return Err(TreeError::InvalidShape(format!(
                "expected {expected} leaf means, got {}",
                means.len()
            )));
        }
        fn build(b: usize, level: usize, depth: usize, means: &mut std::slice::Iter<'_, f64>) -> TreeSpec {
            if level == depth {
                return TreeSpec::Leaf {
                    mean: *means.next().expect("mean count checked"),
                };
            }
            let kind = if level.is_multiple_of(2) {
                NodeKind::Max
            } else {
                NodeKind::Min
            };
            TreeSpec::Internal {
                kind,
                children: (0..b).map(|_| build(b, level + 1, depth, means)).collect(),
            }
        }
        Self::from_spec(&build(branching, 0, depth, &mut means.iter()))
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn kind(&self, id: NodeId) -> Option<NodeKind> {
        match &self.nodes[id.0] {
            Node::Internal { kind, .. } => Some(*kind),
            Node::Leaf { .. } => None,
        }
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        match &self.nodes[id.0] {
            Node::Internal { children, .. } => children,
            Node::Leaf { .. } => &[],
        }
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        match &self.nodes[id.0] {
            Node::Internal { parent, .. } => *parent,
            Node::Leaf { parent, .. } => Some(*parent),
        }
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        matches!(self.nodes[id.0], Node::Leaf { .. })
    }

    /// Depth-one nodes, i.e. the actions available at the root.
    pub fn root_actions(&self) -> &[NodeId] {
        self.children(self.root())
    }

    /// Canonical leaf enumeration.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    /// Position of `id` in the leaf enumeration, if it is a leaf.
    pub fn leaf_index(&self, id: NodeId) -> Option<usize> {
        self.leaf_slot[id.0]
    }

    pub fn mean(&self, id: NodeId) -> Option<f64> {
        match &self.nodes[id.0] {
            Node::Leaf { mean, .. } => Some(*mean),
            Node::Internal { .. } => None,
        }
    }

    pub fn leaf_means(&self) -> Vec<f64> {
        self.leaves.iter().map(|&l| self.mean(l).expect("leaf")).collect()
    }

    pub fn depth(&self, id: NodeId) -> usize {
        self.depth[id.0]
    }

    pub fn max_depth(&self) -> usize {
        self.leaves.iter().map(|l| self.depth[l.0]).max().unwrap_or(0)
    }

    /// The depth-one ancestor of `id` (itself when `id` is at depth one).
    pub fn depth_one_ancestor(&self, id: NodeId) -> Option<NodeId> {
        self.top[id.0]
    }

    /// Ancestors of `id` from its parent up to the root.
    pub fn ancestors(&self, id: NodeId) -> Ancestors<'_> {
        Ancestors {
            tree: self,
            next: self.parent(id),
        }
    }
}

pub struct Ancestors<'a> {
    tree: &'a GameTree,
    next: Option<NodeId>,
}

impl Iterator for Ancestors<'_> {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        let cur = self.next?;
        self.next = self.tree.parent(cur);
        Some(cur)
    }
}

/// Exact values and gaps induced by the true leaf means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeAnalysis {
    pub values: Vec<f64>,
    pub best_root_action: NodeId,
    /// `None` when the root has a single action.
    pub second_best_root_action: Option<NodeId>,
    pub root_gap: f64,
    /// Indexed by leaf enumeration.
    pub leaf_gaps: Vec<f64>,
    /// Like `leaf_gaps` but ignoring the gap between the root and the
    /// depth-one ancestor.
    pub leaf_gaps_tilde: Vec<f64>,
    /// Two root actions tie for the best value; `best_root_action` is then
    /// the lowest-index one and `root_gap` is zero.
    pub ambiguous_best_action: bool,
}

impl TreeAnalysis {
    pub fn value(&self, id: NodeId) -> f64 {
        self.values[id.0]
    }

    pub fn root_value(&self) -> f64 {
        self.values[0]
    }

    /// Whether recommending `action` is within `epsilon` of optimal.
    pub fn is_epsilon_good(&self, action: NodeId, epsilon: f64) -> bool {
        self.root_value() - self.value(action) <= epsilon + TIE_TOLERANCE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplexityVariant {
    Standard,
    Tilde,
}

/// Bottom-up minimax evaluation plus root and leaf gaps.
pub fn evaluate_tree(tree: &GameTree) -> TreeAnalysis {
    let n = tree.len();
    let mut values = vec![0.0; n];
    for i in (0..n).rev() {
        values[i] = match tree.node(NodeId(i)) {
            Node::Leaf { mean, .. } => *mean,
            Node::Internal { kind, children, .. } => {
                let it = children.iter().map(|c| values[c.0]);
                match kind {
                    NodeKind::Max => it.fold(f64::NEG_INFINITY, f64::max),
                    NodeKind::Min => it.fold(f64::INFINITY, f64::min),
                }
            }
        };
    }

    let actions = tree.root_actions();
    let mut best = actions[0];
    for &a in &actions[1..] {
        if values[a.0] > values[best.0] {
            best = a;
        }
    }
    let second = actions
        .iter()
        .copied()
        .filter(|&a| a != best)
        .fold(None, |acc: Option<NodeId>, a| match acc {
            Some(s) if values[s.0] >= values[a.0] => Some(s),
            _ => Some(a),
        });
    let (root_gap, ambiguous) = match second {
        Some(s) => {
            let gap = values[best.0] - values[s.0];
            if gap <= TIE_TOLERANCE {
                (0.0, true)
            } else {
                (gap, false)
            }
        }
        None => (0.0, false),
    };

    // Running maxima of consecutive-ancestor gaps along each root-to-node path.
    let mut path_gap = vec![0.0_f64; n];
    let mut path_gap_tilde = vec![0.0_f64; n];
    for i in 1..n {
        let id = NodeId(i);
        let p = tree.parent(id).expect("non-root has a parent");
        let gap = (values[i] - values[p.0]).abs();
        path_gap[i] = path_gap[p.0].max(gap);
        path_gap_tilde[i] = if tree.depth(id) == 1 {
            0.0
        } else {
            path_gap_tilde[p.0].max(gap)
        };
    }

    TreeAnalysis {
        leaf_gaps: tree.leaves().iter().map(|l| path_gap[l.0]).collect(),
        leaf_gaps_tilde: tree.leaves().iter().map(|l| path_gap_tilde[l.0]).collect(),
        values,
        best_root_action: best,
        second_best_root_action: second,
        root_gap,
        ambiguous_best_action: ambiguous,
    }
}

/// Effective squared gap of each leaf: `gap² ∨ Δ*² ∨ ε²`.
pub fn effective_sq_gaps(analysis: &TreeAnalysis, epsilon: f64, variant: ComplexityVariant) -> Vec<f64> {
    let gaps = match variant {
        ComplexityVariant::Standard => &analysis.leaf_gaps,
        ComplexityVariant::Tilde => &analysis.leaf_gaps_tilde,
    };
    let floor = (analysis.root_gap * analysis.root_gap).max(epsilon * epsilon);
    gaps.iter().map(|g| (g * g).max(floor)).collect()
}

/// Sum over leaves of the inverse effective squared gap.
pub fn complexity_term(analysis: &TreeAnalysis, epsilon: f64, variant: ComplexityVariant) -> Result<f64, TreeError> {
    let mut total = 0.0;
    for d in effective_sq_gaps(analysis, epsilon, variant) {
        if d <= 0.0 {
            return Err(TreeError::InfiniteComplexity);
        }
        total += 1.0 / d;
    }
    Ok(total)
}
