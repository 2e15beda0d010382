//! Leaf confidence intervals, exploration rates and their propagation
//! through MAX/MIN nodes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::binary_kl;
use crate::tree::{GameTree, Node, NodeId, NodeKind};

/// Absolute tolerance of the KL bound inversion.
pub const KL_TOLERANCE: f64 = 1e-9;
/// Iteration cap of the KL bound inversion.
pub const KL_MAX_ITERATIONS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum ConfidenceError {
    #[error("exploration rate {variant:?} is undefined for {leaf_count} leaves and delta = {delta}: {reason}")]
    InvalidRegime {
        variant: RateVariant,
        leaf_count: usize,
        delta: f64,
        reason: &'static str,
    },
    #[error("node {0} is not an internal node")]
    NotInternal(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateVariant {
    /// `ln(|L|/δ) + 3 ln ln(|L|/δ) + (3/2) ln(ln s + 1)`, valid with a union
    /// bound over leaves.
    Theoretical,
    /// `ln(ln(e s) / δ)`.
    Practical,
    /// `ln(|L|/δ) + ln(ln s + 1)`.
    Experiments,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiFamily {
    Hoeffding,
    Kl,
}

/// Which count feeds the exploration rate of a leaf interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateClock {
    /// The leaf's own pull count; only ancestors of a pulled leaf change.
    PerLeaf,
    /// The global round counter; every interval changes every round.
    Global,
}

/// Threshold function β(s, δ) sizing the leaf confidence intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationRate {
    variant: RateVariant,
    leaf_count: usize,
    delta: f64,
}

impl ExplorationRate {
    pub fn new(variant: RateVariant, leaf_count: usize, delta: f64) -> Result<Self, ConfidenceError> {
        let fail = |reason| ConfidenceError::InvalidRegime {
            variant,
            leaf_count,
            delta,
            reason,
        };
        if leaf_count == 0 {
            return Err(fail("the tree has no leaves"));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(fail("delta must be positive and finite"));
        }
        if delta > (0.1 * leaf_count as f64).max(1.0) + 1e-12 {
            return Err(fail("delta exceeds max(0.1 |L|, 1)"));
        }
        let ratio = leaf_count as f64 / delta;
        if variant == RateVariant::Theoretical && ratio < std::f64::consts::E {
            return Err(fail("|L|/delta must be at least e"));
        }
        let rate = ExplorationRate {
            variant,
            leaf_count,
            delta,
        };
        if rate.beta(1) <= 0.0 {
            return Err(fail("beta(1, delta) is not positive"));
        }
        if delta >= 1.0 {
            log::warn!(
                "delta = {delta} >= 1; only delta/|L| = {} matters for the rate",
                1.0 / ratio
            );
        }
        Ok(rate)
    }

    pub fn variant(&self) -> RateVariant {
        self.variant
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// β(s, δ) for a count `s ≥ 1`.
    pub fn beta(&self, s: u64) -> f64 {
        debug_assert!(s >= 1, "beta is defined for s >= 1");
        let s = s.max(1) as f64;
        let log_ratio = (self.leaf_count as f64 / self.delta).ln();
        match self.variant {
            RateVariant::Theoretical => log_ratio + 3.0 * log_ratio.ln() + 1.5 * (s.ln() + 1.0).ln(),
            RateVariant::Practical => ((std::f64::consts::E * s).ln() / self.delta).ln(),
            RateVariant::Experiments => log_ratio + (s.ln() + 1.0).ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub const UNIT: Interval = Interval { lower: 0.0, upper: 1.0 };

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn is_within(&self, outer: &Interval) -> bool {
        outer.lower <= self.lower && self.upper <= outer.upper
    }
}

/// Largest `q ≥ mean` with `d(mean, q) ≤ level`.
pub fn kl_upper_bound(mean: f64, level: f64) -> f64 {
    if mean >= 1.0 {
        return 1.0;
    }
    if mean <= 0.0 {
        return 1.0 - (-level).exp();
    }
    let (mut lo, mut hi) = (mean, 1.0);
    for _ in 0..KL_MAX_ITERATIONS {
        if hi - lo <= KL_TOLERANCE {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if binary_kl(mean, mid) <= level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Smallest `q ≤ mean` with `d(mean, q) ≤ level`.
pub fn kl_lower_bound(mean: f64, level: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    if mean >= 1.0 {
        return (-level).exp();
    }
    let (mut lo, mut hi) = (0.0, mean);
    for _ in 0..KL_MAX_ITERATIONS {
        if hi - lo <= KL_TOLERANCE {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if binary_kl(mean, mid) <= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Confidence interval of a leaf pulled `pulls` times with empirical mean
/// `mean`, at threshold `beta`.
pub fn leaf_interval(pulls: u64, mean: f64, beta: f64, family: CiFamily) -> Interval {
    if pulls == 0 {
        return Interval::UNIT;
    }
    let n = pulls as f64;
    match family {
        CiFamily::Hoeffding => {
            let radius = (beta / (2.0 * n)).sqrt();
            Interval {
                lower: (mean - radius).clamp(0.0, 1.0),
                upper: (mean + radius).clamp(0.0, 1.0),
            }
        }
        CiFamily::Kl => {
            let level = beta / n;
            Interval {
                lower: kl_lower_bound(mean, level),
                upper: kl_upper_bound(mean, level),
            }
        }
    }
}

/// Mutable per-run statistics: leaf counts and means, node intervals and
/// representative children.
#[derive(Debug, Clone)]
pub struct SearchState<'t> {
    tree: &'t GameTree,
    rate: ExplorationRate,
    family: CiFamily,
    clock: RateClock,
    pulls: Vec<u64>,
    sums: Vec<f64>,
    intervals: Vec<Interval>,
    rep_child: Vec<Option<NodeId>>,
    t: u64,
    nesting_checks: u64,
    nesting_violations: u64,
}

impl<'t> SearchState<'t> {
    pub fn new(tree: &'t GameTree, rate: ExplorationRate, family: CiFamily) -> Self {
        Self::with_clock(tree, rate, family, RateClock::PerLeaf)
    }

    pub fn with_clock(tree: &'t GameTree, rate: ExplorationRate, family: CiFamily, clock: RateClock) -> Self {
        let rep_child = (0..tree.len())
            .map(|i| tree.children(NodeId(i)).first().copied())
            .collect();
        SearchState {
            tree,
            rate,
            family,
            clock,
            pulls: vec![0; tree.leaf_count()],
            sums: vec![0.0; tree.leaf_count()],
            intervals: vec![Interval::UNIT; tree.len()],
            rep_child,
            t: 0,
            nesting_checks: 0,
            nesting_violations: 0,
        }
    }

    pub fn tree(&self) -> &'t GameTree {
        self.tree
    }

    pub fn rate(&self) -> &ExplorationRate {
        &self.rate
    }

    pub fn family(&self) -> CiFamily {
        self.family
    }

    pub fn clock(&self) -> RateClock {
        self.clock
    }

    /// Total number of samples taken so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// Pull counts in leaf enumeration order.
    pub fn pull_counts(&self) -> &[u64] {
        &self.pulls
    }

    pub fn pulls(&self, slot: usize) -> u64 {
        self.pulls[slot]
    }

    /// Empirical mean of the leaf at `slot`, 0 when it is unvisited.
    pub fn empirical_mean(&self, slot: usize) -> f64 {
        match self.pulls[slot] {
            0 => 0.0,
            n => self.sums[slot] / n as f64,
        }
    }

    pub fn interval(&self, node: NodeId) -> Interval {
        self.intervals[node.0]
    }

    pub fn lower(&self, node: NodeId) -> f64 {
        self.intervals[node.0].lower
    }

    pub fn upper(&self, node: NodeId) -> f64 {
        self.intervals[node.0].upper
    }

    pub fn width(&self, node: NodeId) -> f64 {
        self.intervals[node.0].width()
    }

    /// Number of nested-interval checks performed by `representative_leaf`
    /// and how many of them failed.
    pub fn nesting_stats(&self) -> (u64, u64) {
        (self.nesting_checks, self.nesting_violations)
    }

    fn beta_for_slot(&self, slot: usize) -> f64 {
        match self.clock {
            RateClock::PerLeaf => self.rate.beta(self.pulls[slot].max(1)),
            RateClock::Global => self.rate.beta(self.t.max(1)),
        }
    }

    fn refresh_leaf(&mut self, slot: usize) {
        let id = self.tree.leaves()[slot];
        let mean = self.empirical_mean(slot);
        self.intervals[id.0] = leaf_interval(self.pulls[slot], mean, self.beta_for_slot(slot), self.family);
    }

    fn refresh_node(&mut self, id: NodeId) {
        let Node::Internal { kind, children, .. } = self.tree.node(id) else {
            return;
        };
        let mut rep = children[0];
        let first = self.intervals[rep.0];
        let (mut lower, mut upper) = (first.lower, first.upper);
        for &c in &children[1..] {
            let ci = self.intervals[c.0];
            match kind {
                NodeKind::Max => {
                    lower = lower.max(ci.lower);
                    if ci.upper > upper {
                        upper = ci.upper;
                        rep = c;
                    }
                }
                NodeKind::Min => {
                    upper = upper.min(ci.upper);
                    if ci.lower < lower {
                        lower = ci.lower;
                        rep = c;
                    }
                }
            }
        }
        self.intervals[id.0] = Interval { lower, upper };
        self.rep_child[id.0] = Some(rep);
    }

    /// Record a sample from the leaf at `slot` and update every interval it
    /// affects.
    pub fn record(&mut self, slot: usize, reward: f64) {
        self.pulls[slot] += 1;
        self.sums[slot] += reward;
        self.t += 1;
        match self.clock {
            RateClock::PerLeaf => {
                self.refresh_leaf(slot);
                self.propagate(self.tree.leaves()[slot]);
            }
            RateClock::Global => self.recompute_all(),
        }
    }

    /// Record several samples, refreshing intervals once at the end.
    pub fn record_all(&mut self, samples: &[(usize, f64)]) {
        for &(slot, reward) in samples {
            self.pulls[slot] += 1;
            self.sums[slot] += reward;
            self.t += 1;
        }
        match self.clock {
            RateClock::PerLeaf => {
                for &(slot, _) in samples {
                    self.refresh_leaf(slot);
                    self.propagate(self.tree.leaves()[slot]);
                }
            }
            RateClock::Global => self.recompute_all(),
        }
    }

    /// Recompute intervals and representative children along the ancestor
    /// path of `changed_leaf`, whose own interval is already current.
    pub fn propagate(&mut self, changed_leaf: NodeId) {
        let mut next = self.tree.parent(changed_leaf);
        while let Some(id) = next {
            self.refresh_node(id);
            next = self.tree.parent(id);
        }
    }

    /// Full bottom-up recomputation of every interval.
    pub fn recompute_all(&mut self) {
        for slot in 0..self.pulls.len() {
            self.refresh_leaf(slot);
        }
        for i in (0..self.tree.len()).rev() {
            self.refresh_node(NodeId(i));
        }
    }

    /// Optimistic child at MAX nodes (largest upper bound), pessimistic child
    /// at MIN nodes (smallest lower bound); lowest index on ties.
    pub fn representative_child(&self, node: NodeId) -> Result<NodeId, ConfidenceError> {
        self.rep_child[node.0].ok_or(ConfidenceError::NotInternal(node))
    }

    /// Leaf reached by following representative children from `node`.
    ///
    /// Below depth one, each interval on the way down must contain its
    /// parent's; the outcome of every such check is counted.
    pub fn representative_leaf(&mut self, node: NodeId) -> NodeId {
        let mut cur = node;
        while let Some(child) = self.rep_child[cur.0] {
            if cur != self.tree.root() {
                self.nesting_checks += 1;
                if !self.intervals[cur.0].is_within(&self.intervals[child.0]) {
                    self.nesting_violations += 1;
                }
            }
            cur = child;
        }
        cur
    }

    /// Whether every leaf interval contains its true mean.
    pub fn leaves_cover(&self, means: &[f64]) -> bool {
        self.tree
            .leaves()
            .iter()
            .zip(means)
            .all(|(l, &m)| self.intervals[l.0].contains(m))
    }

    /// Whether every node interval contains its true value.
    pub fn nodes_cover(&self, values: &[f64]) -> bool {
        self.intervals.iter().zip(values).all(|(i, &v)| i.contains(v))
    }

    /// Snapshot of all node intervals, indexed by node id.
    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::evaluate_tree;
    use proptest::prelude::*;

    fn rate(variant: RateVariant, leaves: usize, delta: f64) -> ExplorationRate {
        ExplorationRate::new(variant, leaves, delta).unwrap()
    }

    #[test]
    fn beta_values() {
        let b = rate(RateVariant::Experiments, 9, 0.9).beta(1);
        assert!((b - 10f64.ln()).abs() < 1e-12);
        let b = rate(RateVariant::Theoretical, 10, 0.1).beta(1);
        assert!((b - 9.186709063411795).abs() < 1e-12);
        let b = rate(RateVariant::Practical, 4, 0.5).beta(1);
        assert!((b - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn beta_is_nondecreasing() {
        for variant in [
            RateVariant::Theoretical,
            RateVariant::Practical,
            RateVariant::Experiments,
        ] {
            let r = rate(variant, 27, 0.1);
            let mut prev = r.beta(1);
            let mut s = 1u64;
            while s < 1_000_000 {
                s = (s + 1).max(s * 11 / 10);
                let b = r.beta(s);
                assert!(b >= prev, "{variant:?} at {s}");
                assert!(b > 0.0);
                prev = b;
            }
            for s in 1..2000 {
                assert!(r.beta(s + 1) >= r.beta(s));
            }
        }
    }

    #[test]
    fn invalid_regimes() {
        assert!(ExplorationRate::new(RateVariant::Theoretical, 2, 1.0).is_err());
        assert!(ExplorationRate::new(RateVariant::Experiments, 9, 1.5).is_err());
        assert!(ExplorationRate::new(RateVariant::Experiments, 9, 0.0).is_err());
        assert!(ExplorationRate::new(RateVariant::Practical, 30, 3.0).is_err());
        assert!(ExplorationRate::new(RateVariant::Experiments, 27, 0.1 * 27.0).is_ok());
        assert!(ExplorationRate::new(RateVariant::Theoretical, 1000, 0.1).is_ok());
    }

    #[test]
    fn hoeffding_interval() {
        let i = leaf_interval(8, 0.5, 1.0, CiFamily::Hoeffding);
        assert!((i.lower - 0.25).abs() < 1e-15 && (i.upper - 0.75).abs() < 1e-15);
        let clipped = leaf_interval(1, 0.9, 1.0, CiFamily::Hoeffding);
        assert_eq!(clipped.upper, 1.0);
        for f in [CiFamily::Hoeffding, CiFamily::Kl] {
            assert_eq!(leaf_interval(0, 0.3, 5.0, f), Interval::UNIT);
        }
    }

    #[test]
    fn kl_interval_closed_form_at_one() {
        let i = leaf_interval(10, 1.0, 0.5, CiFamily::Kl);
        assert!((i.lower - 0.951_229_424_500_714).abs() < 1e-12);
        assert_eq!(i.upper, 1.0);
        let i = leaf_interval(10, 0.0, 0.5, CiFamily::Kl);
        assert_eq!(i.lower, 0.0);
        assert!((i.upper - (1.0 - (-0.05f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn kl_bounds_solve_the_level_equation() {
        for &(mean, level) in &[(0.3, 0.1), (0.5, 0.01), (0.9, 0.2), (0.05, 0.5)] {
            let u = kl_upper_bound(mean, level);
            let l = kl_lower_bound(mean, level);
            assert!(u < 1.0 && l > 0.0);
            // the returned ends sit just outside the exact roots
            assert!(binary_kl(mean, u) >= level - 1e-12);
            assert!(binary_kl(mean, u - 2e-9) <= level);
            assert!(binary_kl(mean, l) >= level - 1e-12);
            assert!(binary_kl(mean, l + 2e-9) <= level);
        }
    }

    proptest! {
        #[test]
        fn kl_interval_contains_mean_and_shrinks(k in 0u64..200, extra in 1u64..200, beta in 0.05f64..10.0) {
            let n = k + extra;
            let mean = k as f64 / n as f64;
            let small = leaf_interval(n, mean, beta, CiFamily::Kl);
            let large = leaf_interval(2 * n, mean, beta, CiFamily::Kl);
            prop_assert!(small.contains(mean));
            prop_assert!(large.contains(mean));
            prop_assert!(large.is_within(&small));
            let h = leaf_interval(n, mean, beta, CiFamily::Hoeffding);
            prop_assert!(h.contains(mean));
        }
    }

    fn state_with(tree: &GameTree) -> SearchState<'_> {
        SearchState::new(
            tree,
            rate(RateVariant::Experiments, tree.leaf_count(), 0.1),
            CiFamily::Hoeffding,
        )
    }

    fn set_leaf(state: &mut SearchState<'_>, slot: usize, interval: Interval) {
        let id = state.tree.leaves()[slot];
        state.intervals[id.0] = interval;
        state.propagate(id);
    }

    #[test]
    fn propagation_min_and_max() {
        let t = GameTree::depth_two(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let mut s = state_with(&t);
        set_leaf(&mut s, 0, Interval { lower: 0.1, upper: 0.5 });
        set_leaf(&mut s, 1, Interval { lower: 0.2, upper: 0.4 });
        let row = t.root_actions()[0];
        assert_eq!(s.interval(row), Interval { lower: 0.1, upper: 0.4 });
        assert_eq!(s.representative_child(row).unwrap(), t.leaves()[0]);

        let flat = GameTree::depth_one(&[0.5, 0.5]).unwrap();
        let mut s = state_with(&flat);
        set_leaf(&mut s, 0, Interval { lower: 0.1, upper: 0.5 });
        set_leaf(&mut s, 1, Interval { lower: 0.2, upper: 0.4 });
        assert_eq!(s.interval(flat.root()), Interval { lower: 0.2, upper: 0.5 });
        assert_eq!(s.representative_child(flat.root()).unwrap(), flat.leaves()[0]);
        assert!(matches!(
            s.representative_child(flat.leaves()[0]),
            Err(ConfidenceError::NotInternal(_))
        ));
    }

    #[test]
    fn single_child_passes_interval_through() {
        let t = GameTree::depth_two(&[vec![0.5], vec![0.3, 0.4]]).unwrap();
        let mut s = state_with(&t);
        set_leaf(&mut s, 0, Interval { lower: 0.3, upper: 0.6 });
        assert_eq!(s.interval(t.root_actions()[0]), Interval { lower: 0.3, upper: 0.6 });
    }

    #[test]
    fn representative_child_ties_and_order() {
        let t = GameTree::depth_one(&[0.5, 0.5]).unwrap();
        let mut s = state_with(&t);
        set_leaf(&mut s, 0, Interval { lower: 0.1, upper: 0.4 });
        set_leaf(&mut s, 1, Interval { lower: 0.2, upper: 0.4 });
        assert_eq!(s.representative_child(t.root()).unwrap(), t.leaves()[0]);

        let t = GameTree::depth_two(&[vec![0.5, 0.5]]).unwrap();
        let mut s = state_with(&t);
        set_leaf(&mut s, 0, Interval { lower: 0.1, upper: 0.9 });
        set_leaf(&mut s, 1, Interval { lower: 0.2, upper: 0.3 });
        assert_eq!(s.representative_child(t.root_actions()[0]).unwrap(), t.leaves()[0]);
    }

    #[test]
    fn representative_leaf_descends() {
        // MAX root over two MIN nodes; the second MIN node's pessimistic leaf is leaf 3.
        let t = GameTree::depth_two(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let mut s = state_with(&t);
        set_leaf(&mut s, 0, Interval { lower: 0.3, upper: 0.5 });
        set_leaf(
            &mut s,
            1,
            Interval {
                lower: 0.35,
                upper: 0.45,
            },
        );
        set_leaf(&mut s, 2, Interval { lower: 0.6, upper: 0.9 });
        set_leaf(&mut s, 3, Interval { lower: 0.4, upper: 0.8 });
        assert_eq!(s.representative_child(t.root()).unwrap(), t.root_actions()[1]);
        assert_eq!(s.representative_leaf(t.root()), t.leaves()[3]);
        assert_eq!(s.representative_leaf(t.leaves()[2]), t.leaves()[2]);
        assert_eq!(s.nesting_stats(), (1, 0));
    }

    #[test]
    fn initial_state_is_vacuous() {
        let t = GameTree::uniform(3, 2, &[0.5; 9]).unwrap();
        let s = state_with(&t);
        assert!(s.intervals().iter().all(|i| *i == Interval::UNIT));
        assert_eq!(s.t(), 0);
    }

    #[test]
    fn global_clock_refreshes_every_leaf() {
        let t = GameTree::depth_one(&[0.5, 0.5]).unwrap();
        let r = rate(RateVariant::Experiments, 2, 0.2);
        let mut s = SearchState::with_clock(&t, r, CiFamily::Hoeffding, RateClock::Global);
        for _ in 0..20 {
            s.record(0, 1.0);
        }
        s.record(1, 0.0);
        let w0 = s.width(t.leaves()[0]);
        s.record(1, 0.0);
        // leaf 0 was not pulled but its interval widened with the global count
        assert!(s.width(t.leaves()[0]) > w0);
    }

    #[test]
    fn batched_records_match_sequential() {
        let t = GameTree::uniform(2, 2, &[0.2, 0.4, 0.6, 0.8]).unwrap();
        let samples = [(0, 1.0), (3, 0.0), (1, 1.0), (3, 1.0)];
        for clock in [RateClock::PerLeaf, RateClock::Global] {
            let r = rate(RateVariant::Experiments, 4, 0.1);
            let mut one = SearchState::with_clock(&t, r, CiFamily::Kl, clock);
            let mut batch = one.clone();
            for &(slot, x) in &samples {
                one.record(slot, x);
            }
            batch.record_all(&samples);
            assert_eq!(one.intervals(), batch.intervals());
            assert_eq!(one.t(), 4);
        }
    }

    fn arb_tree() -> impl Strategy<Value = GameTree> {
        (2usize..=3, 1usize..=3)
            .prop_flat_map(|(b, d)| {
                let n = b.pow(d as u32);
                (Just(b), Just(d), prop::collection::vec(0.0f64..=1.0, n))
            })
            .prop_map(|(b, d, means)| GameTree::uniform(b, d, &means).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn incremental_equals_full_recompute(
            tree in arb_tree(),
            pulls in prop::collection::vec((0usize..27, 0.0f64..=1.0), 1..200),
            family in prop_oneof![Just(CiFamily::Hoeffding), Just(CiFamily::Kl)],
        ) {
            let r = rate(RateVariant::Experiments, tree.leaf_count(), 0.1);
            let mut inc = SearchState::new(&tree, r, family);
            let truth = evaluate_tree(&tree);
            for (slot, x) in pulls {
                let slot = slot % tree.leaf_count();
                inc.record(slot, x.round());
                let mut full = inc.clone();
                full.recompute_all();
                prop_assert_eq!(inc.intervals(), full.intervals());
                prop_assert_eq!(&inc.rep_child, &full.rep_child);
                for i in inc.intervals() {
                    prop_assert!(0.0 <= i.lower && i.lower <= i.upper && i.upper <= 1.0);
                }
                for &a in tree.root_actions() {
                    inc.representative_leaf(a);
                }
                // coverage propagates whenever all leaves are covered
                if inc.leaves_cover(&tree.leaf_means()) {
                    prop_assert!(inc.nodes_cover(&truth.values));
                }
            }
            prop_assert_eq!(inc.nesting_stats().1, 0);
            prop_assert_eq!(inc.t(), inc.pull_counts().iter().sum::<u64>());
        }
    }
}
