//! Stochastic leaf evaluation with reproducible per-leaf streams.
//!
//! Every leaf owns an independent ChaCha8 stream. The stream for
//! `(master_seed, repetition, leaf_index)` is keyed by the 256-bit seed
//! `master_seed.to_le_bytes() ++ repetition.to_le_bytes() ++ [0; 16]` and the
//! ChaCha stream id `leaf_index`, which makes the mapping injective. Draws from
//! one leaf never advance another leaf's stream, so a run's samples do not
//! depend on the order in which leaves are visited.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{GameTree, NodeId};

/// Stream id reserved for generating random trees from `(seed, repetition)`.
pub const TREE_STREAM: u64 = u64::MAX;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("node {0} is not a leaf")]
    NotALeaf(NodeId),
    #[error("invalid leaf distribution: {0}")]
    InvalidDistribution(String),
    #[error("expected {expected} leaf distributions, got {got}")]
    LeafCountMismatch { expected: usize, got: usize },
}

/// Reward distribution of one leaf, supported on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeafDistribution {
    Bernoulli(f64),
    Beta { alpha: f64, beta: f64 },
}

impl LeafDistribution {
    pub fn mean(&self) -> f64 {
        match *self {
            LeafDistribution::Bernoulli(p) => p,
            LeafDistribution::Beta { alpha, beta } => alpha / (alpha + beta),
        }
    }

    fn validate(&self) -> Result<(), OracleError> {
        match *self {
            LeafDistribution::Bernoulli(p) if (0.0..=1.0).contains(&p) => Ok(()),
            LeafDistribution::Beta { alpha, beta } if alpha > 0.0 && beta > 0.0 => Ok(()),
            other => Err(OracleError::InvalidDistribution(format!("{other:?}"))),
        }
    }
}

enum Sampler {
    Bernoulli(f64),
    Beta(Beta<f64>),
}

impl Sampler {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Sampler::Bernoulli(p) => {
                if rng.gen::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            Sampler::Beta(b) => b.sample(rng),
        }
    }
}

/// Deterministic generator for `(master_seed, repetition, stream)`.
pub fn derive_stream(master_seed: u64, repetition: u64, stream: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&repetition.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(stream);
    rng
}

/// Sample source for every leaf of one tree, confined to a single run.
pub struct LeafOracle {
    slots: Vec<Option<usize>>,
    samplers: Vec<Sampler>,
    streams: Vec<ChaCha8Rng>,
}

impl LeafOracle {
    /// Bernoulli oracles with the tree's leaf means.
    pub fn bernoulli(tree: &GameTree, master_seed: u64, repetition: u64) -> Self {
        let dists: Vec<_> = tree.leaf_means().into_iter().map(LeafDistribution::Bernoulli).collect();
        Self::new(tree, &dists, master_seed, repetition).expect("tree means lie in [0, 1]")
    }

    /// One distribution per leaf, in leaf enumeration order.
    pub fn new(
        tree: &GameTree,
        dists: &[LeafDistribution],
        master_seed: u64,
        repetition: u64,
    ) -> Result<Self, OracleError> {
        if dists.len() != tree.leaf_count() {
            return Err(OracleError::LeafCountMismatch {
                expected: tree.leaf_count(),
                got: dists.len(),
            });
        }
        let mut samplers = Vec::with_capacity(dists.len());
        for d in dists {
            d.validate()?;
            samplers.push(match *d {
                LeafDistribution::Bernoulli(p) => Sampler::Bernoulli(p),
                LeafDistribution::Beta { alpha, beta } => {
                    Sampler::Beta(Beta::new(alpha, beta).map_err(|e| OracleError::InvalidDistribution(e.to_string()))?)
                }
            });
        }
        Ok(LeafOracle {
            slots: (0..tree.len()).map(|i| tree.leaf_index(NodeId(i))).collect(),
            samplers,
            streams: (0..dists.len() as u64)
                .map(|l| derive_stream(master_seed, repetition, l))
                .collect(),
        })
    }

    pub fn draw(&mut self, leaf: NodeId) -> Result<f64, OracleError> {
        let slot = self
            .slots
            .get(leaf.0)
            .copied()
            .flatten()
            .ok_or(OracleError::NotALeaf(leaf))?;
        Ok(self.draw_slot(slot))
    }

    /// Draw by position in the leaf enumeration.
    pub fn draw_slot(&mut self, slot: usize) -> f64 {
        self.samplers[slot].sample(&mut self.streams[slot])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let mut cov = 0.0;
        let mut va = 0.0;
        let mut vb = 0.0;
        for (x, y) in a.iter().zip(b) {
            cov += (x - ma) * (y - mb);
            va += (x - ma).powi(2);
            vb += (y - mb).powi(2);
        }
        cov / (va.sqrt() * vb.sqrt())
    }

    fn bernoulli_half(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let s = Sampler::Bernoulli(0.5);
        (0..n).map(|_| s.sample(rng)).collect()
    }

    #[test]
    fn degenerate_bernoulli() {
        let t = GameTree::depth_one(&[1.0, 0.0]).unwrap();
        let mut o = LeafOracle::bernoulli(&t, 3, 0);
        for _ in 0..1000 {
            assert_eq!(o.draw(t.leaves()[0]).unwrap(), 1.0);
            assert_eq!(o.draw(t.leaves()[1]).unwrap(), 0.0);
        }
    }

    #[test]
    fn fair_coin_mean() {
        let t = GameTree::depth_one(&[0.5, 0.5]).unwrap();
        let mut o = LeafOracle::bernoulli(&t, 11, 4);
        let n = 100_000;
        let mean = (0..n).map(|_| o.draw_slot(0)).sum::<f64>() / n as f64;
        assert!((0.494..=0.506).contains(&mean), "{mean}");
    }

    #[test]
    fn draw_rejects_internal_nodes() {
        let t = GameTree::depth_one(&[0.5, 0.5]).unwrap();
        let mut o = LeafOracle::bernoulli(&t, 0, 0);
        assert!(matches!(o.draw(t.root()), Err(OracleError::NotALeaf(_))));
    }

    #[test]
    fn same_triple_same_samples() {
        let a = bernoulli_half(&mut derive_stream(42, 7, 3), 10);
        let b = bernoulli_half(&mut derive_stream(42, 7, 3), 10);
        assert_eq!(a, b);
    }

    #[test]
    fn interleaving_does_not_matter() {
        let t = GameTree::depth_one(&[0.3, 0.6, 0.9]).unwrap();
        let mut a = LeafOracle::bernoulli(&t, 5, 1);
        let mut b = LeafOracle::bernoulli(&t, 5, 1);
        let seq_a: Vec<f64> = (0..50).map(|_| a.draw_slot(1)).collect();
        let mut seq_b = Vec::new();
        for _ in 0..50 {
            b.draw_slot(0);
            seq_b.push(b.draw_slot(1));
            b.draw_slot(2);
        }
        assert_eq!(seq_a, seq_b);
    }

    #[test]
    fn derived_streams_are_uncorrelated() {
        let n = 10_000;
        let mut streams: Vec<Vec<f64>> = Vec::new();
        for rep in 0..5 {
            streams.push(bernoulli_half(&mut derive_stream(99, rep, 0), n));
        }
        for leaf in 1..6 {
            streams.push(bernoulli_half(&mut derive_stream(99, 0, leaf), n));
        }
        for i in 0..streams.len() {
            for j in i + 1..streams.len() {
                let c = correlation(&streams[i], &streams[j]);
                // four standard errors at n = 10^4
                assert!(c.abs() < 0.04, "streams {i},{j}: corr {c}");
            }
        }
    }

    #[test]
    fn beta_leaves_stay_in_unit_interval() {
        let t = GameTree::depth_one(&[0.5, 0.5]).unwrap();
        let dists = [
            LeafDistribution::Beta { alpha: 2.0, beta: 3.0 },
            LeafDistribution::Bernoulli(0.2),
        ];
        let mut o = LeafOracle::new(&t, &dists, 1, 2).unwrap();
        let n = 50_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = o.draw_slot(0);
            assert!((0.0..=1.0).contains(&x));
            sum += x;
        }
        assert!((sum / n as f64 - 0.4).abs() < 0.01);
        assert!(LeafOracle::new(&t, &dists[..1], 1, 2).is_err());
        assert!(LeafOracle::new(&t, &[LeafDistribution::Bernoulli(1.5); 2], 1, 2).is_err());
    }
}
