//! Sample-complexity calculators and the depth-two lower bound.
//!
//! The upper bounds evaluate the closed forms for UGapE-MCTS and for the
//! two-leaf LUCB-MCTS variant. `ln ln x` terms with `x ≤ e` are floored at 0
//! throughout, which only loosens the bounds.
//!
//! The lower bound solves, for a depth-two tree whose means are ordered so that
//! row 0 is optimal and every row's smallest entry sits in column 0,
//!
//! ```text
//! max_w  min_{i ≥ 1, a}  w[0][a]·d(μ[0][a], m) + w[i][0]·d(μ[i][0], m)
//! ```
//!
//! over weights supported on row 0 and column 0, where `m` is the
//! `w`-weighted mean of the two entries. The objective is concave; it is
//! maximized by exponentiated-gradient ascent on a supergradient of its
//! logarithm.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{
    complexity_term, effective_sq_gaps, ComplexityVariant, GameTree, NodeKind, TreeAnalysis, TIE_TOLERANCE,
};

#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("argument outside the domain: {0}")]
    DomainError(String),
    #[error("parameters outside the validity regime: {0}")]
    InvalidRegime(String),
    #[error("the bound is infinite: some leaf has zero effective gap")]
    InfiniteBound,
    #[error("upper sandwich end is trivial: C(1 + ln(aC)) <= 3/2")]
    DegenerateRegime,
    #[error("means violate the depth-two ordering: {0}")]
    OrderingViolated(String),
    #[error("tree is not a MAX root over MIN nodes over leaves: {0}")]
    NotDepthTwo(String),
    #[error("solver did not converge after {iterations} iterations (objective {objective})")]
    NonConvergence { iterations: usize, objective: f64 },
}

/// Binary Kullback-Leibler divergence with `0 ln 0 = 0`; infinite when `y`
/// sits on the boundary and differs from `x`.
pub fn binary_kl(x: f64, y: f64) -> f64 {
    let mut d = 0.0;
    if x > 0.0 {
        d += x * (x / y).ln();
    }
    if x < 1.0 {
        d += (1.0 - x) * ((1.0 - x) / (1.0 - y)).ln();
    }
    d.max(0.0)
}

/// Checked binary KL divergence `d(x, y)`.
pub fn kl_div(x: f64, y: f64) -> Result<f64, BoundsError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(BoundsError::DomainError(format!("x = {x} not in [0, 1]")));
    }
    if !(0.0..=1.0).contains(&y) {
        return Err(BoundsError::DomainError(format!("y = {y} not in [0, 1]")));
    }
    if x == y {
        return Ok(0.0);
    }
    if y == 0.0 || y == 1.0 {
        return Err(BoundsError::DomainError(format!("y = {y} on the boundary")));
    }
    Ok(binary_kl(x, y))
}

fn loglog(x: f64) -> f64 {
    if x > E {
        x.ln().ln()
    } else {
        0.0
    }
}

fn check_upper_regime(delta: f64, leaf_count: usize) -> Result<(), BoundsError> {
    if leaf_count == 0 || !(delta > 0.0 && delta <= 1.0_f64.min(0.1 * leaf_count as f64) + 1e-12) {
        return Err(BoundsError::InvalidRegime(format!(
            "need 0 < delta <= min(1, 0.1 |L|), got delta = {delta} with |L| = {leaf_count}"
        )));
    }
    Ok(())
}

/// High-probability bound on the stopping time of UGapE-MCTS with the
/// theoretical exploration rate.
pub fn theorem1_bound(
    analysis: &TreeAnalysis,
    epsilon: f64,
    delta: f64,
    leaf_count: usize,
) -> Result<f64, BoundsError> {
    check_upper_regime(delta, leaf_count)?;
    let sq = effective_sq_gaps(analysis, epsilon, ComplexityVariant::Standard);
    if sq.iter().any(|&d| d <= 0.0) {
        return Err(BoundsError::InfiniteBound);
    }
    let h = complexity_term(analysis, epsilon, ComplexityVariant::Standard).map_err(|_| BoundsError::InfiniteBound)?;
    let ratio = leaf_count as f64 / delta;
    let second_order: f64 = sq.iter().map(|&d| 16.0 / d * loglog(1.0 / d)).sum();
    Ok(8.0 * h * ratio.ln()
        + second_order
        + 8.0 * h * (3.0 * loglog(ratio) + 2.0 * loglog(8.0 * E * ratio.ln() + 24.0 * E * loglog(ratio)))
        + 1.0)
}

/// High-probability bound on the stopping time of the two-leaf LUCB-MCTS
/// variant with the theoretical exploration rate.
pub fn theorem3_bound(
    analysis: &TreeAnalysis,
    epsilon: f64,
    delta: f64,
    leaf_count: usize,
) -> Result<f64, BoundsError> {
    check_upper_regime(delta, leaf_count)?;
    let h = complexity_term(analysis, epsilon, ComplexityVariant::Tilde).map_err(|_| BoundsError::InfiniteBound)?;
    let ratio = leaf_count as f64 / delta;
    let c = ratio.ln() + 3.0 * loglog(ratio);
    Ok(16.0 * h * (c + 2.0 * loglog(16.0 * E * h * c)))
}

/// Bounds on `S = sup{s ≥ 1 : a β(s) ≥ s}` for `β(s) = C + (3/2) ln(1 + ln s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogSandwich {
    pub lower: f64,
    pub upper: f64,
    /// The simplified `aC + 2a ln(1 + ln(aC))` upper bound.
    pub simplified_upper: f64,
}

pub fn invert_loglog(a: f64, c: f64) -> Result<LogLogSandwich, BoundsError> {
    if !(a >= 1.0 && c >= 1.0) {
        return Err(BoundsError::DomainError(format!(
            "need a >= 1 and C >= 1, got a = {a}, C = {c}"
        )));
    }
    let ac = a * c;
    let inner = (1.0 + ac.ln()).ln();
    let r = c * (1.0 + ac.ln());
    if r <= 1.5 {
        return Err(BoundsError::DegenerateRegime);
    }
    Ok(LogLogSandwich {
        lower: ac + 1.5 * a * inner,
        upper: ac + 1.5 * a * inner * r / (r - 1.5),
        simplified_upper: ac + 2.0 * a * inner,
    })
}

/// Leaf means of a MAX root over MIN nodes over leaves, one row per action.
pub fn depth_two_means(tree: &GameTree) -> Result<Vec<Vec<f64>>, BoundsError> {
    tree.root_actions()
        .iter()
        .map(|&a| {
            if tree.kind(a) != Some(NodeKind::Min) {
                return Err(BoundsError::NotDepthTwo(format!("action {a} is not a MIN node")));
            }
            tree.children(a)
                .iter()
                .map(|&l| {
                    tree.mean(l)
                        .ok_or_else(|| BoundsError::NotDepthTwo(format!("node {l} is not a leaf")))
                })
                .collect()
        })
        .collect()
}

/// Checks the ordering hypothesis on `mu` as given: `mu[0][0] > mu[i][0]` and
/// `mu[i][0] < mu[i][j]` for every row `i` and column `j ≥ 1`.
pub fn check_ordering(mu: &[Vec<f64>]) -> Result<(), BoundsError> {
    if mu.len() < 2 || mu.iter().any(|row| row.is_empty()) {
        return Err(BoundsError::OrderingViolated("need at least two non-empty rows".into()));
    }
    for (i, row) in mu.iter().enumerate() {
        if row.iter().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(BoundsError::DomainError(format!("row {i} has a mean outside [0, 1]")));
        }
        if row[1..].iter().any(|&m| m <= row[0] + TIE_TOLERANCE) {
            return Err(BoundsError::OrderingViolated(format!(
                "row {i} minimum is not unique in column 0"
            )));
        }
        if i > 0 && row[0] >= mu[0][0] - TIE_TOLERANCE {
            return Err(BoundsError::OrderingViolated(format!(
                "row {i} is not strictly worse than row 0"
            )));
        }
    }
    Ok(())
}

fn pair_value(mean_best: f64, mean_other: f64, w_best: f64, w_other: f64) -> (f64, f64) {
    let total = w_best + w_other;
    if total <= 0.0 {
        return (0.0, 0.0);
    }
    (
        w_best * binary_kl(mean_best, (w_best * mean_best + w_other * mean_other) / total)
            + w_other * binary_kl(mean_other, (w_best * mean_best + w_other * mean_other) / total),
        (w_best * mean_best + w_other * mean_other) / total,
    )
}

/// Information cost of confusing entry `(0, a)` with row `i`'s minimum under
/// weights `w`. Requires the ordering checked by [`check_ordering`].
pub fn pair_objective(mu: &[Vec<f64>], w: &[Vec<f64>], i: usize, a: usize) -> Result<f64, BoundsError> {
    check_ordering(mu)?;
    if i == 0 || i >= mu.len() || a >= mu[0].len() {
        return Err(BoundsError::DomainError(format!("pair ({i}, {a}) out of range")));
    }
    Ok(pair_value(mu[0][a], mu[i][0], w[0][a], w[i][0]).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Step at iteration `k` is `step / sqrt(k)`.
    pub step: f64,
    /// Stop once the best objective improves by less than `tolerance`
    /// (relative) over this many iterations.
    pub window: usize,
    pub tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 1_000_000,
            step: 0.1,
            window: 10_000,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundSolution {
    /// Characteristic time `T*(μ)`.
    pub t_star: f64,
    /// Optimal sampling proportions, in the caller's row and column order.
    pub weights: Vec<Vec<f64>>,
    /// `1 / T*`.
    pub objective: f64,
    /// `T* · d(δ, 1 − δ)`.
    pub lower_bound_at_delta: f64,
    pub delta: f64,
    pub iterations: usize,
    /// Norm of the supergradient of the log-objective at the last iterate.
    pub final_gradient_norm: f64,
}

/// Reordering applied to bring means into the canonical layout.
struct Canonical {
    rows: Vec<usize>,
    cols: Vec<Vec<usize>>,
    mu: Vec<Vec<f64>>,
}

fn canonicalize(mu: &[Vec<f64>]) -> Result<Canonical, BoundsError> {
    if mu.len() < 2 {
        return Err(BoundsError::OrderingViolated("need at least two rows".into()));
    }
    let mut cols = Vec::with_capacity(mu.len());
    let mut row_min = Vec::with_capacity(mu.len());
    for row in mu {
        if row.is_empty() {
            return Err(BoundsError::OrderingViolated("empty row".into()));
        }
        let argmin = (0..row.len()).fold(0, |m, j| if row[j] < row[m] { j } else { m });
        let mut order = vec![argmin];
        order.extend((0..row.len()).filter(|&j| j != argmin));
        row_min.push(row[argmin]);
        cols.push(order);
    }
    let best = (0..mu.len()).fold(0, |b, i| if row_min[i] > row_min[b] { i } else { b });
    let mut rows = vec![best];
    rows.extend((0..mu.len()).filter(|&i| i != best));
    let canon: Vec<Vec<f64>> = rows
        .iter()
        .map(|&r| cols[r].iter().map(|&c| mu[r][c]).collect())
        .collect();
    check_ordering(&canon)?;
    Ok(Canonical { rows, cols, mu: canon })
}

/// Flattened reduced weights: the first row's entries, then column 0 of
/// every other row.
struct Program<'m> {
    mu: &'m [Vec<f64>],
    width: usize,
}

impl Program<'_> {
    fn len(&self) -> usize {
        self.width + self.mu.len() - 1
    }

    /// Minimum pair value, the minimizing pair's coordinates and their
    /// partial derivatives.
    fn evaluate(&self, x: &[f64]) -> (f64, [(usize, f64); 2]) {
        let mut best = (f64::INFINITY, [(0, 0.0); 2]);
        for i in 1..self.mu.len() {
            let xi = self.width + i - 1;
            for a in 0..self.width {
                let (v, m) = pair_value(self.mu[0][a], self.mu[i][0], x[a], x[xi]);
                if v < best.0 {
                    best = (v, [(a, binary_kl(self.mu[0][a], m)), (xi, binary_kl(self.mu[i][0], m))]);
                }
            }
        }
        best
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.evaluate(x).0
    }
}

/// Characteristic time and optimal weights of a depth-two tree given as a
/// row-per-action mean matrix.
pub fn solve_depth2_lower_bound(mu: &[Vec<f64>], delta: f64) -> Result<LowerBoundSolution, BoundsError> {
    solve_depth2_lower_bound_with(mu, delta, SolverOptions::default())
}

pub fn solve_depth2_lower_bound_with(
    mu: &[Vec<f64>],
    delta: f64,
    options: SolverOptions,
) -> Result<LowerBoundSolution, BoundsError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(BoundsError::DomainError(format!("delta = {delta} not in (0, 1)")));
    }
    let canon = canonicalize(mu)?;
    let program = Program {
        mu: &canon.mu,
        width: canon.mu[0].len(),
    };
    let n = program.len();
    let mut x = vec![1.0 / n as f64; n];
    let mut best_x = x.clone();
    let mut best = 0.0;
    let mut window_start = 0.0;
    let mut grad_norm = 0.0;
    let mut iterations = 0;
    let mut converged = false;

    for k in 1..=options.max_iterations {
        iterations = k;
        let (value, grad) = program.evaluate(&x);
        if value > best {
            best = value;
            best_x.copy_from_slice(&x);
        }
        if k % options.window == 0 {
            if best - window_start < options.tolerance * best && best > 0.0 {
                converged = true;
                break;
            }
            window_start = best;
        }
        if value <= 0.0 {
            break;
        }
        // ascent on ln(value): the supergradient is grad / value
        let eta = options.step / (k as f64).sqrt() / value;
        grad_norm = (grad[0].1 * grad[0].1 + grad[1].1 * grad[1].1).sqrt() / value;
        for &(j, g) in &grad {
            x[j] *= (eta * g).exp();
        }
        let total: f64 = x.iter().sum();
        x.iter_mut().for_each(|v| *v /= total);
    }

    if !converged || best <= 0.0 {
        return Err(BoundsError::NonConvergence {
            iterations,
            objective: best,
        });
    }

    let width = program.width;
    let mut weights: Vec<Vec<f64>> = mu.iter().map(|row| vec![0.0; row.len()]).collect();
    for (ci, &orig_row) in canon.rows.iter().enumerate() {
        let col_order = &canon.cols[orig_row];
        if ci == 0 {
            for (cj, &orig_col) in col_order.iter().enumerate() {
                weights[orig_row][orig_col] = best_x[cj];
            }
        } else {
            weights[orig_row][col_order[0]] = best_x[width + ci - 1];
        }
    }
    let t_star = 1.0 / best;
    Ok(LowerBoundSolution {
        t_star,
        weights,
        objective: best,
        lower_bound_at_delta: t_star * binary_kl(delta, 1.0 - delta),
        delta,
        iterations,
        final_gradient_norm: grad_norm,
    })
}

/// Minimum pair objective at arbitrary weights, in the caller's layout.
/// Weights off the reduced support are ignored.
pub fn min_pair_objective(mu: &[Vec<f64>], w: &[Vec<f64>]) -> Result<f64, BoundsError> {
    let canon = canonicalize(mu)?;
    let width = canon.mu[0].len();
    let mut x = vec![0.0; width + mu.len() - 1];
    for (ci, &orig_row) in canon.rows.iter().enumerate() {
        let col_order = &canon.cols[orig_row];
        if ci == 0 {
            for (cj, &orig_col) in col_order.iter().enumerate() {
                x[cj] = w[orig_row][orig_col];
            }
        } else {
            x[width + ci - 1] = w[orig_row][col_order[0]];
        }
    }
    Ok(Program { mu: &canon.mu, width }.value(&x))
}
