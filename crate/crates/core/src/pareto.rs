//! Pareto fronts over (reward, cost) pairs.
//!
//! Plans are compared on two axes at once: a lower-confidence-bound reward
//! that should be large, and an accumulated cost that should be small. Cost is
//! stored negated so "bigger is better" holds for both coordinates and
//! dominance reads uniformly. A front is the set of mutually incomparable
//! vectors left after discarding everything dominated, kept in canonical order
//! (ascending reward) and capped to a configurable size.

use serde::{Deserialize, Serialize};

use crate::error::{CastError, Result};

/// Guard against division by a vanishing cost when ranking by reward rate.
pub const RATIO_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardCostVector {
    pub r_lcb: f64,
    /// Negated accumulated cost; always ≤ 0 for real plans.
    pub neg_cost: f64,
}

impl RewardCostVector {
    pub fn new(r_lcb: f64, neg_cost: f64) -> Self {
        RewardCostVector { r_lcb, neg_cost }
    }

    pub fn from_reward_and_cost(r_lcb: f64, cost: f64) -> Self {
        RewardCostVector { r_lcb, neg_cost: -cost }
    }

    pub fn cost(&self) -> f64 {
        -self.neg_cost
    }

    /// Reward per unit cost, guarded for near-zero cost.
    pub fn reward_rate(&self) -> f64 {
        self.r_lcb / self.cost().max(RATIO_EPSILON)
    }

    /// True when `self` is at least as good on both axes and strictly better
    /// on at least one.
    pub fn dominates(&self, other: &RewardCostVector) -> bool {
        self.r_lcb >= other.r_lcb
            && self.neg_cost >= other.neg_cost
            && (self.r_lcb > other.r_lcb || self.neg_cost > other.neg_cost)
    }

    pub fn is_finite(&self) -> bool {
        self.r_lcb.is_finite() && self.neg_cost.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    vectors: Vec<RewardCostVector>,
}

impl ParetoFront {
    pub fn singleton(v: RewardCostVector) -> Self {
        ParetoFront { vectors: vec![v] }
    }

    pub fn vectors(&self) -> &[RewardCostVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// The member with the highest guarded reward-per-cost ratio.
    pub fn best_by_reward_rate(&self) -> RewardCostVector {
        *self
            .vectors
            .iter()
            .max_by(|a, b| a.reward_rate().total_cmp(&b.reward_rate()))
            .expect("fronts are never empty")
    }
}

/// Indices of the non-dominated members of `vectors`, in canonical order
/// (ascending `r_lcb`). Exact duplicates keep the lowest index.
pub fn pareto_filter_indices(vectors: &[RewardCostVector]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    order.sort_by(|&a, &b| {
        vectors[b]
            .r_lcb
            .total_cmp(&vectors[a].r_lcb)
            .then(vectors[b].neg_cost.total_cmp(&vectors[a].neg_cost))
            .then(a.cmp(&b))
    });

    // One sweep in reward-descending order: a vector survives iff its
    // neg_cost strictly improves on everything with reward at least as large.
    let mut kept = Vec::new();
    let mut best_neg_cost = f64::NEG_INFINITY;
    let mut last_kept: Option<(f64, f64)> = None;
    for &i in &order {
        let v = vectors[i];
        if last_kept == Some((v.r_lcb, v.neg_cost)) {
            continue;
        }
        if v.neg_cost > best_neg_cost {
            kept.push(i);
            best_neg_cost = v.neg_cost;
            last_kept = Some((v.r_lcb, v.neg_cost));
        }
    }
    kept.reverse();
    kept
}

/// Reduce a set of vectors to its Pareto front, capped to `cap` members.
///
/// When the front is larger than `cap`, the members with the highest
/// reward-per-cost ratio are kept. The result is in canonical order.
pub fn pareto_filter(vectors: &[RewardCostVector], cap: usize) -> Result<ParetoFront> {
    if vectors.is_empty() {
        return Err(CastError::InvalidInput(
            "cannot build a Pareto front from no vectors".into(),
        ));
    }
    if cap == 0 {
        return Err(CastError::InvalidInput("front cap must be at least 1".into()));
    }
    if let Some(bad) = vectors.iter().find(|v| !v.is_finite()) {
        return Err(CastError::Numerical(format!(
            "non-finite vector ({}, {}) reached the Pareto filter",
            bad.r_lcb, bad.neg_cost
        )));
    }

    let mut front: Vec<RewardCostVector> = pareto_filter_indices(vectors)
        .into_iter()
        .map(|i| vectors[i])
        .collect();

    if front.len() > cap {
        front.sort_by(|a, b| b.reward_rate().total_cmp(&a.reward_rate()));
        front.truncate(cap);
        front.sort_by(|a, b| a.r_lcb.total_cmp(&b.r_lcb));
    }
    Ok(ParetoFront { vectors: front })
}

/// Pull a continuation front back across an edge: each member v becomes
/// `(imm.r + γ·v.r, imm.neg_cost + v.neg_cost)`, then the result is
/// re-filtered. Costs accumulate undiscounted; only reward is discounted.
pub fn discount_shift(
    front: &ParetoFront,
    immediate: RewardCostVector,
    gamma: f64,
    cap: usize,
) -> Result<ParetoFront> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(CastError::InvalidInput(format!(
            "discount factor must be in (0, 1], got {gamma}"
        )));
    }
    let shifted: Vec<RewardCostVector> = front
        .vectors
        .iter()
        .map(|v| RewardCostVector {
            r_lcb: immediate.r_lcb + gamma * v.r_lcb,
            neg_cost: immediate.neg_cost + v.neg_cost,
        })
        .collect();
    pareto_filter(&shifted, cap)
}

/// Weighted Minkowski average of several fronts.
///
/// Weights are normalized to sum to one, each front's vectors are scaled by
/// its weight, and the scaled fronts are summed pairwise with a Pareto filter
/// after every fold step. Intermediate filtering is exact: a dominated partial
/// sum can only produce dominated totals.
pub fn weighted_combine(fronts: &[&ParetoFront], weights: &[f64], cap: usize) -> Result<ParetoFront> {
    if fronts.is_empty() {
        return Err(CastError::InvalidInput("no fronts to combine".into()));
    }
    if fronts.len() != weights.len() {
        return Err(CastError::InvalidInput(format!(
            "{} fronts but {} weights",
            fronts.len(),
            weights.len()
        )));
    }
    if fronts.iter().any(|f| f.is_empty()) {
        return Err(CastError::InvalidInput("cannot combine an empty front".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(CastError::InvalidInput(
            "weights must be nonnegative with a positive sum".into(),
        ));
    }

    let scale = |front: &ParetoFront, w: f64| -> Vec<RewardCostVector> {
        front
            .vectors
            .iter()
            .map(|v| RewardCostVector { r_lcb: w * v.r_lcb, neg_cost: w * v.neg_cost })
            .collect()
    };

    let mut acc = scale(fronts[0], weights[0] / total);
    acc = pareto_filter(&acc, cap)?.vectors;
    for (front, &w) in fronts.iter().zip(weights).skip(1) {
        let scaled = scale(front, w / total);
        let mut sums = Vec::with_capacity(acc.len() * scaled.len());
        for a in &acc {
            for b in &scaled {
                sums.push(RewardCostVector {
                    r_lcb: a.r_lcb + b.r_lcb,
                    neg_cost: a.neg_cost + b.neg_cost,
                });
            }
        }
        acc = pareto_filter(&sums, cap)?.vectors;
    }
    Ok(ParetoFront { vectors: acc })
}
