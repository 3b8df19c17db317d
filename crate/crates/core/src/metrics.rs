//! Concentration and inequality functionals on wealth states, plus the
//! closed-form one-step expectation of the squared-norm increment that the
//! verification experiments check against simulation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::WealthState;

pub(crate) fn norm_sq_slice(wealth: &[f64]) -> f64 {
    wealth.iter().map(|x| x * x).sum()
}

pub(crate) fn max_wealth_slice(wealth: &[f64]) -> f64 {
    wealth.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x))
}

pub(crate) fn total_slice(wealth: &[f64]) -> f64 {
    wealth.iter().sum()
}

/// Squared Euclidean norm of the wealth vector, the concentration measure:
/// 1/N at perfect equality, 1 at full condensation.
pub fn norm_sq(state: &WealthState) -> f64 {
    norm_sq_slice(state.wealth())
}

/// Largest single wealth share.
pub fn max_wealth(state: &WealthState) -> f64 {
    max_wealth_slice(state.wealth())
}

/// Inverse participation ratio `1 / norm_sq`: an effective count of agents
/// holding the wealth (N at equality, 1 at condensation).
pub fn inverse_participation_ratio(state: &WealthState) -> f64 {
    1.0 / norm_sq(state)
}

pub(crate) fn gini_slice(wealth: &[f64]) -> f64 {
    let n = wealth.len();
    if n <= 1 {
        return 0.0;
    }
    let mut sorted = wealth.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let total = total_slice(&sorted);
    if total <= 0.0 {
        return 0.0;
    }
    // Sum of pairwise differences via sorted gaps: the gap between ranks k and
    // k+1 is crossed by k*(N-k) ordered-as-sorted pairs. Exactly zero for a
    // uniform state, where every gap vanishes.
    let mut pairwise = 0.0;
    for k in 1..n {
        pairwise += (k as f64) * ((n - k) as f64) * (sorted[k] - sorted[k - 1]);
    }
    pairwise / (n as f64 * total)
}

/// Gini index `G = sum_ij |x_i - x_j| / (2 N sum_k x_k)`, computed in
/// O(N log N) from the sorted state. 0 at perfect equality, (N-1)/N at full
/// condensation.
pub fn gini(state: &WealthState) -> f64 {
    gini_slice(state.wealth())
}

pub(crate) fn expected_norm_increment_stake(
    wealth_poorer: f64,
    wealth_richer: f64,
    stake: f64,
    delta: f64,
) -> f64 {
    2.0 * stake * stake + 4.0 * delta * stake * (wealth_richer - wealth_poorer)
}

/// Conditional expectation of the one-step change in `norm_sq` for the plain
/// model, given resolved roles and the stake fraction:
/// `2*w^2 + 4*delta*w*(x_richer - x_poorer)` with `w = fraction * x_poorer`.
/// Always at least `2*w^2`.
pub fn expected_norm_increment(
    state: &WealthState,
    poorer: usize,
    richer: usize,
    fraction: f64,
    delta: f64,
) -> Result<f64> {
    let wealth = state.wealth();
    let n = wealth.len();
    if poorer >= n {
        return Err(Error::IndexOutOfRange {
            index: poorer,
            n_agents: n,
        });
    }
    if richer >= n {
        return Err(Error::IndexOutOfRange {
            index: richer,
            n_agents: n,
        });
    }
    if poorer == richer {
        return Err(Error::IdenticalAgents(poorer));
    }
    if !fraction.is_finite() || fraction <= 0.0 || fraction >= 1.0 {
        return Err(Error::FractionOutOfRange(fraction));
    }
    if !delta.is_finite() || !(0.0..0.5).contains(&delta) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    if wealth[poorer] > wealth[richer] {
        return Err(Error::RoleOrderViolated {
            poorer: wealth[poorer],
            richer: wealth[richer],
        });
    }
    let stake = fraction * wealth[poorer];
    Ok(expected_norm_increment_stake(
        wealth[poorer],
        wealth[richer],
        stake,
        delta,
    ))
}

/// Per-step metrics row recorded along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsSnapshot {
    pub step: u64,
    pub max_wealth: f64,
    pub norm_sq: f64,
    pub ipr: f64,
    pub gini: f64,
    /// Full-precision single-pass total; conservation check, not a correction.
    pub total: f64,
    /// Stake of the step that produced this state (0 at step 0).
    pub last_stake: f64,
}

impl MetricsSnapshot {
    pub fn capture(step: u64, state: &WealthState, last_stake: f64) -> Self {
        Self::capture_slice(step, state.wealth(), last_stake)
    }

    pub(crate) fn capture_slice(step: u64, wealth: &[f64], last_stake: f64) -> Self {
        let norm_sq = norm_sq_slice(wealth);
        Self {
            step,
            max_wealth: max_wealth_slice(wealth),
            norm_sq,
            ipr: 1.0 / norm_sq,
            gini: gini_slice(wealth),
            total: total_slice(wealth),
            last_stake,
        }
    }
}
