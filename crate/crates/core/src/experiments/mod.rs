//! Trajectory and ensemble runners plus the statistical verification suite.
//!
//! Everything in here is deterministic: a trajectory is a pure function of
//! its config (including the [`StreamKey`]), and ensemble reductions fold
//! fixed-size trajectory batches in index order, so results are bitwise
//! identical regardless of thread count.

mod condensation;
mod ensemble;
mod trajectory;
mod verify;

pub use condensation::{condensation_time_study, CondensationRow, CondensationStudy, GridPoint};
pub use ensemble::{
    estimate_win_probabilities, run_ensemble, EnsembleSummary, SeriesPoint, WinProbabilityReport,
    WinProbabilityRow,
};
pub use trajectory::run_trajectory;
pub use verify::{
    verify_increment_bound, verify_martingale, verify_stake_summability, IncrementReport,
    IncrementStepStat, MartingaleCell, MartingaleCheckpoint, MartingaleReport, SummabilityReport,
};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::MetricsSnapshot;
use crate::model::{ModelParams, WealthState};
use crate::sampling::StreamKey;

/// How a trajectory starts: an equal split or an explicit raw wealth vector
/// (normalized on materialization).
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Uniform,
    Explicit(Vec<f64>),
}

impl InitialState {
    pub fn materialize(&self, n_agents: usize) -> Result<WealthState> {
        match self {
            Self::Uniform => WealthState::uniform(n_agents),
            Self::Explicit(raw) => {
                if raw.len() != n_agents {
                    return Err(Error::InitialLengthMismatch {
                        got: raw.len(),
                        expected: n_agents,
                    });
                }
                WealthState::new(raw)
            }
        }
    }
}

/// Full specification of one trajectory run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    pub params: ModelParams,
    pub initial: InitialState,
    /// Hard safety stop; hitting it is reported via [`StopReason::MaxSteps`],
    /// never silently truncated.
    pub max_steps: u64,
    /// Stop once `max_wealth >= 1 - epsilon`. Must be unset (or loose enough)
    /// under taxation, whose floor makes tight thresholds unreachable.
    pub condensation_epsilon: Option<f64>,
    pub record_every: u64,
    pub key: StreamKey,
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::ZeroMaxSteps);
        }
        if self.record_every == 0 {
            return Err(Error::ZeroRecordEvery);
        }
        if let InitialState::Explicit(raw) = &self.initial {
            if raw.len() != self.params.n_agents() {
                return Err(Error::InitialLengthMismatch {
                    got: raw.len(),
                    expected: self.params.n_agents(),
                });
            }
        }
        if let Some(epsilon) = self.condensation_epsilon {
            if !epsilon.is_finite() || epsilon <= 0.0 || epsilon >= 1.0 {
                return Err(Error::EpsilonOutOfRange(epsilon));
            }
            if let Some(chi) = self.params.tax_chi() {
                // Post-tax each of the N-1 other agents holds at least chi/N,
                // capping the maximum at 1 - chi*(N-1)/N.
                let n = self.params.n_agents() as f64;
                let min_epsilon = chi * (n - 1.0) / n;
                if epsilon < min_epsilon {
                    return Err(Error::UnreachableCondensation {
                        epsilon,
                        min_epsilon,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Why a trajectory stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Condensed,
    MaxSteps,
}

/// Output of one trajectory run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    /// Metrics at steps {0, r, 2r, ..., stop}.
    pub snapshots: Vec<MetricsSnapshot>,
    pub stop_reason: StopReason,
    pub condensation_step: Option<u64>,
    /// Sum of squared stakes over every executed step, regardless of the
    /// recording cadence.
    pub cumulative_stake_sq: f64,
    /// Argmax agent at the stopping time; only set when condensed.
    pub winner: Option<usize>,
}

/// Sample mean with a 3-sigma confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCi {
    pub mean: f64,
    pub std_dev: f64,
    pub n: u64,
    pub half_width_3sigma: f64,
}

impl MeanCi {
    pub fn from_sums(sum: f64, sum_sq: f64, n: u64) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 {
            ((sum_sq - sum * sum / nf) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        let std_dev = var.sqrt();
        Self {
            mean,
            std_dev,
            n,
            half_width_3sigma: 3.0 * std_dev / nf.sqrt(),
        }
    }

    /// Standardized distance of the mean from `target`.
    pub fn z_against(&self, target: f64) -> f64 {
        let se = self.std_dev / (self.n as f64).sqrt();
        let deviation = self.mean - target;
        if se == 0.0 {
            // A zero-variance sample (e.g. the first step out of a uniform
            // state, where every trajectory is still identical) either sits
            // on the target up to accumulated rounding or is
            // deterministically off it.
            if deviation.abs() <= 1e-12 {
                0.0
            } else {
                f64::INFINITY * deviation.signum()
            }
        } else {
            deviation / se
        }
    }
}

/// Trajectories per parallel work item. Fixed so the reduction tree does not
/// depend on the thread count.
pub(crate) const TRAJECTORY_BATCH: u64 = 64;

/// Runs `per(acc, k)` for every trajectory index `0..n`, batched across the
/// rayon pool, then merges batch accumulators in index order. The float
/// reduction order is therefore a function of `n` alone.
pub(crate) fn fold_trajectories<A, Mk, Per, Mrg>(n: u64, make: Mk, per: Per, merge: Mrg) -> Result<A>
where
    A: Send,
    Mk: Fn() -> A + Sync,
    Per: Fn(&mut A, u64) -> Result<()> + Sync,
    Mrg: Fn(A, A) -> A,
{
    let ranges: Vec<(u64, u64)> = (0..n)
        .step_by(TRAJECTORY_BATCH as usize)
        .map(|lo| (lo, (lo + TRAJECTORY_BATCH).min(n)))
        .collect();
    let partials: Vec<A> = ranges
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut acc = make();
            for k in lo..hi {
                per(&mut acc, k)?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<A>>>()?;
    let mut iter = partials.into_iter();
    let first = iter.next().ok_or(Error::ZeroTrajectories)?;
    Ok(iter.fold(first, merge))
}

pub(crate) fn argmax(wealth: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in wealth.iter().enumerate() {
        if x > wealth[best] {
            best = i;
        }
    }
    best
}
