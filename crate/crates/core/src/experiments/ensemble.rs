//! Ensemble runner with a deterministic, order-insensitive reduction.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sampling::StreamKey;

use super::{
    fold_trajectories, run_trajectory, MeanCi, TrajectoryConfig, TrajectoryRecord,
};

/// One point of the ensemble-mean `norm_sq` time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub step: u64,
    pub mean_norm_sq: f64,
}

/// Aggregated statistics over an ensemble of trajectories.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub n_trajectories: u64,
    pub master_seed: u64,
    pub delta: f64,
    /// Materialized initial shares (the reference point for the win law).
    pub initial_wealth: Vec<f64>,
    /// Per-agent count of condensed trajectories won; sums to `n_condensed`.
    pub win_counts: Vec<u64>,
    pub n_condensed: u64,
    /// Steps to condensation, over condensed trajectories only.
    pub condensation_step: Option<MeanCi>,
    pub cumulative_stake_sq: MeanCi,
    /// Ensemble mean of `norm_sq` on the recording grid. Trajectories that
    /// stopped early contribute their final recorded value to later steps
    /// (the stopped state is within epsilon of absorbing).
    pub mean_norm_sq_series: Vec<SeriesPoint>,
}

struct EnsembleAccum {
    win_counts: Vec<u64>,
    n_condensed: u64,
    cond_sum: f64,
    cond_sum_sq: f64,
    stake_sum: f64,
    stake_sum_sq: f64,
    /// Sums of norm_sq per grid index, carry-forward applied per record.
    grid: Vec<f64>,
    /// Sum of final norm_sq values of all records seen; the contribution of
    /// this accumulator to any grid index beyond its own length.
    tail: f64,
}

impl EnsembleAccum {
    fn new(n_agents: usize) -> Self {
        Self {
            win_counts: vec![0; n_agents],
            n_condensed: 0,
            cond_sum: 0.0,
            cond_sum_sq: 0.0,
            stake_sum: 0.0,
            stake_sum_sq: 0.0,
            grid: Vec::new(),
            tail: 0.0,
        }
    }

    fn add(&mut self, record: &TrajectoryRecord, record_every: u64) {
        if let Some(winner) = record.winner {
            self.win_counts[winner] += 1;
            self.n_condensed += 1;
            let steps = record.condensation_step.expect("condensed record") as f64;
            self.cond_sum += steps;
            self.cond_sum_sq += steps * steps;
        }
        self.stake_sum += record.cumulative_stake_sq;
        self.stake_sum_sq += record.cumulative_stake_sq * record.cumulative_stake_sq;

        // Aligned snapshots come first; at most the final one sits off-grid.
        let snaps = &record.snapshots;
        let last = snaps.last().expect("at least the step-0 snapshot");
        let n_aligned = if last.step % record_every == 0 {
            snaps.len()
        } else {
            snaps.len() - 1
        };
        if n_aligned > self.grid.len() {
            // Records folded earlier were shorter; they contribute their
            // final value at the new indices.
            self.grid.resize(n_aligned, self.tail);
        }
        for (g, slot) in self.grid.iter_mut().enumerate() {
            *slot += if g < n_aligned {
                snaps[g].norm_sq
            } else {
                last.norm_sq
            };
        }
        self.tail += last.norm_sq;
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.win_counts.iter_mut().zip(&other.win_counts) {
            *a += b;
        }
        self.n_condensed += other.n_condensed;
        self.cond_sum += other.cond_sum;
        self.cond_sum_sq += other.cond_sum_sq;
        self.stake_sum += other.stake_sum;
        self.stake_sum_sq += other.stake_sum_sq;
        if other.grid.len() > self.grid.len() {
            self.grid.resize(other.grid.len(), self.tail);
        }
        for (g, slot) in self.grid.iter_mut().enumerate() {
            *slot += if g < other.grid.len() {
                other.grid[g]
            } else {
                other.tail
            };
        }
        self.tail += other.tail;
        self
    }
}

/// Runs `n_trajectories` independent trajectories, trajectory `k` on the
/// stream `(master_seed, k)`; `template.key` is ignored. The reduction folds
/// fixed-size batches in index order, so the summary is bitwise identical
/// for any degree of parallelism.
pub fn run_ensemble(
    template: &TrajectoryConfig,
    n_trajectories: u64,
    master_seed: u64,
) -> Result<EnsembleSummary> {
    template.validate()?;
    if n_trajectories == 0 {
        return Err(Error::ZeroTrajectories);
    }
    let n_agents = template.params.n_agents();
    let initial = template.initial.materialize(n_agents)?;

    let total = fold_trajectories(
        n_trajectories,
        || EnsembleAccum::new(n_agents),
        |acc, k| {
            let mut config = template.clone();
            config.key = StreamKey::new(master_seed, k);
            let record = run_trajectory(&config)?;
            acc.add(&record, config.record_every);
            Ok(())
        },
        EnsembleAccum::merge,
    )?;

    let condensation_step = if total.n_condensed > 0 {
        Some(MeanCi::from_sums(
            total.cond_sum,
            total.cond_sum_sq,
            total.n_condensed,
        ))
    } else {
        None
    };
    let mean_norm_sq_series = total
        .grid
        .iter()
        .enumerate()
        .map(|(g, sum)| SeriesPoint {
            step: g as u64 * template.record_every,
            mean_norm_sq: sum / n_trajectories as f64,
        })
        .collect();

    Ok(EnsembleSummary {
        n_trajectories,
        master_seed,
        delta: template.params.delta(),
        initial_wealth: initial.wealth().to_vec(),
        win_counts: total.win_counts,
        n_condensed: total.n_condensed,
        condensation_step,
        cumulative_stake_sq: MeanCi::from_sums(
            total.stake_sum,
            total.stake_sum_sq,
            n_trajectories,
        ),
        mean_norm_sq_series,
    })
}

/// Per-agent win-probability estimate against its initial share.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WinProbabilityRow {
    pub agent: usize,
    pub initial_share: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Whether the initial share lies inside the 3-sigma interval.
    pub within_ci: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WinProbabilityReport {
    pub n_trajectories: u64,
    pub rows: Vec<WinProbabilityRow>,
    pub all_within_ci: bool,
}

/// Estimates per-agent win probabilities from a fully condensed, unbiased
/// ensemble and checks each against the agent's initial share.
///
/// Rejected for biased ensembles: the win law is only claimed at `delta = 0`.
pub fn estimate_win_probabilities(summary: &EnsembleSummary) -> Result<WinProbabilityReport> {
    if summary.delta != 0.0 {
        return Err(Error::BiasedWinProbability(summary.delta));
    }
    if summary.n_condensed != summary.n_trajectories {
        return Err(Error::NotAllCondensed {
            condensed: summary.n_condensed,
            total: summary.n_trajectories,
        });
    }
    let n = summary.n_trajectories as f64;
    let rows: Vec<WinProbabilityRow> = summary
        .win_counts
        .iter()
        .enumerate()
        .map(|(agent, &wins)| {
            let estimate = wins as f64 / n;
            let std_error = (estimate * (1.0 - estimate) / n).sqrt();
            let ci_lo = estimate - 3.0 * std_error;
            let ci_hi = estimate + 3.0 * std_error;
            let initial_share = summary.initial_wealth[agent];
            WinProbabilityRow {
                agent,
                initial_share,
                estimate,
                std_error,
                ci_lo,
                ci_hi,
                within_ci: (ci_lo..=ci_hi).contains(&initial_share),
            }
        })
        .collect();
    let all_within_ci = rows.iter().all(|r| r.within_ci);
    Ok(WinProbabilityReport {
        n_trajectories: summary.n_trajectories,
        rows,
        all_within_ci,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{InitialState, StopReason};
    use crate::model::ModelParams;
    use crate::sampling::FractionDistribution;

    fn template(n: usize, delta: f64, epsilon: Option<f64>) -> TrajectoryConfig {
        TrajectoryConfig {
            params: ModelParams::new(n, delta, FractionDistribution::constant(0.2).unwrap())
                .unwrap(),
            initial: InitialState::Uniform,
            max_steps: 1_000_000,
            condensation_epsilon: epsilon,
            record_every: 50,
            key: StreamKey::new(0, 0),
        }
    }

    #[test]
    fn singleton_ensemble_matches_the_single_run() {
        let tpl = template(3, 0.0, Some(1e-3));
        let summary = run_ensemble(&tpl, 1, 77).unwrap();
        let mut single = tpl.clone();
        single.key = StreamKey::new(77, 0);
        let record = run_trajectory(&single).unwrap();

        assert_eq!(record.stop_reason, StopReason::Condensed);
        assert_eq!(summary.n_condensed, 1);
        assert_eq!(summary.win_counts[record.winner.unwrap()], 1);
        assert_eq!(
            summary.condensation_step.unwrap().mean,
            record.condensation_step.unwrap() as f64
        );
        assert_eq!(
            summary.cumulative_stake_sq.mean,
            record.cumulative_stake_sq
        );
    }

    #[test]
    fn summary_is_independent_of_thread_count() {
        let tpl = template(4, 0.1, Some(1e-3));
        let run = || run_ensemble(&tpl, 150, 42).unwrap();
        let sequential = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(run);
        let parallel = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(run);
        assert_eq!(sequential, parallel);
    }

    #[test]
    fn win_counts_sum_to_condensed_count() {
        let tpl = template(3, 0.0, Some(1e-3));
        let summary = run_ensemble(&tpl, 200, 9).unwrap();
        assert_eq!(summary.win_counts.iter().sum::<u64>(), summary.n_condensed);
    }

    #[test]
    fn win_probabilities_need_unbiased_fully_condensed_ensembles() {
        let biased = run_ensemble(&template(2, 0.2, Some(1e-3)), 50, 3).unwrap();
        assert_eq!(
            estimate_win_probabilities(&biased).unwrap_err(),
            Error::BiasedWinProbability(0.2)
        );

        let mut truncated_tpl = template(2, 0.0, Some(1e-9));
        truncated_tpl.max_steps = 5; // nothing condenses in five steps
        let truncated = run_ensemble(&truncated_tpl, 20, 3).unwrap();
        assert!(matches!(
            estimate_win_probabilities(&truncated).unwrap_err(),
            Error::NotAllCondensed { .. }
        ));
    }

    #[test]
    fn condensed_start_wins_with_probability_one() {
        let mut tpl = template(2, 0.0, Some(1e-6));
        tpl.initial = InitialState::Explicit(vec![1.0, 0.0]);
        let summary = run_ensemble(&tpl, 100, 5).unwrap();
        assert_eq!(summary.win_counts, vec![100, 0]);
        let report = estimate_win_probabilities(&summary).unwrap();
        assert_eq!(report.rows[0].estimate, 1.0);
        assert!(report.rows[0].within_ci);
        assert!(report.all_within_ci);
        // Condensed from the start: nothing is ever at stake.
        assert_eq!(summary.cumulative_stake_sq.mean, 0.0);
    }

    #[test]
    fn uniform_start_gives_equal_win_probabilities() {
        let mut tpl = template(4, 0.0, Some(1e-4));
        tpl.record_every = 1_000_000;
        let summary = run_ensemble(&tpl, 2_000, 40).unwrap();
        let report = estimate_win_probabilities(&summary).unwrap();
        // 3 sigma of a 1/4 frequency over 2000 trajectories is ~0.029.
        for row in &report.rows {
            assert!(
                (row.estimate - 0.25).abs() <= 0.03,
                "agent {} estimate {}",
                row.agent,
                row.estimate
            );
            assert!(row.within_ci);
        }
    }

    #[test]
    fn mean_norm_sq_is_nondecreasing_in_expectation() {
        // Concentration never drops in expectation, for the fair model and
        // under bias alike; allow 3-sigma-scale noise on each increment.
        for (delta, seed) in [(0.0, 61), (0.3, 62)] {
            let mut tpl = template(5, delta, None);
            tpl.max_steps = 500;
            tpl.record_every = 50;
            let summary = run_ensemble(&tpl, 2_000, seed).unwrap();
            let series = &summary.mean_norm_sq_series;
            assert_eq!(series.len(), 11);
            for pair in series.windows(2) {
                assert!(
                    pair[1].mean_norm_sq >= pair[0].mean_norm_sq - 0.005,
                    "delta={delta}: mean norm_sq dropped from {} (step {}) to {} (step {})",
                    pair[0].mean_norm_sq,
                    pair[0].step,
                    pair[1].mean_norm_sq,
                    pair[1].step
                );
            }
        }
    }

    #[test]
    fn mean_norm_sq_series_covers_the_longest_trajectory() {
        let mut tpl = template(2, 0.0, Some(1e-4));
        tpl.record_every = 10;
        let summary = run_ensemble(&tpl, 64, 11).unwrap();
        let series = &summary.mean_norm_sq_series;
        assert!(!series.is_empty());
        assert_eq!(series[0].step, 0);
        // Step 0 from a uniform 2-agent split: norm_sq = 1/2 for everyone.
        assert_eq!(series[0].mean_norm_sq, 0.5);
        for pair in series.windows(2) {
            assert_eq!(pair[1].step - pair[0].step, 10);
        }
        // Carried-forward condensed trajectories keep the tail near 1.
        let last = series.last().unwrap();
        assert!(last.mean_norm_sq > 0.9);
    }
}
