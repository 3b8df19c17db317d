//! Condensation hitting-time study over a parameter grid. Exploratory: the
//! model has no known rate law, so directional diagnostics are reported, not
//! asserted.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::sampling::{FractionDistribution, StreamKey};

use super::{fold_trajectories, run_trajectory, InitialState, TrajectoryConfig};

/// One grid point: agent count, win bias, constant stake fraction, and the
/// condensation threshold `1 - epsilon`. Initial state is the uniform split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub n_agents: usize,
    pub delta: f64,
    pub beta: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CondensationRow {
    pub point: GridPoint,
    pub n_trajectories: u64,
    pub n_condensed: u64,
    /// Statistics over condensed trajectories (NaN when none condensed).
    pub mean_steps: f64,
    pub median_steps: f64,
    pub std_dev: f64,
    pub half_width_3sigma: f64,
    pub min_steps: u64,
    pub max_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CondensationStudy {
    pub rows: Vec<CondensationRow>,
    /// Directional comparisons between rows that differ in exactly one
    /// parameter. Informational only.
    pub diagnostics: Vec<String>,
}

/// Runs `n_trajectories` per grid point and tabulates hitting times of
/// `max_wealth >= 1 - epsilon`. Trajectory streams are indexed globally
/// (`point_index * n_trajectories + k`), so no stream is ever reused.
pub fn condensation_time_study(
    grid: &[GridPoint],
    n_trajectories: u64,
    master_seed: u64,
    max_steps: u64,
) -> Result<CondensationStudy> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if n_trajectories == 0 {
        return Err(Error::ZeroTrajectories);
    }
    let mut rows = Vec::with_capacity(grid.len());
    for (point_index, point) in grid.iter().enumerate() {
        let template = TrajectoryConfig {
            params: ModelParams::new(
                point.n_agents,
                point.delta,
                FractionDistribution::constant(point.beta)?,
            )?,
            initial: InitialState::Uniform,
            max_steps,
            condensation_epsilon: Some(point.epsilon),
            // Only the stopping step matters here; keep snapshots sparse.
            record_every: max_steps,
            key: StreamKey::new(master_seed, 0),
        };
        template.validate()?;

        let steps: Vec<Option<u64>> = fold_trajectories(
            n_trajectories,
            Vec::new,
            |acc: &mut Vec<Option<u64>>, k| {
                let mut config = template.clone();
                config.key =
                    StreamKey::new(master_seed, point_index as u64 * n_trajectories + k);
                let record = run_trajectory(&config)?;
                acc.push(record.condensation_step);
                Ok(())
            },
            |mut a, b| {
                a.extend(b);
                a
            },
        )?;

        let mut condensed: Vec<u64> = steps.iter().filter_map(|s| *s).collect();
        condensed.sort_unstable();
        let n_condensed = condensed.len() as u64;
        let (mean, median, std_dev, half_width) = if condensed.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        } else {
            let sum: f64 = condensed.iter().map(|&s| s as f64).sum();
            let sum_sq: f64 = condensed.iter().map(|&s| (s as f64) * (s as f64)).sum();
            let stats = super::MeanCi::from_sums(sum, sum_sq, n_condensed);
            let mid = condensed.len() / 2;
            let median = if condensed.len() % 2 == 1 {
                condensed[mid] as f64
            } else {
                (condensed[mid - 1] as f64 + condensed[mid] as f64) / 2.0
            };
            (stats.mean, median, stats.std_dev, stats.half_width_3sigma)
        };
        rows.push(CondensationRow {
            point: *point,
            n_trajectories,
            n_condensed,
            mean_steps: mean,
            median_steps: median,
            std_dev,
            half_width_3sigma: half_width,
            min_steps: condensed.first().copied().unwrap_or(0),
            max_steps: condensed.last().copied().unwrap_or(0),
        });
    }

    let diagnostics = build_diagnostics(&rows);
    Ok(CondensationStudy { rows, diagnostics })
}

fn build_diagnostics(rows: &[CondensationRow]) -> Vec<String> {
    let mut notes = Vec::new();
    for (i, a) in rows.iter().enumerate() {
        for b in rows.iter().skip(i + 1) {
            let pa = a.point;
            let pb = b.point;
            if a.n_condensed == 0 || b.n_condensed == 0 {
                continue;
            }
            let slack = a.half_width_3sigma + b.half_width_3sigma;
            if pa.n_agents == pb.n_agents
                && pa.beta == pb.beta
                && pa.epsilon == pb.epsilon
                && pa.delta != pb.delta
            {
                let (lo, hi) = if pa.delta < pb.delta { (a, b) } else { (b, a) };
                let verdict = if hi.mean_steps <= lo.mean_steps + slack {
                    "consistent with larger bias not slowing condensation"
                } else {
                    "larger bias condensed slower than expected"
                };
                notes.push(format!(
                    "delta {} vs {} at N={}, beta={}, eps={}: mean steps {:.1} vs {:.1} — {} \
                     (3-sigma slack {:.1})",
                    lo.point.delta,
                    hi.point.delta,
                    pa.n_agents,
                    pa.beta,
                    pa.epsilon,
                    lo.mean_steps,
                    hi.mean_steps,
                    verdict,
                    slack,
                ));
            }
            if pa.delta == pb.delta
                && pa.beta == pb.beta
                && pa.epsilon == pb.epsilon
                && pa.n_agents != pb.n_agents
            {
                let (small, large) = if pa.n_agents < pb.n_agents { (a, b) } else { (b, a) };
                notes.push(format!(
                    "N {} vs {} at delta={}, beta={}, eps={}: mean steps {:.1} vs {:.1}",
                    small.point.n_agents,
                    large.point.n_agents,
                    pa.delta,
                    pa.beta,
                    pa.epsilon,
                    small.mean_steps,
                    large.mean_steps,
                ));
            }
        }
    }
    notes
}
