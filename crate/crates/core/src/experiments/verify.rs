//! Statistical verification of the one-step expectation identity, the
//! unconditional increment inequality, the stake summability bound, and the
//! martingale property.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::norm_sq_slice;
use crate::model::{apply_trade_in_place, resolve_roles_slice, step_in_place, TradeDraw};
use crate::sampling::{derive_stream, draw_pair, draw_richer_wins, FractionSampler, StreamKey};

use super::{fold_trajectories, run_ensemble, MeanCi, TrajectoryConfig};

/// Per-step ensemble statistics for the increment check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncrementStepStat {
    pub step: u64,
    /// Ensemble mean of the realized change of `norm_sq` at this step.
    pub mean_delta_norm_sq: f64,
    /// Mean of `delta_norm_sq - 2*stake^2`; zero in expectation when delta=0.
    pub mean_gap: f64,
    pub gap_z: f64,
    /// Mean of the closed-form bias term `4*delta*stake*(richer - poorer)`.
    pub mean_target: f64,
    /// z-score of `gap - target`, which has conditional expectation zero for
    /// every delta by the one-step identity.
    pub diff_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncrementReport {
    pub n_steps: u64,
    pub n_trajectories: u64,
    pub delta: f64,
    pub per_step: Vec<IncrementStepStat>,
    /// Trajectory-level means (independent across trajectories), pooled.
    pub pooled_gap: MeanCi,
    pub pooled_target: MeanCi,
    pub pooled_diff: MeanCi,
    pub pooled_gap_z: f64,
    pub pooled_diff_z: f64,
    pub max_abs_step_gap_z: f64,
    pub passed: bool,
}

struct IncrementAccum {
    sum_delta: Vec<f64>,
    sum_gap: Vec<f64>,
    sum_gap_sq: Vec<f64>,
    sum_target: Vec<f64>,
    sum_diff_sq: Vec<f64>,
    traj_gap_sum: f64,
    traj_gap_sum_sq: f64,
    traj_target_sum: f64,
    traj_target_sum_sq: f64,
    traj_diff_sum: f64,
    traj_diff_sum_sq: f64,
}

impl IncrementAccum {
    fn new(n_steps: usize) -> Self {
        Self {
            sum_delta: vec![0.0; n_steps],
            sum_gap: vec![0.0; n_steps],
            sum_gap_sq: vec![0.0; n_steps],
            sum_target: vec![0.0; n_steps],
            sum_diff_sq: vec![0.0; n_steps],
            traj_gap_sum: 0.0,
            traj_gap_sum_sq: 0.0,
            traj_target_sum: 0.0,
            traj_target_sum_sq: 0.0,
            traj_diff_sum: 0.0,
            traj_diff_sum_sq: 0.0,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        let pairs: [(&mut Vec<f64>, &Vec<f64>); 5] = [
            (&mut self.sum_delta, &other.sum_delta),
            (&mut self.sum_gap, &other.sum_gap),
            (&mut self.sum_gap_sq, &other.sum_gap_sq),
            (&mut self.sum_target, &other.sum_target),
            (&mut self.sum_diff_sq, &other.sum_diff_sq),
        ];
        for (a, b) in pairs {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.traj_gap_sum += other.traj_gap_sum;
        self.traj_gap_sum_sq += other.traj_gap_sum_sq;
        self.traj_target_sum += other.traj_target_sum;
        self.traj_target_sum_sq += other.traj_target_sum_sq;
        self.traj_diff_sum += other.traj_diff_sum;
        self.traj_diff_sum_sq += other.traj_diff_sum_sq;
        self
    }
}

fn step_z(sum: f64, sum_sq: f64, n: u64) -> f64 {
    MeanCi::from_sums(sum, sum_sq, n).z_against(0.0)
}

/// Simulates `n_trajectories` runs of `n_steps` plain-model steps and checks
/// the realized change of `norm_sq` against the closed-form conditional
/// expectation, per step and pooled.
///
/// Trajectory `k` uses the stream `(template.key.master_seed, k)`.
pub fn verify_increment_bound(
    template: &TrajectoryConfig,
    n_steps: u64,
    n_trajectories: u64,
    master_seed: u64,
) -> Result<IncrementReport> {
    template.validate()?;
    if !template.params.is_plain() {
        return Err(Error::PlainModelRequired);
    }
    if n_steps == 0 {
        return Err(Error::ZeroMaxSteps);
    }
    if n_trajectories == 0 {
        return Err(Error::ZeroTrajectories);
    }
    let params = &template.params;
    let n_agents = params.n_agents();
    let delta = params.delta();
    let initial = template.initial.materialize(n_agents)?;
    let sampler = FractionSampler::new(params.fraction_dist())?;

    let total = fold_trajectories(
        n_trajectories,
        || IncrementAccum::new(n_steps as usize),
        |acc, k| {
            let mut rng = derive_stream(StreamKey::new(master_seed, k));
            let mut wealth = initial.wealth().to_vec();
            let mut gap_sum = 0.0;
            let mut target_sum = 0.0;
            let mut diff_sum = 0.0;
            for step_idx in 0..n_steps as usize {
                let (a, b) = draw_pair(&mut rng, n_agents)?;
                let fraction = sampler.sample(&mut rng);
                let richer_wins = draw_richer_wins(&mut rng, delta)?;
                let (poorer, richer) = resolve_roles_slice(&wealth, a, b)?;
                let pre_poorer = wealth[poorer];
                let pre_richer = wealth[richer];

                let draw = TradeDraw::new(a, b, fraction, richer_wins)?;
                let outcome = apply_trade_in_place(&mut wealth, &draw, params)?;
                let stake = outcome.stake;

                // Realized change of norm_sq from the actual post-trade
                // entries; everyone else is untouched and cancels exactly.
                let post_poorer = wealth[poorer];
                let post_richer = wealth[richer];
                let delta_norm_sq = (post_poorer * post_poorer + post_richer * post_richer)
                    - (pre_poorer * pre_poorer + pre_richer * pre_richer);

                let target = 4.0 * delta * stake * (pre_richer - pre_poorer);
                let gap = delta_norm_sq - 2.0 * stake * stake;
                let diff = gap - target;

                acc.sum_delta[step_idx] += delta_norm_sq;
                acc.sum_gap[step_idx] += gap;
                acc.sum_gap_sq[step_idx] += gap * gap;
                acc.sum_target[step_idx] += target;
                acc.sum_diff_sq[step_idx] += diff * diff;
                gap_sum += gap;
                target_sum += target;
                diff_sum += diff;
            }
            let steps = n_steps as f64;
            let gap_mean = gap_sum / steps;
            let target_mean = target_sum / steps;
            let diff_mean = diff_sum / steps;
            acc.traj_gap_sum += gap_mean;
            acc.traj_gap_sum_sq += gap_mean * gap_mean;
            acc.traj_target_sum += target_mean;
            acc.traj_target_sum_sq += target_mean * target_mean;
            acc.traj_diff_sum += diff_mean;
            acc.traj_diff_sum_sq += diff_mean * diff_mean;
            Ok(())
        },
        IncrementAccum::merge,
    )?;

    let k = n_trajectories;
    let per_step: Vec<IncrementStepStat> = (0..n_steps as usize)
        .map(|i| {
            let diff_sum = total.sum_gap[i] - total.sum_target[i];
            IncrementStepStat {
                step: i as u64 + 1,
                mean_delta_norm_sq: total.sum_delta[i] / k as f64,
                mean_gap: total.sum_gap[i] / k as f64,
                gap_z: step_z(total.sum_gap[i], total.sum_gap_sq[i], k),
                mean_target: total.sum_target[i] / k as f64,
                diff_z: step_z(diff_sum, total.sum_diff_sq[i], k),
            }
        })
        .collect();

    let pooled_gap = MeanCi::from_sums(total.traj_gap_sum, total.traj_gap_sum_sq, k);
    let pooled_target = MeanCi::from_sums(total.traj_target_sum, total.traj_target_sum_sq, k);
    let pooled_diff = MeanCi::from_sums(total.traj_diff_sum, total.traj_diff_sum_sq, k);
    let pooled_gap_z = pooled_gap.z_against(0.0);
    let pooled_diff_z = pooled_diff.z_against(0.0);
    let max_abs_step_gap_z = per_step
        .iter()
        .map(|s| s.gap_z.abs())
        .fold(0.0f64, f64::max);

    // The identity must hold for every delta; the gap itself is zero in
    // expectation only for the fair model, and strictly positive otherwise.
    let passed = pooled_diff_z.abs() <= 3.0
        && if delta == 0.0 {
            pooled_gap_z.abs() <= 3.0
        } else {
            pooled_gap.mean > 0.0
        };

    Ok(IncrementReport {
        n_steps,
        n_trajectories,
        delta,
        per_step,
        pooled_gap,
        pooled_target,
        pooled_diff,
        pooled_gap_z,
        pooled_diff_z,
        max_abs_step_gap_z,
        passed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummabilityReport {
    pub horizon: u64,
    pub n_trajectories: u64,
    pub initial_norm_sq: f64,
    /// `(1 - norm_sq(X0)) / 2`: the total expected stake-square budget.
    pub bound: f64,
    pub cumulative_stake_sq: MeanCi,
    pub passed: bool,
}

/// Checks that the ensemble mean of the accumulated squared stakes at the
/// horizon respects the summability budget `(1 - norm_sq(X0))/2` (plus the
/// 3-sigma allowance of the estimate).
pub fn verify_stake_summability(
    template: &TrajectoryConfig,
    horizon: u64,
    n_trajectories: u64,
) -> Result<SummabilityReport> {
    if !template.params.is_plain() {
        return Err(Error::PlainModelRequired);
    }
    if horizon == 0 {
        return Err(Error::ZeroMaxSteps);
    }
    let mut config = template.clone();
    config.max_steps = horizon;
    config.condensation_epsilon = None;
    config.record_every = horizon;
    let summary = run_ensemble(&config, n_trajectories, template.key.master_seed)?;

    let initial_norm_sq = norm_sq_slice(&summary.initial_wealth);
    let bound = (1.0 - initial_norm_sq) / 2.0;
    let stats = summary.cumulative_stake_sq;
    let passed = stats.mean <= bound + stats.half_width_3sigma;
    Ok(SummabilityReport {
        horizon,
        n_trajectories,
        initial_norm_sq,
        bound,
        cumulative_stake_sq: stats,
        passed,
    })
}

/// One agent's ensemble-mean wealth at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MartingaleCell {
    pub agent: usize,
    pub initial_share: f64,
    pub mean_wealth: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleCheckpoint {
    pub step: u64,
    pub cells: Vec<MartingaleCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleReport {
    pub n_trajectories: u64,
    pub checkpoints: Vec<MartingaleCheckpoint>,
    pub max_abs_z: f64,
    pub passed: bool,
}

struct MartingaleAccum {
    // checkpoint-major [checkpoint][agent]
    sums: Vec<Vec<f64>>,
    sums_sq: Vec<Vec<f64>>,
}

impl MartingaleAccum {
    fn new(n_checkpoints: usize, n_agents: usize) -> Self {
        Self {
            sums: vec![vec![0.0; n_agents]; n_checkpoints],
            sums_sq: vec![vec![0.0; n_agents]; n_checkpoints],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (mine, theirs) in self.sums.iter_mut().zip(&other.sums) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
        for (mine, theirs) in self.sums_sq.iter_mut().zip(&other.sums_sq) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
        self
    }
}

/// Checks the martingale property of the fair model: at each checkpoint the
/// ensemble mean of every agent's wealth must sit within 3 sigma of the
/// agent's initial share. Risk tolerances are allowed (they do not break the
/// martingale); bias and taxation are not.
pub fn verify_martingale(
    template: &TrajectoryConfig,
    checkpoints: &[u64],
    n_trajectories: u64,
) -> Result<MartingaleReport> {
    template.validate()?;
    if template.params.delta() != 0.0 || template.params.tax_chi().is_some() {
        return Err(Error::PlainModelRequired);
    }
    if checkpoints.is_empty()
        || checkpoints[0] == 0
        || checkpoints.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::BadCheckpoints);
    }
    if n_trajectories == 0 {
        return Err(Error::ZeroTrajectories);
    }
    let params = &template.params;
    let n_agents = params.n_agents();
    let initial = template.initial.materialize(n_agents)?;
    let sampler = FractionSampler::new(params.fraction_dist())?;
    let horizon = *checkpoints.last().expect("nonempty");
    let master_seed = template.key.master_seed;

    let total = fold_trajectories(
        n_trajectories,
        || MartingaleAccum::new(checkpoints.len(), n_agents),
        |acc, k| {
            let mut rng = derive_stream(StreamKey::new(master_seed, k));
            let mut wealth = initial.wealth().to_vec();
            let mut next_checkpoint = 0;
            for step_idx in 1..=horizon {
                let (a, b) = draw_pair(&mut rng, n_agents)?;
                let fraction = sampler.sample(&mut rng);
                let richer_wins = draw_richer_wins(&mut rng, params.delta())?;
                let draw = TradeDraw::new(a, b, fraction, richer_wins)?;
                step_in_place(&mut wealth, &draw, params)?;
                if step_idx == checkpoints[next_checkpoint] {
                    for (agent, &x) in wealth.iter().enumerate() {
                        acc.sums[next_checkpoint][agent] += x;
                        acc.sums_sq[next_checkpoint][agent] += x * x;
                    }
                    next_checkpoint += 1;
                    if next_checkpoint == checkpoints.len() {
                        break;
                    }
                }
            }
            Ok(())
        },
        MartingaleAccum::merge,
    )?;

    let mut max_abs_z = 0.0f64;
    let report_checkpoints: Vec<MartingaleCheckpoint> = checkpoints
        .iter()
        .enumerate()
        .map(|(c, &step)| {
            let cells = (0..n_agents)
                .map(|agent| {
                    let stats = MeanCi::from_sums(
                        total.sums[c][agent],
                        total.sums_sq[c][agent],
                        n_trajectories,
                    );
                    let z = stats.z_against(initial.wealth()[agent]);
                    max_abs_z = max_abs_z.max(z.abs());
                    MartingaleCell {
                        agent,
                        initial_share: initial.wealth()[agent],
                        mean_wealth: stats.mean,
                        z,
                    }
                })
                .collect();
            MartingaleCheckpoint { step, cells }
        })
        .collect();

    Ok(MartingaleReport {
        n_trajectories,
        checkpoints: report_checkpoints,
        max_abs_z,
        passed: max_abs_z <= 3.0,
    })
}
