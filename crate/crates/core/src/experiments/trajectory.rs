//! Single-trajectory runner.

use crate::error::Result;
use crate::metrics::{max_wealth_slice, MetricsSnapshot};
use crate::model::{step_in_place, TradeDraw};
use crate::sampling::{derive_stream, draw_pair, draw_richer_wins, FractionSampler};

use super::{argmax, StopReason, TrajectoryConfig, TrajectoryRecord};

/// Runs one trajectory to condensation or `max_steps`, whichever comes first.
///
/// Per step the stream is consumed in a fixed order — pair, fraction, coin —
/// so the full record is a pure function of the config and its stream key.
pub fn run_trajectory(config: &TrajectoryConfig) -> Result<TrajectoryRecord> {
    config.validate()?;
    let params = &config.params;
    let n = params.n_agents();
    let mut wealth = config.initial.materialize(n)?.wealth().to_vec();
    let mut rng = derive_stream(config.key);
    let sampler = FractionSampler::new(params.fraction_dist())?;
    let threshold = config.condensation_epsilon.map(|eps| 1.0 - eps);
    let cadence = config.record_every;

    let mut snapshots = vec![MetricsSnapshot::capture_slice(0, &wealth, 0.0)];
    let mut cumulative_stake_sq = 0.0;

    // The stopping condition can already hold at step 0 (loose epsilon or a
    // condensed initial state).
    if let Some(thr) = threshold {
        if max_wealth_slice(&wealth) >= thr {
            return Ok(TrajectoryRecord {
                snapshots,
                stop_reason: StopReason::Condensed,
                condensation_step: Some(0),
                cumulative_stake_sq,
                winner: Some(argmax(&wealth)),
            });
        }
    }

    let mut stop_reason = StopReason::MaxSteps;
    let mut condensation_step = None;
    let mut winner = None;

    for step_idx in 1..=config.max_steps {
        let (a, b) = draw_pair(&mut rng, n)?;
        let fraction = sampler.sample(&mut rng);
        let richer_wins = draw_richer_wins(&mut rng, params.delta())?;
        let draw = TradeDraw::new(a, b, fraction, richer_wins)?;
        let outcome = step_in_place(&mut wealth, &draw, params)?;
        cumulative_stake_sq += outcome.stake * outcome.stake;

        let condensed = match threshold {
            None => false,
            Some(thr) => {
                if params.tax_chi().is_some() {
                    // The tax pass moves every entry; scan them all.
                    max_wealth_slice(&wealth) >= thr
                } else {
                    // Without taxation only the trading pair changed, and any
                    // other agent above the threshold would have stopped the
                    // run at an earlier step already.
                    wealth[outcome.poorer] >= thr || wealth[outcome.richer] >= thr
                }
            }
        };

        if condensed {
            snapshots.push(MetricsSnapshot::capture_slice(
                step_idx,
                &wealth,
                outcome.stake,
            ));
            stop_reason = StopReason::Condensed;
            condensation_step = Some(step_idx);
            winner = Some(argmax(&wealth));
            break;
        }
        if step_idx % cadence == 0 || step_idx == config.max_steps {
            snapshots.push(MetricsSnapshot::capture_slice(
                step_idx,
                &wealth,
                outcome.stake,
            ));
        }
    }

    Ok(TrajectoryRecord {
        snapshots,
        stop_reason,
        condensation_step,
        cumulative_stake_sq,
        winner,
    })
}
