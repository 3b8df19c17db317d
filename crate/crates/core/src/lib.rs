//! Simulation engine and verification toolkit for the yard-sale
//! wealth-exchange model and its variants: wealth-acquired advantage (a coin
//! biased toward the richer trading partner), per-agent risk tolerance, and
//! flat wealth taxation with uniform redistribution.
//!
//! The crate splits into four layers:
//!
//! * [`model`] — pure single-step dynamics,
//! * [`sampling`] — reproducible randomness (pairs, fractions, coins, streams),
//! * [`metrics`] — concentration and inequality functionals,
//! * [`experiments`] — trajectory/ensemble runners and statistical checks of
//!   the model's known exact properties (conservation, the win law, the
//!   squared-norm increment identity, stake summability, the martingale
//!   property, taxation floors).
//!
//! Every run is a pure function of its configuration and stream key; ensemble
//! reductions are order-insensitive, so results are bitwise independent of
//! the thread count.

pub mod error;
pub mod experiments;
pub mod metrics;
pub mod model;
pub mod sampling;

pub use error::{Error, Result};
pub use experiments::{
    condensation_time_study, estimate_win_probabilities, run_ensemble, run_trajectory,
    verify_increment_bound, verify_martingale, verify_stake_summability, CondensationRow,
    CondensationStudy, EnsembleSummary, GridPoint, IncrementReport, InitialState,
    MartingaleReport, MeanCi, SeriesPoint, StopReason, SummabilityReport, TrajectoryConfig,
    TrajectoryRecord, WinProbabilityReport, WinProbabilityRow,
};
pub use metrics::{
    expected_norm_increment, gini, inverse_participation_ratio, max_wealth, norm_sq,
    MetricsSnapshot,
};
pub use model::{
    apply_taxation, apply_trade, make_state, resolve_roles, step, step_in_place, ModelParams,
    StepOutcome, TradeDraw, WealthState,
};
pub use sampling::{
    derive_stream, draw_fraction, draw_pair, draw_richer_wins, FractionDistribution,
    FractionSampler, StreamKey, TrajectoryRng,
};
