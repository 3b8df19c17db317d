//! Single-step dynamics of the yard-sale exchange model.
//!
//! Everything here is a pure function of its inputs: given a state and a
//! fully resolved [`TradeDraw`], produce the next state. Randomness lives in
//! the `sampling` module; composition over time lives in `experiments`.
//!
//! One time step is one trade between a drawn pair of agents. The poorer of
//! the two puts a fraction of their wealth at stake, a coin (possibly biased
//! toward the richer agent) decides who wins, and under the taxation variant
//! every agent is then taxed a flat fraction that is redistributed equally.

use crate::error::{Error, Result};
use crate::sampling::FractionDistribution;

/// Nonnegative per-agent wealth, normalized so the entries sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthState {
    wealth: Vec<f64>,
}

impl WealthState {
    /// Builds a state from raw nonnegative wealths, normalizing to total 1.
    pub fn new(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyWealth);
        }
        for (index, &value) in raw.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteWealth { index, value });
            }
            if value < 0.0 {
                return Err(Error::NegativeWealth { index, value });
            }
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroTotalWealth);
        }
        let wealth: Vec<f64> = raw.iter().map(|x| x / total).collect();
        debug_assert!((wealth.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        Ok(Self { wealth })
    }

    /// The state where all `n` agents hold an equal share.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyWealth);
        }
        Ok(Self {
            wealth: vec![1.0 / n as f64; n],
        })
    }

    pub fn wealth(&self) -> &[f64] {
        &self.wealth
    }

    pub fn n_agents(&self) -> usize {
        self.wealth.len()
    }

    /// Wraps already-evolved wealth without re-normalizing. Conservation is an
    /// assertion on runs, never a correction, so simulation output must not be
    /// rescaled here.
    pub(crate) fn from_evolved(wealth: Vec<f64>) -> Self {
        Self { wealth }
    }
}

/// Builds a [`WealthState`] from raw nonnegative wealths (normalizes to 1).
pub fn make_state(raw: &[f64]) -> Result<WealthState> {
    WealthState::new(raw)
}

/// Static parameters of a model run.
///
/// `delta` is the internal form of the win bias: the richer trading partner
/// wins with probability `p = 1/2 + delta`. `delta = 0` is the fair model;
/// `p = 1` is excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    n_agents: usize,
    delta: f64,
    fraction_dist: FractionDistribution,
    risk_lambda: Option<Vec<f64>>,
    tax_chi: Option<f64>,
}

impl ModelParams {
    pub fn new(n_agents: usize, delta: f64, fraction_dist: FractionDistribution) -> Result<Self> {
        if n_agents < 2 {
            return Err(Error::TooFewAgents(n_agents));
        }
        if !delta.is_finite() || !(0.0..0.5).contains(&delta) {
            return Err(Error::DeltaOutOfRange(delta));
        }
        fraction_dist.validate()?;
        Ok(Self {
            n_agents,
            delta,
            fraction_dist,
            risk_lambda: None,
            tax_chi: None,
        })
    }

    /// Adds per-agent risk tolerances; agent `i` only ever moves a fraction
    /// `lambda[i]` of its stake.
    pub fn with_risk_lambda(mut self, lambda: Vec<f64>) -> Result<Self> {
        if lambda.len() != self.n_agents {
            return Err(Error::LambdaLengthMismatch {
                got: lambda.len(),
                expected: self.n_agents,
            });
        }
        for (index, &value) in lambda.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 || value >= 1.0 {
                return Err(Error::LambdaOutOfRange { index, value });
            }
        }
        self.risk_lambda = Some(lambda);
        Ok(self)
    }

    /// Adds flat wealth taxation: after each trade every agent keeps a share
    /// `1 - chi` and receives `chi / N` back from the pot.
    pub fn with_tax(mut self, chi: f64) -> Result<Self> {
        if !chi.is_finite() || chi <= 0.0 || chi >= 1.0 {
            return Err(Error::ChiOutOfRange(chi));
        }
        self.tax_chi = Some(chi);
        Ok(self)
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Probability that the richer trading partner wins, `1/2 + delta`.
    pub fn p_richer_wins(&self) -> f64 {
        0.5 + self.delta
    }

    pub fn fraction_dist(&self) -> &FractionDistribution {
        &self.fraction_dist
    }

    pub fn risk_lambda(&self) -> Option<&[f64]> {
        self.risk_lambda.as_deref()
    }

    pub fn tax_chi(&self) -> Option<f64> {
        self.tax_chi
    }

    /// True when neither the risk-tolerance nor the taxation variant is active.
    pub fn is_plain(&self) -> bool {
        self.risk_lambda.is_none() && self.tax_chi.is_none()
    }
}

/// One step's fully resolved randomness: the drawn pair, the stake fraction,
/// and the coin outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeDraw {
    agent_a: usize,
    agent_b: usize,
    fraction: f64,
    richer_wins: bool,
}

impl TradeDraw {
    pub fn new(agent_a: usize, agent_b: usize, fraction: f64, richer_wins: bool) -> Result<Self> {
        if agent_a == agent_b {
            return Err(Error::IdenticalAgents(agent_a));
        }
        if !fraction.is_finite() || fraction <= 0.0 || fraction >= 1.0 {
            return Err(Error::FractionOutOfRange(fraction));
        }
        Ok(Self {
            agent_a,
            agent_b,
            fraction,
            richer_wins,
        })
    }

    pub fn agent_a(&self) -> usize {
        self.agent_a
    }

    pub fn agent_b(&self) -> usize {
        self.agent_b
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    pub fn richer_wins(&self) -> bool {
        self.richer_wins
    }
}

/// What a single trade did: the stake, the resolved roles, and the signed
/// transfer (positive when the poorer agent gained).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Amount of wealth at stake: `fraction * wealth(poorer)`.
    pub stake: f64,
    pub poorer: usize,
    pub richer: usize,
    /// Realized transfer into the poorer agent's pocket; its magnitude is
    /// `stake * lambda(poorer)` (lambda = 1 when absent).
    pub transfer_signed: f64,
}

fn check_index(index: usize, n_agents: usize) -> Result<()> {
    if index >= n_agents {
        return Err(Error::IndexOutOfRange { index, n_agents });
    }
    Ok(())
}

pub(crate) fn resolve_roles_slice(wealth: &[f64], a: usize, b: usize) -> Result<(usize, usize)> {
    check_index(a, wealth.len())?;
    check_index(b, wealth.len())?;
    // Equal wealth: the smaller index takes the poorer role. The stake is the
    // same either way; determinism is what matters.
    let (poorer, richer) = if wealth[a] < wealth[b] {
        (a, b)
    } else if wealth[b] < wealth[a] {
        (b, a)
    } else {
        (a.min(b), a.max(b))
    };
    Ok((poorer, richer))
}

/// Decides which drawn agent plays the poorer role (ties go to the smaller
/// index). Independent of risk tolerances and taxation.
pub fn resolve_roles(state: &WealthState, draw: &TradeDraw) -> Result<(usize, usize)> {
    resolve_roles_slice(state.wealth(), draw.agent_a, draw.agent_b)
}

pub(crate) fn apply_trade_in_place(
    wealth: &mut [f64],
    draw: &TradeDraw,
    params: &ModelParams,
) -> Result<StepOutcome> {
    if wealth.len() != params.n_agents {
        return Err(Error::AgentCountMismatch {
            state: wealth.len(),
            params: params.n_agents,
        });
    }
    let (poorer, richer) = resolve_roles_slice(wealth, draw.agent_a, draw.agent_b)?;
    let stake = draw.fraction * wealth[poorer];
    let scale = params.risk_lambda.as_ref().map_or(1.0, |l| l[poorer]);
    let transfer = stake * scale;
    let transfer_signed = if draw.richer_wins {
        wealth[poorer] -= transfer;
        wealth[richer] += transfer;
        -transfer
    } else {
        wealth[poorer] += transfer;
        wealth[richer] -= transfer;
        transfer
    };
    Ok(StepOutcome {
        stake,
        poorer,
        richer,
        transfer_signed,
    })
}

/// Applies one trade (no taxation): the poorer agent stakes
/// `fraction * wealth(poorer)`, scaled by its risk tolerance, and the coin
/// decides the direction. The transfer never drives anyone negative since
/// `lambda * fraction < 1`.
pub fn apply_trade(
    state: &WealthState,
    draw: &TradeDraw,
    params: &ModelParams,
) -> Result<(WealthState, StepOutcome)> {
    let mut wealth = state.wealth().to_vec();
    let outcome = apply_trade_in_place(&mut wealth, draw, params)?;
    Ok((WealthState::from_evolved(wealth), outcome))
}

/// In-place flat tax pass; returns the post-tax maximum entry.
pub(crate) fn apply_taxation_in_place(wealth: &mut [f64], chi: f64) -> f64 {
    let share = chi / wealth.len() as f64;
    let keep = 1.0 - chi;
    let mut max = f64::NEG_INFINITY;
    for x in wealth.iter_mut() {
        *x = keep * *x + share;
        if *x > max {
            max = *x;
        }
    }
    max
}

/// Flat wealth tax with uniform redistribution: every entry becomes
/// `(1 - chi) * old + chi / N`, which keeps the total at 1 and floors every
/// agent at `chi / N`.
pub fn apply_taxation(state: &WealthState, chi: f64) -> Result<WealthState> {
    if !chi.is_finite() || chi <= 0.0 || chi >= 1.0 {
        return Err(Error::ChiOutOfRange(chi));
    }
    let mut wealth = state.wealth().to_vec();
    apply_taxation_in_place(&mut wealth, chi);
    Ok(WealthState::from_evolved(wealth))
}

/// Allocation-free full step: one trade, then the tax pass iff the params
/// carry a tax rate. The outcome reports the trade-level stake.
pub fn step_in_place(
    wealth: &mut [f64],
    draw: &TradeDraw,
    params: &ModelParams,
) -> Result<StepOutcome> {
    let outcome = apply_trade_in_place(wealth, draw, params)?;
    if let Some(chi) = params.tax_chi {
        apply_taxation_in_place(wealth, chi);
    }
    Ok(outcome)
}

/// One full time step of the model (trade, then optional taxation).
pub fn step(
    state: &WealthState,
    draw: &TradeDraw,
    params: &ModelParams,
) -> Result<(WealthState, StepOutcome)> {
    let mut wealth = state.wealth().to_vec();
    let outcome = step_in_place(&mut wealth, draw, params)?;
    Ok((WealthState::from_evolved(wealth), outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn plain_params(n: usize) -> ModelParams {
        ModelParams::new(n, 0.0, FractionDistribution::constant(0.1).unwrap()).unwrap()
    }

    #[test]
    fn make_state_normalizes() {
        assert_eq!(make_state(&[2.0, 2.0]).unwrap().wealth(), &[0.5, 0.5]);
        assert_eq!(make_state(&[0.3, 0.7]).unwrap().wealth(), &[0.3, 0.7]);
        assert_eq!(
            make_state(&[1.0, 1.0, 2.0]).unwrap().wealth(),
            &[0.25, 0.25, 0.5]
        );
    }

    #[test]
    fn make_state_rejects_bad_input() {
        assert_eq!(make_state(&[]), Err(Error::EmptyWealth));
        assert_eq!(
            make_state(&[0.2, -0.1]),
            Err(Error::NegativeWealth {
                index: 1,
                value: -0.1
            })
        );
        assert_eq!(make_state(&[0.0, 0.0]), Err(Error::ZeroTotalWealth));
        assert!(matches!(
            make_state(&[f64::NAN, 1.0]),
            Err(Error::NonFiniteWealth { index: 0, .. })
        ));
    }

    #[test]
    fn resolve_roles_orders_by_wealth() {
        let state = make_state(&[0.3, 0.7]).unwrap();
        let draw = TradeDraw::new(1, 0, 0.5, true).unwrap();
        assert_eq!(resolve_roles(&state, &draw).unwrap(), (0, 1));

        let state = make_state(&[0.2, 0.3, 0.5]).unwrap();
        let draw = TradeDraw::new(2, 1, 0.5, true).unwrap();
        assert_eq!(resolve_roles(&state, &draw).unwrap(), (1, 2));
    }

    #[test]
    fn resolve_roles_breaks_ties_by_index() {
        let state = make_state(&[0.5, 0.5]).unwrap();
        let draw = TradeDraw::new(1, 0, 0.5, true).unwrap();
        assert_eq!(resolve_roles(&state, &draw).unwrap(), (0, 1));
    }

    #[test]
    fn resolve_roles_checks_indices() {
        let state = make_state(&[0.5, 0.5]).unwrap();
        let draw = TradeDraw::new(0, 2, 0.5, true).unwrap();
        assert_eq!(
            resolve_roles(&state, &draw),
            Err(Error::IndexOutOfRange {
                index: 2,
                n_agents: 2
            })
        );
    }

    #[test]
    fn trade_draw_rejects_degenerate_input() {
        assert_eq!(
            TradeDraw::new(1, 1, 0.5, true),
            Err(Error::IdenticalAgents(1))
        );
        assert_eq!(
            TradeDraw::new(0, 1, 0.0, true),
            Err(Error::FractionOutOfRange(0.0))
        );
        assert_eq!(
            TradeDraw::new(0, 1, 1.0, true),
            Err(Error::FractionOutOfRange(1.0))
        );
    }

    #[test]
    fn apply_trade_richer_wins() {
        let state = make_state(&[0.3, 0.7]).unwrap();
        let draw = TradeDraw::new(0, 1, 0.5, true).unwrap();
        let (next, outcome) = apply_trade(&state, &draw, &plain_params(2)).unwrap();
        assert_abs_diff_eq!(next.wealth()[0], 0.15, epsilon = 1e-15);
        assert_abs_diff_eq!(next.wealth()[1], 0.85, epsilon = 1e-15);
        assert_abs_diff_eq!(outcome.stake, 0.15, epsilon = 1e-15);
        assert_eq!((outcome.poorer, outcome.richer), (0, 1));
        assert_abs_diff_eq!(outcome.transfer_signed, -0.15, epsilon = 1e-15);
    }

    #[test]
    fn apply_trade_poorer_wins() {
        let state = make_state(&[0.3, 0.7]).unwrap();
        let draw = TradeDraw::new(0, 1, 0.5, false).unwrap();
        let (next, outcome) = apply_trade(&state, &draw, &plain_params(2)).unwrap();
        assert_abs_diff_eq!(next.wealth()[0], 0.45, epsilon = 1e-15);
        assert_abs_diff_eq!(next.wealth()[1], 0.55, epsilon = 1e-15);
        assert_abs_diff_eq!(outcome.stake, 0.15, epsilon = 1e-15);
        assert_abs_diff_eq!(outcome.transfer_signed, 0.15, epsilon = 1e-15);
    }

    #[test]
    fn risk_lambda_scales_the_transfer_not_the_stake() {
        let state = make_state(&[0.3, 0.7]).unwrap();
        let params = plain_params(2).with_risk_lambda(vec![0.5, 0.5]).unwrap();
        let draw = TradeDraw::new(0, 1, 0.5, false).unwrap();
        let (next, outcome) = apply_trade(&state, &draw, &params).unwrap();
        assert_abs_diff_eq!(next.wealth()[0], 0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(next.wealth()[1], 0.625, epsilon = 1e-15);
        assert_abs_diff_eq!(outcome.stake, 0.15, epsilon = 1e-15);
        assert_abs_diff_eq!(outcome.transfer_signed, 0.075, epsilon = 1e-15);
    }

    #[test]
    fn taxation_redistributes_uniformly() {
        let state = make_state(&[1.0, 0.0]).unwrap();
        let taxed = apply_taxation(&state, 0.1).unwrap();
        assert_abs_diff_eq!(taxed.wealth()[0], 0.95, epsilon = 1e-15);
        assert_abs_diff_eq!(taxed.wealth()[1], 0.05, epsilon = 1e-15);

        let state = make_state(&[0.3, 0.7]).unwrap();
        let taxed = apply_taxation(&state, 0.2).unwrap();
        assert_abs_diff_eq!(taxed.wealth()[0], 0.34, epsilon = 1e-15);
        assert_abs_diff_eq!(taxed.wealth()[1], 0.66, epsilon = 1e-15);
    }

    #[test]
    fn taxation_fixes_the_uniform_state() {
        let state = WealthState::uniform(8).unwrap();
        let taxed = apply_taxation(&state, 0.37).unwrap();
        for (a, b) in state.wealth().iter().zip(taxed.wealth()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn taxation_rejects_chi_outside_open_interval() {
        let state = make_state(&[0.3, 0.7]).unwrap();
        assert_eq!(apply_taxation(&state, 0.0), Err(Error::ChiOutOfRange(0.0)));
        assert_eq!(apply_taxation(&state, 1.0), Err(Error::ChiOutOfRange(1.0)));
    }

    #[test]
    fn step_without_tax_is_apply_trade() {
        let state = make_state(&[0.3, 0.7]).unwrap();
        let params = plain_params(2);
        let draw = TradeDraw::new(0, 1, 0.5, true).unwrap();
        assert_eq!(
            step(&state, &draw, &params).unwrap(),
            apply_trade(&state, &draw, &params).unwrap()
        );
    }

    #[test]
    fn step_composes_trade_then_tax() {
        let state = make_state(&[0.3, 0.7]).unwrap();
        let params = plain_params(2).with_tax(0.1).unwrap();
        let draw = TradeDraw::new(0, 1, 0.5, true).unwrap();
        let (next, outcome) = step(&state, &draw, &params).unwrap();
        assert_abs_diff_eq!(next.wealth()[0], 0.185, epsilon = 1e-15);
        assert_abs_diff_eq!(next.wealth()[1], 0.815, epsilon = 1e-15);
        // The outcome reports the trade-level stake, untouched by the tax pass.
        assert_abs_diff_eq!(outcome.stake, 0.15, epsilon = 1e-15);
    }

    #[test]
    fn taxed_step_floors_every_agent() {
        let state = make_state(&[0.0, 0.2, 0.8]).unwrap();
        let params = ModelParams::new(3, 0.3, FractionDistribution::constant(0.5).unwrap())
            .unwrap()
            .with_tax(0.3)
            .unwrap();
        let draw = TradeDraw::new(2, 0, 0.9, true).unwrap();
        let (next, _) = step(&state, &draw, &params).unwrap();
        let floor = 0.3 / 3.0;
        for &x in next.wealth() {
            assert!(x >= floor - f64::EPSILON);
        }
    }

    #[test]
    fn params_validation() {
        let dist = FractionDistribution::constant(0.1).unwrap();
        assert_eq!(
            ModelParams::new(1, 0.0, dist.clone()).unwrap_err(),
            Error::TooFewAgents(1)
        );
        assert_eq!(
            ModelParams::new(2, 0.5, dist.clone()).unwrap_err(),
            Error::DeltaOutOfRange(0.5)
        );
        assert_eq!(
            ModelParams::new(2, -0.01, dist.clone()).unwrap_err(),
            Error::DeltaOutOfRange(-0.01)
        );
        // Boundaries: delta = 0 and delta just below 1/2 are accepted.
        assert!(ModelParams::new(2, 0.0, dist.clone()).is_ok());
        assert!(ModelParams::new(2, 0.4999999, dist.clone()).is_ok());

        let base = ModelParams::new(3, 0.0, dist).unwrap();
        assert_eq!(
            base.clone().with_risk_lambda(vec![0.5, 0.5]).unwrap_err(),
            Error::LambdaLengthMismatch {
                got: 2,
                expected: 3
            }
        );
        assert_eq!(
            base.clone()
                .with_risk_lambda(vec![0.5, 1.0, 0.5])
                .unwrap_err(),
            Error::LambdaOutOfRange {
                index: 1,
                value: 1.0
            }
        );
        assert_eq!(
            base.with_tax(1.0).unwrap_err(),
            Error::ChiOutOfRange(1.0)
        );
    }

    #[test]
    fn mismatched_state_and_params_are_rejected() {
        let state = make_state(&[0.3, 0.7]).unwrap();
        let draw = TradeDraw::new(0, 1, 0.5, true).unwrap();
        assert_eq!(
            apply_trade(&state, &draw, &plain_params(3)).unwrap_err(),
            Error::AgentCountMismatch {
                state: 2,
                params: 3
            }
        );
    }

    #[test]
    fn zero_wealth_is_absorbing_without_tax() {
        let state = make_state(&[0.0, 0.4, 0.6]).unwrap();
        let params = plain_params(3);
        for richer_wins in [true, false] {
            let draw = TradeDraw::new(0, 2, 0.9, richer_wins).unwrap();
            let (next, outcome) = apply_trade(&state, &draw, &params).unwrap();
            assert_eq!(next.wealth()[0].to_bits(), 0.0f64.to_bits());
            assert_eq!(next.wealth()[2].to_bits(), 0.6f64.to_bits());
            assert_eq!(outcome.stake, 0.0);
        }
    }
}
