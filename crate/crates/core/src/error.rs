//! Error type shared by all modules of the crate.

/// Errors reported by model construction, sampling, metrics, and runners.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("wealth vector is empty")]
    EmptyWealth,
    #[error("wealth entry {index} is negative ({value})")]
    NegativeWealth { index: usize, value: f64 },
    #[error("wealth entry {index} is not finite ({value})")]
    NonFiniteWealth { index: usize, value: f64 },
    #[error("wealth vector sums to zero")]
    ZeroTotalWealth,
    #[error("need at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("bias delta must lie in [0, 0.5), got {0}")]
    DeltaOutOfRange(f64),
    #[error("risk lambda has length {got}, expected {expected}")]
    LambdaLengthMismatch { got: usize, expected: usize },
    #[error("risk lambda entry {index} must lie in (0, 1), got {value}")]
    LambdaOutOfRange { index: usize, value: f64 },
    #[error("tax rate chi must lie in (0, 1), got {0}")]
    ChiOutOfRange(f64),
    #[error("a trade needs two distinct agents, got index {0} twice")]
    IdenticalAgents(usize),
    #[error("trade fraction must lie strictly in (0, 1), got {0}")]
    FractionOutOfRange(f64),
    #[error("agent index {index} out of range for {n_agents} agents")]
    IndexOutOfRange { index: usize, n_agents: usize },
    #[error("state has {state} agents but params expect {params}")]
    AgentCountMismatch { state: usize, params: usize },
    #[error("constant fraction beta must lie in (0, 1), got {0}")]
    InvalidConstantFraction(f64),
    #[error("uniform fraction bounds must satisfy 0 < lo < hi < 1, got lo={lo}, hi={hi}")]
    InvalidUniformFraction { lo: f64, hi: f64 },
    #[error("beta fraction shapes must be positive and finite, got alpha={alpha}, beta={beta}")]
    InvalidBetaFraction { alpha: f64, beta: f64 },
    #[error("poorer role must not out-wealth richer role ({poorer} > {richer})")]
    RoleOrderViolated { poorer: f64, richer: f64 },
    #[error("max_steps must be at least 1")]
    ZeroMaxSteps,
    #[error("record_every must be at least 1")]
    ZeroRecordEvery,
    #[error("condensation epsilon must lie in (0, 1), got {0}")]
    EpsilonOutOfRange(f64),
    #[error(
        "condensation threshold 1-epsilon is unreachable under the taxation floor: \
         epsilon {epsilon} < chi*(N-1)/N = {min_epsilon}"
    )]
    UnreachableCondensation { epsilon: f64, min_epsilon: f64 },
    #[error("initial wealth vector has length {got}, expected {expected}")]
    InitialLengthMismatch { got: usize, expected: usize },
    #[error("need at least 1 trajectory")]
    ZeroTrajectories,
    #[error("win probabilities are only claimed for the unbiased model; got delta = {0}")]
    BiasedWinProbability(f64),
    #[error("only {condensed} of {total} trajectories condensed; win probabilities need all of them")]
    NotAllCondensed { condensed: u64, total: u64 },
    #[error("this operation requires the plain model (no risk lambda, no taxation)")]
    PlainModelRequired,
    #[error("taxation precludes condensation; remove chi from this study")]
    TaxationPrecludesCondensation,
    #[error("checkpoint list must be nonempty, strictly increasing, and start at step >= 1")]
    BadCheckpoints,
    #[error("grid must contain at least one point")]
    EmptyGrid,
}

pub type Result<T> = std::result::Result<T, Error>;
