//! All randomness: pair selection, stake fractions, biased coin flips, and
//! reproducible per-trajectory stream derivation.
//!
//! Streams are ChaCha8 keyed by a master seed, with the trajectory index
//! selecting one of 2^64 non-overlapping keystreams. Two trajectories of one
//! ensemble can therefore never share randomness, and every draw sequence is
//! a pure function of its [`StreamKey`] — the foundation of the bitwise
//! reproducibility contract upheld by the experiment runners.

use rand::distr::Uniform;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Beta;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution of the stake fraction drawn each step; every variant yields
/// values strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub enum FractionDistribution {
    /// Degenerate: the same fraction every step.
    Constant(f64),
    /// Uniform on `[lo, hi)` with `0 < lo < hi < 1`.
    Uniform { lo: f64, hi: f64 },
    /// Beta(alpha, beta), redrawn on the (measure-zero) event that a sample
    /// rounds to 0 or 1 in floating point.
    Beta { alpha: f64, beta: f64 },
}

impl FractionDistribution {
    pub fn constant(beta: f64) -> Result<Self> {
        let dist = Self::Constant(beta);
        dist.validate()?;
        Ok(dist)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let dist = Self::Uniform { lo, hi };
        dist.validate()?;
        Ok(dist)
    }

    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        let dist = Self::Beta { alpha, beta };
        dist.validate()?;
        Ok(dist)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Constant(beta) => {
                if !beta.is_finite() || beta <= 0.0 || beta >= 1.0 {
                    return Err(Error::InvalidConstantFraction(beta));
                }
            }
            Self::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo <= 0.0 || lo >= hi || hi >= 1.0 {
                    return Err(Error::InvalidUniformFraction { lo, hi });
                }
            }
            Self::Beta { alpha, beta } => {
                if !alpha.is_finite() || !beta.is_finite() || alpha <= 0.0 || beta <= 0.0 {
                    return Err(Error::InvalidBetaFraction { alpha, beta });
                }
            }
        }
        Ok(())
    }
}

/// Identifies one trajectory's random stream within an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub master_seed: u64,
    pub trajectory_index: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, trajectory_index: u64) -> Self {
        Self {
            master_seed,
            trajectory_index,
        }
    }
}

/// The generator backing one trajectory.
pub type TrajectoryRng = ChaCha8Rng;

/// Derives the deterministic stream for a key. Distinct trajectory indices
/// select distinct ChaCha streams under the same cipher key, so they cannot
/// overlap by construction.
pub fn derive_stream(key: StreamKey) -> TrajectoryRng {
    let mut rng = ChaCha8Rng::seed_from_u64(key.master_seed);
    rng.set_stream(key.trajectory_index);
    rng
}

/// Draws an ordered pair of distinct agents, uniform over all N(N-1) pairs.
pub fn draw_pair<R: Rng + ?Sized>(rng: &mut R, n_agents: usize) -> Result<(usize, usize)> {
    if n_agents < 2 {
        return Err(Error::TooFewAgents(n_agents));
    }
    let i = rng.random_range(0..n_agents);
    let mut j = rng.random_range(0..n_agents - 1);
    if j >= i {
        j += 1;
    }
    Ok((i, j))
}

/// Resampling-ready form of a [`FractionDistribution`]; build once, draw many.
#[derive(Debug, Clone)]
pub enum FractionSampler {
    Constant(f64),
    Uniform(Uniform<f64>),
    Beta(Beta<f64>),
}

impl FractionSampler {
    pub fn new(dist: &FractionDistribution) -> Result<Self> {
        dist.validate()?;
        Ok(match *dist {
            FractionDistribution::Constant(beta) => Self::Constant(beta),
            FractionDistribution::Uniform { lo, hi } => Self::Uniform(
                Uniform::new(lo, hi).expect("bounds validated above"),
            ),
            FractionDistribution::Beta { alpha, beta } => Self::Beta(
                Beta::new(alpha, beta).expect("shapes validated above"),
            ),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Constant(beta) => *beta,
            Self::Uniform(u) => u.sample(rng),
            Self::Beta(b) => loop {
                let x = b.sample(rng);
                if x > 0.0 && x < 1.0 {
                    break x;
                }
            },
        }
    }
}

/// Draws one stake fraction; the result lies strictly in (0, 1).
pub fn draw_fraction<R: Rng + ?Sized>(rng: &mut R, dist: &FractionDistribution) -> Result<f64> {
    Ok(FractionSampler::new(dist)?.sample(rng))
}

/// Flips the trade coin: `true` (the richer agent wins) with probability
/// `1/2 + delta`.
pub fn draw_richer_wins<R: Rng + ?Sized>(rng: &mut R, delta: f64) -> Result<bool> {
    if !delta.is_finite() || !(0.0..0.5).contains(&delta) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    Ok(rng.random_bool(0.5 + delta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(seed: u64, idx: u64) -> TrajectoryRng {
        derive_stream(StreamKey::new(seed, idx))
    }

    #[test]
    fn identical_keys_give_identical_streams() {
        let a: Vec<u64> = stream(42, 0).random_iter().take(1000).collect();
        let b: Vec<u64> = stream(42, 0).random_iter().take(1000).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_keys_give_distinct_streams() {
        let base: Vec<u64> = stream(42, 0).random_iter().take(64).collect();
        let other_idx: Vec<u64> = stream(42, 1).random_iter().take(64).collect();
        let other_seed: Vec<u64> = stream(1, 0).random_iter().take(64).collect();
        let third_seed: Vec<u64> = stream(2, 0).random_iter().take(64).collect();
        assert_ne!(base, other_idx);
        assert_ne!(base, other_seed);
        assert_ne!(other_seed, third_seed);
    }

    #[test]
    fn draw_pair_two_agents_hits_both_orders() {
        let mut rng = stream(7, 0);
        let mut seen = [0u32; 2];
        for _ in 0..4000 {
            let (i, j) = draw_pair(&mut rng, 2).unwrap();
            assert_ne!(i, j);
            seen[i] += 1;
        }
        // (0,1) and (1,0) each with probability 1/2; 3 sigma of 2000 is ~95.
        assert!((seen[0] as f64 - 2000.0).abs() < 3.0 * (4000.0f64 * 0.25).sqrt());
    }

    #[test]
    fn draw_pair_is_uniform_over_ordered_pairs() {
        // N=3: six ordered pairs, 60_000 draws, expected 10_000 per cell.
        let mut rng = stream(11, 0);
        let mut counts = [[0u32; 3]; 3];
        let n_draws = 60_000;
        for _ in 0..n_draws {
            let (i, j) = draw_pair(&mut rng, 3).unwrap();
            counts[i][j] += 1;
        }
        let expected = n_draws as f64 / 6.0;
        let sigma = (n_draws as f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
        let mut chi_sq = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    assert_eq!(counts[i][j], 0);
                    continue;
                }
                let dev = counts[i][j] as f64 - expected;
                assert!(
                    dev.abs() <= 3.0 * sigma,
                    "pair ({i},{j}) count {} too far from {expected}",
                    counts[i][j]
                );
                chi_sq += dev * dev / expected;
            }
        }
        // 5 degrees of freedom; 20.5 is roughly the 0.999 quantile.
        assert!(chi_sq < 20.5, "chi-square {chi_sq} too large");
    }

    #[test]
    fn pair_membership_marginal_is_two_over_n() {
        let n = 5;
        let n_draws = 100_000;
        let mut rng = stream(13, 0);
        let mut member = vec![0u32; n];
        for _ in 0..n_draws {
            let (i, j) = draw_pair(&mut rng, n).unwrap();
            member[i] += 1;
            member[j] += 1;
        }
        let p = 2.0 / n as f64;
        let sigma = (n_draws as f64 * p * (1.0 - p)).sqrt();
        for (agent, &count) in member.iter().enumerate() {
            assert!(
                (count as f64 - n_draws as f64 * p).abs() <= 3.0 * sigma,
                "agent {agent} membership count {count} off"
            );
        }
    }

    #[test]
    fn draw_pair_needs_two_agents() {
        assert_eq!(draw_pair(&mut stream(0, 0), 1), Err(Error::TooFewAgents(1)));
    }

    #[test]
    fn constant_fraction_is_exact() {
        let dist = FractionDistribution::constant(0.25).unwrap();
        let mut rng = stream(3, 0);
        for _ in 0..100 {
            assert_eq!(draw_fraction(&mut rng, &dist).unwrap(), 0.25);
        }
    }

    #[test]
    fn uniform_fraction_mean_and_range() {
        let dist = FractionDistribution::uniform(0.1, 0.9).unwrap();
        let mut rng = stream(5, 0);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = draw_fraction(&mut rng, &dist).unwrap();
            assert!(x > 0.0 && x < 1.0);
            sum += x;
        }
        assert!((sum / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn beta_fraction_mean_and_range() {
        let dist = FractionDistribution::beta(2.0, 2.0).unwrap();
        let mut rng = stream(6, 0);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = draw_fraction(&mut rng, &dist).unwrap();
            assert!(x > 0.0 && x < 1.0);
            sum += x;
        }
        // Beta(2,2) has mean 1/2.
        assert!((sum / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn fraction_distribution_validation() {
        assert!(FractionDistribution::constant(0.0).is_err());
        assert!(FractionDistribution::constant(1.0).is_err());
        assert!(FractionDistribution::uniform(0.0, 0.9).is_err());
        assert!(FractionDistribution::uniform(0.5, 0.5).is_err());
        assert!(FractionDistribution::uniform(0.2, 1.0).is_err());
        assert!(FractionDistribution::beta(0.0, 1.0).is_err());
        assert!(FractionDistribution::beta(2.0, -1.0).is_err());
    }

    #[test]
    fn coin_frequency_unbiased() {
        let mut rng = stream(21, 0);
        let n = 1_000_000;
        let mut hits = 0u64;
        for _ in 0..n {
            if draw_richer_wins(&mut rng, 0.0).unwrap() {
                hits += 1;
            }
        }
        // 3 sigma of a fair coin over 1e6 flips is 0.0015.
        assert!((hits as f64 / n as f64 - 0.5).abs() < 0.0015);
    }

    #[test]
    fn coin_frequency_biased() {
        let mut rng = stream(22, 0);
        let n = 1_000_000;
        let mut hits = 0u64;
        for _ in 0..n {
            if draw_richer_wins(&mut rng, 0.25).unwrap() {
                hits += 1;
            }
        }
        assert!((hits as f64 / n as f64 - 0.75).abs() < 0.0013);
    }

    #[test]
    fn coin_domain_edges() {
        let mut rng = stream(23, 0);
        assert!(draw_richer_wins(&mut rng, 0.0).is_ok());
        assert!(draw_richer_wins(&mut rng, 0.49999999).is_ok());
        assert_eq!(
            draw_richer_wins(&mut rng, 0.5),
            Err(Error::DeltaOutOfRange(0.5))
        );
        assert_eq!(
            draw_richer_wins(&mut rng, -0.1),
            Err(Error::DeltaOutOfRange(-0.1))
        );
    }
}
