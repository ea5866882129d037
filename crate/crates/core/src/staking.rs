//! Expected reward of a plain token-staking curation scheme, used as a
//! baseline against peer-prediction rewards.
//!
//! `n` curators each stake `stake` tokens; the `n_star` on the consensus side
//! split the whole pot, so each winner nets `k = (n - n_star) / n_star * stake`.
//! A curator who believes it sides with the consensus with probability `p`
//! and pays `cost` per curation expects `p (k - cost) - (1 - p)(stake + cost)`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StakingError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("odds ratio undefined: {0}")]
    UndefinedOdds(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StakingScenario {
    pub p: f64,
    pub stake: f64,
    pub n: u64,
    pub n_star: u64,
    #[serde(default)]
    pub cost: f64,
}

impl StakingScenario {
    pub fn new(p: f64, stake: f64, n: u64, n_star: u64, cost: f64) -> Result<Self, StakingError> {
        let s = StakingScenario {
            p,
            stake,
            n,
            n_star,
            cost,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), StakingError> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(StakingError::InvalidScenario(format!("p = {} outside [0, 1]", self.p)));
        }
        if !(self.stake > 0.0 && self.stake.is_finite()) {
            return Err(StakingError::InvalidScenario(format!("stake = {} must be positive", self.stake)));
        }
        if self.n_star == 0 || self.n_star > self.n {
            return Err(StakingError::InvalidScenario(format!(
                "need 0 < n_star <= n, got n_star = {}, n = {}",
                self.n_star, self.n
            )));
        }
        if !(self.cost >= 0.0 && self.cost.is_finite()) {
            return Err(StakingError::InvalidScenario(format!("cost = {} must be >= 0", self.cost)));
        }
        Ok(())
    }

    /// Net gain of a curator on the consensus side.
    pub fn consensus_gain(&self) -> f64 {
        (self.n - self.n_star) as f64 / self.n_star as f64 * self.stake
    }
}

/// `p (k - cost) - (1 - p)(stake + cost)`.
///
/// Evaluated as `stake (p n - n_star) / n_star - cost`, which is the same
/// polynomial but cancels exactly when `p = n_star / n` is representable.
pub fn staking_expected_reward(s: &StakingScenario) -> Result<f64, StakingError> {
    s.validate()?;
    let n = s.n as f64;
    let n_star = s.n_star as f64;
    Ok(s.stake * (s.p * n - n_star) / n_star - s.cost)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    Zero,
    Negative,
}

impl Sign {
    pub fn of(x: f64) -> Sign {
        if x > 0.0 {
            Sign::Positive
        } else if x < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Positive => "positive",
            Sign::Zero => "zero",
            Sign::Negative => "negative",
        })
    }
}

/// Subjective odds `p / (1 - p)` over actual odds `n_star / (n - n_star)`.
pub fn odds_ratio(s: &StakingScenario) -> Result<f64, StakingError> {
    s.validate()?;
    if s.p <= 0.0 || s.p >= 1.0 {
        return Err(StakingError::UndefinedOdds(format!("p = {}", s.p)));
    }
    if s.n_star == s.n {
        return Err(StakingError::UndefinedOdds("n_star = n".into()));
    }
    let subjective = s.p / (1.0 - s.p);
    let actual = s.n_star as f64 / (s.n - s.n_star) as f64;
    Ok(subjective / actual)
}

/// Sign of the zero-cost expected reward, decided by comparing the odds
/// ratio to one (cross-multiplied so that no division rounds).
pub fn odds_ratio_sign(s: &StakingScenario) -> Result<Sign, StakingError> {
    odds_ratio(s)?;
    let lhs = s.p * (s.n - s.n_star) as f64;
    let rhs = (1.0 - s.p) * s.n_star as f64;
    Ok(if lhs > rhs {
        Sign::Positive
    } else if lhs < rhs {
        Sign::Negative
    } else {
        Sign::Zero
    })
}
