use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Stream id reserved for reward generation.
pub const ADVERSARY_STREAM: u64 = 0xAD7E_5A21;

/// A `T x K` reward matrix fixed before any learner acts.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable {
    horizon: usize,
    num_actions: usize,
    rewards: Vec<f64>,
    seed: Option<u64>,
}

impl RewardTable {
    /// Builds a table from explicit rows, each with one reward in `[0, 1]` per action.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let num_actions = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Dimension("reward table has no rounds".into()))?;
        if num_actions == 0 {
            return Err(Error::Dimension("reward table has no actions".into()));
        }
        let mut rewards = Vec::with_capacity(rows.len() * num_actions);
        for (t, row) in rows.iter().enumerate() {
            if row.len() != num_actions {
                return Err(Error::Dimension(format!(
                    "round {t} has {} rewards, expected {num_actions}",
                    row.len()
                )));
            }
            if let Some(r) = row.iter().find(|r| !(0.0..=1.0).contains(*r)) {
                return Err(Error::Domain(format!("reward {r} at round {t} outside [0, 1]")));
            }
            rewards.extend_from_slice(row);
        }
        Ok(Self {
            horizon: rows.len(),
            num_actions,
            rewards,
            seed: None,
        })
    }

    /// Same reward vector every round.
    pub fn constant(horizon: usize, row: &[f64]) -> Result<Self> {
        Self::from_rows(&vec![row.to_vec(); horizon])
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Seed the table was generated from, if any.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Reward vector of round `t` (0-based).
    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.rewards[t * self.num_actions..(t + 1) * self.num_actions]
    }

    #[inline]
    pub fn reward(&self, t: usize, action: usize) -> f64 {
        self.rewards[t * self.num_actions + action]
    }
}

/// Binary rewards: action `a` pays 1 in each round independently with
/// frequency `bias[a]`. The whole table is drawn from the seed up front.
pub fn make_binary_adversary(seed: u64, horizon: usize, bias: &[f64]) -> Result<RewardTable> {
    if horizon == 0 || bias.is_empty() {
        return Err(Error::Parameter("adversary needs T >= 1 and K >= 1".into()));
    }
    if let Some(b) = bias.iter().find(|b| !(0.0..=1.0).contains(*b)) {
        return Err(Error::Parameter(format!("bias {b} outside [0, 1]")));
    }
    let k = bias.len();
    let mut rng = RngStream::new(seed, ADVERSARY_STREAM);
    let mut rewards = Vec::with_capacity(horizon * k);
    for _ in 0..horizon {
        for &b in bias {
            rewards.push(if rng.next_f64() < b { 1.0 } else { 0.0 });
        }
    }
    Ok(RewardTable {
        horizon,
        num_actions: k,
        rewards,
        seed: Some(seed),
    })
}

/// Serializable description of an adversary; the seed is supplied per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversarySpec {
    /// Independent binary rewards with a per-action 1-frequency.
    Binary { bias: Vec<f64> },
}

impl AdversarySpec {
    pub fn num_actions(&self) -> usize {
        match self {
            AdversarySpec::Binary { bias } => bias.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AdversarySpec::Binary { bias } => {
                if bias.is_empty() {
                    return Err(Error::Parameter("bias profile is empty".into()));
                }
                if let Some(b) = bias.iter().find(|b| !(0.0..=1.0).contains(*b)) {
                    return Err(Error::Parameter(format!("bias {b} outside [0, 1]")));
                }
                Ok(())
            }
        }
    }

    pub fn build(&self, seed: u64, horizon: usize) -> Result<RewardTable> {
        match self {
            AdversarySpec::Binary { bias } => make_binary_adversary(seed, horizon, bias),
        }
    }
}
