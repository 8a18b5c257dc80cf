use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meta::{Algorithm, EpochRecord, MetaParams};

/// What happened in one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 0-based action played.
    pub action: usize,
    pub reward: f64,
    /// [`policy_hash`] of the distribution the action was drawn from.
    pub policy_hash: u64,
}

/// Complete record of one run, sufficient to recompute regret and audit
/// every epoch's ranking output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub num_actions: usize,
    pub seed: u64,
    /// Meta-algorithm constants; `None` for single-instance runs.
    pub params: Option<MetaParams>,
    pub rounds: Vec<RoundRecord>,
    /// One record per Exp4.R instance. Single-instance runs have exactly one.
    pub epochs: Vec<EpochRecord>,
    pub total_reward: f64,
}

impl RunTrace {
    /// Lower bound after the last epoch.
    pub fn final_lower_bound(&self) -> Option<u64> {
        self.epochs.last().map(|e| e.lower_bound_after)
    }

    /// Serializes to a single JSON document. Floats round-trip exactly.
    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("trace serialization cannot fail")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parameter(format!("bad trace: {e}")))
    }

    /// Checks the bookkeeping invariants: one record per round, epochs tile
    /// the horizon, and the total matches the per-round rewards.
    pub fn validate(&self) -> Result<()> {
        if self.rounds.len() != self.horizon {
            return Err(Error::Audit(format!(
                "{} round records for horizon {}",
                self.rounds.len(),
                self.horizon
            )));
        }
        let mut next = 0;
        for e in &self.epochs {
            if e.first_round != next {
                return Err(Error::Audit(format!("epoch {} starts at round {}", e.schedule.index, e.first_round)));
            }
            next += e.schedule.length;
        }
        if next != self.horizon {
            return Err(Error::Audit(format!("epochs cover {next} of {} rounds", self.horizon)));
        }
        let sum: f64 = self.rounds.iter().map(|r| r.reward).sum();
        if sum != self.total_reward {
            return Err(Error::Audit(format!("total reward {} but rounds sum to {sum}", self.total_reward)));
        }
        Ok(())
    }
}

/// FNV-1a over the IEEE-754 bit patterns of `policy`.
pub fn policy_hash(policy: &[f64]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for x in policy {
        for byte in x.to_bits().to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(PRIME);
        }
    }
    h
}
