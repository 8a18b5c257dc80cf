//! Oblivious adversaries, expert pools and the reward oracle.

mod adversary;
mod oracle;
mod pool;
mod trace;

pub use adversary::{make_binary_adversary, AdversarySpec, RewardTable, ADVERSARY_STREAM};
pub use oracle::{
    best_expert, check_concentration_event, compute_regret, cumulative_reward, expected_reward,
    scan, OracleReport,
};
pub use pool::{make_unimodal_pool, ExpertPool, PoolSpec, QualityProfile, UnimodalPool, UnimodalPoolSpec};
pub use trace::{policy_hash, RoundRecord, RunTrace};

use crate::error::{Error, Result};

/// A reward table paired with the experts advising on it.
#[derive(Debug, Clone)]
pub struct Environment {
    pub rewards: RewardTable,
    pub pool: ExpertPool,
}

impl Environment {
    pub fn new(rewards: RewardTable, pool: ExpertPool) -> Result<Self> {
        if rewards.num_actions() != pool.num_actions() {
            return Err(Error::Dimension(format!(
                "reward table has {} actions, pool advises on {}",
                rewards.num_actions(),
                pool.num_actions()
            )));
        }
        Ok(Self { rewards, pool })
    }

    pub fn horizon(&self) -> usize {
        self.rewards.horizon()
    }

    pub fn num_actions(&self) -> usize {
        self.rewards.num_actions()
    }
}
