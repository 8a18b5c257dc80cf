//! Epoch-based meta-algorithms over unbounded expert pools.
//!
//! Every epoch runs a fresh Exp4.R instance on a finite window of experts.
//! Epoch `l` queries `N_l = c 2^(alpha l)` experts for `T_l = C 2^l` rounds.
//! BEES always queries the first `N_l` experts; BEES.LB slides the window
//! to start at a lower bound on the best expert's index, advanced after each
//! epoch by probabilistic thresholding search ([`pts`]).

mod pts;
mod runner;
mod schedule;

use serde::{Deserialize, Serialize};

pub use pts::{pts, pts_fast};
pub use runner::{
    run_bees, run_bees_lb, run_exp4p_truncated, run_exp4r, run_exp4r_observed, run_meta_observed,
    RoundEvent,
};
pub use schedule::{
    default_c, epoch_count, epoch_lengths, make_schedule, schedule_preconditions_hold,
};

use crate::error::{Error, Result};
use crate::exp4r::Exp4ROutput;

/// Which learner a run used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// A single Exp4.R run over a fixed expert prefix.
    Exp4r,
    Bees,
    BeesLb,
    /// Exp4.P on the first `T` experts (Exp4.R with thresholds ignored).
    #[serde(rename = "exp4p_trunc")]
    Exp4pTrunc,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Exp4r => "exp4r",
            Algorithm::Bees => "bees",
            Algorithm::BeesLb => "bees_lb",
            Algorithm::Exp4pTrunc => "exp4p_trunc",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp4r" => Ok(Algorithm::Exp4r),
            "bees" => Ok(Algorithm::Bees),
            "bees_lb" => Ok(Algorithm::BeesLb),
            "exp4p_trunc" => Ok(Algorithm::Exp4pTrunc),
            other => Err(Error::Parameter(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Constants shared by BEES and BEES.LB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaParams {
    pub delta: f64,
    pub alpha: u32,
    pub c: u64,
    /// Base epoch length `C`.
    pub big_c: u64,
    /// Use `delta` in every epoch instead of `delta / L`.
    pub anytime: bool,
    /// Guarantee a uniform expert in every window by substituting it for the
    /// window's last slot when the window has none.
    pub inject_uniform: bool,
    /// Grow the expert count of a lengthened final epoch along with its length.
    pub grow_final_epoch: bool,
}

impl MetaParams {
    /// Defaults: anytime error rate, uniform injection on, scheduled final `N_L`.
    pub fn new(delta: f64, alpha: u32, c: u64, big_c: u64) -> Self {
        Self {
            delta,
            alpha,
            c,
            big_c,
            anytime: true,
            inject_uniform: true,
            grow_final_epoch: false,
        }
    }

    /// `C` from [`default_c`].
    pub fn with_default_c(delta: f64, alpha: u32, c: u64, num_actions: usize) -> Result<Self> {
        Ok(Self::new(delta, alpha, c, default_c(alpha, c, num_actions, delta)?))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Parameter(format!("delta {} outside (0, 1]", self.delta)));
        }
        if self.alpha == 0 || self.c == 0 || self.big_c == 0 {
            return Err(Error::Parameter("alpha, c and C must all be >= 1".into()));
        }
        Ok(())
    }
}

/// Size, length and window of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSchedule {
    /// Epoch index `l >= 1`.
    pub index: u32,
    pub num_experts: usize,
    pub length: usize,
    pub rho: f64,
    /// First global (1-based) index of the contiguous window.
    pub window_start: u64,
}

impl EpochSchedule {
    /// `window_start ..= window_start + N_l - 1`.
    pub fn window(&self) -> std::ops::RangeInclusive<u64> {
        self.window_start..=self.window_start + self.num_experts as u64 - 1
    }
}

/// What one epoch did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub schedule: EpochSchedule,
    /// First round (0-based) of the epoch.
    pub first_round: usize,
    /// Error rate handed to this epoch's Exp4.R.
    pub delta: f64,
    /// Uniform expert substituted for the window's last slot, if any.
    pub injected_uniform: Option<u64>,
    pub output: Exp4ROutput,
    /// Lower bound on the best expert's index after this epoch.
    pub lower_bound_after: u64,
    pub realized_reward: f64,
}

impl EpochRecord {
    pub fn rounds(&self) -> std::ops::Range<usize> {
        self.first_round..self.first_round + self.schedule.length
    }

    /// Experts actually queried, in advice-row order.
    pub fn experts(&self) -> Vec<u64> {
        queried_experts(&self.schedule, self.injected_uniform)
    }
}

pub(crate) fn queried_experts(schedule: &EpochSchedule, injected: Option<u64>) -> Vec<u64> {
    let mut ids: Vec<u64> = schedule.window().collect();
    if let (Some(u), Some(last)) = (injected, ids.last_mut()) {
        *last = u;
    }
    ids
}
