//! Exp4.R: exponential weighting over a finite expert set with
//! importance-weighted reward estimates, a variance-proxy bonus and, at the
//! end of the horizon, per-expert ranking thresholds.
//!
//! A round is split in two phases so the caller owns sampling:
//!
//! ```text
//! let p = learner.policy(&advice)?;
//! let a = sample_categorical(&p, &mut rng);
//! learner.update(&advice, a, reward[a], &p)?;
//! ```
//!
//! Weights are kept as natural logarithms; the multiplicative update becomes
//! `ln w_i += (rho / 2) (yhat_i + beta * vhat_i)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{check_rho, AdviceMatrix, LogWeightVector, ProbVector};

/// `e - 2`, the constant in the regime condition.
pub const E_MINUS_2: f64 = std::f64::consts::E - 2.0;

/// Returns `true` iff `T >= max(4 K ln N, ln(2N/delta) / ((e - 2) K))`.
///
/// The uniform-expert half of the regime condition is the caller's concern.
pub fn check_assumption1(num_actions: usize, num_experts: usize, horizon: usize, delta: f64) -> bool {
    let k = num_actions as f64;
    let n = num_experts as f64;
    let t = horizon as f64;
    let first = 4.0 * k * n.ln();
    let second = (2.0 * n / delta).ln() / (E_MINUS_2 * k);
    t >= first.max(second)
}

/// `sqrt(ln N / (K T))`. Zero for a single expert.
pub fn rho_default(num_experts: usize, num_actions: usize, horizon: usize) -> f64 {
    ((num_experts as f64).ln() / (num_actions as f64 * horizon as f64)).sqrt()
}

/// `sqrt(ln(2N/delta) / (K T))`.
pub fn beta_for(num_experts: usize, num_actions: usize, horizon: usize, delta: f64) -> f64 {
    ((2.0 * num_experts as f64 / delta).ln() / (num_actions as f64 * horizon as f64)).sqrt()
}

/// Importance-weighted reward estimate `xi_a r / p_a` for the played action.
#[inline]
pub fn importance_estimate(advice: &[f64], action: usize, reward: f64, policy: &[f64]) -> f64 {
    advice[action] * reward / policy[action]
}

/// Variance proxy `sum_b xi_b / p_b`.
#[inline]
pub fn variance_proxy(advice: &[f64], policy: &[f64]) -> f64 {
    advice.iter().zip(policy).map(|(x, p)| x / p).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp4RConfig {
    /// Error rate in `(0, 1]`.
    pub delta: f64,
    /// Number of rounds `T`.
    pub horizon: usize,
    /// Exploration floor in `(0, 1/K]`.
    pub rho: f64,
    /// Global (1-based) indices of the queried experts, in advice-row order.
    pub expert_ids: Vec<u64>,
    pub num_actions: usize,
}

impl Exp4RConfig {
    /// Uses the default exploration floor `sqrt(ln N / (K T))`, which needs `N >= 2`.
    pub fn with_default_rho(
        delta: f64,
        horizon: usize,
        expert_ids: Vec<u64>,
        num_actions: usize,
    ) -> Result<Self> {
        if expert_ids.len() < 2 {
            return Err(Error::Parameter(
                "the default exploration floor needs at least two experts".into(),
            ));
        }
        let rho = rho_default(expert_ids.len(), num_actions, horizon);
        Ok(Self {
            delta,
            horizon,
            rho,
            expert_ids,
            num_actions,
        })
    }

    pub fn num_experts(&self) -> usize {
        self.expert_ids.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Parameter(format!("delta {} outside (0, 1]", self.delta)));
        }
        if self.horizon == 0 {
            return Err(Error::Parameter("horizon must be positive".into()));
        }
        if self.num_actions == 0 {
            return Err(Error::Parameter("need at least one action".into()));
        }
        if self.expert_ids.is_empty() {
            return Err(Error::Parameter("need at least one expert".into()));
        }
        check_rho(self.rho, self.num_actions)?;
        let mut ids = self.expert_ids.clone();
        ids.sort_unstable();
        if ids[0] == 0 {
            return Err(Error::Parameter("expert indices are 1-based".into()));
        }
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Parameter("expert indices must be distinct".into()));
        }
        Ok(())
    }
}

/// Learner state between rounds.
#[derive(Debug, Clone)]
pub struct Exp4R {
    config: Exp4RConfig,
    log_w: LogWeightVector,
    vhat_sum: Vec<f64>,
    beta: f64,
    t: usize,
    inv_policy: Vec<f64>,
}

impl Exp4R {
    pub fn new(config: Exp4RConfig) -> Result<Self> {
        config.validate()?;
        let n = config.num_experts();
        let k = config.num_actions;
        if !check_assumption1(k, n, config.horizon, config.delta) {
            log::warn!(
                "Exp4.R outside its guarantee regime: K={k}, N={n}, T={}, delta={}",
                config.horizon,
                config.delta
            );
        }
        let beta = beta_for(n, k, config.horizon, config.delta);
        Ok(Self {
            log_w: LogWeightVector::zeros(n),
            vhat_sum: vec![0.0; n],
            beta,
            t: 0,
            inv_policy: vec![0.0; k],
            config,
        })
    }

    pub fn config(&self) -> &Exp4RConfig {
        &self.config
    }

    pub fn log_weights(&self) -> &LogWeightVector {
        &self.log_w
    }

    pub fn vhat_sum(&self) -> &[f64] {
        &self.vhat_sum
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Rounds completed so far.
    pub fn round(&self) -> usize {
        self.t
    }

    pub fn is_finished(&self) -> bool {
        self.t == self.config.horizon
    }

    fn check_advice(&self, advice: &AdviceMatrix) -> Result<()> {
        if advice.experts() != self.config.num_experts() || advice.actions() != self.config.num_actions {
            return Err(Error::Dimension(format!(
                "advice is {}x{}, learner expects {}x{}",
                advice.experts(),
                advice.actions(),
                self.config.num_experts(),
                self.config.num_actions
            )));
        }
        Ok(())
    }

    /// Mixed action distribution for the current round. Does not change state.
    pub fn policy(&self, advice: &AdviceMatrix) -> Result<ProbVector> {
        if self.is_finished() {
            return Err(Error::Sequencing(format!(
                "all {} rounds already played",
                self.config.horizon
            )));
        }
        self.check_advice(advice)?;
        let k = self.config.num_actions;
        let m = self.log_w.max();
        let mut mix = vec![0.0; k];
        let mut z = 0.0;
        for (row, &lw) in advice.rows().zip(self.log_w.as_slice()) {
            let w = (lw - m).exp();
            z += w;
            for (acc, &x) in mix.iter_mut().zip(row) {
                *acc += w * x;
            }
        }
        let rho = self.config.rho;
        let scale = (1.0 - k as f64 * rho) / z;
        mix.iter_mut().for_each(|pa| *pa = scale * *pa + rho);
        Ok(ProbVector::from_vec_unchecked(mix))
    }

    /// Importance-weighted update after playing `action` (0-based) and observing `reward`.
    pub fn update(
        &mut self,
        advice: &AdviceMatrix,
        action: usize,
        reward: f64,
        policy: &ProbVector,
    ) -> Result<()> {
        if self.is_finished() {
            return Err(Error::Sequencing(format!(
                "all {} rounds already played",
                self.config.horizon
            )));
        }
        self.check_advice(advice)?;
        let k = self.config.num_actions;
        if policy.len() != k {
            return Err(Error::Dimension(format!("policy has {} entries, expected {k}", policy.len())));
        }
        if action >= k {
            return Err(Error::Index(format!("action {action} with {k} actions")));
        }
        if !(0.0..=1.0).contains(&reward) {
            return Err(Error::Domain(format!("reward {reward} outside [0, 1]")));
        }
        for (inv, &p) in self.inv_policy.iter_mut().zip(policy.as_slice()) {
            if p <= 0.0 {
                return Err(Error::Domain("policy has a zero entry".into()));
            }
            *inv = 1.0 / p;
        }
        let rho = self.config.rho;
        let half_rho = 0.5 * rho;
        let beta = self.beta;
        let scaled_reward = reward * self.inv_policy[action];
        let inv_p = &self.inv_policy;
        for ((row, lw), vsum) in advice
            .rows()
            .zip(self.log_w.as_mut_slice())
            .zip(self.vhat_sum.iter_mut())
        {
            let yhat = row[action] * scaled_reward;
            let vhat: f64 = row.iter().zip(inv_p).map(|(x, ip)| x * ip).sum();
            debug_assert!(
                yhat >= 0.0 && yhat <= (1.0 + 1e-9) / rho,
                "estimate {yhat} outside [0, 1/rho]"
            );
            debug_assert!(
                vhat >= 1.0 - 1e-9 && vhat <= (1.0 + 1e-9) / rho,
                "variance proxy {vhat} outside [1, 1/rho]"
            );
            *lw += half_rho * (yhat + beta * vhat);
            *vsum += vhat;
        }
        self.t += 1;
        Ok(())
    }

    /// Final log-weights and ranking thresholds. Only defined after the full horizon.
    pub fn finalize(&self) -> Result<Exp4ROutput> {
        if !self.is_finished() {
            return Err(Error::Sequencing(format!(
                "thresholds need all {} rounds, only {} played",
                self.config.horizon, self.t
            )));
        }
        let n = self.config.num_experts();
        let kt = self.config.num_actions as f64 * self.config.horizon as f64;
        let log_term = (2.0 * n as f64 / self.config.delta).ln();
        let epsilon = self
            .vhat_sum
            .iter()
            .map(|v| (1.0 + v / kt) * log_term)
            .collect();
        Ok(Exp4ROutput {
            log_w_final: self.log_w.clone(),
            epsilon,
            vhat_sum: self.vhat_sum.clone(),
            beta: self.beta,
            rho: self.config.rho,
            delta: self.config.delta,
            horizon: self.config.horizon,
            num_actions: self.config.num_actions,
        })
    }
}

/// Outputs of a completed Exp4.R run, plus the constants needed to audit them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp4ROutput {
    pub log_w_final: LogWeightVector,
    pub epsilon: Vec<f64>,
    pub vhat_sum: Vec<f64>,
    pub beta: f64,
    pub rho: f64,
    pub delta: f64,
    pub horizon: usize,
    pub num_actions: usize,
}

impl Exp4ROutput {
    pub fn num_experts(&self) -> usize {
        self.epsilon.len()
    }

    /// `true` iff `ln w_i - ln w_j > epsilon_i` (local 0-based indices), which
    /// certifies with confidence `1 - delta` that expert `i` earned strictly more
    /// than expert `j` in expectation.
    pub fn rank_dominates(&self, i: usize, j: usize) -> Result<bool> {
        let n = self.num_experts();
        if i >= n || j >= n {
            return Err(Error::Index(format!("pair ({i}, {j}) with {n} experts")));
        }
        if i == j {
            return Err(Error::Parameter("an expert cannot dominate itself".into()));
        }
        Ok(self.log_w_final[i] - self.log_w_final[j] > self.epsilon[i])
    }

    /// Cumulative reward estimates recovered from the closed form
    /// `ln w_i = (rho/2)(Rhat_i + beta * Vhat_i)`.
    pub fn estimated_rewards(&self) -> Vec<f64> {
        self.log_w_final
            .as_slice()
            .iter()
            .zip(&self.vhat_sum)
            .map(|(lw, v)| 2.0 * lw / self.rho - self.beta * v)
            .collect()
    }
}
