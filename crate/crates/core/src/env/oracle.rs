//! Exact expected rewards computed from the full reward table.
//!
//! Rounds are 0-based half-open ranges, experts 1-based.

use std::ops::{Range, RangeInclusive};

use crate::env::{Environment, RunTrace};
use crate::error::{Error, Result};
use crate::meta::EpochRecord;

fn check_round(env: &Environment, t: usize) -> Result<()> {
    if t >= env.horizon() {
        return Err(Error::Index(format!("round {t} beyond horizon {}", env.horizon())));
    }
    Ok(())
}

fn check_interval(env: &Environment, interval: &Range<usize>) -> Result<()> {
    if interval.start > interval.end || interval.end > env.horizon() {
        return Err(Error::Index(format!(
            "interval {interval:?} outside 0..{}",
            env.horizon()
        )));
    }
    Ok(())
}

fn check_expert(expert: u64) -> Result<()> {
    if expert == 0 {
        return Err(Error::Index("expert indices are 1-based".into()));
    }
    Ok(())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y_i(t) = sum_a xi^i_a(t) r_a(t)`.
pub fn expected_reward(env: &Environment, expert: u64, t: usize) -> Result<f64> {
    check_expert(expert)?;
    check_round(env, t)?;
    let mut buf = vec![0.0; env.num_actions()];
    env.pool.advice_into(expert, t, &mut buf);
    Ok(dot(&buf, env.rewards.row(t)))
}

/// `R_i` over `interval`.
pub fn cumulative_reward(env: &Environment, expert: u64, interval: Range<usize>) -> Result<f64> {
    check_expert(expert)?;
    check_interval(env, &interval)?;
    let mut buf = vec![0.0; env.num_actions()];
    Ok(interval
        .map(|t| {
            env.pool.advice_into(expert, t, &mut buf);
            dot(&buf, env.rewards.row(t))
        })
        .sum())
}

/// Cumulative rewards of a contiguous block of experts over one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub interval: Range<usize>,
    pub first_expert: u64,
    /// `cumulative[k]` is `R_{first_expert + k}`.
    pub cumulative: Vec<f64>,
    /// Lowest index attaining the maximum.
    pub best: u64,
}

impl OracleReport {
    pub fn reward_of(&self, expert: u64) -> Option<f64> {
        expert
            .checked_sub(self.first_expert)
            .and_then(|k| self.cumulative.get(k as usize).copied())
    }

    pub fn best_reward(&self) -> f64 {
        self.cumulative[(self.best - self.first_expert) as usize]
    }

    /// `R_best - sum of realized rewards`.
    pub fn regret(&self, trace: &RunTrace) -> Result<f64> {
        if self.interval != (0..trace.horizon) {
            return Err(Error::Dimension(format!(
                "oracle covers rounds {:?}, trace has horizon {}",
                self.interval, trace.horizon
            )));
        }
        Ok(self.best_reward() - trace.total_reward)
    }

    /// Whether `R_{i-1} <= R_i` up to the best index and `R_i >= R_{i+1}` after.
    pub fn is_unimodal(&self) -> bool {
        let peak = (self.best - self.first_expert) as usize;
        let r = &self.cumulative;
        r[..=peak].windows(2).all(|w| w[0] <= w[1]) && r[peak..].windows(2).all(|w| w[0] >= w[1])
    }
}

/// Computes `R_i(interval)` for every `i` in `candidates`.
pub fn scan(env: &Environment, interval: Range<usize>, candidates: RangeInclusive<u64>) -> Result<OracleReport> {
    check_interval(env, &interval)?;
    let (&lo, &hi) = (candidates.start(), candidates.end());
    check_expert(lo)?;
    if hi < lo {
        return Err(Error::Parameter("empty candidate range".into()));
    }
    let k = env.num_actions();
    let mut buf = vec![0.0; k];
    let cumulative: Vec<f64> = candidates
        .map(|i| {
            interval
                .clone()
                .map(|t| {
                    env.pool.advice_into(i, t, &mut buf);
                    dot(&buf, env.rewards.row(t))
                })
                .sum()
        })
        .collect();
    let mut best = 0;
    for (k, &r) in cumulative.iter().enumerate() {
        if r > cumulative[best] {
            best = k;
        }
    }
    Ok(OracleReport {
        interval,
        first_expert: lo,
        cumulative,
        best: lo + best as u64,
    })
}

/// `min argmax_{i in candidates} R_i(interval)`.
pub fn best_expert(env: &Environment, interval: Range<usize>, candidates: RangeInclusive<u64>) -> Result<u64> {
    Ok(scan(env, interval, candidates)?.best)
}

/// Regret of `trace` against the best expert in `candidates` over the whole horizon.
pub fn compute_regret(trace: &RunTrace, env: &Environment, candidates: RangeInclusive<u64>) -> Result<f64> {
    if trace.horizon > env.horizon() {
        return Err(Error::Dimension(format!(
            "trace has {} rounds, environment only {}",
            trace.horizon,
            env.horizon()
        )));
    }
    scan(env, 0..trace.horizon, candidates)?.regret(trace)
}

/// Whether every expert of one epoch satisfies both concentration bounds
///
/// `-ln(2N/d) sqrt(KT / ln N) - sqrt(ln N / KT) Vhat_i <= R_i - Rhat_i`
/// and `R_i - Rhat_i <= sqrt(ln(2N/d)) (Vhat_i / sqrt(KT) + sqrt(KT))`,
///
/// with `R_i` from the oracle and `Rhat_i` recovered from the final log weights.
pub fn check_concentration_event(record: &EpochRecord, env: &Environment, delta: f64) -> Result<bool> {
    let out = &record.output;
    let experts = record.experts();
    let n = experts.len();
    if out.log_w_final.len() != n || out.vhat_sum.len() != n || out.epsilon.len() != n {
        return Err(Error::Audit(format!(
            "epoch {} queried {n} experts but recorded {} weights, {} variances",
            record.schedule.index,
            out.log_w_final.len(),
            out.vhat_sum.len()
        )));
    }
    if out.horizon != record.schedule.length || out.rho.is_nan() || out.rho <= 0.0 {
        return Err(Error::Audit(format!("epoch {} output is inconsistent with its schedule", record.schedule.index)));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Parameter(format!("delta {delta} outside (0, 1]")));
    }
    let kt = (out.num_actions * out.horizon) as f64;
    let ln_n = (n as f64).ln();
    let log_term = (2.0 * n as f64 / delta).ln();
    let rhat = out.estimated_rewards();
    for ((&id, &rh), &v) in experts.iter().zip(&rhat).zip(&out.vhat_sum) {
        let r = cumulative_reward(env, id, record.rounds())?;
        let gap = r - rh;
        let lower = -log_term * (kt / ln_n).sqrt() - (ln_n / kt).sqrt() * v;
        let upper = log_term.sqrt() * (v / kt.sqrt() + kt.sqrt());
        if !(lower <= gap && gap <= upper) {
            return Ok(false);
        }
    }
    Ok(true)
}
