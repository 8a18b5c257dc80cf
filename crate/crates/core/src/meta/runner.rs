use crate::env::{policy_hash, Environment, RoundRecord, RunTrace};
use crate::error::{Error, Result};
use crate::exp4r::{rho_default, Exp4R, Exp4RConfig, Exp4ROutput};
use crate::meta::schedule::{epoch_count, make_schedule, with_size};
use crate::meta::{pts_fast, queried_experts, Algorithm, EpochRecord, EpochSchedule, MetaParams};
use crate::rng::RngStream;
use crate::simplex::{sample_categorical, AdviceMatrix, LogWeightVector, ProbVector};

/// One round as seen from outside the learner.
#[derive(Debug)]
pub struct RoundEvent<'a> {
    /// 0-based global round.
    pub round: usize,
    pub epoch: u32,
    /// Experts queried this round, in advice-row order.
    pub experts: &'a [u64],
    pub policy: &'a ProbVector,
    /// Exploration floor of the running instance.
    pub rho: f64,
    pub action: usize,
    pub reward: f64,
}

struct Played {
    output: Exp4ROutput,
    reward: f64,
}

/// Runs one Exp4.R instance to completion over `rounds` of the environment.
#[allow(clippy::too_many_arguments)]
fn play_instance(
    env: &Environment,
    epoch: u32,
    experts: &[u64],
    first_round: usize,
    length: usize,
    delta: f64,
    rho: f64,
    rng: &mut RngStream,
    log: &mut Vec<RoundRecord>,
    observer: &mut dyn FnMut(&RoundEvent),
) -> Result<Played> {
    let k = env.num_actions();
    let mut learner = Exp4R::new(Exp4RConfig {
        delta,
        horizon: length,
        rho,
        expert_ids: experts.to_vec(),
        num_actions: k,
    })?;
    let mut advice = AdviceMatrix::zeros(experts.len(), k);
    let mut total = 0.0;
    for t in first_round..first_round + length {
        for (row, &id) in experts.iter().enumerate() {
            env.pool.advice_into(id, t, advice.row_mut(row));
        }
        let policy = learner.policy(&advice)?;
        let action = sample_categorical(&policy, rng);
        let reward = env.rewards.reward(t, action);
        learner.update(&advice, action, reward, &policy)?;
        total += reward;
        log.push(RoundRecord {
            action,
            reward,
            policy_hash: policy_hash(policy.as_slice()),
        });
        observer(&RoundEvent {
            round: t,
            epoch,
            experts,
            policy: &policy,
            rho,
            action,
            reward,
        });
    }
    Ok(Played {
        output: learner.finalize()?,
        reward: total,
    })
}

fn check_horizon(env: &Environment, num_actions: usize, horizon: usize) -> Result<()> {
    if num_actions != env.num_actions() {
        return Err(Error::Dimension(format!(
            "run asks for {num_actions} actions, environment has {}",
            env.num_actions()
        )));
    }
    if horizon > env.horizon() {
        return Err(Error::Resource(format!(
            "run needs {horizon} rounds, environment provides {}",
            env.horizon()
        )));
    }
    Ok(())
}

fn total_of(rounds: &[RoundRecord]) -> f64 {
    rounds.iter().map(|r| r.reward).sum()
}

/// BEES or BEES.LB, reporting every round to `observer`.
pub fn run_meta_observed(
    env: &Environment,
    algorithm: Algorithm,
    num_actions: usize,
    horizon: usize,
    params: &MetaParams,
    rng: &mut RngStream,
    observer: &mut dyn FnMut(&RoundEvent),
) -> Result<RunTrace> {
    let sliding = match algorithm {
        Algorithm::Bees => false,
        Algorithm::BeesLb => true,
        other => return Err(Error::Parameter(format!("{other} is not an epoch meta-algorithm"))),
    };
    params.validate()?;
    check_horizon(env, num_actions, horizon)?;
    let (l_count, last_len) = epoch_count(horizon, params.big_c)?;
    let epoch_delta = if params.anytime {
        params.delta
    } else {
        params.delta / l_count as f64
    };
    let uniform = if params.inject_uniform {
        env.pool.uniform_expert()
    } else {
        None
    };
    if params.inject_uniform && uniform.is_none() {
        log::warn!("inject_uniform is set but the pool has no uniform expert");
    }

    let mut rounds = Vec::with_capacity(horizon);
    let mut epochs = Vec::with_capacity(l_count as usize);
    let mut lower = 1u64;
    let mut first_round = 0;
    for l in 1..=l_count {
        let start = if sliding { lower } else { 1 };
        let mut schedule = make_schedule(l, params.alpha, params.c, params.big_c, num_actions, start)?;
        if l == l_count {
            schedule = final_epoch(schedule, last_len, params, num_actions)?;
        }
        let injected = uniform.filter(|u| !schedule.window().contains(u));
        let experts = queried_experts(&schedule, injected);
        let played = play_instance(
            env,
            l,
            &experts,
            first_round,
            schedule.length,
            epoch_delta,
            schedule.rho,
            rng,
            &mut rounds,
            observer,
        )?;
        if sliding {
            // the injected expert occupies the last slot and is not part of
            // the contiguous window being searched
            let searched = experts.len() - injected.is_some() as usize;
            let out = &played.output;
            let prefix = LogWeightVector::new(out.log_w_final.as_slice()[..searched].to_vec())?;
            lower = pts_fast(&prefix, &out.epsilon[..searched], lower)?;
        }
        log::debug!("epoch {l}: window {:?}, lower bound now {lower}", schedule.window());
        let length = schedule.length;
        epochs.push(EpochRecord {
            schedule,
            first_round,
            delta: epoch_delta,
            injected_uniform: injected,
            output: played.output,
            lower_bound_after: if sliding { lower } else { 1 },
            realized_reward: played.reward,
        });
        first_round += length;
    }
    Ok(RunTrace {
        algorithm,
        horizon,
        num_actions,
        seed: rng.seed(),
        params: Some(params.clone()),
        total_reward: total_of(&rounds),
        rounds,
        epochs,
    })
}

/// Stretches the schedule of the last epoch to its realized length.
fn final_epoch(
    schedule: EpochSchedule,
    length: usize,
    params: &MetaParams,
    num_actions: usize,
) -> Result<EpochSchedule> {
    let mut num_experts = schedule.num_experts;
    if params.grow_final_epoch {
        // largest l' with C 2^l' <= length, and the window that goes with it
        let l_eff = (length as f64 / params.big_c as f64).log2().floor() as u32;
        if l_eff > schedule.index {
            num_experts = make_schedule(l_eff, params.alpha, params.c, params.big_c, num_actions, schedule.window_start)?
                .num_experts;
        }
    }
    with_size(schedule.index, num_experts, length, num_actions, schedule.window_start)
}

/// BEES: epochs over the growing prefix `[1, N_l]`.
pub fn run_bees(
    env: &Environment,
    num_actions: usize,
    horizon: usize,
    params: &MetaParams,
    rng: &mut RngStream,
) -> Result<RunTrace> {
    run_meta_observed(env, Algorithm::Bees, num_actions, horizon, params, rng, &mut |_| {})
}

/// BEES.LB: epochs over windows starting at the PTS lower bound.
pub fn run_bees_lb(
    env: &Environment,
    num_actions: usize,
    horizon: usize,
    params: &MetaParams,
    rng: &mut RngStream,
) -> Result<RunTrace> {
    run_meta_observed(env, Algorithm::BeesLb, num_actions, horizon, params, rng, &mut |_| {})
}

#[allow(clippy::too_many_arguments)]
fn run_single(
    env: &Environment,
    algorithm: Algorithm,
    num_actions: usize,
    horizon: usize,
    experts: &[u64],
    delta: f64,
    rho: f64,
    rng: &mut RngStream,
    observer: &mut dyn FnMut(&RoundEvent),
) -> Result<RunTrace> {
    check_horizon(env, num_actions, horizon)?;
    if !experts.windows(2).all(|w| w[1] == w[0] + 1) {
        return Err(Error::Parameter("single-instance runs take a contiguous block of experts".into()));
    }
    let n = experts.len();
    let mut rounds = Vec::with_capacity(horizon);
    let played = play_instance(env, 1, experts, 0, horizon, delta, rho, rng, &mut rounds, observer)?;
    let schedule = EpochSchedule {
        index: 1,
        num_experts: n,
        length: horizon,
        rho,
        window_start: experts.first().copied().unwrap_or(1),
    };
    Ok(RunTrace {
        algorithm,
        horizon,
        num_actions,
        seed: rng.seed(),
        params: None,
        total_reward: total_of(&rounds),
        rounds,
        epochs: vec![EpochRecord {
            schedule,
            first_round: 0,
            delta,
            injected_uniform: None,
            output: played.output,
            lower_bound_after: 1,
            realized_reward: played.reward,
        }],
    })
}

/// A single Exp4.R instance over experts `first ..= first + num_experts - 1`.
/// `rho` defaults to `sqrt(ln N / (K T))`.
#[allow(clippy::too_many_arguments)]
pub fn run_exp4r(
    env: &Environment,
    num_actions: usize,
    horizon: usize,
    first: u64,
    num_experts: usize,
    delta: f64,
    rho: Option<f64>,
    rng: &mut RngStream,
) -> Result<RunTrace> {
    run_exp4r_observed(env, num_actions, horizon, first, num_experts, delta, rho, rng, &mut |_| {})
}

/// [`run_exp4r`], reporting every round to `observer`.
#[allow(clippy::too_many_arguments)]
pub fn run_exp4r_observed(
    env: &Environment,
    num_actions: usize,
    horizon: usize,
    first: u64,
    num_experts: usize,
    delta: f64,
    rho: Option<f64>,
    rng: &mut RngStream,
    observer: &mut dyn FnMut(&RoundEvent),
) -> Result<RunTrace> {
    if first == 0 || num_experts == 0 {
        return Err(Error::Parameter("need at least one 1-based expert".into()));
    }
    let rho = match rho {
        Some(r) => r,
        None if num_experts >= 2 => rho_default(num_experts, num_actions, horizon),
        None => return Err(Error::Parameter("the default exploration floor needs two experts".into())),
    };
    let experts: Vec<u64> = (first..first + num_experts as u64).collect();
    run_single(env, Algorithm::Exp4r, num_actions, horizon, &experts, delta, rho, rng, observer)
}

/// Exp4.P baseline: Exp4.R on the first `num_experts` experts, thresholds unused.
pub fn run_exp4p_truncated(
    env: &Environment,
    num_actions: usize,
    horizon: usize,
    num_experts: usize,
    delta: f64,
    rng: &mut RngStream,
) -> Result<RunTrace> {
    if num_experts < 2 {
        return Err(Error::Parameter("truncated Exp4.P needs at least two experts".into()));
    }
    let experts: Vec<u64> = (1..=num_experts as u64).collect();
    let rho = rho_default(num_experts, num_actions, horizon);
    run_single(env, Algorithm::Exp4pTrunc, num_actions, horizon, &experts, delta, rho, rng, &mut |_| {})
}
