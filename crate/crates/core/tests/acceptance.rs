//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.
//!
//! `cargo test --test acceptance` runs everything. Set `ACCEPTANCE_ONLY=3,9`
//! to run a subset.

use std::cell::RefCell;
use std::collections::HashMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bees::env::{
    check_concentration_event, cumulative_reward, make_binary_adversary, scan, Environment, ExpertPool, PoolSpec,
    RunTrace,
};
use bees::exp4r::{check_assumption1, importance_estimate, variance_proxy};
use bees::harness::{default_threads, reference_adversary, rows_to_csv, run_experiment, summarize, ExperimentConfig, LEARNER_STREAM};
use bees::meta::{
    default_c, epoch_count, epoch_lengths, pts, pts_fast, run_exp4r_observed, run_meta_observed, Algorithm,
    MetaParams, RoundEvent,
};
use bees::rng::RngStream;
use bees::simplex::{LogWeightVector, ProbVector};

const REFERENCE: &str = include_str!("../../../configs/reference.toml");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Per-round floor and normalization audit shared by every run in the suite.
#[derive(Default)]
struct FloorAudit {
    runs: usize,
    rounds: u64,
    violations: u64,
    worst: f64,
}

impl FloorAudit {
    fn observe(&mut self, ev: &RoundEvent) {
        let p = ev.policy.as_slice();
        let min = p.iter().copied().fold(f64::INFINITY, f64::min);
        let sum: f64 = p.iter().sum();
        let slack = (ev.rho - 1e-12 - min).max((sum - 1.0).abs() - 1e-12);
        self.rounds += 1;
        if slack > 0.0 {
            self.violations += 1;
            self.worst = self.worst.max(slack);
        }
    }
}

thread_local! {
    static AUDIT: RefCell<FloorAudit> = RefCell::new(FloorAudit::default());
}

fn audited(ev: &RoundEvent) {
    AUDIT.with(|a| a.borrow_mut().observe(ev));
}

fn count_run() {
    AUDIT.with(|a| a.borrow_mut().runs += 1);
}

fn random_simplex(rng: &mut ChaCha8Rng, k: usize, sparse: bool) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k)
        .map(|_| if sparse && rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        v[rng.random_range(0..k)] = 1.0;
    }
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// `(p, xi, r)` with `p` carrying an exploration floor `rho`.
fn random_triple(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let k = rng.random_range(2..=16);
    let rho = rng.random_range(1e-4..=1.0) / k as f64;
    let q = random_simplex(rng, k, true);
    let p: Vec<f64> = q.iter().map(|x| (1.0 - k as f64 * rho) * x + rho).collect();
    let xi = random_simplex(rng, k, true);
    let r: Vec<f64> = (0..k)
        .map(|_| match rng.random_range(0..4) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random::<f64>(),
        })
        .collect();
    (p, xi, r)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let (p, xi, r) = random_triple(&mut rng);
        let expected: f64 = (0..p.len()).map(|a| p[a] * importance_estimate(&xi, a, r[a], &p)).sum();
        let y: f64 = xi.iter().zip(&r).map(|(x, r)| x * r).sum();
        worst = worst.max((expected - y).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-12 && secs < 1.0,
        format!("10^4 triples, max |E[yhat] - y| = {worst:.2e}, {secs:.3} s"),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let (p, xi, r) = random_triple(&mut rng);
        let y: f64 = xi.iter().zip(&r).map(|(x, r)| x * r).sum();
        let second: f64 = (0..p.len())
            .map(|a| p[a] * (importance_estimate(&xi, a, r[a], &p) - y).powi(2))
            .sum();
        worst = worst.max(second - variance_proxy(&xi, &p));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && secs < 1.0,
        format!("10^4 triples, max (second moment - vhat) = {worst:.3}, {secs:.3} s"),
    )
}

fn criterion_3() -> Outcome {
    AUDIT.with(|a| {
        let a = a.borrow();
        outcome(
            a.violations == 0 && a.rounds > 0,
            format!(
                "{} rounds over {} runs, {} violations (worst excess {:.2e})",
                a.rounds, a.runs, a.violations, a.worst
            ),
        )
    })
}

/// `(Rhat_i, Vhat_i)` per epoch, accumulated from the observed rounds.
type Ledger = HashMap<u32, (Vec<u64>, Vec<f64>, Vec<f64>)>;

fn accumulate(env: &Environment, ledger: &mut Ledger, ev: &RoundEvent) {
    let entry = ledger
        .entry(ev.epoch)
        .or_insert_with(|| (ev.experts.to_vec(), vec![0.0; ev.experts.len()], vec![0.0; ev.experts.len()]));
    let p = ev.policy.as_slice();
    for (i, &id) in ev.experts.iter().enumerate() {
        let xi = env.pool.advice(id, ev.round).expect("pool advice");
        let xi = xi.as_slice();
        entry.1[i] += xi[ev.action] * ev.reward / p[ev.action];
        entry.2[i] += xi.iter().zip(p).map(|(x, q)| x / q).sum::<f64>();
    }
}

/// Largest deviation from `ln w = (rho/2)(Rhat + beta Vhat)` over every epoch.
fn closed_form_error(trace: &RunTrace, ledger: &Ledger) -> f64 {
    let mut worst = 0.0f64;
    for rec in &trace.epochs {
        let (ids, rhat, vhat) = &ledger[&rec.schedule.index];
        assert_eq!(ids, &rec.experts());
        let n = ids.len() as f64;
        let kt = (trace.num_actions * rec.schedule.length) as f64;
        let beta = ((2.0 * n / rec.delta).ln() / kt).sqrt();
        let rho = rec.schedule.rho;
        for i in 0..ids.len() {
            let closed = 0.5 * rho * (rhat[i] + beta * vhat[i]);
            worst = worst.max((rec.output.log_w_final[i] - closed).abs());
        }
    }
    worst
}

fn criterion_4() -> Outcome {
    let mut worst = 0.0f64;
    let mut runs = 0;
    // small instance, several learner seeds
    let inst = small_instance();
    for seed in 0..10 {
        let mut ledger = Ledger::new();
        let mut rng = RngStream::new(seed, LEARNER_STREAM);
        let trace = run_exp4r_observed(&inst.env, 5, inst.horizon, 1, 4, 0.05, None, &mut rng, &mut |ev| {
            audited(ev);
            accumulate(&inst.env, &mut ledger, ev);
        })
        .expect("run");
        count_run();
        worst = worst.max(closed_form_error(&trace, &ledger));
        runs += 1;
    }
    // every epoch of BEES and BEES.LB on the reference environment
    let env = reference_env(3, 5000, 0.01);
    let params = MetaParams::with_default_c(0.05, 1, 1, 10).unwrap();
    for alg in [Algorithm::Bees, Algorithm::BeesLb] {
        let mut ledger = Ledger::new();
        let mut rng = RngStream::new(3, LEARNER_STREAM);
        let trace = run_meta_observed(&env, alg, 10, 5000, &params, &mut rng, &mut |ev| {
            audited(ev);
            accumulate(&env, &mut ledger, ev);
        })
        .expect("run");
        count_run();
        worst = worst.max(closed_form_error(&trace, &ledger));
        runs += trace.epochs.len();
    }
    outcome(worst <= 1e-9, format!("{runs} Exp4.R instances, max deviation {worst:.2e}"))
}

struct Instance {
    env: Environment,
    horizon: usize,
}

/// K = 5, N = 4 with a uniform first expert and a fixed binary adversary.
/// The horizon is the smallest passing the regime check at `delta = 0.1`.
fn small_instance() -> Instance {
    let horizon = (1..).find(|&t| check_assumption1(5, 4, t, 0.1)).unwrap();
    let rows = vec![
        vec![0.2, 0.2, 0.2, 0.2, 0.2],
        vec![0.7, 0.1, 0.1, 0.05, 0.05],
        vec![0.05, 0.05, 0.8, 0.05, 0.05],
        vec![0.1, 0.2, 0.3, 0.2, 0.2],
    ];
    let pool = ExpertPool::table(rows.into_iter().map(|r| ProbVector::new(r).unwrap()).collect()).unwrap();
    let rewards = make_binary_adversary(7, horizon, &[0.8, 0.6, 0.4, 0.2, 0.1]).unwrap();
    Instance {
        env: Environment::new(rewards, pool).unwrap(),
        horizon,
    }
}

fn reference_env(seed: u64, horizon: usize, noise_std: f64) -> Environment {
    let pool = PoolSpec::Unimodal {
        i_star: 9,
        noise_std,
        good_actions: vec![1],
        peak_quality: 0.9,
        tail_floor: 0.0,
        tail_halflife: 256.0,
        depth: 1024,
    }
    .build(10, seed)
    .unwrap();
    let rewards = reference_adversary(10).build(seed, horizon).unwrap();
    Environment::new(rewards, pool).unwrap()
}

fn small_suite(delta: f64, horizon: Option<usize>) -> (Instance, Vec<RunTrace>) {
    let mut inst = small_instance();
    if let Some(t) = horizon {
        inst.horizon = t;
        inst.env.rewards = make_binary_adversary(7, t, &[0.8, 0.6, 0.4, 0.2, 0.1]).unwrap();
    }
    let traces = (0..200)
        .map(|seed| {
            let mut rng = RngStream::new(seed, LEARNER_STREAM);
            let t = run_exp4r_observed(&inst.env, 5, inst.horizon, 1, 4, delta, None, &mut rng, &mut audited)
                .expect("run");
            count_run();
            t
        })
        .collect();
    (inst, traces)
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let (inst, traces) = small_suite(0.1, None);
    let held = traces
        .iter()
        .filter(|t| check_concentration_event(&t.epochs[0], &inst.env, 0.1).unwrap())
        .count();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        held >= 170 && secs < 60.0,
        format!("T = {}, event held in {held}/200 runs, {secs:.2} s", inst.horizon),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let (inst, traces) = small_suite(0.05, None);
    let report = scan(&inst.env, 0..inst.horizon, 1..=4).unwrap();
    let bound = 7.0 * (5.0 * inst.horizon as f64 * (2.0 * 4.0 / 0.05f64).ln()).sqrt();
    let regrets: Vec<f64> = traces.iter().map(|t| report.regret(t).unwrap()).collect();
    let within = regrets.iter().filter(|&&r| r <= bound).count();
    let max = regrets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        within >= 190 && secs < 60.0,
        format!("bound {bound:.1}, within in {within}/200 runs, max regret {max:.2}, {secs:.2} s"),
    )
}

/// Seeds where some pair fired, and those where every fired pair was correct.
fn ranking_audit(inst: &Instance, traces: &[RunTrace]) -> (usize, usize, usize) {
    let truth: Vec<f64> = (1..=4)
        .map(|i| cumulative_reward(&inst.env, i, 0..inst.horizon).unwrap())
        .collect();
    let (mut fired, mut sound, mut pairs) = (0, 0, 0);
    for t in traces {
        let out = &t.epochs[0].output;
        let mut any = false;
        let mut ok = true;
        for i in 0..4 {
            for j in 0..4 {
                if i != j && out.rank_dominates(i, j).unwrap() {
                    any = true;
                    pairs += 1;
                    ok &= truth[i] > truth[j];
                }
            }
        }
        if any {
            fired += 1;
            sound += ok as usize;
        }
    }
    (fired, sound, pairs)
}

fn criterion_7() -> Outcome {
    let (inst, traces) = small_suite(0.05, None);
    let (fired, sound, pairs) = ranking_audit(&inst, &traces);
    // a longer horizon on the same pool, where pairs actually fire
    let (long, long_traces) = small_suite(0.05, Some(40_000));
    let (l_fired, l_sound, l_pairs) = ranking_audit(&long, &long_traces);
    let ok = |f: usize, s: usize| f == 0 || s as f64 >= 0.95 * f as f64;
    outcome(
        ok(fired, sound) && ok(l_fired, l_sound),
        format!(
            "T = {}: {pairs} pairs fired in {fired} seeds, all correct in {sound}; \
             T = 40000: {l_pairs} pairs in {l_fired} seeds, all correct in {l_sound}",
            inst.horizon
        ),
    )
}

fn criterion_8() -> Outcome {
    let horizon = 50_000;
    let params = MetaParams::with_default_c(0.05, 1, 1, 10).unwrap();
    let (mut within, mut monotone, mut advanced) = (0, 0, 0);
    let mut highest = 1;
    let mut peak_checked = true;
    for seed in 1..=100u64 {
        let env = reference_env(seed, horizon, 0.0);
        if seed <= 3 {
            peak_checked &= scan(&env, 0..horizon, 1..=1024).unwrap().best == 9;
        }
        let mut rng = RngStream::new(seed, LEARNER_STREAM);
        let trace = run_meta_observed(&env, Algorithm::BeesLb, 10, horizon, &params, &mut rng, &mut audited).unwrap();
        count_run();
        let bounds: Vec<u64> = trace.epochs.iter().map(|e| e.lower_bound_after).collect();
        within += bounds.iter().all(|&b| b <= 9) as usize;
        monotone += bounds.windows(2).all(|w| w[0] <= w[1]) as usize;
        let last = *bounds.last().unwrap();
        advanced += (last > 1) as usize;
        highest = highest.max(last);
    }
    outcome(
        within >= 95 && monotone == 100 && peak_checked,
        format!(
            "T = {horizon}: bound <= 9 in {within}/100 seeds, nondecreasing in {monotone}/100, \
             advanced past 1 in {advanced}, highest {highest}, oracle peak at 9: {peak_checked}"
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut bad_sums = 0;
    for _ in 0..1000 {
        let c: u64 = rng.random_range(1..=5000);
        let t = rng.random_range(2 * c as usize..=2 * c as usize + 10_000_000);
        let lengths = epoch_lengths(t, c).unwrap();
        let (l, _) = epoch_count(t, c).unwrap();
        let sum: usize = lengths.iter().sum();
        let full: u128 = (1..l).map(|j| (c as u128) << j).sum();
        // L is the largest with C (2^(L+1) - 2) <= T, and the remainder is at least C 2^L
        let l_ok = (c as u128) * ((1u128 << (l + 1)) - 2) <= t as u128
            && (c as u128) * ((1u128 << (l + 2)) - 2) > t as u128;
        if sum != t || lengths.len() != l as usize || full + lengths[l as usize - 1] as u128 != t as u128 || !l_ok {
            bad_sums += 1;
        }
    }
    let mut grid = 0;
    let mut failures = Vec::new();
    for alpha in [1u32, 2, 3] {
        for c in [1u64, 2, 4, 16] {
            for k in [1usize, 2, 5, 10, 100] {
                for delta in [1.0, 0.5, 0.1, 0.05, 0.01, 1e-6] {
                    let big_c = default_c(alpha, c, k, delta).unwrap();
                    for l in 1..=40u32 {
                        grid += 1;
                        // 4 K ln N_l <= T_l and ln(2 N_l / delta) <= (e - 2) K T_l, in logs
                        let ln_n = (c as f64).ln() + alpha as f64 * l as f64 * 2f64.ln();
                        let t_l = big_c as f64 * 2f64.powi(l as i32);
                        let kf = k as f64;
                        let first = 4.0 * kf * ln_n <= t_l;
                        let second = 2f64.ln() + ln_n - delta.ln() <= (std::f64::consts::E - 2.0) * kf * t_l;
                        if !(first && second) {
                            failures.push((alpha, c, k, delta, l));
                        }
                    }
                }
            }
        }
    }
    outcome(
        bad_sums == 0 && failures.is_empty(),
        format!(
            "{bad_sums}/1000 schedules off; preconditions failed at {}/{grid} grid points {:?}",
            failures.len(),
            failures.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

fn criterion_10() -> Outcome {
    let config = ExperimentConfig::parse(REFERENCE).expect("reference config");
    let start = Instant::now();
    let threads = default_threads();
    let rows = match run_experiment(&config, threads) {
        Ok(rows) => rows,
        Err(partial) => return outcome(false, format!("experiment failed: {}", partial.error)),
    };
    let secs = start.elapsed().as_secs_f64();
    let summary = summarize(&rows).unwrap();
    let t_max = *config.horizons.last().unwrap();
    let mean = |alg: Algorithm| {
        summary
            .iter()
            .find(|s| s.algorithm == alg && s.horizon == t_max)
            .map(|s| s.mean_regret)
            .unwrap()
    };
    let (lb, bees, exp4p) = (mean(Algorithm::BeesLb), mean(Algorithm::Bees), mean(Algorithm::Exp4pTrunc));
    let lb_rows: Vec<_> = rows
        .iter()
        .filter(|r| r.algorithm == Algorithm::BeesLb && r.horizon == t_max)
        .collect();
    let bees_rows: Vec<_> = rows
        .iter()
        .filter(|r| r.algorithm == Algorithm::Bees && r.horizon == t_max)
        .collect();
    let identical = lb_rows
        .iter()
        .zip(&bees_rows)
        .filter(|(a, b)| a.total_reward == b.total_reward)
        .count();
    let bounds: Vec<u64> = lb_rows.iter().filter_map(|r| r.lower_bound).collect();
    outcome(
        lb < bees && lb < exp4p,
        format!(
            "T = {t_max}, {} seeds: mean regret BEES.LB {lb:.1}, BEES {bees:.1}, Exp4.P {exp4p:.1}; \
             BEES.LB identical to BEES in {identical} seeds, final lower bounds {bounds:?}; \
             {secs:.0} s on {threads} thread(s)",
            config.seeds.len()
        ),
    )
}

fn criterion_11() -> Outcome {
    let text = "algorithm = [\"exp4r\", \"bees\", \"bees_lb\", \"exp4p_trunc\"]\n\
                K = 10\nhorizons = [300, 1200]\nseeds = [4, 1, 9]\n";
    let config = ExperimentConfig::parse(text).unwrap();
    let csv = |threads: usize| {
        let rows = run_experiment(&config, threads).expect("experiment");
        rows_to_csv(&rows)
    };
    let first = csv(1);
    let again = csv(1);
    let parallel = csv(3);
    let reparsed = ExperimentConfig::parse(&config.to_toml()).unwrap();
    let from_canonical = rows_to_csv(&run_experiment(&reparsed, 2).unwrap());
    let same = first == again && first == parallel && first == from_canonical;
    outcome(
        same,
        format!("{} bytes, reruns with 1, 3 and 2 workers byte-identical: {same}", first.len()),
    )
}

fn criterion_12() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut mismatches = 0;
    for case in 0..10_000 {
        let n = rng.random_range(1..=64);
        let coarse = case % 3 == 0;
        let w: Vec<f64> = (0..n)
            .map(|_| if coarse { rng.random_range(-4..=4) as f64 * 0.5 } else { rng.random_range(-50.0..50.0) })
            .collect();
        let eps: Vec<f64> = (0..n)
            .map(|_| if coarse { rng.random_range(0..=4) as f64 * 0.5 } else { rng.random_range(0.0..20.0) })
            .collect();
        let lower = rng.random_range(1..=1000u64);
        let lw = LogWeightVector::new(w).unwrap();
        if pts(&lw, &eps, lower).unwrap() != pts_fast(&lw, &eps, lower).unwrap() {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("10^4 instances, {mismatches} mismatches"))
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    // criterion 3 audits the runs made by 4 to 8, so it is evaluated after them
    let order: [(u32, fn() -> Outcome); 12] = [
        (1, criterion_1),
        (2, criterion_2),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (3, criterion_3),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
        (12, criterion_12),
    ];
    let mut lines = Vec::new();
    let mut failed = 0;
    for (n, run) in order {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += !result.pass as usize;
        let line = format!(
            "criterion {n:>2}: {} ({:.1} s) {}",
            if result.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            result.detail
        );
        eprintln!("{line}");
        lines.push((n, line));
    }
    lines.sort_by_key(|(n, _)| *n);
    let mut out = std::io::stdout().lock();
    writeln!(out, "\nacceptance summary").unwrap();
    for (_, line) in &lines {
        writeln!(out, "{line}").unwrap();
    }
    writeln!(out, "{} passed, {failed} failed", lines.len() - failed).unwrap();
    if failed > 0 {
        std::process::exit(1);
    }
}
