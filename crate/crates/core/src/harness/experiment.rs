use std::io::{Read, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::env::{scan, Environment, RunTrace};
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::meta::{
    epoch_count, run_bees, run_bees_lb, run_exp4p_truncated, run_exp4r, Algorithm,
};
use crate::rng::RngStream;

/// Stream id of the learners' action sampling. Every algorithm in a cell uses
/// the same stream, so their comparisons share randomness.
pub const LEARNER_STREAM: u64 = 0x1EA2_4E25;

/// Environment variable giving the default worker count.
pub const THREADS_ENV: &str = "BEES_THREADS";

pub const CSV_HEADER: [&str; 8] = [
    "algorithm",
    "T",
    "seed",
    "regret",
    "total_reward",
    "lower_bound",
    "epochs",
    "wall_ms",
];

/// One `(algorithm, T, seed)` run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub seed: u64,
    pub regret: f64,
    pub total_reward: f64,
    /// Final PTS lower bound; BEES.LB only.
    pub lower_bound: Option<u64>,
    pub epochs: usize,
    pub wall_ms: Option<f64>,
}

/// Rows from the cells that finished, plus the first error in row order.
#[derive(Debug)]
pub struct PartialResults {
    pub rows: Vec<ResultRow>,
    pub error: Error,
}

/// Worker count: `BEES_THREADS` if set, else the available parallelism.
pub fn default_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Largest expert index any configured algorithm queries at horizon `t`.
fn largest_window(config: &ExperimentConfig, t: usize) -> u64 {
    let meta = || -> u64 {
        let Ok((l, last)) = epoch_count(t, config.big_c) else {
            return 1;
        };
        let mut exp = config.alpha as u64 * l as u64;
        if config.final_epoch_nl == crate::harness::FinalEpochSize::Grown {
            let grown = (last as f64 / config.big_c as f64).log2().floor() as u64;
            exp = exp.max(config.alpha as u64 * grown);
        }
        config.c.saturating_mul(1u64.checked_shl(exp as u32).unwrap_or(u64::MAX))
    };
    config
        .algorithm
        .iter()
        .map(|a| match a {
            Algorithm::Bees | Algorithm::BeesLb => meta(),
            Algorithm::Exp4r => config.exp4r_experts as u64,
            Algorithm::Exp4pTrunc => t as u64,
        })
        .max()
        .unwrap_or(1)
}

/// Oracle candidate range `1..=n` for horizon `t`.
pub fn candidate_range(config: &ExperimentConfig, depth: u64, t: usize) -> u64 {
    config
        .candidate_range
        .unwrap_or_else(|| largest_window(config, t).saturating_mul(4).min(depth))
        .max(1)
}

fn run_one(config: &ExperimentConfig, env: &Environment, algorithm: Algorithm, t: usize, seed: u64) -> Result<RunTrace> {
    let mut rng = RngStream::new(seed, LEARNER_STREAM);
    let k = config.num_actions;
    match algorithm {
        Algorithm::Bees => run_bees(env, k, t, &config.meta_params(), &mut rng),
        Algorithm::BeesLb => run_bees_lb(env, k, t, &config.meta_params(), &mut rng),
        Algorithm::Exp4r => run_exp4r(env, k, t, 1, config.exp4r_experts, config.delta, None, &mut rng),
        Algorithm::Exp4pTrunc => run_exp4p_truncated(env, k, t, t, config.delta, &mut rng),
    }
}

/// All algorithms on one `(T, seed)` cell, in config order.
fn run_cell(config: &ExperimentConfig, t: usize, seed: u64) -> Vec<Result<ResultRow>> {
    let env = match config
        .adversary
        .build(seed, t)
        .and_then(|rewards| Environment::new(rewards, config.pool.build(config.num_actions, seed)?))
    {
        Ok(env) => env,
        Err(e) => return config.algorithm.iter().map(|_| Err(e.clone())).collect(),
    };
    let range = candidate_range(config, env.pool.depth(), t);
    let report = match scan(&env, 0..t, 1..=range) {
        Ok(r) => r,
        Err(e) => return config.algorithm.iter().map(|_| Err(e.clone())).collect(),
    };
    config
        .algorithm
        .iter()
        .map(|&algorithm| {
            let start = Instant::now();
            let trace = run_one(config, &env, algorithm, t, seed)?;
            let wall = start.elapsed().as_secs_f64() * 1e3;
            log::info!("{algorithm} T={t} seed={seed}: {:.0} ms", wall);
            Ok(ResultRow {
                algorithm,
                horizon: t,
                seed,
                regret: report.regret(&trace)?,
                total_reward: trace.total_reward,
                lower_bound: (algorithm == Algorithm::BeesLb).then(|| trace.final_lower_bound()).flatten(),
                epochs: trace.epochs.len(),
                wall_ms: config.timing.then_some(wall),
            })
        })
        .collect()
}

/// Runs every `(algorithm, T, seed)` combination on up to `threads` workers.
///
/// Rows are ordered by algorithm (config order), then horizon, then seed
/// (config order), independent of completion order. If any run fails, the
/// rows that did finish are returned alongside the first error in that order.
pub fn run_experiment(config: &ExperimentConfig, threads: usize) -> Result<Vec<ResultRow>, PartialResults> {
    let cells: Vec<(usize, u64)> = config
        .horizons
        .iter()
        .flat_map(|&t| config.seeds.iter().map(move |&s| (t, s)))
        .collect();
    let results: Mutex<Vec<Option<Vec<Result<ResultRow>>>>> = Mutex::new(vec![None; cells.len()]);
    let next = AtomicUsize::new(0);
    let workers = threads.clamp(1, cells.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(t, seed)) = cells.get(i) else {
                    break;
                };
                let out = run_cell(config, t, seed);
                results.lock().expect("result lock poisoned")[i] = Some(out);
            });
        }
    });
    let mut per_cell: Vec<Vec<Result<ResultRow>>> = results
        .into_inner()
        .expect("result lock poisoned")
        .into_iter()
        .map(|c| c.expect("every cell ran"))
        .collect();

    let mut rows = Vec::with_capacity(cells.len() * config.algorithm.len());
    let mut first_error = None;
    for a in 0..config.algorithm.len() {
        for cell in per_cell.iter_mut() {
            match std::mem::replace(&mut cell[a], Err(Error::Resource(String::new()))) {
                Ok(row) => rows.push(row),
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
        }
    }
    match first_error {
        None => Ok(rows),
        Some(error) => Err(PartialResults { rows, error }),
    }
}

/// `%.9g`: nine significant digits, trailing zeros dropped.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..9).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        let decimals = (8 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}"))
    }
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Writes rows under [`CSV_HEADER`].
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Resource(format!("writing CSV: {e}"));
    let mut w = csv_writer(out);
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.algorithm.name().to_string(),
            r.horizon.to_string(),
            r.seed.to_string(),
            format_sig9(r.regret),
            format_sig9(r.total_reward),
            r.lower_bound.map(|b| b.to_string()).unwrap_or_default(),
            r.epochs.to_string(),
            r.wall_ms.map(format_sig9).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Resource(format!("writing CSV: {e}")))
}

pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV is UTF-8")
}

/// Reads rows written by [`write_csv`].
pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let bad = |line: usize, msg: String| Error::Parameter(format!("CSV line {line}: {msg}"));
    let headers = reader
        .headers()
        .map_err(|e| Error::Parameter(format!("CSV header: {e}")))?
        .clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(Error::Parameter(format!(
            "CSV header must be `{}`",
            CSV_HEADER.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let rec = record.map_err(|e| bad(line, e.to_string()))?;
        let field = |k: usize| rec.get(k).unwrap_or_default();
        let num = |k: usize| -> Result<f64> {
            field(k)
                .parse::<f64>()
                .map_err(|e| bad(line, format!("{}: {e}", CSV_HEADER[k])))
        };
        let opt = |k: usize| -> Result<Option<String>> {
            Ok(Some(field(k).to_string()).filter(|s| !s.is_empty()))
        };
        rows.push(ResultRow {
            algorithm: field(0).parse().map_err(|e: Error| bad(line, e.to_string()))?,
            horizon: field(1).parse().map_err(|e| bad(line, format!("T: {e}")))?,
            seed: field(2).parse().map_err(|e| bad(line, format!("seed: {e}")))?,
            regret: num(3)?,
            total_reward: num(4)?,
            lower_bound: opt(5)?
                .map(|s| s.parse().map_err(|e| bad(line, format!("lower_bound: {e}"))))
                .transpose()?,
            epochs: field(6).parse().map_err(|e| bad(line, format!("epochs: {e}")))?,
            wall_ms: opt(7)?
                .map(|s| s.parse().map_err(|e| bad(line, format!("wall_ms: {e}"))))
                .transpose()?,
        });
    }
    Ok(rows)
}
