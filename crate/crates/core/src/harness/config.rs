//! Experiment configuration: a TOML document.
//!
//! ```toml
//! algorithm = ["bees", "bees_lb", "exp4p_trunc"]   # or a single name
//! K = 10
//! horizons = [500, 5000, 50000]
//! seeds = "1..10"            # inclusive; or a list, or { from = 1, to = 10 }
//! delta = 0.05               # default
//! alpha = 1                  # default
//! c = 1                      # default
//! # C defaults to ceil(alpha K ln(16 c^4 / delta))
//!
//! [pool]
//! kind = "unimodal"
//! i_star = 9
//! # ...
//! ```
//!
//! Every key other than `algorithm`, `K`, `horizons` and `seeds` has a
//! default; see [`ExperimentConfig`].

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::env::{AdversarySpec, PoolSpec};
use crate::error::{Error, Result};
use crate::meta::{default_c, Algorithm, MetaParams};

/// How many experts the final, lengthened epoch queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalEpochSize {
    /// `N_L = c 2^(alpha L)`, as scheduled.
    #[default]
    Scheduled,
    /// Sized for the realized length, `c 2^(alpha floor(log2(T_L / C)))`.
    Grown,
}

/// A validated experiment description with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub algorithm: Vec<Algorithm>,
    #[serde(rename = "K")]
    pub num_actions: usize,
    pub horizons: Vec<usize>,
    pub seeds: Vec<u64>,
    pub delta: f64,
    pub alpha: u32,
    pub c: u64,
    #[serde(rename = "C")]
    pub big_c: u64,
    pub anytime: bool,
    pub inject_uniform: bool,
    pub final_epoch_nl: FinalEpochSize,
    /// Window size of the plain `exp4r` algorithm, experts `1..=n`.
    pub exp4r_experts: usize,
    /// Largest expert index the oracle considers; `None` picks
    /// `min(4 * largest queried index, pool depth)` per horizon.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate_range: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Fill the `wall_ms` column. Off by default because it breaks
    /// byte-identical reruns.
    pub timing: bool,
    pub pool: PoolSpec,
    pub adversary: AdversarySpec,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(Algorithm),
    Many(Vec<Algorithm>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SeedSpec {
    List(Vec<u64>),
    Range { from: u64, to: u64 },
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    algorithm: OneOrMany,
    #[serde(rename = "K")]
    num_actions: usize,
    horizons: Vec<usize>,
    seeds: SeedSpec,
    #[serde(default = "default_delta")]
    delta: f64,
    #[serde(default = "one_u32")]
    alpha: u32,
    #[serde(default = "one_u64")]
    c: u64,
    #[serde(rename = "C")]
    big_c: Option<u64>,
    #[serde(default = "yes")]
    anytime: bool,
    #[serde(default = "yes")]
    inject_uniform: bool,
    #[serde(default)]
    final_epoch_nl: FinalEpochSize,
    #[serde(default = "default_exp4r_experts")]
    exp4r_experts: usize,
    candidate_range: Option<u64>,
    output: Option<PathBuf>,
    #[serde(default)]
    timing: bool,
    pool: Option<PoolSpec>,
    adversary: Option<AdversarySpec>,
}

fn default_delta() -> f64 {
    0.05
}
fn one_u32() -> u32 {
    1
}
fn one_u64() -> u64 {
    1
}
fn yes() -> bool {
    true
}
fn default_exp4r_experts() -> usize {
    16
}

/// Noisy unimodal pool peaking at expert 9 with a slowly decaying tail.
pub fn reference_pool() -> PoolSpec {
    PoolSpec::Unimodal {
        i_star: 9,
        noise_std: 0.01,
        good_actions: vec![1],
        peak_quality: 0.9,
        tail_floor: 0.0,
        tail_halflife: 256.0,
        depth: 1024,
    }
}

/// Action 1 pays 1 in 90% of rounds, every other action in 10%.
pub fn reference_adversary(num_actions: usize) -> AdversarySpec {
    let mut bias = vec![0.1; num_actions];
    if let Some(b) = bias.first_mut() {
        *b = 0.9;
    }
    AdversarySpec::Binary { bias }
}

fn parse_seeds(spec: SeedSpec) -> Result<Vec<u64>> {
    let range = |from: u64, to: u64| {
        if from > to {
            Err(Error::Parameter(format!("seeds: empty range {from}..{to}")))
        } else {
            Ok((from..=to).collect())
        }
    };
    match spec {
        SeedSpec::List(v) => Ok(v),
        SeedSpec::Range { from, to } => range(from, to),
        SeedSpec::Text(s) => {
            let (a, b) = s
                .split_once("..")
                .ok_or_else(|| Error::Parameter(format!("seeds: expected `from..to`, got `{s}`")))?;
            let num = |x: &str| {
                x.trim()
                    .trim_start_matches('=')
                    .parse::<u64>()
                    .map_err(|e| Error::Parameter(format!("seeds: `{s}`: {e}")))
            };
            range(num(a)?, num(b)?)
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a TOML document. Errors name the offending field
    /// and, for syntax and type errors, the line.
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parameter(e.to_string()))?;
        let algorithm = match raw.algorithm {
            OneOrMany::One(a) => vec![a],
            OneOrMany::Many(v) => v,
        };
        let big_c = match raw.big_c {
            Some(c) => c,
            None => default_c(raw.alpha, raw.c, raw.num_actions, raw.delta)
                .map_err(|e| Error::Parameter(format!("C: {e}")))?,
        };
        let config = Self {
            algorithm,
            num_actions: raw.num_actions,
            horizons: raw.horizons,
            seeds: parse_seeds(raw.seeds)?,
            delta: raw.delta,
            alpha: raw.alpha,
            c: raw.c,
            big_c,
            anytime: raw.anytime,
            inject_uniform: raw.inject_uniform,
            final_epoch_nl: raw.final_epoch_nl,
            exp4r_experts: raw.exp4r_experts,
            candidate_range: raw.candidate_range,
            output: raw.output,
            timing: raw.timing,
            pool: raw.pool.unwrap_or_else(reference_pool),
            adversary: raw.adversary.unwrap_or_else(|| reference_adversary(raw.num_actions)),
        };
        config.validate()?;
        Ok(config)
    }

    /// Canonical TOML form; parsing it gives back an equal config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialization cannot fail")
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, msg: String| Err(Error::Parameter(format!("{name}: {msg}")));
        if self.algorithm.is_empty() {
            return field("algorithm", "at least one algorithm is required".into());
        }
        let mut algs = self.algorithm.clone();
        algs.sort();
        algs.dedup();
        if algs.len() != self.algorithm.len() {
            return field("algorithm", "algorithms must be distinct".into());
        }
        if self.num_actions == 0 {
            return field("K", "must be >= 1".into());
        }
        if self.horizons.is_empty() {
            return field("horizons", "must be nonempty".into());
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return field("horizons", "must be strictly ascending".into());
        }
        if self.seeds.is_empty() {
            return field("seeds", "must be nonempty".into());
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return field("seeds", "must be distinct".into());
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return field("delta", format!("{} outside (0, 1]", self.delta));
        }
        if self.alpha == 0 || self.c == 0 || self.big_c == 0 {
            return field("alpha/c/C", "must all be >= 1".into());
        }
        if self.candidate_range == Some(0) {
            return field("candidate_range", "must be >= 1".into());
        }
        let uses_meta = self.algorithm.iter().any(|a| matches!(a, Algorithm::Bees | Algorithm::BeesLb));
        if uses_meta {
            if let Some(&t) = self.horizons.iter().find(|&&t| (t as u128) < 2 * self.big_c as u128) {
                return field("horizons", format!("{t} is shorter than the first epoch (2C = {})", 2 * self.big_c));
            }
        }
        if self.algorithm.contains(&Algorithm::Exp4r) && self.exp4r_experts < 2 {
            return field("exp4r_experts", "must be >= 2".into());
        }
        if self.algorithm.contains(&Algorithm::Exp4pTrunc) && self.horizons[0] < 2 {
            return field("horizons", "truncated Exp4.P needs T >= 2".into());
        }
        self.pool
            .validate(self.num_actions)
            .or_else(|e| field("pool", e.to_string()))?;
        self.adversary.validate().or_else(|e| field("adversary", e.to_string()))?;
        if self.adversary.num_actions() != self.num_actions {
            return field(
                "adversary",
                format!("has {} actions but K = {}", self.adversary.num_actions(), self.num_actions),
            );
        }
        Ok(())
    }

    pub fn meta_params(&self) -> MetaParams {
        MetaParams {
            delta: self.delta,
            alpha: self.alpha,
            c: self.c,
            big_c: self.big_c,
            anytime: self.anytime,
            inject_uniform: self.inject_uniform,
            grow_final_epoch: self.final_epoch_nl == FinalEpochSize::Grown,
        }
    }
}
