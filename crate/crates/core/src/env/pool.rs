use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::simplex::{check_distribution, project_in_place, ProbVector};

/// Concentration level `q(i)` per expert: the probability mass expert `i`
/// puts on the good actions. Experts past the last stored level keep it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityProfile {
    levels: Vec<f64>,
}

impl QualityProfile {
    /// `levels[i - 1]` is `q(i)`.
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Parameter("quality profile is empty".into()));
        }
        if let Some(q) = levels.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            return Err(Error::Parameter(format!("quality {q} outside [0, 1]")));
        }
        Ok(Self { levels })
    }

    /// Linear rise from `start` at expert 1 to `peak` at `i_star`, then a
    /// geometric decay towards `floor` that halves the excess every
    /// `halflife` experts. Levels are stored up to `depth`.
    pub fn peaked(start: f64, i_star: u64, peak: f64, floor: f64, halflife: f64, depth: u64) -> Result<Self> {
        if i_star == 0 || depth < i_star {
            return Err(Error::Parameter(format!(
                "peak index {i_star} must lie in [1, depth = {depth}]"
            )));
        }
        if halflife.is_nan() || halflife <= 0.0 {
            return Err(Error::Parameter("tail half-life must be positive".into()));
        }
        if floor > peak || start > peak {
            return Err(Error::Parameter("peak quality must dominate start and floor".into()));
        }
        let levels = (1..=depth)
            .map(|i| {
                if i <= i_star {
                    if i_star == 1 {
                        peak
                    } else {
                        start + (peak - start) * (i - 1) as f64 / (i_star - 1) as f64
                    }
                } else {
                    floor + (peak - floor) * 0.5f64.powf((i - i_star) as f64 / halflife)
                }
            })
            .collect();
        Self::new(levels)
    }

    pub fn level(&self, expert: u64) -> f64 {
        let idx = (expert.max(1) - 1) as usize;
        self.levels[idx.min(self.levels.len() - 1)]
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }
}

/// Parameters of the noisy unimodal pool.
#[derive(Debug, Clone, PartialEq)]
pub struct UnimodalPoolSpec {
    pub num_actions: usize,
    /// Peak of the quality profile (1-based).
    pub i_star: u64,
    /// Largest expert index the oracle scans by default.
    pub depth: u64,
    /// Std of the additive Gaussian noise on each advice entry.
    pub noise_std: f64,
    /// 0-based indices of the designated good actions.
    pub good_actions: Vec<usize>,
    pub quality: QualityProfile,
}

impl UnimodalPoolSpec {
    fn uniform_level(&self) -> f64 {
        self.good_actions.len() as f64 / self.num_actions as f64
    }

    /// `q(i)` with expert 1 pinned to the uniform level.
    pub fn effective_level(&self, expert: u64) -> f64 {
        if expert == 1 {
            self.uniform_level()
        } else {
            self.quality.level(expert)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_actions;
        if k == 0 {
            return Err(Error::Parameter("pool needs at least one action".into()));
        }
        if self.good_actions.is_empty() || self.good_actions.len() > k {
            return Err(Error::Parameter("good-action set must be a nonempty subset of the actions".into()));
        }
        let mut g = self.good_actions.clone();
        g.sort_unstable();
        g.dedup();
        if g.len() != self.good_actions.len() || g.last().is_some_and(|&a| a >= k) {
            return Err(Error::Parameter(format!(
                "good actions {:?} must be distinct indices below {k}",
                self.good_actions
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Parameter(format!("noise std {} must be >= 0", self.noise_std)));
        }
        if self.i_star == 0 || self.depth < self.i_star {
            return Err(Error::Parameter(format!(
                "peak index {} must lie in [1, depth = {}]",
                self.i_star, self.depth
            )));
        }
        // weakly increasing up to the peak, weakly decreasing after
        let last = self.depth.max(self.quality.levels().len() as u64 + 1);
        for i in 2..=last {
            let (prev, cur) = (self.effective_level(i - 1), self.effective_level(i));
            let ok = if i <= self.i_star { prev <= cur } else { prev >= cur };
            if !ok {
                return Err(Error::Parameter(format!(
                    "quality profile is not unimodal around {} at expert {i}",
                    self.i_star
                )));
            }
        }
        Ok(())
    }
}

/// Expert 1 is exactly uniform; expert `i >= 2` puts mass `q(i)` evenly on
/// the good actions and `1 - q(i)` evenly on the rest, then receives
/// per-entry Gaussian noise keyed by `(seed, i, t)` and is clamped back onto
/// the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct UnimodalPool {
    spec: UnimodalPoolSpec,
    seed: u64,
    is_good: Vec<bool>,
}

impl UnimodalPool {
    pub fn spec(&self) -> &UnimodalPoolSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Noise-free advice of `expert`.
    pub fn base_advice_into(&self, expert: u64, out: &mut [f64]) {
        let k = self.spec.num_actions;
        if expert == 1 {
            out.fill(1.0 / k as f64);
            return;
        }
        let g = self.spec.good_actions.len();
        if g == k {
            out.fill(1.0 / k as f64);
            return;
        }
        let q = self.spec.quality.level(expert);
        let good = q / g as f64;
        let bad = (1.0 - q) / (k - g) as f64;
        for (x, &is_good) in out.iter_mut().zip(&self.is_good) {
            *x = if is_good { good } else { bad };
        }
    }

    #[inline]
    fn advice_into(&self, expert: u64, t: usize, out: &mut [f64]) {
        self.base_advice_into(expert, out);
        if expert == 1 || self.spec.noise_std == 0.0 {
            return;
        }
        let std = self.spec.noise_std;
        let mut rng = CounterRng::from_words(&[self.seed, expert, t as u64]);
        for x in out.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x += std * z;
        }
        project_in_place(out);
    }
}

/// Builds the noisy unimodal pool after validating `spec`.
pub fn make_unimodal_pool(spec: UnimodalPoolSpec, seed: u64) -> Result<ExpertPool> {
    spec.validate()?;
    let mut is_good = vec![false; spec.num_actions];
    for &a in &spec.good_actions {
        is_good[a] = true;
    }
    Ok(ExpertPool::Unimodal(UnimodalPool { spec, seed, is_good }))
}

/// A countably infinite, deterministic sequence of experts.
#[derive(Debug, Clone, PartialEq)]
pub enum ExpertPool {
    Unimodal(UnimodalPool),
    /// Every expert gives the same advice.
    Identical(ProbVector),
    /// Time-invariant advice per expert; experts past the table are uniform.
    Table(Vec<ProbVector>),
}

impl ExpertPool {
    pub fn table(rows: Vec<ProbVector>) -> Result<Self> {
        let k = rows
            .first()
            .map(ProbVector::len)
            .ok_or_else(|| Error::Dimension("advice table is empty".into()))?;
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Dimension("advice table rows differ in length".into()));
        }
        Ok(ExpertPool::Table(rows))
    }

    pub fn num_actions(&self) -> usize {
        match self {
            ExpertPool::Unimodal(p) => p.spec.num_actions,
            ExpertPool::Identical(v) => v.len(),
            ExpertPool::Table(rows) => rows[0].len(),
        }
    }

    /// Largest index worth scanning when looking for the best expert.
    pub fn depth(&self) -> u64 {
        match self {
            ExpertPool::Unimodal(p) => p.spec.depth,
            ExpertPool::Identical(_) => 1,
            ExpertPool::Table(rows) => rows.len() as u64 + 1,
        }
    }

    /// Writes the advice of `expert` (1-based) at round `t` (0-based) into `out`.
    #[inline]
    pub fn advice_into(&self, expert: u64, t: usize, out: &mut [f64]) {
        debug_assert!(expert >= 1);
        debug_assert_eq!(out.len(), self.num_actions());
        match self {
            ExpertPool::Unimodal(p) => p.advice_into(expert, t, out),
            ExpertPool::Identical(v) => out.copy_from_slice(v.as_slice()),
            ExpertPool::Table(rows) => match rows.get((expert - 1) as usize) {
                Some(row) => out.copy_from_slice(row.as_slice()),
                None => out.fill(1.0 / out.len() as f64),
            },
        }
    }

    pub fn advice(&self, expert: u64, t: usize) -> Result<ProbVector> {
        if expert == 0 {
            return Err(Error::Index("expert indices are 1-based".into()));
        }
        let mut out = vec![0.0; self.num_actions()];
        self.advice_into(expert, t, &mut out);
        check_distribution(&out)?;
        Ok(ProbVector::from_vec_unchecked(out))
    }

    /// Whether `expert` always advises the uniform distribution.
    pub fn is_uniform(&self, expert: u64) -> bool {
        let k = self.num_actions();
        let uniform = |v: &ProbVector| v.as_slice().iter().all(|&x| x == 1.0 / k as f64);
        match self {
            ExpertPool::Unimodal(_) => expert == 1,
            ExpertPool::Identical(v) => uniform(v),
            ExpertPool::Table(rows) => rows.get((expert - 1) as usize).is_none_or(uniform),
        }
    }

    /// Lowest-index uniform expert, if the pool has one within its depth.
    pub fn uniform_expert(&self) -> Option<u64> {
        (1..=self.depth()).find(|&i| self.is_uniform(i))
    }
}

/// Serializable pool description; the seed is supplied per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PoolSpec {
    Unimodal {
        i_star: u64,
        noise_std: f64,
        /// 1-based action indices.
        good_actions: Vec<usize>,
        peak_quality: f64,
        tail_floor: f64,
        tail_halflife: f64,
        depth: u64,
    },
    Identical {
        advice: Vec<f64>,
    },
    Table {
        rows: Vec<Vec<f64>>,
    },
}

impl PoolSpec {
    pub fn unimodal_spec(&self, num_actions: usize) -> Result<Option<UnimodalPoolSpec>> {
        let PoolSpec::Unimodal {
            i_star,
            noise_std,
            good_actions,
            peak_quality,
            tail_floor,
            tail_halflife,
            depth,
        } = self
        else {
            return Ok(None);
        };
        if good_actions.iter().any(|&a| a == 0 || a > num_actions) {
            return Err(Error::Parameter(format!(
                "good actions {good_actions:?} must lie in [1, {num_actions}]"
            )));
        }
        let start = good_actions.len() as f64 / num_actions as f64;
        let quality = QualityProfile::peaked(start, *i_star, *peak_quality, *tail_floor, *tail_halflife, *depth)?;
        Ok(Some(UnimodalPoolSpec {
            num_actions,
            i_star: *i_star,
            depth: *depth,
            noise_std: *noise_std,
            good_actions: good_actions.iter().map(|a| a - 1).collect(),
            quality,
        }))
    }

    pub fn validate(&self, num_actions: usize) -> Result<()> {
        self.build(num_actions, 0).map(|_| ())
    }

    pub fn build(&self, num_actions: usize, seed: u64) -> Result<ExpertPool> {
        if let Some(spec) = self.unimodal_spec(num_actions)? {
            return make_unimodal_pool(spec, seed);
        }
        match self {
            PoolSpec::Identical { advice } => {
                if advice.len() != num_actions {
                    return Err(Error::Dimension(format!(
                        "identical advice has {} entries, expected {num_actions}",
                        advice.len()
                    )));
                }
                Ok(ExpertPool::Identical(ProbVector::new(advice.clone())?))
            }
            PoolSpec::Table { rows } => {
                let rows = rows
                    .iter()
                    .map(|r| {
                        if r.len() != num_actions {
                            return Err(Error::Dimension(format!(
                                "advice row has {} entries, expected {num_actions}",
                                r.len()
                            )));
                        }
                        ProbVector::new(r.clone())
                    })
                    .collect::<Result<Vec<_>>>()?;
                ExpertPool::table(rows)
            }
            PoolSpec::Unimodal { .. } => unreachable!(),
        }
    }
}
