//! Probability vectors over actions, log-domain weights and the mixing step
//! shared by every learner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Absolute tolerance used when validating probability vectors at API boundaries.
pub const PROB_TOLERANCE: f64 = 1e-9;

/// A distribution over `K` actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates nonnegativity and unit mass (within [`PROB_TOLERANCE`]).
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        check_distribution(&entries)?;
        Ok(Self(entries))
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k > 0, "uniform distribution over zero actions");
        Self(vec![1.0 / k as f64; k])
    }

    /// Unit mass on `action` (0-based).
    pub fn point_mass(k: usize, action: usize) -> Self {
        assert!(action < k);
        let mut v = vec![0.0; k];
        v[action] = 1.0;
        Self(v)
    }

    /// Skips validation. Callers guarantee the invariants.
    pub(crate) fn from_vec_unchecked(entries: Vec<f64>) -> Self {
        debug_assert!(check_distribution(&entries).is_ok(), "{entries:?}");
        Self(entries)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(p: ProbVector) -> Vec<f64> {
        p.0
    }
}

pub(crate) fn check_distribution(entries: &[f64]) -> Result<()> {
    if entries.is_empty() {
        return Err(Error::Dimension("empty probability vector".into()));
    }
    let mut sum = 0.0;
    for (a, &x) in entries.iter().enumerate() {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::Domain(format!("entry {a} = {x} is not a probability")));
        }
        sum += x;
    }
    if (sum - 1.0).abs() > PROB_TOLERANCE {
        return Err(Error::Domain(format!("entries sum to {sum}, not 1")));
    }
    Ok(())
}

/// Natural-log expert weights. All entries finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LogWeightVector(Vec<f64>);

impl LogWeightVector {
    pub fn new(log_w: Vec<f64>) -> Result<Self> {
        if let Some((i, x)) = log_w.iter().enumerate().find(|(_, x)| !x.is_finite()) {
            return Err(Error::Domain(format!("log-weight {i} = {x} is not finite")));
        }
        Ok(Self(log_w))
    }

    /// `n` unit weights.
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl std::ops::Index<usize> for LogWeightVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for LogWeightVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LogWeightVector> for Vec<f64> {
    fn from(w: LogWeightVector) -> Vec<f64> {
        w.0
    }
}

/// Row-major `N x K` matrix of expert advice; row `i` is a distribution over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct AdviceMatrix {
    experts: usize,
    actions: usize,
    data: Vec<f64>,
}

impl AdviceMatrix {
    /// Validates every row.
    pub fn from_rows(rows: &[ProbVector]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Dimension("advice matrix has no rows".into()))?;
        let actions = first.len();
        let mut data = Vec::with_capacity(rows.len() * actions);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != actions {
                return Err(Error::Dimension(format!(
                    "advice row {i} has {} entries, expected {actions}",
                    row.len()
                )));
            }
            data.extend_from_slice(row.as_slice());
        }
        Ok(Self {
            experts: rows.len(),
            actions,
            data,
        })
    }

    /// A zeroed matrix for callers that fill rows in place via [`row_mut`](Self::row_mut).
    pub fn zeros(experts: usize, actions: usize) -> Self {
        Self {
            experts,
            actions,
            data: vec![0.0; experts * actions],
        }
    }

    pub fn experts(&self) -> usize {
        self.experts
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.actions..(i + 1) * self.actions]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.actions..(i + 1) * self.actions]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.actions)
    }

    /// Checks every row against the simplex invariants.
    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.rows().enumerate() {
            check_distribution(row).map_err(|e| match e {
                Error::Domain(msg) => Error::Domain(format!("advice row {i}: {msg}")),
                other => other,
            })?;
        }
        Ok(())
    }
}

/// `q_i = exp(log_w_i - logsumexp(log_w))`.
pub fn normalize_log_weights(lw: &LogWeightVector) -> Result<ProbVector> {
    if lw.is_empty() {
        return Err(Error::Dimension("no weights to normalize".into()));
    }
    let m = lw.max();
    let mut q: Vec<f64> = lw.as_slice().iter().map(|&x| (x - m).exp()).collect();
    let z: f64 = q.iter().sum();
    q.iter_mut().for_each(|x| *x /= z);
    Ok(ProbVector::from_vec_unchecked(q))
}

/// `p_a = (1 - K rho) sum_i q_i xi^i_a + rho`.
pub fn mix_advice(q: &ProbVector, advice: &AdviceMatrix, rho: f64) -> Result<ProbVector> {
    let k = advice.actions();
    check_rho(rho, k)?;
    if q.len() != advice.experts() {
        return Err(Error::Dimension(format!(
            "{} expert weights for {} advice rows",
            q.len(),
            advice.experts()
        )));
    }
    let mut p = vec![0.0; k];
    for (row, &qi) in advice.rows().zip(q.as_slice()) {
        for (pa, &xa) in p.iter_mut().zip(row) {
            *pa += qi * xa;
        }
    }
    let scale = 1.0 - k as f64 * rho;
    p.iter_mut().for_each(|pa| *pa = scale * *pa + rho);
    Ok(ProbVector::from_vec_unchecked(p))
}

pub(crate) fn check_rho(rho: f64, k: usize) -> Result<()> {
    if !(rho > 0.0 && rho <= 1.0 / k as f64) {
        return Err(Error::Parameter(format!(
            "exploration floor {rho} outside (0, 1/{k}]"
        )));
    }
    Ok(())
}

/// Draws an action index (0-based) from `p` using exactly one uniform draw.
pub fn sample_categorical(p: &ProbVector, rng: &mut RngStream) -> usize {
    let u = rng.next_f64();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (a, &pa) in p.as_slice().iter().enumerate() {
        if pa > 0.0 {
            acc += pa;
            last_positive = a;
            if u < acc {
                return a;
            }
        }
    }
    // u landed in the rounding gap above the accumulated mass
    last_positive
}

/// Clamps negative entries to zero and rescales to unit mass; an all-zero
/// result falls back to the uniform distribution.
pub fn project_to_simplex(v: &[f64]) -> ProbVector {
    let mut out = v.to_vec();
    project_in_place(&mut out);
    ProbVector::from_vec_unchecked(out)
}

#[inline]
pub(crate) fn project_in_place(v: &mut [f64]) {
    let mut sum = 0.0;
    for x in v.iter_mut() {
        if x.is_nan() || *x < 0.0 {
            *x = 0.0;
        }
        sum += *x;
    }
    if sum > 0.0 && sum.is_finite() {
        let inv = 1.0 / sum;
        v.iter_mut().for_each(|x| *x *= inv);
    } else {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn lw(v: &[f64]) -> LogWeightVector {
        LogWeightVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let q = normalize_log_weights(&lw(&[0.0, 0.0, 0.0])).unwrap();
        for &x in q.as_slice() {
            assert_abs_diff_eq!(x, 1.0 / 3.0, epsilon = 1e-15);
        }
        let q = normalize_log_weights(&lw(&[1000.0, 1000.0])).unwrap();
        assert_eq!(q.as_slice(), &[0.5, 0.5]);
        let q = normalize_log_weights(&lw(&[0.0, 3f64.ln()])).unwrap();
        assert_abs_diff_eq!(q[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(q[1], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn normalize_rejects_empty() {
        assert!(matches!(
            normalize_log_weights(&LogWeightVector::zeros(0)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn log_weights_reject_non_finite() {
        assert!(LogWeightVector::new(vec![0.0, f64::NAN]).is_err());
        assert!(LogWeightVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn mix_examples() {
        let one = AdviceMatrix::from_rows(&[ProbVector::point_mass(2, 0)]).unwrap();
        let p = mix_advice(&ProbVector::uniform(1), &one, 0.1).unwrap();
        assert_abs_diff_eq!(p[0], 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.1, epsilon = 1e-15);

        let two = AdviceMatrix::from_rows(&[
            ProbVector::point_mass(2, 0),
            ProbVector::point_mass(2, 1),
        ])
        .unwrap();
        let p = mix_advice(&ProbVector::uniform(2), &two, 0.1).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-15);

        let four = AdviceMatrix::from_rows(&[ProbVector::new(vec![0.7, 0.1, 0.1, 0.1]).unwrap()])
            .unwrap();
        let p = mix_advice(&ProbVector::uniform(1), &four, 0.25).unwrap();
        for &x in p.as_slice() {
            assert_abs_diff_eq!(x, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn mix_errors() {
        let m = AdviceMatrix::from_rows(&[ProbVector::uniform(2)]).unwrap();
        let q = ProbVector::uniform(1);
        assert!(matches!(mix_advice(&q, &m, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(mix_advice(&q, &m, 0.6), Err(Error::Parameter(_))));
        let q2 = ProbVector::uniform(2);
        assert!(matches!(mix_advice(&q2, &m, 0.1), Err(Error::Dimension(_))));
        assert!(matches!(
            AdviceMatrix::from_rows(&[ProbVector::uniform(2), ProbVector::uniform(3)]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn sample_point_masses() {
        let mut rng = RngStream::new(3, 0);
        for _ in 0..1000 {
            assert_eq!(sample_categorical(&ProbVector::point_mass(3, 0), &mut rng), 0);
            assert_eq!(sample_categorical(&ProbVector::point_mass(5, 4), &mut rng), 4);
        }
    }

    #[test]
    fn sample_fair_coin_frequency() {
        let mut rng = RngStream::new(11, 2);
        let p = ProbVector::uniform(2);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| sample_categorical(&p, &mut rng) == 0)
            .count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.5).abs() <= 0.01, "frequency {freq}");
    }

    #[test]
    fn sample_consumes_one_draw() {
        let p = ProbVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let mut a = RngStream::new(5, 9);
        let mut b = RngStream::new(5, 9);
        sample_categorical(&p, &mut a);
        b.next_f64();
        assert_eq!(a.next_f64(), b.next_f64());
    }

    #[test]
    fn project_examples() {
        assert_eq!(project_to_simplex(&[0.5, 0.5]).as_slice(), &[0.5, 0.5]);
        assert_eq!(project_to_simplex(&[-0.2, 0.6]).as_slice(), &[0.0, 1.0]);
        assert_eq!(project_to_simplex(&[-1.0, -1.0]).as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(vec![0.5, 0.5 + 1e-10]).is_ok());
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![1.2, -0.2]).is_err());
        assert!(ProbVector::new(vec![]).is_err());
    }

    fn distribution(k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, k).prop_map(|v| project_to_simplex(&v).into_vec())
    }

    proptest! {
        #[test]
        fn mix_respects_floor(
            (k, rows, q) in (2usize..8, 1usize..6).prop_flat_map(|(k, n)| (
                Just(k),
                prop::collection::vec(distribution(k), n),
                distribution(n),
            )),
            frac in 0.0001f64..1.0,
        ) {
            let rho = frac / k as f64;
            let rows: Vec<ProbVector> = rows.into_iter().map(|r| ProbVector::new(r).unwrap()).collect();
            let m = AdviceMatrix::from_rows(&rows).unwrap();
            let q = ProbVector::new(q).unwrap();
            let p = mix_advice(&q, &m, rho).unwrap();
            prop_assert!(p.min() >= rho - 1e-12);
            prop_assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn normalize_shift_invariant(
            v in prop::collection::vec(-50.0f64..50.0, 1..20),
            shift in -1e3f64..1e3,
        ) {
            let a = normalize_log_weights(&lw(&v)).unwrap();
            let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
            let b = normalize_log_weights(&lw(&shifted)).unwrap();
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn projection_is_distribution(v in prop::collection::vec(-1.0f64..1.0, 1..12)) {
            let p = project_to_simplex(&v);
            prop_assert!(ProbVector::new(p.into_vec()).is_ok());
        }
    }
}
