//! Probabilistic thresholding search.
//!
//! Given one epoch's final log weights and thresholds, find the largest local
//! index `j` that is strictly rank-dominated by some later expert `j' > j`
//! (`log_w[j'] - log_w[j] > eps[j']`). Every expert up to `j` is then, with
//! high probability under unimodality, to the left of the best expert, so the
//! search window may start at `j + 1`.

use crate::error::{Error, Result};
use crate::simplex::LogWeightVector;

fn check(log_w: &LogWeightVector, epsilon: &[f64], i_lower: u64) -> Result<()> {
    if log_w.len() != epsilon.len() {
        return Err(Error::Dimension(format!(
            "{} log weights but {} thresholds",
            log_w.len(),
            epsilon.len()
        )));
    }
    if log_w.is_empty() {
        return Err(Error::Dimension("empty window".into()));
    }
    if i_lower == 0 {
        return Err(Error::Parameter("lower bound is 1-based".into()));
    }
    Ok(())
}

/// The double loop as stated: `O(N^2)`.
pub fn pts(log_w: &LogWeightVector, epsilon: &[f64], i_lower: u64) -> Result<u64> {
    check(log_w, epsilon, i_lower)?;
    let w = log_w.as_slice();
    let n = w.len();
    let mut j_lower = 1;
    for j in 1..n {
        for jp in j + 1..=n {
            if w[jp - 1] - w[j - 1] > epsilon[jp - 1] {
                j_lower = j + 1;
            }
        }
    }
    Ok(i_lower + j_lower as u64 - 1)
}

/// Same result as [`pts`] in `O(N)` for almost every input.
///
/// Expert `j` fires iff `max_{j' > j} (log_w[j'] - eps[j']) > log_w[j]`, up to
/// floating-point rounding. A suffix maximum answers that for every `j`; the
/// rare comparisons that land inside the rounding band are settled by the
/// literal test.
pub fn pts_fast(log_w: &LogWeightVector, epsilon: &[f64], i_lower: u64) -> Result<u64> {
    check(log_w, epsilon, i_lower)?;
    let w = log_w.as_slice();
    let n = w.len();
    let scale = w.iter().fold(0.0f64, |m, x| m.max(x.abs()))
        + epsilon.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tau = 8.0 * f64::EPSILON * scale;

    let fires_exactly = |j: usize| (j + 1..n).any(|jp| w[jp] - w[j] > epsilon[jp]);

    // suffix[j] = max over jp > j of w[jp] - eps[jp], scanned right to left;
    // the first (largest) j that fires decides the answer.
    let mut suffix = f64::NEG_INFINITY;
    for j in (0..n.saturating_sub(1)).rev() {
        suffix = suffix.max(w[j + 1] - epsilon[j + 1]);
        let fires = if suffix > w[j] + tau {
            true
        } else if suffix < w[j] - tau {
            false
        } else {
            fires_exactly(j)
        };
        if fires {
            // 0-based j firing means j_lower = j + 2 in 1-based terms
            return Ok(i_lower + j as u64 + 1);
        }
    }
    Ok(i_lower)
}
