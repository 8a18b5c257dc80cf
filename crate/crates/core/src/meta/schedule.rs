use crate::error::{Error, Result};
use crate::exp4r::E_MINUS_2;
use crate::meta::EpochSchedule;

/// Epoch windows larger than this are refused rather than allocated.
const MAX_WINDOW: u64 = 1 << 32;

/// `ceil(alpha K ln(16 c^4 / delta))`, large enough that every epoch satisfies
/// `4 K ln N_l <= T_l` and `ln(2 N_l / delta) <= (e - 2) K T_l`.
pub fn default_c(alpha: u32, c: u64, num_actions: usize, delta: f64) -> Result<u64> {
    if alpha == 0 || c == 0 || num_actions == 0 {
        return Err(Error::Parameter("alpha, c and K must be >= 1".into()));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Parameter(format!("delta {delta} outside (0, 1]")));
    }
    let log_term = 16f64.ln() + 4.0 * (c as f64).ln() - delta.ln();
    Ok((alpha as f64 * num_actions as f64 * log_term).ceil() as u64)
}

/// Both regime conditions for epoch `l`, evaluated in log space so that any
/// `l` works without overflow.
pub fn schedule_preconditions_hold(alpha: u32, c: u64, big_c: u64, num_actions: usize, delta: f64, l: u32) -> bool {
    let k = num_actions as f64;
    let ln_n = (c as f64).ln() + (alpha as f64) * (l as f64) * std::f64::consts::LN_2;
    let t = big_c as f64 * 2f64.powi(l as i32);
    4.0 * k * ln_n <= t && (std::f64::consts::LN_2 + ln_n - delta.ln()) <= E_MINUS_2 * k * t
}

/// Number of epochs `L = floor(log2(1 + T / (2C)))` and the length of the
/// last one, `T - sum_{l < L} C 2^l`.
pub fn epoch_count(horizon: usize, big_c: u64) -> Result<(u32, usize)> {
    if big_c == 0 {
        return Err(Error::Parameter("C must be >= 1".into()));
    }
    let t = horizon as u128;
    let c = big_c as u128;
    if t < 2 * c {
        return Err(Error::Parameter(format!(
            "horizon {horizon} is shorter than the first epoch (2C = {})",
            2 * c
        )));
    }
    // largest L with C (2^(L+1) - 2) <= T
    let mut l: u32 = 1;
    while c * ((1u128 << (l + 2)) - 2) <= t {
        l += 1;
    }
    let before_last = c * ((1u128 << l) - 2);
    Ok((l, (t - before_last) as usize))
}

/// All epoch lengths; they sum to `horizon`.
pub fn epoch_lengths(horizon: usize, big_c: u64) -> Result<Vec<usize>> {
    let (l_count, last) = epoch_count(horizon, big_c)?;
    let mut lengths: Vec<usize> = (1..l_count).map(|l| (big_c << l) as usize).collect();
    lengths.push(last);
    Ok(lengths)
}

/// Epoch `l` with `N_l = c 2^(alpha l)`, `T_l = C 2^l` and
/// `rho_l = sqrt(ln N_l / (K T_l))`.
pub fn make_schedule(
    l: u32,
    alpha: u32,
    c: u64,
    big_c: u64,
    num_actions: usize,
    window_start: u64,
) -> Result<EpochSchedule> {
    if l == 0 {
        return Err(Error::Parameter("epochs are numbered from 1".into()));
    }
    if window_start == 0 {
        return Err(Error::Parameter("expert indices are 1-based".into()));
    }
    let num_experts = scaled_pow2(c, alpha.checked_mul(l))
        .filter(|&n| n <= MAX_WINDOW && window_start.checked_add(n).is_some())
        .ok_or_else(|| Error::Resource(format!("expert window of epoch {l} is too large")))?;
    let length = scaled_pow2(big_c, Some(l))
        .and_then(|t| usize::try_from(t).ok())
        .ok_or_else(|| Error::Resource(format!("length of epoch {l} overflows")))?;
    with_size(l, num_experts as usize, length, num_actions, window_start)
}

fn scaled_pow2(base: u64, shift: Option<u32>) -> Option<u64> {
    let shift = shift?;
    if shift >= 64 {
        return None;
    }
    base.checked_mul(1u64 << shift)
}

pub(crate) fn with_size(
    index: u32,
    num_experts: usize,
    length: usize,
    num_actions: usize,
    window_start: u64,
) -> Result<EpochSchedule> {
    let rho = crate::exp4r::rho_default(num_experts, num_actions, length);
    if !(rho > 0.0 && rho <= 1.0 / num_actions as f64) {
        return Err(Error::Parameter(format!(
            "epoch {index}: exploration floor {rho} outside (0, 1/{num_actions}]; increase C"
        )));
    }
    Ok(EpochSchedule {
        index,
        num_experts,
        length,
        rho,
        window_start,
    })
}
