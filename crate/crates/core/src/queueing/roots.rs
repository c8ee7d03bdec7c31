//! Bracketed bisection for monotone increasing functions.

use crate::error::{Error, Result};

const MAX_ITER: usize = 400;

/// Finds `x` in `[lo, hi]` with `f(x) = target` for an increasing `f`.
///
/// Requires `f(lo) <= target <= f(hi)`. Stops once the bracket width is
/// below `rel_tol` relative to its upper end.
pub fn bisect_increasing<F>(mut f: F, target: f64, lo: f64, hi: f64, rel_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut lo, mut hi) = (lo, hi);
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if !(f_lo <= target && target <= f_hi) {
        return Err(Error::Bracket { lo, hi });
    }
    if f_lo == target {
        return Ok(lo);
    }
    if f_hi == target {
        return Ok(hi);
    }
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= rel_tol * hi.abs() || mid == lo || mid == hi {
            return Ok(mid);
        }
        if f(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Doubles `hi` from `start` until `f(hi) >= target`, giving up after
/// `max_doublings`.
pub fn grow_upper<F>(mut f: F, target: f64, start: f64, max_doublings: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut hi = start;
    for _ in 0..max_doublings {
        if f(hi)? >= target {
            return Ok(hi);
        }
        hi *= 2.0;
    }
    Err(Error::Bracket { lo: start, hi })
}
