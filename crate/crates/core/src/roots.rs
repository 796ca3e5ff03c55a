//! Bracketed bisection for monotone scalar equations.

use crate::{Error, Result};

pub const REL_TOL: f64 = 1e-10;
pub const MAX_ITERS: usize = 200;

/// Root of an increasing function `f` on `[lo, hi]` where `f(lo) <= 0 <= f(hi)`.
/// Stops when the bracket is narrower than `abs_tol + rel_tol * |mid|`.
pub fn bisect_increasing<F>(mut f: F, mut lo: f64, mut hi: f64, abs_tol: f64, rel_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(lo <= hi) {
        return Err(Error::RootNotFound("empty bracket"));
    }
    for _ in 0..MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= abs_tol + rel_tol * mid.abs() {
            return Ok(mid);
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Root of an increasing `f` on `[lo, hi]` with derivative `df`: Newton
/// steps from the midpoint, replaced by bisection whenever a step would leave
/// the current bracket. Stops once a step is below `abs_tol + rel_tol * |x|`.
pub fn newton_increasing<F, D>(mut f: F, mut df: D, mut lo: f64, mut hi: f64, abs_tol: f64, rel_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
    D: FnMut(f64) -> f64,
{
    if !(lo <= hi) {
        return Err(Error::RootNotFound("empty bracket"));
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..MAX_ITERS {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = df(x);
        let newton = x - fx / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let tol = abs_tol + rel_tol * next.abs();
        if (next - x).abs() <= tol || hi - lo <= tol {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Grow `hi` by doubling (from a positive start) until `f(hi) >= 0`.
pub fn grow_upper<F>(mut f: F, start: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut hi = start.max(f64::MIN_POSITIVE);
    for _ in 0..MAX_ITERS {
        if f(hi) >= 0.0 {
            return Ok(hi);
        }
        hi *= 2.0;
    }
    Err(Error::RootNotFound("upper bracket did not close"))
}

/// Root of an increasing function on `[lo, ∞)`, bracket grown by doubling.
pub fn solve_increasing<F>(mut f: F, lo: f64, start: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if f(lo) >= 0.0 {
        return Ok(lo);
    }
    let hi = grow_upper(&mut f, start)?;
    // Lower end of the final doubling step keeps the bracket tight.
    let lo = if hi / 2.0 > lo && f(hi / 2.0) < 0.0 { hi / 2.0 } else { lo };
    bisect_increasing(f, lo, hi, 0.0, REL_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_square_root() {
        let r = solve_increasing(|x| x * x - 2.0, 0.0, 1.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn lower_end_already_root() {
        assert_eq!(solve_increasing(|x| x + 1.0, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn newton_agrees_with_bisection() {
        let f = |x: f64| x.powf(0.3) - x - 0.2;
        let b = bisect_increasing(f, 0.0, 0.18, 1e-15, 0.0).unwrap();
        let n = newton_increasing(f, |x: f64| 0.3 * x.powf(-0.7) - 1.0, 0.0, 0.18, 1e-15, 0.0).unwrap();
        assert!((b - n).abs() < 1e-14, "{b} {n}");
        // A misleading derivative falls back to bisection.
        let n = newton_increasing(|x| x - 0.3, |_| -1.0, 0.0, 1.0, 1e-14, 0.0).unwrap();
        assert!((n - 0.3).abs() < 1e-13);
    }

    #[test]
    fn empty_bracket_errors() {
        assert!(bisect_increasing(|x| x, 1.0, 0.0, 0.0, 1e-10).is_err());
    }

    #[test]
    fn unbounded_fails() {
        assert!(grow_upper(|_| -1.0, 1.0).is_err());
    }
}
