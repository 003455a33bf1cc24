//! Bracketed root finding for monotone scalar maps (water levels, thresholds).

use crate::error::{Error, Result};

/// Which side of the target the returned point must lie on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `f(x) <= target`
    Below,
    /// `f(x) >= target`
    Above,
}

pub const MAX_ITER: usize = 200;

/// Solves `f(x) = target` for nondecreasing `f` on `[lo, hi]`.
///
/// Requires `f(lo) <= target <= f(hi)`. Iterates false position with the Illinois
/// modification, falling back to bisection whenever the bracket fails to halve.
/// Stops once `|f(x) - target| <= tol` on the requested side or the bracket
/// collapses to adjacent floats; the returned point always respects `side`.
pub fn solve_increasing<F>(mut f: F, target: f64, lo: f64, hi: f64, side: Side, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a) - target, f(b) - target);
    if fa > 0.0 || fb < 0.0 || fa.is_nan() || fb.is_nan() {
        return Err(Error::Bracket(format!("f({a:e})-t={fa:e}, f({b:e})-t={fb:e}")));
    }
    let pick = |a: f64, b: f64| match side {
        Side::Below => a,
        Side::Above => b,
    };
    if side == Side::Below && fa >= -tol {
        return Ok(a);
    }
    if fb <= tol && side == Side::Above {
        return Ok(b);
    }
    let mut last_kept = 0i8;
    let mut width = b - a;
    for _ in 0..MAX_ITER {
        let mut x = if fb != fa {
            a - fa * (b - a) / (fb - fa)
        } else {
            0.5 * (a + b)
        };
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
        }
        if x <= a || x >= b {
            // bracket is down to adjacent floats
            return Ok(pick(a, b));
        }
        let fx = f(x) - target;
        if fx <= 0.0 {
            a = x;
            fa = fx;
            if last_kept == 1 {
                fb *= 0.5;
            }
            last_kept = 1;
            if side == Side::Below && fx >= -tol {
                return Ok(a);
            }
        } else {
            b = x;
            fb = fx;
            if last_kept == -1 {
                fa *= 0.5;
            }
            last_kept = -1;
            if side == Side::Above && fx <= tol {
                return Ok(b);
            }
        }
        let new_width = b - a;
        if new_width > 0.5 * width {
            // force a bisection step
            let m = 0.5 * (a + b);
            if m > a && m < b {
                let fm = f(m) - target;
                if fm <= 0.0 {
                    a = m;
                    fa = fm;
                    if side == Side::Below && fm >= -tol {
                        return Ok(a);
                    }
                } else {
                    b = m;
                    fb = fm;
                    if side == Side::Above && fm <= tol {
                        return Ok(b);
                    }
                }
                last_kept = 0;
            }
        }
        width = b - a;
    }
    Ok(pick(a, b))
}

/// Solves `f(x) = target` for nonincreasing `f`.
pub fn solve_decreasing<F>(mut f: F, target: f64, lo: f64, hi: f64, side: Side, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let flipped = match side {
        Side::Below => Side::Above,
        Side::Above => Side::Below,
    };
    solve_increasing(|x| -f(x), -target, lo, hi, flipped, tol)
}
