//! Scalar root finding: geometric bracket expansion followed by a
//! bisection/secant hybrid that never leaves the current bracket.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError {
    #[error("no sign change found after {doublings} geometric expansions from {start}")]
    BracketExpansion { start: f64, doublings: usize },
    #[error("interval [{a}, {b}] does not bracket a root: f(a) = {fa}, f(b) = {fb}")]
    NoSignChange { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("function value at {x} is not finite")]
    NotFinite { x: f64 },
}

pub const MAX_DOUBLINGS: usize = 200;

/// Walks `start · 2^k` (or `start · 2^{-k}` when `upward` is false) until
/// `f` changes sign relative to `f(start)`. Returns the last two points,
/// ordered increasingly.
pub fn expand_bracket<F: FnMut(f64) -> f64>(
    mut f: F,
    start: f64,
    upward: bool,
) -> Result<(f64, f64), RootError> {
    let f0 = f(start);
    if !f0.is_finite() {
        return Err(RootError::NotFinite { x: start });
    }
    if f0 == 0.0 {
        return Ok((start, start));
    }
    let factor = if upward { 2.0 } else { 0.5 };
    let mut prev = start;
    for _ in 0..MAX_DOUBLINGS {
        let next = prev * factor;
        let fx = f(next);
        if fx.is_nan() {
            return Err(RootError::NotFinite { x: next });
        }
        if fx == 0.0 || (fx > 0.0) != (f0 > 0.0) {
            return Ok(if upward { (prev, next) } else { (next, prev) });
        }
        prev = next;
    }
    Err(RootError::BracketExpansion {
        start,
        doublings: MAX_DOUBLINGS,
    })
}

/// Finds a root of `f` in `[a, b]` given a sign change. Stops once
/// `|f(x)| <= f_tol` or the bracket has collapsed to adjacent floats, in
/// which case the endpoint with the smaller residual is returned.
pub fn hybrid_root<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    f_tol: f64,
) -> Result<f64, RootError> {
    let (mut a, mut b) = if a <= b { (a, b) } else { (b, a) };
    let mut fa = f(a);
    let mut fb = f(b);
    if !fa.is_finite() {
        return Err(RootError::NotFinite { x: a });
    }
    if !fb.is_finite() {
        return Err(RootError::NotFinite { x: b });
    }
    if fa.abs() <= f_tol {
        return Ok(a);
    }
    if fb.abs() <= f_tol {
        return Ok(b);
    }
    if (fa > 0.0) == (fb > 0.0) {
        return Err(RootError::NoSignChange { a, b, fa, fb });
    }

    let mut width = b - a;
    // number of consecutive secant steps that failed to halve the bracket
    let mut slow = 0;
    for _ in 0..1000 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let secant = b - fb * (b - a) / (fb - fa);
        let x = if slow < 2 && secant > a && secant < b && secant.is_finite() {
            secant
        } else {
            slow = 0;
            mid
        };
        let fx = f(x);
        if fx.is_nan() {
            return Err(RootError::NotFinite { x });
        }
        if fx.abs() <= f_tol {
            return Ok(x);
        }
        if (fx > 0.0) == (fa > 0.0) {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        let new_width = b - a;
        if new_width > 0.5 * width {
            slow += 1;
        } else {
            slow = 0;
        }
        width = new_width;
    }
    Ok(if fa.abs() <= fb.abs() { a } else { b })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_two() {
        let r = hybrid_root(|x| x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn flat_then_steep() {
        // secant alone stalls on this one
        let f = |x: f64| x.powi(9) - 1e-3;
        let r = hybrid_root(f, 0.0, 4.0, 1e-16).unwrap();
        assert!((r - 1e-3f64.powf(1.0 / 9.0)).abs() < 1e-14);
    }

    #[test]
    fn expansion() {
        let (lo, hi) = expand_bracket(|t| 1000.0 / t - 1.0, 1.0, true).unwrap();
        assert!(lo < 1000.0 && hi >= 1000.0);
        let (lo, hi) = expand_bracket(|t| 1e-6 / t - 1.0, 1.0, false).unwrap();
        assert!(lo <= 1e-6 && hi > 1e-6);
        assert!(expand_bracket(|_| 1.0, 1.0, true).is_err());
    }

    #[test]
    fn rejects_same_sign() {
        assert!(matches!(
            hybrid_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12),
            Err(RootError::NoSignChange { .. })
        ));
    }
}
