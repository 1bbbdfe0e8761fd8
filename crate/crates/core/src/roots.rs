//! Scalar bracketing routines: bisection for monotone cost gaps and
//! golden-section search for one-dimensional design objectives.

use crate::error::{Error, Result};

const MAX_BISECTIONS: usize = 200;

/// Root of a non-decreasing `f` on `[lo, hi]`, refined until the bracket
/// cannot shrink further in `f64`. Requires `f(lo) <= 0 <= f(hi)`.
pub fn bisect_increasing(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa < 0.0 && fb > 0.0) {
        return Err(Error::NotBracketed { lo, hi, f_lo: fa, f_hi: fb });
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = a + 0.5 * (b - a);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    // pick the endpoint with the smaller residual
    Ok(if f(a).abs() <= f(b).abs() { a } else { b })
}

/// Minimizer of `f` on `[a, b]` assuming local unimodality. Returns the
/// best point seen, endpoints included, with ties going to the smaller x.
pub fn golden_section_min(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut best = (lo, f(lo));
    let consider = |x: f64, fx: f64, best: &mut (f64, f64)| {
        if fx < best.1 || (fx == best.1 && x < best.0) {
            *best = (x, fx);
        }
    };
    let fhi = f(hi);
    consider(hi, fhi, &mut best);

    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    consider(x1, f1, &mut best);
    consider(x2, f2, &mut best);
    best
}
