//! Derivative-free bracketing root finding.

use crate::error::{Error, Result};

/// Points used by [`scan_brackets`] when locating sign changes.
pub const SCAN_POINTS: usize = 10_000;

/// Sub-intervals of `(lo, hi)` on which `f` changes sign, found by
/// sampling `n` interior points. Also returns the compressed sign pattern
/// (runs of `+`, `-` and `0`) for error reporting.
pub fn scan_brackets<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    n: usize,
) -> (Vec<(f64, f64)>, String) {
    let xs: Vec<f64> = (1..n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .collect();
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut brackets = Vec::new();
    let mut pattern = String::new();
    for (i, v) in vals.iter().enumerate() {
        let c = if *v > 0.0 {
            '+'
        } else if *v < 0.0 {
            '-'
        } else {
            '0'
        };
        if !pattern.ends_with(c) {
            pattern.push(c);
        }
        if i + 1 < vals.len() && v.signum() * vals[i + 1].signum() < 0.0 {
            brackets.push((xs[i], xs[i + 1]));
        }
    }
    (brackets, pattern)
}

/// Bisects a sign-changing bracket until the midpoint no longer moves or
/// the bracket is narrower than `tol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Solver(format!(
            "bisection bracket [{lo}, {hi}] has f values {flo} and {fhi} of equal sign"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= tol {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// All roots of `f` in `(lo, hi)` resolved from a [`SCAN_POINTS`] scan.
pub fn all_roots<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    tol: f64,
    equation: &str,
) -> Result<Vec<f64>> {
    let (brackets, pattern) = scan_brackets(&f, lo, hi, SCAN_POINTS);
    if brackets.is_empty() {
        return Err(Error::Bracketing {
            equation: equation.to_string(),
            pattern,
        });
    }
    brackets
        .into_iter()
        .map(|(a, b)| bisect(&f, a, b, tol))
        .collect()
}

/// Golden-section minimisation of a unimodal function on `[lo, hi]`.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..300 {
        if hi - lo <= tol {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}
