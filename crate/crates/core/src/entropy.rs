//! Binary entropy in bits and the i.i.d. ratio bound built on it.

use std::f64::consts::LN_2;

use crate::error::{check_unit, Error, Result};

/// Arguments this close to 0 or 1 evaluate to zero entropy.
pub const EDGE: f64 = 1e-15;

/// The golden-ratio threshold `(3 - sqrt 5) / 2`.
pub fn golden_threshold() -> f64 {
    (3.0 - 5f64.sqrt()) / 2.0
}

/// Binary entropy `h(s)` in bits, with `0 log 0 = 0`.
///
/// Evaluation is exactly symmetric: `h(s)` and `h(1 - s)` run the same
/// floating-point operations on the smaller of the two arguments.
pub fn binary_entropy(s: f64) -> Result<f64> {
    check_unit("s", s)?;
    Ok(h(s))
}

/// Unchecked binary entropy used on hot paths. Arguments outside the
/// closed unit interval are treated as boundary points.
#[inline]
pub fn h(s: f64) -> f64 {
    if !(s > EDGE && s < 1.0 - EDGE) {
        return 0.0;
    }
    let p = if s <= 0.5 { s } else { 1.0 - s };
    -(p * p.ln() + (1.0 - p) * (-p).ln_1p()) / LN_2
}

/// Derivative `h'(s) = log2((1 - s) / s)`.
///
/// The argument is clamped to `[EDGE, 1 - EDGE]` so the value stays finite
/// (about +-50 at the clamps).
#[inline]
pub fn h_prime(s: f64) -> f64 {
    let s = s.clamp(EDGE, 1.0 - EDGE);
    if s <= 0.5 {
        ((-s).ln_1p() - s.ln()) / LN_2
    } else {
        let t = 1.0 - s;
        (t.ln() - (-t).ln_1p()) / LN_2
    }
}

/// Lower bound on `E[h(1 - S)(1 - T)] / E[h(S)]` for i.i.d. `S, T` with
/// mean `u`.
///
/// Below the golden threshold the bound is `h(2u - u^2) / h(u)`; above it
/// the linear branch `(1 - u) * 2 / (sqrt 5 - 1)` takes over. Both branches
/// equal one at the threshold.
pub fn prop1_bound(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain {
            name: "u",
            value: u,
            domain: "(0, 1)",
        });
    }
    if u <= golden_threshold() {
        Ok(h(2.0 * u - u * u) / h(u))
    } else {
        Ok((1.0 - u) * 2.0 / (5f64.sqrt() - 1.0))
    }
}
