//! The convex-combination objective on the two-point family
//! `P_SR(1, b) = P_SR(b, 1) = a`, `P_SR(b, b) = 1 - 2a`.
//!
//! `f_alpha(a, b) = (1 - alpha) E[h((1-S)(1-T))] + alpha E[h(Pi_max(S, R))] - E[h(S)]`
//! where `S, T` are i.i.d. with the marginal of `P_SR` and the middle
//! expectation runs over the coupling itself.

use crate::entropy::h;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::measures::{quad_form_h, DiscreteMeasure};

fn check(a: f64, b: f64, alpha: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&a) {
        return Err(Error::Domain {
            name: "a",
            value: a,
            domain: "[0, 1/2] (two-point family)",
        });
    }
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::Domain {
            name: "b",
            value: b,
            domain: "(0, 1)",
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain {
            name: "alpha",
            value: alpha,
            domain: "[0, 1]",
        });
    }
    Ok(())
}

/// `f_alpha(a, b)` on the two-point family.
pub fn sawin_objective(a: f64, b: f64, alpha: f64) -> Result<f64> {
    check(a, b, alpha)?;
    Ok(terms(a, b).combine(alpha))
}

/// The three expectations making up `f_alpha`.
#[derive(Debug, Clone, Copy)]
pub struct SawinTerms {
    pub iid: f64,
    pub max_entropy: f64,
    pub marginal: f64,
}

impl SawinTerms {
    pub fn combine(&self, alpha: f64) -> f64 {
        (1.0 - alpha) * self.iid + alpha * self.max_entropy - self.marginal
    }
}

/// The three expectations, without domain checks.
pub fn terms(a: f64, b: f64) -> SawinTerms {
    let marginal_s = DiscreteMeasure::new(vec![b, 1.0], vec![1.0 - a, a])
        .expect("two-point marginal is a probability measure");
    // i.i.d. kernel in x-space: atoms 1 - b and 0
    let iid = quad_form_h(
        &KernelSpec::iid(),
        &marginal_s.reflect(),
        &marginal_s.reflect(),
    );
    let maxent = KernelSpec::max_entropy();
    let coupling = [(1.0, b, a), (b, 1.0, a), (b, b, 1.0 - 2.0 * a)];
    let max_entropy = coupling
        .iter()
        .map(|&(s, r, w)| w * h(maxent.value(s, r)))
        .sum();
    SawinTerms {
        iid,
        max_entropy,
        marginal: marginal_s.expect_h(),
    }
}

/// Central difference of `f_alpha` along the mean-preserving direction
/// `(da, db) = (1 - a, -(1 - b))`.
pub fn sawin_directional_derivative(a: f64, b: f64, alpha: f64, step: f64) -> Result<f64> {
    check(a, b, alpha)?;
    let (da, db) = (1.0 - a, -(1.0 - b));
    let plus = terms(a + step * da, b + step * db).combine(alpha);
    let minus = terms(a - step * da, b - step * db).combine(alpha);
    Ok((plus - minus) / (2.0 * step))
}
