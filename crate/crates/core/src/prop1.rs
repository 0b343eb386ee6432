//! Randomised check of `E[h((1-S)(1-T))] >= prop1_bound(u) E[h(S)]` for
//! i.i.d. `S, T` drawn from three-atom laws with mean `u`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::entropy::prop1_bound;
use crate::error::Result;
use crate::kernels::KernelSpec;
use crate::measures::{quad_form_h, DiscreteMeasure};

/// Largest admissible violation.
pub const PROP1_SLACK: f64 = -1e-9;
/// Upper end of the sampled means.
pub const MAX_MEAN: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop1Worst {
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
    pub mean: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop1Report {
    pub samples: usize,
    pub seed: u64,
    pub min_slack: f64,
    pub worst: Prop1Worst,
    pub pass: bool,
}

/// `E[h((1-S)(1-T))] - prop1_bound(u) E[h(S)]` for the law `p_s`.
pub fn prop1_slack(p_s: &DiscreteMeasure) -> Result<f64> {
    let u = p_s.mean();
    let x = p_s.reflect();
    let lhs = quad_form_h(&KernelSpec::iid(), &x, &x);
    Ok(lhs - prop1_bound(u)? * p_s.expect_h())
}

/// A three-atom law on `[0, 1]` with mean in `(0, MAX_MEAN)`; atoms are
/// uniform and weights uniform on the simplex.
pub fn random_three_atom(rng: &mut ChaCha8Rng) -> Result<DiscreteMeasure> {
    loop {
        let atoms: Vec<f64> = (0..3).map(|_| rng.gen()).collect();
        let (u, v): (f64, f64) = (rng.gen(), rng.gen());
        let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
        let weights = vec![lo, hi - lo, 1.0 - hi];
        let m = DiscreteMeasure::new(atoms, weights)?;
        let mean = m.mean();
        if mean > 0.0 && mean < MAX_MEAN {
            return Ok(m);
        }
    }
}

pub fn prop1_check(samples: usize, seed: u64) -> Result<Prop1Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: Option<Prop1Worst> = None;
    for _ in 0..samples {
        let m = random_three_atom(&mut rng)?;
        let slack = prop1_slack(&m)?;
        if worst.as_ref().is_none_or(|w| slack < w.slack) {
            worst = Some(Prop1Worst {
                atoms: m.atoms().to_vec(),
                weights: m.weights().to_vec(),
                mean: m.mean(),
                slack,
            });
        }
    }
    let worst = worst.unwrap_or(Prop1Worst {
        atoms: Vec::new(),
        weights: Vec::new(),
        mean: f64::NAN,
        slack: f64::INFINITY,
    });
    Ok(Prop1Report {
        samples,
        seed,
        min_slack: worst.slack,
        pass: worst.slack >= PROP1_SLACK,
        worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{golden_threshold, h};

    #[test]
    fn point_mass_below_threshold_is_tight() {
        let u = 0.2;
        let m = DiscreteMeasure::dirac(u).unwrap();
        // A point mass gives equality on the lower branch.
        assert!(prop1_slack(&m).unwrap().abs() < 1e-12);
        let direct = h(1.0 - (1.0 - u) * (1.0 - u)) - prop1_bound(u).unwrap() * h(u);
        assert!(direct.abs() < 1e-12);
    }

    #[test]
    fn small_batch_passes() {
        let rep = prop1_check(500, 4).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep, prop1_check(500, 4).unwrap());
        assert!(rep.worst.mean < MAX_MEAN);
    }

    #[test]
    fn threshold_value() {
        assert!((prop1_bound(golden_threshold()).unwrap() - 1.0).abs() < 1e-12);
    }
}
