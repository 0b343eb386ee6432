//! Monte-Carlo sampling of single protocol steps.
//!
//! The conditionally i.i.d. kernels are simulated through their
//! constructions (shared uniform plus local randomness), not through the
//! closed forms, so agreement with [`KernelSpec::value`] is a genuine check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_unit, Error, Result};
use crate::kernels::{a_opt, JointTable, KernelKind, KernelSpec};

/// Draws `n_samples` pairs `(X, Y)` from the protocol at `(s, t)` and
/// returns the empirical joint table.
///
/// The stream is a ChaCha8 generator keyed by `seed` alone, so the result
/// does not depend on thread scheduling.
pub fn simulate_protocol(
    spec: &KernelSpec,
    s: f64,
    t: f64,
    n_samples: u64,
    seed: u64,
) -> Result<JointTable> {
    check_unit("s", s)?;
    check_unit("t", t)?;
    if n_samples == 0 {
        return Err(Error::Domain {
            name: "n_samples",
            value: 0.0,
            domain: ">= 1",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = [[0u64; 2]; 2];
    let exact = spec.joint_table(s, t);
    for _ in 0..n_samples {
        let (x, y) = match spec.kind {
            KernelKind::Iid => (rng.gen::<f64>() < s, rng.gen::<f64>() < t),
            KernelKind::MaxEntropy => sample_table(&exact, rng.gen()),
            KernelKind::CondIidExample1 => {
                let u: f64 = rng.gen();
                (switching_bit(&mut rng, u, s), switching_bit(&mut rng, u, t))
            }
            KernelKind::CondIidExample2 => {
                let u: f64 = rng.gen();
                (
                    flip_bit(&mut rng, spec, u, s),
                    flip_bit(&mut rng, spec, u, t),
                )
            }
        };
        counts[x as usize][y as usize] += 1;
    }
    let n = n_samples as f64;
    Ok(JointTable {
        p: [
            [counts[0][0] as f64 / n, counts[0][1] as f64 / n],
            [counts[1][0] as f64 / n, counts[1][1] as f64 / n],
        ],
    })
}

fn sample_table(table: &JointTable, v: f64) -> (bool, bool) {
    let mut acc = 0.0;
    for (x, row) in table.p.iter().enumerate() {
        for (y, &p) in row.iter().enumerate() {
            acc += p.max(0.0);
            if v < acc {
                return (x == 1, y == 1);
            }
        }
    }
    (true, true)
}

/// With probability `a(s)` the bit follows the shared threshold `u < s`,
/// otherwise it is a fresh `Bern(s)`.
fn switching_bit(rng: &mut ChaCha8Rng, u: f64, s: f64) -> bool {
    if rng.gen::<f64>() < a_opt(s) {
        u < s
    } else {
        rng.gen::<f64>() < s
    }
}

/// `X = 0` with probability `1 - s + f(1 - s) * (+1 if u > 1/2 else -1)`.
fn flip_bit(rng: &mut ChaCha8Rng, spec: &KernelSpec, u: f64, s: f64) -> bool {
    let sign = if u > 0.5 { 1.0 } else { -1.0 };
    let p_zero = (1.0 - s) + spec.f(1.0 - s) * sign;
    rng.gen::<f64>() >= p_zero
}

#[cfg(test)]
mod tests {
    use super::*;

    fn within_sigma(empirical: f64, exact: f64, n: u64, k: f64) -> bool {
        let sigma = (exact * (1.0 - exact) / n as f64).sqrt();
        (empirical - exact).abs() <= k * sigma.max(1e-12)
    }

    #[test]
    fn iid_half() {
        let n = 1_000_000;
        let table = simulate_protocol(&KernelSpec::iid(), 0.5, 0.5, n, 1).unwrap();
        assert!(within_sigma(table.p[0][0], 0.25, n, 3.0), "{table:?}");
    }

    #[test]
    fn example2_xxbar() {
        let n = 1_000_000;
        let exact: f64 = 0.7 * 0.7 + (0.7 * 0.3) * (0.7 * 0.3);
        assert!((exact - 0.5341).abs() < 1e-12);
        let table = simulate_protocol(&KernelSpec::xxbar(), 0.3, 0.3, n, 2).unwrap();
        assert!(within_sigma(table.p[0][0], exact, n, 3.0), "{table:?}");
    }

    #[test]
    fn example1_below_switching_threshold() {
        let n = 1_000_000;
        let table = simulate_protocol(&KernelSpec::example1(), 0.2, 0.2, n, 3).unwrap();
        assert!(within_sigma(table.p[0][0], 0.64, n, 3.0), "{table:?}");
    }

    #[test]
    fn max_entropy_from_table() {
        let n = 200_000;
        let k = KernelSpec::max_entropy();
        let table = simulate_protocol(&k, 0.2, 0.35, n, 4).unwrap();
        assert!(within_sigma(table.p[0][0], k.value(0.2, 0.35), n, 4.0));
        let (ms, mt) = table.marginals();
        assert!((ms - 0.2).abs() < 0.01 && (mt - 0.35).abs() < 0.01);
    }

    #[test]
    fn same_seed_same_table() {
        let k = KernelSpec::example1();
        let a = simulate_protocol(&k, 0.4, 0.45, 10_000, 99).unwrap();
        let b = simulate_protocol(&k, 0.4, 0.45, 10_000, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_empty_runs() {
        assert!(simulate_protocol(&KernelSpec::iid(), 0.5, 0.5, 0, 0).is_err());
        assert!(simulate_protocol(&KernelSpec::iid(), 1.5, 0.5, 10, 0).is_err());
    }
}
