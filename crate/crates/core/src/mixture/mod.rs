//! The nine-parameter mixture problem: two components `P0`, `P1`, each on
//! three atoms with shared weights `(a1, a2, a3)`, blended with weight `q`.
//!
//! The ratio minimised is
//! `[(1-beta) E_{mu x mu} h(XY) + beta E_mix h(K(X,Y))] / E_mu h(X)` with
//! `mu = (1-q) P0 + q P1`, `K(x,y) = xy(1 + (1-x)(1-y))` and the mixture
//! coupling `(1-q) P0 x P0 + q P1 x P1`, subject to `E_mu[X] >= 1 - c`.

mod certify;
mod solver;

pub use certify::{
    certify, start_seed, start_theta, CertificationConfig, CertificationReport, StartRecord,
    StructureMatch, STRUCTURE_TOL,
};
pub use solver::{local_solve, repair, LocalSolution, SolverKind, STATIONARITY_TOL, VIOLATION_TOL};

use serde::{Deserialize, Serialize};

use crate::constants::ConstantsTable;
use crate::entropy::{h, h_prime};
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, MixturePair};
use crate::roots::golden_min;

/// Value returned by the solvers in place of an undefined ratio.
pub const DEGENERATE_PENALTY: f64 = 1e6;

/// Parameters `(a1, a2, q, b0..b5)`. Even-indexed atoms belong to `P0`,
/// odd-indexed atoms to `P1`; `b[2k]` and `b[2k+1]` share weight `a_{k+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaVector {
    pub a1: f64,
    pub a2: f64,
    pub q: f64,
    pub b: [f64; 6],
}

/// Tolerance on the weight simplex and box membership.
const THETA_SLACK: f64 = 1e-12;

impl ThetaVector {
    pub fn new(a1: f64, a2: f64, q: f64, b: [f64; 6]) -> Result<Self> {
        let t = ThetaVector { a1, a2, q, b };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (-THETA_SLACK..=1.0 + THETA_SLACK).contains(&v);
        if !(unit(self.a1) && unit(self.a2) && self.a1 + self.a2 <= 1.0 + THETA_SLACK) {
            return Err(Error::InvalidMeasure(format!(
                "weights a1 = {}, a2 = {} leave the simplex",
                self.a1, self.a2
            )));
        }
        if !unit(self.q) {
            return Err(Error::InvalidMeasure(format!(
                "q = {} outside [0, 1]",
                self.q
            )));
        }
        if let Some(b) = self.b.iter().find(|&&b| !unit(b)) {
            return Err(Error::InvalidMeasure(format!("atom {b} outside [0, 1]")));
        }
        Ok(())
    }

    pub fn a3(&self) -> f64 {
        1.0 - self.a1 - self.a2
    }

    pub fn pair_weights(&self) -> [f64; 3] {
        [self.a1, self.a2, self.a3()]
    }

    /// Flat coordinates in the order `(a1, a2, q, b0, ..., b5)`.
    pub fn to_array(&self) -> [f64; 9] {
        let b = self.b;
        [self.a1, self.a2, self.q, b[0], b[1], b[2], b[3], b[4], b[5]]
    }

    pub fn from_array(z: &[f64; 9]) -> Self {
        ThetaVector {
            a1: z[0],
            a2: z[1],
            q: z[2],
            b: [z[3], z[4], z[5], z[6], z[7], z[8]],
        }
    }

    /// Weight of `b[i]` under the blended marginal.
    fn marginal_weights(&self) -> [f64; 6] {
        let a = self.pair_weights();
        let (qb, q) = (1.0 - self.q, self.q);
        [
            a[0] * qb,
            a[0] * q,
            a[1] * qb,
            a[1] * q,
            a[2] * qb,
            a[2] * q,
        ]
    }

    pub fn component(&self, which: usize) -> [f64; 3] {
        [self.b[which], self.b[2 + which], self.b[4 + which]]
    }

    /// `q <-> 1 - q` with the components exchanged.
    pub fn swapped(&self) -> Self {
        let b = self.b;
        ThetaVector {
            a1: self.a1,
            a2: self.a2,
            q: 1.0 - self.q,
            b: [b[1], b[0], b[3], b[2], b[5], b[4]],
        }
    }

    /// Exchanges atom pairs 1 and 2.
    pub fn relabeled(&self) -> Self {
        let b = self.b;
        ThetaVector {
            a1: self.a2,
            a2: self.a1,
            q: self.q,
            b: [b[2], b[3], b[0], b[1], b[4], b[5]],
        }
    }

    pub fn to_pair(&self) -> Result<MixturePair> {
        let a = self.pair_weights().map(|w| w.max(0.0));
        let p0 = DiscreteMeasure::new(self.component(0).to_vec(), a.to_vec())?;
        let p1 = DiscreteMeasure::new(self.component(1).to_vec(), a.to_vec())?;
        MixturePair::new(self.q, p0, p1)
    }
}

/// `xy(1 + (1-x)(1-y))`.
#[inline]
pub fn k_xxbar(x: f64, y: f64) -> f64 {
    x * y * (1.0 + (1.0 - x) * (1.0 - y))
}

/// `dK/dx`.
#[inline]
fn k_xxbar_dx(x: f64, y: f64) -> f64 {
    y * (1.0 + (1.0 - y) * (1.0 - 2.0 * x))
}

/// `E_mu[X]`; feasible iff at least `1 - c`.
pub fn mean_constraint(theta: &ThetaVector) -> f64 {
    let w = theta.marginal_weights();
    w.iter().zip(&theta.b).map(|(w, b)| w * b).sum()
}

/// Numerator and denominator of the ratio.
fn parts(theta: &ThetaVector, beta: f64) -> (f64, f64) {
    let w = theta.marginal_weights();
    let a = theta.pair_weights();
    let b = &theta.b;
    let mut iid = 0.0;
    for i in 0..6 {
        let mut row = 0.0;
        for j in 0..6 {
            row += w[j] * h(b[i] * b[j]);
        }
        iid += w[i] * row;
    }
    let mut mix = [0.0; 2];
    for (c, m) in mix.iter_mut().enumerate() {
        for k in 0..3 {
            for l in 0..3 {
                *m += a[k] * a[l] * h(k_xxbar(b[2 * k + c], b[2 * l + c]));
            }
        }
    }
    let coupled = (1.0 - theta.q) * mix[0] + theta.q * mix[1];
    let den: f64 = w.iter().zip(b).map(|(w, b)| w * h(*b)).sum();
    ((1.0 - beta) * iid + beta * coupled, den)
}

/// The ratio, or an error when `E_mu h(X) = 0`.
pub fn objective(theta: &ThetaVector, beta: f64) -> Result<f64> {
    let (num, den) = parts(theta, beta);
    if !(den > 0.0) {
        return Err(Error::Degenerate(
            "E_mu h(X) = 0: every atom carrying weight sits at 0 or 1".into(),
        ));
    }
    Ok(num / den)
}

/// Objective for solvers: degenerate points get [`DEGENERATE_PENALTY`].
#[inline]
pub fn penalized_objective(theta: &ThetaVector, beta: f64) -> f64 {
    let (num, den) = parts(theta, beta);
    if den > 1e-300 {
        num / den
    } else {
        DEGENERATE_PENALTY
    }
}

/// Analytic gradient in the coordinates of [`ThetaVector::to_array`]
/// (with `a3 = 1 - a1 - a2` eliminated).
pub fn gradient(theta: &ThetaVector, beta: f64) -> Option<[f64; 9]> {
    let w = theta.marginal_weights();
    let a = theta.pair_weights();
    let b = &theta.b;
    let q = theta.q;
    let cw = |i: usize| if i.is_multiple_of(2) { 1.0 - q } else { q };

    // d/dw_i and d/db_i of each piece.
    let mut iid = 0.0;
    let mut iid_w = [0.0; 6];
    let mut iid_b = [0.0; 6];
    for i in 0..6 {
        for j in 0..6 {
            let s = b[i] * b[j];
            let hv = h(s);
            iid += w[i] * w[j] * hv;
            iid_w[i] += 2.0 * w[j] * hv;
            iid_b[i] += 2.0 * w[i] * w[j] * h_prime(s) * b[j];
        }
    }
    let mut mix = [0.0; 2];
    let mut mix_a = [[0.0; 3]; 2];
    let mut mix_b = [0.0; 6];
    for c in 0..2 {
        for k in 0..3 {
            let x = b[2 * k + c];
            for l in 0..3 {
                let y = b[2 * l + c];
                let kv = k_xxbar(x, y);
                let hv = h(kv);
                mix[c] += a[k] * a[l] * hv;
                mix_a[c][k] += 2.0 * a[l] * hv;
                mix_b[2 * k + c] += 2.0 * a[k] * a[l] * h_prime(kv) * k_xxbar_dx(x, y);
            }
        }
    }
    let den: f64 = w.iter().zip(b).map(|(w, b)| w * h(*b)).sum();
    if !(den > 1e-300) {
        return None;
    }
    let coupled = (1.0 - q) * mix[0] + q * mix[1];
    let num = (1.0 - beta) * iid + beta * coupled;
    let ratio = num / den;

    // Chain rule through w_i = a_{i/2} * (1-q or q).
    let mut g = [0.0; 9];
    for i in 0..6 {
        let dn_dw = (1.0 - beta) * iid_w[i];
        let dd_dw = h(b[i]);
        let dr_dw = (dn_dw - ratio * dd_dw) / den;
        let k = i / 2;
        let c = cw(i);
        match k {
            0 => g[0] += dr_dw * c,
            1 => g[1] += dr_dw * c,
            _ => {
                g[0] -= dr_dw * c;
                g[1] -= dr_dw * c;
            }
        }
        g[2] += dr_dw * if i % 2 == 0 { -a[k] } else { a[k] };
        let dn_db = (1.0 - beta) * iid_b[i] + beta * cw(i) * mix_b[i];
        let dd_db = w[i] * h_prime(b[i]);
        g[3 + i] = (dn_db - ratio * dd_db) / den;
    }
    for c in 0..2 {
        let scale = beta * if c == 0 { 1.0 - q } else { q } / den;
        g[0] += scale * (mix_a[c][0] - mix_a[c][2]);
        g[1] += scale * (mix_a[c][1] - mix_a[c][2]);
    }
    g[2] += beta * (mix[1] - mix[0]) / den;
    Some(g)
}

/// `q = 0`, `P0 = (1-p) delta_0 + p delta_x`, `P1 = P0`, with `p x = 1 - c`.
///
/// At `c = c'` this is `(p*, x*)`. Otherwise `x` minimises the ratio along
/// the family, which reduces to `(1 - c) G(x) / (x h(x))` with
/// `G(x) = (1-beta) h(x^2) + beta h(K(x, x))`.
pub fn conjectured_theta(c: f64, beta: f64, constants: &ConstantsTable) -> Result<ThetaVector> {
    if !(c > 0.0 && c < 0.5) {
        return Err(Error::Domain {
            name: "c",
            value: c,
            domain: "(0, 1/2)",
        });
    }
    let (p, x) = if (c - constants.c_prime).abs() <= 1e-15 {
        (constants.p_star, constants.x_star)
    } else {
        let target = 1.0 - c;
        let family = |x: f64| {
            let g = (1.0 - beta) * h(x * x) + beta * h(k_xxbar(x, x));
            g / (x * h(x))
        };
        let x = golden_min(family, target, 1.0 - 1e-9, 1e-12);
        (target / x, x)
    };
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Infeasible(format!("weight p = {p} for c = {c}")));
    }
    Ok(ThetaVector {
        a1: 1.0 - p,
        a2: p,
        q: 0.0,
        b: [0.0, 0.0, x, x, x, x],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::measures::quad_form_h;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_theta(rng: &mut ChaCha8Rng) -> ThetaVector {
        let mut u = [rng.gen::<f64>(), rng.gen::<f64>()];
        u.sort_by(f64::total_cmp);
        let mut b = [0.0; 6];
        b.iter_mut().for_each(|v| *v = rng.gen_range(0.02..0.98));
        ThetaVector::new(u[0], u[1] - u[0], rng.gen(), b).unwrap()
    }

    fn slow_objective(theta: &ThetaVector, beta: f64) -> f64 {
        let pair = theta.to_pair().unwrap();
        let mu = pair.blend().unwrap();
        let num = (1.0 - beta) * quad_form_h(&KernelSpec::iid(), &mu, &mu)
            + beta * pair.coupled_h(&KernelSpec::xxbar());
        num / mu.expect_h()
    }

    #[test]
    fn matches_measure_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let t = random_theta(&mut rng);
            let beta = rng.gen();
            let fast = objective(&t, beta).unwrap();
            assert!((fast - slow_objective(&t, beta)).abs() < 1e-12 * fast.abs().max(1.0));
        }
    }

    #[test]
    fn point_masses() {
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        let t = ThetaVector::new(1.0, 0.0, 0.0, [golden; 6]).unwrap();
        assert!((objective(&t, 0.0).unwrap() - 1.0).abs() < 1e-12);
        let t = ThetaVector::new(1.0, 0.0, 0.3, [0.9; 6]).unwrap();
        let hb = |s: f64| -s * s.log2() - (1.0 - s) * (1.0 - s).log2();
        let expected = hb(0.81) / hb(0.9);
        assert!((objective(&t, 0.0).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 1.495_688_807_042_833).abs() < 1e-12);
    }

    #[test]
    fn degenerate_denominator() {
        let t = ThetaVector::new(0.5, 0.5, 0.5, [0.0, 1.0, 1.0, 0.0, 0.3, 0.3]).unwrap();
        assert!(matches!(objective(&t, 0.1), Err(Error::Degenerate(_))));
        assert_eq!(penalized_objective(&t, 0.1), DEGENERATE_PENALTY);
        assert!(gradient(&t, 0.1).is_none());
    }

    #[test]
    fn mean_constraint_extremes() {
        let one = ThetaVector::new(0.2, 0.3, 0.4, [1.0; 6]).unwrap();
        assert!((mean_constraint(&one) - 1.0).abs() < 1e-15);
        let zero = ThetaVector::new(0.2, 0.3, 0.4, [0.0; 6]).unwrap();
        assert_eq!(mean_constraint(&zero), 0.0);
    }

    #[test]
    fn symmetries() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let t = random_theta(&mut rng);
            let beta = rng.gen();
            let f = objective(&t, beta).unwrap();
            for u in [t.swapped(), t.relabeled()] {
                assert!((objective(&u, beta).unwrap() - f).abs() < 1e-12);
                assert!((mean_constraint(&u) - mean_constraint(&t)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_weight_atom_is_inert() {
        let t = ThetaVector::new(0.4, 0.6, 0.2, [0.3, 0.5, 0.7, 0.8, 0.1, 0.95]).unwrap();
        let mut moved = t;
        moved.b[4] = 0.55;
        moved.b[5] = 0.05;
        assert!((objective(&t, 0.3).unwrap() - objective(&moved, 0.3).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let t = random_theta(&mut rng);
            let mut t = t;
            // keep the simplex interior so central differences stay feasible
            t.a1 = 0.05 + 0.9 * t.a1 / 1.2;
            t.a2 = 0.05 + 0.9 * t.a2 / 1.2;
            t.q = 0.05 + 0.9 * t.q;
            let beta = rng.gen();
            let g = gradient(&t, beta).unwrap();
            let z = t.to_array();
            for k in 0..9 {
                let step = 1e-6;
                let (mut zp, mut zm) = (z, z);
                zp[k] += step;
                zm[k] -= step;
                let fp = objective(&ThetaVector::from_array(&zp), beta).unwrap();
                let fm = objective(&ThetaVector::from_array(&zm), beta).unwrap();
                let fd = (fp - fm) / (2.0 * step);
                let scale = g[k].abs().max(fd.abs()).max(1e-3);
                assert!(
                    (fd - g[k]).abs() <= 1e-5 * scale,
                    "coord {k}: {fd} vs {}",
                    g[k]
                );
            }
        }
    }

    #[test]
    fn conjectured_optimizer_has_unit_ratio() {
        let k = ConstantsTable::solve().unwrap();
        for beta in [0.0, k.beta_star, 1.0] {
            let t = conjectured_theta(k.c_prime, beta, &k).unwrap();
            assert!((objective(&t, beta).unwrap() - 1.0).abs() < 1e-10);
            assert!((mean_constraint(&t) - (1.0 - k.c_prime)).abs() < 1e-15);
            assert!(
                (objective(&t.swapped(), beta).unwrap() - objective(&t, beta).unwrap()).abs()
                    < 1e-15
            );
        }
    }

    #[test]
    fn conjectured_family() {
        let k = ConstantsTable::solve().unwrap();
        for c in [0.38, 0.3815, 0.3827, 0.383, 0.4] {
            let t = conjectured_theta(c, k.beta_star, &k).unwrap();
            assert!((mean_constraint(&t) - (1.0 - c)).abs() < 1e-14);
            assert!((t.b[2] - k.x_star).abs() < 1e-5, "c {c}: x {}", t.b[2]);
        }
        let below = conjectured_theta(0.3827, k.beta_star, &k).unwrap();
        let above = conjectured_theta(0.3830, k.beta_star, &k).unwrap();
        assert!(objective(&below, k.beta_star).unwrap() > 1.0);
        assert!(objective(&above, k.beta_star).unwrap() < 1.0);
        assert!(conjectured_theta(0.6, k.beta_star, &k).is_err());
    }
}
