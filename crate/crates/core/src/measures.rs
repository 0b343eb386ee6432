//! Finitely supported probability measures on `[0, 1]` and the entropy
//! functionals evaluated on them.
//!
//! Measures carry no coordinate tag. The quadratic forms below read atoms
//! as x-space points (`x = 1 - s`); use [`DiscreteMeasure::reflect`] to move
//! between conventions. [`DiscreteMeasure::expect_h`] is convention-free
//! because `h` is symmetric.

use serde::{Deserialize, Serialize};

use crate::entropy::h;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// Atoms closer than this are merged at construction.
pub const MERGE_TOL: f64 = 1e-10;
const SUM_TOL: f64 = 1e-12;

/// A probability measure with finitely many atoms, stored with strictly
/// increasing atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct DiscreteMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = Error;

    fn try_from(raw: RawMeasure) -> Result<Self> {
        DiscreteMeasure::new(raw.atoms, raw.weights)
    }
}

impl From<DiscreteMeasure> for RawMeasure {
    fn from(m: DiscreteMeasure) -> Self {
        RawMeasure {
            atoms: m.atoms,
            weights: m.weights,
        }
    }
}

impl DiscreteMeasure {
    /// Sorts the atoms and merges any closer than [`MERGE_TOL`]. A merged
    /// atom sits at the weighted mean of its members.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::with_merge_tol(atoms, weights, MERGE_TOL)
    }

    /// Like [`DiscreteMeasure::new`] with a caller-chosen merge radius.
    pub fn with_merge_tol(atoms: Vec<f64>, weights: Vec<f64>, tol: f64) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        if let Some(a) = atoms.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::InvalidMeasure(format!("atom {a} outside [0, 1]")));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMeasure(format!("weight {w} is negative")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }

        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64, f64)> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            match merged.last_mut() {
                // cluster anchored at its first atom so chains do not drift
                Some((anchor, wsum, moment)) if a - *anchor < tol => {
                    *wsum += w;
                    *moment += w * a;
                }
                _ => merged.push((a, w, w * a)),
            }
        }
        let (atoms, weights) = merged
            .into_iter()
            .map(|(anchor, w, moment)| {
                let pos = if w > 0.0 {
                    (moment / w).clamp(0.0, 1.0)
                } else {
                    anchor
                };
                (pos, w)
            })
            .unzip();
        Ok(DiscreteMeasure { atoms, weights })
    }

    pub fn dirac(x: f64) -> Result<Self> {
        Self::new(vec![x], vec![1.0])
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied().zip(self.weights.iter().copied())
    }

    /// `sum_i w_i x_i`.
    pub fn mean(&self) -> f64 {
        self.iter().map(|(a, w)| a * w).sum()
    }

    /// `E[h(X)]`.
    pub fn expect_h(&self) -> f64 {
        self.iter().map(|(a, w)| w * h(a)).sum()
    }

    /// Image under `x -> 1 - x`.
    pub fn reflect(&self) -> Self {
        let atoms = self.atoms.iter().rev().map(|a| 1.0 - a).collect();
        let weights = self.weights.iter().rev().copied().collect();
        DiscreteMeasure { atoms, weights }
    }

    /// `w * self + (1 - w) * other`.
    pub fn mixture(w: f64, first: &Self, second: &Self) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidMeasure(format!(
                "mixing weight {w} outside [0, 1]"
            )));
        }
        let atoms = first.atoms.iter().chain(&second.atoms).copied().collect();
        let weights = first
            .weights
            .iter()
            .map(|v| w * v)
            .chain(second.weights.iter().map(|v| (1.0 - w) * v))
            .collect();
        Self::new(atoms, weights)
    }

    /// Merges atoms within `tol` and drops atoms lighter than `min_weight`,
    /// renormalising. Used for structural comparisons of optimizer output.
    pub fn clustered(&self, tol: f64, min_weight: f64) -> Result<Self> {
        let kept: Vec<(f64, f64)> = self.iter().filter(|&(_, w)| w > min_weight).collect();
        let total: f64 = kept.iter().map(|p| p.1).sum();
        if total <= 0.0 {
            return Err(Error::InvalidMeasure(
                "all atoms below the weight floor".into(),
            ));
        }
        let (atoms, weights) = kept.into_iter().map(|(a, w)| (a, w / total)).unzip();
        Self::with_merge_tol(atoms, weights, tol)
    }

    /// Same number of atoms, each atom and weight within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.len() == other.len()
            && self
                .iter()
                .zip(other.iter())
                .all(|((a, w), (b, v))| (a - b).abs() <= tol && (w - v).abs() <= tol)
    }
}

/// `q P1 (x) P1 + (1 - q) P0 (x) P0`, a two-component mixture of i.i.d.
/// couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixturePair {
    pub q: f64,
    pub p0: DiscreteMeasure,
    pub p1: DiscreteMeasure,
}

impl MixturePair {
    pub fn new(q: f64, p0: DiscreteMeasure, p1: DiscreteMeasure) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidMeasure(format!("q = {q} outside [0, 1]")));
        }
        Ok(MixturePair { q, p0, p1 })
    }

    /// The common marginal `(1 - q) P0 + q P1`.
    pub fn blend(&self) -> Result<DiscreteMeasure> {
        DiscreteMeasure::mixture(1.0 - self.q, &self.p0, &self.p1)
    }

    /// The same coupling with the components relabelled.
    pub fn swapped(&self) -> Self {
        MixturePair {
            q: 1.0 - self.q,
            p0: self.p1.clone(),
            p1: self.p0.clone(),
        }
    }

    /// `E[h(Pi(0,0))]` under the mixture coupling.
    pub fn coupled_h(&self, spec: &KernelSpec) -> f64 {
        (1.0 - self.q) * quad_form_h(spec, &self.p0, &self.p0)
            + self.q * quad_form_h(spec, &self.p1, &self.p1)
    }
}

/// `sum_ij mu_i nu_j h(K(x_i, y_j))` with the kernel read in x-space.
pub fn quad_form_h(spec: &KernelSpec, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    quad_form_h_weighted(spec, mu.atoms(), mu.weights(), nu.atoms(), nu.weights())
}

/// Slice form of [`quad_form_h`]; accepts signed weights, which extends the
/// form bilinearly to signed measures.
pub fn quad_form_h_weighted(
    spec: &KernelSpec,
    xs: &[f64],
    wx: &[f64],
    ys: &[f64],
    wy: &[f64],
) -> f64 {
    xs.iter()
        .zip(wx)
        .map(|(&x, &u)| {
            u * ys
                .iter()
                .zip(wy)
                .map(|(&y, &v)| v * h(spec.value_x(x, y)))
                .sum::<f64>()
        })
        .sum()
}
