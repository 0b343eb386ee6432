//! Coupling-protocol kernels `(s, t) -> Pi_{s,t}(0, 0)`.
//!
//! A protocol couples `X ~ Bern(s)` with `Y ~ Bern(t)`; the kernel is the
//! probability that both bits are zero. Everything else about the 2x2 joint
//! table follows from the marginals, see [`JointTable::from_kernel`].
//!
//! Kernels are evaluated either in the original coordinates `(s, t)` or in
//! x-space, `x = 1 - s`, where the conditionally i.i.d. kernels become
//! polynomials: the i.i.d. kernel is `xy` and the second conditionally
//! i.i.d. construction with `f(x) = x(1 - x)` is `xy(1 + (1-x)(1-y))`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};

/// Which coupling a [`KernelSpec`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    /// Independent bits: `Pi(0,0) = (1-s)(1-t)`.
    Iid,
    /// The coupling maximizing the entropy of `X or Y`.
    MaxEntropy,
    /// Shared-threshold switching with the weight function [`a_opt`].
    CondIidExample1,
    /// Shared sign flip of size `f(1-s)`.
    CondIidExample2,
}

/// A coupling-protocol kernel.
///
/// For [`KernelKind::CondIidExample2`], `f_poly` holds the coefficients
/// (lowest degree first) of the polynomial `x p(x)` and `l` scales it, so
/// `f(x) = l * sum_k f_poly[k] x^k`. The other kinds ignore both fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub f_poly: Vec<f64>,
    #[serde(default = "unit_scale")]
    pub l: f64,
}

fn unit_scale() -> f64 {
    1.0
}

/// Grid size for validating `0 <= f(1-s) <= min(s, 1-s)`.
const VALIDATION_POINTS: usize = 10_000;
const VALIDATION_SLACK: f64 = 1e-12;

impl KernelSpec {
    pub fn iid() -> Self {
        Self::plain(KernelKind::Iid)
    }

    pub fn max_entropy() -> Self {
        Self::plain(KernelKind::MaxEntropy)
    }

    pub fn example1() -> Self {
        Self::plain(KernelKind::CondIidExample1)
    }

    /// Second conditionally i.i.d. construction with `f(x) = l * poly(x)`.
    ///
    /// Fails unless `0 <= f(y) <= min(y, 1-y)` holds on a grid of 10^4
    /// points of `[0, 1]`.
    pub fn example2(f_poly: Vec<f64>, l: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::InvalidKernel(format!(
                "scale l = {l} outside [0, 1]"
            )));
        }
        let spec = KernelSpec {
            kind: KernelKind::CondIidExample2,
            f_poly,
            l,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The instance `f(x) = x(1 - x)`, `l = 1`.
    pub fn xxbar() -> Self {
        Self::example2(vec![0.0, 1.0, -1.0], 1.0).expect("x(1-x) is a valid flip size")
    }

    fn plain(kind: KernelKind) -> Self {
        KernelSpec {
            kind,
            f_poly: Vec::new(),
            l: 1.0,
        }
    }

    /// Checks the construction invariants; deserialized specs should be
    /// passed through this before use.
    pub fn validate(&self) -> Result<()> {
        if self.kind != KernelKind::CondIidExample2 {
            return Ok(());
        }
        if self.f_poly.is_empty() {
            return Err(Error::InvalidKernel("empty flip polynomial".into()));
        }
        for i in 0..VALIDATION_POINTS {
            let y = i as f64 / (VALIDATION_POINTS - 1) as f64;
            let fy = self.f(y);
            let cap = y.min(1.0 - y);
            if !(fy >= -VALIDATION_SLACK && fy <= cap + VALIDATION_SLACK) {
                return Err(Error::InvalidKernel(format!(
                    "f({y}) = {fy} violates 0 <= f <= {cap}"
                )));
            }
        }
        Ok(())
    }

    /// The flip size `f(x)`; zero for kinds without one.
    pub fn f(&self, x: f64) -> f64 {
        self.l * self.f_poly.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// `Pi_{s,t}(0, 0)` in the original coordinates.
    #[inline]
    pub fn value(&self, s: f64, t: f64) -> f64 {
        self.eval(s, t, 1.0 - s, 1.0 - t)
    }

    /// `Pi_{1-x,1-y}(0, 0)`, the kernel in x-space.
    #[inline]
    pub fn value_x(&self, x: f64, y: f64) -> f64 {
        self.eval(1.0 - x, 1.0 - y, x, y)
    }

    /// Shared evaluation; callers pass both `s` and `x = 1 - s` so that
    /// each coordinate system avoids a round trip through `1 - (1 - x)`.
    #[inline]
    fn eval(&self, s: f64, t: f64, x: f64, y: f64) -> f64 {
        match self.kind {
            KernelKind::Iid => x * y,
            KernelKind::MaxEntropy => 1.0 - s.max(t).max((s + t).min(0.5)),
            KernelKind::CondIidExample1 => x * y + a_opt(s) * a_opt(t) * (x.min(y) - x * y),
            KernelKind::CondIidExample2 => {
                if self.is_xxbar() {
                    x * y * (1.0 + s * t)
                } else {
                    x * y + self.f(x) * self.f(y)
                }
            }
        }
    }

    fn is_xxbar(&self) -> bool {
        self.l == 1.0 && self.f_poly == [0.0, 1.0, -1.0]
    }

    /// Joint table implied by the kernel and the marginals.
    pub fn joint_table(&self, s: f64, t: f64) -> JointTable {
        JointTable::from_kernel(self.value(s, t), s, t)
    }

    /// Short CLI name.
    pub fn name(&self) -> String {
        match self.kind {
            KernelKind::Iid => "iid".into(),
            KernelKind::MaxEntropy => "maxent".into(),
            KernelKind::CondIidExample1 => "ciid-ex1".into(),
            KernelKind::CondIidExample2 if self.is_xxbar() => "ciid-xxbar".into(),
            KernelKind::CondIidExample2 => format!("ciid-ex2(l={}, f={:?})", self.l, self.f_poly),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid" => Ok(Self::iid()),
            "maxent" | "max-entropy" => Ok(Self::max_entropy()),
            "ciid-ex1" => Ok(Self::example1()),
            "ciid-xxbar" => Ok(Self::xxbar()),
            other => Err(Error::InvalidKernel(format!(
                "unknown kernel {other:?} (expected iid, maxent, ciid-ex1 or ciid-xxbar)"
            ))),
        }
    }
}

/// Domain-checked kernel evaluation.
pub fn kernel_value(spec: &KernelSpec, s: f64, t: f64) -> Result<f64> {
    check_unit("s", s)?;
    check_unit("t", t)?;
    Ok(spec.value(s, t))
}

/// Switching weight maximizing `h((1-t)^2 + a^2 t(1-t))` for each `t`.
///
/// Zero up to `1 - 1/sqrt 2`, then `sqrt((1 - 2(1-t)^2) / (2t(1-t)))`
/// rising continuously to one at `t = 1/2`, and one beyond.
pub fn a_opt(t: f64) -> f64 {
    let lower = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
    if t <= lower {
        0.0
    } else if t <= 0.5 {
        let tb = 1.0 - t;
        ((1.0 - 2.0 * tb * tb) / (2.0 * t * tb))
            .max(0.0)
            .sqrt()
            .min(1.0)
    } else {
        1.0
    }
}

/// A 2x2 distribution on `{0,1}^2`, indexed `p[x][y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointTable {
    pub p: [[f64; 2]; 2],
}

/// Entries below this are treated as a broken kernel.
pub const TABLE_SLACK: f64 = 1e-12;

impl JointTable {
    /// Completes `Pi(0,0)` to the table with marginals `Bern(s)`, `Bern(t)`.
    pub fn from_kernel(pi00: f64, s: f64, t: f64) -> Self {
        let (sb, tb) = (1.0 - s, 1.0 - t);
        JointTable {
            p: [[pi00, sb - pi00], [tb - pi00, 1.0 - sb - tb + pi00]],
        }
    }

    /// Product table `Bern(s) x Bern(t)`.
    pub fn product(s: f64, t: f64) -> Self {
        JointTable {
            p: [
                [(1.0 - s) * (1.0 - t), (1.0 - s) * t],
                [s * (1.0 - t), s * t],
            ],
        }
    }

    pub fn min_entry(&self) -> f64 {
        self.p
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_valid(&self) -> bool {
        self.min_entry() >= -TABLE_SLACK
    }

    /// `(P(X = 1), P(Y = 1))`.
    pub fn marginals(&self) -> (f64, f64) {
        (self.p[1][0] + self.p[1][1], self.p[0][1] + self.p[1][1])
    }

    /// Smallest eigenvalue of the symmetric part of the table viewed as a
    /// matrix. Mixtures of product tables with equal marginals are PSD.
    pub fn min_eigenvalue(&self) -> f64 {
        let a = self.p[0][0];
        let d = self.p[1][1];
        let b = 0.5 * (self.p[0][1] + self.p[1][0]);
        let mid = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        mid - rad
    }

    /// Convex combination `w * self + (1 - w) * other`.
    pub fn mix(&self, w: f64, other: &JointTable) -> JointTable {
        let mut p = [[0.0; 2]; 2];
        for (i, row) in p.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = w * self.p[i][j] + (1.0 - w) * other.p[i][j];
            }
        }
        JointTable { p }
    }
}

/// The two product tables (shared randomness `u <= 1/2` and `u > 1/2`)
/// whose equal-weight mixture is the second conditionally i.i.d. kernel.
pub fn example2_components(spec: &KernelSpec, s: f64, t: f64) -> [JointTable; 2] {
    let (fs, ft) = (spec.f(1.0 - s), spec.f(1.0 - t));
    // P(X = 1) is s + f on the lower half and s - f on the upper half.
    [
        JointTable::product(s + fs, t + ft),
        JointTable::product(s - fs, t - ft),
    ]
}
