//! The coefficient matrix `O` of
//! `I log(1 - (x+y-xy)/2) + (1 - I) log(1 - I)`, `I = xy(1 + (1-x)(1-y))`,
//! as a bivariate power series truncated at degree `L` in each variable.
//! Natural logarithms throughout; PSD is invariant under the positive
//! rescaling a change of base would introduce.

use std::time::Instant;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::ldl::{ldl_certify, LdlSummary};
use super::PSD_TOL;
use crate::error::{Error, Result};

/// Dense `(L+1) x (L+1)` integer polynomial in `x, y`; index `[a][b]` is the
/// coefficient of `x^a y^b`.
#[derive(Debug, Clone, PartialEq)]
struct IntPoly {
    l: usize,
    c: Vec<BigInt>,
}

impl IntPoly {
    fn zero(l: usize) -> Self {
        IntPoly {
            l,
            c: vec![BigInt::zero(); (l + 1) * (l + 1)],
        }
    }

    fn from_terms(l: usize, terms: &[(usize, usize, i64)]) -> Self {
        let mut p = Self::zero(l);
        for &(a, b, v) in terms {
            if a <= l && b <= l {
                p.c[a * (l + 1) + b] += v;
            }
        }
        p
    }

    fn get(&self, a: usize, b: usize) -> &BigInt {
        &self.c[a * (self.l + 1) + b]
    }

    /// Product with a sparse polynomial, truncated.
    fn mul_sparse(&self, terms: &[(usize, usize, i64)]) -> Self {
        let w = self.l + 1;
        let mut out = Self::zero(self.l);
        for a in 0..w {
            for b in 0..w {
                let v = &self.c[a * w + b];
                if v.is_zero() {
                    continue;
                }
                for &(da, db, k) in terms {
                    let (na, nb) = (a + da, b + db);
                    if na < w && nb < w {
                        out.c[na * w + nb] += v * k;
                    }
                }
            }
        }
        out
    }

    fn add_scaled(&mut self, other: &Self, k: &BigInt) {
        for (d, s) in self.c.iter_mut().zip(&other.c) {
            if !s.is_zero() {
                *d += s * k;
            }
        }
    }
}

/// `x + y - xy`.
const HALF_NUM: &[(usize, usize, i64)] = &[(1, 0, 1), (0, 1, 1), (1, 1, -1)];
/// `I = 2xy - x^2 y - x y^2 + x^2 y^2`.
const I_TERMS: &[(usize, usize, i64)] = &[(1, 1, 2), (2, 1, -1), (1, 2, -1), (2, 2, 1)];
/// `1 - I`.
const ONE_MINUS_I: &[(usize, usize, i64)] =
    &[(0, 0, 1), (1, 1, -2), (2, 1, 1), (1, 2, 1), (2, 2, -1)];

fn lcm_upto(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc.lcm(&BigInt::from(k)))
}

/// `-sum_k base^k / (k * scale^k)` over `k = 1..=kmax`, returned as an
/// integer polynomial together with its common denominator.
fn neg_log_series(
    l: usize,
    base: &[(usize, usize, i64)],
    scale: u32,
    kmax: usize,
) -> (IntPoly, BigInt) {
    let scale_big = BigInt::from(scale);
    let den = lcm_upto(kmax) * num_traits::pow(scale_big.clone(), kmax);
    let mut acc = IntPoly::zero(l);
    let mut power = IntPoly::from_terms(l, &[(0, 0, 1)]);
    let mut scale_pow = BigInt::one();
    for k in 1..=kmax {
        power = power.mul_sparse(base);
        scale_pow *= &scale_big;
        let factor = -(&den / (BigInt::from(k) * &scale_pow));
        acc.add_scaled(&power, &factor);
    }
    (acc, den)
}

fn to_rational_matrix(p: &IntPoly, den: &BigInt) -> Vec<Vec<BigRational>> {
    let w = p.l + 1;
    (0..w)
        .map(|a| {
            (0..w)
                .map(|b| BigRational::new(p.get(a, b).clone(), den.clone()))
                .collect()
        })
        .collect()
}

/// Coefficients of `log(1 - (x+y-xy)/2)` through degree `l` in each variable.
pub fn log_half_coefficients(l: usize) -> Vec<Vec<BigRational>> {
    let (p, d) = neg_log_series(l, HALF_NUM, 2, 2 * l);
    to_rational_matrix(&p, &d)
}

/// Coefficients of `log(1 - I)`; every `I^k` carries `x^k y^k`, so `k <= l`
/// suffices.
pub fn log_one_minus_i_coefficients(l: usize) -> Vec<Vec<BigRational>> {
    let (p, d) = neg_log_series(l, I_TERMS, 1, l);
    to_rational_matrix(&p, &d)
}

/// Coefficient matrix `O` with exact and rounded entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMatrix {
    pub order: usize,
    pub entries_exact: Vec<Vec<BigRational>>,
    pub entries_float: Vec<Vec<f64>>,
    pub submatrix_start: usize,
}

/// Expands `O` exactly through order `l >= 2`.
pub fn series_oracle(l: usize) -> Result<SeriesMatrix> {
    if l < 2 {
        return Err(Error::Domain {
            name: "L",
            value: l as f64,
            domain: "L >= 2",
        });
    }
    let (half, d_half) = neg_log_series(l, HALF_NUM, 2, 2 * l);
    let (omi, d_omi) = neg_log_series(l, I_TERMS, 1, l);
    let first = half.mul_sparse(I_TERMS);
    let second = omi.mul_sparse(ONE_MINUS_I);
    let w = l + 1;
    let exact: Vec<Vec<BigRational>> = (0..w)
        .map(|a| {
            (0..w)
                .map(|b| {
                    BigRational::new(first.get(a, b).clone(), d_half.clone())
                        + BigRational::new(second.get(a, b).clone(), d_omi.clone())
                })
                .collect()
        })
        .collect();
    let float = exact
        .iter()
        .map(|row| row.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect())
        .collect();
    Ok(SeriesMatrix {
        order: l,
        entries_exact: exact,
        entries_float: float,
        submatrix_start: 2,
    })
}

impl SeriesMatrix {
    pub fn with_start(mut self, start: usize) -> Self {
        self.submatrix_start = start;
        self
    }

    pub fn exact_block(&self) -> Vec<Vec<BigRational>> {
        let s = self.submatrix_start;
        self.entries_exact[s..]
            .iter()
            .map(|r| r[s..].to_vec())
            .collect()
    }

    pub fn float_block(&self) -> DMatrix<f64> {
        let s = self.submatrix_start;
        let n = self.order + 1 - s;
        DMatrix::from_fn(n, n, |i, j| self.entries_float[s + i][s + j])
    }

    pub fn is_symmetric(&self) -> bool {
        let w = self.order + 1;
        (0..w).all(|a| (0..a).all(|b| self.entries_exact[a][b] == self.entries_exact[b][a]))
    }

    /// Evaluates the truncated series at a point.
    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        let mut total = 0.0;
        for row in self.entries_float.iter().rev() {
            let inner = row.iter().rev().fold(0.0, |acc, v| acc * y + v);
            total = total * x + inner;
        }
        total
    }
}

/// Which of the two displayed combinatorial sums to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedForm {
    LogHalf,
    LogOneMinusI,
}

/// Binomial coefficient that vanishes outside `0 <= k <= n`.
fn binom(n: i64, k: i64) -> BigInt {
    if n < 0 || k < 0 || k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

/// The two combinatorial sums, transcribed term for term. The `k = 0`
/// summand (a `1/k` pole) is omitted.
pub fn coeff_closed_form(which: ClosedForm, m: usize, n: usize) -> BigRational {
    let (m, n) = (m as i64, n as i64);
    let mut total = BigRational::zero();
    match which {
        ClosedForm::LogHalf => {
            for k in m.max(n).max(1)..=m + n {
                let sign = if (m + n - k) % 2 == 0 { 1 } else { -1 };
                let num = binom(k, k - n) * binom(n, k - m) * sign;
                let den = BigInt::from(k) << (k as usize);
                total += BigRational::new(num, den);
            }
            -total
        }
        ClosedForm::LogOneMinusI => {
            let lo = (m.max(n) + 1) / 2;
            for k in lo.max(1)..=m.min(n) {
                let mut inner = BigInt::zero();
                for d in (m + n - 3 * k).max(0)..=m.min(n) - k {
                    inner += binom(k, d + 3 * k - m - n)
                        * binom(m + n - d - 2 * k, m - k - d)
                        * binom(n - k, d);
                }
                total += BigRational::new(inner, BigInt::from(k));
            }
            if (m + n + 1) % 2 == 0 {
                total
            } else {
                -total
            }
        }
    }
}

/// One comparison between a closed-form sum and the series expansion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormMismatch {
    pub which: ClosedForm,
    pub m: usize,
    pub n: usize,
    pub closed_form: String,
    pub oracle: String,
}

/// Closed-form entries on `0 <= m, n <= max_index` that differ from the
/// expansion.
pub fn closed_form_mismatches(which: ClosedForm, max_index: usize) -> Vec<ClosedFormMismatch> {
    let oracle = match which {
        ClosedForm::LogHalf => log_half_coefficients(max_index),
        ClosedForm::LogOneMinusI => log_one_minus_i_coefficients(max_index),
    };
    let mut out = Vec::new();
    for m in 0..=max_index {
        for n in 0..=max_index {
            let cf = coeff_closed_form(which, m, n);
            if cf != oracle[m][n] {
                out.push(ClosedFormMismatch {
                    which,
                    m,
                    n,
                    closed_form: cf.to_string(),
                    oracle: oracle[m][n].to_string(),
                });
            }
        }
    }
    out
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Symmetric diagonal scaling to unit diagonal. Nonpositive diagonal entries
/// are left unscaled so their sign survives.
pub fn jacobi_scaled(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d: Vec<f64> = (0..m.nrows())
        .map(|i| {
            if m[(i, i)] > 0.0 {
                m[(i, i)].sqrt()
            } else {
                1.0
            }
        })
        .collect();
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] / (d[i] * d[j]))
}

/// JSON report of one series verification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesReport {
    pub order: usize,
    pub start: usize,
    pub exact: bool,
    pub log_base: &'static str,
    /// Minimum eigenvalue of the block as stored. Entries span many orders
    /// of magnitude, so at large `L` this is dominated by rounding.
    pub min_eig: f64,
    /// Minimum eigenvalue of `D^-1/2 O D^-1/2`, `D = diag(O)`. Congruent to
    /// the block, hence PSD exactly when it is; the float gate applies here.
    pub scaled_min_eig: f64,
    pub certified: bool,
    pub ldl: Option<LdlSummary>,
    pub runtime_seconds: f64,
}

/// Checks PSD of `[O]_{start <= m, n <= l}`. The exact path certifies by
/// rational `L D L^T`; the float path gates the minimum eigenvalue.
pub fn verify_series_psd(l: usize, start: usize, exact: bool) -> Result<SeriesReport> {
    if start < 2 || start > l {
        return Err(Error::Domain {
            name: "start",
            value: start as f64,
            domain: "2 <= start <= L",
        });
    }
    let clock = Instant::now();
    let matrix = series_oracle(l)?.with_start(start);
    let block = matrix.float_block();
    let min_eig = min_eigenvalue(&block);
    let scaled_min_eig = min_eigenvalue(&jacobi_scaled(&block));
    let (certified, ldl) = if exact {
        let summary = ldl_certify(&matrix.exact_block()).summary();
        (summary.psd, Some(summary))
    } else {
        (scaled_min_eig >= PSD_TOL, None)
    };
    Ok(SeriesReport {
        order: l,
        start,
        exact,
        log_base: "natural",
        min_eig,
        scaled_min_eig,
        certified,
        ldl,
        runtime_seconds: clock.elapsed().as_secs_f64(),
    })
}
