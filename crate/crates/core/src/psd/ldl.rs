//! Exact `L D L^T` over the rationals, producing either nonnegative pivots
//! or a rational witness `v` with `v^T A v < 0`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub enum LdlOutcome {
    /// All pivots are nonnegative; zero pivots had identically zero columns.
    Psd { pivots: Vec<BigRational> },
    NotPsd {
        /// Column at which elimination failed.
        index: usize,
        witness: Vec<BigRational>,
        /// `witness^T A witness`, recomputed from `A`.
        value: BigRational,
    },
}

impl LdlOutcome {
    pub fn is_psd(&self) -> bool {
        matches!(self, LdlOutcome::Psd { .. })
    }

    pub fn summary(&self) -> LdlSummary {
        match self {
            LdlOutcome::Psd { pivots } => LdlSummary {
                psd: true,
                min_pivot: pivots.iter().min().and_then(|p| p.to_f64()),
                zero_pivots: pivots.iter().filter(|p| p.is_zero()).count(),
                failed_index: None,
                witness: None,
                witness_value: None,
            },
            LdlOutcome::NotPsd {
                index,
                witness,
                value,
            } => LdlSummary {
                psd: false,
                min_pivot: None,
                zero_pivots: 0,
                failed_index: Some(*index),
                witness: Some(
                    witness
                        .iter()
                        .map(|w| w.to_f64().unwrap_or(f64::NAN))
                        .collect(),
                ),
                witness_value: value.to_f64(),
            },
        }
    }
}

/// Float digest of an [`LdlOutcome`] for reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdlSummary {
    pub psd: bool,
    pub min_pivot: Option<f64>,
    pub zero_pivots: usize,
    pub failed_index: Option<usize>,
    pub witness: Option<Vec<f64>>,
    pub witness_value: Option<f64>,
}

pub fn quadratic_form(a: &[Vec<BigRational>], v: &[BigRational]) -> BigRational {
    let mut total = BigRational::zero();
    for (i, row) in a.iter().enumerate() {
        if v[i].is_zero() {
            continue;
        }
        let mut acc = BigRational::zero();
        for (j, aij) in row.iter().enumerate() {
            if !v[j].is_zero() && !aij.is_zero() {
                acc += aij * &v[j];
            }
        }
        total += &v[i] * acc;
    }
    total
}

/// Symmetric elimination without pivoting. `a` must be square and symmetric.
pub fn ldl_certify(a: &[Vec<BigRational>]) -> LdlOutcome {
    let n = a.len();
    let mut s: Vec<Vec<BigRational>> = a.to_vec();
    let mut mult: Vec<Vec<BigRational>> = vec![vec![BigRational::zero(); n]; n];
    let mut pivots = Vec::with_capacity(n);

    for j in 0..n {
        let p = s[j][j].clone();
        if p.is_negative() {
            let mut y = vec![BigRational::zero(); n];
            y[j] = BigRational::one();
            return fail(a, &mult, j, y);
        }
        if p.is_zero() {
            if let Some(i) = (j + 1..n).find(|&i| !s[i][j].is_zero()) {
                let b = s[i][j].clone();
                let c = s[i][i].clone();
                let mut y = vec![BigRational::zero(); n];
                y[j] = -(c + BigRational::one()) / (BigRational::from_integer(BigInt::from(2)) * b);
                y[i] = BigRational::one();
                return fail(a, &mult, j, y);
            }
            pivots.push(p);
            continue;
        }
        for i in j + 1..n {
            if s[i][j].is_zero() {
                continue;
            }
            let l = &s[i][j] / &p;
            for k in j + 1..n {
                if !s[j][k].is_zero() {
                    let delta = &l * &s[j][k];
                    s[i][k] -= delta;
                }
            }
            mult[i][j] = l;
        }
        pivots.push(p);
    }
    LdlOutcome::Psd { pivots }
}

/// Back-substitutes a Schur-complement witness `y` (supported on `j..`)
/// into the original coordinates.
fn fail(
    a: &[Vec<BigRational>],
    mult: &[Vec<BigRational>],
    j: usize,
    mut v: Vec<BigRational>,
) -> LdlOutcome {
    let n = v.len();
    for r in (0..j).rev() {
        let mut acc = BigRational::zero();
        for i in r + 1..n {
            if !mult[i][r].is_zero() && !v[i].is_zero() {
                acc += &mult[i][r] * &v[i];
            }
        }
        v[r] = -acc;
    }
    let value = quadratic_form(a, &v);
    LdlOutcome::NotPsd {
        index: j,
        witness: v,
        value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(rows: &[&[i64]]) -> Vec<Vec<BigRational>> {
        rows.iter()
            .map(|r| {
                r.iter()
                    .map(|&v| BigRational::from_integer(v.into()))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn identity_is_psd() {
        let a = rat(&[&[1, 0], &[0, 1]]);
        assert!(ldl_certify(&a).is_psd());
    }

    #[test]
    fn gram_matrix_is_psd() {
        let a = rat(&[&[4, 2, 2], &[2, 2, 1], &[2, 1, 3]]);
        match ldl_certify(&a) {
            LdlOutcome::Psd { pivots } => assert!(pivots.iter().all(|p| p.is_positive())),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn singular_psd_with_zero_pivot() {
        let a = rat(&[&[1, 1, 0], &[1, 1, 0], &[0, 0, 2]]);
        match ldl_certify(&a) {
            LdlOutcome::Psd { pivots } => {
                assert_eq!(pivots.iter().filter(|p| p.is_zero()).count(), 1)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_pivot_witness() {
        let a = rat(&[&[1, 2], &[2, 1]]);
        match ldl_certify(&a) {
            LdlOutcome::NotPsd {
                index,
                witness,
                value,
            } => {
                assert_eq!(index, 1);
                assert!(value.is_negative());
                assert_eq!(quadratic_form(&a, &witness), value);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_pivot_with_nonzero_column() {
        let a = rat(&[&[2, 0, 0], &[0, 0, 3], &[0, 3, 5]]);
        match ldl_certify(&a) {
            LdlOutcome::NotPsd { index, value, .. } => {
                assert_eq!(index, 1);
                assert_eq!(value, BigRational::from_integer((-1).into()));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_diagonal_is_caught_immediately() {
        let a = rat(&[&[-1]]);
        assert!(!ldl_certify(&a).is_psd());
        assert!(!ldl_certify(&a).summary().psd);
    }
}
