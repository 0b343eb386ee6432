//! Grid discretisation: the kernel matrix on `{0, sep, ..., 1}` compressed
//! onto the orthogonal complement of the monomial columns `x^d`.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::PSD_TOL;
use crate::entropy::h;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// Columns whose residual norm falls below this fraction of their original
/// norm are treated as linearly dependent.
const RANK_TOL: f64 = 1e-12;

/// Uniform grid with both endpoints and the monomial degrees to project out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GridSpec {
    separation: String,
    intervals: usize,
    degrees: Vec<u32>,
}

impl GridSpec {
    /// `separation` is a decimal string such as `"0.004"`; its reciprocal
    /// must be an integer.
    pub fn new(separation: &str, degrees: Vec<u32>) -> Result<Self> {
        let intervals = reciprocal_intervals(separation)?;
        if degrees.is_empty() {
            return Err(Error::InvalidGrid("constraint degree list is empty".into()));
        }
        Ok(GridSpec {
            separation: separation.trim().to_string(),
            intervals,
            degrees,
        })
    }

    pub fn separation(&self) -> &str {
        &self.separation
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `i / n` for `i = 0..=n`, each computed by a single division.
    pub fn points(&self) -> Vec<f64> {
        let n = self.intervals as f64;
        (0..=self.intervals).map(|i| i as f64 / n).collect()
    }

    /// The same grid with half the separation.
    pub fn refined(&self) -> Self {
        GridSpec {
            separation: format!("1/{}", 2 * self.intervals),
            intervals: 2 * self.intervals,
            degrees: self.degrees.clone(),
        }
    }
}

/// Parses a positive decimal (or `1/n`) and returns `1 / value` when it is an
/// integer of at least 1.
fn reciprocal_intervals(text: &str) -> Result<usize> {
    let bad = |why: &str| Error::InvalidGrid(format!("separation {text:?}: {why}"));
    let t = text.trim();
    if let Some(den) = t.strip_prefix("1/") {
        let n: usize = den.parse().map_err(|_| bad("not a decimal"))?;
        return if n >= 1 {
            Ok(n)
        } else {
            Err(bad("must be positive"))
        };
    }
    let (int_part, frac_part) = t.split_once('.').unwrap_or((t, ""));
    if int_part.is_empty() && frac_part.is_empty()
        || !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
        || frac_part.len() > 30
    {
        return Err(bad("not a decimal"));
    }
    let digits = format!("{int_part}{frac_part}");
    let numerator: u128 = digits.trim_start_matches('0').parse().unwrap_or(0);
    if numerator == 0 {
        return Err(bad("must be positive"));
    }
    let denominator = 10u128.pow(frac_part.len() as u32);
    if numerator > denominator {
        return Err(bad("must not exceed 1"));
    }
    if !denominator.is_multiple_of(numerator) {
        return Err(bad("does not divide 1 exactly"));
    }
    usize::try_from(denominator / numerator).map_err(|_| bad("too fine"))
}

/// `M[i][j] = -h(Pi(0,0))` at grid points in x-space.
pub fn build_grid_matrix(spec: &KernelSpec, grid: &GridSpec) -> DMatrix<f64> {
    let pts = grid.points();
    let n = pts.len();
    let rows: Vec<Vec<f64>> = pts
        .par_iter()
        .map(|&x| pts.iter().map(|&y| -h(spec.value_x(x, y))).collect())
        .collect();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// Householder reflectors `I - 2 v v^T` whose product `Q` maps the monomial
/// columns onto the leading coordinates.
struct Reflectors {
    n: usize,
    vs: Vec<Vec<f64>>,
}

impl Reflectors {
    fn for_grid(grid: &GridSpec) -> Result<Self> {
        let pts = grid.points();
        let n = pts.len();
        let mut seen = std::collections::BTreeSet::new();
        let mut cols = Vec::new();
        for &d in grid.degrees() {
            if !seen.insert(d) {
                return Err(Error::RankDeficient { degree: d });
            }
            cols.push((
                d,
                pts.iter().map(|&x| x.powi(d as i32)).collect::<Vec<f64>>(),
            ));
        }
        let mut vs: Vec<Vec<f64>> = Vec::new();
        for (d, mut col) in cols {
            if vs.len() == n {
                break;
            }
            let original = norm(&col);
            for (j, v) in vs.iter().enumerate() {
                reflect_from(v, j, &mut col);
            }
            let k = vs.len();
            let tail = norm(&col[k..]);
            if !(tail > RANK_TOL * original) {
                return Err(Error::RankDeficient { degree: d });
            }
            let mut v = vec![0.0; n];
            let alpha = if col[k] >= 0.0 { -tail } else { tail };
            v[k..].copy_from_slice(&col[k..]);
            v[k] -= alpha;
            let vn = norm(&v[k..]);
            v[k..].iter_mut().for_each(|e| *e /= vn);
            vs.push(v);
        }
        Ok(Reflectors { n, vs })
    }

    fn rank(&self) -> usize {
        self.vs.len()
    }

    /// `Q^T M Q`, applied reflector by reflector.
    fn conjugate(&self, m: &mut DMatrix<f64>) {
        let n = self.n;
        for (k, v) in self.vs.iter().enumerate() {
            let vk = &v[k..];
            let w: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|i| {
                    vk.iter()
                        .enumerate()
                        .map(|(j, &vj)| m[(i, k + j)] * vj)
                        .sum()
                })
                .collect();
            let vw: f64 = vk.iter().enumerate().map(|(j, &vj)| vj * w[k + j]).sum();
            for c in 0..n {
                for r in 0..n {
                    let vr = if r >= k { v[r] } else { 0.0 };
                    let vc = if c >= k { v[c] } else { 0.0 };
                    m[(r, c)] += -2.0 * vr * w[c] - 2.0 * w[r] * vc + 4.0 * vw * vr * vc;
                }
            }
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn reflect_from(v: &[f64], k: usize, x: &mut [f64]) {
    let dot: f64 = v[k..].iter().zip(&x[k..]).map(|(a, b)| a * b).sum();
    for (xi, vi) in x[k..].iter_mut().zip(&v[k..]) {
        *xi -= 2.0 * dot * vi;
    }
}

/// Orthonormal basis `B` of `{v : V^T v = 0}`, one column per direction.
pub fn null_space_basis(grid: &GridSpec) -> Result<DMatrix<f64>> {
    let refl = Reflectors::for_grid(grid)?;
    let (n, k) = (refl.n, refl.rank());
    let mut basis = DMatrix::zeros(n, n - k);
    for c in 0..n - k {
        let mut e = vec![0.0; n];
        e[k + c] = 1.0;
        for (j, v) in refl.vs.iter().enumerate().rev() {
            reflect_from(v, j, &mut e);
        }
        basis.set_column(c, &nalgebra::DVector::from_vec(e));
    }
    Ok(basis)
}

/// Outcome of the projected eigenvalue computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Projection {
    /// `None` when the constraint columns span the whole grid space; the
    /// restriction is then vacuous and its minimum is read as `+inf`.
    pub min_eig: Option<f64>,
    pub subspace_dim: usize,
}

impl Projection {
    pub fn min_eig_or_inf(&self) -> f64 {
        self.min_eig.unwrap_or(f64::INFINITY)
    }
}

/// Minimum eigenvalue of `B^T M B` with `B` from [`null_space_basis`].
pub fn project_and_min_eig(m: &DMatrix<f64>, grid: &GridSpec) -> Result<Projection> {
    let refl = Reflectors::for_grid(grid)?;
    let (n, k) = (refl.n, refl.rank());
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::InvalidGrid(format!(
            "matrix is {}x{} but the grid has {n} points",
            m.nrows(),
            m.ncols()
        )));
    }
    if k >= n {
        return Ok(Projection {
            min_eig: None,
            subspace_dim: 0,
        });
    }
    let mut work = m.clone();
    refl.conjugate(&mut work);
    let block = work.view((k, k), (n - k, n - k)).into_owned();
    let block = (&block + block.transpose()) * 0.5;
    let min = block
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    Ok(Projection {
        min_eig: Some(min),
        subspace_dim: n - k,
    })
}

/// JSON report of one grid verification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    pub kernel: String,
    pub grid: GridSummary,
    pub degrees: Vec<u32>,
    pub min_eig: Option<f64>,
    pub subspace_dim: usize,
    pub certified: bool,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummary {
    pub separation: String,
    pub points: usize,
}

impl GridReport {
    pub fn run(spec: &KernelSpec, grid: &GridSpec) -> Result<Self> {
        let start = Instant::now();
        let m = build_grid_matrix(spec, grid);
        let proj = project_and_min_eig(&m, grid)?;
        Ok(GridReport {
            kernel: spec.name(),
            grid: GridSummary {
                separation: grid.separation().to_string(),
                points: grid.len(),
            },
            degrees: grid.degrees().to_vec(),
            min_eig: proj.min_eig,
            subspace_dim: proj.subspace_dim,
            certified: proj.min_eig_or_inf() >= PSD_TOL,
            runtime_seconds: start.elapsed().as_secs_f64(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::solve_xstar;

    #[test]
    fn separation_parsing() {
        assert_eq!(GridSpec::new("0.004", vec![0]).unwrap().len(), 251);
        assert_eq!(GridSpec::new("0.0004", vec![0]).unwrap().len(), 2501);
        assert_eq!(GridSpec::new("0.5", vec![0]).unwrap().len(), 3);
        assert_eq!(GridSpec::new("1", vec![0]).unwrap().len(), 2);
        assert_eq!(GridSpec::new(".25", vec![0]).unwrap().len(), 5);
        assert_eq!(GridSpec::new("1/7", vec![0]).unwrap().len(), 8);
        for bad in ["0.3", "0", "2", "abc", "-0.5", "", "0.5.1", "1e-3"] {
            assert!(GridSpec::new(bad, vec![0]).is_err(), "{bad}");
        }
        assert!(GridSpec::new("0.5", vec![]).is_err());
    }

    #[test]
    fn endpoints_included() {
        let g = GridSpec::new("0.004", vec![0]).unwrap();
        let p = g.points();
        assert_eq!(p[0], 0.0);
        assert_eq!(*p.last().unwrap(), 1.0);
        assert!(p.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn iid_half_grid() {
        let g = GridSpec::new("0.5", vec![0]).unwrap();
        let m = build_grid_matrix(&KernelSpec::iid(), &g);
        assert_eq!(m.nrows(), 3);
        assert!((m[(1, 1)] + h(0.25)).abs() < 1e-15);
        for j in 0..3 {
            assert_eq!(m[(0, j)], 0.0);
            assert_eq!(m[(j, 0)], 0.0);
        }
        assert!((m[(1, 2)] - m[(2, 1)]).abs() == 0.0);
    }

    #[test]
    fn example2_diagonal_at_xstar() {
        let x = solve_xstar().unwrap();
        let k = KernelSpec::xxbar().value_x(x, x);
        assert!((h(k) - h(x * x)).abs() < 1e-12);
    }

    #[test]
    fn null_space_is_orthogonal_to_constraints() {
        let g = GridSpec::new("0.02", vec![0, 1, 2]).unwrap();
        let b = null_space_basis(&g).unwrap();
        let pts = g.points();
        assert_eq!(b.ncols(), pts.len() - 3);
        let btb = b.transpose() * &b;
        assert!((btb - DMatrix::identity(b.ncols(), b.ncols())).amax() < 1e-12);
        for d in 0..3 {
            let v = nalgebra::DVector::from_iterator(pts.len(), pts.iter().map(|x| x.powi(d)));
            assert!((b.transpose() * v).amax() < 1e-12);
        }
    }

    #[test]
    fn projection_matches_explicit_basis() {
        let g = GridSpec::new("0.05", vec![0, 1]).unwrap();
        let m = build_grid_matrix(&KernelSpec::xxbar(), &g);
        let b = null_space_basis(&g).unwrap();
        let direct = (b.transpose() * &m * &b).symmetric_eigenvalues().min();
        let fast = project_and_min_eig(&m, &g).unwrap().min_eig.unwrap();
        assert!((direct - fast).abs() < 1e-12, "{direct} vs {fast}");
    }

    #[test]
    fn full_constraint_set_is_vacuous() {
        let g = GridSpec::new("0.5", vec![0, 1, 2]).unwrap();
        let m = build_grid_matrix(&KernelSpec::iid(), &g);
        let p = project_and_min_eig(&m, &g).unwrap();
        assert_eq!(p.min_eig, None);
        assert_eq!(p.min_eig_or_inf(), f64::INFINITY);
        assert_eq!(p.subspace_dim, 0);
    }

    #[test]
    fn duplicate_degree_is_rank_deficient() {
        let g = GridSpec::new("0.1", vec![0, 1, 1]).unwrap();
        let m = build_grid_matrix(&KernelSpec::iid(), &g);
        assert_eq!(
            project_and_min_eig(&m, &g),
            Err(Error::RankDeficient { degree: 1 })
        );
    }

    #[test]
    fn wrong_size_matrix_rejected() {
        let g = GridSpec::new("0.1", vec![0]).unwrap();
        let m = DMatrix::zeros(3, 3);
        assert!(project_and_min_eig(&m, &g).is_err());
    }

    #[test]
    fn unconstrained_iid_is_indefinite() {
        let g = GridSpec::new("0.05", vec![0]).unwrap();
        let m = build_grid_matrix(&KernelSpec::iid(), &g);
        let p = project_and_min_eig(&m, &g).unwrap();
        assert!(p.min_eig.unwrap() < -1e-3);
    }
}
