//! Maximal-correlation couplings evaluated at the two-point law `(a*, b*)`.
//!
//! `lhs(rho) = max(abar^2 - a abar rho, 1 - 2 abar) h(min(bbar^2 + b bbar rho, 1/2)) - abar h(b)`
//! with `abar = 1 - a*`, `bbar = 1 - b*`. It vanishes at `rho = 0` and the
//! family improves on `c*` only if it is positive somewhere in `(0, 1)`.

use serde::Serialize;

use crate::constants::ConstantsTable;
use crate::entropy::{h, h_prime};

/// Forward-difference step for the slope at `0+`.
pub const DERIVATIVE_STEP: f64 = 1e-7;
/// Points per refinement window.
const REFINE_POINTS: usize = 200;
/// Smallest `rho` in the window toward 0. Below about `1e-14` the value is
/// rounded to 0 and its sign carries no information; the slope check covers
/// that range.
const REFINE_FLOOR: f64 = 1e-10;

pub fn lhs_e44(rho: f64, k: &ConstantsTable) -> f64 {
    let (a, b) = (k.a_star, k.b_star);
    let (ab, bb) = (1.0 - a, 1.0 - b);
    let pst = (ab * ab - a * ab * rho).max(1.0 - 2.0 * ab);
    let pi = (bb * bb + b * bb * rho).min(0.5);
    pst * h(pi) - ab * h(b)
}

/// Slope of `lhs` at `0+` from the closed form.
pub fn lhs_slope_at_zero(k: &ConstantsTable) -> f64 {
    let (a, b) = (k.a_star, k.b_star);
    let (ab, bb) = (1.0 - a, 1.0 - b);
    -a * ab * h(bb * bb) + ab * ab * h_prime(bb * bb) * b * bb
}

/// Where one of the two clipped terms changes branch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchSwitch {
    pub term: &'static str,
    pub rho: f64,
    /// Whether the switch lies inside `(0, 1)`.
    pub inside: bool,
}

pub fn branch_switches(k: &ConstantsTable) -> Vec<BranchSwitch> {
    let (a, b) = (k.a_star, k.b_star);
    let (ab, bb) = (1.0 - a, 1.0 - b);
    let pi = (0.5 - bb * bb) / (b * bb);
    let pst = (ab * ab - (1.0 - 2.0 * ab)) / (a * ab);
    [("coupling_probability", pi), ("marginal_weight", pst)]
        .into_iter()
        .map(|(term, rho)| BranchSwitch {
            term,
            rho,
            inside: rho > 0.0 && rho < 1.0,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxCorrScan {
    pub rho_grid: Vec<f64>,
    pub lhs_values: Vec<f64>,
    /// Maximum over the uniform grid.
    pub max_lhs_on_open_interval: f64,
    pub argmax_rho: f64,
    /// Maximum over the refinement windows near `0` and near each switch.
    pub refined_max_lhs: f64,
    pub branch_switches: Vec<BranchSwitch>,
    pub lhs_at_zero: f64,
    pub derivative_at_zero_plus: f64,
    pub pass: bool,
}

/// JSON digest of a scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxCorrSummary {
    pub max_lhs: f64,
    pub derivative_at_zero_plus: f64,
    pub pass: bool,
}

impl MaxCorrScan {
    pub fn summary(&self) -> MaxCorrSummary {
        MaxCorrSummary {
            max_lhs: self.max_lhs_on_open_interval.max(self.refined_max_lhs),
            derivative_at_zero_plus: self.derivative_at_zero_plus,
            pass: self.pass,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("rho,lhs\n");
        for (r, v) in self.rho_grid.iter().zip(&self.lhs_values) {
            out.push_str(&format!("{r:.16e},{v:.16e}\n"));
        }
        out
    }
}

/// Scans `rho = i / (n + 1)`, `i = 1..=n`, then refines near `0` and near
/// each branch switch. Passes iff every value is negative and the slope at
/// `0+` is negative.
///
/// # Panics
///
/// If `n_points < 3`.
pub fn scan_negativity(n_points: usize, k: &ConstantsTable) -> MaxCorrScan {
    assert!(n_points >= 3, "need at least 3 scan points");
    let denom = (n_points + 1) as f64;
    let rho_grid: Vec<f64> = (1..=n_points).map(|i| i as f64 / denom).collect();
    let lhs_values: Vec<f64> = rho_grid.iter().map(|&r| lhs_e44(r, k)).collect();
    let (imax, &max_lhs) = lhs_values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty grid");

    let spacing = 1.0 / denom;
    let switches = branch_switches(k);
    let mut refined = f64::NEG_INFINITY;
    // Geometric window toward 0, where the value leaves 0.
    let decades = (spacing / REFINE_FLOOR).log10();
    for i in 0..=REFINE_POINTS {
        let rho = spacing * 10f64.powf(-decades * i as f64 / REFINE_POINTS as f64);
        refined = refined.max(lhs_e44(rho, k));
    }
    for s in switches.iter().filter(|s| s.inside) {
        let lo = (s.rho - spacing).max(f64::MIN_POSITIVE);
        let hi = (s.rho + spacing).min(1.0 - f64::EPSILON);
        for i in 0..=REFINE_POINTS {
            let rho = lo + (hi - lo) * i as f64 / REFINE_POINTS as f64;
            refined = refined.max(lhs_e44(rho, k));
        }
        refined = refined.max(lhs_e44(s.rho, k));
    }

    let lhs_at_zero = lhs_e44(0.0, k);
    let derivative = (lhs_e44(DERIVATIVE_STEP, k) - lhs_at_zero) / DERIVATIVE_STEP;
    MaxCorrScan {
        argmax_rho: rho_grid[imax],
        rho_grid,
        lhs_values,
        max_lhs_on_open_interval: max_lhs,
        refined_max_lhs: refined,
        branch_switches: switches,
        lhs_at_zero,
        derivative_at_zero_plus: derivative,
        pass: max_lhs < 0.0 && refined < 0.0 && derivative < 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> ConstantsTable {
        ConstantsTable::solve().unwrap()
    }

    #[test]
    fn vanishes_at_zero() {
        assert!(lhs_e44(0.0, &k()).abs() < 1e-10);
    }

    #[test]
    fn value_at_one() {
        let k = k();
        let (a, b) = (k.a_star, k.b_star);
        let expected = (1.0 - a) * (1.0 - 2.0 * a) - (1.0 - a) * h(b);
        assert!((lhs_e44(1.0, &k) - expected).abs() < 1e-14);
        assert!((lhs_e44(1.0, &k) + 0.0664).abs() < 5e-4);
    }

    #[test]
    fn negative_at_half() {
        assert!(lhs_e44(0.5, &k()) < 0.0);
    }

    #[test]
    fn switches() {
        let s = branch_switches(&k());
        assert!(s[0].inside && (s[0].rho - 0.228).abs() < 1e-3);
        assert!(!s[1].inside);
    }

    #[test]
    fn slope_at_zero() {
        let k = k();
        let scan = scan_negativity(99, &k);
        let analytic = lhs_slope_at_zero(&k);
        assert!(analytic < 0.0);
        assert!((scan.derivative_at_zero_plus - analytic).abs() < 1e-5);
    }

    #[test]
    fn scan_passes_and_refines() {
        let k = k();
        let coarse = scan_negativity(99, &k);
        let fine = scan_negativity(999, &k);
        assert!(coarse.pass && fine.pass);
        assert_eq!(coarse.rho_grid.len(), 99);
        assert!((coarse.rho_grid[0] - 0.01).abs() < 1e-15);
        assert!(coarse.rho_grid.windows(2).all(|w| w[0] < w[1]));
        // The coarse grid is a subset of the fine one, and the maximum sits
        // at the left end where lhs ~ slope * rho.
        assert!(fine.max_lhs_on_open_interval >= coarse.max_lhs_on_open_interval);
        assert_eq!(fine.argmax_rho, fine.rho_grid[0]);
        let slope = lhs_slope_at_zero(&k);
        assert!((fine.max_lhs_on_open_interval - slope * 0.001).abs() < 1e-6);
        assert_eq!(coarse.to_csv().lines().count(), 100);
    }

    #[test]
    #[should_panic]
    fn too_few_points() {
        scan_negativity(2, &k());
    }
}
