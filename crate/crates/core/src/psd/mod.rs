//! Positive-semidefiniteness checks of the quadratic form
//! `mu -> -E_{mu x mu}[h(Pi(0,0))]` on signed measures with vanishing
//! low-order moments.

pub mod grid;
pub mod ldl;
pub mod series;

pub use grid::{
    build_grid_matrix, null_space_basis, project_and_min_eig, GridReport, GridSpec, Projection,
};
pub use ldl::{ldl_certify, LdlOutcome};
pub use series::{
    closed_form_mismatches, coeff_closed_form, jacobi_scaled, series_oracle, verify_series_psd,
    ClosedForm, SeriesMatrix, SeriesReport,
};

/// A computed minimum eigenvalue at or above this value counts as PSD.
pub const PSD_TOL: f64 = -1e-10;

/// Row-major CSV with 17 significant digits.
pub fn write_matrix_csv<W: std::io::Write>(rows: &[Vec<f64>], mut out: W) -> std::io::Result<()> {
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}
