use thiserror::Error;

/// Errors raised by the certification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("no sign change found for {equation}; scanned sign pattern: {pattern}")]
    Bracketing { equation: String, pattern: String },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("constraint matrix is rank deficient at monomial degree {degree}")]
    RankDeficient { degree: u32 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no feasible point: {0}")]
    Infeasible(String),

    #[error("none of the {starts} local solves converged")]
    NoConvergedStarts { starts: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            domain: "[0, 1]",
        })
    }
}
