//! Numerical certificates for binary entropy inequalities on coupled
//! draws from union-closed families.
//!
//! Start with [`constants::ConstantsTable::solve`]; every other module takes
//! the solved table where it needs a named constant. The `ucbound` binary
//! in [`cli`] wraps each check in a JSON report with an exit code.

pub mod cli;
pub mod constants;
pub mod entropy;
pub mod error;
pub mod kernels;
pub mod maxcorr;
pub mod measures;
pub mod mixture;
pub mod prop1;
pub mod psd;
pub mod roots;
pub mod sawin;
pub mod simulate;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/constants.md")]
    mod constants {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/measures.md")]
    mod measures {}
    #[doc = include_str!("../../../book/src/psd.md")]
    mod psd {}
    #[doc = include_str!("../../../book/src/mixture.md")]
    mod mixture {}
    #[doc = include_str!("../../../book/src/maxcorr.md")]
    mod maxcorr {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/report-schema.md")]
    mod report_schema {}
}
