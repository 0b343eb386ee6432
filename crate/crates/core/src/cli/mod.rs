//! Batch command-line interface. Every subcommand writes one JSON document
//! `{manifest, result, checks, pass}` and exits 0 iff every check passes.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{Check, Document, Outcome};
pub use manifest::{strip_timing, RunManifest};

use crate::error::{Error, Result};
use crate::mixture::SolverKind;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "ucbound",
    version,
    about = "Numerical certificates for entropy-based bounds on union-closed families"
)]
pub struct Cli {
    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write the subcommand's CSV export here.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    /// Scaled-down defaults suitable for CI.
    #[arg(long, global = true)]
    pub desk: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve every named constant and report residuals.
    Constants,
    /// Randomised check of the i.i.d. single-coupling bound.
    Prop1Check(Prop1Args),
    /// Grid discretisation of the kernel quadratic form.
    VerifyPsdGrid(GridArgs),
    /// PSD of the power-series coefficient matrix.
    VerifyPsdSeries(SeriesArgs),
    /// Multi-start minimisation of the mixture ratio.
    Optimize(OptimizeArgs),
    /// Multi-start runs over a list of beta values.
    BetaSweep(BetaSweepArgs),
    /// Negativity scan for maximal-correlation couplings.
    Maxcorr(MaxcorrArgs),
    /// Every check above in one document.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Prop1Args {
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Decimal separation; its reciprocal must be an integer.
    #[arg(long)]
    pub sep: Option<String>,
    #[arg(long, default_value = "ciid-xxbar")]
    pub kernel: String,
    /// Comma-separated monomial degrees to project out.
    #[arg(long, value_delimiter = ',')]
    pub degrees: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Args)]
pub struct SeriesArgs {
    #[arg(long = "L")]
    pub order: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub start_index: usize,
    /// Certify by exact rational LDL^T instead of floating eigenvalues.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OptimizeArgs {
    #[arg(long, default_value_t = 0.3827)]
    pub c: f64,
    /// A decimal in [0, 1] or `paper` for the stationary value.
    #[arg(long, default_value = "paper")]
    pub beta: String,
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value = "projected-gradient")]
    pub solver: String,
}

#[derive(Debug, Clone, Args)]
pub struct BetaSweepArgs {
    #[arg(long, default_value_t = 0.3827)]
    pub c: f64,
    /// Comma-separated beta values; `paper` is accepted as an entry.
    #[arg(long, value_delimiter = ',', default_value = "0,0.05,paper,0.15,0.2")]
    pub betas: Vec<String>,
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value = "projected-gradient")]
    pub solver: String,
}

#[derive(Debug, Clone, Args)]
pub struct MaxcorrArgs {
    /// Interior grid points `i / (n + 1)`.
    #[arg(long, default_value_t = 999)]
    pub points: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub starts: Option<usize>,
}

pub(crate) fn parse_beta(text: &str, beta_star: f64) -> Result<f64> {
    if text.trim() == "paper" {
        return Ok(beta_star);
    }
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| Error::Solver(format!("beta {text:?} is neither a decimal nor `paper`")))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain {
            name: "beta",
            value: v,
            domain: "[0, 1]",
        });
    }
    Ok(v)
}

pub(crate) fn parse_solver(text: &str) -> Result<SolverKind> {
    text.parse()
}

/// Parses `argv` (program name first), runs the subcommand, writes its
/// outputs and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_PASS
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(doc) => match emit(&cli, &doc) {
            Ok(()) => {
                let failed: Vec<&str> = doc
                    .checks
                    .iter()
                    .filter(|c| !c.pass)
                    .map(|c| c.name.as_str())
                    .collect();
                if failed.is_empty() {
                    EXIT_PASS
                } else {
                    eprintln!("failed: {}", failed.join(", "));
                    EXIT_FAIL
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_FAIL
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAIL
        }
    }
}

/// Runs the parsed command without writing anything.
pub fn execute(cli: &Cli) -> Result<commands::Document> {
    commands::dispatch(cli)
}

fn emit(cli: &Cli, doc: &commands::Document) -> std::io::Result<()> {
    let json = serde_json::to_string_pretty(&doc.to_json()).expect("report serialises");
    match &cli.out {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{json}")?;
        }
    }
    if let (Some(path), Some(csv)) = (&cli.csv, &doc.csv) {
        std::fs::write(path, csv)?;
    }
    Ok(())
}
