use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use super::manifest::RunManifest;
use super::*;
use crate::constants::{reference, ConstantsTable, RESIDUAL_TOL};
use crate::entropy::{golden_threshold, prop1_bound};
use crate::kernels::{KernelKind, KernelSpec};
use crate::maxcorr::scan_negativity;
use crate::mixture::{
    certify, conjectured_theta, objective, CertificationConfig, CertificationReport,
};
use crate::prop1::{prop1_check, PROP1_SLACK};
use crate::psd::series::{closed_form_mismatches, ClosedForm};
use crate::psd::{
    build_grid_matrix, verify_series_psd, write_matrix_csv, GridReport, GridSpec, PSD_TOL,
};

/// Tolerance for the ratio gate below `c'`.
pub const RATIO_GATE: f64 = 1e-6;

/// One named acceptance predicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: Option<f64>,
    pub criterion: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, value: f64, criterion: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            pass,
            value: value.is_finite().then_some(value),
            criterion: criterion.into(),
        }
    }

    fn within(name: &str, value: f64, target: f64, tol: f64) -> Self {
        let err = (value - target).abs();
        Check::new(
            name,
            err <= tol,
            err,
            format!("|value - {target}| <= {tol:e}"),
        )
    }
}

/// Result, checks and optional CSV of one subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub result: Value,
    pub checks: Vec<Check>,
    pub csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub manifest: RunManifest,
    pub result: Value,
    pub checks: Vec<Check>,
    pub csv: Option<String>,
}

impl Document {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "manifest": self.manifest,
            "result": self.result,
            "checks": self.checks,
            "pass": self.pass(),
        })
    }
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("report serialises")
}

pub(super) fn dispatch(cli: &Cli) -> Result<Document> {
    let clock = Instant::now();
    let k = ConstantsTable::solve()?;
    let (name, mut manifest, outcome) = match &cli.command {
        Command::Constants => {
            let m = RunManifest::new("constants");
            ("constants", m, constants(&k))
        }
        Command::Prop1Check(a) => {
            let mut m = RunManifest::new("prop1-check");
            m.param("samples", a.samples);
            m.master_seed = Some(a.seed);
            ("prop1-check", m, prop1(a.samples, a.seed)?)
        }
        Command::VerifyPsdGrid(a) => {
            let sep = a
                .sep
                .clone()
                .unwrap_or_else(|| default_sep(cli.desk).into());
            let kernel: KernelSpec = a.kernel.parse()?;
            let explicit = a.degrees.is_some();
            let degrees = a
                .degrees
                .clone()
                .unwrap_or_else(|| default_degrees(&kernel));
            let mut m = RunManifest::new("verify-psd-grid");
            m.param("sep", &sep);
            m.param("kernel", kernel.name());
            m.param("degrees", &degrees);
            (
                "verify-psd-grid",
                m,
                grid(&kernel, &sep, degrees, !explicit, cli.csv.is_some())?,
            )
        }
        Command::VerifyPsdSeries(a) => {
            let order = a.order.unwrap_or(default_order(cli.desk, a.exact));
            let mut m = RunManifest::new("verify-psd-series");
            m.param("L", order);
            m.param("start_index", a.start_index);
            m.param("exact", a.exact);
            (
                "verify-psd-series",
                m,
                series(order, a.start_index, a.exact)?,
            )
        }
        Command::Optimize(a) => {
            let cfg = CertificationConfig {
                c: a.c,
                beta: parse_beta(&a.beta, k.beta_star)?,
                n_starts: a.starts.unwrap_or(default_starts(cli.desk)),
                seed: a.seed,
                solver: parse_solver(&a.solver)?,
            };
            let mut m = RunManifest::new("optimize");
            m.param("c", cfg.c);
            m.param("beta", &a.beta);
            m.param("starts", cfg.n_starts);
            m.param("solver", cfg.solver);
            m.master_seed = Some(cfg.seed);
            ("optimize", m, optimize(&cfg, &k)?)
        }
        Command::BetaSweep(a) => {
            let betas = a
                .betas
                .iter()
                .map(|b| parse_beta(b, k.beta_star))
                .collect::<Result<Vec<f64>>>()?;
            let starts = a.starts.unwrap_or(if cli.desk { 20 } else { 100 });
            let solver = parse_solver(&a.solver)?;
            let mut m = RunManifest::new("beta-sweep");
            m.param("c", a.c);
            m.param("betas", &a.betas);
            m.param("starts", starts);
            m.param("solver", solver);
            m.master_seed = Some(a.seed);
            (
                "beta-sweep",
                m,
                beta_sweep(a.c, &betas, starts, a.seed, solver, &k)?,
            )
        }
        Command::Maxcorr(a) => {
            let mut m = RunManifest::new("maxcorr");
            m.param("points", a.points);
            ("maxcorr", m, maxcorr(a.points, &k)?)
        }
        Command::Report(a) => {
            let starts = a.starts.unwrap_or(default_starts(cli.desk));
            let mut m = RunManifest::new("report");
            m.param("desk", cli.desk);
            m.param("starts", starts);
            m.master_seed = Some(a.seed);
            ("report", m, report(cli.desk, starts, a.seed, &k)?)
        }
    };
    let _ = name;
    if let Some(out) = &cli.out {
        manifest.outputs.push(out.display().to_string());
    }
    if let (Some(csv), Some(_)) = (&cli.csv, &outcome.csv) {
        manifest.outputs.push(csv.display().to_string());
    }
    manifest.param("desk", cli.desk);
    manifest.wall_time_seconds = clock.elapsed().as_secs_f64();
    Ok(Document {
        manifest,
        result: outcome.result,
        checks: outcome.checks,
        csv: outcome.csv,
    })
}

fn default_sep(desk: bool) -> &'static str {
    if desk {
        "0.004"
    } else {
        "0.0004"
    }
}

fn default_degrees(kernel: &KernelSpec) -> Vec<u32> {
    match kernel.kind {
        KernelKind::CondIidExample2 => vec![0, 1, 2],
        _ => vec![0, 1],
    }
}

fn default_order(desk: bool, exact: bool) -> usize {
    match (desk, exact) {
        (true, _) => 20,
        (false, true) => 29,
        (false, false) => 90,
    }
}

fn default_starts(desk: bool) -> usize {
    if desk {
        200
    } else {
        1000
    }
}

pub fn constants(k: &ConstantsTable) -> Outcome {
    let mut checks = vec![
        Check::new(
            "constants.residuals",
            k.max_residual() <= RESIDUAL_TOL,
            k.max_residual(),
            format!("max residual <= {RESIDUAL_TOL:e}"),
        ),
        Check::new(
            "constants.ordering",
            k.ordering_holds(),
            f64::NAN,
            "u* < c* < c' < 1/2",
        ),
    ];
    let targets = [
        ("constants.b_star", k.b_star, reference::B_STAR, 1e-12),
        ("constants.a_star", k.a_star, reference::A_STAR, 1e-12),
        (
            "constants.c_star",
            k.c_star,
            reference::C_STAR,
            reference::C_STAR_TOL,
        ),
        (
            "constants.alpha_star",
            k.alpha_star,
            reference::ALPHA_STAR,
            reference::ALPHA_STAR_TOL,
        ),
        (
            "constants.x_star",
            k.x_star,
            reference::X_STAR,
            reference::VALUE_TOL,
        ),
        (
            "constants.p_star",
            k.p_star,
            reference::P_STAR,
            reference::VALUE_TOL,
        ),
        (
            "constants.c_prime",
            k.c_prime,
            reference::C_PRIME,
            reference::VALUE_TOL,
        ),
        (
            "constants.beta_star",
            k.beta_star,
            reference::BETA_STAR,
            reference::VALUE_TOL,
        ),
    ];
    checks.extend(
        targets
            .iter()
            .map(|&(n, v, t, tol)| Check::within(n, v, t, tol)),
    );
    Outcome {
        result: json!({ "table": to_value(k), "diagnostics": to_value(&k.diagnostics) }),
        checks,
        csv: None,
    }
}

pub fn prop1(samples: usize, seed: u64) -> Result<Outcome> {
    let rep = prop1_check(samples, seed)?;
    let at_threshold = prop1_bound(golden_threshold())?;
    let checks = vec![
        Check::new(
            "prop1.slack",
            rep.pass,
            rep.min_slack,
            format!("min slack >= {PROP1_SLACK:e}"),
        ),
        Check::within("prop1.threshold_continuity", at_threshold, 1.0, 1e-12),
    ];
    Ok(Outcome {
        result: json!({ "report": to_value(&rep), "bound_at_threshold": at_threshold }),
        checks,
        csv: None,
    })
}

pub fn grid(
    kernel: &KernelSpec,
    sep: &str,
    degrees: Vec<u32>,
    record_smaller: bool,
    want_csv: bool,
) -> Result<Outcome> {
    let spec = GridSpec::new(sep, degrees.clone())?;
    let gated = GridReport::run(kernel, &spec)?;
    let mut recorded = Vec::new();
    if record_smaller && degrees == [0, 1, 2] {
        recorded.push(GridReport::run(kernel, &GridSpec::new(sep, vec![0, 1])?)?);
    }
    let label = degrees
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("");
    let checks = vec![Check::new(
        format!("psd_grid.{}.deg{label}", kernel.name()),
        gated.certified,
        gated.min_eig.unwrap_or(f64::INFINITY),
        format!("min eigenvalue >= {PSD_TOL:e}"),
    )];
    let csv = if want_csv {
        let m = build_grid_matrix(kernel, &spec);
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().cloned().collect()).collect();
        let mut buf = Vec::new();
        write_matrix_csv(&rows, &mut buf).expect("in-memory write");
        Some(String::from_utf8(buf).expect("ascii"))
    } else {
        None
    };
    Ok(Outcome {
        result: json!({ "gated": to_value(&gated), "recorded": to_value(&recorded) }),
        checks,
        csv,
    })
}

pub fn series(order: usize, start: usize, exact: bool) -> Result<Outcome> {
    let rep = verify_series_psd(order, start, exact)?;
    let half = closed_form_mismatches(ClosedForm::LogHalf, 12);
    let omi = closed_form_mismatches(ClosedForm::LogOneMinusI, 12);
    let mode = if exact { "exact" } else { "float" };
    let checks = vec![
        Check::new(
            format!("psd_series.{mode}.L{order}.start{start}"),
            rep.certified,
            if exact { f64::NAN } else { rep.scaled_min_eig },
            if exact {
                "rational LDL^T pivots >= 0".to_string()
            } else {
                format!("scaled min eigenvalue >= {PSD_TOL:e}")
            },
        ),
        Check::new(
            "psd_series.log_half_closed_form",
            half.is_empty(),
            half.len() as f64,
            "closed form equals expansion on 0 <= m, n <= 12",
        ),
    ];
    let csv = {
        let o = crate::psd::series_oracle(order)?;
        let mut buf = Vec::new();
        write_matrix_csv(&o.entries_float, &mut buf).expect("in-memory write");
        Some(String::from_utf8(buf).expect("ascii"))
    };
    Ok(Outcome {
        result: json!({
            "report": to_value(&rep),
            "closed_forms": {
                "log_half_mismatches": half.len(),
                "log_one_minus_i_mismatches": omi.len(),
                "log_one_minus_i_first": omi.first().map(to_value),
            }
        }),
        checks,
        csv,
    })
}

fn optimize_checks(rep: &CertificationReport, k: &ConstantsTable, prefix: &str) -> Vec<Check> {
    let c = rep.config.c;
    if c <= k.c_prime {
        vec![
            Check::new(
                format!("{prefix}.min_ratio"),
                rep.min_ratio >= 1.0 - RATIO_GATE,
                rep.min_ratio,
                format!("min ratio >= 1 - {RATIO_GATE:e} (c <= c')"),
            ),
            Check::new(
                format!("{prefix}.structure"),
                rep.structure_match.matches,
                rep.structure_match.x_error.unwrap_or(f64::NAN),
                "q in {0,1} up to swap, support {0, x*}, weight p*, all within 1e-3",
            ),
        ]
    } else {
        vec![Check::new(
            format!("{prefix}.min_ratio"),
            rep.min_ratio < 1.0,
            rep.min_ratio,
            "min ratio < 1 (c > c')",
        )]
    }
}

pub fn optimize(cfg: &CertificationConfig, k: &ConstantsTable) -> Result<Outcome> {
    let rep = certify(cfg, k)?;
    let family = conjectured_theta(cfg.c, cfg.beta, k)?;
    let family_ratio = objective(&family, cfg.beta)?;
    let checks = optimize_checks(&rep, k, &format!("optimize.c{}", cfg.c));
    Ok(Outcome {
        csv: Some(rep.trace_csv()),
        result: json!({
            "report": to_value(&rep),
            "conjectured": to_value(family),
            "conjectured_ratio": family_ratio,
        }),
        checks,
    })
}

pub fn beta_sweep(
    c: f64,
    betas: &[f64],
    starts: usize,
    seed: u64,
    solver: crate::mixture::SolverKind,
    k: &ConstantsTable,
) -> Result<Outcome> {
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    for &beta in betas {
        let cfg = CertificationConfig {
            c,
            beta,
            n_starts: starts,
            seed,
            solver,
        };
        let rep = certify(&cfg, k)?;
        let family_ratio = objective(&conjectured_theta(c, beta, k)?, beta)?;
        checks.push(Check::new(
            format!("beta_sweep.beta{beta}.converged"),
            rep.n_converged > 0,
            rep.n_converged as f64,
            "at least one converged start",
        ));
        if best.is_none_or(|(_, r)| rep.min_ratio > r) {
            best = Some((beta, rep.min_ratio));
        }
        rows.push(json!({
            "beta": beta,
            "min_ratio": rep.min_ratio,
            "conjectured_ratio": family_ratio,
            "n_converged": rep.n_converged,
            "structure_matches": rep.structure_match.matches,
            "argmin": to_value(rep.argmin),
        }));
    }
    let mut csv = String::from("beta,min_ratio\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{:.16e}\n",
            r["beta"],
            r["min_ratio"].as_f64().unwrap_or(f64::NAN)
        ));
    }
    Ok(Outcome {
        result: json!({ "rows": rows, "best_beta": best.map(|b| b.0), "best_min_ratio": best.map(|b| b.1) }),
        checks,
        csv: Some(csv),
    })
}

pub fn maxcorr(points: usize, k: &ConstantsTable) -> Result<Outcome> {
    if points < 3 {
        return Err(Error::Domain {
            name: "points",
            value: points as f64,
            domain: ">= 3",
        });
    }
    let scan = scan_negativity(points, k);
    let summary = scan.summary();
    let checks = vec![
        Check::new(
            "maxcorr.lhs_at_zero",
            scan.lhs_at_zero.abs() <= 1e-10,
            scan.lhs_at_zero,
            "|lhs(0)| <= 1e-10",
        ),
        Check::new(
            "maxcorr.max_negative",
            summary.max_lhs < 0.0,
            summary.max_lhs,
            "max lhs on (0,1) < 0",
        ),
        Check::new(
            "maxcorr.slope_at_zero",
            scan.derivative_at_zero_plus < 0.0,
            scan.derivative_at_zero_plus,
            "forward difference at 0+ < 0",
        ),
    ];
    Ok(Outcome {
        csv: Some(scan.to_csv()),
        result: json!({
            "summary": to_value(&summary),
            "max_lhs_on_grid": scan.max_lhs_on_open_interval,
            "argmax_rho": scan.argmax_rho,
            "refined_max_lhs": scan.refined_max_lhs,
            "lhs_at_zero": scan.lhs_at_zero,
            "branch_switches": to_value(&scan.branch_switches),
            "points": points,
        }),
        checks,
    })
}

pub fn ratio_identity(k: &ConstantsTable) -> Result<Outcome> {
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for (label, beta) in [("0", 0.0), ("beta_star", k.beta_star), ("1", 1.0)] {
        let theta = conjectured_theta(k.c_prime, beta, k)?;
        let r = objective(&theta, beta)?;
        checks.push(Check::within(
            &format!("ratio_identity.beta_{label}"),
            r,
            1.0,
            1e-10,
        ));
        rows.push(json!({ "beta": beta, "ratio": r }));
    }
    Ok(Outcome {
        result: Value::Array(rows),
        checks,
        csv: None,
    })
}

pub fn report(desk: bool, starts: usize, seed: u64, k: &ConstantsTable) -> Result<Outcome> {
    let sep = default_sep(desk);
    let exact_order = default_order(desk, true);
    let solver = crate::mixture::SolverKind::ProjectedGradient;
    let mut sections: Vec<(String, Outcome)> = vec![
        ("constants".into(), constants(k)),
        ("prop1".into(), prop1(10_000, seed)?),
        (
            "psd_grid_xxbar".into(),
            grid(&KernelSpec::xxbar(), sep, vec![0, 1, 2], true, false)?,
        ),
        (
            "psd_grid_iid".into(),
            grid(&KernelSpec::iid(), sep, vec![0, 1], false, false)?,
        ),
        ("psd_series_exact".into(), series(exact_order, 2, true)?),
        (
            "psd_series_exact_start3".into(),
            series(exact_order, 3, true)?,
        ),
    ];
    if !desk {
        sections.push(("psd_series_float".into(), series(90, 2, false)?));
    }
    for c in [0.3827, 0.3830] {
        let cfg = CertificationConfig {
            c,
            beta: k.beta_star,
            n_starts: starts,
            seed,
            solver,
        };
        sections.push((format!("optimize_c{c}"), optimize(&cfg, k)?));
    }
    sections.push(("ratio_identity".into(), ratio_identity(k)?));
    sections.push(("maxcorr".into(), maxcorr(999, k)?));

    let mut result = serde_json::Map::new();
    let mut checks = Vec::new();
    for (name, mut out) in sections {
        if let Some(obj) = out.result.as_object_mut() {
            obj.remove("report").map(|mut r| {
                if let Some(o) = r.as_object_mut() {
                    o.remove("starts");
                }
                obj.insert("report".into(), r)
            });
        }
        result.insert(name, out.result);
        checks.append(&mut out.checks);
    }
    Ok(Outcome {
        result: Value::Object(result),
        checks,
        csv: None,
    })
}
