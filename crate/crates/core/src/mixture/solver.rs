//! Local solvers for the mixture problem. Both return points that satisfy
//! the mean constraint exactly (modulo rounding) and lie in the box.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    gradient, mean_constraint, objective, penalized_objective, CertificationConfig, ThetaVector,
};
use crate::error::Error;

/// First-order stationarity required for a start to count as converged.
pub const STATIONARITY_TOL: f64 = 1e-8;
/// Largest admissible shortfall `1 - c - E_mu[X]`.
pub const VIOLATION_TOL: f64 = 1e-9;

/// Quadratic penalty on the distance from the box, applied before repair.
const BOX_PENALTY: f64 = 1e3;
const NM_INITIAL_STEP: f64 = 0.05;
const NM_MAX_ITER: usize = 20_000;
const NM_RESTARTS: usize = 4;
const PG_MAX_INNER: usize = 20_000;
const PG_MAX_OUTER: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Nelder-Mead on the repaired parametrisation with a box penalty.
    NelderMead,
    /// Projected gradient with Barzilai-Borwein steps inside an augmented
    /// Lagrangian loop for the mean constraint.
    ProjectedGradient,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::NelderMead => "nelder-mead",
            SolverKind::ProjectedGradient => "projected-gradient",
        })
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "nelder-mead" | "nm" => Ok(SolverKind::NelderMead),
            "projected-gradient" | "pg" => Ok(SolverKind::ProjectedGradient),
            other => Err(Error::Solver(format!("unknown solver {other:?}"))),
        }
    }
}

/// Result of one local solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalSolution {
    pub theta: ThetaVector,
    pub ratio: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    /// Simplex diameter (Nelder-Mead) or projected-gradient norm.
    pub stationarity: f64,
    pub violation: f64,
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Nearest point of `{a >= 0, a1 + a2 <= 1}`.
fn project_weights(a1: f64, a2: f64) -> (f64, f64) {
    let (p1, p2) = (a1.max(0.0), a2.max(0.0));
    if p1 + p2 <= 1.0 {
        return (p1, p2);
    }
    // Projection onto the segment a1 + a2 = 1.
    let t = (a1 - a2 + 1.0) / 2.0;
    let t = t.clamp(0.0, 1.0);
    (t, 1.0 - t)
}

/// Euclidean projection onto the box and weight triangle.
fn project(z: &[f64; 9]) -> [f64; 9] {
    let mut out = *z;
    let (a1, a2) = project_weights(z[0], z[1]);
    out[0] = a1;
    out[1] = a2;
    for v in out.iter_mut().skip(2) {
        *v = clamp01(*v);
    }
    out
}

fn distance2(a: &[f64; 9], b: &[f64; 9]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn sup_norm_diff(a: &[f64; 9], b: &[f64; 9]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Projects onto the box, then raises all atoms toward 1 by the common
/// fraction `t` that brings the mean up to `1 - c` when it falls short.
pub fn repair(z: &[f64; 9], c: f64) -> ThetaVector {
    let mut theta = ThetaVector::from_array(&project(z));
    lift(&mut theta, c);
    theta
}

fn lift(theta: &mut ThetaVector, c: f64) {
    let target = 1.0 - c;
    let m = mean_constraint(theta);
    if m >= target || m >= 1.0 {
        return;
    }
    let mut t = (target - m) / (1.0 - m);
    for _ in 0..4 {
        let lifted: [f64; 6] = theta.b.map(|b| clamp01(b + t * (1.0 - b)));
        let trial = ThetaVector {
            b: lifted,
            ..*theta
        };
        if mean_constraint(&trial) >= target {
            *theta = trial;
            return;
        }
        t = (t + 4.0 * f64::EPSILON).min(1.0);
    }
    theta.b = theta.b.map(|b| clamp01(b + t * (1.0 - b)));
}

/// Tries moving a slack constraint onto its boundary by shrinking all atoms
/// toward 0; kept only if the ratio decreases.
fn polish_tight(theta: ThetaVector, c: f64, beta: f64) -> ThetaVector {
    let target = 1.0 - c;
    let m = mean_constraint(&theta);
    if m <= target + 1e-13 {
        return theta;
    }
    let s = target / m;
    let mut trial = ThetaVector {
        b: theta.b.map(|b| b * s),
        ..theta
    };
    lift(&mut trial, c);
    if penalized_objective(&trial, beta) < penalized_objective(&theta, beta) {
        trial
    } else {
        theta
    }
}

fn finish(
    theta: ThetaVector,
    c: f64,
    beta: f64,
    converged: bool,
    iterations: usize,
    evaluations: usize,
    stationarity: f64,
) -> LocalSolution {
    let theta = polish_tight(theta, c, beta);
    let violation = (1.0 - c - mean_constraint(&theta)).max(0.0);
    let (ratio, ok) = match objective(&theta, beta) {
        Ok(r) => (r, true),
        Err(_) => (super::DEGENERATE_PENALTY, false),
    };
    LocalSolution {
        theta,
        ratio,
        converged: converged && ok && violation <= VIOLATION_TOL && theta.validate().is_ok(),
        iterations,
        evaluations,
        stationarity,
        violation,
    }
}

/// Minimises the ratio from `theta0` under `E_mu[X] >= 1 - c`.
pub fn local_solve(theta0: &ThetaVector, config: &CertificationConfig) -> LocalSolution {
    match config.solver {
        SolverKind::NelderMead => nelder_mead(theta0, config.c, config.beta),
        SolverKind::ProjectedGradient => projected_gradient(theta0, config.c, config.beta),
    }
}

fn nelder_mead(theta0: &ThetaVector, c: f64, beta: f64) -> LocalSolution {
    let phi = |z: &[f64; 9]| {
        let box_pt = project(z);
        penalized_objective(&repair(z, c), beta) + BOX_PENALTY * distance2(z, &box_pt)
    };
    let mut best = repair(&theta0.to_array(), c).to_array();
    let mut best_f = phi(&best);
    let (mut iterations, mut evaluations) = (0, 1);
    let mut converged = false;
    let mut diameter = f64::INFINITY;
    for _ in 0..NM_RESTARTS {
        let run = nm_run(&phi, &best, c, &mut evaluations);
        iterations += run.iterations;
        diameter = run.diameter;
        converged = run.converged;
        let improved = best_f - run.f > 1e-13;
        if run.f <= best_f {
            best = repair(&run.z, c).to_array();
            best_f = phi(&best);
            evaluations += 1;
        }
        if converged && !improved {
            break;
        }
    }
    finish(
        repair(&best, c),
        c,
        beta,
        converged,
        iterations,
        evaluations,
        diameter,
    )
}

struct NmRun {
    z: [f64; 9],
    f: f64,
    iterations: usize,
    diameter: f64,
    converged: bool,
}

/// Adaptive-parameter Nelder-Mead; converged when all vertices, after
/// repair, lie within `STATIONARITY_TOL` of the best one.
fn nm_run<F: Fn(&[f64; 9]) -> f64>(phi: &F, start: &[f64; 9], c: f64, evals: &mut usize) -> NmRun {
    const N: usize = 9;
    let n = N as f64;
    let (alpha, gamma) = (1.0, 1.0 + 2.0 / n);
    let (rho, sigma) = (0.75 - 1.0 / (2.0 * n), 1.0 - 1.0 / n);

    let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
    simplex.push((*start, phi(start)));
    for i in 0..N {
        let mut v = *start;
        v[i] += if v[i] + NM_INITIAL_STEP <= 1.0 {
            NM_INITIAL_STEP
        } else {
            -NM_INITIAL_STEP
        };
        simplex.push((v, phi(&v)));
    }
    *evals += N + 1;

    let mut diameter = f64::INFINITY;
    for it in 0..NM_MAX_ITER {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if it % 10 == 0 || diameter <= STATIONARITY_TOL * 10.0 {
            let best = repair(&simplex[0].0, c).to_array();
            diameter = simplex[1..]
                .iter()
                .map(|(v, _)| sup_norm_diff(&repair(v, c).to_array(), &best))
                .fold(0.0, f64::max);
            if diameter <= STATIONARITY_TOL {
                return NmRun {
                    z: simplex[0].0,
                    f: simplex[0].1,
                    iterations: it,
                    diameter,
                    converged: true,
                };
            }
        }
        let mut centroid = [0.0; N];
        for (v, _) in &simplex[..N] {
            for k in 0..N {
                centroid[k] += v[k] / n;
            }
        }
        let worst = simplex[N];
        let along = |t: f64| {
            let mut p = [0.0; N];
            for k in 0..N {
                p[k] = centroid[k] + t * (worst.0[k] - centroid[k]);
            }
            p
        };
        let xr = along(-alpha);
        let fr = phi(&xr);
        *evals += 1;
        if fr < simplex[0].1 {
            let xe = along(-alpha * gamma);
            let fe = phi(&xe);
            *evals += 1;
            simplex[N] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[N - 1].1 {
            simplex[N] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let p = along(-alpha * rho);
            (p, phi(&p))
        } else {
            let p = along(rho);
            (p, phi(&p))
        };
        *evals += 1;
        if fc < worst.1.min(fr) {
            simplex[N] = (xc, fc);
            continue;
        }
        let best = simplex[0].0;
        for (v, f) in simplex.iter_mut().skip(1) {
            for k in 0..N {
                v[k] = best[k] + sigma * (v[k] - best[k]);
            }
            *f = phi(v);
        }
        *evals += N;
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    NmRun {
        z: simplex[0].0,
        f: simplex[0].1,
        iterations: NM_MAX_ITER,
        diameter,
        converged: false,
    }
}

/// Gradient of `E_mu[X]`.
fn mean_gradient(t: &ThetaVector) -> [f64; 9] {
    let a = t.pair_weights();
    let q = t.q;
    let m: [f64; 3] = std::array::from_fn(|k| (1.0 - q) * t.b[2 * k] + q * t.b[2 * k + 1]);
    let mut g = [0.0; 9];
    g[0] = m[0] - m[2];
    g[1] = m[1] - m[2];
    g[2] = (0..3).map(|k| a[k] * (t.b[2 * k + 1] - t.b[2 * k])).sum();
    for k in 0..3 {
        g[3 + 2 * k] = a[k] * (1.0 - q);
        g[4 + 2 * k] = a[k] * q;
    }
    g
}

fn projected_gradient(theta0: &ThetaVector, c: f64, beta: f64) -> LocalSolution {
    let target = 1.0 - c;
    let lagrangian = |z: &[f64; 9], lambda: f64, rho: f64| -> Option<(f64, [f64; 9])> {
        let t = ThetaVector::from_array(z);
        let r = objective(&t, beta).ok()?;
        let mut g = gradient(&t, beta)?;
        let shortfall = target - mean_constraint(&t);
        let mult = (lambda + rho * shortfall).max(0.0);
        let value = r + (mult * mult - lambda * lambda) / (2.0 * rho);
        let gm = mean_gradient(&t);
        for k in 0..9 {
            g[k] -= mult * gm[k];
        }
        Some((value, g))
    };

    let mut z = repair(&theta0.to_array(), c).to_array();
    let (mut lambda, mut rho) = (0.0, 10.0);
    let (mut iterations, mut evaluations) = (0, 0);
    let mut stationarity = f64::INFINITY;
    let mut last_violation = f64::INFINITY;
    let mut converged = false;

    for _ in 0..PG_MAX_OUTER {
        let Some((mut f, mut g)) = lagrangian(&z, lambda, rho) else {
            break;
        };
        evaluations += 1;
        let mut step = 1e-2;
        let mut inner_done = false;
        for _ in 0..PG_MAX_INNER {
            iterations += 1;
            let mut unit = z;
            for k in 0..9 {
                unit[k] -= g[k];
            }
            stationarity = sup_norm_diff(&z, &project(&unit));
            if stationarity <= STATIONARITY_TOL {
                inner_done = true;
                break;
            }
            // Backtracking from the Barzilai-Borwein trial step.
            let mut accepted = None;
            let mut s = step;
            for _ in 0..60 {
                let mut trial = z;
                for k in 0..9 {
                    trial[k] -= s * g[k];
                }
                let trial = project(&trial);
                let decrease: f64 = (0..9).map(|k| g[k] * (z[k] - trial[k])).sum();
                if let Some((ft, gt)) = lagrangian(&trial, lambda, rho) {
                    evaluations += 1;
                    if ft <= f - 1e-4 * decrease {
                        accepted = Some((trial, ft, gt));
                        break;
                    }
                }
                s *= 0.5;
            }
            let Some((zn, fnew, gn)) = accepted else {
                break;
            };
            let (mut sy, mut ss) = (0.0, 0.0);
            for k in 0..9 {
                let dz = zn[k] - z[k];
                sy += dz * (gn[k] - g[k]);
                ss += dz * dz;
            }
            step = if sy > 0.0 {
                (ss / sy).clamp(1e-10, 1e3)
            } else {
                (2.0 * s).min(1e3)
            };
            z = zn;
            f = fnew;
            g = gn;
        }
        let violation = (target - mean_constraint(&ThetaVector::from_array(&z))).max(0.0);
        if inner_done && violation <= 1e-10 {
            converged = true;
            break;
        }
        lambda = (lambda + rho * (target - mean_constraint(&ThetaVector::from_array(&z)))).max(0.0);
        if violation > 0.25 * last_violation {
            rho = (rho * 10.0).min(1e10);
        }
        last_violation = violation;
    }
    let mut theta = ThetaVector::from_array(&project(&z));
    lift(&mut theta, c);
    finish(
        theta,
        c,
        beta,
        converged,
        iterations,
        evaluations,
        stationarity,
    )
}
