//! The hierarchy driver: solve the order-`k` relaxation, test tightness by
//! moment completion and flat truncation, extract the worst-case measure and
//! certify the recovered optimizer.

use std::time::Instant;

use super::{assemble_order_k, recover_primal, DromProblem};
use crate::conesolve::{solve, SolveOptions, SolveStatus};
use crate::error::{DromError, Result};
use crate::linalg::dot;
use crate::momentkit::{
    atmp_solve, check_flat, extract_atoms_with, AtmpOutcome, AtomicMeasure, ExtractOptions, SemiAlgSet, Tms,
};
use crate::polycore::{riesz_pair, Poly};
use crate::soskit::random_sos;

/// Options of [`run`].
#[derive(Clone, Debug)]
pub struct DromOptions {
    /// initial relaxation order; defaults to the smallest admissible one
    pub order: Option<u32>,
    /// largest relaxation order; defaults to `ceil(d/2) + 3`
    pub max_order: Option<u32>,
    /// largest completion order; defaults to `ceil(d/2) + 4`
    pub max_completion_order: Option<u32>,
    /// seed of the generic objective used for moment completion
    pub seed: u64,
    /// certificate tolerance, relative to `max(1, |F*|)`
    pub tol: f64,
    /// append `radius^2 - |xi|^2` to the support generators
    pub ball_radius: Option<f64>,
    pub solver: SolveOptions,
    pub extract: ExtractOptions,
}

impl Default for DromOptions {
    fn default() -> Self {
        DromOptions {
            order: None,
            max_order: None,
            max_completion_order: None,
            seed: 42,
            tol: 1e-6,
            ball_radius: None,
            solver: SolveOptions::default(),
            extract: ExtractOptions::default(),
        }
    }
}

/// Overall outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    /// tightness certified and every certificate within tolerance
    Solved,
    /// budgets exhausted or a certificate failed
    Undecided,
    /// the relaxation is infeasible
    Infeasible,
    /// the relaxation stayed unbounded up to the largest order: the problem
    /// is infeasible or the order is too low
    InfeasibleOrOrderTooLow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tightness {
    /// a representing measure was extracted for `y*`
    Certified,
    /// completion stayed inconclusive within the budget
    Undecided,
    /// `y*` admits no measure on the support
    NoMeasure,
}

/// Residuals of the optimality certificates and their verdicts.
#[derive(Clone, Debug)]
pub struct Certificates {
    /// `|F* - <f, w*>|`
    pub duality_gap: f64,
    /// `max(0, -c_i(x*))` per constraint
    pub x_feasibility: Vec<f64>,
    /// `|<f, w*> - f(x*)|`
    pub objective_match: f64,
    /// `(A x* + b)^T y*`
    pub complementarity: f64,
    /// `max |int [xi]_d dmu - y*|` for the extracted measure
    pub measure_residual: Option<f64>,
    pub tightness: Tightness,
    /// absolute tolerance the residuals were compared with
    pub tolerance: f64,
    pub passed: bool,
}

/// Everything the driver produced at its final order.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub status: Status,
    pub order_k: u32,
    pub optimal_value: f64,
    pub x: Vec<f64>,
    pub gamma: f64,
    pub y: Option<Tms>,
    pub z: Option<Tms>,
    pub w: Option<Tms>,
    pub homogenizer: f64,
    pub worst_case_measure: Option<AtomicMeasure>,
    pub certificates: Option<Certificates>,
    /// solver status at every order tried
    pub history: Vec<(u32, SolveStatus, f64)>,
    pub solver_iterations: usize,
    pub seed: u64,
    pub elapsed_seconds: f64,
    pub message: String,
}

/// Certificate residuals at a recovered point.
pub fn certify(
    problem: &DromProblem,
    x: &[f64],
    w: &Tms,
    optimal_value: f64,
    y: &[f64],
    tightness: Tightness,
    tol: f64,
) -> Result<Certificates> {
    let scale = optimal_value.abs().max(1.0);
    let fw = riesz_pair(&problem.f, w)?;
    let fx = problem.f.eval(x)?;
    let mut x_feasibility = Vec::with_capacity(problem.c.len());
    for c in &problem.c {
        x_feasibility.push((-c.eval(x)?).max(0.0));
    }
    let complementarity = dot(&problem.h_coefficients(x), y);
    let duality_gap = (optimal_value - fw).abs();
    let objective_match = (fw - fx).abs();
    let tolerance = tol * scale;
    let passed = duality_gap <= tolerance
        && objective_match <= tolerance
        && complementarity.abs() <= tolerance
        && x_feasibility.iter().all(|&v| v <= tol)
        && tightness == Tightness::Certified;
    Ok(Certificates {
        duality_gap,
        x_feasibility,
        objective_match,
        complementarity,
        measure_residual: None,
        tightness,
        tolerance,
        passed,
    })
}

/// Support set used by the driver (with the optional ball appended).
pub fn effective_support(problem: &DromProblem, ball_radius: Option<f64>) -> Result<SemiAlgSet> {
    match ball_radius {
        None => Ok(problem.support.clone()),
        Some(r) => {
            if !(r > 0.0) {
                return Err(DromError::InvalidArgument(format!(
                    "ball radius must be positive, got {r}"
                )));
            }
            let p = problem.p;
            let mut ball = Poly::constant(p, r * r);
            for i in 0..p {
                let v = Poly::var(p, i);
                ball = &ball - &(&v * &v);
            }
            let mut gens = problem.support.generators().to_vec();
            gens.push(ball);
            SemiAlgSet::new(p, gens)
        }
    }
}

/// Outcome of the tightness test on a moment vector.
#[derive(Clone, Debug)]
pub enum MomentCheck {
    /// a representing measure, found at the given completion order
    Measure(AtomicMeasure, u32),
    /// completion infeasible at the given order: no measure on the support
    NoMeasure(u32),
    /// inconclusive up to the largest completion order
    Undecided,
}

/// Decide whether `y` has a representing measure on `g`: complete it with a
/// generic SOS objective `r` at orders `l = t0 + 1, ..., l_max`, test flat
/// truncation and extract atoms.
pub fn check_moments(
    y: &Tms,
    g: &SemiAlgSet,
    r: &Poly,
    l_max: u32,
    solver: &SolveOptions,
    extract: &ExtractOptions,
) -> Result<MomentCheck> {
    let t0 = y.degree().div_ceil(2);
    let d0 = g.d0();
    let l_min = (t0 + 1).max(g.degree().div_ceil(2)).max(r.degree().div_ceil(2));
    for l in l_min..=l_max.max(l_min) {
        match atmp_solve(y, g, r, l, solver)? {
            AtmpOutcome::Infeasible => return Ok(MomentCheck::NoMeasure(l)),
            AtmpOutcome::Inconclusive(_) => continue,
            AtmpOutcome::Feasible(omega) => {
                if let Some((s, rank)) = check_flat(&omega, d0, t0) {
                    if let Ok(mu) = extract_atoms_with(&omega, s, rank, extract) {
                        if mu.support_violation(g)? <= 1e-5 {
                            return Ok(MomentCheck::Measure(mu, l));
                        }
                    }
                }
            }
        }
    }
    Ok(MomentCheck::Undecided)
}

/// Run the hierarchy until tightness is certified or the budgets run out.
pub fn run(problem: &DromProblem, options: &DromOptions) -> Result<SolveReport> {
    let start = Instant::now();
    problem.validate()?;
    let mut work = problem.clone();
    work.support = effective_support(problem, options.ball_radius)?;
    let t0 = problem.d.div_ceil(2);
    let k0 = options.order.unwrap_or(0).max(work.min_order());
    let k_max = options.max_order.unwrap_or(t0 + 3).max(k0);
    let l_max = options.max_completion_order.unwrap_or(t0 + 4);
    let r = random_sos(options.seed, problem.p, t0);

    let mut report = SolveReport {
        status: Status::Undecided,
        order_k: k0,
        optimal_value: f64::NAN,
        x: vec![],
        gamma: f64::NAN,
        y: None,
        z: None,
        w: None,
        homogenizer: 0.0,
        worst_case_measure: None,
        certificates: None,
        history: vec![],
        solver_iterations: 0,
        seed: options.seed,
        elapsed_seconds: 0.0,
        message: String::new(),
    };
    let mut unbounded_everywhere = true;
    for k in k0..=k_max {
        report.order_k = k;
        let (pb, maps) = assemble_order_k(&work, k)?;
        let sol = solve(&pb.build(), &options.solver)?;
        report.solver_iterations += sol.iterations;
        let value = pb.objective_value(&sol);
        let status = pb.model_status(&sol);
        report.history.push((k, status, value));
        if status == SolveStatus::DualInfeasible {
            report.message = format!("relaxation unbounded at order {k}: infeasible or order too low");
            continue;
        }
        if status == SolveStatus::PrimalInfeasible {
            report.status = Status::Infeasible;
            report.message = format!("relaxation infeasible at order {k}");
            unbounded_everywhere = false;
            break;
        }
        if !matches!(status, SolveStatus::Optimal | SolveStatus::NearOptimal) {
            unbounded_everywhere = false;
            report.message = format!("solver ended with {status:?} at order {k}");
            continue;
        }
        unbounded_everywhere = false;
        let y = Tms::new(problem.p, problem.d, maps.y_value(&sol))?;
        report.optimal_value = value;
        report.gamma = maps.gamma_value(&sol);
        report.z = Some(maps.z_value(&sol)?);
        report.homogenizer = maps.homogenizer_value(&sol);
        report.y = Some(y.clone());
        let (x, w) = match recover_primal(&sol, &maps, problem.n) {
            Ok(v) => v,
            Err(e) => {
                report.message = e.to_string();
                continue;
            }
        };
        report.x = x.clone();
        report.w = Some(w.clone());

        let (tightness, measure) = match check_moments(&y, &work.support, &r, l_max, &options.solver, &options.extract)?
        {
            MomentCheck::Measure(mu, _) => (Tightness::Certified, Some(mu)),
            MomentCheck::NoMeasure(_) => (Tightness::NoMeasure, None),
            MomentCheck::Undecided => (Tightness::Undecided, None),
        };
        let mut cert = certify(problem, &x, &w, value, y.values(), tightness, options.tol)?;
        if let Some(mu) = &measure {
            let m = mu.moments(problem.d);
            cert.measure_residual = Some(
                m.values()
                    .iter()
                    .zip(y.values())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max),
            );
        }
        report.worst_case_measure = measure;
        let certified = tightness == Tightness::Certified;
        let passed = cert.passed;
        report.certificates = Some(cert);
        if certified {
            if passed {
                report.status = Status::Solved;
                report.message = format!("certified at order {k}");
            } else {
                report.status = Status::Undecided;
                report.message =
                    format!("tightness certified at order {k} but a certificate residual exceeds tolerance");
            }
            break;
        }
        report.message = match tightness {
            Tightness::NoMeasure => format!("y* admits no measure on the support at order {k}"),
            _ => format!("tightness undecided at order {k}"),
        };
    }
    if unbounded_everywhere {
        report.status = Status::InfeasibleOrOrderTooLow;
    }
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}
