//! Machine-readable solve and moment-check reports.

use serde::{Deserialize, Serialize};

use crate::drom::{certify, Certificates, DromProblem, SolveReport, Status, Tightness};
use crate::error::Result;
use crate::momentkit::{AtomicMeasure, Tms};

pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureFile {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl From<&AtomicMeasure> for MeasureFile {
    fn from(m: &AtomicMeasure) -> Self {
        MeasureFile {
            atoms: m.atoms.clone(),
            weights: m.weights.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub duality_gap: f64,
    pub x_feasibility: Vec<f64>,
    pub objective_match: f64,
    pub complementarity: f64,
    pub measure_residual: Option<f64>,
    pub tightness: String,
    pub tolerance: f64,
    pub passed: bool,
}

impl From<&Certificates> for CertificateFile {
    fn from(c: &Certificates) -> Self {
        CertificateFile {
            duality_gap: c.duality_gap,
            x_feasibility: c.x_feasibility.clone(),
            objective_match: c.objective_match,
            complementarity: c.complementarity,
            measure_residual: c.measure_residual,
            tightness: tightness_name(c.tightness).to_string(),
            tolerance: c.tolerance,
            passed: c.passed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub order: u32,
    pub solver_status: String,
    pub value: Option<f64>,
}

/// Report of a `solve` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub version: u32,
    pub monomial_order: String,
    pub name: Option<String>,
    pub status: String,
    pub message: String,
    pub k: u32,
    pub optimal_value: Option<f64>,
    pub x: Vec<f64>,
    pub gamma: Option<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    pub homogenizer: f64,
    pub measure: Option<MeasureFile>,
    pub certificates: Option<CertificateFile>,
    pub history: Vec<HistoryEntry>,
    pub solver_iterations: usize,
    pub seed: u64,
    pub wall_clock_seconds: f64,
}

pub fn status_name(s: Status) -> &'static str {
    match s {
        Status::Solved => "solved",
        Status::Undecided => "undecided",
        Status::Infeasible => "infeasible",
        Status::InfeasibleOrOrderTooLow => "infeasible_or_order_too_low",
    }
}

pub fn tightness_name(t: Tightness) -> &'static str {
    match t {
        Tightness::Certified => "certified",
        Tightness::Undecided => "undecided",
        Tightness::NoMeasure => "no_measure",
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn values(t: &Option<Tms>) -> Vec<f64> {
    t.as_ref().map(|t| t.values().to_vec()).unwrap_or_default()
}

impl ReportFile {
    pub fn from_report(rep: &SolveReport, name: Option<String>) -> Self {
        ReportFile {
            version: REPORT_VERSION,
            monomial_order: super::problem_file::MONOMIAL_ORDER.to_string(),
            name,
            status: status_name(rep.status).to_string(),
            message: rep.message.clone(),
            k: rep.order_k,
            optimal_value: finite(rep.optimal_value),
            x: rep.x.clone(),
            gamma: finite(rep.gamma),
            y: values(&rep.y),
            z: values(&rep.z),
            w: values(&rep.w),
            homogenizer: rep.homogenizer,
            measure: rep.worst_case_measure.as_ref().map(MeasureFile::from),
            certificates: rep.certificates.as_ref().map(CertificateFile::from),
            history: rep
                .history
                .iter()
                .map(|&(order, st, v)| HistoryEntry {
                    order,
                    solver_status: format!("{st:?}"),
                    value: finite(v),
                })
                .collect(),
            solver_iterations: rep.solver_iterations,
            seed: rep.seed,
            wall_clock_seconds: rep.elapsed_seconds,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        super::problem_file::parse_json(text, origin)
    }

    /// Recompute the certificate residuals from the stored `x*`, `w*`, `y*`
    /// and `F*`.
    pub fn recheck(&self, problem: &DromProblem, tol: f64) -> Result<Option<Certificates>> {
        let (Some(value), Some(stored)) = (self.optimal_value, &self.certificates) else {
            return Ok(None);
        };
        let d1 = problem.decision_half_degree();
        let w = Tms::new(problem.n, 2 * d1, self.w.clone())?;
        let tightness = match stored.tightness.as_str() {
            "certified" => Tightness::Certified,
            "no_measure" => Tightness::NoMeasure,
            _ => Tightness::Undecided,
        };
        certify(problem, &self.x, &w, value, &self.y, tightness, tol).map(Some)
    }
}

/// Outcome of `check-moments`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentCheckReport {
    pub version: u32,
    pub status: String,
    pub order: Option<u32>,
    pub measure: Option<MeasureFile>,
    pub moment_residual: Option<f64>,
    pub seed: u64,
}
