//! Command-line front end: `solve`, `examples` and `check-moments`.

mod problem_file;
mod report_file;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::conesolve::SolveOptions;
use crate::drom::{assemble_order_k, check_moments, run, DromOptions, DromProblem, MomentCheck, SolveReport, Status};
use crate::error::{DromError, Result};
use crate::momentkit::{ExtractOptions, SemiAlgSet, Tms};
use crate::soskit::random_sos;

pub use problem_file::{
    bilinear_terms, parse_json, BilinearTerm, DecisionConstraint, Dimensions, Expected, FileOptions, HSpec, LmiSpec,
    MatrixH, MinMaxSpec, MomentBlock, PolyhedralSpec, ProblemFile, SecondOrderSpec, Term, Tolerances, MONOMIAL_ORDER,
};
pub use report_file::{
    status_name, tightness_name, CertificateFile, HistoryEntry, MeasureFile, MomentCheckReport, ReportFile,
    REPORT_VERSION,
};

pub const EXIT_CERTIFIED: i32 = 0;
pub const EXIT_INPUT_ERROR: i32 = 1;
pub const EXIT_UNDECIDED: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

/// The bundled example corpus.
pub const EXAMPLES: [(&str, &str); 6] = [
    ("ex51", include_str!("../../fixtures/ex51.json")),
    ("ex52", include_str!("../../fixtures/ex52.json")),
    ("ex53", include_str!("../../fixtures/ex53.json")),
    ("ex54", include_str!("../../fixtures/ex54.json")),
    ("ex55", include_str!("../../fixtures/ex55.json")),
    ("ex56", include_str!("../../fixtures/ex56.json")),
];

/// Load a bundled example by name.
pub fn example(name: &str) -> Result<ProblemFile> {
    let (_, text) = EXAMPLES.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        DromError::InvalidArgument(format!("unknown example `{name}`; valid names: {}", example_names()))
    })?;
    ProblemFile::from_json(text, name)
}

pub fn example_names() -> String {
    EXAMPLES.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Parser)]
#[command(
    name = "dromsos",
    version,
    about = "Moment-SOS solver for distributionally robust optimization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct SolveFlags {
    /// initial relaxation order
    #[arg(long)]
    pub order: Option<u32>,
    /// largest relaxation order
    #[arg(long)]
    pub max_order: Option<u32>,
    /// seed of the generic completion objective
    #[arg(long)]
    pub seed: Option<u64>,
    /// certificate tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    /// write the report here instead of standard output
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// append radius^2 - |xi|^2 to the support generators
    #[arg(long)]
    pub ball_radius: Option<f64>,
    /// write a listing of the initial-order conic program here
    #[arg(long)]
    pub dump_conic: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a problem file
    Solve {
        path: PathBuf,
        #[command(flatten)]
        flags: SolveFlags,
    },
    /// List the bundled examples, or run one and compare with its reference values
    Examples {
        name: Option<String>,
        #[command(flatten)]
        flags: SolveFlags,
    },
    /// Test whether a moment vector has a representing measure on a set
    CheckMoments {
        path: PathBuf,
        /// largest completion order
        #[arg(long)]
        max_order: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

/// Options from file defaults overridden by flags.
pub fn resolve_options(file: &FileOptions, flags: &SolveFlags) -> DromOptions {
    let mut o = DromOptions {
        order: flags.order.or(file.order),
        max_order: flags.max_order.or(file.max_order),
        ball_radius: flags.ball_radius.or(file.ball_radius),
        ..DromOptions::default()
    };
    if let Some(s) = flags.seed.or(file.seed) {
        o.seed = s;
    }
    if let Some(t) = flags.tol.or(file.tolerances.as_ref().and_then(|t| t.certificate)) {
        o.tol = t;
    }
    o
}

pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::Solved => EXIT_CERTIFIED,
        Status::Undecided => EXIT_UNDECIDED,
        Status::Infeasible | Status::InfeasibleOrOrderTooLow => EXIT_INFEASIBLE,
    }
}

fn emit(text: &str, report: &Option<PathBuf>, out: &mut dyn Write) -> Result<()> {
    match report {
        Some(p) => std::fs::write(p, format!("{text}\n")).map_err(|e| DromError::Input {
            path: p.display().to_string(),
            message: e.to_string(),
        }),
        None => writeln!(out, "{text}").map_err(DromError::from),
    }
}

fn dump_program(problem: &DromProblem, options: &DromOptions, path: &Path) -> Result<()> {
    let mut work = problem.clone();
    work.support = crate::drom::effective_support(problem, options.ball_radius)?;
    let k = options.order.unwrap_or(0).max(work.min_order());
    let (pb, _) = assemble_order_k(&work, k)?;
    pb.build().dump(path)
}

/// Load, solve and report; returns the driver report alongside the file.
pub fn solve_file(file: &ProblemFile, origin: &str, flags: &SolveFlags) -> Result<(DromProblem, SolveReport)> {
    let problem = file.to_problem(origin)?;
    let options = resolve_options(&file.options, flags);
    if let Some(p) = &flags.dump_conic {
        dump_program(&problem, &options, p)?;
    }
    let rep = run(&problem, &options)?;
    Ok((problem, rep))
}

fn cmd_solve(path: &Path, flags: &SolveFlags, out: &mut dyn Write) -> Result<i32> {
    let file = ProblemFile::load(path)?;
    let (_, rep) = solve_file(&file, &path.display().to_string(), flags)?;
    let report = ReportFile::from_report(&rep, file.name.clone());
    emit(&report.to_json(), &flags.report, out)?;
    Ok(exit_code(rep.status))
}

/// Comparison of a run with an example's reference values.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExampleCheck {
    pub name: String,
    pub passed: bool,
    pub lines: Vec<String>,
}

fn within(label: &str, got: f64, want: f64, tol: f64, lines: &mut Vec<String>) -> bool {
    let ok = (got - want).abs() <= tol;
    lines.push(format!(
        "{} {label}: got {got:.6}, expected {want:.6} +/- {tol:e}",
        if ok { "PASS" } else { "FAIL" }
    ));
    ok
}

/// Compare a solve report with reference values.
pub fn compare_expected(name: &str, rep: &SolveReport, exp: &Expected) -> ExampleCheck {
    let mut lines = vec![format!("status {}; {}", status_name(rep.status), rep.message)];
    let mut ok = rep.status == Status::Solved;
    ok &= within(
        "optimal value",
        rep.optimal_value,
        exp.optimal_value,
        exp.optimal_value_tol,
        &mut lines,
    );
    if let Some(k) = exp.order {
        let same = rep.order_k == k;
        lines.push(format!(
            "{} order: got {}, expected {k}",
            if same { "PASS" } else { "FAIL" },
            rep.order_k
        ));
        ok &= same;
    }
    if let Some(x) = &exp.x {
        let tol = exp.x_tol.unwrap_or(1e-2);
        // min-max input carries the epigraph variable first
        let offset = rep.x.len().saturating_sub(x.len());
        for (i, &want) in x.iter().enumerate() {
            let got = rep.x.get(offset + i).copied().unwrap_or(f64::NAN);
            ok &= within(&format!("x[{i}]"), got, want, tol, &mut lines);
        }
    }
    if let Some(atoms) = &exp.atoms {
        let tol = exp.atom_tol.unwrap_or(1e-2);
        let wtol = exp.weight_tol.unwrap_or(1e-2);
        match &rep.worst_case_measure {
            None => {
                lines.push("FAIL measure: none extracted".into());
                ok = false;
            }
            Some(mu) => {
                for (j, a) in atoms.iter().enumerate() {
                    let best = mu
                        .atoms
                        .iter()
                        .enumerate()
                        .map(|(i, u)| (i, u.iter().zip(a).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)))
                        .min_by(|x, y| x.1.total_cmp(&y.1));
                    let hit = best.is_some_and(|(_, dist)| dist <= tol);
                    lines.push(format!(
                        "{} atom {j} {a:?}: nearest distance {:.2e}",
                        if hit { "PASS" } else { "FAIL" },
                        best.map_or(f64::INFINITY, |b| b.1)
                    ));
                    ok &= hit;
                    if let (Some(ws), Some((i, _))) = (&exp.weights, best) {
                        ok &= within(&format!("weight {j}"), mu.weights[i], ws[j], wtol, &mut lines);
                    }
                }
            }
        }
    }
    ExampleCheck {
        name: name.to_string(),
        passed: ok,
        lines,
    }
}

fn cmd_examples(name: &Option<String>, flags: &SolveFlags, out: &mut dyn Write) -> Result<i32> {
    let Some(name) = name else {
        for (n, text) in EXAMPLES {
            let file = ProblemFile::from_json(text, n)?;
            writeln!(out, "{n}  {}", file.description.unwrap_or_default())?;
        }
        return Ok(EXIT_CERTIFIED);
    };
    let file = example(name)?;
    let (_, rep) = solve_file(&file, name, flags)?;
    if let Some(p) = &flags.report {
        let report = ReportFile::from_report(&rep, file.name.clone());
        emit(&report.to_json(), &Some(p.clone()), out)?;
    }
    let Some(exp) = &file.expected else {
        writeln!(out, "{name}: no reference values")?;
        return Ok(exit_code(rep.status));
    };
    let check = compare_expected(name, &rep, exp);
    for l in &check.lines {
        writeln!(out, "{name}: {l}")?;
    }
    writeln!(out, "{name}: {}", if check.passed { "PASS" } else { "FAIL" })?;
    Ok(if check.passed { EXIT_CERTIFIED } else { EXIT_UNDECIDED })
}

/// Input of `check-moments`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentFile {
    pub monomial_order: String,
    pub nvars: usize,
    pub degree: u32,
    pub moments: Vec<f64>,
    pub support: Vec<Vec<Term>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_order: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Run the moment check on a parsed file.
pub fn check_moment_file(
    file: &MomentFile,
    origin: &str,
    max_order: Option<u32>,
    seed: Option<u64>,
) -> Result<MomentCheckReport> {
    let err = |m: String| DromError::Input {
        path: origin.to_string(),
        message: m,
    };
    if file.monomial_order != MONOMIAL_ORDER {
        return Err(err(format!("at `monomial_order`: expected \"{MONOMIAL_ORDER}\"")));
    }
    let y = Tms::new(file.nvars, file.degree, file.moments.clone()).map_err(|e| err(format!("at `moments`: {e}")))?;
    let mut gens = Vec::with_capacity(file.support.len());
    for (i, g) in file.support.iter().enumerate() {
        for (j, t) in g.iter().enumerate() {
            if t.exponent.len() != file.nvars {
                return Err(err(format!(
                    "at `support[{i}][{j}].exponent`: expected {} entries",
                    file.nvars
                )));
            }
        }
        gens.push(
            crate::polycore::Poly::from_terms(file.nvars, g.iter().map(|t| (t.exponent.clone(), t.coefficient)))
                .map_err(|e| err(format!("at `support[{i}]`: {e}")))?,
        );
    }
    let set = SemiAlgSet::new(file.nvars, gens)?;
    let seed = seed.or(file.seed).unwrap_or(42);
    let t0 = file.degree.div_ceil(2);
    let l_max = max_order.or(file.max_order).unwrap_or(t0 + 4);
    let r = random_sos(seed, file.nvars, t0);
    let outcome = check_moments(
        &y,
        &set,
        &r,
        l_max,
        &SolveOptions::default(),
        &ExtractOptions::default(),
    )?;
    Ok(match outcome {
        MomentCheck::Measure(mu, l) => {
            let m = mu.moments(file.degree);
            let res = m
                .values()
                .iter()
                .zip(y.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            MomentCheckReport {
                version: REPORT_VERSION,
                status: "feasible".into(),
                order: Some(l),
                measure: Some(MeasureFile::from(&mu)),
                moment_residual: Some(res),
                seed,
            }
        }
        MomentCheck::NoMeasure(l) => MomentCheckReport {
            version: REPORT_VERSION,
            status: "infeasible".into(),
            order: Some(l),
            measure: None,
            moment_residual: None,
            seed,
        },
        MomentCheck::Undecided => MomentCheckReport {
            version: REPORT_VERSION,
            status: "undecided".into(),
            order: Some(l_max),
            measure: None,
            moment_residual: None,
            seed,
        },
    })
}

fn cmd_check_moments(
    path: &Path,
    max_order: Option<u32>,
    seed: Option<u64>,
    report: &Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<i32> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| DromError::Input {
        path: origin.clone(),
        message: e.to_string(),
    })?;
    let file: MomentFile = parse_json(&text, &origin)?;
    let rep = check_moment_file(&file, &origin, max_order, seed)?;
    emit(
        &serde_json::to_string_pretty(&rep).expect("reports always serialize"),
        report,
        out,
    )?;
    Ok(match rep.status.as_str() {
        "feasible" => EXIT_CERTIFIED,
        "infeasible" => EXIT_INFEASIBLE,
        _ => EXIT_UNDECIDED,
    })
}

/// Dispatch a parsed command line; errors print to `err` and map to exit 1.
pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Solve { path, flags } => cmd_solve(path, flags, out),
        Command::Examples { name, flags } => cmd_examples(name, flags, out),
        Command::CheckMoments {
            path,
            max_order,
            seed,
            report,
        } => cmd_check_moments(path, *max_order, *seed, report, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT_ERROR
        }
    }
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INPUT_ERROR
            } else {
                EXIT_CERTIFIED
            };
        }
    };
    execute(&cli, &mut std::io::stdout(), &mut std::io::stderr())
}
