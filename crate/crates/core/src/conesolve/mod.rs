//! Dense primal-dual interior-point solver for conic programs
//!
//! ```text
//! minimize    c^T x
//! subject to  A x = b,   x in K = K_1 x ... x K_r
//! ```
//!
//! where each `K_i` is a free block, a nonnegative orthant, a second-order
//! cone `{(t, u) : t >= ||u||}` or a PSD cone stored as a scaled symmetric
//! vectorization (see [`crate::linalg::svec`]). The dual is
//!
//! ```text
//! maximize    b^T y
//! subject to  c - A^T y = s,   s in K*  (s = 0 on free blocks)
//! ```
//!
//! The method runs on the homogeneous self-dual embedding with
//! Nesterov-Todd scaling and a Mehrotra predictor-corrector, so infeasible
//! and unbounded programs end with a certificate instead of a stall.

mod cones;
mod ipm;
pub mod model;
mod presolve;

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{DromError, Result};
use crate::linalg::svec_len;

pub use model::{ConstraintRef, Form, LinExpr, ProgramBuilder, VarBlock};

/// One block of the variable cone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeBlock {
    Free(usize),
    Nonneg(usize),
    /// Second-order cone of total dimension `n` (head first).
    SecondOrder(usize),
    /// PSD cone of the given side; occupies `side (side + 1) / 2` slots.
    Psd(usize),
}

impl ConeBlock {
    pub fn dim(&self) -> usize {
        match *self {
            ConeBlock::Free(n) | ConeBlock::Nonneg(n) | ConeBlock::SecondOrder(n) => n,
            ConeBlock::Psd(side) => svec_len(side),
        }
    }
}

/// Standard-form conic program.
#[derive(Clone, Debug)]
pub struct ConicProgram {
    pub objective: Vec<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: Vec<f64>,
    pub cones: Vec<ConeBlock>,
}

impl ConicProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_eqs(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        let total: usize = self.cones.iter().map(ConeBlock::dim).sum();
        if total != n {
            return Err(DromError::DimensionMismatch {
                what: "cone dimensions vs variables",
                expected: n,
                found: total,
            });
        }
        if self.eq_matrix.ncols() != n {
            return Err(DromError::DimensionMismatch {
                what: "equality matrix columns",
                expected: n,
                found: self.eq_matrix.ncols(),
            });
        }
        if self.eq_matrix.nrows() != self.eq_rhs.len() {
            return Err(DromError::DimensionMismatch {
                what: "equality right-hand side",
                expected: self.eq_matrix.nrows(),
                found: self.eq_rhs.len(),
            });
        }
        for c in &self.cones {
            if let ConeBlock::SecondOrder(0) = c {
                return Err(DromError::InvalidArgument("empty second-order cone".into()));
            }
        }
        Ok(())
    }

    /// Column offset of each cone block.
    pub fn block_offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.cones.len());
        let mut off = 0;
        for c in &self.cones {
            out.push(off);
            off += c.dim();
        }
        out
    }

    /// Write the plain-text standard-form listing used for cross-checking
    /// against external solvers.
    pub fn write_listing<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# minimize c'x  s.t.  A x = b,  x in K")?;
        writeln!(w, "vars {} eqs {}", self.num_vars(), self.num_eqs())?;
        write!(w, "cones")?;
        for c in &self.cones {
            match c {
                ConeBlock::Free(n) => write!(w, " F{n}")?,
                ConeBlock::Nonneg(n) => write!(w, " L{n}")?,
                ConeBlock::SecondOrder(n) => write!(w, " Q{n}")?,
                ConeBlock::Psd(s) => write!(w, " S{s}")?,
            }
        }
        writeln!(w)?;
        writeln!(w, "c")?;
        for (j, v) in self.objective.iter().enumerate() {
            if *v != 0.0 {
                writeln!(w, "{j} {v:e}")?;
            }
        }
        writeln!(w, "A")?;
        for i in 0..self.eq_matrix.nrows() {
            for j in 0..self.eq_matrix.ncols() {
                let v = self.eq_matrix[(i, j)];
                if v != 0.0 {
                    writeln!(w, "{i} {j} {v:e}")?;
                }
            }
        }
        writeln!(w, "b")?;
        for (i, v) in self.eq_rhs.iter().enumerate() {
            if *v != 0.0 {
                writeln!(w, "{i} {v:e}")?;
            }
        }
        Ok(())
    }

    pub fn dump(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_listing(std::io::BufWriter::new(f))?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    /// stalled, but the best iterate meets the looser `tol_near`
    NearOptimal,
    PrimalInfeasible,
    DualInfeasible,
    IterLimit,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// relative primal/dual residual and gap tolerance
    pub tol: f64,
    /// residual bound for infeasibility certificates
    pub tol_cert: f64,
    /// accuracy accepted from a stalled run
    pub tol_near: f64,
    pub max_iter: usize,
    /// relative threshold for dropping dependent equality rows
    pub presolve_tol: f64,
    pub verbose: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            tol_cert: 1e-7,
            tol_near: 1e-6,
            max_iter: 200,
            presolve_tol: 1e-10,
            verbose: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct Residuals {
    /// `||A x - b||_inf / (1 + ||b||_inf)`
    pub primal: f64,
    /// `||c - A^T y - s||_inf / (1 + ||c||_inf)`
    pub dual: f64,
    /// `|c^T x - b^T y| / (1 + |c^T x|)`
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct SolverSolution {
    pub status: SolveStatus,
    pub primal: Vec<f64>,
    pub dual_eq: Vec<f64>,
    /// dual slack `c - A^T y`, laid out like `primal` (zero on free blocks)
    pub dual_cone: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    /// For `PrimalInfeasible`: `y` with `A^T y in K*`, `b^T y = 1`.
    /// For `DualInfeasible`: `x in K` with `A x = 0`, `c^T x = -1`.
    pub certificate: Option<Vec<f64>>,
    pub certificate_residual: f64,
    cone_offsets: Vec<usize>,
    cones: Vec<ConeBlock>,
}

impl SolverSolution {
    /// Primal values of cone block `i`.
    pub fn primal_block(&self, i: usize) -> &[f64] {
        let o = self.cone_offsets[i];
        &self.primal[o..o + self.cones[i].dim()]
    }

    /// Dual slack of cone block `i`.
    pub fn dual_block(&self, i: usize) -> &[f64] {
        let o = self.cone_offsets[i];
        &self.dual_cone[o..o + self.cones[i].dim()]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.primal.max(self.residuals.dual)
    }
}

/// Solve a conic program.
pub fn solve(program: &ConicProgram, options: &SolveOptions) -> Result<SolverSolution> {
    program.validate()?;
    let start = std::time::Instant::now();
    let pre = presolve::presolve(program, options.presolve_tol);
    if options.verbose {
        eprintln!(
            "presolve: {} x {} -> {} rows in {:.3?}",
            program.num_eqs(),
            program.num_vars(),
            pre.rows.len(),
            start.elapsed()
        );
    }
    let mut sol = match pre.inconsistent {
        Some(ref cert) => {
            let n = program.num_vars();
            SolverSolution {
                status: SolveStatus::PrimalInfeasible,
                primal: vec![0.0; n],
                dual_eq: vec![0.0; program.num_eqs()],
                dual_cone: vec![0.0; n],
                primal_objective: f64::NAN,
                dual_objective: f64::NAN,
                residuals: Residuals::default(),
                iterations: 0,
                certificate: Some(cert.clone()),
                certificate_residual: 0.0,
                cone_offsets: Vec::new(),
                cones: Vec::new(),
            }
        }
        None => ipm::run(program, &pre, options),
    };
    sol.cone_offsets = program.block_offsets();
    sol.cones = program.cones.clone();
    finalize(program, &mut sol);
    if options.verbose {
        eprintln!(
            "{:?} after {} iterations in {:.3?}",
            sol.status,
            sol.iterations,
            start.elapsed()
        );
    }
    Ok(sol)
}

/// Recompute objectives, residuals and certificate residuals on the
/// original (unscaled) data.
fn finalize(program: &ConicProgram, sol: &mut SolverSolution) {
    let a = &program.eq_matrix;
    let b = &program.eq_rhs;
    let c = &program.objective;
    let m = a.nrows();
    let n = a.ncols();
    let bn = crate::linalg::norm_inf(b);
    let cn = crate::linalg::norm_inf(c);
    let aty = |y: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for i in 0..m {
            if y[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                out[j] += a[(i, j)] * y[i];
            }
        }
        out
    };
    let ax = |x: &[f64]| -> Vec<f64> { (0..m).map(|i| (0..n).map(|j| a[(i, j)] * x[j]).sum()).collect() };
    match sol.status {
        SolveStatus::PrimalInfeasible => {
            if let Some(y) = sol.certificate.as_ref() {
                let by = crate::linalg::dot(b, y);
                let r = aty(y);
                // A^T y must lie in the dual cone: zero on free blocks and
                // -(A^T y) is the slack; measure its distance to K* blockwise.
                let mut viol = cone_violation(program, &r.iter().map(|v| -v).collect::<Vec<_>>());
                let offsets = program.block_offsets();
                for (k, blk) in program.cones.iter().enumerate() {
                    if let ConeBlock::Free(d) = blk {
                        for v in &r[offsets[k]..offsets[k] + d] {
                            viol = viol.max(v.abs());
                        }
                    }
                }
                sol.certificate_residual = viol / by.max(1e-300);
            }
        }
        SolveStatus::DualInfeasible => {
            if let Some(x) = sol.certificate.as_ref() {
                let cx = crate::linalg::dot(c, x);
                let r = ax(x);
                let viol = crate::linalg::norm_inf(&r).max(cone_violation(program, x));
                sol.certificate_residual = viol / (-cx).max(1e-300);
            }
        }
        _ => {
            let x = &sol.primal;
            let y = &sol.dual_eq;
            let pobj = crate::linalg::dot(c, x);
            let dobj = crate::linalg::dot(b, y);
            let r = ax(x);
            let pres = r.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max) / (1.0 + bn);
            let at = aty(y);
            let s: Vec<f64> = c.iter().zip(&at).map(|(ci, ai)| ci - ai).collect();
            // dual residual: slack must vanish on free blocks and lie in K*
            let mut dviol = 0.0f64;
            let offsets = program.block_offsets();
            for (k, blk) in program.cones.iter().enumerate() {
                if let ConeBlock::Free(d) = blk {
                    for j in offsets[k]..offsets[k] + d {
                        dviol = dviol.max(s[j].abs());
                    }
                }
            }
            dviol = dviol.max(cone_violation(program, &s));
            sol.primal_objective = pobj;
            sol.dual_objective = dobj;
            sol.residuals = Residuals {
                primal: pres,
                dual: dviol / (1.0 + cn),
                gap: (pobj - dobj).abs() / (1.0 + pobj.abs()),
            };
            sol.dual_cone = s;
        }
    }
}

/// Largest violation of cone membership for a vector laid out like the
/// variables; free blocks are ignored.
pub(crate) fn cone_violation(program: &ConicProgram, v: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    let mut off = 0;
    for blk in &program.cones {
        let d = blk.dim();
        let part = &v[off..off + d];
        let viol = match *blk {
            ConeBlock::Free(_) => 0.0,
            ConeBlock::Nonneg(_) => part.iter().fold(0.0f64, |m, &x| m.max(-x)),
            ConeBlock::SecondOrder(_) => {
                let tail: f64 = part[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
                (tail - part[0]).max(0.0)
            }
            ConeBlock::Psd(side) => {
                let m = crate::linalg::smat(part, side);
                (-crate::linalg::min_eigenvalue(&m)).max(0.0)
            }
        };
        worst = worst.max(viol);
        off += d;
    }
    worst
}

#[cfg(test)]
mod tests;
