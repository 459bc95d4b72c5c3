//! Moment completion: extend a degree-`d` sequence to a degree-`2l` one in
//! `S[g]_{2l}` while minimizing a generic SOS functional.

use super::{compile_cone_sg, SemiAlgSet, Tms};
use crate::conesolve::{solve, Form, LinExpr, ProgramBuilder, SolveOptions, SolveStatus};
use crate::error::{DromError, Result};
use crate::polycore::{basis, graded_index, Poly};

/// Result of a completion solve.
#[derive(Clone, Debug)]
pub enum AtmpOutcome {
    /// Certified: no extension exists, so `y` admits no representing
    /// measure supported on the set.
    Infeasible,
    /// The solver could not decide (status, certificate residual).
    Inconclusive(SolveStatus),
    Feasible(Tms),
}

/// Minimize `<R, w>` over `w in S[g]_{2l}` with `w|_d = y`.
pub fn atmp_solve(y: &Tms, g: &SemiAlgSet, r: &Poly, l: u32, options: &SolveOptions) -> Result<AtmpOutcome> {
    let p = y.nvars();
    if g.nvars() != p || r.nvars() != p {
        return Err(DromError::VariableMismatch {
            expected: p,
            found: if g.nvars() != p { g.nvars() } else { r.nvars() },
        });
    }
    let two_l = 2 * l;
    let need = r.degree().max(g.degree()).max(y.degree());
    if two_l < need {
        return Err(DromError::DegreeViolation {
            what: "completion order",
            degree: two_l,
            bound: need,
        });
    }
    let full = basis(p, two_l);
    let fixed = y.len();
    // only the moments above degree d are unknowns
    let mut pb = ProgramBuilder::with_form(Form::Inequality);
    let free = pb.add_free(full.len() - fixed);
    let moment = |k: usize| -> LinExpr {
        if k < fixed {
            LinExpr::constant(y.values()[k])
        } else {
            free.var(k - fixed)
        }
    };
    for map in compile_cone_sg(g, two_l)? {
        pb.add_lmi(map.side(), |i, j| {
            let mut e = LinExpr::new();
            for &(k, c) in map.entry(i, j) {
                e.add_scaled(c, &moment(k));
            }
            e
        });
    }
    let mut obj = LinExpr::new();
    for (alpha, c) in r.terms() {
        obj.add_scaled(c, &moment(graded_index(alpha)));
    }
    pb.minimize(obj);
    let sol = solve(&pb.build(), options)?;
    match sol.status {
        SolveStatus::Optimal | SolveStatus::NearOptimal => {
            let mut w = y.values().to_vec();
            w.extend_from_slice(free.values(&sol));
            Ok(AtmpOutcome::Feasible(Tms::new(p, two_l, w)?))
        }
        _ if pb.model_status(&sol) == SolveStatus::PrimalInfeasible && sol.certificate_residual <= options.tol_cert => {
            Ok(AtmpOutcome::Infeasible)
        }
        _ => Ok(AtmpOutcome::Inconclusive(pb.model_status(&sol))),
    }
}
