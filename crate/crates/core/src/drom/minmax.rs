//! Epigraph reduction of `min_x max_mu E_mu[F(x, xi)]`.

use super::{affine_split, ConeYBlock, DromProblem};
use crate::error::{DromError, Result};
use crate::momentkit::SemiAlgSet;
use crate::polycore::Poly;

/// Rewrite `min_{x in X} sup_mu E_mu[F(x, xi)]` as the problem in `(x0, x)`:
/// `min x0` s.t. `inf_mu E_mu[x0 - F(x, xi)] >= 0`, `x in X`.
///
/// `objective` is a polynomial in `(x, xi)` (decision variables first),
/// affine in `x`; `x_constraints` are polynomials in `x`. The moment set
/// must pin the mass to one for the reduction to be exact.
pub fn minmax_to_drom(
    objective: &Poly,
    n: usize,
    x_constraints: &[Poly],
    support: SemiAlgSet,
    y_blocks: Vec<ConeYBlock>,
    d: Option<u32>,
) -> Result<DromProblem> {
    let p = support.nvars();
    if objective.nvars() != n + p {
        return Err(DromError::VariableMismatch {
            expected: n + p,
            found: objective.nvars(),
        });
    }
    // (x, xi) -> (x0, x, xi)
    let shift: Vec<usize> = (1..=n + p).collect();
    let mut h = -&objective.embed(n + p + 1, &shift);
    h.add_term(crate::polycore::Exponent::unit(n + p + 1, 0), 1.0);
    let (a, b, dh) = affine_split(&h, n + 1, p, d)?;
    let xs: Vec<usize> = (1..=n).collect();
    let mut c = Vec::with_capacity(x_constraints.len());
    for ci in x_constraints {
        if ci.nvars() != n {
            return Err(DromError::VariableMismatch {
                expected: n,
                found: ci.nvars(),
            });
        }
        c.push(ci.embed(n + 1, &xs));
    }
    DromProblem::new(n + 1, p, dh, Poly::var(n + 1, 0), c, support, a, b, y_blocks)
}
