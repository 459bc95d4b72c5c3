//! Distributionally robust problems with moment ambiguity sets: the problem
//! model, conic closures of the moment set, the order-`k` relaxation, optimizer
//! recovery, certificates, the driver loop and the min-max reduction.

mod driver;
mod minmax;

use nalgebra::DMatrix;

use crate::conesolve::{ConstraintRef, Form, LinExpr, ProgramBuilder, SolverSolution, VarBlock};
use crate::error::{DromError, Result};
use crate::momentkit::{compile_cone_sg, SemiAlgSet, Tms};
use crate::polycore::{basis, binomial, Exponent, Poly};
use crate::soskit::{compile_qm_membership, PolyExpr, QmMembership, QuadraticModuleSpec};

pub use driver::{
    certify, check_moments, effective_support, run, Certificates, DromOptions, MomentCheck, SolveReport, Status,
    Tightness,
};
pub use minmax::minmax_to_drom;

/// Shape of one convex block describing the moment set `Y`.
#[derive(Clone, Debug, PartialEq)]
pub enum ConeYKind {
    /// `T y + u >= 0`; the first `equalities` rows hold with equality.
    Polyhedral {
        t: DMatrix<f64>,
        u: Vec<f64>,
        equalities: usize,
    },
    /// `sum_i y_i A_i + B >= 0` (PSD); `Y` must be bounded for the conic
    /// closure to be exact.
    Lmi {
        coeff_mats: Vec<DMatrix<f64>>,
        b: DMatrix<f64>,
        bounded: bool,
    },
    /// `rows * y + offset` lies in the second-order cone (first entry is the
    /// axis).
    SecondOrder { rows: DMatrix<f64>, offset: Vec<f64> },
}

/// One block of `Y`. A homogenized block already describes a cone in `y`
/// alone and must carry a zero offset; otherwise its offset is multiplied by
/// the shared scalar `s >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeYBlock {
    pub kind: ConeYKind,
    pub homogenized: bool,
}

impl ConeYBlock {
    pub fn polyhedral(t: DMatrix<f64>, u: Vec<f64>) -> Self {
        ConeYBlock {
            kind: ConeYKind::Polyhedral { t, u, equalities: 0 },
            homogenized: false,
        }
    }

    pub fn polyhedral_with_equalities(t: DMatrix<f64>, u: Vec<f64>, equalities: usize) -> Self {
        ConeYBlock {
            kind: ConeYKind::Polyhedral { t, u, equalities },
            homogenized: false,
        }
    }

    pub fn lmi(coeff_mats: Vec<DMatrix<f64>>, b: DMatrix<f64>, bounded: bool) -> Self {
        ConeYBlock {
            kind: ConeYKind::Lmi { coeff_mats, b, bounded },
            homogenized: false,
        }
    }

    pub fn second_order(rows: DMatrix<f64>, offset: Vec<f64>) -> Self {
        ConeYBlock {
            kind: ConeYKind::SecondOrder { rows, offset },
            homogenized: false,
        }
    }

    pub fn homogenized(mut self) -> Self {
        self.homogenized = true;
        self
    }

    fn offset_is_zero(&self) -> bool {
        match &self.kind {
            ConeYKind::Polyhedral { u, .. } => u.iter().all(|&v| v == 0.0),
            ConeYKind::Lmi { b, .. } => b.iter().all(|&v| v == 0.0),
            ConeYKind::SecondOrder { offset, .. } => offset.iter().all(|&v| v == 0.0),
        }
    }

    /// Shape checks against the moment vector length.
    pub fn validate(&self, y_dim: usize) -> Result<()> {
        let bad = |m: String| Err(DromError::ConeY(m));
        match &self.kind {
            ConeYKind::Polyhedral { t, u, equalities } => {
                if t.ncols() != y_dim {
                    return bad(format!("T has {} columns, expected {y_dim}", t.ncols()));
                }
                if u.len() != t.nrows() {
                    return bad(format!("u has length {}, expected {}", u.len(), t.nrows()));
                }
                if *equalities > t.nrows() {
                    return bad(format!("{equalities} equalities declared for {} rows", t.nrows()));
                }
            }
            ConeYKind::Lmi { coeff_mats, b, bounded } => {
                if !bounded {
                    return bad("linear matrix inequality blocks must be declared bounded".into());
                }
                if coeff_mats.len() != y_dim {
                    return bad(format!("{} coefficient matrices, expected {y_dim}", coeff_mats.len()));
                }
                let side = b.nrows();
                if b.ncols() != side || (b - b.transpose()).amax() > 1e-12 {
                    return bad("B must be square and symmetric".into());
                }
                for (i, m) in coeff_mats.iter().enumerate() {
                    if m.nrows() != side || m.ncols() != side || (m - m.transpose()).amax() > 1e-12 {
                        return bad(format!("coefficient matrix {i} must be symmetric of side {side}"));
                    }
                }
            }
            ConeYKind::SecondOrder { rows, offset } => {
                if rows.ncols() != y_dim {
                    return bad(format!("rows have {} columns, expected {y_dim}", rows.ncols()));
                }
                if rows.nrows() == 0 || offset.len() != rows.nrows() {
                    return bad(format!("offset has length {}, expected {}", offset.len(), rows.nrows()));
                }
            }
        }
        if self.homogenized && !self.offset_is_zero() {
            return bad("a homogenized block must have a zero offset".into());
        }
        Ok(())
    }

    /// Largest violation of the block's constraints at `(y, s)`.
    pub fn violation(&self, y: &[f64], s: f64) -> f64 {
        let s = if self.homogenized { 0.0 } else { s };
        match &self.kind {
            ConeYKind::Polyhedral { t, u, equalities } => {
                let mut worst = 0.0f64;
                for i in 0..t.nrows() {
                    let v: f64 = t.row(i).iter().zip(y).map(|(a, b)| a * b).sum::<f64>() + s * u[i];
                    worst = worst.max(if i < *equalities { v.abs() } else { -v });
                }
                worst
            }
            ConeYKind::Lmi { coeff_mats, b, .. } => {
                let mut m = b * s;
                for (a, &v) in coeff_mats.iter().zip(y) {
                    m += a * v;
                }
                (-crate::linalg::min_eigenvalue(&m)).max(0.0)
            }
            ConeYKind::SecondOrder { rows, offset } => {
                let v: Vec<f64> = (0..rows.nrows())
                    .map(|i| rows.row(i).iter().zip(y).map(|(a, b)| a * b).sum::<f64>() + s * offset[i])
                    .collect();
                let tail = v[1..].iter().map(|t| t * t).sum::<f64>().sqrt();
                (tail - v[0]).max(0.0)
            }
        }
    }
}

/// Handles to the constraints emitted for the moment-set closure.
#[derive(Clone, Debug)]
pub struct ConeYHandles {
    /// the homogenizing scalar, when any block uses it
    pub homogenizer: Option<VarBlock>,
    pub blocks: Vec<ConstraintRef>,
}

/// Emit `y in closure(cone(Y))`: one conic block per moment-set block, all
/// sharing a single homogenizing scalar `s >= 0`.
pub fn build_cone_y(pb: &mut ProgramBuilder, blocks: &[ConeYBlock], y: &[LinExpr]) -> Result<ConeYHandles> {
    for b in blocks {
        b.validate(y.len())?;
    }
    let homogenizer = if blocks.iter().any(|b| !b.homogenized && !b.offset_is_zero()) {
        Some(pb.add_nonneg(1))
    } else {
        None
    };
    let s_expr = |coef: f64| match homogenizer {
        Some(s) => s.var(0).scaled(coef),
        None => LinExpr::new(),
    };
    let row_expr = |row: nalgebra::DMatrixView<f64>, off: f64| {
        let mut e = s_expr(off);
        for (j, &a) in row.iter().enumerate() {
            if a != 0.0 {
                e.add_scaled(a, &y[j]);
            }
        }
        e
    };
    let mut handles = Vec::with_capacity(blocks.len());
    for b in blocks {
        let vb = match &b.kind {
            ConeYKind::Polyhedral { t, u, equalities } => {
                let rows: Vec<LinExpr> = (0..t.nrows()).map(|i| row_expr(t.rows(i, 1), u[i])).collect();
                for r in &rows[..*equalities] {
                    pb.add_eq(r.clone());
                }
                pb.add_nonneg_constraint(&rows[*equalities..])
            }
            ConeYKind::Lmi { coeff_mats, b: bm, .. } => pb.add_lmi(bm.nrows(), |i, j| {
                let mut e = s_expr(bm[(i, j)]);
                for (k, a) in coeff_mats.iter().enumerate() {
                    if a[(i, j)] != 0.0 {
                        e.add_scaled(a[(i, j)], &y[k]);
                    }
                }
                e
            }),
            ConeYKind::SecondOrder { rows, offset } => {
                let exprs: Vec<LinExpr> = (0..rows.nrows())
                    .map(|i| row_expr(rows.rows(i, 1), offset[i]))
                    .collect();
                pb.add_soc_constraint(&exprs)
            }
        };
        handles.push(vb);
    }
    Ok(ConeYHandles {
        homogenizer,
        blocks: handles,
    })
}

/// A distributionally robust problem
/// `min f(x)` s.t. `c(x) >= 0` and `inf_mu E_mu[h(x, xi)] >= 0`, where
/// `h(x, xi) = (A x + b)^T [xi]_d` and the ambiguity set holds the measures
/// supported on `support` whose degree-`d` moments lie in `Y`.
#[derive(Clone, Debug, PartialEq)]
pub struct DromProblem {
    pub n: usize,
    pub p: usize,
    pub d: u32,
    pub f: Poly,
    pub c: Vec<Poly>,
    pub support: SemiAlgSet,
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
    pub y_blocks: Vec<ConeYBlock>,
}

impl DromProblem {
    /// Validated constructor.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        p: usize,
        d: u32,
        f: Poly,
        c: Vec<Poly>,
        support: SemiAlgSet,
        a: DMatrix<f64>,
        b: Vec<f64>,
        y_blocks: Vec<ConeYBlock>,
    ) -> Result<Self> {
        let prob = DromProblem {
            n,
            p,
            d,
            f,
            c,
            support,
            a,
            b,
            y_blocks,
        };
        prob.validate()?;
        Ok(prob)
    }

    /// Build `(A, b)` from `h` written as a polynomial in `(x, xi)` (decision
    /// variables first) that is affine in `x`.
    #[allow(clippy::too_many_arguments)]
    pub fn with_h_poly(
        n: usize,
        p: usize,
        f: Poly,
        c: Vec<Poly>,
        support: SemiAlgSet,
        h: &Poly,
        y_blocks: Vec<ConeYBlock>,
        d: Option<u32>,
    ) -> Result<Self> {
        let (a, b, dh) = affine_split(h, n, p, d)?;
        DromProblem::new(n, p, d.unwrap_or(dh), f, c, support, a, b, y_blocks)
    }

    pub fn y_dim(&self) -> usize {
        binomial(self.p + self.d as usize, self.d as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.y_dim();
        if self.f.nvars() != self.n {
            return Err(DromError::VariableMismatch {
                expected: self.n,
                found: self.f.nvars(),
            });
        }
        for ci in &self.c {
            if ci.nvars() != self.n {
                return Err(DromError::VariableMismatch {
                    expected: self.n,
                    found: ci.nvars(),
                });
            }
        }
        if self.support.nvars() != self.p {
            return Err(DromError::VariableMismatch {
                expected: self.p,
                found: self.support.nvars(),
            });
        }
        if self.a.nrows() != m {
            return Err(DromError::DimensionMismatch {
                what: "rows of A",
                expected: m,
                found: self.a.nrows(),
            });
        }
        if self.a.ncols() != self.n {
            return Err(DromError::DimensionMismatch {
                what: "columns of A",
                expected: self.n,
                found: self.a.ncols(),
            });
        }
        if self.b.len() != m {
            return Err(DromError::DimensionMismatch {
                what: "length of b",
                expected: m,
                found: self.b.len(),
            });
        }
        for blk in &self.y_blocks {
            blk.validate(m)?;
        }
        Ok(())
    }

    /// `h` as a polynomial in `(x, xi)`.
    pub fn h_poly(&self) -> Poly {
        let nv = self.n + self.p;
        let bs = basis(self.p, self.d);
        let mut h = Poly::zero(nv);
        for (r, alpha) in bs.iter().enumerate() {
            let mut pw = vec![0u32; nv];
            pw[self.n..].copy_from_slice(alpha.powers());
            if self.b[r] != 0.0 {
                h.add_term(Exponent::new(pw.clone()), self.b[r]);
            }
            for j in 0..self.n {
                let v = self.a[(r, j)];
                if v != 0.0 {
                    let mut e = pw.clone();
                    e[j] += 1;
                    h.add_term(Exponent::new(e), v);
                }
            }
        }
        h
    }

    /// Coefficient vector `A x + b` of `h(x, .)` in the graded basis.
    pub fn h_coefficients(&self, x: &[f64]) -> Vec<f64> {
        (0..self.b.len())
            .map(|r| self.b[r] + (0..self.n).map(|j| self.a[(r, j)] * x[j]).sum::<f64>())
            .collect()
    }

    /// `h(x, .)` as a polynomial in `xi`.
    pub fn h_at(&self, x: &[f64]) -> Poly {
        Poly::from_coefficients(&basis(self.p, self.d), &self.h_coefficients(x))
    }

    /// Half degree of the quadratic module on the decision side.
    pub fn decision_half_degree(&self) -> u32 {
        let mut d1 = self.f.degree().div_ceil(2).max(1);
        for ci in &self.c {
            d1 = d1.max(ci.degree().div_ceil(2));
        }
        d1
    }

    /// Smallest relaxation order allowed by the data.
    pub fn min_order(&self) -> u32 {
        self.d.div_ceil(2).max(self.support.degree().div_ceil(2)).max(1)
    }

    /// Largest constraint violation of `y` against the moment set blocks,
    /// with the homogenizing scalar fixed to `s`.
    pub fn cone_y_violation(&self, y: &[f64], s: f64) -> f64 {
        self.y_blocks.iter().map(|b| b.violation(y, s)).fold(0.0, f64::max)
    }
}

/// Split a polynomial in `(x, xi)` that is affine in `x` into the matrix
/// `A` and vector `b` with `h = (A x + b)^T [xi]_d`.
pub(crate) fn affine_split(h: &Poly, n: usize, p: usize, d: Option<u32>) -> Result<(DMatrix<f64>, Vec<f64>, u32)> {
    if h.nvars() != n + p {
        return Err(DromError::VariableMismatch {
            expected: n + p,
            found: h.nvars(),
        });
    }
    let mut dh = 0;
    for (e, _) in h.terms() {
        let xdeg: u32 = e.powers()[..n].iter().sum();
        if xdeg > 1 {
            return Err(DromError::NotAffine(format!("term {:?} has degree {xdeg} in x", e)));
        }
        dh = dh.max(e.powers()[n..].iter().sum());
    }
    let d = match d {
        Some(d) if d < dh => {
            return Err(DromError::DegreeViolation {
                what: "random polynomial degree in xi",
                degree: dh,
                bound: d,
            })
        }
        Some(d) => d,
        None => dh,
    };
    let bs = basis(p, d);
    let mut a = DMatrix::zeros(bs.len(), n);
    let mut b = vec![0.0; bs.len()];
    for (e, c) in h.terms() {
        let r = crate::polycore::graded_index(&Exponent::new(e.powers()[n..].to_vec()));
        match e.powers()[..n].iter().position(|&v| v == 1) {
            Some(j) => a[(r, j)] += c,
            None => b[r] += c,
        }
    }
    Ok((a, b, d))
}

/// Where each quantity of the order-`k` relaxation lives in the program.
#[derive(Clone, Debug)]
pub struct IndexMaps {
    pub order: u32,
    /// half degree `d1` of the decision-side quadratic module
    pub decision_half_degree: u32,
    pub gamma: VarBlock,
    /// free block holding `z` (degree `2k`); `y` is its first `y_len` entries
    pub z: VarBlock,
    pub y_len: usize,
    pub nvars_random: usize,
    pub moment_blocks: Vec<ConstraintRef>,
    pub cone_y: ConeYHandles,
    /// Gram blocks and coefficient rows; the unit-generator Gram block is
    /// first and its dual slack is the moment matrix of `w`
    pub membership: QmMembership,
}

impl IndexMaps {
    pub fn gamma_value(&self, sol: &SolverSolution) -> f64 {
        self.gamma.values(sol)[0]
    }

    pub fn z_value(&self, sol: &SolverSolution) -> Result<Tms> {
        Tms::new(self.nvars_random, 2 * self.order, self.z.values(sol).to_vec())
    }

    pub fn y_value(&self, sol: &SolverSolution) -> Vec<f64> {
        self.z.values(sol)[..self.y_len].to_vec()
    }

    pub fn homogenizer_value(&self, sol: &SolverSolution) -> f64 {
        self.cone_y.homogenizer.map_or(0.0, |s| s.values(sol)[0])
    }
}

/// Assemble the order-`k` relaxation
/// `max gamma - <b, y>` s.t. `f - y^T A x - gamma in Q(c)_{2 d1}`,
/// `z in S[g]_{2k}`, `y = z|_d`, `y in closure(cone(Y))`.
/// The truncation `y = z|_d` is realized by sharing variables.
pub fn assemble_order_k(problem: &DromProblem, k: u32) -> Result<(ProgramBuilder, IndexMaps)> {
    problem.validate()?;
    let need = problem.d.max(problem.support.degree());
    if 2 * k < need {
        return Err(DromError::DegreeViolation {
            what: "relaxation order",
            degree: 2 * k,
            bound: need,
        });
    }
    let n = problem.n;
    let p = problem.p;
    let mut pb = ProgramBuilder::with_form(Form::Inequality);
    let gamma = pb.add_free(1);
    let zlen = binomial(p + 2 * k as usize, 2 * k as usize);
    let z = pb.add_free(zlen);
    let y_len = problem.y_dim();
    let y: Vec<LinExpr> = (0..y_len).map(|i| z.var(i)).collect();

    let mut moment_blocks = Vec::new();
    for map in compile_cone_sg(&problem.support, 2 * k)? {
        moment_blocks.push(pb.add_lmi(map.side(), |i, j| {
            let mut e = LinExpr::new();
            for &(pos, c) in map.entry(i, j) {
                e.add_term(z.col(pos), c);
            }
            e
        }));
    }
    let cone_y = build_cone_y(&mut pb, &problem.y_blocks, &y)?;

    // f - y^T A x - gamma
    let mut target = PolyExpr::from_poly(&problem.f);
    target.add_term(Exponent::zero(n), &gamma.var(0).scaled(-1.0));
    for j in 0..n {
        let mut coef = LinExpr::new();
        for (r, yr) in y.iter().enumerate() {
            let v = problem.a[(r, j)];
            if v != 0.0 {
                coef.add_scaled(-v, yr);
            }
        }
        target.add_term(Exponent::unit(n, j), &coef);
    }
    let d1 = problem.decision_half_degree();
    let qm = QuadraticModuleSpec::new(n, &problem.c, d1)?;
    let membership = compile_qm_membership(&mut pb, &target, &qm)?;

    let mut obj = gamma.var(0);
    for (r, yr) in y.iter().enumerate() {
        if problem.b[r] != 0.0 {
            obj.add_scaled(-problem.b[r], yr);
        }
    }
    pb.maximize(obj);
    Ok((
        pb,
        IndexMaps {
            order: k,
            decision_half_degree: d1,
            gamma,
            z,
            y_len,
            nvars_random: p,
            moment_blocks,
            cone_y,
            membership,
        },
    ))
}

/// Read `w*` from the dual slack of the unit-generator Gram block (it equals
/// `M_{d1}[w*]`), normalize `w_0 = 1` and project `x* = pi(w*)`.
pub fn recover_primal(sol: &SolverSolution, maps: &IndexMaps, n: usize) -> Result<(Vec<f64>, Tms)> {
    let d1 = maps.decision_half_degree;
    let gram = maps
        .membership
        .gram_blocks
        .first()
        .ok_or_else(|| DromError::Recovery("no unit-generator Gram block".into()))?;
    let s = gram.dual_matrix(sol);
    let gb = &maps.membership.gram_bases[0];
    let full = basis(n, 2 * d1);
    let mut sum = vec![0.0; full.len()];
    let mut count = vec![0usize; full.len()];
    for (i, bi) in gb.iter().enumerate() {
        for (j, bj) in gb.iter().enumerate() {
            let pos = crate::polycore::graded_index(&bi.add(bj));
            sum[pos] += s[(i, j)];
            count[pos] += 1;
        }
    }
    let w0 = sum[0] / count[0].max(1) as f64;
    if !(w0 > 1e-10) {
        return Err(DromError::Recovery(format!("leading moment {w0:.3e} vanishes")));
    }
    let w: Vec<f64> = sum.iter().zip(&count).map(|(v, &c)| v / (c as f64 * w0)).collect();
    let w = Tms::new(n, 2 * d1, w)?;
    let x = w.first_moments();
    Ok((x, w))
}

#[cfg(test)]
mod tests;
