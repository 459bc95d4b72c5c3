//! A thin modeling layer over [`ConicProgram`]: variable blocks, affine
//! expressions, and constraints that are turned into slack cone blocks plus
//! equality rows.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::{ConeBlock, ConicProgram, SolveStatus, SolverSolution};
use crate::linalg::{svec_index, svec_len};

/// Affine expression `sum_j coef_j x_j + constant`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    terms: BTreeMap<usize, f64>,
    constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn var(j: usize) -> Self {
        Self::term(j, 1.0)
    }

    pub fn term(j: usize, coef: f64) -> Self {
        let mut e = Self::default();
        e.add_term(j, coef);
        e
    }

    pub fn add_term(&mut self, j: usize, coef: f64) -> &mut Self {
        if coef != 0.0 {
            let v = self.terms.entry(j).or_insert(0.0);
            *v += coef;
            if *v == 0.0 {
                self.terms.remove(&j);
            }
        }
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    /// `self += coef * other`
    pub fn add_scaled(&mut self, coef: f64, other: &LinExpr) -> &mut Self {
        for (&j, &v) in &other.terms {
            self.add_term(j, coef * v);
        }
        self.constant += coef * other.constant;
        self
    }

    pub fn scaled(&self, coef: f64) -> LinExpr {
        let mut out = LinExpr::new();
        out.add_scaled(coef, self);
        out
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.terms.iter().map(|(&j, &v)| (j, v))
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(&j, &v)| v * x[j]).sum::<f64>()
    }
}

impl std::ops::Add<&LinExpr> for &LinExpr {
    type Output = LinExpr;
    fn add(self, rhs: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        out.add_scaled(1.0, rhs);
        out
    }
}

impl std::ops::Sub<&LinExpr> for &LinExpr {
    type Output = LinExpr;
    fn sub(self, rhs: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        out.add_scaled(-1.0, rhs);
        out
    }
}

/// How a [`ProgramBuilder`] hands its model to the solver.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Form {
    /// Variables are the solver's primal columns; every affine constraint
    /// gets a slack block and one equality row per coordinate.
    #[default]
    Standard,
    /// Variables are the solver's dual multipliers and every constraint is a
    /// column block, so the number of equality rows equals the number of
    /// variables. Preferable when cone constraints on affine expressions
    /// outnumber the variables.
    Inequality,
}

/// Handle to a contiguous block of variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarBlock {
    pub offset: usize,
    pub cone: ConeBlock,
    form: Form,
    /// solver cone block holding the values (standard form) or the
    /// multiplier of the membership constraint (inequality form)
    block: Option<usize>,
}

impl VarBlock {
    pub fn len(&self) -> usize {
        self.cone.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Column of the `i`-th variable of the block.
    pub fn col(&self, i: usize) -> usize {
        debug_assert!(i < self.len());
        self.offset + i
    }

    pub fn var(&self, i: usize) -> LinExpr {
        LinExpr::var(self.col(i))
    }

    /// Matrix entry `(i, j)` of a PSD block as an expression in the scaled
    /// vectorization.
    pub fn entry(&self, i: usize, j: usize) -> LinExpr {
        let ConeBlock::Psd(side) = self.cone else {
            panic!("entry() on a non-PSD block");
        };
        let k = self.offset + svec_index(side, i, j);
        if i == j {
            LinExpr::var(k)
        } else {
            LinExpr::term(k, std::f64::consts::FRAC_1_SQRT_2)
        }
    }

    pub fn values<'a>(&self, sol: &'a SolverSolution) -> &'a [f64] {
        match self.form {
            Form::Standard => sol.primal_block(self.block.expect("standard-form blocks are solver blocks")),
            Form::Inequality => &sol.dual_eq[self.offset..self.offset + self.len()],
        }
    }

    /// Primal matrix of a PSD block.
    pub fn primal_matrix(&self, sol: &SolverSolution) -> DMatrix<f64> {
        let ConeBlock::Psd(side) = self.cone else {
            panic!("primal_matrix() on a non-PSD block");
        };
        crate::linalg::smat(self.values(sol), side)
    }

    /// Dual slack matrix of a PSD block: the multiplier of its membership
    /// constraint.
    pub fn dual_matrix(&self, sol: &SolverSolution) -> DMatrix<f64> {
        let ConeBlock::Psd(side) = self.cone else {
            panic!("dual_matrix() on a non-PSD block");
        };
        let block = self.block.expect("PSD blocks always map to a solver block");
        let v = match self.form {
            Form::Standard => sol.dual_block(block),
            Form::Inequality => sol.primal_block(block),
        };
        crate::linalg::smat(v, side)
    }
}

/// Handle to a cone constraint on affine expressions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConstraintRef {
    pub cone: ConeBlock,
    form: Form,
    block: usize,
}

impl ConstraintRef {
    pub fn len(&self) -> usize {
        self.cone.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multiplier of the constraint (an element of the dual cone).
    pub fn multiplier<'a>(&self, sol: &'a SolverSolution) -> &'a [f64] {
        match self.form {
            Form::Standard => sol.dual_block(self.block),
            Form::Inequality => sol.primal_block(self.block),
        }
    }
}

/// Incrementally built conic program.
#[derive(Clone, Debug, Default)]
pub struct ProgramBuilder {
    form: Form,
    /// variable blocks (standard form) or variable cones (inequality form)
    cones: Vec<ConeBlock>,
    nvars: usize,
    rows: Vec<LinExpr>,
    /// inequality form: cone constraints, one expression per coordinate
    constraints: Vec<(ConeBlock, Vec<LinExpr>)>,
    objective: LinExpr,
    maximize: bool,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_form(form: Form) -> Self {
        ProgramBuilder {
            form,
            ..Self::default()
        }
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn num_vars(&self) -> usize {
        self.nvars
    }

    /// Equality constraints added so far.
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    fn push_block(&mut self, cone: ConeBlock) -> VarBlock {
        let offset = self.nvars;
        self.nvars += cone.dim();
        let block = match self.form {
            Form::Standard => {
                self.cones.push(cone);
                Some(self.cones.len() - 1)
            }
            Form::Inequality => {
                self.cones.push(cone);
                match cone {
                    ConeBlock::Free(_) => None,
                    _ => {
                        let exprs = (offset..offset + cone.dim()).map(LinExpr::var).collect();
                        Some(self.push_constraint(cone, exprs).block)
                    }
                }
            }
        };
        VarBlock {
            offset,
            cone,
            form: self.form,
            block,
        }
    }

    fn push_constraint(&mut self, cone: ConeBlock, exprs: Vec<LinExpr>) -> ConstraintRef {
        self.constraints.push((cone, exprs));
        ConstraintRef {
            cone,
            form: self.form,
            block: self.constraints.len() - 1,
        }
    }

    /// Standard form: constrain `exprs` to `cone` through a slack block.
    fn slack_constraint(&mut self, cone: ConeBlock, exprs: Vec<LinExpr>) -> ConstraintRef {
        match self.form {
            Form::Inequality => self.push_constraint(cone, exprs),
            Form::Standard => {
                let s = self.push_block(cone);
                for (i, e) in exprs.into_iter().enumerate() {
                    let mut r = e;
                    r.add_term(s.col(i), -1.0);
                    self.add_eq(r);
                }
                ConstraintRef {
                    cone,
                    form: Form::Standard,
                    block: s.block.expect("standard-form blocks are solver blocks"),
                }
            }
        }
    }

    pub fn add_free(&mut self, n: usize) -> VarBlock {
        self.push_block(ConeBlock::Free(n))
    }

    pub fn add_nonneg(&mut self, n: usize) -> VarBlock {
        self.push_block(ConeBlock::Nonneg(n))
    }

    pub fn add_soc(&mut self, n: usize) -> VarBlock {
        self.push_block(ConeBlock::SecondOrder(n))
    }

    pub fn add_psd(&mut self, side: usize) -> VarBlock {
        self.push_block(ConeBlock::Psd(side))
    }

    /// Constrain `expr = 0`; returns the index among equality constraints.
    pub fn add_eq(&mut self, expr: LinExpr) -> usize {
        self.rows.push(expr);
        self.rows.len() - 1
    }

    /// Constrain every expression to be `>= 0`.
    pub fn add_nonneg_constraint(&mut self, exprs: &[LinExpr]) -> ConstraintRef {
        self.slack_constraint(ConeBlock::Nonneg(exprs.len()), exprs.to_vec())
    }

    /// Constrain `(exprs[0], exprs[1..])` to the second-order cone.
    pub fn add_soc_constraint(&mut self, exprs: &[LinExpr]) -> ConstraintRef {
        self.slack_constraint(ConeBlock::SecondOrder(exprs.len()), exprs.to_vec())
    }

    /// Constrain the symmetric matrix with entries `entry(i, j)` (`i <= j`)
    /// to be PSD.
    pub fn add_lmi<F>(&mut self, side: usize, mut entry: F) -> ConstraintRef
    where
        F: FnMut(usize, usize) -> LinExpr,
    {
        let mut exprs = Vec::with_capacity(svec_len(side));
        for i in 0..side {
            for j in i..side {
                // svec entry equals sqrt(2) * matrix entry off the diagonal
                let scale = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
                exprs.push(entry(i, j).scaled(scale));
            }
        }
        self.slack_constraint(ConeBlock::Psd(side), exprs)
    }

    pub fn minimize(&mut self, expr: LinExpr) {
        self.objective = expr;
        self.maximize = false;
    }

    pub fn maximize(&mut self, expr: LinExpr) {
        self.objective = expr;
        self.maximize = true;
    }

    pub fn build(&self) -> ConicProgram {
        match self.form {
            Form::Standard => self.build_standard(),
            Form::Inequality => self.build_inequality(),
        }
    }

    fn build_standard(&self) -> ConicProgram {
        let n = self.nvars;
        let m = self.rows.len();
        let mut a = DMatrix::zeros(m, n);
        let mut b = vec![0.0; m];
        for (i, r) in self.rows.iter().enumerate() {
            for (j, v) in r.terms() {
                a[(i, j)] += v;
            }
            b[i] = -r.constant_term();
        }
        let sign = if self.maximize { -1.0 } else { 1.0 };
        let mut c = vec![0.0; n];
        for (j, v) in self.objective.terms() {
            c[j] = sign * v;
        }
        ConicProgram {
            objective: c,
            eq_matrix: a,
            eq_rhs: b,
            cones: self.cones.clone(),
        }
    }

    /// Standard form whose dual is the model: the dual multipliers are the
    /// variables, `b` is the (maximized) objective and each constraint
    /// coordinate `e(w) = c - a^T w` becomes a column. Equalities form one
    /// free block at the end.
    fn build_inequality(&self) -> ConicProgram {
        let ncols = self.constraints.iter().map(|(c, _)| c.dim()).sum::<usize>() + self.rows.len();
        let mut a = DMatrix::zeros(self.nvars, ncols);
        let mut c = vec![0.0; ncols];
        let mut cones: Vec<ConeBlock> = self.constraints.iter().map(|(c, _)| *c).collect();
        if !self.rows.is_empty() {
            cones.push(ConeBlock::Free(self.rows.len()));
        }
        let exprs = self.constraints.iter().flat_map(|(_, e)| e.iter()).chain(&self.rows);
        for (col, e) in exprs.enumerate() {
            c[col] = e.constant_term();
            for (i, v) in e.terms() {
                a[(i, col)] -= v;
            }
        }
        let sign = if self.maximize { 1.0 } else { -1.0 };
        let mut b = vec![0.0; self.nvars];
        for (i, v) in self.objective.terms() {
            b[i] = sign * v;
        }
        ConicProgram {
            objective: c,
            eq_matrix: a,
            eq_rhs: b,
            cones,
        }
    }

    /// Solver status in the model's terms: `PrimalInfeasible` means the
    /// model is infeasible and `DualInfeasible` that it is unbounded.
    pub fn model_status(&self, sol: &SolverSolution) -> SolveStatus {
        match (self.form, sol.status) {
            (Form::Inequality, SolveStatus::PrimalInfeasible) => SolveStatus::DualInfeasible,
            (Form::Inequality, SolveStatus::DualInfeasible) => SolveStatus::PrimalInfeasible,
            (_, st) => st,
        }
    }

    /// Values of all model variables in a solution of the built program.
    pub fn variable_values<'a>(&self, sol: &'a SolverSolution) -> &'a [f64] {
        match self.form {
            Form::Standard => &sol.primal,
            Form::Inequality => &sol.dual_eq,
        }
    }

    /// Objective value in the user's sense (including the constant).
    pub fn objective_value(&self, sol: &SolverSolution) -> f64 {
        self.objective.eval(self.variable_values(sol))
    }

    /// Objective value in the user's sense from the solver's other side
    /// (dual objective in standard form, primal objective in inequality
    /// form); agrees with [`Self::objective_value`] at optimality.
    pub fn bound_value(&self, sol: &SolverSolution) -> f64 {
        let sign = if self.maximize { -1.0 } else { 1.0 };
        let v = match self.form {
            Form::Standard => sol.dual_objective,
            Form::Inequality => -sol.primal_objective,
        };
        sign * v + self.objective.constant_term()
    }
}
