//! Sum-of-squares side: truncated quadratic modules compiled to Gram blocks
//! with coefficient matching, the SOS-convexity test and generic SOS
//! objectives.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::conesolve::{solve, LinExpr, ProgramBuilder, SolveOptions, SolveStatus, VarBlock};
use crate::error::{DromError, Result};
use crate::linalg::min_eigenvalue;
use crate::polycore::{basis, Exponent, MonomialBasis, Poly};

/// Polynomial whose coefficients are affine expressions in program
/// variables.
#[derive(Clone, Debug, Default)]
pub struct PolyExpr {
    nvars: usize,
    terms: BTreeMap<Exponent, LinExpr>,
}

impl PolyExpr {
    pub fn new(nvars: usize) -> Self {
        PolyExpr {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_poly(p: &Poly) -> Self {
        let mut out = PolyExpr::new(p.nvars());
        for (e, c) in p.terms() {
            out.add_term(e.clone(), &LinExpr::constant(c));
        }
        out
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// `coefficient(alpha) += expr`
    pub fn add_term(&mut self, alpha: Exponent, expr: &LinExpr) {
        self.terms.entry(alpha).or_default().add_scaled(1.0, expr);
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Exponent::degree).max().unwrap_or(0)
    }

    pub fn coefficient(&self, alpha: &Exponent) -> LinExpr {
        self.terms.get(alpha).cloned().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &LinExpr)> {
        self.terms.iter()
    }

    /// Substitute variable values.
    pub fn eval_coefficients(&self, x: &[f64]) -> Poly {
        let mut p = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            p.add_term(e.clone(), c.eval(x));
        }
        p
    }
}

/// A truncated quadratic module `Q(g)_{2d}`: generators (unit first) and
/// the degree of each SOS multiplier.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticModuleSpec {
    nvars: usize,
    generators: Vec<Poly>,
    total_degree: u32,
    multiplier_degrees: Vec<u32>,
}

impl QuadraticModuleSpec {
    /// Generators `(1, c_1, ..., c_m)` with multiplier degrees
    /// `2 (d - ceil(deg c_i / 2))`.
    pub fn new(nvars: usize, constraints: &[Poly], half_degree: u32) -> Result<Self> {
        let mut generators = vec![Poly::constant(nvars, 1.0)];
        let mut multiplier_degrees = vec![2 * half_degree];
        for c in constraints {
            if c.nvars() != nvars {
                return Err(DromError::VariableMismatch {
                    expected: nvars,
                    found: c.nvars(),
                });
            }
            let h = c.degree().div_ceil(2);
            if h > half_degree {
                return Err(DromError::DegreeViolation {
                    what: "quadratic module generator",
                    degree: c.degree(),
                    bound: 2 * half_degree,
                });
            }
            generators.push(c.clone());
            multiplier_degrees.push(2 * (half_degree - h));
        }
        Ok(QuadraticModuleSpec {
            nvars,
            generators,
            total_degree: 2 * half_degree,
            multiplier_degrees,
        })
    }

    /// The SOS cone `Sigma[x]_{2d}`.
    pub fn sos(nvars: usize, half_degree: u32) -> Self {
        QuadraticModuleSpec {
            nvars,
            generators: vec![Poly::constant(nvars, 1.0)],
            total_degree: 2 * half_degree,
            multiplier_degrees: vec![2 * half_degree],
        }
    }

    /// Override the multiplier degree of constraint `i` (0-based, not
    /// counting the unit generator).
    pub fn with_multiplier_degree(mut self, i: usize, degree: u32) -> Result<Self> {
        if i + 1 >= self.generators.len() {
            return Err(DromError::InvalidArgument(format!("no constraint with index {i}")));
        }
        if !degree.is_multiple_of(2) {
            return Err(DromError::InvalidArgument(format!(
                "multiplier degree must be even, got {degree}"
            )));
        }
        if degree + self.generators[i + 1].degree() > self.total_degree {
            return Err(DromError::DegreeViolation {
                what: "multiplier degree override",
                degree: degree + self.generators[i + 1].degree(),
                bound: self.total_degree,
            });
        }
        self.multiplier_degrees[i + 1] = degree;
        Ok(self)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn generators(&self) -> &[Poly] {
        &self.generators
    }

    pub fn total_degree(&self) -> u32 {
        self.total_degree
    }

    pub fn multiplier_degrees(&self) -> &[u32] {
        &self.multiplier_degrees
    }

    /// Monomial basis of each Gram block.
    pub fn gram_bases(&self) -> Vec<MonomialBasis> {
        self.multiplier_degrees
            .iter()
            .map(|&m| basis(self.nvars, m / 2))
            .collect()
    }
}

/// Handles to a compiled membership: Gram blocks and the coefficient-matching
/// row of every monomial.
#[derive(Clone, Debug)]
pub struct QmMembership {
    pub gram_blocks: Vec<VarBlock>,
    pub gram_bases: Vec<Vec<Exponent>>,
    pub rows: BTreeMap<Exponent, usize>,
}

/// Per-generator Gram matrices witnessing `target = sum_i g_i [x]^T G_i [x]`.
#[derive(Clone, Debug)]
pub struct GramCertificate {
    pub generators: Vec<Poly>,
    pub bases: Vec<Vec<Exponent>>,
    pub blocks: Vec<DMatrix<f64>>,
}

impl GramCertificate {
    /// `sum_i g_i * (b_i^T G_i b_i)`.
    pub fn reassemble(&self) -> Poly {
        let nvars = self.generators.first().map_or(0, Poly::nvars);
        let mut out = Poly::zero(nvars);
        for ((g, b), m) in self.generators.iter().zip(&self.bases).zip(&self.blocks) {
            let mut sigma = Poly::zero(nvars);
            for (i, bi) in b.iter().enumerate() {
                for (j, bj) in b.iter().enumerate() {
                    sigma.add_term(bi.add(bj), m[(i, j)]);
                }
            }
            out = &out + &(g * &sigma);
        }
        out
    }

    /// Smallest eigenvalue over all blocks.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .filter(|m| m.nrows() > 0)
            .map(min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest coefficient mismatch against `target`.
    pub fn mismatch(&self, target: &Poly) -> f64 {
        (&self.reassemble() - target).max_abs_coeff()
    }

    pub fn from_solution(m: &QmMembership, generators: &[Poly], sol: &crate::conesolve::SolverSolution) -> Self {
        GramCertificate {
            generators: generators.to_vec(),
            bases: m.gram_bases.clone(),
            blocks: m.gram_blocks.iter().map(|b| b.primal_matrix(sol)).collect(),
        }
    }
}

/// Add Gram blocks for `(generator, basis)` pairs and return their
/// expansion `sum_i g_i b_i^T G_i b_i` as per-monomial expressions.
fn gram_expansion(
    pb: &mut ProgramBuilder,
    parts: &[(&Poly, &[Exponent])],
) -> (Vec<VarBlock>, BTreeMap<Exponent, LinExpr>) {
    let mut blocks = Vec::with_capacity(parts.len());
    let mut coeffs: BTreeMap<Exponent, LinExpr> = BTreeMap::new();
    for (g, b) in parts {
        let blk = pb.add_psd(b.len());
        for i in 0..b.len() {
            for j in i..b.len() {
                let mult = if i == j { 1.0 } else { 2.0 };
                let entry = blk.entry(i, j);
                let ab = b[i].add(&b[j]);
                for (delta, c) in g.terms() {
                    coeffs.entry(delta.add(&ab)).or_default().add_scaled(mult * c, &entry);
                }
            }
        }
        blocks.push(blk);
    }
    (blocks, coeffs)
}

/// Emit `target in Q(g)_{2d}`: one PSD block per generator and one equality
/// per monomial. Unknown scalars enter through the target's coefficients.
pub fn compile_qm_membership(
    pb: &mut ProgramBuilder,
    target: &PolyExpr,
    qm: &QuadraticModuleSpec,
) -> Result<QmMembership> {
    if target.nvars() != qm.nvars() {
        return Err(DromError::VariableMismatch {
            expected: qm.nvars(),
            found: target.nvars(),
        });
    }
    if target.degree() > qm.total_degree() {
        return Err(DromError::DegreeViolation {
            what: "quadratic module target",
            degree: target.degree(),
            bound: qm.total_degree(),
        });
    }
    let bases: Vec<Vec<Exponent>> = qm.gram_bases().iter().map(|b| b.monomials().to_vec()).collect();
    let parts: Vec<(&Poly, &[Exponent])> = qm
        .generators()
        .iter()
        .zip(&bases)
        .map(|(g, b)| (g, b.as_slice()))
        .collect();
    let (gram_blocks, mut coeffs) = gram_expansion(pb, &parts);
    for (alpha, _) in target.terms() {
        coeffs.entry(alpha.clone()).or_default();
    }
    let mut rows = BTreeMap::new();
    for (alpha, expr) in coeffs {
        let mut e = expr;
        e.add_scaled(-1.0, &target.coefficient(&alpha));
        rows.insert(alpha, pb.add_eq(e));
    }
    Ok(QmMembership {
        gram_blocks,
        gram_bases: bases,
        rows,
    })
}

/// Outcome of the SOS-convexity test.
#[derive(Clone, Debug)]
pub enum SosConvexity {
    /// `y^T Hess f(x) y` is SOS in `(x, y)`; the certificate is over the
    /// lifted variables `(x_1..x_n, y_1..y_n)`.
    Convex(GramCertificate),
    NotSosConvex,
    Indeterminate(SolveStatus),
}

impl SosConvexity {
    pub fn is_convex(&self) -> bool {
        matches!(self, SosConvexity::Convex(_))
    }
}

/// `y^T Hess f(x) y` as a polynomial in `2n` variables `(x, y)`.
pub fn lifted_hessian_form(f: &Poly) -> Poly {
    let n = f.nvars();
    let h = f.hessian();
    let x_pos: Vec<usize> = (0..n).collect();
    let mut q = Poly::zero(2 * n);
    for i in 0..n {
        for j in 0..n {
            let hij = h[i][j].embed(2 * n, &x_pos);
            let mut yy = vec![0u32; 2 * n];
            yy[n + i] += 1;
            yy[n + j] += 1;
            q = &q + &(&hij * &Poly::monomial(Exponent::new(yy), 1.0));
        }
    }
    q
}

/// Decide whether `f` is SOS-convex.
pub fn sos_convexity_check(f: &Poly, options: &SolveOptions) -> Result<SosConvexity> {
    let n = f.nvars();
    let q = lifted_hessian_form(f);
    // y_i x^beta with |beta| <= ceil((deg f - 2) / 2)
    let half = f.degree().saturating_sub(2).div_ceil(2);
    let xb = basis(n, half);
    let mut gb = Vec::new();
    for i in 0..n {
        for beta in xb.iter() {
            let mut p = beta.powers().to_vec();
            p.extend(std::iter::repeat_n(0, n));
            p[n + i] = 1;
            gb.push(Exponent::new(p));
        }
    }
    let one = Poly::constant(2 * n, 1.0);
    if q.is_zero() {
        let cert = GramCertificate {
            generators: vec![one],
            bases: vec![gb.clone()],
            blocks: vec![DMatrix::zeros(gb.len(), gb.len())],
        };
        return Ok(SosConvexity::Convex(cert));
    }
    let mut pb = ProgramBuilder::new();
    let (blocks, mut coeffs) = gram_expansion(&mut pb, &[(&one, gb.as_slice())]);
    for (alpha, _) in q.terms() {
        coeffs.entry(alpha.clone()).or_default();
    }
    for (alpha, expr) in coeffs {
        let mut e = expr;
        e.add_constant(-q.coeff(&alpha));
        pb.add_eq(e);
    }
    // feasibility problem; a trace objective keeps the Gram matrix bounded
    let mut tr = LinExpr::new();
    for i in 0..gb.len() {
        tr.add_scaled(1.0, &blocks[0].entry(i, i));
    }
    pb.minimize(tr);
    let sol = solve(&pb.build(), options)?;
    match sol.status {
        SolveStatus::Optimal | SolveStatus::NearOptimal => {
            let cert = GramCertificate {
                generators: vec![one],
                bases: vec![gb],
                blocks: vec![blocks[0].primal_matrix(&sol)],
            };
            if cert.min_eigenvalue() >= -1e-8 && cert.mismatch(&q) <= 1e-6 {
                Ok(SosConvexity::Convex(cert))
            } else {
                Ok(SosConvexity::Indeterminate(sol.status))
            }
        }
        SolveStatus::PrimalInfeasible => Ok(SosConvexity::NotSosConvex),
        other => Ok(SosConvexity::Indeterminate(other)),
    }
}

/// Generic SOS polynomial `[xi]_{t0+1}^T Q^T Q [xi]_{t0+1}` with standard
/// normal `Q` drawn from the seeded generator.
pub fn random_sos(seed: u64, nvars: usize, t0: u32) -> Poly {
    let b = basis(nvars, t0 + 1);
    let n = b.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let g: DMatrix<f64> = q.transpose() * q;
    let mut r = Poly::zero(nvars);
    for i in 0..n {
        for j in 0..n {
            r.add_term(b.get(i).add(b.get(j)), g[(i, j)]);
        }
    }
    r
}
