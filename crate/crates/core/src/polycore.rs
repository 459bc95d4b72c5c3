//! Monomial indexing and sparse real polynomial arithmetic.
//!
//! Every vector or matrix indexed by monomials in this crate uses the single
//! graded lexicographic order produced by [`MonomialBasis`]: grade-major,
//! and within a grade the first variable dominates, so that
//! `[x]_2 = (1, x1, x2, x1^2, x1 x2, x2^2)`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{DromError, Result};

/// Exponent vector `alpha` of a monomial `x^alpha`.
///
/// The `Ord` implementation is the graded lexicographic position order, so
/// sorted collections of exponents enumerate monomials exactly as
/// [`MonomialBasis`] lists them.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Exponent(Vec<u32>);

impl Exponent {
    pub fn new(powers: Vec<u32>) -> Self {
        Exponent(powers)
    }

    pub fn zero(nvars: usize) -> Self {
        Exponent(vec![0; nvars])
    }

    /// Unit exponent `e_i`.
    pub fn unit(nvars: usize, i: usize) -> Self {
        let mut p = vec![0; nvars];
        p[i] = 1;
        Exponent(p)
    }

    pub fn powers(&self) -> &[u32] {
        &self.0
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    /// `alpha + beta`, the exponent of `x^alpha * x^beta`.
    pub fn add(&self, other: &Exponent) -> Exponent {
        debug_assert_eq!(self.0.len(), other.0.len());
        Exponent(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `alpha - beta` when it is a valid exponent.
    pub fn checked_sub(&self, other: &Exponent) -> Option<Exponent> {
        let mut out = Vec::with_capacity(self.0.len());
        for (a, b) in self.0.iter().zip(&other.0) {
            out.push(a.checked_sub(*b)?);
        }
        Some(Exponent(out))
    }

    /// Index of the variable when this is a unit exponent `e_i`.
    pub fn as_unit(&self) -> Option<usize> {
        if self.degree() != 1 {
            return None;
        }
        self.0.iter().position(|&a| a == 1)
    }

    /// Evaluate `u^alpha`.
    pub fn eval(&self, u: &[f64]) -> f64 {
        self.0.iter().zip(u).map(|(&a, &x)| x.powi(a as i32)).product()
    }
}

impl Ord for Exponent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            // larger leading powers come first within a grade
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl From<Vec<u32>> for Exponent {
    fn from(v: Vec<u32>) -> Self {
        Exponent(v)
    }
}

/// The graded lexicographic listing of `N^n_d`, i.e. the layout of `[x]_d`.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    nvars: usize,
    degree: u32,
    monomials: Vec<Exponent>,
    index: HashMap<Exponent, usize>,
}

/// Enumerate all exponents of a fixed total degree in descending lex order.
fn exponents_of_grade(nvars: usize, grade: u32, out: &mut Vec<Exponent>) {
    fn rec(prefix: &mut Vec<u32>, nvars: usize, remaining: u32, out: &mut Vec<Exponent>) {
        if prefix.len() + 1 == nvars {
            prefix.push(remaining);
            out.push(Exponent(prefix.clone()));
            prefix.pop();
            return;
        }
        for a in (0..=remaining).rev() {
            prefix.push(a);
            rec(prefix, nvars, remaining - a, out);
            prefix.pop();
        }
    }
    if nvars == 0 {
        if grade == 0 {
            out.push(Exponent(Vec::new()));
        }
        return;
    }
    rec(&mut Vec::with_capacity(nvars), nvars, grade, out);
}

/// `binomial(n, k)` as usize.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

impl MonomialBasis {
    pub fn new(nvars: usize, degree: u32) -> Self {
        let mut monomials = Vec::with_capacity(binomial(nvars + degree as usize, degree as usize));
        for g in 0..=degree {
            exponents_of_grade(nvars, g, &mut monomials);
        }
        let index = monomials.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        MonomialBasis {
            nvars,
            degree,
            monomials,
            index,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Exponent] {
        &self.monomials
    }

    pub fn get(&self, i: usize) -> &Exponent {
        &self.monomials[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Exponent> {
        self.monomials.iter()
    }

    /// Position of `alpha` in the graded order.
    pub fn index_of(&self, alpha: &Exponent) -> Result<usize> {
        if alpha.nvars() != self.nvars {
            return Err(DromError::VariableMismatch {
                expected: self.nvars,
                found: alpha.nvars(),
            });
        }
        self.index.get(alpha).copied().ok_or(DromError::DegreeViolation {
            what: "monomial index",
            degree: alpha.degree(),
            bound: self.degree,
        })
    }

    /// Number of monomials of degree at most `d` (a prefix of the basis).
    pub fn prefix_len(&self, d: u32) -> usize {
        binomial(self.nvars + d as usize, d as usize)
    }

    /// Evaluate `[u]_d`.
    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        self.monomials.iter().map(|a| a.eval(u)).collect()
    }
}

/// Position of `alpha` in the graded order of any basis that contains it,
/// computed without building the basis.
pub fn graded_index(alpha: &Exponent) -> usize {
    let n = alpha.nvars();
    let deg = alpha.degree() as usize;
    if n == 0 || deg == 0 {
        return 0;
    }
    // monomials of lower grade
    let mut pos = binomial(n + deg - 1, deg - 1);
    // same grade, lexicographically larger
    let mut remaining = deg;
    for (i, &a) in alpha.powers().iter().enumerate().take(n - 1) {
        let a = a as usize;
        let rest = n - i - 1;
        for v in a + 1..=remaining {
            let left = remaining - v;
            pos += binomial(left + rest - 1, rest - 1);
        }
        remaining -= a;
    }
    pos
}

/// Convenience wrapper: the basis of `N^n_d`.
pub fn basis(nvars: usize, degree: u32) -> MonomialBasis {
    MonomialBasis::new(nvars, degree)
}

/// Sparse multivariate polynomial with `f64` coefficients.
#[derive(Clone, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Exponent, f64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Poly::zero(nvars);
        p.add_term(Exponent::zero(nvars), c);
        p
    }

    /// The coordinate polynomial `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        Poly::monomial(Exponent::unit(nvars, i), 1.0)
    }

    pub fn monomial(alpha: Exponent, c: f64) -> Self {
        let mut p = Poly::zero(alpha.nvars());
        p.add_term(alpha, c);
        p
    }

    /// Build from `(exponent, coefficient)` pairs, summing duplicates.
    pub fn from_terms<I>(nvars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut p = Poly::zero(nvars);
        for (e, c) in terms {
            if e.len() != nvars {
                return Err(DromError::VariableMismatch {
                    expected: nvars,
                    found: e.len(),
                });
            }
            p.add_term(Exponent(e), c);
        }
        Ok(p)
    }

    /// Coefficient vector against a basis; errors if a term does not fit.
    pub fn from_coefficients(basis: &MonomialBasis, coeffs: &[f64]) -> Self {
        let mut p = Poly::zero(basis.nvars());
        for (a, &c) in basis.iter().zip(coeffs) {
            p.add_term(a.clone(), c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Exponent::degree).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, f64)> {
        self.terms.iter().map(|(e, &c)| (e, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, alpha: &Exponent) -> f64 {
        self.terms.get(alpha).copied().unwrap_or(0.0)
    }

    /// Add `c * x^alpha`, dropping the term if it cancels to exactly zero.
    pub fn add_term(&mut self, alpha: Exponent, c: f64) {
        debug_assert_eq!(alpha.nvars(), self.nvars);
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(alpha);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let v = *o.get() + c;
                if v == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = v;
                }
            }
        }
    }

    fn check_vars(&self, other: &Poly) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(DromError::VariableMismatch {
                expected: self.nvars,
                found: other.nvars,
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Poly) -> Result<Poly> {
        self.check_vars(other)?;
        let mut out = self.clone();
        for (e, c) in other.terms() {
            out.add_term(e.clone(), c);
        }
        Ok(out)
    }

    pub fn try_mul(&self, other: &Poly) -> Result<Poly> {
        self.check_vars(other)?;
        let mut out = Poly::zero(self.nvars);
        for (a, ca) in self.terms() {
            for (b, cb) in other.terms() {
                out.add_term(a.add(b), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut out = Poly::zero(self.nvars);
        if s == 0.0 {
            return out;
        }
        for (e, c) in self.terms() {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.nvars {
            return Err(DromError::VariableMismatch {
                expected: self.nvars,
                found: u.len(),
            });
        }
        Ok(self.terms().map(|(e, c)| c * e.eval(u)).sum())
    }

    /// Partial derivative with respect to `x_i`.
    pub fn derivative(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, c) in self.terms() {
            let a = e.0[i];
            if a == 0 {
                continue;
            }
            let mut p = e.0.clone();
            p[i] -= 1;
            out.add_term(Exponent(p), c * a as f64);
        }
        out
    }

    /// Symmetric matrix of second derivatives; entry `(i, j)` is `d^2 f / dx_i dx_j`.
    pub fn hessian(&self) -> Vec<Vec<Poly>> {
        let n = self.nvars;
        let grads: Vec<Poly> = (0..n).map(|i| self.derivative(i)).collect();
        let mut h = vec![vec![Poly::zero(n); n]; n];
        for i in 0..n {
            for j in i..n {
                let d = grads[i].derivative(j);
                h[j][i] = d.clone();
                h[i][j] = d;
            }
        }
        h
    }

    /// Coefficient vector in the given basis.
    pub fn coefficients(&self, basis: &MonomialBasis) -> Result<Vec<f64>> {
        let mut v = vec![0.0; basis.len()];
        for (e, c) in self.terms() {
            v[basis.index_of(e)?] = c;
        }
        Ok(v)
    }

    /// Embed into a larger variable space: variable `i` becomes `positions[i]`.
    pub fn embed(&self, nvars: usize, positions: &[usize]) -> Poly {
        let mut out = Poly::zero(nvars);
        for (e, c) in self.terms() {
            let mut p = vec![0; nvars];
            for (i, &a) in e.0.iter().enumerate() {
                p[positions[i]] += a;
            }
            out.add_term(Exponent(p), c);
        }
        out
    }

    /// Largest absolute coefficient.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms().map(|(_, c)| c.abs()).fold(0.0, f64::max)
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (i, &a) in e.0.iter().enumerate() {
                match a {
                    0 => {}
                    1 => write!(f, "*x{}", i + 1)?,
                    _ => write!(f, "*x{}^{}", i + 1, a)?,
                }
            }
        }
        Ok(())
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        self.try_add(rhs).expect("variable count mismatch in Poly addition")
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self.try_add(&rhs.scale(-1.0))
            .expect("variable count mismatch in Poly subtraction")
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        self.try_mul(rhs)
            .expect("variable count mismatch in Poly multiplication")
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1.0)
    }
}

/// `<q, z> = sum_alpha q_alpha z_alpha`.
pub fn riesz_pair(q: &Poly, z: &crate::momentkit::Tms) -> Result<f64> {
    if q.nvars() != z.nvars() {
        return Err(DromError::VariableMismatch {
            expected: z.nvars(),
            found: q.nvars(),
        });
    }
    if q.degree() > z.degree() {
        return Err(DromError::DegreeViolation {
            what: "Riesz pairing",
            degree: q.degree(),
            bound: z.degree(),
        });
    }
    let mut acc = 0.0;
    for (e, c) in q.terms() {
        acc += c * z.get(e)?;
    }
    Ok(acc)
}
