//! Truncated moment sequences and the moment-side machinery: moment and
//! localizing matrices, the cone `S[g]_{2k}`, flat truncation, atom
//! extraction and the moment completion problem.

mod atmp;
mod extract;
mod maps;

use crate::error::{DromError, Result};
use crate::polycore::{basis, binomial, graded_index, Exponent, MonomialBasis, Poly};

pub use atmp::{atmp_solve, AtmpOutcome};
pub use extract::{check_flat, extract_atoms, extract_atoms_with, ExtractOptions};
pub use maps::{
    compile_cone_sg, localizing_map, localizing_matrix, moment_matrix, univariate_interval_constraints, LinearMatrixMap,
};

/// Truncated moment sequence `z = (z_alpha)_{|alpha| <= d}` in graded order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tms {
    nvars: usize,
    degree: u32,
    values: Vec<f64>,
}

impl Tms {
    pub fn new(nvars: usize, degree: u32, values: Vec<f64>) -> Result<Self> {
        let len = binomial(nvars + degree as usize, degree as usize);
        if values.len() != len {
            return Err(DromError::DimensionMismatch {
                what: "moment sequence length",
                expected: len,
                found: values.len(),
            });
        }
        Ok(Tms { nvars, degree, values })
    }

    pub fn zeros(nvars: usize, degree: u32) -> Self {
        Tms {
            nvars,
            degree,
            values: vec![0.0; binomial(nvars + degree as usize, degree as usize)],
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn basis(&self) -> MonomialBasis {
        basis(self.nvars, self.degree)
    }

    /// `z_alpha`.
    pub fn get(&self, alpha: &Exponent) -> Result<f64> {
        if alpha.nvars() != self.nvars {
            return Err(DromError::VariableMismatch {
                expected: self.nvars,
                found: alpha.nvars(),
            });
        }
        if alpha.degree() > self.degree {
            return Err(DromError::DegreeViolation {
                what: "moment lookup",
                degree: alpha.degree(),
                bound: self.degree,
            });
        }
        Ok(self.values[graded_index(alpha)])
    }

    /// The truncation `z|_d` (a prefix in graded order).
    pub fn truncate(&self, d: u32) -> Result<Tms> {
        if d > self.degree {
            return Err(DromError::DegreeViolation {
                what: "truncation",
                degree: d,
                bound: self.degree,
            });
        }
        let len = binomial(self.nvars + d as usize, d as usize);
        Ok(Tms {
            nvars: self.nvars,
            degree: d,
            values: self.values[..len].to_vec(),
        })
    }

    pub fn scale(&self, s: f64) -> Tms {
        Tms {
            nvars: self.nvars,
            degree: self.degree,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + other` for sequences of the same shape.
    pub fn try_add(&self, other: &Tms) -> Result<Tms> {
        if self.nvars != other.nvars || self.degree != other.degree {
            return Err(DromError::DimensionMismatch {
                what: "moment sequence shape",
                expected: self.values.len(),
                found: other.values.len(),
            });
        }
        Ok(Tms {
            nvars: self.nvars,
            degree: self.degree,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    /// Degree-one coordinates `(z_{e_1}, ..., z_{e_p})`.
    pub fn first_moments(&self) -> Vec<f64> {
        if self.degree == 0 {
            return vec![0.0; self.nvars];
        }
        self.values[1..=self.nvars].to_vec()
    }
}

/// Moments of the Dirac measure at `u`: `z_alpha = u^alpha`.
pub fn dirac_moments(u: &[f64], d: u32) -> Tms {
    let b = basis(u.len(), d);
    Tms {
        nvars: u.len(),
        degree: d,
        values: b.eval(u),
    }
}

/// The basic closed semialgebraic set `{xi : g_i(xi) >= 0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SemiAlgSet {
    nvars: usize,
    generators: Vec<Poly>,
}

impl SemiAlgSet {
    pub fn new(nvars: usize, generators: Vec<Poly>) -> Result<Self> {
        for g in &generators {
            if g.nvars() != nvars {
                return Err(DromError::VariableMismatch {
                    expected: nvars,
                    found: g.nvars(),
                });
            }
        }
        Ok(SemiAlgSet { nvars, generators })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn generators(&self) -> &[Poly] {
        &self.generators
    }

    /// Largest generator degree (0 when there are none).
    pub fn degree(&self) -> u32 {
        self.generators.iter().map(Poly::degree).max().unwrap_or(0)
    }

    /// `max(1, ceil(deg(g) / 2))`, the rank-drop gap used by flat truncation.
    pub fn d0(&self) -> u32 {
        self.degree().div_ceil(2).max(1)
    }

    /// `min_i g_i(u)`; `+inf` for the whole space.
    pub fn min_value(&self, u: &[f64]) -> Result<f64> {
        let mut m = f64::INFINITY;
        for g in &self.generators {
            m = m.min(g.eval(u)?);
        }
        Ok(m)
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> Result<bool> {
        Ok(self.min_value(u)? >= -tol)
    }
}

/// Finitely atomic measure `sum_j theta_j delta_{u_j}`.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicMeasure {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl AtomicMeasure {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(DromError::DimensionMismatch {
                what: "atoms vs weights",
                expected: atoms.len(),
                found: weights.len(),
            });
        }
        if let Some(p) = atoms.first().map(Vec::len) {
            if let Some(bad) = atoms.iter().find(|a| a.len() != p) {
                return Err(DromError::VariableMismatch {
                    expected: p,
                    found: bad.len(),
                });
            }
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(DromError::InvalidArgument("atom weights must be positive".into()));
        }
        Ok(AtomicMeasure { atoms, weights })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn nvars(&self) -> usize {
        self.atoms.first().map_or(0, Vec::len)
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Moments up to degree `d`.
    pub fn moments(&self, d: u32) -> Tms {
        let p = self.nvars();
        let b = basis(p, d);
        let mut values = vec![0.0; b.len()];
        for (u, w) in self.atoms.iter().zip(&self.weights) {
            for (v, m) in values.iter_mut().zip(b.eval(u)) {
                *v += w * m;
            }
        }
        Tms {
            nvars: p,
            degree: d,
            values,
        }
    }

    /// Largest violation `max(0, -g_i(u_j))` over atoms and generators.
    pub fn support_violation(&self, set: &SemiAlgSet) -> Result<f64> {
        let mut worst = 0.0f64;
        for u in &self.atoms {
            worst = worst.max(-set.min_value(u)?);
        }
        Ok(worst)
    }
}
