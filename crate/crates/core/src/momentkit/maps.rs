//! Symbolic moment and localizing matrices.

use nalgebra::DMatrix;

use super::{SemiAlgSet, Tms};
use crate::error::{DromError, Result};
use crate::polycore::{basis, graded_index, Exponent, Poly};

/// Symmetric matrix whose entries are linear functionals of a moment
/// sequence, each stored as `(position, weight)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMatrixMap {
    side: usize,
    /// row-major, full square; `(i, j)` and `(j, i)` are identical
    entries: Vec<Vec<(usize, f64)>>,
}

impl LinearMatrixMap {
    pub fn from_fn<F>(side: usize, mut f: F) -> Self
    where
        F: FnMut(usize, usize) -> Vec<(usize, f64)>,
    {
        let mut entries = vec![Vec::new(); side * side];
        for i in 0..side {
            for j in i..side {
                let mut e = f(i, j);
                e.sort_by_key(|t| t.0);
                e.dedup_by(|b, a| {
                    if a.0 == b.0 {
                        a.1 += b.1;
                        true
                    } else {
                        false
                    }
                });
                e.retain(|t| t.1 != 0.0);
                entries[j * side + i] = e.clone();
                entries[i * side + j] = e;
            }
        }
        LinearMatrixMap { side, entries }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn rows(&self) -> usize {
        self.side
    }

    pub fn cols(&self) -> usize {
        self.side
    }

    pub fn entry(&self, i: usize, j: usize) -> &[(usize, f64)] {
        &self.entries[i * self.side + j]
    }

    /// Largest moment position referenced, if any.
    pub fn max_position(&self) -> Option<usize> {
        self.entries.iter().flatten().map(|t| t.0).max()
    }

    /// Substitute moment values.
    pub fn instantiate(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        if let Some(mp) = self.max_position() {
            if mp >= z.len() {
                return Err(DromError::DimensionMismatch {
                    what: "moment vector for matrix map",
                    expected: mp + 1,
                    found: z.len(),
                });
            }
        }
        Ok(DMatrix::from_fn(self.side, self.side, |i, j| {
            self.entry(i, j).iter().map(|&(k, w)| w * z[k]).sum()
        }))
    }

    /// `self - other` entrywise (same side).
    pub fn sub(&self, other: &LinearMatrixMap) -> LinearMatrixMap {
        LinearMatrixMap::from_fn(self.side, |i, j| {
            let mut e = self.entry(i, j).to_vec();
            e.extend(other.entry(i, j).iter().map(|&(k, w)| (k, -w)));
            e
        })
    }

    pub fn scaled(&self, s: f64) -> LinearMatrixMap {
        LinearMatrixMap::from_fn(self.side, |i, j| {
            self.entry(i, j).iter().map(|&(k, w)| (k, s * w)).collect()
        })
    }
}

/// `L_q^{(k)}` as a symbolic map on sequences in `p` variables; side
/// `C(p + s, s)` with `s = k - ceil(deg q / 2)`.
pub fn localizing_map(q: &Poly, k: u32) -> Result<LinearMatrixMap> {
    let p = q.nvars();
    let dq = q.degree();
    if dq > 2 * k {
        return Err(DromError::DegreeViolation {
            what: "localizing matrix generator",
            degree: dq,
            bound: 2 * k,
        });
    }
    let s = k - dq.div_ceil(2);
    let b = basis(p, s);
    let terms: Vec<(Exponent, f64)> = q.terms().map(|(e, c)| (e.clone(), c)).collect();
    Ok(LinearMatrixMap::from_fn(b.len(), |i, j| {
        let ab = b.get(i).add(b.get(j));
        terms.iter().map(|(g, c)| (graded_index(&g.add(&ab)), *c)).collect()
    }))
}

fn check_degree(z: &Tms, k: u32) -> Result<()> {
    if z.degree() < 2 * k {
        return Err(DromError::DegreeViolation {
            what: "moment matrix order",
            degree: 2 * k,
            bound: z.degree(),
        });
    }
    Ok(())
}

/// `M_k[z]`.
pub fn moment_matrix(z: &Tms, k: u32) -> Result<DMatrix<f64>> {
    check_degree(z, k)?;
    let b = basis(z.nvars(), k);
    let v = z.values();
    Ok(DMatrix::from_fn(b.len(), b.len(), |i, j| {
        v[graded_index(&b.get(i).add(b.get(j)))]
    }))
}

/// `L_q^{(k)}[z]`.
pub fn localizing_matrix(q: &Poly, z: &Tms, k: u32) -> Result<DMatrix<f64>> {
    if q.nvars() != z.nvars() {
        return Err(DromError::VariableMismatch {
            expected: z.nvars(),
            found: q.nvars(),
        });
    }
    check_degree(z, k)?;
    localizing_map(q, k)?.instantiate(z.values())
}

/// Maps whose simultaneous positive semidefiniteness defines `S[g]_{2k}`:
/// the moment matrix first, then one localizer per generator.
pub fn compile_cone_sg(g: &SemiAlgSet, two_k: u32) -> Result<Vec<LinearMatrixMap>> {
    if !two_k.is_multiple_of(2) {
        return Err(DromError::InvalidArgument(format!(
            "moment cone degree must be even, got {two_k}"
        )));
    }
    let k = two_k / 2;
    let mut out = vec![localizing_map(&Poly::constant(g.nvars(), 1.0), k)?];
    for gi in g.generators() {
        out.push(localizing_map(gi, k)?);
    }
    Ok(out)
}

/// Hankel conditions for a univariate degree-`2k` sequence to have a
/// representing measure on `[a1, a2]`: `M_k[z] >= 0` and
/// `(a1 + a2) H_1 - a1 a2 H_0 - H_2 >= 0` with `H_t[i][j] = z_{i+j+t}`.
pub fn univariate_interval_constraints(a1: f64, a2: f64, k: u32) -> Result<Vec<LinearMatrixMap>> {
    if !(a1 < a2) {
        return Err(DromError::InvalidArgument(format!(
            "interval endpoints must satisfy a1 < a2, got [{a1}, {a2}]"
        )));
    }
    let k = k as usize;
    let hankel = LinearMatrixMap::from_fn(k + 1, |i, j| vec![(i + j, 1.0)]);
    let shifted = LinearMatrixMap::from_fn(k, |i, j| {
        vec![(i + j + 1, a1 + a2), (i + j, -a1 * a2), (i + j + 2, -1.0)]
    });
    Ok(vec![hankel, shifted])
}
