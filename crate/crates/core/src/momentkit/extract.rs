//! Flat truncation test and atom extraction from flat moment sequences.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{moment_matrix, AtomicMeasure, Tms};
use crate::error::{DromError, Result};
use crate::linalg::{nnls, numerical_rank};
use crate::polycore::{basis, graded_index};

/// Numerical parameters of the extraction procedure.
#[derive(Clone, Debug)]
pub struct ExtractOptions {
    /// relative singular value threshold for numerical rank
    pub rank_tol: f64,
    /// atoms closer than this (infinity norm) are merged
    pub merge_tol: f64,
    /// weights below this are dropped before refitting
    pub weight_tol: f64,
    /// accepted moment reconstruction error, relative to `max(1, ||w||_inf)`
    pub recon_tol: f64,
    pub seed: u64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            rank_tol: 1e-6,
            merge_tol: 1e-5,
            weight_tol: 1e-8,
            recon_tol: 1e-6,
            seed: 0x5eed,
        }
    }
}

/// Smallest `s` in `[max(d0, t0), deg(w) / 2]` with
/// `rank M_{s - d0}[w] = rank M_s[w]`, together with that rank.
pub fn check_flat(w: &Tms, d0: u32, t0: u32) -> Option<(u32, usize)> {
    check_flat_tol(w, d0, t0, ExtractOptions::default().rank_tol)
}

pub(crate) fn check_flat_tol(w: &Tms, d0: u32, t0: u32, rank_tol: f64) -> Option<(u32, usize)> {
    let l = w.degree() / 2;
    let lo = d0.max(t0);
    for s in lo..=l {
        let small = moment_matrix(w, s - d0).ok()?;
        let big = moment_matrix(w, s).ok()?;
        let r_small = numerical_rank(&small, rank_tol);
        let r_big = numerical_rank(&big, rank_tol);
        if r_small == r_big && r_big > 0 {
            return Some((s, r_big));
        }
    }
    None
}

/// Recover an `r`-atomic representing measure from a flat sequence at
/// order `s`.
pub fn extract_atoms(w: &Tms, s: u32, r: usize) -> Result<AtomicMeasure> {
    extract_atoms_with(w, s, r, &ExtractOptions::default())
}

pub fn extract_atoms_with(w: &Tms, s: u32, r: usize, opts: &ExtractOptions) -> Result<AtomicMeasure> {
    let p = w.nvars();
    if r == 0 {
        return Err(DromError::Extraction("rank zero sequence has no atoms".into()));
    }
    if s == 0 {
        return Err(DromError::Extraction("flat order must be positive".into()));
    }
    let m = moment_matrix(w, s)?;
    let side = m.nrows();
    if r > side {
        return Err(DromError::Extraction(format!("rank {r} exceeds matrix side {side}")));
    }
    // M ~ V V^T from the leading eigenpairs
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..side).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let mut v = DMatrix::zeros(side, r);
    for (c, &k) in order.iter().take(r).enumerate() {
        let lam = eig.eigenvalues[k];
        if lam <= 0.0 {
            return Err(DromError::Extraction(
                "moment matrix is not positive semidefinite".into(),
            ));
        }
        v.column_mut(c).copy_from(&(eig.eigenvectors.column(k) * lam.sqrt()));
    }

    // pick r well-conditioned pivot rows among monomials of degree < s
    // (column-pivoted QR on the transposed prefix)
    let prefix = basis(p, s - 1).len();
    let mut pivots = Vec::with_capacity(r);
    let mut resid: Vec<DVector<f64>> = (0..prefix).map(|i| v.row(i).transpose()).collect();
    for _ in 0..r {
        let (best, norm) = (0..prefix)
            .filter(|i| !pivots.contains(i))
            .map(|i| (i, resid[i].norm()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .ok_or_else(|| DromError::Extraction("not enough pivot monomials".into()))?;
        if norm <= 1e-9 * v.norm().max(1e-300) {
            return Err(DromError::Extraction("ill-conditioned monomial basis".into()));
        }
        let q = &resid[best] / norm;
        for rv in resid.iter_mut() {
            let proj = q.dot(rv);
            *rv -= &q * proj;
        }
        pivots.push(best);
    }
    pivots.sort_unstable();
    let vb = DMatrix::from_fn(r, r, |i, j| v[(pivots[i], j)]);
    let vb_inv = vb
        .try_inverse()
        .ok_or_else(|| DromError::Extraction("singular pivot block".into()))?;
    let u = &v * vb_inv;

    // multiplication matrices: row j of N_i expresses x_i * b_j in the basis
    let full = basis(p, s);
    let mults: Vec<DMatrix<f64>> = (0..p)
        .map(|i| {
            DMatrix::from_fn(r, r, |j, k| {
                let shifted = full.get(pivots[j]).add(&crate::polycore::Exponent::unit(p, i));
                u[(graded_index(&shifted), k)]
            })
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut coefs: Vec<f64> = (0..p).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = coefs.iter().sum();
    coefs.iter_mut().for_each(|c| *c /= total);
    let mut comb = DMatrix::zeros(r, r);
    for (c, n) in coefs.iter().zip(&mults) {
        comb += n * *c;
    }
    let (q, t) = nalgebra::Schur::new(comb).unpack();
    for j in 1..r {
        if t[(j, j - 1)].abs() > 1e-8 * t.norm().max(1.0) {
            return Err(DromError::Extraction(
                "complex eigenvalues in multiplication matrix".into(),
            ));
        }
    }
    let mut atoms: Vec<Vec<f64>> = (0..r)
        .map(|j| {
            let qj = q.column(j);
            mults.iter().map(|n| qj.dot(&(n * qj))).collect()
        })
        .collect();

    // merge near-duplicates
    let mut merged: Vec<Vec<f64>> = Vec::new();
    for a in atoms.drain(..) {
        let dup = merged
            .iter()
            .any(|b| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) <= opts.merge_tol);
        if !dup {
            merged.push(a);
        }
    }

    fit_weights(w, s, merged, opts)
}

/// Nonnegative weights against all moments up to degree `2s`; tiny weights
/// are dropped and the remaining atoms refit.
fn fit_weights(w: &Tms, s: u32, mut atoms: Vec<Vec<f64>>, opts: &ExtractOptions) -> Result<AtomicMeasure> {
    let target_tms = w.truncate(2 * s)?;
    let target = DVector::from_column_slice(target_tms.values());
    let b = basis(w.nvars(), 2 * s);
    let mut weights;
    loop {
        let a = DMatrix::from_fn(b.len(), atoms.len(), |i, j| b.get(i).eval(&atoms[j]));
        let x = nnls(&a, &target);
        let keep: Vec<bool> = x.iter().map(|&t| t >= opts.weight_tol).collect();
        weights = x.iter().copied().collect::<Vec<f64>>();
        if keep.iter().all(|&k| k) {
            break;
        }
        let kept: Vec<Vec<f64>> = atoms
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(a, _)| a.clone())
            .collect();
        if kept.is_empty() {
            return Err(DromError::Extraction("all atom weights vanished".into()));
        }
        atoms = kept;
    }
    let measure = AtomicMeasure::new(atoms, weights)?;
    let recon = measure.moments(2 * s);
    let err = recon
        .values()
        .iter()
        .zip(target_tms.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = crate::linalg::norm_inf(target_tms.values()).max(1.0);
    if err > opts.recon_tol * scale {
        return Err(DromError::Extraction(format!(
            "moment reconstruction error {err:.3e} exceeds tolerance"
        )));
    }
    Ok(measure)
}
