//! Small dense helpers shared by the solver and the moment routines.

use nalgebra::{DMatrix, DVector};

/// Length of the symmetric vectorization of a `side x side` matrix.
pub fn svec_len(side: usize) -> usize {
    side * (side + 1) / 2
}

/// Position of entry `(i, j)` (either triangle) in the upper-triangle,
/// row-major symmetric vectorization.
pub fn svec_index(side: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // rows above i contribute side, side-1, ..., side-i+1 entries
    i * side - i * i.saturating_sub(1) / 2 + (j - i)
}

/// Symmetric vectorization with off-diagonal entries scaled by `sqrt(2)`, so
/// that `svec(A) . svec(B) = trace(A B)`.
pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(svec_len(n));
    for i in 0..n {
        for j in i..n {
            if i == j {
                out.push(m[(i, i)]);
            } else {
                out.push(0.5 * (m[(i, j)] + m[(j, i)]) * std::f64::consts::SQRT_2);
            }
        }
    }
    out
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], side: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(side, side);
    let mut k = 0;
    for i in 0..side {
        for j in i..side {
            if i == j {
                m[(i, i)] = v[k];
            } else {
                let x = v[k] * std::f64::consts::FRAC_1_SQRT_2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
            k += 1;
        }
    }
    m
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    sym_eigenvalues(m)[0]
}

/// Numerical rank: singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Nonnegative least squares `min ||A x - b||, x >= 0` (Lawson-Hanson).
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.norm().max(1.0) * b.norm().max(1.0);
    let max_outer = 3 * n + 10;
    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let cand = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap());
        let Some(j) = cand else { break };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let sub = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
            let s_sub = least_squares(&sub, b);
            if s_sub.iter().all(|&v| v > 0.0) {
                for (c, &k) in idx.iter().enumerate() {
                    x[k] = s_sub[c];
                }
                break;
            }
            // step back toward the feasible region
            let mut alpha = f64::INFINITY;
            for (c, &k) in idx.iter().enumerate() {
                if s_sub[c] <= 0.0 {
                    let den = x[k] - s_sub[c];
                    if den > 0.0 {
                        alpha = alpha.min(x[k] / den);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (c, &k) in idx.iter().enumerate() {
                x[k] += alpha * (s_sub[c] - x[k]);
                if x[k] <= 1e-15 {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
            if idx.iter().all(|&k| !passive[k]) {
                break;
            }
        }
    }
    x
}

/// Minimum-norm least squares through the SVD.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    svd.solve(b, 1e-13 * smax.max(1e-300))
        .unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_roundtrip_and_isometry() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 5.0, 6.0, 3.0, 6.0, 9.0]);
        let b = DMatrix::from_row_slice(3, 3, &[4.0, -1.0, 0.5, -1.0, 2.0, 0.0, 0.5, 0.0, 1.0]);
        assert!((smat(&svec(&a), 3) - &a).amax() < 1e-14);
        let ip = dot(&svec(&a), &svec(&b));
        let tr = (&a * &b).trace();
        assert!((ip - tr).abs() < 1e-12);
    }

    #[test]
    fn svec_index_matches_layout() {
        let side = 4;
        let mut k = 0;
        for i in 0..side {
            for j in i..side {
                assert_eq!(svec_index(side, i, j), k);
                assert_eq!(svec_index(side, j, i), k);
                k += 1;
            }
        }
    }

    #[test]
    fn nnls_recovers_nonnegative_solution() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, -1.0, 1.0]);
        let x = nnls(&a, &b);
        assert!(x[1] == 0.0);
        assert!((x[0] - 1.5).abs() < 1e-10);
    }

    #[test]
    fn rank_of_rank_two() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5]);
        assert_eq!(numerical_rank(&m, 1e-6), 2);
    }
}
