//! Equality-row presolve: drop numerically dependent rows, detect
//! inconsistent ones and normalize what remains.

use nalgebra::DMatrix;

use super::ConicProgram;

pub(crate) struct Presolved {
    /// kept rows, each scaled to unit Euclidean norm
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
    /// original index of each kept row
    pub rows: Vec<usize>,
    /// norm each kept row was divided by
    pub row_scale: Vec<f64>,
    /// Farkas vector over the original rows when the system is inconsistent
    pub inconsistent: Option<Vec<f64>>,
}

/// Modified Gram-Schmidt over the rows (with one reorthogonalization pass).
/// A row is dependent when its residual norm falls below `tol` times its own
/// norm; it must then be consistent with the kept rows.
pub(crate) fn presolve(program: &ConicProgram, tol: f64) -> Presolved {
    let a = &program.eq_matrix;
    let b = &program.eq_rhs;
    let (m, n) = (a.nrows(), a.ncols());
    // orthonormal directions, each written as a combination of original rows
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut combos: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut rows = Vec::new();
    let mut row_scale = Vec::new();
    for i in 0..m {
        let row: Vec<f64> = (0..n).map(|j| a[(i, j)]).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut r = row.clone();
        let mut combo = vec![0.0; m];
        combo[i] = 1.0;
        let mut beta = b[i];
        for _ in 0..2 {
            // rows are sparse; dot products only run over the nonzeros of r
            let nz: Vec<usize> = (0..n).filter(|&j| r[j] != 0.0).collect();
            let mut dense = nz.len() * 2 > n;
            for k in 0..basis.len() {
                let p: f64 = if dense {
                    basis[k].iter().zip(&r).map(|(q, v)| q * v).sum()
                } else {
                    nz.iter().map(|&j| basis[k][j] * r[j]).sum()
                };
                if p == 0.0 {
                    continue;
                }
                for (rv, q) in r.iter_mut().zip(&basis[k]) {
                    *rv -= p * q;
                }
                dense = true;
                for (cv, q) in combo.iter_mut().zip(&combos[k]) {
                    *cv -= p * q;
                }
                beta -= p * rhs[k];
            }
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || rnorm <= tol * norm {
            // dependent row: combo^T A ~ 0, so combo^T b must vanish too
            let bscale = combo.iter().zip(b).map(|(c, v)| (c * v).abs()).sum::<f64>();
            if beta.abs() > 1e-7 * (1.0 + bscale) {
                let y: Vec<f64> = combo.iter().map(|c| c / beta).collect();
                return Presolved {
                    a: DMatrix::zeros(0, n),
                    b: Vec::new(),
                    rows: Vec::new(),
                    row_scale: Vec::new(),
                    inconsistent: Some(y),
                };
            }
            continue;
        }
        r.iter_mut().for_each(|v| *v /= rnorm);
        combo.iter_mut().for_each(|v| *v /= rnorm);
        basis.push(r);
        combos.push(combo);
        rhs.push(beta / rnorm);
        rows.push(i);
        row_scale.push(norm);
    }
    let mut out = DMatrix::zeros(rows.len(), n);
    let mut bout = Vec::with_capacity(rows.len());
    for (k, (&i, &s)) in rows.iter().zip(&row_scale).enumerate() {
        for j in 0..n {
            out[(k, j)] = a[(i, j)] / s;
        }
        bout.push(b[i] / s);
    }
    Presolved {
        a: out,
        b: bout,
        rows,
        row_scale,
        inconsistent: None,
    }
}
