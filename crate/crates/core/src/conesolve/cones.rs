//! Per-block symmetric-cone operations: Nesterov-Todd scaling, Jordan
//! products and step-to-boundary computations.
//!
//! Notation: `x` is the primal cone variable, `z` the dual slack. The scaling
//! `W` satisfies `W z = W^{-T} x = lambda`.

use nalgebra::DMatrix;

use crate::linalg::{smat, svec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Kind {
    Nonneg,
    Soc,
    Psd { side: usize },
}

#[derive(Clone, Debug)]
pub(crate) struct Block {
    pub kind: Kind,
    /// offset into the stacked cone vector
    pub offset: usize,
    pub dim: usize,
}

impl Block {
    pub fn new(kind: Kind, offset: usize, dim: usize) -> Self {
        Block { kind, offset, dim }
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.dim
    }

    /// Barrier degree contributed by this block.
    pub fn degree(&self) -> usize {
        match self.kind {
            Kind::Nonneg => self.dim,
            Kind::Soc => 1,
            Kind::Psd { side } => side,
        }
    }

    pub fn identity(&self, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        match self.kind {
            Kind::Nonneg => out.iter_mut().for_each(|v| *v = 1.0),
            Kind::Soc => out[0] = 1.0,
            Kind::Psd { side } => {
                for i in 0..side {
                    out[crate::linalg::svec_index(side, i, i)] = 1.0;
                }
            }
        }
    }
}

/// Nesterov-Todd scaling of one block.
#[derive(Clone, Debug)]
pub(crate) enum Scaling {
    Nonneg {
        d: Vec<f64>,
    },
    Soc {
        w: DMatrix<f64>,
        winv: DMatrix<f64>,
    },
    Psd {
        side: usize,
        r: DMatrix<f64>,
        rinv: DMatrix<f64>,
    },
}

fn soc_jdot(u: &[f64]) -> f64 {
    u[0] * u[0] - u[1..].iter().map(|v| v * v).sum::<f64>()
}

/// Compute the scaling and `lambda`; `None` if either point is not interior.
pub(crate) fn nt_scaling(kind: Kind, x: &[f64], z: &[f64]) -> Option<(Scaling, Vec<f64>)> {
    match kind {
        Kind::Nonneg => {
            if x.iter().chain(z).any(|&v| v <= 0.0) {
                return None;
            }
            let d: Vec<f64> = x.iter().zip(z).map(|(a, b)| (a / b).sqrt()).collect();
            let lambda = x.iter().zip(z).map(|(a, b)| (a * b).sqrt()).collect();
            Some((Scaling::Nonneg { d }, lambda))
        }
        Kind::Soc => {
            let n = x.len();
            let xj = soc_jdot(x);
            let zj = soc_jdot(z);
            if xj <= 0.0 || zj <= 0.0 || x[0] <= 0.0 || z[0] <= 0.0 {
                return None;
            }
            let xs = xj.sqrt();
            let zs = zj.sqrt();
            let xb: Vec<f64> = x.iter().map(|v| v / xs).collect();
            let zb: Vec<f64> = z.iter().map(|v| v / zs).collect();
            let gamma = ((1.0 + crate::linalg::dot(&xb, &zb)) / 2.0).sqrt();
            let mut wb = vec![0.0; n];
            wb[0] = (xb[0] + zb[0]) / (2.0 * gamma);
            for i in 1..n {
                wb[i] = (xb[i] - zb[i]) / (2.0 * gamma);
            }
            let denom = (2.0 * (wb[0] + 1.0)).sqrt();
            let mut v = wb.clone();
            v[0] += 1.0;
            v.iter_mut().for_each(|t| *t /= denom);
            let beta = (xj / zj).sqrt().sqrt();
            let mut w = DMatrix::zeros(n, n);
            let mut winv = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let jij = if i == j {
                        if i == 0 {
                            1.0
                        } else {
                            -1.0
                        }
                    } else {
                        0.0
                    };
                    let ji = if i == 0 { 1.0 } else { -1.0 };
                    let jj = if j == 0 { 1.0 } else { -1.0 };
                    w[(i, j)] = beta * (2.0 * v[i] * v[j] - jij);
                    winv[(i, j)] = (2.0 * ji * v[i] * v[j] * jj - jij) / beta;
                }
            }
            let lambda: Vec<f64> = (&w * nalgebra::DVector::from_column_slice(z)).iter().copied().collect();
            Some((Scaling::Soc { w, winv }, lambda))
        }
        Kind::Psd { side } => {
            let xm = smat(x, side);
            let zm = smat(z, side);
            let lx = xm.cholesky()?.unpack();
            let lz = zm.cholesky()?.unpack();
            let prod = lz.transpose() * &lx;
            let svd = prod.svd(true, true);
            let sv = svd.singular_values;
            if sv.iter().any(|&s| !(s > 0.0)) {
                return None;
            }
            let v = svd.v_t?.transpose();
            let mut r = &lx * &v;
            for j in 0..side {
                let s = 1.0 / sv[j].sqrt();
                r.column_mut(j).scale_mut(s);
            }
            let rinv = r.clone().try_inverse()?;
            let mut lam = DMatrix::zeros(side, side);
            for i in 0..side {
                lam[(i, i)] = sv[i];
            }
            Some((Scaling::Psd { side, r, rinv }, svec(&lam)))
        }
    }
}

impl Scaling {
    /// `W v`
    pub fn apply_w(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Nonneg { d } => v.iter().zip(d).map(|(a, b)| a * b).collect(),
            Scaling::Soc { w, .. } => mat_vec(w, v),
            Scaling::Psd { side, r, .. } => {
                let m = smat(v, *side);
                svec(&(r.transpose() * m * r))
            }
        }
    }

    /// `W^T v`
    pub fn apply_wt(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Nonneg { .. } | Scaling::Soc { .. } => self.apply_w(v),
            Scaling::Psd { side, r, .. } => {
                let m = smat(v, *side);
                svec(&(r * m * r.transpose()))
            }
        }
    }

    /// `W^{-T} v`
    pub fn apply_winv_t(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Nonneg { d } => v.iter().zip(d).map(|(a, b)| a / b).collect(),
            Scaling::Soc { winv, .. } => mat_vec(winv, v),
            Scaling::Psd { side, rinv, .. } => {
                let m = smat(v, *side);
                svec(&(rinv * m * rinv.transpose()))
            }
        }
    }

    /// `Phi = W^T W` in the form the normal-equation assembly exploits.
    pub fn phi(&self) -> PhiOp {
        match self {
            Scaling::Nonneg { d } => PhiOp::Diag(d.iter().map(|v| v * v).collect()),
            Scaling::Soc { w, .. } => PhiOp::Dense(w.transpose() * w),
            Scaling::Psd { side, r, .. } => PhiOp::Psd {
                side: *side,
                p: r * r.transpose(),
            },
        }
    }
}

/// `W^T W` of one block: a diagonal, a dense matrix, or `X -> P X P` on a
/// PSD block.
#[derive(Clone, Debug)]
pub(crate) enum PhiOp {
    Diag(Vec<f64>),
    Dense(DMatrix<f64>),
    Psd { side: usize, p: DMatrix<f64> },
}

impl PhiOp {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self {
            PhiOp::Diag(d) => v.iter().zip(d).map(|(a, b)| a * b).collect(),
            PhiOp::Dense(m) => mat_vec(m, v),
            PhiOp::Psd { side, p } => svec(&(p * smat(v, *side) * p)),
        }
    }
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (m * nalgebra::DVector::from_column_slice(v)).iter().copied().collect()
}

/// Jordan product `u o v`.
pub(crate) fn jordan_product(kind: Kind, u: &[f64], v: &[f64]) -> Vec<f64> {
    match kind {
        Kind::Nonneg => u.iter().zip(v).map(|(a, b)| a * b).collect(),
        Kind::Soc => {
            let mut out = vec![0.0; u.len()];
            out[0] = crate::linalg::dot(u, v);
            for i in 1..u.len() {
                out[i] = u[0] * v[i] + v[0] * u[i];
            }
            out
        }
        Kind::Psd { side } => {
            let a = smat(u, side);
            let b = smat(v, side);
            let p = &a * &b;
            svec(&((&p + p.transpose()) * 0.5))
        }
    }
}

/// Solve `lambda o u = r` for `u`; for the PSD cone `lambda` must be the
/// (diagonal) scaled point.
pub(crate) fn jordan_div(kind: Kind, lambda: &[f64], r: &[f64]) -> Vec<f64> {
    match kind {
        Kind::Nonneg => r.iter().zip(lambda).map(|(a, b)| a / b).collect(),
        Kind::Soc => {
            let det = soc_jdot(lambda);
            let l0 = lambda[0];
            let l1r1: f64 = lambda[1..].iter().zip(&r[1..]).map(|(a, b)| a * b).sum();
            let u0 = (l0 * r[0] - l1r1) / det;
            let mut out = vec![0.0; r.len()];
            out[0] = u0;
            for i in 1..r.len() {
                out[i] = (r[i] - u0 * lambda[i]) / l0;
            }
            out
        }
        Kind::Psd { side } => {
            let l = smat(lambda, side);
            let rm = smat(r, side);
            let mut u = DMatrix::zeros(side, side);
            for i in 0..side {
                for j in 0..side {
                    u[(i, j)] = 2.0 * rm[(i, j)] / (l[(i, i)] + l[(j, j)]);
                }
            }
            svec(&u)
        }
    }
}

/// Largest `alpha` with `lambda + alpha * d` in the cone (`lambda` interior,
/// diagonal for the PSD cone). Returns `f64::INFINITY` when unbounded.
pub(crate) fn max_step(kind: Kind, lambda: &[f64], d: &[f64]) -> f64 {
    match kind {
        Kind::Nonneg => lambda
            .iter()
            .zip(d)
            .filter(|(_, &dv)| dv < 0.0)
            .map(|(l, dv)| -l / dv)
            .fold(f64::INFINITY, f64::min),
        Kind::Soc => {
            let a = soc_jdot(d);
            let b = 2.0 * (lambda[0] * d[0] - lambda[1..].iter().zip(&d[1..]).map(|(x, y)| x * y).sum::<f64>());
            let c = soc_jdot(lambda);
            smallest_positive_root(a, b, c)
        }
        Kind::Psd { side } => {
            let l = smat(lambda, side);
            let dm = smat(d, side);
            let mut t = DMatrix::zeros(side, side);
            for i in 0..side {
                for j in 0..side {
                    t[(i, j)] = dm[(i, j)] / (l[(i, i)] * l[(j, j)]).sqrt();
                }
            }
            let min = crate::linalg::min_eigenvalue(&t);
            if min >= 0.0 {
                f64::INFINITY
            } else {
                -1.0 / min
            }
        }
    }
}

/// Smallest positive root of `a t^2 + b t + c` with `c > 0`.
fn smallest_positive_root(a: f64, b: f64, c: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if a.abs() <= 1e-300 + 1e-15 * scale {
        return if b < 0.0 { -c / b } else { f64::INFINITY };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    let mut best = f64::INFINITY;
    for r in [q / a, if q != 0.0 { c / q } else { f64::INFINITY }] {
        if r > 0.0 && r < best {
            best = r;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn nt_scaling_identity_soc() {
        let x = vec![3.0, 1.0, -0.5];
        let z = vec![2.0, -0.3, 0.7];
        let (sc, lam) = nt_scaling(Kind::Soc, &x, &z).unwrap();
        assert!(close(&sc.apply_w(&z), &lam, 1e-12));
        assert!(close(&sc.apply_winv_t(&x), &lam, 1e-12));
    }

    #[test]
    fn nt_scaling_identity_psd() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.5]);
        let b = DMatrix::from_row_slice(3, 3, &[1.0, -0.4, 0.0, -0.4, 3.0, 0.2, 0.0, 0.2, 0.7]);
        let (x, z) = (svec(&a), svec(&b));
        let (sc, lam) = nt_scaling(Kind::Psd { side: 3 }, &x, &z).unwrap();
        assert!(close(&sc.apply_w(&z), &lam, 1e-10));
        assert!(close(&sc.apply_winv_t(&x), &lam, 1e-10));
        // Phi agrees with W^T W
        let v = svec(&DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 2.0, 0.0, 2.0, -1.0, 0.5, 0.0, 0.5, 0.3],
        ));
        assert!(close(&sc.phi().apply(&v), &sc.apply_wt(&sc.apply_w(&v)), 1e-10));
    }

    #[test]
    fn jordan_div_inverts_product() {
        let lam = vec![2.0, 0.5, -0.3];
        let u = vec![0.3, 1.0, 2.0];
        let r = jordan_product(Kind::Soc, &lam, &u);
        assert!(close(&jordan_div(Kind::Soc, &lam, &r), &u, 1e-12));
        let l = svec(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            1.0, 2.0, 4.0,
        ])));
        let u = svec(&DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 2.0, 0.0, 2.0, -1.0, 0.5, 0.0, 0.5, 0.3],
        ));
        let r = jordan_product(Kind::Psd { side: 3 }, &l, &u);
        assert!(close(&jordan_div(Kind::Psd { side: 3 }, &l, &r), &u, 1e-12));
    }

    #[test]
    fn step_to_boundary() {
        assert_eq!(max_step(Kind::Nonneg, &[1.0, 2.0], &[-0.5, -4.0]), 0.5);
        // (1, 0) + t (0, 1) leaves the cone at t = 1
        let t = max_step(Kind::Soc, &[1.0, 0.0], &[0.0, 1.0]);
        assert!((t - 1.0).abs() < 1e-12);
        let l = svec(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0])));
        let d = svec(&DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, -1.0]));
        assert!((max_step(Kind::Psd { side: 2 }, &l, &d) - 0.5).abs() < 1e-12);
    }
}
