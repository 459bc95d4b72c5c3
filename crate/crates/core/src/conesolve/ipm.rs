//! Homogeneous self-dual interior-point iteration.
//!
//! Variables `(x_f, x_c, y, z, tau, kappa)` with residuals
//!
//! ```text
//! r1 = A x - b tau
//! r2 = A^T y + z - c tau        (z = 0 on free columns)
//! r3 = b^T y - c^T x - kappa
//! ```
//!
//! Each Newton system is reduced with the Nesterov-Todd scaling `W` to the
//! saddle system `[[A_c Phi A_c^T, A_f], [A_f^T, 0]]`, `Phi = W^T W`, solved
//! twice per factorization to eliminate `d tau`.

use nalgebra::{DMatrix, DVector, LU};

use super::cones::{jordan_div, jordan_product, max_step, nt_scaling, Block, Kind, PhiOp, Scaling};
use super::presolve::Presolved;
use super::{ConeBlock, ConicProgram, Residuals, SolveOptions, SolveStatus, SolverSolution};
use crate::linalg::{dot, norm_inf, smat};

/// Sparse matrix stored by columns as `(row, value)` lists.
struct SparseCols {
    nrows: usize,
    cols: Vec<Vec<(usize, f64)>>,
}

impl SparseCols {
    fn from_dense_cols(a: &DMatrix<f64>, cols: &[usize]) -> Self {
        let cols = cols
            .iter()
            .map(|&j| {
                (0..a.nrows())
                    .filter_map(|i| {
                        let v = a[(i, j)];
                        (v != 0.0).then_some((i, v))
                    })
                    .collect()
            })
            .collect();
        SparseCols { nrows: a.nrows(), cols }
    }

    fn mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows];
        for (col, &x) in self.cols.iter().zip(v) {
            if x != 0.0 {
                for &(i, a) in col {
                    out[i] += a * x;
                }
            }
        }
        out
    }

    fn tr_mul(&self, v: &[f64]) -> Vec<f64> {
        self.cols
            .iter()
            .map(|col| col.iter().map(|&(i, a)| a * v[i]).sum())
            .collect()
    }
}

/// Rows of `A_c` touching one cone block, each restricted to the block as a
/// sparse vector in block-local coordinates.
struct BlockRows {
    rows: Vec<usize>,
    vecs: Vec<Vec<(usize, f64)>>,
    /// `(k, l)` of each svec position on a PSD block
    positions: Vec<(usize, usize)>,
}

struct Data {
    m: usize,
    a_c: SparseCols,
    a_f: SparseCols,
    b: Vec<f64>,
    c_c: Vec<f64>,
    c_f: Vec<f64>,
    blocks: Vec<Block>,
    supports: Vec<BlockRows>,
    cone_cols: Vec<usize>,
    free_cols: Vec<usize>,
    nu: f64,
}

impl Data {
    fn new(program: &ConicProgram, pre: &Presolved) -> Self {
        let m = pre.a.nrows();
        let mut blocks = Vec::new();
        let mut cone_cols = Vec::new();
        let mut free_cols = Vec::new();
        let mut col = 0;
        for blk in &program.cones {
            let d = blk.dim();
            let kind = match *blk {
                ConeBlock::Free(_) => None,
                ConeBlock::Nonneg(_) => Some(Kind::Nonneg),
                ConeBlock::SecondOrder(_) => Some(Kind::Soc),
                ConeBlock::Psd(side) => Some(Kind::Psd { side }),
            };
            match kind {
                None => free_cols.extend(col..col + d),
                Some(kind) => {
                    if d > 0 {
                        blocks.push(Block::new(kind, cone_cols.len(), d));
                        cone_cols.extend(col..col + d);
                    }
                }
            }
            col += d;
        }
        let a_c = SparseCols::from_dense_cols(&pre.a, &cone_cols);
        let a_f = SparseCols::from_dense_cols(&pre.a, &free_cols);
        let mut slot = vec![usize::MAX; m];
        let supports = blocks
            .iter()
            .map(|blk| {
                let mut rows = Vec::new();
                let mut vecs: Vec<Vec<(usize, f64)>> = Vec::new();
                for j in blk.range() {
                    for &(i, v) in &a_c.cols[j] {
                        if slot[i] == usize::MAX {
                            slot[i] = rows.len();
                            rows.push(i);
                            vecs.push(Vec::new());
                        }
                        vecs[slot[i]].push((j - blk.offset, v));
                    }
                }
                for &i in &rows {
                    slot[i] = usize::MAX;
                }
                let positions = match blk.kind {
                    Kind::Psd { side } => (0..side).flat_map(|k| (k..side).map(move |l| (k, l))).collect(),
                    _ => Vec::new(),
                };
                BlockRows { rows, vecs, positions }
            })
            .collect();
        let nu = blocks.iter().map(Block::degree).sum::<usize>() as f64;
        Data {
            m,
            b: pre.b.clone(),
            c_c: cone_cols.iter().map(|&j| program.objective[j]).collect(),
            c_f: free_cols.iter().map(|&j| program.objective[j]).collect(),
            a_c,
            a_f,
            blocks,
            supports,
            cone_cols,
            free_cols,
            nu,
        }
    }

    fn nc(&self) -> usize {
        self.cone_cols.len()
    }

    fn nf(&self) -> usize {
        self.free_cols.len()
    }

    fn mul_ac(&self, v: &[f64]) -> Vec<f64> {
        self.a_c.mul(v)
    }

    fn mul_act(&self, v: &[f64]) -> Vec<f64> {
        self.a_c.tr_mul(v)
    }

    fn mul_af(&self, v: &[f64]) -> Vec<f64> {
        self.a_f.mul(v)
    }

    fn mul_aft(&self, v: &[f64]) -> Vec<f64> {
        self.a_f.tr_mul(v)
    }
}

/// Add the block's `A_b Phi A_b^T` to the normal matrix.
fn add_block_normal(k0: &mut DMatrix<f64>, data: &Data, blk: &Block, sup: &BlockRows, phi: &PhiOp) {
    let rows = &sup.rows;
    if rows.is_empty() {
        return;
    }
    match phi {
        PhiOp::Diag(d) => {
            for (local, j) in blk.range().enumerate() {
                let col = &data.a_c.cols[j];
                let w = d[local];
                for &(i, a) in col {
                    for &(k, b) in col {
                        k0[(i, k)] += w * a * b;
                    }
                }
            }
        }
        PhiOp::Dense(_) | PhiOp::Psd { .. } => {
            let s2 = std::f64::consts::SQRT_2;
            for (r, ar) in sup.vecs.iter().enumerate() {
                // u = Phi a_r, read back only where later rows are nonzero
                let u: Vec<f64> = match phi {
                    PhiOp::Psd { side, p } => {
                        let side = *side;
                        let g = if ar.len() * 4 <= side {
                            let mut g = DMatrix::zeros(side, side);
                            for &(idx, v) in ar {
                                let (k, l) = sup.positions[idx];
                                if k == l {
                                    g.ger(v, &p.column(k), &p.column(k), 1.0);
                                } else {
                                    let h = v / s2;
                                    g.ger(h, &p.column(k), &p.column(l), 1.0);
                                    g.ger(h, &p.column(l), &p.column(k), 1.0);
                                }
                            }
                            g
                        } else {
                            let mut dense = vec![0.0; blk.dim];
                            for &(idx, v) in ar {
                                dense[idx] = v;
                            }
                            p * smat(&dense, side) * p
                        };
                        sup.positions
                            .iter()
                            .map(|&(k, l)| if k == l { g[(k, k)] } else { s2 * g[(k, l)] })
                            .collect()
                    }
                    _ => {
                        let mut dense = vec![0.0; blk.dim];
                        for &(idx, v) in ar {
                            dense[idx] = v;
                        }
                        phi.apply(&dense)
                    }
                };
                let i = rows[r];
                for (s, as_) in sup.vecs.iter().enumerate().skip(r) {
                    let t: f64 = as_.iter().map(|&(idx, v)| v * u[idx]).sum();
                    if t != 0.0 {
                        let j = rows[s];
                        k0[(i, j)] += t;
                        if s != r {
                            k0[(j, i)] += t;
                        }
                    }
                }
            }
        }
    }
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Clone)]
struct Iterate {
    xc: Vec<f64>,
    xf: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Direction {
    xc: Vec<f64>,
    xf: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    tau: f64,
    kappa: f64,
    /// scaled directions `W^{-T} dx` and `W dz`
    xs: Vec<f64>,
    zs: Vec<f64>,
}

/// Factorized saddle system for the current scaling.
struct Kkt {
    k0: DMatrix<f64>,
    lu: Option<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl Kkt {
    fn new(data: &Data, phis: &[PhiOp]) -> Self {
        let (m, nf) = (data.m, data.nf());
        let dim = m + nf;
        let mut k0 = DMatrix::zeros(dim, dim);
        for ((blk, sup), phi) in data.blocks.iter().zip(&data.supports).zip(phis) {
            add_block_normal(&mut k0, data, blk, sup, phi);
        }
        for (j, col) in data.a_f.cols.iter().enumerate() {
            for &(i, a) in col {
                k0[(i, m + j)] = a;
                k0[(m + j, i)] = a;
            }
        }
        let maxdiag = (0..m).map(|i| k0[(i, i)].abs()).fold(1.0, f64::max);
        let mut kr = k0.clone();
        for i in 0..m {
            kr[(i, i)] += 1e-14 * maxdiag;
        }
        for j in 0..nf {
            kr[(m + j, m + j)] -= 1e-14;
        }
        let lu = if dim > 0 { Some(kr.lu()) } else { None };
        Kkt { k0, lu }
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let Some(lu) = &self.lu else {
            return Vec::new();
        };
        let b = DVector::from_column_slice(rhs);
        let Some(mut x) = lu.solve(&b) else {
            return vec![f64::NAN; rhs.len()];
        };
        let bn = b.amax().max(1e-300);
        for _ in 0..3 {
            let r = &b - &self.k0 * &x;
            if r.amax() <= 1e-15 * bn {
                break;
            }
            match lu.solve(&r) {
                Some(dx) => x += dx,
                None => break,
            }
        }
        x.iter().copied().collect()
    }
}

struct Newton<'a> {
    data: &'a Data,
    scal: Vec<Scaling>,
    lambda: Vec<f64>,
    phis: Vec<PhiOp>,
    kkt: Kkt,
    phi_cc: Vec<f64>,
    u2: Vec<f64>,
    den_base: f64,
    g_vec: Vec<f64>,
}

impl<'a> Newton<'a> {
    fn new(data: &'a Data, it: &Iterate) -> Option<Self> {
        let mut scal = Vec::with_capacity(data.blocks.len());
        let mut lambda = vec![0.0; data.nc()];
        for blk in &data.blocks {
            let r = blk.range();
            let (s, l) = nt_scaling(blk.kind, &it.xc[r.clone()], &it.z[r.clone()])?;
            lambda[r].copy_from_slice(&l);
            scal.push(s);
        }
        let phis: Vec<PhiOp> = scal.iter().map(Scaling::phi).collect();
        let kkt = Kkt::new(data, &phis);
        let mut newton = Newton {
            data,
            scal,
            lambda,
            phis,
            kkt,
            phi_cc: Vec::new(),
            u2: Vec::new(),
            den_base: 0.0,
            g_vec: Vec::new(),
        };
        newton.phi_cc = newton.apply_phi(&data.c_c);
        let mut rhs = data.mul_ac(&newton.phi_cc);
        axpy(1.0, &data.b, &mut rhs);
        rhs.extend_from_slice(&data.c_f);
        newton.u2 = newton.kkt.solve(&rhs);
        let acphicc = data.mul_ac(&newton.phi_cc);
        newton.g_vec = data.b.iter().zip(&acphicc).map(|(b, a)| b - a).collect();
        newton.den_base = newton.g(&newton.u2) + dot(&data.c_c, &newton.phi_cc);
        if newton.u2.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(newton)
    }

    fn g(&self, u: &[f64]) -> f64 {
        let m = self.data.m;
        dot(&self.g_vec, &u[..m]) - dot(&self.data.c_f, &u[m..])
    }

    fn apply_phi(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (blk, phi) in self.data.blocks.iter().zip(&self.phis) {
            let r = blk.range();
            let res = phi.apply(&v[r.clone()]);
            out[r].copy_from_slice(&res);
        }
        out
    }

    fn blockwise<F>(&self, v: &[f64], f: F) -> Vec<f64>
    where
        F: Fn(&Block, &Scaling, &[f64], &[f64]) -> Vec<f64>,
    {
        let mut out = vec![0.0; v.len()];
        for (blk, sc) in self.data.blocks.iter().zip(&self.scal) {
            let r = blk.range();
            let res = f(blk, sc, &self.lambda[r.clone()], &v[r.clone()]);
            out[r].copy_from_slice(&res);
        }
        out
    }

    /// Solve the linearized system with residual weight `eta` and
    /// complementarity right-hand sides `rc` (scaled space) and `rtau`.
    fn direction(&self, it: &Iterate, res: &Resid, eta: f64, rc: &[f64], rtau: f64) -> Option<Direction> {
        let data = self.data;
        let m = data.m;
        // t = W^T (lambda \ rc) + eta Phi r2_c
        let lrc = self.blockwise(rc, |blk, _, lam, r| jordan_div(blk.kind, lam, r));
        let wt_lrc = self.blockwise(&lrc, |_, sc, _, v| sc.apply_wt(v));
        let mut t = wt_lrc.clone();
        axpy(eta, &self.apply_phi(&res.r2c), &mut t);
        let act = data.mul_ac(&t);
        let mut rhs: Vec<f64> = res.r1.iter().zip(&act).map(|(r, a)| -eta * r - a).collect();
        rhs.extend(res.r2f.iter().map(|r| -eta * r));
        let u1 = self.kkt.solve(&rhs);
        let num = -eta * res.r3 - self.g(&u1) + dot(&data.c_c, &t) + rtau / it.tau;
        let den = self.den_base + it.kappa / it.tau;
        let dtau = num / den;
        let mut u = u1;
        axpy(dtau, &self.u2, &mut u);
        let dy = u[..m].to_vec();
        let dxf = u[m..].to_vec();
        // dz = -eta r2_c - A_c^T dy + c_c dtau
        let acty = data.mul_act(&dy);
        let dz: Vec<f64> = res
            .r2c
            .iter()
            .zip(&acty)
            .zip(&data.c_c)
            .map(|((r, a), c)| -eta * r - a + c * dtau)
            .collect();
        let phidz = self.apply_phi(&dz);
        let dxc: Vec<f64> = wt_lrc.iter().zip(&phidz).map(|(a, b)| a - b).collect();
        let dkappa = (rtau - it.kappa * dtau) / it.tau;
        let xs = self.blockwise(&dxc, |_, sc, _, v| sc.apply_winv_t(v));
        let zs = self.blockwise(&dz, |_, sc, _, v| sc.apply_w(v));
        let all_finite = dtau.is_finite()
            && dkappa.is_finite()
            && dy.iter().chain(&dxf).chain(&dz).chain(&dxc).all(|v| v.is_finite());
        if !all_finite {
            return None;
        }
        Some(Direction {
            xc: dxc,
            xf: dxf,
            y: dy,
            z: dz,
            tau: dtau,
            kappa: dkappa,
            xs,
            zs,
        })
    }

    fn step_length(&self, it: &Iterate, d: &Direction) -> f64 {
        let mut alpha = f64::INFINITY;
        for blk in &self.data.blocks {
            let r = blk.range();
            let lam = &self.lambda[r.clone()];
            alpha = alpha.min(max_step(blk.kind, lam, &d.xs[r.clone()]));
            alpha = alpha.min(max_step(blk.kind, lam, &d.zs[r]));
        }
        if d.tau < 0.0 {
            alpha = alpha.min(-it.tau / d.tau);
        }
        if d.kappa < 0.0 {
            alpha = alpha.min(-it.kappa / d.kappa);
        }
        alpha
    }
}

struct Resid {
    r1: Vec<f64>,
    r2c: Vec<f64>,
    r2f: Vec<f64>,
    r3: f64,
    /// `A x`, `A^T y` pieces reused by the termination tests
    ax: Vec<f64>,
    atyc: Vec<f64>,
    atyf: Vec<f64>,
    cx: f64,
    by: f64,
}

fn residuals(data: &Data, it: &Iterate) -> Resid {
    let mut ax = data.mul_ac(&it.xc);
    axpy(1.0, &data.mul_af(&it.xf), &mut ax);
    let atyc = data.mul_act(&it.y);
    let atyf = data.mul_aft(&it.y);
    let cx = dot(&data.c_c, &it.xc) + dot(&data.c_f, &it.xf);
    let by = dot(&data.b, &it.y);
    let r1 = ax.iter().zip(&data.b).map(|(a, b)| a - b * it.tau).collect();
    let r2c = atyc
        .iter()
        .zip(&it.z)
        .zip(&data.c_c)
        .map(|((a, z), c)| a + z - c * it.tau)
        .collect();
    let r2f = atyf.iter().zip(&data.c_f).map(|(a, c)| a - c * it.tau).collect();
    Resid {
        r1,
        r2c,
        r2f,
        r3: by - cx - it.kappa,
        ax,
        atyc,
        atyf,
        cx,
        by,
    }
}

/// Distance of `v` outside the cone, per block; used to pick the initial
/// shift `v + (1 + t) e`.
fn cone_shift(data: &Data, v: &mut [f64]) {
    let mut e = vec![0.0; v.len()];
    for blk in &data.blocks {
        blk.identity(&mut e[blk.range()]);
    }
    let mut viol = f64::NEG_INFINITY;
    for blk in &data.blocks {
        let p = &v[blk.range()];
        let t = match blk.kind {
            Kind::Nonneg => p.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(-x)),
            Kind::Soc => p[1..].iter().map(|x| x * x).sum::<f64>().sqrt() - p[0],
            Kind::Psd { side } => -crate::linalg::min_eigenvalue(&crate::linalg::smat(p, side)),
        };
        viol = viol.max(t);
    }
    let nrm = norm_inf(v).max(1.0);
    if viol >= -1e-8 * nrm {
        axpy(1.0 + viol.max(0.0), &e, v);
    }
}

/// Least-norm primal and dual points pushed into the cone interior.
fn initial_point(data: &Data) -> Iterate {
    let (m, nc, nf) = (data.m, data.nc(), data.nf());
    let ident: Vec<PhiOp> = data.blocks.iter().map(|b| PhiOp::Diag(vec![1.0; b.dim])).collect();
    let kkt = Kkt::new(data, &ident);
    let mut xc = vec![0.0; nc];
    let mut xf = vec![0.0; nf];
    let mut y = vec![0.0; m];
    let mut z = vec![0.0; nc];
    if m + nf > 0 {
        let mut rhs = data.b.clone();
        rhs.extend(std::iter::repeat_n(0.0, nf));
        let u = kkt.solve(&rhs);
        if u.iter().all(|v| v.is_finite()) {
            xc = data.mul_act(&u[..m]);
            xf = u[m..].to_vec();
        }
        let mut rhs = data.mul_ac(&data.c_c);
        rhs.extend_from_slice(&data.c_f);
        let u = kkt.solve(&rhs);
        if u.iter().all(|v| v.is_finite()) {
            y = u[..m].to_vec();
            let aty = data.mul_act(&y);
            z = data.c_c.iter().zip(&aty).map(|(c, a)| c - a).collect();
        }
    } else {
        z = data.c_c.clone();
    }
    cone_shift(data, &mut xc);
    cone_shift(data, &mut z);
    Iterate {
        xc,
        xf,
        y,
        z,
        tau: 1.0,
        kappa: 1.0,
    }
}

struct Metrics {
    pres: f64,
    dres: f64,
    gap_rel: f64,
    pobj: f64,
    dobj: f64,
}

fn metrics(data: &Data, it: &Iterate, res: &Resid, bn: f64, cn: f64) -> Metrics {
    let tau = it.tau;
    let pres = norm_inf(&res.r1) / tau / (1.0 + bn);
    let dres = norm_inf(&res.r2c).max(norm_inf(&res.r2f)) / tau / (1.0 + cn);
    let pobj = res.cx / tau;
    let dobj = res.by / tau;
    let _ = data;
    Metrics {
        pres,
        dres,
        gap_rel: (pobj - dobj).abs() / (1.0 + pobj.abs()),
        pobj,
        dobj,
    }
}

/// Iterations without a 10% gain in accuracy or in an infeasibility
/// certificate after which the run is declared stalled.
const STALL_ITERATIONS: usize = 25;

/// Normalized residuals of the primal and dual infeasibility certificates
/// carried by the iterate; `inf` when the certificate has the wrong sign.
fn certificate_ratios(res: &Resid, it: &Iterate, bn: f64, cn: f64) -> (f64, f64) {
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    if res.by > 0.0 {
        let r = res
            .atyc
            .iter()
            .zip(&it.z)
            .map(|(a, z)| (a + z).abs())
            .chain(res.atyf.iter().map(|a| a.abs()))
            .fold(0.0, f64::max);
        primal = r / cn.max(1.0) / res.by;
    }
    if res.cx < 0.0 {
        dual = norm_inf(&res.ax) / bn.max(1.0) / (-res.cx);
    }
    (primal, dual)
}

pub(super) fn run(program: &ConicProgram, pre: &Presolved, opts: &SolveOptions) -> SolverSolution {
    let data = Data::new(program, pre);
    let bn = norm_inf(&data.b);
    let cn = norm_inf(&data.c_c).max(norm_inf(&data.c_f));
    let mut it = initial_point(&data);
    let mut status = SolveStatus::IterLimit;
    let mut certificate: Option<Cert> = None;
    let mut best: Option<(f64, Iterate)> = None;
    let mut iterations = 0;
    let mut small_steps = 0;
    // best (merit, certificate ratio) so far and when either last improved
    let mut progress = (f64::INFINITY, f64::INFINITY);
    let mut last_progress = 0;

    for iter in 0..=opts.max_iter {
        iterations = iter;
        let res = residuals(&data, &it);
        let met = metrics(&data, &it, &res, bn, cn);
        let merit = met.pres.max(met.dres).max(met.gap_rel);
        if best.as_ref().is_none_or(|(m, _)| merit < *m) {
            best = Some((merit, it.clone()));
        }
        let (cert_primal, cert_dual) = certificate_ratios(&res, &it, bn, cn);
        let cert_ratio = cert_primal.min(cert_dual);
        if merit < 0.9 * progress.0 || cert_ratio < 0.9 * progress.1 {
            progress = (progress.0.min(merit), progress.1.min(cert_ratio));
            last_progress = iter;
        }
        if opts.verbose {
            eprintln!(
                "{iter:3} pobj {:+.8e} dobj {:+.8e} pres {:.2e} dres {:.2e} gap {:.2e} tau {:.2e} kappa {:.2e}",
                met.pobj, met.dobj, met.pres, met.dres, met.gap_rel, it.tau, it.kappa
            );
        }
        if met.pres <= opts.tol && met.dres <= opts.tol && met.gap_rel <= opts.tol {
            status = SolveStatus::Optimal;
            break;
        }
        // infeasibility certificates
        if cert_primal <= opts.tol_cert {
            status = SolveStatus::PrimalInfeasible;
            certificate = Some(Cert::Primal(it.y.iter().map(|v| v / res.by).collect()));
            break;
        }
        if cert_dual <= opts.tol_cert {
            status = SolveStatus::DualInfeasible;
            let s = -res.cx;
            certificate = Some(Cert::Dual(
                it.xc.iter().map(|v| v / s).collect(),
                it.xf.iter().map(|v| v / s).collect(),
            ));
            break;
        }
        if iter == opts.max_iter {
            break;
        }
        if iter - last_progress >= STALL_ITERATIONS {
            status = SolveStatus::NumericalFailure;
            break;
        }

        let Some(newton) = Newton::new(&data, &it) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let mu = (dot(&it.xc, &it.z) + it.tau * it.kappa) / (data.nu + 1.0);
        let lam = &newton.lambda;
        let lamsq = newton.blockwise(lam, |blk, _, l, _| jordan_product(blk.kind, l, l));
        // predictor
        let rc_a: Vec<f64> = lamsq.iter().map(|v| -v).collect();
        let Some(da) = newton.direction(&it, &res, 1.0, &rc_a, -it.tau * it.kappa) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let alpha_a = newton.step_length(&it, &da).min(1.0);
        let sigma = (1.0 - alpha_a).powi(3);
        // corrector
        let mut e = vec![0.0; data.nc()];
        for blk in &data.blocks {
            blk.identity(&mut e[blk.range()]);
        }
        let cross = newton.blockwise(&da.xs, |blk, _, _, xs| {
            jordan_product(blk.kind, xs, &da.zs[blk.range()])
        });
        let rc: Vec<f64> = lamsq
            .iter()
            .zip(&e)
            .zip(&cross)
            .map(|((l, e), c)| -l + sigma * mu * e - c)
            .collect();
        let rtau = -it.tau * it.kappa + sigma * mu - da.tau * da.kappa;
        let Some(d) = newton.direction(&it, &res, 1.0 - sigma, &rc, rtau) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let alpha = (0.99 * newton.step_length(&it, &d)).min(1.0);
        if alpha < 1e-10 {
            small_steps += 1;
        } else {
            small_steps = 0;
        }
        if small_steps >= 3 {
            status = SolveStatus::NumericalFailure;
            break;
        }
        axpy(alpha, &d.xc, &mut it.xc);
        axpy(alpha, &d.xf, &mut it.xf);
        axpy(alpha, &d.y, &mut it.y);
        axpy(alpha, &d.z, &mut it.z);
        it.tau += alpha * d.tau;
        it.kappa += alpha * d.kappa;
        if !(it.tau > 0.0 && it.kappa > 0.0) {
            status = SolveStatus::NumericalFailure;
            break;
        }
    }

    if matches!(status, SolveStatus::NumericalFailure | SolveStatus::IterLimit) {
        if let Some((merit, b)) = best {
            it = b;
            if merit <= opts.tol_near {
                status = SolveStatus::NearOptimal;
            }
        }
    }
    assemble(program, pre, &data, &it, status, certificate, iterations)
}

enum Cert {
    Primal(Vec<f64>),
    Dual(Vec<f64>, Vec<f64>),
}

fn assemble(
    program: &ConicProgram,
    pre: &Presolved,
    data: &Data,
    it: &Iterate,
    status: SolveStatus,
    cert: Option<Cert>,
    iterations: usize,
) -> SolverSolution {
    let n = program.num_vars();
    let scatter = |xc: &[f64], xf: &[f64]| {
        let mut x = vec![0.0; n];
        for (k, &j) in data.cone_cols.iter().enumerate() {
            x[j] = xc[k];
        }
        for (k, &j) in data.free_cols.iter().enumerate() {
            x[j] = xf[k];
        }
        x
    };
    let unscale_y = |y: &[f64]| {
        let mut out = vec![0.0; program.num_eqs()];
        for (k, (&i, &s)) in pre.rows.iter().zip(&pre.row_scale).enumerate() {
            out[i] = y[k] / s;
        }
        out
    };
    let tau = it.tau;
    let primal = scatter(
        &it.xc.iter().map(|v| v / tau).collect::<Vec<_>>(),
        &it.xf.iter().map(|v| v / tau).collect::<Vec<_>>(),
    );
    let dual_eq = unscale_y(&it.y.iter().map(|v| v / tau).collect::<Vec<_>>());
    let certificate = cert.map(|c| match c {
        Cert::Primal(y) => unscale_y(&y),
        Cert::Dual(xc, xf) => scatter(&xc, &xf),
    });
    SolverSolution {
        status,
        primal,
        dual_eq,
        dual_cone: vec![0.0; n],
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        residuals: Residuals::default(),
        iterations,
        certificate,
        certificate_residual: f64::NAN,
        cone_offsets: Vec::new(),
        cones: Vec::new(),
    }
}
