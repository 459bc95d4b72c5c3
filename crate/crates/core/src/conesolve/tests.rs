use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn opts() -> SolveOptions {
    SolveOptions::default()
}

#[test]
fn psd_two_by_two() {
    // min x  s.t. [[x, 1], [1, x]] psd
    let mut pb = ProgramBuilder::new();
    let x = pb.add_free(1);
    pb.add_lmi(2, |i, j| if i == j { x.var(0) } else { LinExpr::constant(1.0) });
    pb.minimize(x.var(0));
    let sol = solve(&pb.build(), &opts()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.primal[0] - 1.0).abs() < 1e-7, "{}", sol.primal[0]);
    assert!((sol.dual_objective - 1.0).abs() < 1e-7);
}

#[test]
fn simplex_lp_picks_min_entry() {
    let c = [3.0, -1.5, 2.0, 0.25];
    let mut pb = ProgramBuilder::new();
    let x = pb.add_nonneg(4);
    let mut sum = LinExpr::constant(-1.0);
    let mut obj = LinExpr::new();
    for (i, ci) in c.iter().enumerate() {
        sum.add_term(x.col(i), 1.0);
        obj.add_term(x.col(i), *ci);
    }
    pb.add_eq(sum);
    pb.minimize(obj);
    let sol = solve(&pb.build(), &opts()).unwrap();
    assert!(sol.is_optimal());
    assert!((sol.primal_objective + 1.5).abs() < 1e-7, "{sol:?}");
    assert!((sol.primal[1] - 1.0).abs() < 1e-7);
}

#[test]
fn second_order_cone_projection() {
    // min t  s.t. ||(-3, 4)|| <= t
    let mut pb = ProgramBuilder::new();
    let t = pb.add_free(1);
    pb.add_soc_constraint(&[t.var(0), LinExpr::constant(-3.0), LinExpr::constant(4.0)]);
    pb.minimize(t.var(0));
    let sol = solve(&pb.build(), &opts()).unwrap();
    assert!(sol.is_optimal());
    assert!((sol.primal[0] - 5.0).abs() < 1e-7);
}

#[test]
fn detects_primal_infeasible() {
    // x >= 0, x1 + x2 = -1
    let p = ConicProgram {
        objective: vec![1.0, 1.0],
        eq_matrix: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
        eq_rhs: vec![-1.0],
        cones: vec![ConeBlock::Nonneg(2)],
    };
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
    let y = sol.certificate.as_ref().unwrap();
    assert!((crate::linalg::dot(&p.eq_rhs, y) - 1.0).abs() < 1e-9);
    assert!(sol.certificate_residual <= 1e-7);
}

#[test]
fn detects_inconsistent_equalities_in_presolve() {
    let p = ConicProgram {
        objective: vec![0.0, 0.0],
        eq_matrix: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]),
        eq_rhs: vec![1.0, 3.0],
        cones: vec![ConeBlock::Free(2)],
    };
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
}

#[test]
fn detects_dual_infeasible() {
    // min -x1 s.t. x1 - x2 = 0, x >= 0 : unbounded
    let p = ConicProgram {
        objective: vec![-1.0, 0.0],
        eq_matrix: DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
        eq_rhs: vec![0.0],
        cones: vec![ConeBlock::Nonneg(2)],
    };
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, SolveStatus::DualInfeasible);
    assert!(sol.certificate_residual <= 1e-7);
}

#[test]
fn redundant_rows_are_dropped() {
    // x1 + x2 = 1 stated twice (once scaled), min x1 - x2
    let p = ConicProgram {
        objective: vec![1.0, -1.0],
        eq_matrix: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]),
        eq_rhs: vec![1.0, 2.0],
        cones: vec![ConeBlock::Nonneg(2)],
    };
    let sol = solve(&p, &opts()).unwrap();
    assert!(sol.is_optimal());
    assert!((sol.primal_objective + 1.0).abs() < 1e-8);
    assert!(sol.residuals.primal < 1e-8);
}

/// Random LP `min c^T x, A x = b, x >= 0` with a planted optimal vertex:
/// pick a basis `B`, set `x_B > 0`, `b = A x`, `y` random and `c = A^T y + s`
/// with `s_B = 0`, `s_N > 0`. Optimal value is `c^T x = b^T y`.
fn planted_lp(rng: &mut ChaCha8Rng, m: usize, n: usize) -> (ConicProgram, f64) {
    let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let mut x = vec![0.0; n];
    let mut s = vec![0.0; n];
    for j in 0..n {
        if j < m {
            x[j] = rng.random_range(0.5..2.0);
        } else {
            s[j] = rng.random_range(0.5..2.0);
        }
    }
    let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..m).map(|i| (0..n).map(|j| a[(i, j)] * x[j]).sum()).collect();
    let c: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| a[(i, j)] * y[i]).sum::<f64>() + s[j])
        .collect();
    let opt = crate::linalg::dot(&c, &x);
    (
        ConicProgram {
            objective: c,
            eq_matrix: a,
            eq_rhs: b,
            cones: vec![ConeBlock::Nonneg(n)],
        },
        opt,
    )
}

#[test]
fn random_planted_lps() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..100 {
        let m = rng.random_range(2..8);
        let n = m + rng.random_range(1..8);
        let (p, opt) = planted_lp(&mut rng, m, n);
        let sol = solve(&p, &opts()).unwrap();
        assert!(sol.is_optimal(), "trial {trial}: {:?}", sol.status);
        let err = (sol.primal_objective - opt).abs();
        assert!(err <= 1e-7 * (1.0 + opt.abs()), "trial {trial}: err {err}");
        // weak duality at the returned pair
        let slack = sol.primal_objective - sol.dual_objective;
        assert!(slack >= -1e-8 * (1.0 + opt.abs()), "trial {trial}: {slack:e}");
    }
}

#[test]
fn deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (p, _) = planted_lp(&mut rng, 5, 9);
    let a = solve(&p, &opts()).unwrap();
    let b = solve(&p, &opts()).unwrap();
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.primal, b.primal);
    assert_eq!(a.dual_eq, b.dual_eq);
}

#[test]
fn psd_complementarity_at_optimum() {
    // min trace(C X) s.t. trace(X) = 1, X psd  -> smallest eigenvalue of C
    let cm = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, -1.0, 0.0, -1.0, 1.0]);
    let mut pb = ProgramBuilder::new();
    let x = pb.add_psd(3);
    let mut tr = LinExpr::constant(-1.0);
    let mut obj = LinExpr::new();
    for i in 0..3 {
        tr.add_scaled(1.0, &x.entry(i, i));
        for j in 0..3 {
            obj.add_scaled(cm[(i, j)], &x.entry(i, j));
        }
    }
    pb.add_eq(tr);
    pb.minimize(obj);
    let sol = solve(&pb.build(), &opts()).unwrap();
    assert!(sol.is_optimal());
    let lmin = crate::linalg::min_eigenvalue(&cm);
    assert!((sol.primal_objective - lmin).abs() < 1e-7);
    let xm = x.primal_matrix(&sol);
    let zm = x.dual_matrix(&sol);
    assert!((&xm * &zm).trace().abs() < 1e-7);
}

#[test]
fn listing_dump_roundtrips_dimensions() {
    let mut pb = ProgramBuilder::new();
    let x = pb.add_nonneg(2);
    pb.add_eq(&x.var(0) + &x.var(1));
    let mut buf = Vec::new();
    pb.build().write_listing(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.contains("vars 2 eqs 1"));
    assert!(text.contains("cones L2"));
}
