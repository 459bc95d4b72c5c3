use nalgebra::DMatrix;

use super::*;
use crate::conesolve::{solve, SolveOptions, SolveStatus};

fn poly(n: usize, terms: &[(&[u32], f64)]) -> Poly {
    Poly::from_terms(n, terms.iter().map(|(e, c)| (e.to_vec(), *c))).unwrap()
}

/// The univariate example on [0, 3] with the chain 1 <= y0 <= ... <= y5 <= 2.
fn univariate_chain() -> DromProblem {
    let a = DMatrix::from_row_slice(
        6,
        4,
        &[
            0., 0., 0., 0., //
            0., -1., -1., 0., //
            2., -1., 0., 1., //
            2., 1., 0., 1., //
            0., 0., 0., 1., //
            -1., 0., 0., 1.,
        ],
    );
    let b = vec![0., 2., -1., 1., -1., -2.];
    let f = poly(
        4,
        &[
            (&[1, 0, 0, 0], -1.),
            (&[0, 1, 0, 0], -2.),
            (&[0, 0, 1, 0], -1.),
            (&[0, 0, 0, 1], 2.),
        ],
    );
    let mut c: Vec<Poly> = (0..4).map(|i| Poly::var(4, i)).collect();
    c.push(poly(
        4,
        &[
            (&[0, 0, 0, 0], 1.),
            (&[1, 0, 0, 0], -1.),
            (&[0, 1, 0, 0], -1.),
            (&[0, 0, 1, 0], -1.),
            (&[0, 0, 0, 1], -1.),
        ],
    ));
    let g = SemiAlgSet::new(1, vec![poly(1, &[(&[1], 3.), (&[2], -1.)])]).unwrap();
    // y0 - s >= 0, y_{i+1} - y_i >= 0, 2 s - y5 >= 0
    let mut t = DMatrix::zeros(7, 6);
    let mut u = vec![0.0; 7];
    t[(0, 0)] = 1.0;
    u[0] = -1.0;
    for i in 0..5 {
        t[(i + 1, i + 1)] = 1.0;
        t[(i + 1, i)] = -1.0;
    }
    t[(6, 5)] = -1.0;
    u[6] = 2.0;
    DromProblem::new(4, 1, 5, f, c, g, a, b, vec![ConeYBlock::polyhedral(t, u)]).unwrap()
}

#[test]
fn univariate_chain_dimensions() {
    let prob = univariate_chain();
    let (pb, maps) = assemble_order_k(&prob, 3).unwrap();
    assert_eq!(maps.z.len(), 7);
    let sides: Vec<usize> = maps
        .moment_blocks
        .iter()
        .map(|b| match b.cone {
            crate::conesolve::ConeBlock::Psd(s) => s,
            _ => 0,
        })
        .collect();
    assert_eq!(sides, vec![4, 3]);
    assert!(maps.cone_y.homogenizer.is_some());
    assert_eq!(maps.cone_y.blocks[0].len(), 7);
    assert_eq!(maps.decision_half_degree, 1);
    pb.build().validate().unwrap();
}

#[test]
fn univariate_chain_relaxation_value() {
    let prob = univariate_chain();
    let (pb, maps) = assemble_order_k(&prob, 3).unwrap();
    let sol = solve(&pb.build(), &SolveOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    let value = pb.objective_value(&sol);
    assert!((value + 0.0326).abs() < 5e-4, "value {value}");
    let (x, w) = recover_primal(&sol, &maps, 4).unwrap();
    assert!((w.values()[0] - 1.0).abs() < 1e-12);
    let expected = [0.6775, 0.0, 0.0, 0.3225];
    for (a, b) in x.iter().zip(expected) {
        assert!((a - b).abs() < 1e-3, "x {x:?}");
    }
}

#[test]
fn univariate_chain_run_certifies() {
    let prob = univariate_chain();
    let rep = run(&prob, &DromOptions::default()).unwrap();
    assert_eq!(rep.status, Status::Solved, "{}", rep.message);
    assert_eq!(rep.order_k, 3);
    let mu = rep.worst_case_measure.unwrap();
    assert_eq!(mu.len(), 2);
}

#[test]
fn lmi_without_bounded_flag_is_rejected() {
    let blk = ConeYBlock::lmi(vec![DMatrix::identity(1, 1)], DMatrix::zeros(1, 1), false);
    assert!(matches!(blk.validate(1), Err(DromError::ConeY(_))));
}

#[test]
fn homogenized_block_needs_zero_offset() {
    let blk = ConeYBlock::polyhedral(DMatrix::identity(2, 2), vec![1.0, 0.0]).homogenized();
    assert!(blk.validate(2).is_err());
    let ok = ConeYBlock::polyhedral(DMatrix::identity(2, 2), vec![0.0, 0.0]).homogenized();
    ok.validate(2).unwrap();
}

#[test]
fn identity_polyhedron_is_the_orthant() {
    let mut pb = ProgramBuilder::new();
    let y = pb.add_free(3);
    let ys: Vec<LinExpr> = (0..3).map(|i| y.var(i)).collect();
    let blk = ConeYBlock::polyhedral(DMatrix::identity(3, 3), vec![0.0; 3]);
    let h = build_cone_y(&mut pb, &[blk], &ys).unwrap();
    assert!(h.homogenizer.is_none());
    assert_eq!(h.blocks[0].len(), 3);
    assert_eq!(pb.num_rows(), 3);
}

#[test]
fn h_roundtrip() {
    let prob = univariate_chain();
    let h = prob.h_poly();
    let (a, b, d) = affine_split(&h, 4, 1, Some(5)).unwrap();
    assert_eq!(d, 5);
    assert_eq!(a, prob.a);
    assert_eq!(b, prob.b);
}

#[test]
fn nonaffine_h_is_rejected() {
    let h = poly(2, &[(&[2, 1], 1.0)]);
    assert!(matches!(affine_split(&h, 1, 1, None), Err(DromError::NotAffine(_))));
}
