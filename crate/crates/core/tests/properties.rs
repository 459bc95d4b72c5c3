//! Randomized invariants of every module.

#![allow(clippy::needless_range_loop)]

mod support;

use dromsos::conesolve::{solve, ProgramBuilder, SolveOptions};
use dromsos::drom::{run, DromOptions, DromProblem, Status, Tightness};
use dromsos::linalg::min_eigenvalue;
use dromsos::momentkit::{compile_cone_sg, SemiAlgSet};
use dromsos::polycore::{basis, binomial, graded_index, riesz_pair, Poly};
use dromsos::soskit::{compile_qm_membership, GramCertificate, PolyExpr, QuadraticModuleSpec};
use proptest::prelude::*;
use support::*;

fn passes(check: Result<(), String>) {
    if let Err(e) = check {
        panic!("{e}");
    }
}

#[test]
fn localizing_identity_holds() {
    passes(localizing_identity(100));
}

#[test]
fn flat_sequences_roundtrip_through_extraction() {
    passes(flat_roundtrip(100));
}

#[test]
fn univariate_hankel_conditions_are_exact() {
    passes(univariate_hankel(100));
}

#[test]
fn sos_convex_polynomials_satisfy_jensen() {
    passes(jensen(100));
}

#[test]
fn optimal_solves_satisfy_weak_duality_and_complementarity() {
    passes(conic_duality(100));
}

#[test]
fn relaxation_value_decreases_with_order() {
    passes(relaxation_monotonicity(100));
}

#[test]
fn riesz_pairing_integrates_atomic_measures() {
    passes(run_cases(
        100,
        (1usize..=3, 0u32..=4, 1usize..=4, any::<u64>()),
        |(p, d, r, seed)| {
            let mut g = rng(seed);
            let q = random_poly(&mut g, p, d);
            let mu = random_measure(&mut g, r, p, -1.5, 1.5);
            let lhs = ok(riesz_pair(&q, &mu.moments(d)))?;
            let mut rhs = 0.0;
            let mut scale = 0.0;
            for (u, w) in mu.atoms.iter().zip(&mu.weights) {
                let v = w * ok(q.eval(u))?;
                rhs += v;
                scale += v.abs();
            }
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale.max(1.0), "{lhs} vs {rhs}");
            Ok(())
        },
    ));
}

#[test]
fn riesz_pairing_is_bilinear() {
    passes(run_cases(100, (1usize..=3, 0u32..=4, any::<u64>()), |(p, d, seed)| {
        let mut g = rng(seed);
        let (q1, q2) = (random_poly(&mut g, p, d), random_poly(&mut g, p, d));
        let (z1, z2) = (random_tms(&mut g, p, d), random_tms(&mut g, p, d));
        let (a, b) = (g_range(&mut g), g_range(&mut g));
        let q = &q1.scale(a) + &q2.scale(b);
        let z = ok(z1.scale(a).try_add(&z2.scale(b)))?;
        let in_q = ok(riesz_pair(&q, &z1))?;
        let want_q = a * ok(riesz_pair(&q1, &z1))? + b * ok(riesz_pair(&q2, &z1))?;
        prop_assert!((in_q - want_q).abs() <= 1e-10 * (1.0 + want_q.abs()));
        let in_z = ok(riesz_pair(&q1, &z))?;
        let want_z = a * ok(riesz_pair(&q1, &z1))? + b * ok(riesz_pair(&q1, &z2))?;
        prop_assert!((in_z - want_z).abs() <= 1e-10 * (1.0 + want_z.abs()));
        Ok(())
    }));
}

fn g_range(g: &mut rand_chacha::ChaCha8Rng) -> f64 {
    use rand::Rng;
    g.random_range(-2.0..2.0)
}

#[test]
fn basis_enumeration_is_a_graded_bijection() {
    passes(run_cases(100, (1usize..=4, 0u32..=5), |(n, d)| {
        let b = basis(n, d);
        prop_assert_eq!(b.len(), binomial(n + d as usize, d as usize));
        let mut last = 0;
        for (i, alpha) in b.iter().enumerate() {
            prop_assert_eq!(ok(b.index_of(alpha))?, i);
            prop_assert_eq!(graded_index(alpha), i);
            prop_assert!(alpha.degree() >= last);
            last = alpha.degree();
        }
        Ok(())
    }));
}

#[test]
fn hessian_is_exactly_symmetric() {
    passes(run_cases(100, (1usize..=4, 0u32..=5, any::<u64>()), |(n, d, seed)| {
        let f = random_poly(&mut rng(seed), n, d);
        let h = f.hessian();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(&h[i][j], &h[j][i]);
            }
        }
        Ok(())
    }));
}

#[test]
fn polynomials_store_no_zero_terms() {
    passes(run_cases(100, (1usize..=3, 0u32..=4, any::<u64>()), |(n, d, seed)| {
        let mut g = rng(seed);
        let f = random_poly(&mut g, n, d);
        let diff = &f - &f;
        prop_assert!(diff.is_zero());
        prop_assert_eq!(diff.num_terms(), 0);
        let prod = &f * &random_poly(&mut g, n, d);
        prop_assert!(prod.terms().all(|(_, c)| c != 0.0));
        let max = prod.terms().map(|(e, _)| e.degree()).max().unwrap_or(0);
        prop_assert_eq!(prod.degree(), max);
        Ok(())
    }));
}

#[test]
fn truncation_is_consistent() {
    passes(run_cases(100, (1usize..=3, 0u32..=6, any::<u64>()), |(p, d, seed)| {
        let mut g = rng(seed);
        let z = random_tms(&mut g, p, d);
        for d1 in 0..=d {
            let once = ok(z.truncate(d1))?;
            prop_assert_eq!(once.values(), &z.values()[..once.len()]);
            for d2 in 0..=d1 {
                prop_assert_eq!(ok(once.truncate(d2))?, ok(z.truncate(d2))?);
            }
        }
        Ok(())
    }));
}

/// The box `[-1, 1]^p` written with one quadratic generator per coordinate.
fn unit_box(p: usize) -> SemiAlgSet {
    let gens = (0..p)
        .map(|i| {
            let v = Poly::var(p, i);
            &Poly::constant(p, 1.0) - &(&v * &v)
        })
        .collect();
    SemiAlgSet::new(p, gens).unwrap()
}

#[test]
fn compiled_moment_cone_contains_measures_on_the_set() {
    passes(run_cases(
        100,
        (1usize..=3, 1u32..=3, 1usize..=5, any::<u64>()),
        |(p, k, r, seed)| {
            let mut g = rng(seed);
            let set = unit_box(p);
            let mu = random_measure(&mut g, r, p, -1.0, 1.0);
            let z = mu.moments(2 * k);
            let scale = z.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for map in ok(compile_cone_sg(&set, 2 * k))? {
                let ev = min_eigenvalue(&ok(map.instantiate(z.values()))?);
                prop_assert!(ev >= -1e-9 * scale, "eigenvalue {ev:e}");
            }
            Ok(())
        },
    ));
}

#[test]
fn gram_certificates_reassemble_their_target() {
    passes(run_cases(
        100,
        (1usize..=2, 1u32..=2, any::<u64>()),
        |(n, half, seed)| {
            let mut g = rng(seed);
            let mut target = Poly::constant(n, 0.1);
            for _ in 0..2 {
                let s = random_poly(&mut g, n, half);
                target = &target + &(&s * &s);
            }
            let qm = QuadraticModuleSpec::sos(n, half);
            let mut pb = ProgramBuilder::new();
            let m = ok(compile_qm_membership(&mut pb, &PolyExpr::from_poly(&target), &qm))?;
            let sol = ok(solve(&pb.build(), &SolveOptions::default()))?;
            prop_assert!(sol.is_optimal(), "{:?}", sol.status);
            let cert = GramCertificate::from_solution(&m, qm.generators(), &sol);
            prop_assert!(cert.mismatch(&target) <= 1e-6, "mismatch {:e}", cert.mismatch(&target));
            prop_assert!(cert.min_eigenvalue() >= -1e-8, "eigenvalue {:e}", cert.min_eigenvalue());
            Ok(())
        },
    ));
}

#[test]
fn solver_is_deterministic() {
    passes(run_cases(100, any::<u64>(), |seed| {
        let prog = random_conic_program(&mut rng(seed));
        let a = ok(solve(&prog, &SolveOptions::default()))?;
        let b = ok(solve(&prog, &SolveOptions::default()))?;
        prop_assert_eq!(a.iterations, b.iterations);
        prop_assert_eq!(a.primal, b.primal);
        prop_assert_eq!(a.dual_eq, b.dual_eq);
        Ok(())
    }));
}

#[test]
fn h_expansion_reproduces_the_input() {
    passes(run_cases(
        100,
        (1usize..=3, 1usize..=2, 1u32..=3, any::<u64>()),
        |(n, p, d, seed)| {
            let mut g = rng(seed);
            let mut h = random_poly(&mut g, p, d).embed(n + p, &(n..n + p).collect::<Vec<_>>());
            for j in 0..n {
                let xj = Poly::var(n + p, j);
                let r = random_poly(&mut g, p, d).embed(n + p, &(n..n + p).collect::<Vec<_>>());
                h = &h + &(&xj * &r);
            }
            let set = unit_box(p);
            let f = Poly::zero(n);
            let prob = ok(DromProblem::with_h_poly(n, p, f, vec![], set, &h, vec![], Some(d)))?;
            prop_assert_eq!(prob.a.nrows(), binomial(p + d as usize, d as usize));
            prop_assert_eq!(prob.h_poly(), h);
            Ok(())
        },
    ));
}

#[test]
fn univariate_problems_certify_at_the_initial_order() {
    passes(run_cases(20, any::<u64>(), |seed| {
        let problem = random_univariate_problem(seed);
        let rep = ok(run(&problem, &DromOptions::default()))?;
        prop_assert_eq!(rep.status, Status::Solved, "{}", rep.message);
        prop_assert_eq!(rep.order_k, problem.min_order());
        Ok(())
    }));
}

#[test]
fn certified_measures_are_sound() {
    passes(run_cases(20, any::<u64>(), |seed| {
        let problem = random_univariate_problem(seed);
        let rep = ok(run(&problem, &DromOptions::default()))?;
        let cert = rep.certificates.as_ref().unwrap();
        if cert.tightness != Tightness::Certified {
            return Ok(());
        }
        let scale = rep.optimal_value.abs().max(1.0);
        prop_assert!(cert.complementarity.abs() <= 1e-5 * scale, "{:e}", cert.complementarity);
        let mu = rep.worst_case_measure.as_ref().unwrap();
        let y = mu.moments(problem.d);
        let violation = problem.cone_y_violation(y.values(), rep.homogenizer);
        prop_assert!(violation <= 1e-5, "cone violation {violation:e}");
        let expectation = ok(riesz_pair(&problem.h_at(&rep.x), &y))?;
        prop_assert!(expectation >= -1e-5, "E[h] = {expectation:e}");
        Ok(())
    }));
}

#[test]
fn positive_scaling_of_h_leaves_the_decision_unchanged() {
    passes(run_cases(20, (any::<u64>(), 0.1f64..10.0), |(seed, lambda)| {
        let problem = random_univariate_problem(seed);
        let mut scaled = problem.clone();
        scaled.a *= lambda;
        scaled.b.iter_mut().for_each(|v| *v *= lambda);
        let r1 = ok(run(&problem, &DromOptions::default()))?;
        let r2 = ok(run(&scaled, &DromOptions::default()))?;
        prop_assert_eq!(r1.status, Status::Solved, "{}", r1.message);
        prop_assert_eq!(r2.status, Status::Solved, "{}", r2.message);
        prop_assert!((r1.optimal_value - r2.optimal_value).abs() <= 1e-5);
        Ok(())
    }));
}
