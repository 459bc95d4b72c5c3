//! Random instances and property checks shared by the property tests and
//! the acceptance harness. Every check runs a deterministic proptest runner
//! and reports the first counterexample as a string.

#![allow(dead_code)]

use std::fmt::Debug;

use dromsos::conesolve::{solve, ConeBlock, ConicProgram, Form, LinExpr, ProgramBuilder, SolveOptions, SolveStatus};
use dromsos::drom::{assemble_order_k, check_moments, ConeYBlock, DromProblem, MomentCheck};
use dromsos::linalg::{dot, min_eigenvalue, svec};
use dromsos::momentkit::{
    check_flat, extract_atoms, localizing_matrix, univariate_interval_constraints, AtomicMeasure, ExtractOptions,
    LinearMatrixMap, SemiAlgSet, Tms,
};
use dromsos::polycore::{basis, riesz_pair, Poly};
use dromsos::soskit::{random_sos, sos_convexity_check};
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = std::result::Result<(), TestCaseError>;

/// Run `test` on `cases` deterministic draws from `strategy`.
pub fn run_cases<S>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Check) -> Result<(), String>
where
    S: Strategy,
    S::Value: Debug,
{
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        max_shrink_iters: 16,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

pub fn ok<T>(r: dromsos::Result<T>) -> Result<T, TestCaseError> {
    r.map_err(|e| TestCaseError::fail(e.to_string()))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn random_poly(rng: &mut ChaCha8Rng, nvars: usize, degree: u32) -> Poly {
    let b = basis(nvars, degree);
    Poly::from_coefficients(&b, &random_vec(rng, b.len(), -1.0, 1.0))
}

pub fn random_tms(rng: &mut ChaCha8Rng, nvars: usize, degree: u32) -> Tms {
    let n = basis(nvars, degree).len();
    Tms::new(nvars, degree, random_vec(rng, n, -1.0, 1.0)).unwrap()
}

/// `r` points in `[lo, hi]^p`, pairwise at least `sep` apart in the max norm.
pub fn separated_points(rng: &mut ChaCha8Rng, r: usize, p: usize, lo: f64, hi: f64, sep: f64) -> Option<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(r);
    for _ in 0..200 {
        if out.len() == r {
            break;
        }
        let u = random_vec(rng, p, lo, hi);
        let far = out
            .iter()
            .all(|v| v.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) >= sep);
        if far {
            out.push(u);
        }
    }
    (out.len() == r).then_some(out)
}

pub fn random_measure(rng: &mut ChaCha8Rng, r: usize, p: usize, lo: f64, hi: f64) -> AtomicMeasure {
    let atoms = (0..r).map(|_| random_vec(rng, p, lo, hi)).collect();
    let weights = random_vec(rng, r, 0.1, 1.0);
    AtomicMeasure::new(atoms, weights).unwrap()
}

fn interval_generator(a1: f64, a2: f64) -> Poly {
    Poly::from_terms(1, [(vec![0], -a1 * a2), (vec![1], a1 + a2), (vec![2], -1.0)]).unwrap()
}

/// Add `map(z) >= 0` with `z` given as one expression per moment.
fn add_map_lmi(pb: &mut ProgramBuilder, map: &LinearMatrixMap, z: &[LinExpr]) {
    pb.add_lmi(map.side(), |i, j| {
        let mut e = LinExpr::new();
        for &(k, c) in map.entry(i, j) {
            e.add_scaled(c, &z[k]);
        }
        e
    });
}

/// `vec(a)^T L_q^{(k)}[z] vec(b) = <q a b, z>` with the product formed by
/// plain polynomial multiplication.
pub fn localizing_identity(cases: u32) -> Result<(), String> {
    run_cases(
        cases,
        (1usize..=3, 0u32..=2, 0u32..=2, any::<u64>()),
        |(p, k, dq, seed)| {
            let mut r = rng(seed);
            let q = random_poly(&mut r, p, dq);
            let order = k + q.degree().div_ceil(2);
            let z = random_tms(&mut r, p, 2 * order);
            let l = ok(localizing_matrix(&q, &z, order))?;
            let b = basis(p, k);
            prop_assert_eq!(l.nrows(), b.len());
            let av = random_vec(&mut r, b.len(), -1.0, 1.0);
            let bv = random_vec(&mut r, b.len(), -1.0, 1.0);
            let mut lhs = 0.0;
            for i in 0..b.len() {
                for j in 0..b.len() {
                    lhs += av[i] * l[(i, j)] * bv[j];
                }
            }
            let prod = ok(q.try_mul(&Poly::from_coefficients(&b, &av)))?;
            let prod = ok(prod.try_mul(&Poly::from_coefficients(&b, &bv)))?;
            let rhs = ok(riesz_pair(&prod, &z))?;
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
            Ok(())
        },
    )
}

/// Extraction from the moments of up to four atoms reproduces them.
pub fn flat_roundtrip(cases: u32) -> Result<(), String> {
    run_cases(cases, (1usize..=2, 1usize..=4, any::<u64>()), |(p, r, seed)| {
        let mut g = rng(seed);
        let Some(atoms) = separated_points(&mut g, r, p, -1.0, 1.0, 0.3) else {
            return Err(TestCaseError::reject("atoms too close"));
        };
        let weights = random_vec(&mut g, r, 0.2, 1.0);
        let mu = ok(AtomicMeasure::new(atoms, weights))?;
        let mut s = 1;
        while basis(p, s - 1).len() < r {
            s += 1;
        }
        let w = mu.moments(2 * (s + 1));
        let Some((s, rank)) = check_flat(&w, 1, 1) else {
            return Err(TestCaseError::fail("no flat truncation found"));
        };
        prop_assert_eq!(rank, r);
        let found = ok(extract_atoms(&w, s, rank))?;
        let back = found.moments(2 * s);
        let want = ok(w.truncate(2 * s))?;
        let err = back
            .values()
            .iter()
            .zip(want.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        prop_assert!(err <= 1e-6, "moment error {err:e}");
        Ok(())
    })
}

/// Interval measures satisfy the Hankel conditions, and every solver output
/// meeting them extends to a measure with atoms in the interval.
pub fn univariate_hankel(cases: u32) -> Result<(), String> {
    run_cases(cases, (1u32..=3, 1usize..=4, any::<u64>()), |(k, r, seed)| {
        let mut g = rng(seed);
        let a1 = g.random_range(-2.0..1.0);
        let a2 = a1 + g.random_range(0.5..3.0);
        let maps = ok(univariate_interval_constraints(a1, a2, k))?;

        let mu = random_measure(&mut g, r, 1, a1, a2);
        let z = mu.moments(2 * k);
        let scale = z.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for m in &maps {
            let ev = min_eigenvalue(&ok(m.instantiate(z.values()))?);
            prop_assert!(ev >= -1e-9 * scale, "eigenvalue {ev:e}");
        }

        let mut pb = ProgramBuilder::with_form(Form::Inequality);
        let zv = pb.add_free(2 * k as usize + 1);
        let zs: Vec<LinExpr> = (0..zv.len()).map(|i| zv.var(i)).collect();
        let mut mass = zs[0].clone();
        mass.add_constant(-1.0);
        pb.add_eq(mass);
        for m in &maps {
            add_map_lmi(&mut pb, m, &zs);
        }
        let mut obj = LinExpr::new();
        for (i, c) in random_vec(&mut g, zs.len(), -1.0, 1.0).into_iter().enumerate() {
            obj.add_scaled(c, &zs[i]);
        }
        pb.minimize(obj);
        let sol = ok(solve(&pb.build(), &SolveOptions::default()))?;
        let status = pb.model_status(&sol);
        prop_assert!(
            matches!(status, SolveStatus::Optimal | SolveStatus::NearOptimal),
            "{status:?}"
        );
        let y = ok(Tms::new(1, 2 * k, zv.values(&sol).to_vec()))?;
        let set = ok(SemiAlgSet::new(1, vec![interval_generator(a1, a2)]))?;
        let rs = random_sos(seed, 1, k);
        let out = ok(check_moments(
            &y,
            &set,
            &rs,
            k + 4,
            &SolveOptions::default(),
            &ExtractOptions::default(),
        ))?;
        let MomentCheck::Measure(found, _) = out else {
            return Err(TestCaseError::fail(format!("no measure for {:?}: {out:?}", y.values())));
        };
        for u in &found.atoms {
            prop_assert!(
                u[0] >= a1 - 1e-6 && u[0] <= a2 + 1e-6,
                "atom {} outside [{a1}, {a2}]",
                u[0]
            );
        }
        let yscale = y.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let err = found
            .moments(2 * k)
            .values()
            .iter()
            .zip(y.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        prop_assert!(err <= 1e-5 * yscale, "moment error {err:e}");
        Ok(())
    })
}

/// Random SOS-convex quartic: squares of affine forms plus fourth powers.
pub fn random_sos_convex(rng: &mut ChaCha8Rng, n: usize) -> Poly {
    let affine = |rng: &mut ChaCha8Rng| {
        let b = basis(n, 1);
        Poly::from_coefficients(&b, &random_vec(rng, b.len(), -1.0, 1.0))
    };
    let mut f = Poly::zero(n);
    for _ in 0..rng.random_range(1..=3) {
        let l = affine(rng);
        f = &f + &(&l * &l);
    }
    for _ in 0..rng.random_range(1..=2) {
        let l = affine(rng);
        let l2 = &l * &l;
        f = &f + &(&l2 * &l2).scale(rng.random_range(0.1..1.0));
    }
    f
}

/// Certified SOS-convex polynomials have PSD Hessians and satisfy Jensen's
/// inequality on probability moment sequences.
pub fn jensen(cases: u32) -> Result<(), String> {
    run_cases(cases, (1usize..=3, 1usize..=4, any::<u64>()), |(n, r, seed)| {
        let mut g = rng(seed);
        let f = random_sos_convex(&mut g, n);
        let verdict = ok(sos_convexity_check(&f, &SolveOptions::default()))?;
        prop_assert!(verdict.is_convex(), "{verdict:?}");
        let hess = f.hessian();
        for _ in 0..10 {
            let x = random_vec(&mut g, n, -3.0, 3.0);
            let v = random_vec(&mut g, n, -1.0, 1.0);
            let mut q = 0.0;
            for i in 0..n {
                for j in 0..n {
                    q += v[i] * ok(hess[i][j].eval(&x))? * v[j];
                }
            }
            prop_assert!(q >= -1e-6 * dot(&v, &v), "curvature {q:e}");
        }
        let mut mu = random_measure(&mut g, r, n, -2.0, 2.0);
        let total = mu.total_mass();
        mu.weights.iter_mut().for_each(|w| *w /= total);
        let w = mu.moments(f.degree());
        let lhs = ok(f.eval(&w.first_moments()))?;
        let rhs = ok(riesz_pair(&f, &w))?;
        prop_assert!(lhs <= rhs + 1e-8, "f(pi(w)) = {lhs} > <f, w> = {rhs}");
        Ok(())
    })
}

/// A point in the interior of `cone`.
fn interior_point(rng: &mut ChaCha8Rng, cone: ConeBlock) -> Vec<f64> {
    match cone {
        ConeBlock::Free(n) => random_vec(rng, n, -1.0, 1.0),
        ConeBlock::Nonneg(n) => random_vec(rng, n, 0.1, 2.0),
        ConeBlock::SecondOrder(n) => {
            let tail = random_vec(rng, n - 1, -1.0, 1.0);
            let mut v = vec![dot(&tail, &tail).sqrt() + rng.random_range(0.1..1.0)];
            v.extend(tail);
            v
        }
        ConeBlock::Psd(side) => {
            let b = DMatrix::from_fn(side, side, |_, _| rng.random_range(-1.0..1.0));
            svec(&(&b * b.transpose() + DMatrix::identity(side, side) * 0.1))
        }
    }
}

/// Random conic program with strictly feasible primal and dual sides.
pub fn random_conic_program(rng: &mut ChaCha8Rng) -> ConicProgram {
    let mut cones = vec![ConeBlock::Nonneg(rng.random_range(1..=4))];
    if rng.random_bool(0.7) {
        cones.push(ConeBlock::SecondOrder(rng.random_range(2..=4)));
    }
    if rng.random_bool(0.7) {
        cones.push(ConeBlock::Psd(rng.random_range(1..=3)));
    }
    if rng.random_bool(0.3) {
        cones.push(ConeBlock::Free(rng.random_range(1..=2)));
    }
    let n: usize = cones.iter().map(ConeBlock::dim).sum();
    let free: usize = cones
        .iter()
        .map(|c| if let ConeBlock::Free(k) = c { *k } else { 0 })
        .sum();
    let m = rng.random_range(free.max(1)..=n);
    let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let mut x = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    for &c in &cones {
        x.extend(interior_point(rng, c));
        match c {
            ConeBlock::Free(k) => s.extend(vec![0.0; k]),
            _ => s.extend(interior_point(rng, c)),
        }
    }
    let y = random_vec(rng, m, -1.0, 1.0);
    let b = (0..m).map(|i| (0..n).map(|j| a[(i, j)] * x[j]).sum()).collect();
    let c = (0..n)
        .map(|j| (0..m).map(|i| a[(i, j)] * y[i]).sum::<f64>() + s[j])
        .collect();
    ConicProgram {
        objective: c,
        eq_matrix: a,
        eq_rhs: b,
        cones,
    }
}

/// Weak duality and complementarity at every optimal solve.
pub fn conic_duality(cases: u32) -> Result<(), String> {
    run_cases(cases, any::<u64>(), |seed| {
        let prog = random_conic_program(&mut rng(seed));
        let sol = ok(solve(&prog, &SolveOptions::default()))?;
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        let cx = dot(&prog.objective, &sol.primal);
        let by = dot(&prog.eq_rhs, &sol.dual_eq);
        let scale = 1.0 + cx.abs();
        prop_assert!(cx - by >= -1e-6 * scale, "primal {cx} below dual {by}");
        prop_assert!(sol.primal_objective >= sol.dual_objective - 1e-6 * scale);
        let offsets = prog.block_offsets();
        for (i, c) in prog.cones.iter().enumerate() {
            let r = offsets[i]..offsets[i] + c.dim();
            let gap = dot(&sol.primal[r.clone()], &sol.dual_cone[r]);
            prop_assert!(gap.abs() <= 1e-6 * scale, "block {i} complementarity {gap:e}");
        }
        Ok(())
    })
}

/// Random univariate problem: decisions in `[0, 2]^n` pushed up by the
/// objective, a robust budget `E[beta] >= sum_j x_j E[rho_j]` with
/// `beta, rho_j` in `[0.5, 1.5]` on the support interval, and a box of
/// moments around a reference measure.
pub fn random_univariate_problem(seed: u64) -> DromProblem {
    let mut g = rng(seed);
    let n = g.random_range(1..=2);
    let d = g.random_range(2..=4);
    let a1: f64 = g.random_range(-1.0..0.5);
    let a2: f64 = a1 + g.random_range(0.5..2.0);
    let bs = basis(1, d);
    let m = bs.len();
    let reach = a1.abs().max(a2.abs());
    let norm: f64 = (1..=d).map(|i| reach.powi(i as i32)).sum();
    let bounded = |g: &mut ChaCha8Rng| -> Vec<f64> {
        let mut v = vec![1.0];
        v.extend((1..m).map(|_| 0.5 * g.random_range(-1.0..1.0) / norm));
        v
    };
    let b = bounded(&mut g);
    let mut a = DMatrix::zeros(m, n);
    for j in 0..n {
        let rho = bounded(&mut g);
        for i in 0..m {
            a[(i, j)] = -rho[i];
        }
    }
    let mut f = Poly::zero(n);
    let mut c = Vec::with_capacity(2 * n);
    for j in 0..n {
        let xj = Poly::var(n, j);
        let shift = &xj - &Poly::constant(n, 2.0);
        f = &f + &(&shift * &shift);
        c.push(xj.clone());
        c.push(&Poly::constant(n, 2.0) - &xj);
    }
    let reference = AtomicMeasure::new(
        vec![vec![g.random_range(a1..a2)], vec![g.random_range(a1..a2)]],
        vec![0.5, 0.5],
    )
    .unwrap();
    let mom = reference.moments(d);
    let mut t = DMatrix::zeros(2 * m - 1, m);
    let mut u = vec![0.0; 2 * m - 1];
    t[(0, 0)] = 1.0;
    u[0] = -1.0;
    for i in 1..m {
        let delta = 0.2 * (1.0 + mom.values()[i].abs());
        t[(2 * i - 1, i)] = 1.0;
        u[2 * i - 1] = -(mom.values()[i] - delta);
        t[(2 * i, i)] = -1.0;
        u[2 * i] = mom.values()[i] + delta;
    }
    let support = SemiAlgSet::new(1, vec![interval_generator(a1, a2)]).unwrap();
    let blocks = vec![ConeYBlock::polyhedral_with_equalities(t, u, 1)];
    DromProblem::new(n, 1, d, f, c, support, a, b, blocks).unwrap()
}

/// Optimal value of the order-`k` relaxation.
pub fn relaxation_value(problem: &DromProblem, k: u32) -> Result<(SolveStatus, f64), TestCaseError> {
    let (pb, _) = ok(assemble_order_k(problem, k))?;
    let sol = ok(solve(&pb.build(), &SolveOptions::default()))?;
    Ok((pb.model_status(&sol), pb.objective_value(&sol)))
}

/// The relaxation value does not increase with the order.
pub fn relaxation_monotonicity(cases: u32) -> Result<(), String> {
    run_cases(cases, any::<u64>(), |seed| {
        let problem = random_univariate_problem(seed);
        let k0 = problem.min_order();
        let mut last: Option<f64> = None;
        for k in k0..=k0 + 2 {
            let (status, value) = relaxation_value(&problem, k)?;
            prop_assert!(
                matches!(status, SolveStatus::Optimal | SolveStatus::NearOptimal),
                "order {k}: {status:?}"
            );
            if let Some(prev) = last {
                prop_assert!(
                    value <= prev + 1e-6 * prev.abs().max(1.0),
                    "order {k}: {value} > {prev}"
                );
            }
            last = Some(value);
        }
        Ok(())
    })
}

pub type Property = fn(u32) -> Result<(), String>;

/// The six randomized properties of the acceptance suite.
pub const SUITE: [(&str, Property); 6] = [
    ("localizing identity", localizing_identity),
    ("flat roundtrip", flat_roundtrip),
    ("univariate Hankel conditions and extraction", univariate_hankel),
    ("Jensen inequality for SOS-convex data", jensen),
    ("weak duality and complementarity", conic_duality),
    ("relaxation-order monotonicity", relaxation_monotonicity),
];
