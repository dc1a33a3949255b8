mod common;

use std::sync::Arc;

use common::*;
use nalgebra::{DMatrix, DVector};
use pdsplit::bregman::{bregman_value, SaddleComposite, WeightedQuadratic};
use pdsplit::diagnostics::{duality_gap_rof, lagrangian_gap};
use pdsplit::linop::{Gradient2D, LinearOperator};
use pdsplit::saddle::{Coupling, ProblemKind};
use pdsplit::steprules::{certify, certify_dynamic, Rule};
use pdsplit::*;
use std::result::Result as StdResult;
use proptest::collection::vec;
use proptest::prelude::*;

fn layout_strategy() -> impl Strategy<Value = Vec<usize>> {
    vec(1usize..6, 1..4)
}

fn block_pair() -> impl Strategy<Value = (Vec<usize>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    layout_strategy().prop_flat_map(|layout| {
        let n: usize = layout.iter().sum();
        (Just(layout), vec(-10.0..10.0f64, n), vec(-10.0..10.0f64, n), vec(-10.0..10.0f64, n))
    })
}

fn abs_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x * y).abs()).sum::<f64>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dot_is_symmetric_and_bilinear((layout, a, b, c) in block_pair(), s in -3.0..3.0f64, t in -3.0..3.0f64) {
        let bv = |v: &[f64]| BlockVector::from_flat(&layout, v.to_vec()).unwrap();
        let (va, vb, vc) = (bv(&a), bv(&b), bv(&c));
        prop_assert_eq!(bv_dot(&va, &vb).unwrap(), bv_dot(&vb, &va).unwrap());
        let combo = bv_combine(s, &va, t, &vb).unwrap();
        let lhs = bv_dot(&combo, &vc).unwrap();
        let rhs = s * bv_dot(&va, &vc).unwrap() + t * bv_dot(&vb, &vc).unwrap();
        let scale = s.abs() * abs_dot(&a, &c) + t.abs() * abs_dot(&b, &c) + 1e-300;
        prop_assert!((lhs - rhs).abs() <= 1e-14 * scale * 4.0);
    }

    #[test]
    fn norm_squared_is_self_dot((layout, a, _, _) in block_pair()) {
        let v = BlockVector::from_flat(&layout, a).unwrap();
        let n2 = bv_norm2(&v).powi(2);
        let d = bv_dot(&v, &v).unwrap();
        prop_assert!((n2 - d).abs() <= 1e-14 * d.max(1e-300) * 2.0);
    }

    #[test]
    fn weighted_quadratic_divergence_nonnegative(
        (layout, z, x, _) in block_pair(),
        w in vec(0.01..100.0f64, 3),
    ) {
        let weights = w[..layout.len()].to_vec();
        let j = WeightedQuadratic::new(layout.clone(), weights).unwrap();
        let zb = BlockVector::from_flat(&layout, z).unwrap();
        let xb = BlockVector::from_flat(&layout, x).unwrap();
        prop_assert!(bregman_value(&j, &zb, &xb).unwrap().value >= 0.0);
    }
}

/// Central differences of z ↦ B(z, x) on a generator with a nonlinear part.
#[test]
fn divergence_first_argument_derivative() {
    let p = two_block(3, 9);
    let steps = pdsplit::cli::auto_steps(&p, Rule::Combined).unwrap();
    let j = SaddleComposite::new(&p, &steps).unwrap();
    let layout = p.layout();
    let dim: usize = layout.iter().sum();
    let mut r = rng(5);
    for _ in 0..20 {
        let z = uniform_vec(&mut r, dim, -1.0, 1.0);
        let x = BlockVector::from_flat(&layout, uniform_vec(&mut r, dim, -1.0, 1.0)).unwrap();
        let dv = bregman_value(&j, &BlockVector::from_flat(&layout, z.clone()).unwrap(), &x).unwrap();
        let h = 1e-5;
        let fd: Vec<f64> = (0..dim)
            .map(|i| {
                let (mut a, mut b) = (z.clone(), z.clone());
                a[i] += h;
                b[i] -= h;
                let va = bregman_value(&j, &BlockVector::from_flat(&layout, a).unwrap(), &x).unwrap().value;
                let vb = bregman_value(&j, &BlockVector::from_flat(&layout, b).unwrap(), &x).unwrap().value;
                (va - vb) / (2.0 * h)
            })
            .collect();
        let g = dv.grad1.as_slice();
        let err = fd.iter().zip(g).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err <= 1e-6 * norm, "relative error {}", err / norm);
    }
}

fn prox_kinds() -> Vec<ProxFunction> {
    vec![
        ProxFunction::quadratic_data(vec![0.3, -1.0, 2.0, 0.0, 0.5, -0.2]),
        ProxFunction::scaled_l1(0.8).unwrap(),
        ProxFunction::pointwise_ball(0.5, 1).unwrap(),
        ProxFunction::pointwise_ball(0.5, 2).unwrap(),
        ProxFunction::ZeroIndicator,
        ProxFunction::Zero,
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn prox_is_nonexpansive(x in vec(-5.0..5.0f64, 6), xp in vec(-5.0..5.0f64, 6), tau in 0.05..5.0f64) {
        let (a, b) = (BlockVector::single(x).unwrap(), BlockVector::single(xp).unwrap());
        for f in prox_kinds() {
            let pa = prox_apply(&f, tau, &a).unwrap();
            let pb = prox_apply(&f, tau, &b).unwrap();
            let lhs = bv_norm2(&pa.sub(&pb).unwrap());
            prop_assert!(lhs <= bv_norm2(&a.sub(&b).unwrap()) * (1.0 + 1e-12), "{} expands", f.name());
        }
    }

    #[test]
    fn prox_fixes_minimizers(tau in 0.05..5.0f64, inside in vec(-0.35..0.35f64, 6)) {
        let b = vec![0.3, -1.0, 2.0, 0.0, 0.5, -0.2];
        let quad = ProxFunction::quadratic_data(b.clone());
        let bb = BlockVector::single(b).unwrap();
        let fixed = prox_apply(&quad, tau, &bb).unwrap();
        prop_assert!(max_abs_diff(fixed.as_slice(), bb.as_slice()) <= 4.0 * f64::EPSILON * 2.0);
        let zero = BlockVector::zeros(&[6]);
        prop_assert_eq!(prox_apply(&ProxFunction::scaled_l1(0.8).unwrap(), tau, &zero).unwrap(), zero.clone());
        prop_assert_eq!(prox_apply(&ProxFunction::ZeroIndicator, tau, &zero).unwrap(), zero);
        // Every point of the ball minimizes its indicator.
        let m = BlockVector::single(inside).unwrap();
        for k in [1, 2] {
            let ball = ProxFunction::pointwise_ball(0.5, k).unwrap();
            prop_assert_eq!(prox_apply(&ball, tau, &m).unwrap(), m.clone());
        }
        prop_assert_eq!(prox_apply(&ProxFunction::Zero, tau, &m).unwrap(), m);
    }
}

#[test]
fn affine_problems_have_y_independent_dual_derivative() {
    let fb = make_problem("fb", &ParamMap::new().vector("q", vec![1.0, 2.0]).vector("c", vec![0.0, 1.0])).unwrap();
    let problems = [rof(4, 0.1, 1).0, two_block(4, 2), fb];
    let mut r = rng(3);
    for p in &problems {
        assert!(p.affine_in_y);
        let (nx, ny) = (p.x_layout.iter().sum(), p.y_layout.iter().sum());
        for _ in 0..20 {
            let x = uniform_vec(&mut r, nx, -1.0, 1.0);
            let y1 = uniform_vec(&mut r, ny, -1.0, 1.0);
            let y2 = uniform_vec(&mut r, ny, -1.0, 1.0);
            assert_eq!(p.coupling.grad_y(&x, &y1), p.coupling.grad_y(&x, &y2), "{}", p.kind.as_str());
        }
    }
}

#[test]
fn rof_gradient_adjoint_pair() {
    let g = Gradient2D::new(7, 5).unwrap();
    let mut r = rng(8);
    for _ in 0..50 {
        let x = uniform_vec(&mut r, 35, -1.0, 1.0);
        let y = uniform_vec(&mut r, 70, -1.0, 1.0);
        let lhs: f64 = g.apply(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(g.adjoint(&y)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
    }
}

/// Passing certificates keep passing when every step is halved.
fn assert_monotone(rule: Rule, steps: &StepLengths, constants: &ParamMap) -> StdResult<(), TestCaseError> {
    let c = certify(rule, steps, constants).unwrap();
    if c.verdict.accepted() {
        let mut half = steps.scaled(0.5).unwrap();
        if let Some(l) = &steps.lambda {
            half.lambda = Some(l.iter().map(|v| v * 0.5).collect());
        }
        let h = certify(rule, &half, constants).unwrap();
        prop_assert!(h.verdict.accepted(), "{rule}: {c}\nthen\n{h}");
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn certificates_monotone_in_steps(
        tau in 0.01..2.0f64,
        sigma in 0.01..2.0f64,
        k in vec(0.05..3.0f64, 6),
        lam in vec(0.0..0.5f64, 1..4),
    ) {
        let scalar = StepLengths::scalar(tau, sigma).unwrap();
        let constants = ParamMap::new()
            .scalar("L_DK", k[0])
            .scalar("L_DKy", k[1] * 0.1)
            .scalar("norm_A", k[2])
            .scalar("L_A", k[3])
            .scalar("L_DA", k[4])
            .scalar("rho_y", k[5])
            .scalar("L_A1", k[3])
            .scalar("norm_A2", k[2])
            .scalar("L_DA1", k[4])
            .scalar("rho_y1", k[5])
            .scalar("beta", 1.0)
            .matrix("L", vec![vec![k[0], k[1]], vec![k[2], k[3]]])
            .matrix("A_norm", vec![vec![k[0], k[1]], vec![k[2], k[3]]]);
        for rule in [Rule::LipschitzK, Rule::Bilinear, Rule::AffineY, Rule::Combined, Rule::ModifiedK] {
            assert_monotone(rule, &scalar, &constants)?;
        }
        let blocks = StepLengths::new(vec![tau, sigma], vec![sigma, tau]).unwrap();
        assert_monotone(Rule::BlockLipschitz, &blocks, &constants)?;
        assert_monotone(Rule::BlockBilinear, &blocks, &constants)?;
        let two = StepLengths::new(vec![tau], vec![sigma, 0.5 * sigma]).unwrap();
        assert_monotone(Rule::TwoBlock, &two, &constants)?;
        let mut sorted = lam.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let inertial = scalar.clone().with_lambda(sorted).unwrap();
        assert_monotone(Rule::InertiaLambda, &inertial, &constants)?;
    }

    #[test]
    fn zero_inertia_always_passes(beta in 0.0..100.0f64, len in 1usize..5) {
        let steps = StepLengths::scalar(0.1, 0.1).unwrap().with_lambda(vec![0.0; len]).unwrap();
        let c = certify_dynamic(Rule::InertiaLambda, &steps, &ParamMap::new().scalar("beta", beta)).unwrap();
        prop_assert!(c.passed());
    }
}

/// K(x, y) = ½x²y on scalars.
#[derive(Debug)]
struct HalfSquare;

impl Coupling for HalfSquare {
    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        0.5 * x[0] * x[0] * y[0]
    }
    fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        vec![x[0] * y[0]]
    }
    fn grad_y(&self, x: &[f64], _y: &[f64]) -> Vec<f64> {
        vec![0.5 * x[0] * x[0]]
    }
}

/// With the ρ_y term halved the affine rule would accept these steps, yet
/// B⁰ takes negative values inside |x| ≤ R, |y| ≤ ρ_y.
#[test]
fn halved_affine_term_would_admit_negative_divergence() {
    let (radius, rho) = (1.0, 1.0);
    let (tau, sigma) = (1.0, 0.4);
    let constants = ParamMap::new().scalar("L_A", radius).scalar("L_DA", 1.0).scalar("rho_y", rho);
    let halved = tau * sigma * radius * radius + 0.5 * tau * rho;
    assert!(halved < 1.0);
    let steps = StepLengths::scalar(tau, sigma).unwrap();
    let cert = certify(Rule::AffineY, &steps, &constants).unwrap();
    assert!(!cert.verdict.accepted() && (cert.aggregate - 1.4).abs() < 1e-12);

    let p = SaddleProblem::new(
        ProblemKind::Custom,
        vec![ProxFunction::Zero],
        vec![ProxFunction::Zero],
        vec![1],
        vec![1],
        Arc::new(HalfSquare),
        true,
    )
    .unwrap();
    let j = SaddleComposite::new(&p, &steps).unwrap();
    let d = -1e-3;
    let u = pd(vec![radius], vec![rho]);
    let z = pd(vec![radius + d], vec![rho + sigma * radius * d]);
    let b = j.between(&z, &u).unwrap();
    assert!(b < 0.0, "B⁰ = {b}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(5))]

    #[test]
    fn runs_are_deterministic(seed in 0u64..1000) {
        let (p, b) = rof(6, 0.2, seed);
        let steps = rof_steps(&p);
        let opts = SolverOptions { max_iter: 50, ergodic: true, ..SolverOptions::default() };
        let u0 = start_at_data(&p, &b);
        let a = solve_pdps(&p, &steps, &u0, &opts).unwrap();
        let c = solve_pdps(&p, &steps, &u0, &opts).unwrap();
        prop_assert_eq!(a, c);
    }
}

fn kkt_reference(a: &[Vec<f64>], b: &[f64]) -> PrimalDual {
    let (m, n) = (a.len(), b.len());
    let am = DMatrix::from_fn(m, n, |i, j| a[i][j]);
    let x = (DMatrix::identity(n, n) + am.transpose() * &am).lu().solve(&DVector::from_column_slice(b)).unwrap();
    let y = &am * &x;
    pd(x.iter().copied().collect(), y.iter().copied().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn certified_runs_are_fejer_monotone(seed in 0u64..10_000, m in 1usize..6, n in 1usize..6, shrink in 0.3..0.99f64) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, m, n);
        let b = normal_vec(&mut r, n, 1.0);
        let p = quadratic_saddle(&a, b.clone());
        let ubar = kkt_reference(&a, &b);
        let norm = p.constant("norm_A").unwrap();
        let steps = StepLengths::scalar(shrink / norm, shrink / norm).unwrap();
        let opts = SolverOptions { max_iter: 200, keep_iterates: true, ..SolverOptions::default() };
        let t = solve_pdps(&p, &steps, &p.zero_point(), &opts).unwrap();
        let j = SaddleComposite::new(&p, &steps).unwrap();
        let vals: Vec<f64> = iterates(&t).iter().map(|u| j.between(&ubar, u).unwrap()).collect();
        for w in vals.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * w[0].max(1.0), "{} → {}", w[0], w[1]);
        }
    }

    #[test]
    fn lagrangian_gap_nonnegative_at_saddle(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, 4, 3);
        let b = normal_vec(&mut r, 3, 1.0);
        let p = quadratic_saddle(&a, b.clone());
        let ubar = kkt_reference(&a, &b);
        for _ in 0..50 {
            let u = pd(normal_vec(&mut r, 3, 2.0), normal_vec(&mut r, 4, 2.0));
            prop_assert!(lagrangian_gap(&p, &u, &ubar).unwrap() >= -1e-12);
        }
    }
}

#[test]
fn rof_gaps_nonnegative_at_feasible_points() {
    let (p, b) = rof(6, 0.2, 4);
    let steps = rof_steps(&p);
    let reference = long_run_reference(&p, &steps, &start_at_data(&p, &b), 20_000, 1e-10);
    let alpha = p.constant("alpha").unwrap();
    let n = 36;
    let mut r = rng(10);
    for _ in 0..1000 {
        let x = uniform_vec(&mut r, n, -1.0, 2.0);
        let mut y = uniform_vec(&mut r, 2 * n, -alpha, alpha);
        // Scale each pixel pair into the ball of radius α.
        for q in 0..n {
            let s = (y[q].powi(2) + y[q + n].powi(2)).sqrt();
            if s > alpha {
                y[q] *= alpha / s;
                y[q + n] *= alpha / s;
            }
        }
        let u = pd_layout(&p, x, y);
        assert!(lagrangian_gap(&p, &u, &reference.u).unwrap() >= -1e-10);
        assert!(duality_gap_rof(&p, &u, &b, alpha).unwrap() >= -1e-10);
    }
}
