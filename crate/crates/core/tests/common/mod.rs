#![allow(dead_code)]

use pdsplit::linop::DenseMatrix;
use pdsplit::saddle::{Provenance, ReferencePoint};
use pdsplit::solvers::IterationTrace;
use pdsplit::steprules::auto_bilinear_steps;
use pdsplit::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<f64> {
    let d = Normal::new(0.0, std).unwrap();
    (0..n).map(|_| d.sample(rng)).collect()
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn pd(x: Vec<f64>, y: Vec<f64>) -> PrimalDual {
    PrimalDual::new(BlockVector::single(x).unwrap(), BlockVector::single(y).unwrap())
}

pub fn pd_layout(p: &SaddleProblem, x: Vec<f64>, y: Vec<f64>) -> PrimalDual {
    PrimalDual::new(
        BlockVector::from_flat(&p.x_layout, x).unwrap(),
        BlockVector::from_flat(&p.y_layout, y).unwrap(),
    )
}

/// Centered bright square on a dark background plus seeded noise.
pub fn square_image(n: usize, noise: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let d = Normal::new(0.0, noise).unwrap();
    (0..n * n)
        .map(|p| {
            let (i, j) = (p / n, p % n);
            let inside = (n / 4..3 * n / 4).contains(&i) && (n / 4..3 * n / 4).contains(&j);
            let v = if inside { 0.8 } else { 0.2 };
            if noise > 0.0 {
                v + d.sample(&mut r)
            } else {
                v
            }
        })
        .collect()
}

pub fn rof(n: usize, alpha: f64, seed: u64) -> (SaddleProblem, Vec<f64>) {
    let b = square_image(n, 0.1, seed);
    let params = ParamMap::new()
        .scalar("n1", n as f64)
        .scalar("n2", n as f64)
        .scalar("alpha", alpha)
        .vector("b", b.clone());
    (make_problem("rof", &params).unwrap(), b)
}

pub fn rof_steps(p: &SaddleProblem) -> StepLengths {
    auto_bilinear_steps(p.constant("norm_A").unwrap()).unwrap()
}

/// x⁰ = b, y⁰ = 0.
pub fn start_at_data(p: &SaddleProblem, b: &[f64]) -> PrimalDual {
    PrimalDual::new(BlockVector::from_flat(&p.x_layout, b.to_vec()).unwrap(), BlockVector::zeros(&p.y_layout))
}

/// Long PDPS run used as the reference ū.
pub fn long_run_reference(p: &SaddleProblem, steps: &StepLengths, u0: &PrimalDual, iters: usize, tol: f64) -> ReferencePoint {
    let opts = SolverOptions {
        max_iter: iters,
        monitor_every: iters,
        ..SolverOptions::default()
    };
    let t = solve_pdps(p, steps, u0, &opts).unwrap();
    ReferencePoint::verified(p, steps, t.final_u, Provenance::LongRun, tol).unwrap()
}

pub fn two_block(n: usize, seed: u64) -> SaddleProblem {
    let mut r = rng(seed);
    let z = uniform_vec(&mut r, n * n, -0.5, 0.5);
    let b = square_image(n, 0.05, seed + 1);
    let params = ParamMap::new()
        .scalar("n1", n as f64)
        .scalar("n2", n as f64)
        .scalar("alpha", 0.2)
        .vector("z", z)
        .vector("b", b);
    make_problem("two_block", &params).unwrap()
}

/// Left half 0, right half `contrast`.
pub fn two_region(n: usize, contrast: f64) -> Vec<f64> {
    (0..n * n).map(|p| if p % n < n / 2 { 0.0 } else { contrast }).collect()
}

pub fn potts(n: usize, contrast: f64, grad_bound: f64, dual_bound: f64) -> (SaddleProblem, Vec<f64>) {
    let b = two_region(n, contrast);
    let params = ParamMap::new()
        .scalar("n1", n as f64)
        .scalar("n2", n as f64)
        .vector("b", b.clone())
        .scalar("grad_bound", grad_bound)
        .scalar("dual_bound", dual_bound);
    (make_problem("potts", &params).unwrap(), b)
}

pub fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|_| normal_vec(r, cols, 1.0)).collect()
}

pub fn quadratic_saddle(a: &[Vec<f64>], b: Vec<f64>) -> SaddleProblem {
    let m = a.len();
    SaddleProblem::bilinear_dense(
        DenseMatrix::from_rows(a).unwrap(),
        ProxFunction::quadratic_data(b),
        ProxFunction::quadratic_data(vec![0.0; m]),
        0,
    )
    .unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn iterates(t: &IterationTrace) -> &[PrimalDual] {
    t.iterates.as_deref().expect("iterates kept")
}

pub fn flat(u: &PrimalDual) -> Vec<f64> {
    u.concat().into_vec()
}
