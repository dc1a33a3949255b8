//! Generating functions and Bregman divergences
//!
//! `B_J(z, x) = J(z) − J(x) − ⟨DJ(x), z − x⟩`, with first-argument
//! derivative `D₁B_J(z, x) = DJ(z) − DJ(x)`.
//!
//! Two generators are shipped: blockwise weighted quadratics and the
//! saddle composite `J⁰(x, y) = Σ_j ‖x_j‖²/(2τ_j) + Σ_ℓ ‖y_ℓ‖²/(2σ_ℓ) − K(x, y)`.
//! Other generators plug in through [`GeneratingFunction`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::blockvec::{bv_combine, bv_dot, BlockVector, PrimalDual};
use crate::error::{Error, Result};
use crate::saddle::SaddleProblem;
use crate::steprules::StepLengths;

pub trait GeneratingFunction {
    /// Block layout of the argument.
    fn layout(&self) -> Vec<usize>;

    fn value(&self, u: &BlockVector) -> Result<f64>;

    fn gradient(&self, u: &BlockVector) -> Result<BlockVector>;

    /// B_J(z, x) by the defining formula; implementors may override with an
    /// algebraically equal but better conditioned expression.
    fn divergence(&self, z: &BlockVector, x: &BlockVector) -> Result<f64> {
        let diff = z.sub(x)?;
        Ok(self.value(z)? - self.value(x)? - bv_dot(&self.gradient(x)?, &diff)?)
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    match weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        Some(w) => Err(Error::InvalidParameter(format!(
            "generator weights must be positive, got {w}"
        ))),
        None => Ok(()),
    }
}

/// Σ_b (w_b/2)‖u_b‖².
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedQuadratic {
    layout: Vec<usize>,
    weights: Vec<f64>,
}

impl WeightedQuadratic {
    pub fn new(layout: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if layout.len() != weights.len() {
            return Err(Error::LayoutMismatch {
                expected: layout,
                found: vec![weights.len()],
            });
        }
        check_weights(&weights)?;
        Ok(Self { layout, weights })
    }

    /// Weights 1/τ_j, 1/σ_ℓ over the layout of u = (x, y).
    pub fn from_steps(p: &SaddleProblem, steps: &StepLengths) -> Result<Self> {
        Self::new(p.layout(), step_weights(p, steps))
    }

    fn weighted_sq(&self, u: &BlockVector) -> f64 {
        u.blocks()
            .zip(&self.weights)
            .fold(0.0, |acc, (b, w)| acc + 0.5 * w * b.iter().fold(0.0, |s, v| s + v * v))
    }
}

fn step_weights(p: &SaddleProblem, steps: &StepLengths) -> Vec<f64> {
    (0..p.primal_blocks())
        .map(|j| 1.0 / steps.tau_for(j))
        .chain((0..p.dual_blocks()).map(|l| 1.0 / steps.sigma_for(l)))
        .collect()
}

fn scale_blocks(u: &BlockVector, weights: &[f64]) -> Vec<f64> {
    u.blocks()
        .zip(weights)
        .flat_map(|(b, w)| b.iter().map(move |v| w * v))
        .collect()
}

impl GeneratingFunction for WeightedQuadratic {
    fn layout(&self) -> Vec<usize> {
        self.layout.clone()
    }

    fn value(&self, u: &BlockVector) -> Result<f64> {
        u.ensure_layout(&self.layout)?;
        Ok(self.weighted_sq(u))
    }

    fn gradient(&self, u: &BlockVector) -> Result<BlockVector> {
        u.ensure_layout(&self.layout)?;
        BlockVector::from_flat(&self.layout, scale_blocks(u, &self.weights))
    }

    fn divergence(&self, z: &BlockVector, x: &BlockVector) -> Result<f64> {
        z.ensure_layout(&self.layout)?;
        Ok(self.weighted_sq(&z.sub(x)?))
    }
}

/// J⁰ = J_X + J_Y − K for a problem and its step lengths.
#[derive(Debug, Clone)]
pub struct SaddleComposite<'a> {
    problem: &'a SaddleProblem,
    quad: WeightedQuadratic,
}

impl<'a> SaddleComposite<'a> {
    pub fn new(problem: &'a SaddleProblem, steps: &StepLengths) -> Result<Self> {
        Ok(Self {
            problem,
            quad: WeightedQuadratic::from_steps(problem, steps)?,
        })
    }

    fn split(&self, u: &BlockVector) -> Result<PrimalDual> {
        u.ensure_layout(&self.quad.layout)?;
        Ok(PrimalDual::from_concat(u, self.problem.primal_blocks()))
    }

    fn k_parts(&self, u: &BlockVector) -> Result<(f64, Vec<f64>)> {
        let pd = self.split(u)?;
        let (x, y) = (pd.x.as_slice(), pd.y.as_slice());
        let k = self.problem.coupling.value(x, y);
        let mut dk = self.problem.coupling.grad_x(x, y);
        dk.extend(self.problem.coupling.grad_y(x, y));
        Ok((k, dk))
    }

    /// B_K(z, x) = K(z) − K(x) − ⟨DK(x), z − x⟩.
    pub fn coupling_divergence(&self, z: &BlockVector, x: &BlockVector) -> Result<f64> {
        let (kz, _) = self.k_parts(z)?;
        let (kx, dkx) = self.k_parts(x)?;
        let lin = dkx
            .iter()
            .zip(z.as_slice().iter().zip(x.as_slice()))
            .fold(0.0, |acc, (d, (a, b))| acc + d * (a - b));
        Ok(kz - kx - lin)
    }

    /// B⁰ between two primal-dual points.
    pub fn between(&self, z: &PrimalDual, x: &PrimalDual) -> Result<f64> {
        self.divergence(&z.concat(), &x.concat())
    }
}

impl GeneratingFunction for SaddleComposite<'_> {
    fn layout(&self) -> Vec<usize> {
        self.quad.layout.clone()
    }

    fn value(&self, u: &BlockVector) -> Result<f64> {
        let (k, _) = self.k_parts(u)?;
        Ok(self.quad.value(u)? - k)
    }

    fn gradient(&self, u: &BlockVector) -> Result<BlockVector> {
        let (_, dk) = self.k_parts(u)?;
        let g: Vec<f64> = scale_blocks(u, &self.quad.weights)
            .iter()
            .zip(&dk)
            .map(|(a, d)| a - d)
            .collect();
        BlockVector::from_flat(&self.quad.layout, g)
            .map_err(|_| Error::NonFinite("generator derivative".into()))
    }

    fn divergence(&self, z: &BlockVector, x: &BlockVector) -> Result<f64> {
        Ok(self.quad.divergence(z, x)? - self.coupling_divergence(z, x)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceValue {
    pub value: f64,
    /// Derivative of B_J(·, x) at z.
    pub grad1: BlockVector,
}

pub fn bregman_value(j: &dyn GeneratingFunction, z: &BlockVector, x: &BlockVector) -> Result<DivergenceValue> {
    let layout = j.layout();
    z.ensure_layout(&layout)?;
    x.ensure_layout(&layout)?;
    let value = j.divergence(z, x)?;
    if !value.is_finite() {
        return Err(Error::NonFinite("Bregman divergence".into()));
    }
    let grad1 = bv_combine(1.0, &j.gradient(z)?, -1.0, &j.gradient(x)?)?;
    Ok(DivergenceValue { value, grad1 })
}

/// Both sides of the three-point identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreePoint {
    /// ⟨DJ(x) − DJ(z), x − x̄⟩ − [B(x̄, x) − B(x̄, z) + B(x, z)].
    pub residual: f64,
    /// Largest absolute term involved.
    pub scale: f64,
}

impl ThreePoint {
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.residual.abs() <= rel_tol * (1.0 + self.scale)
    }
}

pub fn three_point_residual(
    j: &dyn GeneratingFunction,
    x: &BlockVector,
    z: &BlockVector,
    xbar: &BlockVector,
) -> Result<ThreePoint> {
    let dd = bv_combine(1.0, &j.gradient(x)?, -1.0, &j.gradient(z)?)?;
    let lhs = bv_dot(&dd, &x.sub(xbar)?)?;
    let b1 = j.divergence(xbar, x)?;
    let b2 = j.divergence(xbar, z)?;
    let b3 = j.divergence(x, z)?;
    let residual = lhs - (b1 - b2 + b3);
    let scale = [lhs, b1, b2, b3].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !residual.is_finite() {
        return Err(Error::NonFinite("three-point residual".into()));
    }
    Ok(ThreePoint { residual, scale })
}

/// Sampling region for [`ellipticity_probe`], over the concatenated layout.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleRegion {
    /// Every coordinate uniform in `[lo, hi]`.
    Box { lo: f64, hi: f64 },
    /// Uniform in the Euclidean ball of `radius` about `center` (origin
    /// when `None`).
    Ball { center: Option<Vec<f64>>, radius: f64 },
}

impl SampleRegion {
    pub fn unit_box() -> Self {
        SampleRegion::Box { lo: -1.0, hi: 1.0 }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if dim == 0 {
            return Err(Error::EmptyRegion("zero-dimensional space".into()));
        }
        match self {
            SampleRegion::Box { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                    return Err(Error::EmptyRegion(format!("box [{lo}, {hi}]")));
                }
            }
            SampleRegion::Ball { center, radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::EmptyRegion(format!("ball of radius {radius}")));
                }
                if let Some(c) = center {
                    if c.len() != dim {
                        return Err(Error::LayoutMismatch {
                            expected: vec![dim],
                            found: vec![c.len()],
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        match self {
            SampleRegion::Box { lo, hi } => (0..dim).map(|_| rng.random_range(*lo..*hi)).collect(),
            SampleRegion::Ball { center, radius } => {
                let dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
                let norm = dir.iter().fold(0.0, |a, v| a + v * v).sqrt().max(f64::MIN_POSITIVE);
                let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
                dir.iter()
                    .enumerate()
                    .map(|(i, d)| center.as_ref().map_or(0.0, |c| c[i]) + r * d / norm)
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    /// Minimum of B_J(z, x) − (γ/2)‖z − x‖² over the samples.
    pub min_margin: f64,
    pub witness: (BlockVector, BlockVector),
    pub samples: usize,
}

/// Samples pairs (z, x) from `region` and reports the worst ellipticity
/// margin. Deterministic in `seed`.
pub fn ellipticity_probe(
    j: &dyn GeneratingFunction,
    region: &SampleRegion,
    gamma: f64,
    n_samples: usize,
    seed: u64,
) -> Result<ProbeReport> {
    let layout = j.layout();
    let dim: usize = layout.iter().sum();
    region.validate(dim)?;
    if n_samples == 0 {
        return Err(Error::InvalidParameter("probe needs at least one sample".into()));
    }
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be nonnegative, got {gamma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, BlockVector, BlockVector)> = None;
    for _ in 0..n_samples {
        let z = BlockVector::from_flat(&layout, region.sample(&mut rng, dim))?;
        let x = BlockVector::from_flat(&layout, region.sample(&mut rng, dim))?;
        let margin = j.divergence(&z, &x)? - 0.5 * gamma * z.sub(&x)?.norm2_sq();
        if best.as_ref().is_none_or(|(m, _, _)| margin < *m) {
            best = Some((margin, z, x));
        }
    }
    let (min_margin, z, x) = best.expect("at least one sample");
    Ok(ProbeReport {
        min_margin,
        witness: (z, x),
        samples: n_samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Checks |⟨D₁B_J(x, y), z − x⟩| ≤ (L/α)B_J(x, y) + (α/γ)B_J(z, x).
pub fn cauchy_bound_check(
    j: &dyn GeneratingFunction,
    x: &BlockVector,
    y: &BlockVector,
    z: &BlockVector,
    alpha: f64,
    gamma: f64,
    lip: f64,
) -> Result<CauchyReport> {
    for (name, v) in [("alpha", alpha), ("gamma", gamma), ("L", lip)] {
        if !(v > 0.0) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    let d1 = bregman_value(j, x, y)?;
    let lhs = bv_dot(&d1.grad1, &z.sub(x)?)?.abs();
    let rhs = (lip / alpha) * d1.value + (alpha / gamma) * j.divergence(z, x)?;
    Ok(CauchyReport {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::DenseMatrix;
    use crate::prox::ProxFunction;

    fn single(v: &[f64]) -> BlockVector {
        BlockVector::single(v.to_vec()).unwrap()
    }

    fn scalar_bilinear(a: f64) -> SaddleProblem {
        SaddleProblem::bilinear_dense(
            DenseMatrix::from_rows(&[vec![a]]).unwrap(),
            ProxFunction::Zero,
            ProxFunction::Zero,
            0,
        )
        .unwrap()
    }

    fn pair(x: f64, y: f64) -> BlockVector {
        BlockVector::new(vec![vec![x], vec![y]]).unwrap()
    }

    #[test]
    fn quadratic_value() {
        let j = WeightedQuadratic::new(vec![1], vec![2.0]).unwrap();
        let d = bregman_value(&j, &single(&[1.0]), &single(&[0.0])).unwrap();
        assert_eq!(d.value, 1.0);
        assert_eq!(d.grad1.as_slice(), &[2.0]);
    }

    #[test]
    fn identical_arguments() {
        let p = scalar_bilinear(1.5);
        let steps = StepLengths::scalar(0.3, 0.7).unwrap();
        let j = SaddleComposite::new(&p, &steps).unwrap();
        let u = pair(0.4, -1.1);
        let d = bregman_value(&j, &u, &u).unwrap();
        assert_eq!(d.value, 0.0);
        assert!(d.grad1.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn composite_boundary_case() {
        let p = scalar_bilinear(1.0);
        let steps = StepLengths::scalar(1.0, 1.0).unwrap();
        let j = SaddleComposite::new(&p, &steps).unwrap();
        assert_eq!(bregman_value(&j, &pair(1.0, 1.0), &pair(0.0, 0.0)).unwrap().value, 0.0);
    }

    #[test]
    fn degenerate_three_point() {
        let j = WeightedQuadratic::new(vec![3], vec![1.5]).unwrap();
        let x = single(&[1.0, 2.0, 3.0]);
        assert_eq!(three_point_residual(&j, &x, &x, &x).unwrap().residual, 0.0);
    }

    #[test]
    fn probe_finds_indefinite_direction() {
        let p = scalar_bilinear(2.0);
        let steps = StepLengths::scalar(1.0, 1.0).unwrap();
        let j = SaddleComposite::new(&p, &steps).unwrap();
        assert_eq!(j.divergence(&pair(1.0, 1.0), &pair(0.0, 0.0)).unwrap(), -1.0);
        let report = ellipticity_probe(&j, &SampleRegion::unit_box(), 0.0, 1000, 4).unwrap();
        assert!(report.min_margin < 0.0);
        let (z, x) = &report.witness;
        assert_eq!(j.divergence(z, x).unwrap(), report.min_margin);
    }

    #[test]
    fn probe_quadratic_equality_case() {
        let tau = 0.25;
        let j = WeightedQuadratic::new(vec![4], vec![1.0 / tau]).unwrap();
        let r = ellipticity_probe(&j, &SampleRegion::Ball { center: None, radius: 2.0 }, 1.0 / tau, 500, 1)
            .unwrap();
        assert!(r.min_margin >= -1e-12);
    }

    #[test]
    fn empty_regions_are_rejected() {
        let j = WeightedQuadratic::new(vec![1], vec![1.0]).unwrap();
        let bad = SampleRegion::Box { lo: 1.0, hi: 1.0 };
        assert!(matches!(ellipticity_probe(&j, &bad, 0.0, 10, 0), Err(Error::EmptyRegion(_))));
    }

    #[test]
    fn cauchy_rejects_nonpositive_constants() {
        let j = WeightedQuadratic::new(vec![1], vec![1.0]).unwrap();
        let x = single(&[0.0]);
        assert!(cauchy_bound_check(&j, &x, &x, &x, 0.0, 1.0, 1.0).is_err());
        let r = cauchy_bound_check(&j, &x, &x, &single(&[3.0]), 1.0, 1.0, 1.0).unwrap();
        assert!(r.lhs == 0.0 && r.holds);
    }
}
