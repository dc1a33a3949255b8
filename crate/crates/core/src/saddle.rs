//! Saddle-point problems `min_x max_y F(x) + K(x, y) − G_*(y)`.
//!
//! A [`SaddleProblem`] bundles one [`ProxFunction`] per primal and per dual
//! block, a [`Coupling`] K with its partial derivatives, and the Lipschitz
//! constants the step-length certificates consume.

use std::fmt;
use std::sync::Arc;

use crate::blockvec::{BlockVector, PrimalDual};
use crate::error::{Error, Result};
use crate::linop::{DenseMatrix, Gradient2D, LinearOperator};
use crate::params::ParamMap;
use crate::prox::{pixel_norms, ProxFunction};
use crate::steprules::{estimate_operator_norm, StepLengths};

/// Iterations used when a factory estimates an operator norm.
pub const NORM_ITERS: usize = 2000;

/// The coupling term K and its partial derivatives on flattened blocks.
pub trait Coupling: Send + Sync + fmt::Debug {
    fn value(&self, x: &[f64], y: &[f64]) -> f64;
    fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64>;
    fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64>;
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// K(x, y) = ⟨Ax, y⟩.
#[derive(Clone)]
pub struct Bilinear {
    pub op: Arc<dyn LinearOperator>,
}

impl fmt::Debug for Bilinear {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bilinear({}x{})", self.op.out_dim(), self.op.in_dim())
    }
}

impl Coupling for Bilinear {
    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(&self.op.apply(x), y)
    }

    fn grad_x(&self, _x: &[f64], y: &[f64]) -> Vec<f64> {
        self.op.adjoint(y)
    }

    fn grad_y(&self, x: &[f64], _y: &[f64]) -> Vec<f64> {
        self.op.apply(x)
    }
}

/// K(x, (y₁, y₂)) = ⟨½x², y₁⟩ + ⟨∇_h x, y₂⟩ with the square taken entrywise.
#[derive(Debug, Clone)]
pub struct TwoBlockCoupling {
    pub grad: Gradient2D,
}

impl Coupling for TwoBlockCoupling {
    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let (y1, y2) = y.split_at(n);
        let quad = x.iter().zip(y1).fold(0.0, |acc, (xi, yi)| acc + 0.5 * xi * xi * yi);
        quad + dot(&self.grad.apply(x), y2)
    }

    fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = x.len();
        let (y1, y2) = y.split_at(n);
        let div = self.grad.adjoint(y2);
        x.iter()
            .zip(y1)
            .zip(div)
            .map(|((xi, yi), d)| xi * yi + d)
            .collect()
    }

    fn grad_y(&self, x: &[f64], _y: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = x.iter().map(|v| 0.5 * v * v).collect();
        out.extend(self.grad.apply(x));
        out
    }
}

/// ρ(t) = 2t − t².
pub fn rho(t: f64) -> f64 {
    2.0 * t - t * t
}

/// K(x, y) = Σ_p ρ(⟨[∇_h x]_p, y_p⟩).
#[derive(Debug, Clone)]
pub struct PottsCoupling {
    pub grad: Gradient2D,
}

impl PottsCoupling {
    /// Per-pixel products t_p = ⟨g_p, y_p⟩ and the gradient g.
    fn products(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.grad.pixels();
        let g = self.grad.apply(x);
        let t = (0..n).map(|p| g[p] * y[p] + g[n + p] * y[n + p]).collect();
        (t, g)
    }
}

impl Coupling for PottsCoupling {
    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let (t, _) = self.products(x, y);
        t.iter().fold(0.0, |acc, &tp| acc + rho(tp))
    }

    fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.grad.pixels();
        let (t, _) = self.products(x, y);
        let w: Vec<f64> = (0..2 * n).map(|i| (2.0 - 2.0 * t[i % n]) * y[i]).collect();
        self.grad.adjoint(&w)
    }

    fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.grad.pixels();
        let (t, g) = self.products(x, y);
        (0..2 * n).map(|i| (2.0 - 2.0 * t[i % n]) * g[i]).collect()
    }
}

/// K(x, y) = E(x) = ½xᵀQx − cᵀx, independent of y.
#[derive(Debug, Clone)]
pub struct SmoothPrimal {
    pub q: DenseMatrix,
    pub c: Vec<f64>,
}

impl Coupling for SmoothPrimal {
    fn value(&self, x: &[f64], _y: &[f64]) -> f64 {
        0.5 * dot(&self.q.apply(x), x) - dot(&self.c, x)
    }

    fn grad_x(&self, x: &[f64], _y: &[f64]) -> Vec<f64> {
        self.q
            .apply(x)
            .iter()
            .zip(&self.c)
            .map(|(qx, ci)| qx - ci)
            .collect()
    }

    fn grad_y(&self, _x: &[f64], y: &[f64]) -> Vec<f64> {
        vec![0.0; y.len()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Rof,
    TwoBlock,
    Potts,
    ForwardBackward,
    Bilinear,
    Custom,
}

impl ProblemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::Rof => "rof",
            ProblemKind::TwoBlock => "two_block",
            ProblemKind::Potts => "potts",
            ProblemKind::ForwardBackward => "fb",
            ProblemKind::Bilinear => "bilinear",
            ProblemKind::Custom => "custom",
        }
    }
}

/// The set Ω on which declared constants are valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidityRegion {
    /// |x_i| ≤ radius for every primal entry.
    pub x_box: Option<f64>,
    /// ‖y_ℓ‖₂ ≤ radius for one dual block ℓ.
    pub dual_ball: Option<(usize, f64)>,
    /// Per-pixel bounds ‖[∇_h x]_p‖ ≤ grad and ‖y_p‖ ≤ dual.
    pub pixel: Option<PixelBounds>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelBounds {
    pub grad: Gradient2D,
    pub grad_bound: f64,
    pub dual_bound: f64,
}

impl ValidityRegion {
    pub fn contains(&self, u: &PrimalDual) -> bool {
        if let Some(r) = self.x_box {
            if u.x.as_slice().iter().any(|v| v.abs() > r) {
                return false;
            }
        }
        if let Some((block, r)) = self.dual_ball {
            let norm = u.y.block(block).iter().fold(0.0, |a, v| a + v * v).sqrt();
            if norm > r {
                return false;
            }
        }
        if let Some(px) = &self.pixel {
            let g = px.grad.apply(u.x.as_slice());
            if pixel_norms(&g, 2).any(|r| r > px.grad_bound) {
                return false;
            }
            if pixel_norms(u.y.as_slice(), 2).any(|r| r > px.dual_bound) {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone)]
pub struct SaddleProblem {
    pub kind: ProblemKind,
    pub f_blocks: Vec<ProxFunction>,
    pub gstar_blocks: Vec<ProxFunction>,
    pub x_layout: Vec<usize>,
    pub y_layout: Vec<usize>,
    pub coupling: Arc<dyn Coupling>,
    pub affine_in_y: bool,
    pub bilinear: bool,
    /// Lipschitz and modulus constants keyed as the certificates expect
    /// (`L_DK`, `L_DKy`, `norm_A`, `gamma_F`, `gamma_G`, `beta`, ...).
    pub constants: ParamMap,
    /// True when the constants hold only on `region`.
    pub local_constants: bool,
    pub region: Option<ValidityRegion>,
    pub image_shape: Option<(usize, usize)>,
}

impl SaddleProblem {
    pub fn new(
        kind: ProblemKind,
        f_blocks: Vec<ProxFunction>,
        gstar_blocks: Vec<ProxFunction>,
        x_layout: Vec<usize>,
        y_layout: Vec<usize>,
        coupling: Arc<dyn Coupling>,
        affine_in_y: bool,
    ) -> Result<Self> {
        if f_blocks.len() != x_layout.len() || gstar_blocks.len() != y_layout.len() {
            return Err(Error::LayoutMismatch {
                expected: vec![x_layout.len(), y_layout.len()],
                found: vec![f_blocks.len(), gstar_blocks.len()],
            });
        }
        for (f, &n) in f_blocks.iter().zip(&x_layout).chain(gstar_blocks.iter().zip(&y_layout)) {
            if let ProxFunction::QuadraticData { b } = f {
                if b.len() != n {
                    return Err(Error::LayoutMismatch {
                        expected: vec![n],
                        found: vec![b.len()],
                    });
                }
            }
        }
        let gamma_f = f_blocks.iter().map(ProxFunction::gamma).fold(f64::INFINITY, f64::min);
        let gamma_g = gstar_blocks
            .iter()
            .map(ProxFunction::gamma)
            .fold(f64::INFINITY, f64::min);
        let mut constants = ParamMap::new()
            .scalar("gamma_F", gamma_f)
            .scalar("gamma_G", gamma_g);
        if affine_in_y {
            constants.set_scalar("L_DKy", 0.0);
        }
        Ok(Self {
            kind,
            f_blocks,
            gstar_blocks,
            x_layout,
            y_layout,
            coupling,
            affine_in_y,
            bilinear: false,
            constants,
            local_constants: false,
            region: None,
            image_shape: None,
        })
    }

    /// Adds constants; rejects negative values and a nonzero `L_DKy` on an
    /// affine-in-y coupling.
    pub fn with_constants(mut self, extra: ParamMap) -> Result<Self> {
        for (k, v) in extra.scalars() {
            let bound = k.starts_with('L') || k.starts_with("norm") || k.starts_with("rho");
            if bound && !(v >= 0.0) {
                return Err(Error::InvalidParameter(format!("constant `{k}` must be nonnegative, got {v}")));
            }
        }
        if self.affine_in_y && extra.try_get("L_DKy").is_some_and(|v| v != 0.0) {
            return Err(Error::InvalidParameter(
                "an affine-in-y coupling has L_DKy = 0".into(),
            ));
        }
        self.constants = self.constants.merge(&extra);
        Ok(self)
    }

    /// F(x) = f_F(x), G_*(y) = f_G(y) and K(x,y) = ⟨Ax, y⟩ with a dense A.
    pub fn bilinear_dense(a: DenseMatrix, f: ProxFunction, g: ProxFunction, seed: u64) -> Result<Self> {
        let (m, n) = (a.rows(), a.cols());
        let op: Arc<dyn LinearOperator> = Arc::new(a);
        let norm = estimate_operator_norm(op.as_ref(), NORM_ITERS, seed)?;
        let coupling = Arc::new(Bilinear { op });
        let mut p = Self::new(
            ProblemKind::Bilinear,
            vec![f],
            vec![g],
            vec![n],
            vec![m],
            coupling,
            true,
        )?
        .with_constants(bilinear_constants(norm))?;
        p.bilinear = true;
        Ok(p)
    }

    pub fn constant(&self, key: &str) -> Result<f64> {
        self.constants.get(key)
    }

    pub fn primal_blocks(&self) -> usize {
        self.x_layout.len()
    }

    pub fn dual_blocks(&self) -> usize {
        self.y_layout.len()
    }

    /// Layout of the concatenated u = (x, y).
    pub fn layout(&self) -> Vec<usize> {
        self.x_layout.iter().chain(&self.y_layout).copied().collect()
    }

    pub fn check_point(&self, u: &PrimalDual) -> Result<()> {
        u.x.ensure_layout(&self.x_layout)?;
        u.y.ensure_layout(&self.y_layout)
    }

    pub fn zero_point(&self) -> PrimalDual {
        PrimalDual::new(BlockVector::zeros(&self.x_layout), BlockVector::zeros(&self.y_layout))
    }

    pub fn f_value(&self, x: &BlockVector) -> Result<f64> {
        let mut total = 0.0;
        for (f, blk) in self.f_blocks.iter().zip(x.blocks()) {
            total += f.value(blk)?;
        }
        Ok(total)
    }

    pub fn gstar_value(&self, y: &BlockVector) -> Result<f64> {
        let mut total = 0.0;
        for (g, blk) in self.gstar_blocks.iter().zip(y.blocks()) {
            total += g.value(blk)?;
        }
        Ok(total)
    }

    /// ℒ(x, y) = F(x) + K(x, y) − G_*(y).
    pub fn lagrangian(&self, x: &BlockVector, y: &BlockVector) -> Result<f64> {
        let k = self.coupling.value(x.as_slice(), y.as_slice());
        Ok(self.f_value(x)? + k - self.gstar_value(y)?)
    }
}

fn bilinear_constants(norm: f64) -> ParamMap {
    ParamMap::new()
        .scalar("norm_A", norm)
        .scalar("L_DK", norm)
        .scalar("beta", 1.0)
}

/// K, D_xK and D_yK at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingValue {
    pub k: f64,
    pub dx: BlockVector,
    pub dy: BlockVector,
    /// Set when the point lies outside the problem's declared Ω.
    pub outside_region: bool,
}

fn finite_block(layout: &[usize], data: Vec<f64>, what: &str) -> Result<BlockVector> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what.to_string()));
    }
    BlockVector::from_flat(layout, data)
}

pub fn coupling_eval(p: &SaddleProblem, u: &PrimalDual) -> Result<CouplingValue> {
    p.check_point(u)?;
    let (x, y) = (u.x.as_slice(), u.y.as_slice());
    let k = p.coupling.value(x, y);
    if !k.is_finite() {
        return Err(Error::NonFinite("K".into()));
    }
    let dx = finite_block(&p.x_layout, p.coupling.grad_x(x, y), "D_xK")?;
    let dy = finite_block(&p.y_layout, p.coupling.grad_y(x, y), "D_yK")?;
    let outside_region = p.region.as_ref().is_some_and(|r| !r.contains(u));
    Ok(CouplingValue {
        k,
        dx,
        dy,
        outside_region,
    })
}

/// Splits a flat vector by `layout`.
pub(crate) fn split_layout<'a>(layout: &'a [usize], v: &'a [f64]) -> impl Iterator<Item = &'a [f64]> + 'a {
    let mut start = 0;
    layout.iter().map(move |&n| {
        let s = &v[start..start + n];
        start += n;
        s
    })
}

/// One linearised primal-dual step from `u` with both extrapolation points
/// at `u`. Fixed points are exactly the critical points of the problem.
pub fn fixed_point_map(p: &SaddleProblem, steps: &StepLengths, u: &PrimalDual) -> Result<PrimalDual> {
    p.check_point(u)?;
    let (x, y) = (u.x.as_slice(), u.y.as_slice());
    let dx = p.coupling.grad_x(x, y);
    let mut xn = Vec::with_capacity(x.len());
    for (j, ((f, xb), db)) in p
        .f_blocks
        .iter()
        .zip(split_layout(&p.x_layout, x))
        .zip(split_layout(&p.x_layout, &dx))
        .enumerate()
    {
        let tau = steps.tau_for(j);
        let arg: Vec<f64> = xb.iter().zip(db).map(|(a, d)| a - tau * d).collect();
        xn.extend(f.prox(tau, &arg)?);
    }
    let dy_old = p.coupling.grad_y(x, y);
    let dy_new = p.coupling.grad_y(&xn, y);
    let mut yn = Vec::with_capacity(y.len());
    for (l, (((g, yb), dn), d0)) in p
        .gstar_blocks
        .iter()
        .zip(split_layout(&p.y_layout, y))
        .zip(split_layout(&p.y_layout, &dy_new))
        .zip(split_layout(&p.y_layout, &dy_old))
        .enumerate()
    {
        let sigma = steps.sigma_for(l);
        let arg: Vec<f64> = yb
            .iter()
            .zip(dn)
            .zip(d0)
            .map(|((a, n), o)| a + sigma * (2.0 * n - o))
            .collect();
        yn.extend(g.prox(sigma, &arg)?);
    }
    Ok(PrimalDual::new(
        finite_block(&p.x_layout, xn, "primal step")?,
        finite_block(&p.y_layout, yn, "dual step")?,
    ))
}

/// ‖u − T(u)‖ for the fixed-point map [`fixed_point_map`].
pub fn optimality_residual(p: &SaddleProblem, steps: &StepLengths, u: &PrimalDual) -> Result<f64> {
    let t = fixed_point_map(p, steps, u)?;
    u.distance(&t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    KktSolve,
    LongRun,
}

/// A known (approximate) solution ū ∈ H⁻¹(0).
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePoint {
    pub u: PrimalDual,
    pub provenance: Provenance,
    /// Optimality residual at `u` when it was established.
    pub residual: f64,
}

impl ReferencePoint {
    pub fn new(u: PrimalDual, provenance: Provenance, residual: f64) -> Self {
        Self {
            u,
            provenance,
            residual,
        }
    }

    /// Builds a reference and rejects it if its residual exceeds `tol`.
    pub fn verified(
        p: &SaddleProblem,
        steps: &StepLengths,
        u: PrimalDual,
        provenance: Provenance,
        tol: f64,
    ) -> Result<Self> {
        let residual = optimality_residual(p, steps, &u)?;
        if provenance != Provenance::Analytic && residual > tol {
            return Err(Error::InvalidParameter(format!(
                "reference residual {residual:e} exceeds {tol:e}"
            )));
        }
        Ok(Self::new(u, provenance, residual))
    }
}

fn image_dims(params: &ParamMap) -> Result<(usize, usize)> {
    let n1 = params.get_count("n1")?;
    let n2 = params.get_count("n2")?;
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidParameter("image dimensions must be positive".into()));
    }
    Ok((n1, n2))
}

fn image_vector(params: &ParamMap, key: &str, n: usize) -> Result<Vec<f64>> {
    let v = params.get_vector(key)?;
    if v.len() != n {
        return Err(Error::LayoutMismatch {
            expected: vec![n],
            found: vec![v.len()],
        });
    }
    Ok(v.to_vec())
}

fn positive(params: &ParamMap, key: &str) -> Result<f64> {
    let v = params.get(key)?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!("`{key}` must be positive, got {v}")));
    }
    Ok(v)
}

/// Builds one of the shipped problems.
///
/// | name | required | optional |
/// |------|----------|----------|
/// | `rof` | `n1`, `n2`, `alpha`, vector `b` | `seed` |
/// | `two_block` | `n1`, `n2`, `alpha`, vector `z` | vector `b`, `box_radius` (1), `rho_y1` (√n), `seed` |
/// | `potts` | `n1`, `n2`, vector `b`, `grad_bound`, `dual_bound` | |
/// | `fb` | vector `c`, matrix `Q` or vector `q` | `l1`, vector `b`, `seed` |
pub fn make_problem(name: &str, params: &ParamMap) -> Result<SaddleProblem> {
    let seed = params.get_or("seed", 0.0) as u64;
    match name {
        "rof" => {
            let (n1, n2) = image_dims(params)?;
            let n = n1 * n2;
            let alpha = params.get("alpha")?;
            let b = image_vector(params, "b", n)?;
            let grad = Gradient2D::new(n1, n2)?;
            let norm = estimate_operator_norm(&grad, NORM_ITERS, seed)?;
            let mut p = SaddleProblem::new(
                ProblemKind::Rof,
                vec![ProxFunction::quadratic_data(b)],
                vec![ProxFunction::pointwise_ball(alpha, 2)?],
                vec![n],
                vec![2 * n],
                Arc::new(Bilinear { op: Arc::new(grad) }),
                true,
            )?
            .with_constants(bilinear_constants(norm).scalar("alpha", alpha))?;
            p.bilinear = true;
            p.image_shape = Some((n1, n2));
            Ok(p)
        }
        "two_block" => {
            let (n1, n2) = image_dims(params)?;
            let n = n1 * n2;
            let alpha = params.get("alpha")?;
            let z = image_vector(params, "z", n)?;
            let f = match params.try_vector("b") {
                Some(_) => ProxFunction::quadratic_data(image_vector(params, "b", n)?),
                None => ProxFunction::Zero,
            };
            let radius = params.get_or("box_radius", 1.0);
            let rho_y1 = params.get_or("rho_y1", (n as f64).sqrt());
            let grad = Gradient2D::new(n1, n2)?;
            let norm_a2 = estimate_operator_norm(&grad, NORM_ITERS, seed)?;
            let g1 = ProxFunction::quadratic_data(z.iter().map(|v| -v).collect());
            let mut p = SaddleProblem::new(
                ProblemKind::TwoBlock,
                vec![f],
                vec![g1, ProxFunction::pointwise_ball(alpha, 2)?],
                vec![n],
                vec![n, 2 * n],
                Arc::new(TwoBlockCoupling { grad }),
                true,
            )?
            .with_constants(
                ParamMap::new()
                    .scalar("L_A1", radius)
                    .scalar("L_DA1", 1.0)
                    .scalar("norm_A2", norm_a2)
                    .scalar("rho_y1", rho_y1)
                    .scalar("alpha", alpha),
            )?;
            p.local_constants = true;
            p.region = Some(ValidityRegion {
                x_box: Some(radius),
                dual_ball: Some((0, rho_y1)),
                pixel: None,
            });
            p.image_shape = Some((n1, n2));
            Ok(p)
        }
        "potts" => {
            let (n1, n2) = image_dims(params)?;
            let n = n1 * n2;
            let b = image_vector(params, "b", n)?;
            let grad_bound = positive(params, "grad_bound")?;
            let dual_bound = positive(params, "dual_bound")?;
            let grad = Gradient2D::new(n1, n2)?;
            let (gb, rb) = (grad_bound, dual_bound);
            // Per-pixel Hessian of ρ(⟨g, y⟩) in (g, y) is bounded by
            // 2 max(R², G²) + 2 + 4GR; the map x ↦ ∇_h x has norm ≤ √8.
            let l_dk = 8.0 * (2.0 + 4.0 * gb * rb + 2.0 * (rb * rb + gb * gb));
            let l_dky = 2.0 * gb * gb;
            let mut p = SaddleProblem::new(
                ProblemKind::Potts,
                vec![ProxFunction::quadratic_data(b)],
                vec![ProxFunction::Zero],
                vec![n],
                vec![2 * n],
                Arc::new(PottsCoupling { grad }),
                false,
            )?
            .with_constants(
                ParamMap::new()
                    .scalar("L_DK", l_dk)
                    .scalar("L_DKy", l_dky)
                    .scalar("grad_bound", gb)
                    .scalar("dual_bound", rb),
            )?;
            p.local_constants = true;
            p.region = Some(ValidityRegion {
                x_box: None,
                dual_ball: None,
                pixel: Some(PixelBounds {
                    grad,
                    grad_bound: gb,
                    dual_bound: rb,
                }),
            });
            p.image_shape = Some((n1, n2));
            Ok(p)
        }
        "fb" => {
            let c = params.get_vector("c")?.to_vec();
            let q = match (params.try_matrix("Q"), params.try_vector("q")) {
                (Some(rows), _) => DenseMatrix::from_rows(rows)?,
                (None, Some(d)) => DenseMatrix::diagonal(d)?,
                (None, None) => return Err(Error::MissingParameter("Q".into())),
            };
            if !q.is_symmetric() || q.cols() != c.len() {
                return Err(Error::InvalidParameter(
                    "Q must be symmetric and match the length of c".into(),
                ));
            }
            let n = c.len();
            let f = if let Some(alpha) = params.try_get("l1") {
                ProxFunction::scaled_l1(alpha)?
            } else if params.try_vector("b").is_some() {
                ProxFunction::quadratic_data(image_vector(params, "b", n)?)
            } else {
                ProxFunction::Zero
            };
            let l_dk = estimate_operator_norm(&q, NORM_ITERS, seed)?;
            SaddleProblem::new(
                ProblemKind::ForwardBackward,
                vec![f],
                vec![ProxFunction::ZeroIndicator],
                vec![n],
                vec![1],
                Arc::new(SmoothPrimal { q, c }),
                true,
            )?
            .with_constants(ParamMap::new().scalar("L_DK", l_dk))
        }
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}

/// Symmetric grid s ∈ [−half_width, half_width] with spacing `step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarGrid {
    pub half_width: f64,
    pub step: f64,
}

/// max over the grid of ρ(st); approximates |t|₀ = sup_s ρ(st).
pub fn potts_zero_function_check(t: f64, grid: ScalarGrid) -> f64 {
    let count = (2.0 * grid.half_width / grid.step).round() as usize;
    (0..=count)
        .map(|k| -grid.half_width + k as f64 * grid.step)
        .fold(f64::NEG_INFINITY, |best, s| best.max(rho(s * t)))
}
