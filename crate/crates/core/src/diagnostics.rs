//! Gap functionals, Féjer and descent monitors, the ROF duality gap and
//! empirical rate fitting.

use crate::blockvec::PrimalDual;
use crate::bregman::SaddleComposite;
use crate::error::{Error, Result};
use crate::linop::LinearOperator;
use crate::params::ParamMap;
use crate::prox::{pixel_norms, ProxFunction};
use crate::saddle::{ProblemKind, SaddleProblem};
use crate::solvers::{ergodic_average, IterationTrace};
use crate::steprules::StepLengths;

/// Absolute and relative slack used by the inequality monitors.
pub const MONITOR_TOL: f64 = 1e-9;

/// Tolerance for an inequality whose largest participating term is `scale`.
pub fn monitor_tolerance(scale: f64) -> f64 {
    MONITOR_TOL + MONITOR_TOL * scale.abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub residual: f64,
    pub b0_to_ref: Option<f64>,
    pub lagrangian_gap: Option<f64>,
    pub fejer_margin: Option<f64>,
    pub growth_gap: Option<f64>,
    /// Seconds since the solve started; only recorded when timing is on.
    pub wall_time: Option<f64>,
}

impl IterationRecord {
    pub fn new(k: usize, residual: f64) -> Self {
        Self {
            k,
            residual,
            b0_to_ref: None,
            lagrangian_gap: None,
            fejer_margin: None,
            growth_gap: None,
            wall_time: None,
        }
    }
}

/// 𝒢^ℒ(u, ū) = ℒ(x, ȳ) − ℒ(x̄, y); infinite outside the domains.
pub fn lagrangian_gap(p: &SaddleProblem, u: &PrimalDual, ubar: &PrimalDual) -> Result<f64> {
    p.check_point(u)?;
    p.check_point(ubar)?;
    Ok(p.lagrangian(&u.x, &ubar.y)? - p.lagrangian(&ubar.x, &u.y)?)
}

/// B⁰(a, b) for the problem and step lengths.
pub fn b0(p: &SaddleProblem, steps: &StepLengths, a: &PrimalDual, b: &PrimalDual) -> Result<f64> {
    SaddleComposite::new(p, steps)?.between(a, b)
}

/// B⁰(ū, u^k) − [B⁰(ū, u^{k+1}) + B⁰(u^{k+1}, u^k) + gap].
pub fn fejer_residual(
    p: &SaddleProblem,
    steps: &StepLengths,
    ubar: &PrimalDual,
    u_k: &PrimalDual,
    u_k1: &PrimalDual,
    gap_value: f64,
) -> Result<f64> {
    let j = SaddleComposite::new(p, steps)?;
    Ok(fejer_terms(&j, ubar, u_k, u_k1, gap_value)?.0)
}

/// Féjer residual together with the largest term involved.
pub(crate) fn fejer_terms(
    j: &SaddleComposite<'_>,
    ubar: &PrimalDual,
    u_k: &PrimalDual,
    u_k1: &PrimalDual,
    gap_value: f64,
) -> Result<(f64, f64)> {
    let before = j.between(ubar, u_k)?;
    let after = j.between(ubar, u_k1)?;
    let step = j.between(u_k1, u_k)?;
    let scale = [before, after, step, gap_value]
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok((before - (after + step + gap_value), scale))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentReport {
    pub n: usize,
    /// Left side of the descent inequality.
    pub lhs: f64,
    /// Right side (B⁰(ū, u⁰), scaled by 1 − λ₁ for inertial runs).
    pub rhs: f64,
    pub holds: bool,
    /// 𝒢^ℒ(ũ^N, ū).
    pub ergodic_gap: f64,
    /// B⁰(ū, u⁰)/N (or (1 − λ₁)B⁰(ū, u⁰)/N).
    pub ergodic_bound: f64,
    pub ergodic_holds: bool,
}

fn stored_iterates(trace: &IterationTrace, n: usize) -> Result<&[PrimalDual]> {
    let its = trace.iterates.as_deref().ok_or_else(|| {
        Error::InvalidParameter("descent checks need a trace with stored iterates".into())
    })?;
    if n == 0 || n >= its.len() {
        return Err(Error::InvalidParameter(format!(
            "N = {n} outside 1..={}",
            its.len().saturating_sub(1)
        )));
    }
    Ok(its)
}

fn gap_sum(gaps: &[f64], n: usize) -> Result<f64> {
    if gaps.len() < n {
        return Err(Error::InvalidParameter(format!(
            "need {n} gap values, got {}",
            gaps.len()
        )));
    }
    Ok(gaps[..n].iter().sum())
}

/// Descent inequality B⁰(ū,u^N) + Σ_{k<N} B⁰(u^{k+1},u^k) + Σ_{k<N} gaps[k]
/// ≤ B⁰(ū,u⁰), where gaps[k] is 𝒢(u^{k+1}, ū), plus its ergodic consequence.
pub fn descent_check(
    trace: &IterationTrace,
    p: &SaddleProblem,
    steps: &StepLengths,
    ubar: &PrimalDual,
    gaps: &[f64],
    n: usize,
) -> Result<DescentReport> {
    let its = stored_iterates(trace, n)?;
    let j = SaddleComposite::new(p, steps)?;
    let mut steps_sum = 0.0;
    for k in 0..n {
        steps_sum += j.between(&its[k + 1], &its[k])?;
    }
    let lhs = j.between(ubar, &its[n])? + steps_sum + gap_sum(gaps, n)?;
    let rhs = j.between(ubar, &its[0])?;
    finish_report(trace, p, ubar, n, lhs, rhs, rhs)
}

/// Inertial descent bound
/// (1−λ_{N+1}−βλ_N)B⁰(ū,u^N) + Σ_{k<N}(1−2λ_{k+1}−βλ_k)B⁰(u^{k+1},u^k)
/// + Σ_{k<N} gaps[k] ≤ (1−λ₁)B⁰(ū,u⁰), with λ_0 := λ_1.
pub fn inertial_descent_check(
    trace: &IterationTrace,
    p: &SaddleProblem,
    steps: &StepLengths,
    ubar: &PrimalDual,
    gaps: &[f64],
    n: usize,
    beta: f64,
) -> Result<DescentReport> {
    let its = stored_iterates(trace, n)?;
    let j = SaddleComposite::new(p, steps)?;
    let lam = |k: usize| steps.lambda_at(k.max(1));
    let mut steps_sum = 0.0;
    for k in 0..n {
        let coeff = 1.0 - 2.0 * lam(k + 1) - beta * lam(k);
        steps_sum += coeff * j.between(&its[k + 1], &its[k])?;
    }
    let head = (1.0 - lam(n + 1) - beta * lam(n)) * j.between(ubar, &its[n])?;
    let lhs = head + steps_sum + gap_sum(gaps, n)?;
    let start = j.between(ubar, &its[0])?;
    let rhs = (1.0 - lam(1)) * start;
    finish_report(trace, p, ubar, n, lhs, rhs, rhs)
}

fn finish_report(
    trace: &IterationTrace,
    p: &SaddleProblem,
    ubar: &PrimalDual,
    n: usize,
    lhs: f64,
    rhs: f64,
    ergodic_numerator: f64,
) -> Result<DescentReport> {
    let holds = lhs <= rhs + monitor_tolerance(lhs.abs().max(rhs.abs()));
    let avg = ergodic_average(trace, n)?;
    let ergodic_gap = lagrangian_gap(p, &avg, ubar)?;
    let ergodic_bound = ergodic_numerator / n as f64;
    let ergodic_holds = ergodic_gap <= ergodic_bound + monitor_tolerance(ergodic_bound);
    Ok(DescentReport {
        n,
        lhs,
        rhs,
        holds,
        ergodic_gap,
        ergodic_bound,
        ergodic_holds,
    })
}

/// a_K(u, ū) = K(x,y) − K(x̄,ȳ) + ⟨D_xK(x,y), x̄−x⟩ + ⟨D_yK(x̄,ȳ), ȳ−y⟩.
pub fn a_k(p: &SaddleProblem, u: &PrimalDual, ubar: &PrimalDual) -> f64 {
    let c = &p.coupling;
    let (x, y) = (u.x.as_slice(), u.y.as_slice());
    let (xb, yb) = (ubar.x.as_slice(), ubar.y.as_slice());
    let dx = c.grad_x(x, y);
    let dy = c.grad_y(xb, yb);
    let lin_x = dx.iter().zip(xb.iter().zip(x)).fold(0.0, |a, (d, (p, q))| a + d * (p - q));
    let lin_y = dy.iter().zip(yb.iter().zip(y)).fold(0.0, |a, (d, (p, q))| a + d * (p - q));
    c.value(x, y) - c.value(xb, yb) + lin_x + lin_y
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthMode {
    ConvexConcave,
    LipschitzK,
    AffineYA,
    AffineYB,
}

impl std::str::FromStr for GrowthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convex_concave" => Ok(GrowthMode::ConvexConcave),
            "lipschitz_k" => Ok(GrowthMode::LipschitzK),
            "affine_y_a" => Ok(GrowthMode::AffineYA),
            "affine_y_b" => Ok(GrowthMode::AffineYB),
            other => Err(Error::InvalidParameter(format!("unknown growth mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthGap {
    /// 𝒢(u, ū) = c_x‖x − x̄‖² + c_y‖y − ȳ‖².
    pub value: f64,
    pub coeff_x: f64,
    pub coeff_y: f64,
    /// The mode's conditions on its constants hold, so (C²) holds with
    /// this gap on the mode's neighbourhood.
    pub conditions_hold: bool,
    /// `conditions_hold` and both coefficients nonnegative.
    pub nonneg_guaranteed: bool,
    /// γ_F‖x−x̄‖² + γ_G‖y−ȳ‖² − a_K(ū,u) − a_K(u,ū) − 𝒢(u,ū); nonnegative
    /// whenever the conditions hold and u lies in the neighbourhood.
    pub condition_slack: f64,
}

/// Growth-condition gap for `mode`. Constants read: `gamma_F`, `gamma_G`
/// and, per mode, `L_DK`; `L_DA`, `rho_y`, `gamma_tilde_F`,
/// `gamma_tilde_G`; `L_DA`, `rho_x`, `growth_alpha`, `gamma_tilde_F`,
/// `gamma_tilde_G`.
pub fn growth_gap(
    p: &SaddleProblem,
    u: &PrimalDual,
    ubar: &PrimalDual,
    mode: GrowthMode,
    constants: &ParamMap,
) -> Result<GrowthGap> {
    let gf = constants.get("gamma_F")?;
    let gg = constants.get("gamma_G")?;
    let dx2 = u.x.sub(&ubar.x)?.norm2_sq();
    let dy2 = u.y.sub(&ubar.y)?.norm2_sq();
    let ybar = ubar.y.norm2();
    let (cx, cy, conditions_hold) = match mode {
        GrowthMode::ConvexConcave => (gf, gg, true),
        GrowthMode::LipschitzK => {
            let l = constants.get("L_DK")?;
            (gf - l, gg - l, true)
        }
        GrowthMode::AffineYA => {
            let lda = constants.get("L_DA")?;
            let rho = constants.get("rho_y")?;
            let tf = constants.get("gamma_tilde_F")?;
            let tg = constants.get_or("gamma_tilde_G", 0.0);
            (gf - tf, gg - tg, tf >= 0.5 * lda * (rho + ybar) && tg >= 0.0)
        }
        GrowthMode::AffineYB => {
            let lda = constants.get("L_DA")?;
            let rho_x = constants.get("rho_x")?;
            let alpha = constants.get("growth_alpha")?;
            let tf = constants.get("gamma_tilde_F")?;
            let tg = constants.get("gamma_tilde_G")?;
            let ok = alpha > 0.0
                && tf > lda * (ybar + 0.5 * alpha)
                && tg >= lda * rho_x * rho_x / (2.0 * alpha);
            (gf - tf, gg - tg, ok)
        }
    };
    let value = cx * dx2 + cy * dy2;
    let sym = a_k(p, ubar, u) + a_k(p, u, ubar);
    let condition_slack = gf * dx2 + gg * dy2 - sym - value;
    Ok(GrowthGap {
        value,
        coeff_x: cx,
        coeff_y: cy,
        conditions_hold,
        nonneg_guaranteed: conditions_hold && cx >= 0.0 && cy >= 0.0,
        condition_slack,
    })
}

/// Primal minus dual objective for ROF, `+∞` when y is infeasible.
pub fn duality_gap_rof(p: &SaddleProblem, u: &PrimalDual, b: &[f64], alpha: f64) -> Result<f64> {
    if p.kind != ProblemKind::Rof {
        return Err(Error::Incompatible(format!(
            "duality gap is defined for rof, not {}",
            p.kind.as_str()
        )));
    }
    let (n1, n2) = p.image_shape.expect("rof problems carry a shape");
    let grad = crate::linop::Gradient2D::new(n1, n2)?;
    p.check_point(u)?;
    let x = u.x.as_slice();
    let y = u.y.as_slice();
    if b.len() != x.len() {
        return Err(Error::LayoutMismatch {
            expected: vec![x.len()],
            found: vec![b.len()],
        });
    }
    let limit = alpha * (1.0 + 1e-12);
    if pixel_norms(y, 2).any(|r| r > limit) {
        return Ok(f64::INFINITY);
    }
    let fid = ProxFunction::quadratic_data(b.to_vec()).value(x)?;
    let tv: f64 = pixel_norms(&grad.apply(x), 2).sum();
    let primal = fid + alpha * tv;
    let div = grad.adjoint(y);
    let dual = div.iter().zip(b).fold(0.0, |acc, (d, bi)| acc + d * bi)
        - 0.5 * div.iter().fold(0.0, |acc, d| acc + d * d);
    Ok(primal - dual)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateModel {
    /// value ≈ C k^p.
    Power,
    /// value ≈ C r^k.
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub model: RateModel,
    /// Exponent p (power) or ratio r (geometric).
    pub rate: f64,
    pub intercept: f64,
    /// RMS of the log residuals.
    pub fit_error: f64,
    pub samples: usize,
}

/// Least squares fit of `model` on the tail half of `series`.
pub fn rate_fit(series: &[(f64, f64)], model: RateModel) -> Result<RateFit> {
    if series.len() < 10 {
        return Err(Error::InvalidParameter(format!(
            "rate fit needs at least 10 samples, got {}",
            series.len()
        )));
    }
    if let Some(&(k, v)) = series.iter().find(|(k, v)| !(*v > 0.0) || (!(*k > 0.0) && model == RateModel::Power)) {
        return Err(Error::InvalidParameter(format!(
            "rate fit needs positive values, got {v} at {k}"
        )));
    }
    let tail = &series[series.len() / 2..];
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .map(|&(k, v)| {
            let t = match model {
                RateModel::Power => k.ln(),
                RateModel::Geometric => k,
            };
            (t, v.ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt = pts.iter().fold(0.0, |a, p| a + (p.0 - mt) * (p.0 - mt));
    let stv = pts.iter().fold(0.0, |a, p| a + (p.0 - mt) * (p.1 - mv));
    if stt == 0.0 {
        return Err(Error::InvalidParameter("rate fit needs distinct abscissae".into()));
    }
    let slope = stv / stt;
    let intercept = mv - slope * mt;
    let sse = pts
        .iter()
        .fold(0.0, |a, p| a + (p.1 - intercept - slope * p.0).powi(2));
    let rate = match model {
        RateModel::Power => slope,
        RateModel::Geometric => slope.exp(),
    };
    Ok(RateFit {
        model,
        rate,
        intercept,
        fit_error: (sse / n).sqrt(),
        samples: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockvec::BlockVector;
    use crate::linop::DenseMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn pd(x: f64, y: f64) -> PrimalDual {
        PrimalDual::new(
            BlockVector::single(vec![x]).unwrap(),
            BlockVector::single(vec![y]).unwrap(),
        )
    }

    fn scalar_saddle() -> SaddleProblem {
        SaddleProblem::bilinear_dense(
            DenseMatrix::from_rows(&[vec![1.0]]).unwrap(),
            ProxFunction::quadratic_data(vec![1.0]),
            ProxFunction::quadratic_data(vec![0.0]),
            0,
        )
        .unwrap()
    }

    #[test]
    fn lagrangian_gap_by_hand() {
        let p = scalar_saddle();
        let ubar = pd(0.5, 0.5);
        assert_eq!(lagrangian_gap(&p, &ubar, &ubar).unwrap(), 0.0);
        assert!((lagrangian_gap(&p, &pd(1.0, 0.0), &ubar).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn stationary_fejer() {
        let p = scalar_saddle();
        let steps = StepLengths::scalar(0.5, 0.5).unwrap();
        let u = pd(0.5, 0.5);
        assert_eq!(fejer_residual(&p, &steps, &u, &u, &u, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn growth_modes() {
        let p = scalar_saddle();
        let c = ParamMap::new().scalar("gamma_F", 1.0).scalar("gamma_G", 0.0);
        let g = growth_gap(&p, &pd(2.0, 9.0), &pd(0.0, 0.0), GrowthMode::ConvexConcave, &c).unwrap();
        assert_eq!(g.value, 4.0);

        let c = c.scalar("gamma_G", 3.0).scalar("L_DK", 1.0);
        let g = growth_gap(&p, &pd(2.0, 1.0), &pd(0.0, 0.0), GrowthMode::LipschitzK, &c).unwrap();
        assert_eq!(g.coeff_x, 0.0);
        assert_eq!(g.value, 2.0);
    }

    #[test]
    fn affine_case_a_threshold() {
        let p = scalar_saddle();
        let ubar = pd(0.0, 0.5);
        let (lda, rho) = (2.0_f64, 1.0_f64);
        let threshold = 0.5 * lda * (rho + 0.5);
        let base = ParamMap::new()
            .scalar("gamma_F", 10.0)
            .scalar("gamma_G", 0.0)
            .scalar("L_DA", lda)
            .scalar("rho_y", rho);
        let below = base.clone().scalar("gamma_tilde_F", threshold * (1.0 - 1e-12));
        let at = base.scalar("gamma_tilde_F", threshold);
        let u = pd(1.0, 0.2);
        assert!(!growth_gap(&p, &u, &ubar, GrowthMode::AffineYA, &below).unwrap().nonneg_guaranteed);
        assert!(growth_gap(&p, &u, &ubar, GrowthMode::AffineYA, &at).unwrap().nonneg_guaranteed);
    }

    #[test]
    fn rate_fits_exact_models() {
        let power: Vec<(f64, f64)> = (1..=200).map(|k| (k as f64, 1.0 / k as f64)).collect();
        let fit = rate_fit(&power, RateModel::Power).unwrap();
        assert!((fit.rate + 1.0).abs() <= 0.01);
        let geo: Vec<(f64, f64)> = (1..=200).map(|k| (k as f64, 0.9f64.powi(k))).collect();
        let fit = rate_fit(&geo, RateModel::Geometric).unwrap();
        assert!((fit.rate - 0.9).abs() <= 0.001);
    }

    #[test]
    fn rate_fit_with_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let s: Vec<(f64, f64)> = (1..=1000)
            .map(|k| (k as f64, (1.0 + noise.sample(&mut rng)) / k as f64))
            .collect();
        assert!((rate_fit(&s, RateModel::Power).unwrap().rate + 1.0).abs() <= 0.05);
    }

    #[test]
    fn rate_fit_rejects_bad_series() {
        let s: Vec<(f64, f64)> = (1..=20).map(|k| (k as f64, if k == 15 { 0.0 } else { 1.0 })).collect();
        assert!(rate_fit(&s, RateModel::Power).is_err());
        assert!(rate_fit(&s[..5], RateModel::Power).is_err());
    }

    #[test]
    fn rof_gap_at_constant_image() {
        let b = vec![0.3; 9];
        let params = ParamMap::new()
            .scalar("n1", 3.0)
            .scalar("n2", 3.0)
            .scalar("alpha", 0.1)
            .vector("b", b.clone());
        let p = crate::saddle::make_problem("rof", &params).unwrap();
        let u = PrimalDual::new(BlockVector::single(b.clone()).unwrap(), BlockVector::zeros(&[18]));
        assert_eq!(duality_gap_rof(&p, &u, &b, 0.1).unwrap(), 0.0);
        let q = scalar_saddle();
        assert!(matches!(
            duality_gap_rof(&q, &pd(0.0, 0.0), &[0.0], 0.1),
            Err(Error::Incompatible(_))
        ));
    }
}
