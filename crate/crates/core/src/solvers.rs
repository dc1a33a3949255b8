//! Iteration drivers for the primal-dual proximal splitting family.
//!
//! All drivers share one loop: take a step, optionally project onto a dual
//! ball, update the ergodic average and every `monitor_every` steps append
//! an [`IterationRecord`]. The loop stops when the optimality residual drops
//! to `tol`, after `max_iter` steps, or on a non-finite iterate.

use std::time::Instant;

use crate::blockvec::{BlockVector, PrimalDual};
use crate::bregman::SaddleComposite;
use crate::diagnostics::{fejer_terms, lagrangian_gap, IterationRecord};
use crate::error::{Error, Result};
use crate::prox::ProxFunction;
use crate::saddle::{fixed_point_map, split_layout, ReferencePoint, SaddleProblem};
use crate::steprules::{certify_dynamic, Certificate, Rule, Scope, StepLengths};

/// Bound ‖y_ℓ‖₂ ≤ radius on one dual block (all of y when `block` is None).
#[derive(Debug, Clone, PartialEq)]
pub struct DualBall {
    pub radius: f64,
    pub block: Option<usize>,
    /// Project onto the ball after each dual step instead of only
    /// recording violations.
    pub project: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Stop once the optimality residual is at most `tol`.
    pub tol: f64,
    pub monitor_every: usize,
    pub reference: Option<ReferencePoint>,
    pub seed: u64,
    /// Track the ergodic average and report its Lagrangian gap.
    pub ergodic: bool,
    pub dual_ball: Option<DualBall>,
    /// Keep every iterate u⁰, u¹, ... in the trace.
    pub keep_iterates: bool,
    /// Record wall-clock time per record.
    pub timing: bool,
    /// Run even when the solver's own certificate rejects the steps.
    pub uncertified: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            tol: 0.0,
            monitor_every: 1,
            reference: None,
            seed: 0,
            ergodic: false,
            dual_ball: None,
            keep_iterates: false,
            timing: false,
            uncertified: false,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || self.monitor_every == 0 || !(self.tol >= 0.0) {
            return Err(Error::InvalidParameter(
                "max_iter and monitor_every must be at least 1 and tol nonnegative".into(),
            ));
        }
        if let Some(b) = &self.dual_ball {
            if !(b.radius > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "dual ball radius must be positive, got {}",
                    b.radius
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Tol,
    MaxIter,
    Numeric,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Tol => "tol",
            StopReason::MaxIter => "max_iter",
            StopReason::Numeric => "numeric",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub final_u: PrimalDual,
    pub final_ergodic: Option<PrimalDual>,
    pub stop_reason: StopReason,
    /// Number of completed iterations.
    pub iterations: usize,
    /// u⁰, u¹, ... when requested.
    pub iterates: Option<Vec<PrimalDual>>,
    /// Iterations whose dual block left the dual ball.
    pub dual_ball_violations: usize,
    /// The solver's own certificate, for solvers that check one.
    pub certificate: Option<Certificate>,
    /// Description of a numeric failure.
    pub failure: Option<String>,
}

/// ũ^N = (1/N) Σ_{k=1}^N u^k from stored iterates.
pub fn ergodic_average(trace: &IterationTrace, upto: usize) -> Result<PrimalDual> {
    if upto == 0 {
        return Err(Error::InvalidParameter("ergodic average needs N ≥ 1".into()));
    }
    let its = trace
        .iterates
        .as_deref()
        .ok_or_else(|| Error::InvalidParameter("trace does not store iterates".into()))?;
    if upto >= its.len() {
        return Err(Error::InvalidParameter(format!(
            "N = {upto} exceeds the {} recorded iterations",
            its.len().saturating_sub(1)
        )));
    }
    let mut avg = flat(&its[1]);
    for (k, u) in its.iter().enumerate().take(upto + 1).skip(2) {
        running_mean(&mut avg, &flat(u), k);
    }
    Ok(unflat(&its[0], &avg))
}

fn flat(u: &PrimalDual) -> Vec<f64> {
    u.x.as_slice().iter().chain(u.y.as_slice()).copied().collect()
}

fn unflat(like: &PrimalDual, v: &[f64]) -> PrimalDual {
    let nx = like.x.len();
    PrimalDual::new(
        BlockVector::from_flat(like.x.layout(), v[..nx].to_vec()).expect("finite mean"),
        BlockVector::from_flat(like.y.layout(), v[nx..].to_vec()).expect("finite mean"),
    )
}

/// avg ← avg + (u − avg)/k.
fn running_mean(avg: &mut [f64], u: &[f64], k: usize) {
    let inv = 1.0 / k as f64;
    for (a, v) in avg.iter_mut().zip(u) {
        *a += (v - *a) * inv;
    }
}

fn finite(layout: &[usize], data: Vec<f64>, what: &str) -> Result<BlockVector> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what.to_string()));
    }
    BlockVector::from_flat(layout, data)
}

fn prox_blocks(
    funcs: &[ProxFunction],
    layout: &[usize],
    arg: &[f64],
    step: impl Fn(usize) -> f64,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(arg.len());
    for (i, (f, blk)) in funcs.iter().zip(split_layout(layout, arg)).enumerate() {
        out.extend(f.prox(step(i), blk)?);
    }
    Ok(out)
}

struct Monitor<'a> {
    p: &'a SaddleProblem,
    steps: &'a StepLengths,
    opts: &'a SolverOptions,
    composite: SaddleComposite<'a>,
    gamma_f: f64,
    gamma_g: f64,
    start: Instant,
}

impl<'a> Monitor<'a> {
    fn new(p: &'a SaddleProblem, steps: &'a StepLengths, opts: &'a SolverOptions) -> Result<Self> {
        Ok(Self {
            p,
            steps,
            opts,
            composite: SaddleComposite::new(p, steps)?,
            gamma_f: p.constants.get_or("gamma_F", 0.0),
            gamma_g: p.constants.get_or("gamma_G", 0.0),
            start: Instant::now(),
        })
    }

    fn record(
        &self,
        k: usize,
        prev: Option<&PrimalDual>,
        u: &PrimalDual,
        ergodic: Option<&PrimalDual>,
    ) -> Result<IterationRecord> {
        let t = fixed_point_map(self.p, self.steps, u)?;
        let mut rec = IterationRecord::new(k, u.distance(&t)?);
        if let Some(r) = &self.opts.reference {
            let ubar = &r.u;
            let b0 = self.composite.between(ubar, u)?;
            rec.b0_to_ref = Some(b0).filter(|v| v.is_finite());
            let gap_point = ergodic.unwrap_or(u);
            rec.lagrangian_gap = Some(lagrangian_gap(self.p, gap_point, ubar)?).filter(|v| v.is_finite());
            let growth = self.gamma_f * u.x.sub(&ubar.x)?.norm2_sq()
                + self.gamma_g * u.y.sub(&ubar.y)?.norm2_sq();
            rec.growth_gap = Some(growth).filter(|v| v.is_finite());
            if let Some(prev) = prev {
                let (margin, _) = fejer_terms(&self.composite, ubar, prev, u, growth)?;
                rec.fejer_margin = Some(margin).filter(|v| v.is_finite());
            }
        }
        if self.opts.timing {
            rec.wall_time = Some(self.start.elapsed().as_secs_f64());
        }
        Ok(rec)
    }
}

fn check_dual_ball(p: &SaddleProblem, ball: &DualBall) -> Result<()> {
    let blocks: Vec<usize> = match ball.block {
        Some(b) if b >= p.dual_blocks() => {
            return Err(Error::InvalidParameter(format!("no dual block {b}")))
        }
        Some(b) => vec![b],
        None => (0..p.dual_blocks()).collect(),
    };
    if ball.project {
        for b in blocks {
            if !p.gstar_blocks[b].isotropic_prox() {
                return Err(Error::Incompatible(format!(
                    "dual-ball projection needs an isotropic prox, block {b} is {}",
                    p.gstar_blocks[b].name()
                )));
            }
        }
    }
    Ok(())
}

/// Applies the dual ball to `y`; returns whether the ball was violated.
fn apply_dual_ball(p: &SaddleProblem, ball: &DualBall, y: &mut BlockVector) -> Result<bool> {
    let (start, len) = match ball.block {
        Some(b) => (p.y_layout[..b].iter().sum::<usize>(), p.y_layout[b]),
        None => (0, y.len()),
    };
    let seg = &y.as_slice()[start..start + len];
    let norm = seg.iter().fold(0.0, |a, v| a + v * v).sqrt();
    if norm <= ball.radius {
        return Ok(false);
    }
    if ball.project {
        let s = ball.radius / norm;
        let mut data = y.as_slice().to_vec();
        data[start..start + len].iter_mut().for_each(|v| *v *= s);
        *y = BlockVector::from_flat(y.layout(), data)?;
    }
    Ok(true)
}

/// Shared loop; `step(k, u^k)` returns u^{k+1}.
fn drive(
    p: &SaddleProblem,
    steps: &StepLengths,
    u0: &PrimalDual,
    opts: &SolverOptions,
    certificate: Option<Certificate>,
    mut step: impl FnMut(usize, &PrimalDual) -> Result<PrimalDual>,
) -> Result<IterationTrace> {
    opts.validate()?;
    p.check_point(u0)?;
    if let Some(ball) = &opts.dual_ball {
        check_dual_ball(p, ball)?;
    }
    let monitor = Monitor::new(p, steps, opts)?;
    let mut trace = IterationTrace {
        records: Vec::new(),
        final_u: u0.clone(),
        final_ergodic: None,
        stop_reason: StopReason::MaxIter,
        iterations: 0,
        iterates: opts.keep_iterates.then(|| vec![u0.clone()]),
        dual_ball_violations: 0,
        certificate,
        failure: None,
    };
    let mut ergodic: Option<Vec<f64>> = None;
    match monitor.record(0, None, u0, None) {
        Ok(rec) => {
            let done = rec.residual <= opts.tol;
            trace.records.push(rec);
            if done {
                trace.stop_reason = StopReason::Tol;
                return Ok(trace);
            }
        }
        Err(Error::NonFinite(what)) => {
            trace.stop_reason = StopReason::Numeric;
            trace.failure = Some(what);
            return Ok(trace);
        }
        Err(e) => return Err(e),
    }
    let mut u = u0.clone();
    for k in 0..opts.max_iter {
        let mut next = match step(k, &u) {
            Ok(v) => v,
            Err(Error::NonFinite(what)) => {
                trace.stop_reason = StopReason::Numeric;
                trace.failure = Some(format!("{what} at iteration {}", k + 1));
                break;
            }
            Err(e) => return Err(e),
        };
        if let Some(ball) = &opts.dual_ball {
            if apply_dual_ball(p, ball, &mut next.y)? {
                trace.dual_ball_violations += 1;
                if let Some(c) = trace.certificate.as_mut() {
                    c.invalidated = true;
                }
            }
        }
        let kk = k + 1;
        if opts.ergodic {
            let fu = flat(&next);
            match ergodic.as_mut() {
                None => ergodic = Some(fu),
                Some(avg) => running_mean(avg, &fu, kk),
            }
        }
        if let Some(its) = trace.iterates.as_mut() {
            its.push(next.clone());
        }
        trace.iterations = kk;
        if kk % opts.monitor_every == 0 || kk == opts.max_iter {
            let erg = ergodic.as_ref().map(|v| unflat(&next, v));
            match monitor.record(kk, Some(&u), &next, erg.as_ref()) {
                Ok(rec) => {
                    let done = rec.residual <= opts.tol;
                    trace.records.push(rec);
                    if done {
                        trace.stop_reason = StopReason::Tol;
                        u = next;
                        break;
                    }
                }
                Err(Error::NonFinite(what)) => {
                    trace.stop_reason = StopReason::Numeric;
                    trace.failure = Some(format!("{what} at iteration {kk}"));
                    u = next;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        u = next;
    }
    trace.final_ergodic = ergodic.as_ref().map(|v| unflat(&u, v));
    trace.final_u = u;
    Ok(trace)
}

fn require_affine(p: &SaddleProblem, solver: &str) -> Result<()> {
    if !p.affine_in_y {
        return Err(Error::Incompatible(format!(
            "{solver} needs K affine in y; `{}` is not, use solve_modified_pdps",
            p.kind.as_str()
        )));
    }
    Ok(())
}

/// Primal-dual proximal splitting with the linearised dual step
/// y⁺ = prox_{σG_*}(y + σ[2D_yK(x⁺, y) − D_yK(x, y)]).
pub fn solve_pdps(p: &SaddleProblem, steps: &StepLengths, u0: &PrimalDual, opts: &SolverOptions) -> Result<IterationTrace> {
    require_affine(p, "solve_pdps")?;
    if !steps.is_single_block() {
        return Err(Error::InvalidParameter(
            "solve_pdps takes one τ and one σ; use solve_block_pdps".into(),
        ));
    }
    let (tau, sigma) = (steps.tau[0], steps.sigma[0]);
    drive(p, steps, u0, opts, None, |_, u| {
        let (x, y) = (u.x.as_slice(), u.y.as_slice());
        let dx = p.coupling.grad_x(x, y);
        let arg: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a - tau * d).collect();
        let xn = prox_blocks(&p.f_blocks, &p.x_layout, &arg, |_| tau)?;
        let d0 = p.coupling.grad_y(x, y);
        let d1 = p.coupling.grad_y(&xn, y);
        let arg: Vec<f64> = y
            .iter()
            .zip(d1.iter().zip(&d0))
            .map(|(a, (n, o))| a + sigma * (2.0 * n - o))
            .collect();
        let yn = prox_blocks(&p.gstar_blocks, &p.y_layout, &arg, |_| sigma)?;
        Ok(PrimalDual::new(
            finite(&p.x_layout, xn, "primal iterate")?,
            finite(&p.y_layout, yn, "dual iterate")?,
        ))
    })
}

/// Block-adapted variant with τ_j per primal block and σ_ℓ per dual
/// block; all primal blocks update before any dual block.
pub fn solve_block_pdps(
    p: &SaddleProblem,
    steps: &StepLengths,
    u0: &PrimalDual,
    opts: &SolverOptions,
) -> Result<IterationTrace> {
    require_affine(p, "solve_block_pdps")?;
    let (m, n) = (p.primal_blocks(), p.dual_blocks());
    let fits = |len: usize, blocks: usize| len == 1 || len == blocks;
    if !fits(steps.tau.len(), m) || !fits(steps.sigma.len(), n) {
        return Err(Error::LayoutMismatch {
            expected: vec![m, n],
            found: vec![steps.tau.len(), steps.sigma.len()],
        });
    }
    drive(p, steps, u0, opts, None, |_, u| {
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
        let d0 = p.coupling.grad_y(x, y);
        let d1 = p.coupling.grad_y(&xn, y);
        let mut yn = Vec::with_capacity(y.len());
        for (l, ((g, yb), (nb, ob))) in p
            .gstar_blocks
            .iter()
            .zip(split_layout(&p.y_layout, y))
            .zip(split_layout(&p.y_layout, &d1).zip(split_layout(&p.y_layout, &d0)))
            .enumerate()
        {
            let sigma = steps.sigma_for(l);
            let arg: Vec<f64> = yb
                .iter()
                .zip(nb.iter().zip(ob))
                .map(|(a, (n, o))| a + sigma * (2.0 * n - o))
                .collect();
            yn.extend(g.prox(sigma, &arg)?);
        }
        Ok(PrimalDual::new(
            finite(&p.x_layout, xn, "primal iterate")?,
            finite(&p.y_layout, yn, "dual iterate")?,
        ))
    })
}

fn scoped(p: &SaddleProblem, cert: Certificate) -> Certificate {
    if p.local_constants {
        cert.with_scope(Scope::Local)
    } else {
        cert
    }
}

/// Inertial variant for bilinear K. The λ schedule must pass the
/// `inertia_lambda` certificate unless `opts.uncertified` is set.
pub fn solve_inertial_pdps(
    p: &SaddleProblem,
    steps: &StepLengths,
    u0: &PrimalDual,
    opts: &SolverOptions,
) -> Result<IterationTrace> {
    if !p.bilinear {
        return Err(Error::Incompatible(format!(
            "solve_inertial_pdps needs a bilinear coupling; `{}` is not",
            p.kind.as_str()
        )));
    }
    let cert = scoped(p, certify_dynamic(Rule::InertiaLambda, steps, &p.constants)?);
    if !cert.verdict.accepted() && !opts.uncertified {
        return Err(cert.rejection());
    }
    let mut tilde = u0.clone();
    drive(p, steps, u0, opts, Some(cert), move |k, u| {
        let (xt, yt) = (tilde.x.as_slice(), tilde.y.as_slice());
        let dx = p.coupling.grad_x(xt, yt);
        let mut arg = Vec::with_capacity(xt.len());
        for (j, (xb, db)) in split_layout(&p.x_layout, xt).zip(split_layout(&p.x_layout, &dx)).enumerate() {
            let tau = steps.tau_for(j);
            arg.extend(xb.iter().zip(db).map(|(a, d)| a - tau * d));
        }
        let xn = prox_blocks(&p.f_blocks, &p.x_layout, &arg, |j| steps.tau_for(j))?;
        let d0 = p.coupling.grad_y(xt, yt);
        let d1 = p.coupling.grad_y(&xn, yt);
        let mut arg = Vec::with_capacity(yt.len());
        for (l, (yb, (nb, ob))) in split_layout(&p.y_layout, yt)
            .zip(split_layout(&p.y_layout, &d1).zip(split_layout(&p.y_layout, &d0)))
            .enumerate()
        {
            let sigma = steps.sigma_for(l);
            arg.extend(yb.iter().zip(nb.iter().zip(ob)).map(|(a, (n, o))| a + sigma * (2.0 * n - o)));
        }
        let yn = prox_blocks(&p.gstar_blocks, &p.y_layout, &arg, |l| steps.sigma_for(l))?;
        let next = PrimalDual::new(
            finite(&p.x_layout, xn, "primal iterate")?,
            finite(&p.y_layout, yn, "dual iterate")?,
        );
        let lam = steps.lambda_at(k + 1);
        let extrapolate = |new: &BlockVector, old: &BlockVector| {
            let data = new
                .as_slice()
                .iter()
                .zip(old.as_slice())
                .map(|(a, b)| (1.0 + lam) * a - lam * b)
                .collect();
            finite(new.layout(), data, "inertial extrapolation")
        };
        tilde = PrimalDual::new(extrapolate(&next.x, &u.x)?, extrapolate(&next.y, &u.y)?);
        Ok(next)
    })
}

/// Modified variant for K not affine in y, with y^{-1} = y⁰:
/// y⁺ = prox_{σG_*}(y + σ[2D_yK(x⁺, y) + D_yK(x, y) − 2D_yK(x, y⁻)]).
pub fn solve_modified_pdps(
    p: &SaddleProblem,
    steps: &StepLengths,
    u0: &PrimalDual,
    opts: &SolverOptions,
) -> Result<IterationTrace> {
    if !steps.is_single_block() {
        return Err(Error::InvalidParameter("solve_modified_pdps takes one τ and one σ".into()));
    }
    let cert = match certify_dynamic(Rule::ModifiedK, steps, &p.constants) {
        Ok(c) => Some(scoped(p, c)),
        Err(Error::MissingParameter(_)) if opts.uncertified => None,
        Err(e) => return Err(e),
    };
    if let Some(c) = &cert {
        if !c.verdict.accepted() && !opts.uncertified {
            return Err(c.rejection());
        }
    }
    let (tau, sigma) = (steps.tau[0], steps.sigma[0]);
    let mut y_prev = u0.y.clone();
    drive(p, steps, u0, opts, cert, move |_, u| {
        let (x, y) = (u.x.as_slice(), u.y.as_slice());
        let dx = p.coupling.grad_x(x, y);
        let arg: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a - tau * d).collect();
        let xn = prox_blocks(&p.f_blocks, &p.x_layout, &arg, |_| tau)?;
        let d0 = p.coupling.grad_y(x, y);
        let d1 = p.coupling.grad_y(&xn, y);
        let dp = p.coupling.grad_y(x, y_prev.as_slice());
        // (2 d1 − d0) + 2 (d0 − dp): equal to the PDPS argument bit for bit
        // whenever D_yK(x, ·) does not depend on y.
        let arg: Vec<f64> = (0..y.len())
            .map(|i| y[i] + sigma * ((2.0 * d1[i] - d0[i]) + 2.0 * (d0[i] - dp[i])))
            .collect();
        let yn = prox_blocks(&p.gstar_blocks, &p.y_layout, &arg, |_| sigma)?;
        let next = PrimalDual::new(
            finite(&p.x_layout, xn, "primal iterate")?,
            finite(&p.y_layout, yn, "dual iterate")?,
        );
        y_prev = u.y.clone();
        Ok(next)
    })
}
