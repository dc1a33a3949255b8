//! Configuration-driven runner behind the `pdsplit` binary.

pub mod config;
pub mod csv;
pub mod pgm;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub use config::{Init, RunConfig, SolverKind, StepSpec};
pub use csv::emit_csv;
pub use pgm::{read_pgm, write_pgm, Image, PgmFormat};

use crate::blockvec::{BlockVector, PrimalDual};
use crate::error::{Error, Result};
use crate::saddle::{make_problem, optimality_residual, ProblemKind, Provenance, ReferencePoint, SaddleProblem};
use crate::solvers::{
    solve_block_pdps, solve_inertial_pdps, solve_modified_pdps, solve_pdps, IterationTrace, SolverOptions, StopReason,
};
use crate::steprules::{certify, Certificate, Rule, Scope, StepLengths};

/// Outcome of a completed run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub certificate: Certificate,
    pub trace: IterationTrace,
    pub steps: StepLengths,
    pub summary: String,
}

impl RunReport {
    /// Process exit status: 0 for `tol`/`max_iter`, 1 on numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self.trace.stop_reason {
            StopReason::Tol | StopReason::MaxIter => 0,
            StopReason::Numeric => 1,
        }
    }
}

fn data_key(problem: &str) -> &'static str {
    if problem == "two_block" {
        "z"
    } else {
        "b"
    }
}

/// Builds the problem, loading the input image (with optional noise) into
/// its data vector. Returns the data vector used.
pub fn build_problem(cfg: &RunConfig) -> Result<(SaddleProblem, Option<Vec<f64>>)> {
    let mut params = cfg.params.clone();
    let key = data_key(&cfg.problem);
    if let Some(path) = &cfg.io.input {
        let img = read_pgm(path)?;
        for (dim, have) in [("n1", img.rows), ("n2", img.cols)] {
            match params.try_get(dim) {
                Some(v) if v != have as f64 => {
                    return Err(Error::InvalidParameter(format!(
                        "problem.{dim} = {v} but {} has {have}",
                        path.display()
                    )))
                }
                _ => params.set_scalar(dim, have as f64),
            }
        }
        if params.try_vector(key).is_some() {
            return Err(Error::InvalidParameter(format!(
                "problem.{key} and io.input both supply the data image"
            )));
        }
        params.set_vector(key, img.data);
    }
    if let Some(noise) = cfg.noise {
        let clean = params.get_vector(key)?.to_vec();
        let normal = Normal::new(0.0, noise.std).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let noisy = clean
            .iter()
            .map(|v| (v + normal.sample(&mut rng)).clamp(0.0, 1.0))
            .collect();
        params.set_vector(key, noisy);
    }
    let data = params.try_vector(key).map(<[f64]>::to_vec);
    Ok((make_problem(&cfg.problem, &params)?, data))
}

/// Certificate rule used when the config does not name one.
pub fn default_rule(p: &SaddleProblem, solver: SolverKind) -> Rule {
    match (solver, p.kind) {
        (SolverKind::ModifiedPdps, _) => Rule::ModifiedK,
        (SolverKind::BlockPdps, ProblemKind::TwoBlock) => Rule::TwoBlock,
        (_, ProblemKind::TwoBlock) => Rule::Combined,
        (_, ProblemKind::ForwardBackward) => Rule::LipschitzK,
        _ if p.bilinear => Rule::Bilinear,
        _ => Rule::LipschitzK,
    }
}

/// Step lengths that pass `rule` with a margin of about 0.01.
pub fn auto_steps(p: &SaddleProblem, rule: Rule) -> Result<StepLengths> {
    let c = &p.constants;
    match rule {
        Rule::Bilinear => {
            let a = c.get("norm_A")?;
            StepLengths::scalar(0.99 / a, 0.99 / a)
        }
        Rule::LipschitzK => {
            let l = c.get("L_DK")?;
            StepLengths::scalar(0.99 / l, 0.99 / l)
        }
        Rule::Combined | Rule::TwoBlock => {
            let (la1, a2, lda1, rho) = (c.get("L_A1")?, c.get("norm_A2")?, c.get("L_DA1")?, c.get("rho_y1")?);
            let tau = 0.5 / (lda1 * rho).max(f64::MIN_POSITIVE);
            let sigma = 0.49 / (tau * (la1 * la1 + a2 * a2));
            if rule == Rule::TwoBlock {
                StepLengths::new(vec![tau], vec![sigma, sigma])
            } else {
                StepLengths::scalar(tau, sigma)
            }
        }
        Rule::ModifiedK => {
            let l = c.get("L_DK")?;
            let ly = c.get("L_DKy")?;
            let sigma = if ly > 0.0 {
                (1.0 / (8.0 * ly.sqrt())).min(0.99 / (2.0 * l))
            } else {
                0.99 / l
            };
            // Equal steps: τ = σ keeps the local iteration non-oscillatory.
            StepLengths::scalar(sigma, sigma)
        }
        other => Err(Error::InvalidParameter(format!("no automatic steps for rule `{other}`"))),
    }
}

fn run_solver(
    solver: SolverKind,
    p: &SaddleProblem,
    steps: &StepLengths,
    u0: &PrimalDual,
    opts: &SolverOptions,
) -> Result<IterationTrace> {
    match solver {
        SolverKind::Pdps => solve_pdps(p, steps, u0, opts),
        SolverKind::BlockPdps => solve_block_pdps(p, steps, u0, opts),
        SolverKind::InertialPdps => solve_inertial_pdps(p, steps, u0, opts),
        SolverKind::ModifiedPdps => solve_modified_pdps(p, steps, u0, opts),
    }
}

fn initial_point(p: &SaddleProblem, cfg: &RunConfig, data: Option<&[f64]>) -> Result<PrimalDual> {
    let zero = p.zero_point();
    match (cfg.init, data) {
        (Init::Data, Some(d)) if d.len() == zero.x.len() => {
            Ok(PrimalDual::new(BlockVector::from_flat(&p.x_layout, d.to_vec())?, zero.y))
        }
        _ => Ok(zero),
    }
}

/// Parses, certifies, solves and writes every configured output.
pub fn run_config(path: &Path) -> Result<RunReport> {
    let cfg = RunConfig::from_file(path)?;
    run(&cfg)
}

pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    let (p, data) = build_problem(cfg)?;
    let rule = cfg.rule.unwrap_or_else(|| default_rule(&p, cfg.solver));
    let mut steps = match &cfg.steps {
        StepSpec::Auto => auto_steps(&p, rule)?,
        StepSpec::Explicit { tau, sigma } => StepLengths::new(tau.clone(), sigma.clone())?,
    };
    if let Some(lambda) = &cfg.lambda {
        steps = steps.with_lambda(lambda.clone())?;
    } else if cfg.solver == SolverKind::InertialPdps {
        return Err(Error::MissingParameter("steps.lambda".into()));
    }
    let mut certificate = certify(rule, &steps, &p.constants)?;
    if p.local_constants {
        certificate = certificate.with_scope(Scope::Local);
    }
    if !certificate.verdict.accepted() {
        if cfg.steps == StepSpec::Auto {
            return Err(Error::InvalidParameter(format!(
                "automatic steps failed certificate `{rule}` (margin {:?})",
                certificate.margin
            )));
        }
        if !cfg.options.uncertified {
            return Err(certificate.rejection());
        }
    }

    let u0 = initial_point(&p, cfg, data.as_deref())?;
    let mut opts = cfg.options.clone();
    if cfg.reference_iters > 0 {
        let pre = SolverOptions {
            max_iter: cfg.reference_iters,
            monitor_every: cfg.reference_iters,
            tol: 0.0,
            reference: None,
            ergodic: false,
            keep_iterates: false,
            timing: false,
            ..opts.clone()
        };
        let long = run_solver(cfg.solver, &p, &steps, &u0, &pre)?;
        let res = optimality_residual(&p, &steps, &long.final_u)?;
        opts.reference = Some(ReferencePoint::new(long.final_u, Provenance::LongRun, res));
    }
    let mut trace = run_solver(cfg.solver, &p, &steps, &u0, &opts)?;
    if let Some(own) = trace.certificate.as_ref() {
        certificate.invalidated |= own.invalidated;
    }
    let own = trace.certificate.take();

    if let Some(out) = &cfg.io.output {
        let (rows, cols) = p.image_shape.unwrap_or((1, trace.final_u.x.len()));
        let img = Image::new(rows, cols, trace.final_u.x.as_slice().to_vec())?;
        write_pgm(out, &img, cfg.io.format, cfg.io.maxval)?;
    }
    if let Some(out) = &cfg.io.trace {
        emit_csv(&trace, out)?;
    }
    let summary = summarize(cfg, &p, &steps, &certificate, own.as_ref(), &trace);
    if let Some(out) = &cfg.io.summary {
        fs::write(out, &summary)?;
    }
    trace.certificate = own;
    Ok(RunReport {
        certificate,
        trace,
        steps,
        summary,
    })
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

fn summarize(
    cfg: &RunConfig,
    p: &SaddleProblem,
    steps: &StepLengths,
    cert: &Certificate,
    solver_cert: Option<&Certificate>,
    trace: &IterationTrace,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "problem: {}", p.kind.as_str());
    let _ = writeln!(s, "solver: {}", cfg.solver.as_str());
    let _ = writeln!(s, "tau: {}", list(&steps.tau));
    let _ = writeln!(s, "sigma: {}", list(&steps.sigma));
    if let Some(l) = &steps.lambda {
        let _ = writeln!(s, "lambda: {}", list(l));
    }
    let _ = writeln!(s, "stop_reason: {}", trace.stop_reason.as_str());
    let _ = writeln!(s, "iterations: {}", trace.iterations);
    if let Some(last) = trace.records.last() {
        let _ = writeln!(s, "final_residual: {:?}", last.residual);
    }
    if let Some(f) = &trace.failure {
        let _ = writeln!(s, "failure: {f}");
    }
    if cfg.options.dual_ball.is_some() {
        let _ = writeln!(s, "dual_ball_violations: {}", trace.dual_ball_violations);
    }
    let _ = writeln!(s, "{cert}");
    if let Some(c) = solver_cert.filter(|c| c.rule != cert.rule) {
        let _ = writeln!(s, "{c}");
    }
    s
}
