//! Step lengths and executable step-length certificates.
//!
//! Each rule turns the step lengths and a handful of problem constants into
//! an aggregate that must not exceed one. The margin is `1 − aggregate`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linop::LinearOperator;
use crate::params::ParamMap;

/// Margins within this many ulps of zero are treated as equality.
const ZERO_ULPS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct StepLengths {
    pub tau: Vec<f64>,
    pub sigma: Vec<f64>,
    /// λ_1, λ_2, ...; the last entry repeats indefinitely.
    pub lambda: Option<Vec<f64>>,
}

fn check_steps(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidParameter(format!("no {name} step lengths")));
    }
    if let Some(bad) = v.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{name} step lengths must be positive, got {bad}"
        )));
    }
    Ok(())
}

impl StepLengths {
    pub fn new(tau: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        check_steps("primal", &tau)?;
        check_steps("dual", &sigma)?;
        Ok(Self {
            tau,
            sigma,
            lambda: None,
        })
    }

    pub fn scalar(tau: f64, sigma: f64) -> Result<Self> {
        Self::new(vec![tau], vec![sigma])
    }

    /// Attaches an inertia schedule, which must be finite and non-increasing.
    pub fn with_lambda(mut self, schedule: Vec<f64>) -> Result<Self> {
        if schedule.is_empty() || schedule.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidParameter("inertia schedule must be finite and nonempty".into()));
        }
        if schedule.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidParameter("inertia schedule must be non-increasing".into()));
        }
        self.lambda = Some(schedule);
        Ok(self)
    }

    /// τ_j; a single value applies to every block.
    pub fn tau_for(&self, j: usize) -> f64 {
        if self.tau.len() == 1 {
            self.tau[0]
        } else {
            self.tau[j]
        }
    }

    pub fn sigma_for(&self, l: usize) -> f64 {
        if self.sigma.len() == 1 {
            self.sigma[0]
        } else {
            self.sigma[l]
        }
    }

    /// λ_k for k ≥ 1, with λ_0 := λ_1; zero without a schedule.
    pub fn lambda_at(&self, k: usize) -> f64 {
        match &self.lambda {
            None => 0.0,
            Some(s) => s[k.saturating_sub(1).min(s.len() - 1)],
        }
    }

    pub fn is_single_block(&self) -> bool {
        self.tau.len() == 1 && self.sigma.len() == 1
    }

    /// Every step (and λ) multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut s = Self::new(
            self.tau.iter().map(|t| t * factor).collect(),
            self.sigma.iter().map(|t| t * factor).collect(),
        )?;
        if let Some(l) = &self.lambda {
            s = s.with_lambda(l.iter().map(|v| v * factor).collect())?;
        }
        Ok(s)
    }

    fn record(&self, inputs: &mut ParamMap) {
        inputs.set_vector("tau", self.tau.clone());
        inputs.set_vector("sigma", self.sigma.clone());
        if let Some(l) = &self.lambda {
            inputs.set_vector("lambda", l.clone());
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Semi,
    Fail,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Semi => "semi",
            Verdict::Fail => "fail",
        }
    }

    pub fn accepted(self) -> bool {
        self != Verdict::Fail
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Global,
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    LipschitzK,
    Bilinear,
    AffineY,
    Combined,
    BlockLipschitz,
    BlockBilinear,
    TwoBlock,
    InertiaLambda,
    ModifiedK,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::LipschitzK => "lipschitz_k",
            Rule::Bilinear => "bilinear",
            Rule::AffineY => "affine_y",
            Rule::Combined => "combined",
            Rule::BlockLipschitz => "block_lipschitz",
            Rule::BlockBilinear => "block_bilinear",
            Rule::TwoBlock => "two_block",
            Rule::InertiaLambda => "inertia_lambda",
            Rule::ModifiedK => "modified_k",
        }
    }

    /// Whether the rule requires a strict inequality.
    pub fn strict(self) -> bool {
        !matches!(
            self,
            Rule::LipschitzK | Rule::BlockLipschitz | Rule::BlockBilinear
        )
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = [
            Rule::LipschitzK,
            Rule::Bilinear,
            Rule::AffineY,
            Rule::Combined,
            Rule::BlockLipschitz,
            Rule::BlockBilinear,
            Rule::TwoBlock,
            Rule::InertiaLambda,
            Rule::ModifiedK,
        ];
        all.into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown step rule `{s}`")))
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub rule: Rule,
    pub inputs: ParamMap,
    pub aggregate: f64,
    pub margin: f64,
    pub strict: bool,
    pub verdict: Verdict,
    pub scope: Scope,
    /// Auxiliary factors chosen by the rule, e.g. `w[0][1]`.
    pub factors: Vec<(String, f64)>,
    /// Set when a run left the region the certificate assumes.
    pub invalidated: bool,
}

fn verdict_for(margin: f64, aggregate: f64, strict: bool) -> Verdict {
    let tol = ZERO_ULPS * f64::EPSILON * aggregate.abs().max(1.0);
    if margin.is_nan() {
        Verdict::Fail
    } else if margin.abs() <= tol {
        if strict {
            Verdict::Fail
        } else {
            Verdict::Semi
        }
    } else if margin > 0.0 {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

impl Certificate {
    fn build(rule: Rule, inputs: ParamMap, aggregate: f64, margin: f64) -> Self {
        let strict = rule.strict();
        Self {
            rule,
            inputs,
            aggregate,
            margin,
            strict,
            verdict: verdict_for(margin, aggregate, strict),
            scope: Scope::Global,
            factors: Vec::new(),
            invalidated: false,
        }
    }

    pub fn with_scope(mut self, scope: Scope) -> Self {
        self.scope = scope;
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict.accepted() && !self.invalidated
    }

    /// Error naming the rule and margin, for rejected certificates.
    pub fn rejection(&self) -> Error {
        Error::CertificateRejected {
            rule: self.rule.as_str().to_string(),
            margin: self.margin,
        }
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "certificate: {}", self.rule)?;
        let scope = match self.scope {
            Scope::Global => "global",
            Scope::Local => "local",
        };
        writeln!(f, "  scope: {scope}")?;
        for (k, v) in self.inputs.scalars() {
            writeln!(f, "  input {k} = {v:?}")?;
        }
        for key in ["tau", "sigma", "lambda"] {
            if let Some(v) = self.inputs.try_vector(key) {
                let list: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
                writeln!(f, "  input {key} = {}", list.join(", "))?;
            }
        }
        for (k, v) in self.inputs.matrices() {
            let rows: Vec<String> = v
                .iter()
                .map(|r| r.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" "))
                .collect();
            writeln!(f, "  input {k} = [{}]", rows.join("; "))?;
        }
        for (k, v) in &self.factors {
            writeln!(f, "  factor {k} = {v:?}")?;
        }
        writeln!(f, "  aggregate: {:?}", self.aggregate)?;
        writeln!(f, "  margin: {:?}", self.margin)?;
        writeln!(f, "  strict: {}", self.strict)?;
        write!(f, "  verdict: {}", self.verdict.as_str())?;
        if self.invalidated {
            write!(f, " (invalidated: iterate left the certified region)")?;
        }
        Ok(())
    }
}

fn single_block(steps: &StepLengths, rule: Rule) -> Result<(f64, f64)> {
    if !steps.is_single_block() {
        return Err(Error::InvalidParameter(format!(
            "rule `{rule}` needs single-block steps"
        )));
    }
    Ok((steps.tau[0], steps.sigma[0]))
}

fn take(constants: &ParamMap, inputs: &mut ParamMap, key: &str) -> Result<f64> {
    let v = constants.get(key)?;
    inputs.set_scalar(key, v);
    Ok(v)
}

/// Single-block rules: `lipschitz_k`, `bilinear`, `affine_y`, `combined`.
pub fn certify_basic(rule: Rule, steps: &StepLengths, constants: &ParamMap) -> Result<Certificate> {
    let (tau, sigma) = single_block(steps, rule)?;
    let mut inputs = ParamMap::new();
    steps.record(&mut inputs);
    let aggregate = match rule {
        Rule::LipschitzK => tau.max(sigma) * take(constants, &mut inputs, "L_DK")?,
        Rule::Bilinear => {
            let a = take(constants, &mut inputs, "norm_A")?;
            tau * sigma * a * a
        }
        Rule::AffineY => {
            let la = take(constants, &mut inputs, "L_A")?;
            let lda = take(constants, &mut inputs, "L_DA")?;
            let rho = take(constants, &mut inputs, "rho_y")?;
            tau * sigma * la * la + tau * lda * rho
        }
        Rule::Combined => {
            let la1 = take(constants, &mut inputs, "L_A1")?;
            let a2 = take(constants, &mut inputs, "norm_A2")?;
            let lda1 = take(constants, &mut inputs, "L_DA1")?;
            let rho = take(constants, &mut inputs, "rho_y1")?;
            tau * sigma * (la1 * la1 + a2 * a2) + tau * lda1 * rho
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "`{other}` is not a single-block rule"
            )))
        }
    };
    Ok(Certificate::build(rule, inputs, aggregate, 1.0 - aggregate))
}

fn matrix_of(constants: &ParamMap, inputs: &mut ParamMap, key: &str, m: usize, n: usize) -> Result<Vec<Vec<f64>>> {
    let mat = constants.get_matrix(key)?.to_vec();
    if mat.len() != m || mat.iter().any(|r| r.len() != n) {
        return Err(Error::LayoutMismatch {
            expected: vec![m, n],
            found: vec![mat.len(), mat.first().map_or(0, Vec::len)],
        });
    }
    if mat.iter().flatten().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidParameter(format!("`{key}` entries must be nonnegative")));
    }
    *inputs = std::mem::take(inputs).matrix(key, mat.clone());
    Ok(mat)
}

/// Worst aggregate of the block-bilinear conditions for factors `w`.
fn block_bilinear_aggregate(tau: &[f64], sigma: &[f64], a: &[Vec<f64>], w: &[Vec<f64>], eps: f64) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (j, t) in tau.iter().enumerate() {
        let s: f64 = (0..sigma.len()).fold(0.0, |acc, l| acc + w[j][l] * a[j][l]);
        worst = worst.max(t * (eps + s));
    }
    for (l, sg) in sigma.iter().enumerate() {
        let s: f64 = (0..tau.len()).fold(0.0, |acc, j| acc + a[j][l] / w[j][l]);
        worst = worst.max(sg * (eps + s));
    }
    worst
}

/// Chooses w_{jℓ} starting from √(σ_ℓ/τ_j) and refining by pattern search
/// in log-space over single entries, rows and columns.
fn optimize_factors(tau: &[f64], sigma: &[f64], a: &[Vec<f64>], eps: f64) -> (Vec<Vec<f64>>, f64) {
    let (m, n) = (tau.len(), sigma.len());
    let mut w: Vec<Vec<f64>> = (0..m)
        .map(|j| (0..n).map(|l| (sigma[l] / tau[j]).sqrt()).collect())
        .collect();
    let mut best = block_bilinear_aggregate(tau, sigma, a, &w, eps);
    let mut groups: Vec<Vec<(usize, usize)>> = Vec::new();
    for j in 0..m {
        for l in 0..n {
            groups.push(vec![(j, l)]);
        }
        groups.push((0..n).map(|l| (j, l)).collect());
    }
    for l in 0..n {
        groups.push((0..m).map(|j| (j, l)).collect());
    }
    let mut step = 2.0_f64.ln();
    while step > 1e-6 {
        let mut improved = false;
        for g in &groups {
            for dir in [step, -step] {
                let mut trial = w.clone();
                for &(j, l) in g {
                    trial[j][l] *= dir.exp();
                }
                let agg = block_bilinear_aggregate(tau, sigma, a, &trial, eps);
                if agg < best {
                    best = agg;
                    w = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (w, best)
}

/// Block rules: `block_lipschitz`, `block_bilinear`, `two_block`.
pub fn certify_block(rule: Rule, steps: &StepLengths, constants: &ParamMap) -> Result<Certificate> {
    let mut inputs = ParamMap::new();
    steps.record(&mut inputs);
    let eps = constants.get_or("epsilon", 0.0);
    let (m, n) = (steps.tau.len(), steps.sigma.len());
    let mut factors = Vec::new();
    let aggregate = match rule {
        Rule::BlockLipschitz => {
            let lm = matrix_of(constants, &mut inputs, "L", m, n)?;
            let mut worst = f64::NEG_INFINITY;
            for (row, tau) in lm.iter().zip(&steps.tau) {
                worst = worst.max(tau * (row.iter().sum::<f64>() + eps));
            }
            for (l, sigma) in steps.sigma.iter().enumerate() {
                let col: f64 = lm.iter().map(|r| r[l]).sum();
                worst = worst.max(sigma * (col + eps));
            }
            worst
        }
        Rule::BlockBilinear => {
            let am = matrix_of(constants, &mut inputs, "A_norm", m, n)?;
            let (w, agg) = optimize_factors(&steps.tau, &steps.sigma, &am, eps);
            for (j, row) in w.iter().enumerate() {
                for (l, v) in row.iter().enumerate() {
                    factors.push((format!("w[{j}][{l}]"), *v));
                }
            }
            agg
        }
        Rule::TwoBlock => {
            if m != 1 || n != 2 {
                return Err(Error::LayoutMismatch {
                    expected: vec![1, 2],
                    found: vec![m, n],
                });
            }
            let la1 = take(constants, &mut inputs, "L_A1")?;
            let a2 = take(constants, &mut inputs, "norm_A2")?;
            let lda1 = take(constants, &mut inputs, "L_DA1")?;
            let rho = take(constants, &mut inputs, "rho_y1")?;
            let tau = steps.tau[0];
            tau * (steps.sigma[0] * la1 * la1 + steps.sigma[1] * a2 * a2) + tau * lda1 * rho
        }
        other => {
            return Err(Error::InvalidParameter(format!("`{other}` is not a block rule")))
        }
    };
    if eps != 0.0 {
        inputs.set_scalar("epsilon", eps);
    }
    let mut cert = Certificate::build(rule, inputs, aggregate, 1.0 - aggregate);
    cert.factors = factors;
    Ok(cert)
}

/// Dynamic rules: `inertia_lambda` (needs `beta`) and `modified_k` (needs
/// `L_DK`, `L_DKy`).
pub fn certify_dynamic(rule: Rule, steps: &StepLengths, constants: &ParamMap) -> Result<Certificate> {
    let mut inputs = ParamMap::new();
    steps.record(&mut inputs);
    match rule {
        Rule::InertiaLambda => {
            let beta = take(constants, &mut inputs, "beta")?;
            let eps = constants.get_or("epsilon", 0.0);
            let sched = steps.lambda.clone().unwrap_or_else(|| vec![0.0]);
            // Pairs (λ_k, λ_{k+1}) for k ≥ 0 with λ_0 := λ_1 and the last
            // entry repeated.
            let mut pairs = vec![(sched[0], sched[0])];
            pairs.extend(sched.windows(2).map(|w| (w[0], w[1])));
            let last = sched[sched.len() - 1];
            pairs.push((last, last));
            let mut aggregate = f64::NEG_INFINITY;
            for (lk, lk1) in pairs {
                aggregate = aggregate.max(2.0 * lk1 + beta * lk + eps);
            }
            let mut margin = 1.0 - aggregate;
            let lowest = sched.iter().copied().fold(f64::INFINITY, f64::min);
            if lowest < 0.0 {
                margin = margin.min(lowest);
            }
            Ok(Certificate::build(rule, inputs, aggregate, margin))
        }
        Rule::ModifiedK => {
            let (tau, sigma) = single_block(steps, rule)?;
            let l_dk = take(constants, &mut inputs, "L_DK")?;
            let l_dky = take(constants, &mut inputs, "L_DKy")?;
            let a1 = 4.0 * sigma * l_dky.sqrt();
            let a2 = if a1 < 1.0 {
                l_dk * tau.max(sigma / (1.0 - a1))
            } else {
                f64::INFINITY
            };
            let strict_margin = 1.0 - a1;
            let mut cert = Certificate::build(rule, inputs, a2, 1.0 - a2);
            cert.factors.push(("4 sigma sqrt(L_DKy)".into(), a1));
            // The first condition is strict, the second admits equality.
            let v1 = verdict_for(strict_margin, a1, true);
            let v2 = verdict_for(1.0 - a2, a2, false);
            cert.strict = false;
            cert.margin = strict_margin.min(1.0 - a2);
            cert.verdict = match (v1, v2) {
                (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
                (_, Verdict::Semi) => Verdict::Semi,
                _ => Verdict::Pass,
            };
            Ok(cert)
        }
        other => Err(Error::InvalidParameter(format!("`{other}` is not a dynamic rule"))),
    }
}

/// Dispatches to the family that owns `rule`.
pub fn certify(rule: Rule, steps: &StepLengths, constants: &ParamMap) -> Result<Certificate> {
    match rule {
        Rule::LipschitzK | Rule::Bilinear | Rule::AffineY | Rule::Combined => {
            certify_basic(rule, steps, constants)
        }
        Rule::BlockLipschitz | Rule::BlockBilinear | Rule::TwoBlock => {
            certify_block(rule, steps, constants)
        }
        Rule::InertiaLambda | Rule::ModifiedK => certify_dynamic(rule, steps, constants),
    }
}

/// Default steps for bilinear couplings: τ = σ = 0.99/‖A‖.
pub fn auto_bilinear_steps(norm_a: f64) -> Result<StepLengths> {
    StepLengths::scalar(0.99 / norm_a, 0.99 / norm_a)
}

fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// ‖A‖ by power iteration on A*A from a seeded Gaussian start, after
/// checking ⟨Ax, y⟩ = ⟨x, A*y⟩ on one random pair.
pub fn estimate_operator_norm(op: &dyn LinearOperator, iters: usize, seed: u64) -> Result<f64> {
    estimate_norm_with(
        &|x: &[f64]| op.apply(x),
        &|y: &[f64]| op.adjoint(y),
        op.in_dim(),
        op.out_dim(),
        iters,
        seed,
    )
}

/// [`estimate_operator_norm`] for a map given as callbacks.
pub fn estimate_norm_with(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    adjoint: &dyn Fn(&[f64]) -> Vec<f64>,
    in_dim: usize,
    out_dim: usize,
    iters: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = normal_vector(&mut rng, in_dim);
    let y = normal_vector(&mut rng, out_dim);
    let ax = apply(&x);
    let aty = adjoint(&y);
    if ax.len() != out_dim || aty.len() != in_dim {
        return Err(Error::LayoutMismatch {
            expected: vec![out_dim, in_dim],
            found: vec![ax.len(), aty.len()],
        });
    }
    let (lhs, rhs) = (dot(&ax, &y), dot(&x, &aty));
    let scale = (dot(&ax, &ax) * dot(&y, &y)).sqrt().max(f64::MIN_POSITIVE);
    let rel = (lhs - rhs).abs() / scale;
    if !(rel <= 1e-8) {
        return Err(Error::AdjointMismatch(rel));
    }

    let mut v = normal_vector(&mut rng, in_dim);
    let mut rayleigh = 0.0;
    for _ in 0..iters.max(1) {
        let nv = dot(&v, &v).sqrt();
        if nv == 0.0 {
            return Ok(0.0);
        }
        v.iter_mut().for_each(|e| *e /= nv);
        let w = adjoint(&apply(&v));
        rayleigh = dot(&v, &w);
        v = w;
    }
    Ok(rayleigh.max(0.0).sqrt())
}
