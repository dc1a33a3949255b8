//! Flat `section.key = value` run configuration.
//!
//! ```text
//! # comment
//! problem.name = rof
//! problem.alpha = 0.1
//! solver.name = pdps
//! steps.mode = auto
//! options.max_iter = 500
//! io.input = phantom32.pgm
//! ```
//!
//! Relative paths resolve against the directory holding the config file.
//! Lists are comma separated; matrix rows are separated by `;`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::pgm::PgmFormat;
use crate::error::{Error, Result};
use crate::params::ParamMap;
use crate::solvers::{DualBall, SolverOptions};
use crate::steprules::Rule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Pdps,
    BlockPdps,
    InertialPdps,
    ModifiedPdps,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Pdps => "pdps",
            SolverKind::BlockPdps => "block_pdps",
            SolverKind::InertialPdps => "inertial_pdps",
            SolverKind::ModifiedPdps => "modified_pdps",
        }
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "pdps" => SolverKind::Pdps,
            "block_pdps" => SolverKind::BlockPdps,
            "inertial_pdps" => SolverKind::InertialPdps,
            "modified_pdps" => SolverKind::ModifiedPdps,
            other => return Err(format!("unknown solver `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepSpec {
    Auto,
    Explicit { tau: Vec<f64>, sigma: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// x⁰ = data image when the problem has one, y⁰ = 0.
    Data,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Noise {
    pub std: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IoConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub format: PgmFormat,
    pub maxval: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub path: PathBuf,
    pub problem: String,
    pub params: ParamMap,
    pub noise: Option<Noise>,
    pub solver: SolverKind,
    pub steps: StepSpec,
    pub lambda: Option<Vec<f64>>,
    /// Certificate rule; chosen from the problem when absent.
    pub rule: Option<Rule>,
    pub options: SolverOptions,
    /// Length of the preliminary run that supplies the reference point.
    pub reference_iters: usize,
    pub init: Init,
    pub io: IoConfig,
}

const PROBLEM_KEYS: &[&str] = &[
    "n1", "n2", "alpha", "b", "z", "seed", "box_radius", "rho_y1", "grad_bound", "dual_bound", "c",
    "Q", "q", "l1",
];

const NON_AFFINE: &[&str] = &["potts"];
const BILINEAR: &[&str] = &["rof"];

struct Entry {
    line: usize,
    value: String,
}

struct Parser {
    path: PathBuf,
    entries: HashMap<String, Entry>,
}

impl Parser {
    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Config {
            path: self.path.clone(),
            line,
            msg: msg.into(),
        }
    }

    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn parse<T: FromStr>(&mut self, key: &str) -> Result<Option<(T, usize)>> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => match e.value.parse() {
                Ok(v) => Ok(Some((v, e.line))),
                Err(_) => Err(self.err(e.line, format!("cannot parse `{}` for {key}", e.value))),
            },
        }
    }

    fn value<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        Ok(self.parse(key)?.map(|(v, _)| v))
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => parse_list(&e.value)
                .map(Some)
                .ok_or_else(|| self.err(e.line, format!("cannot parse number list `{}` for {key}", e.value))),
        }
    }

    fn path(&mut self, key: &str) -> Option<PathBuf> {
        let dir = self.path.parent().unwrap_or(Path::new("")).to_path_buf();
        self.take(key).map(|e| dir.join(e.value))
    }
}

fn parse_list(text: &str) -> Option<Vec<f64>> {
    text.split(',').map(|t| t.trim().parse().ok()).collect()
}

fn parse_matrix(text: &str) -> Option<Vec<Vec<f64>>> {
    text.split(';').map(parse_list).collect()
}

fn parse_bool(text: &str) -> Option<bool> {
    match text {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    /// Parses config text; `path` locates relative file names and labels
    /// errors.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut p = Parser {
            path: path.to_path_buf(),
            entries: HashMap::new(),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| p.err(line, format!("expected `key = value`, found `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let known = match key.split_once('.') {
                Some(("problem", k)) => k == "name" || k == "noise" || k == "noise_seed" || PROBLEM_KEYS.contains(&k),
                Some(("solver", k)) => k == "name",
                Some(("steps", k)) => ["mode", "tau", "sigma", "lambda", "rule"].contains(&k),
                Some(("options", k)) => [
                    "max_iter",
                    "tol",
                    "monitor_every",
                    "seed",
                    "ergodic",
                    "timing",
                    "uncertified",
                    "dual_ball_radius",
                    "dual_ball_block",
                    "dual_ball_project",
                    "reference_iters",
                    "init",
                ]
                .contains(&k),
                Some(("io", k)) => ["input", "output", "trace", "summary", "format", "maxval"].contains(&k),
                _ => false,
            };
            if !known {
                return Err(p.err(line, format!("unknown key `{key}`")));
            }
            if let Some(prev) = p.entries.get(key) {
                return Err(p.err(line, format!("duplicate key `{key}` (first set on line {})", prev.line)));
            }
            p.entries.insert(
                key.to_string(),
                Entry {
                    line,
                    value: value.to_string(),
                },
            );
        }

        let (problem, problem_line) = p.parse::<String>("problem.name")?.ok_or_else(|| p.err(0, "missing problem.name"))?;
        let mut params = ParamMap::new();
        for key in PROBLEM_KEYS {
            let full = format!("problem.{key}");
            let Some(e) = p.take(&full) else { continue };
            if *key == "Q" {
                let m = parse_matrix(&e.value).ok_or_else(|| p.err(e.line, format!("cannot parse matrix for {full}")))?;
                params = params.matrix(key, m);
                continue;
            }
            let list = parse_list(&e.value).ok_or_else(|| p.err(e.line, format!("cannot parse `{}` for {full}", e.value)))?;
            params = match list.as_slice() {
                [v] if !["b", "z", "c", "q"].contains(key) => params.scalar(key, *v),
                _ => params.vector(key, list),
            };
        }
        let noise = match p.value::<f64>("problem.noise")? {
            Some(std) if std > 0.0 => Some(Noise {
                std,
                seed: p.value("problem.noise_seed")?.unwrap_or(0),
            }),
            Some(_) => None,
            None => None,
        };
        p.take("problem.noise_seed");

        let (solver, solver_line) = match p.take("solver.name") {
            None => (SolverKind::Pdps, problem_line),
            Some(e) => (e.value.parse().map_err(|m: String| p.err(e.line, m))?, e.line),
        };
        if solver != SolverKind::ModifiedPdps && NON_AFFINE.contains(&problem.as_str()) {
            return Err(p.err(
                solver_line,
                format!("`{problem}` is not affine in y; solver `{}` cannot run it, use modified_pdps", solver.as_str()),
            ));
        }
        if solver == SolverKind::InertialPdps && !BILINEAR.contains(&problem.as_str()) {
            return Err(p.err(solver_line, format!("inertial_pdps needs a bilinear problem, `{problem}` is not")));
        }

        let mode = p.take("steps.mode");
        let tau = p.list("steps.tau")?;
        let sigma = p.list("steps.sigma")?;
        let steps = match (mode, tau, sigma) {
            (Some(e), _, _) if e.value != "auto" && e.value != "explicit" => {
                return Err(p.err(e.line, format!("steps.mode must be auto or explicit, found `{}`", e.value)))
            }
            (Some(e), Some(_), _) | (Some(e), _, Some(_)) if e.value == "auto" => {
                return Err(p.err(e.line, "steps.mode = auto conflicts with explicit steps.tau/steps.sigma"))
            }
            (_, Some(tau), Some(sigma)) => StepSpec::Explicit { tau, sigma },
            (Some(e), _, _) if e.value == "explicit" => {
                return Err(p.err(e.line, "explicit steps need both steps.tau and steps.sigma"))
            }
            (_, None, None) => StepSpec::Auto,
            _ => return Err(p.err(0, "steps.tau and steps.sigma must be given together")),
        };
        let lambda = p.list("steps.lambda")?;
        let rule = match p.take("steps.rule") {
            None => None,
            Some(e) => Some(e.value.parse::<Rule>().map_err(|_| p.err(e.line, format!("unknown rule `{}`", e.value)))?),
        };

        let mut options = SolverOptions::default();
        if let Some(v) = p.value("options.max_iter")? {
            options.max_iter = v;
        }
        if let Some(v) = p.value("options.tol")? {
            options.tol = v;
        }
        if let Some(v) = p.value("options.monitor_every")? {
            options.monitor_every = v;
        }
        if let Some(v) = p.value("options.seed")? {
            options.seed = v;
        }
        for (key, slot) in [
            ("options.ergodic", &mut options.ergodic),
            ("options.timing", &mut options.timing),
            ("options.uncertified", &mut options.uncertified),
        ] {
            if let Some(e) = p.take(key) {
                *slot = parse_bool(&e.value).ok_or_else(|| p.err(e.line, format!("expected true/false for {key}")))?;
            }
        }
        if let Some(radius) = p.value::<f64>("options.dual_ball_radius")? {
            let project = match p.take("options.dual_ball_project") {
                None => false,
                Some(e) => parse_bool(&e.value).ok_or_else(|| p.err(e.line, "expected true/false"))?,
            };
            options.dual_ball = Some(DualBall {
                radius,
                block: p.value("options.dual_ball_block")?,
                project,
            });
        }
        if let Some(e) = p.take("options.dual_ball_block").or_else(|| p.take("options.dual_ball_project")) {
            return Err(p.err(e.line, "dual-ball settings need options.dual_ball_radius"));
        }
        let reference_iters = p.value("options.reference_iters")?.unwrap_or(0);
        let init = match p.take("options.init") {
            None => Init::Data,
            Some(e) => match e.value.as_str() {
                "data" => Init::Data,
                "zero" => Init::Zero,
                other => return Err(p.err(e.line, format!("options.init must be data or zero, found `{other}`"))),
            },
        };

        let input_line = p.entries.get("io.input").map(|e| e.line);
        let input = p.path("io.input");
        if let (Some(path), Some(line)) = (&input, input_line) {
            if !path.is_file() {
                return Err(p.err(line, format!("input image {} does not exist", path.display())));
            }
        }
        let format = match p.take("io.format") {
            None => PgmFormat::Binary,
            Some(e) => match e.value.as_str() {
                "p2" | "P2" => PgmFormat::Ascii,
                "p5" | "P5" => PgmFormat::Binary,
                other => return Err(p.err(e.line, format!("io.format must be p2 or p5, found `{other}`"))),
            },
        };
        let maxval = p.value("io.maxval")?.unwrap_or(255);
        let io = IoConfig {
            input,
            output: p.path("io.output"),
            trace: p.path("io.trace"),
            summary: p.path("io.summary"),
            format,
            maxval,
        };
        debug_assert!(p.entries.is_empty(), "unconsumed keys: {:?}", p.entries.keys().collect::<Vec<_>>());
        Ok(RunConfig {
            path: path.to_path_buf(),
            problem,
            params,
            noise,
            solver,
            steps,
            lambda,
            rule,
            options,
            reference_iters,
            init,
            io,
        })
    }
}
