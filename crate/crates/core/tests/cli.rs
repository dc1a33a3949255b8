mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::*;
use pdsplit::cli::csv::{trace_csv, HEADER};
use pdsplit::cli::pgm::{decode, encode, quantize};
use pdsplit::cli::{build_problem, run_config, Image, PgmFormat, RunConfig};
use pdsplit::*;
use proptest::prelude::*;
use tempfile::TempDir;

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_pdsplit")
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Temp dir holding the demo phantom and a config with the given body.
fn setup(body: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(configs_dir().join("phantom32.pgm"), dir.path().join("phantom32.pgm")).unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, body).unwrap();
    (dir, cfg)
}

fn invoke(cfg: &Path) -> Output {
    Command::new(binary()).arg("run").arg(cfg).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const ROF_HEAD: &str = "problem.name = rof\nproblem.alpha = 0.1\nio.input = phantom32.pgm\n";

#[test]
fn oversized_explicit_steps_are_rejected() {
    let (_dir, probe) = setup(ROF_HEAD);
    let (p, _) = build_problem(&RunConfig::from_file(&probe).unwrap()).unwrap();
    let step = 1.1 / p.constant("norm_A").unwrap();
    let body = format!("{ROF_HEAD}solver.name = pdps\nsteps.tau = {step:?}\nsteps.sigma = {step:?}\n");
    let (_dir, cfg) = setup(&body);
    let out = invoke(&cfg);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("bilinear"), "{msg}");
    let margin: f64 = msg
        .split("margin ")
        .nth(1)
        .and_then(|s| s.trim_end().trim_end_matches(')').parse().ok())
        .unwrap_or_else(|| panic!("no margin in {msg}"));
    assert!((margin + 0.21).abs() < 1e-9, "margin {margin}");
}

#[test]
fn potts_with_plain_pdps_names_the_right_solver() {
    let body = "problem.name = potts\nproblem.grad_bound = 4\nproblem.dual_bound = 1\nio.input = phantom32.pgm\nsolver.name = pdps\n";
    let (_dir, cfg) = setup(body);
    let out = invoke(&cfg);
    assert_ne!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("modified_pdps"), "{}", stderr(&out));
}

#[test]
fn parse_errors_report_the_line() {
    let body = format!("{ROF_HEAD}# comment\nsolver.name = pdps\noptions.max_iter = many\n");
    let (_dir, cfg) = setup(&body);
    let out = invoke(&cfg);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains(":6"), "{msg}");
    assert!(msg.contains("max_iter"), "{msg}");

    let (_dir, cfg) = setup(&format!("{ROF_HEAD}options.colour = red\n"));
    let msg = stderr(&invoke(&cfg));
    assert!(msg.contains(":4") && msg.contains("colour"), "{msg}");
}

#[test]
fn divergent_uncertified_run_exits_with_numeric_failure() {
    let body = "problem.name = fb\nproblem.c = 1, 1\nproblem.Q = 2, 0; 0, 1\nproblem.l1 = 0.1\n\
                solver.name = pdps\nsteps.tau = 100\nsteps.sigma = 1\n\
                options.uncertified = true\noptions.max_iter = 1000\nio.summary = summary.txt\n";
    let (dir, cfg) = setup(body);
    let out = invoke(&cfg);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains("numeric"));
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("stop_reason: numeric"), "{summary}");
}

#[test]
fn successful_run_writes_all_outputs() {
    let body = format!(
        "{ROF_HEAD}solver.name = pdps\noptions.max_iter = 200\noptions.monitor_every = 20\n\
         io.output = out.pgm\nio.trace = trace.csv\nio.summary = summary.txt\n"
    );
    let (dir, cfg) = setup(&body);
    let out = invoke(&cfg);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let img = pdsplit::cli::read_pgm(&dir.path().join("out.pgm")).unwrap();
    assert_eq!((img.rows, img.cols), (32, 32));
    let csv = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(HEADER));
    assert_eq!(csv.lines().count(), 1 + 11);
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("verdict: pass"), "{summary}");
}

#[test]
fn run_config_is_idempotent() {
    let body = format!(
        "{ROF_HEAD}problem.noise = 0.05\nproblem.noise_seed = 3\nsolver.name = pdps\n\
         options.max_iter = 300\noptions.reference_iters = 600\n\
         io.output = out.pgm\nio.trace = trace.csv\nio.summary = summary.txt\n"
    );
    let (dir, cfg) = setup(&body);
    let read = |name: &str| fs::read(dir.path().join(name)).unwrap();
    let first = run_config(&cfg).unwrap();
    let bytes: Vec<Vec<u8>> = ["out.pgm", "trace.csv", "summary.txt"].iter().map(|n| read(n)).collect();
    let second = run_config(&cfg).unwrap();
    assert_eq!(first.trace, second.trace);
    for (n, b) in ["out.pgm", "trace.csv", "summary.txt"].iter().zip(&bytes) {
        assert_eq!(&read(n), b, "{n} changed");
    }
}

#[test]
fn csv_values_parse_back_exactly() {
    let (p, b) = rof(8, 0.1, 2);
    let steps = rof_steps(&p);
    let u0 = start_at_data(&p, &b);
    let reference = long_run_reference(&p, &steps, &u0, 5000, 1e-6);
    let opts = SolverOptions {
        max_iter: 40,
        reference: Some(reference),
        ..SolverOptions::default()
    };
    let t = solve_pdps(&p, &steps, &u0, &opts).unwrap();
    let text = trace_csv(&t.records);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(HEADER));
    let field = |s: &str| if s.is_empty() { None } else { Some(s.parse::<f64>().unwrap()) };
    let mut n = 0;
    for (line, r) in lines.zip(&t.records) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 7);
        assert_eq!(cols[0].parse::<usize>().unwrap(), r.k);
        assert_eq!(cols[1].parse::<f64>().unwrap().to_bits(), r.residual.to_bits());
        for (c, v) in cols[2..6].iter().zip([r.b0_to_ref, r.lagrangian_gap, r.fejer_margin, r.growth_gap]) {
            assert_eq!(field(c).map(f64::to_bits), v.map(f64::to_bits));
        }
        assert_eq!(cols[6], "");
        n += 1;
    }
    assert_eq!(n, t.records.len());
}

#[test]
fn empty_trace_is_header_only() {
    assert_eq!(trace_csv(&[]), format!("{HEADER}\n"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn quantized_images_roundtrip_bytes(
        rows in 1usize..9,
        cols in 1usize..9,
        wide in any::<bool>(),
        binary in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let maxval = if wide { 65535 } else { 255 };
        let format = if binary { PgmFormat::Binary } else { PgmFormat::Ascii };
        let mut r = rng(seed);
        let data: Vec<f64> = uniform_vec(&mut r, rows * cols, 0.0, 1.0)
            .into_iter()
            .map(|v| f64::from(quantize(v, maxval)) / f64::from(maxval))
            .collect();
        let img = Image::new(rows, cols, data).unwrap();
        let bytes = encode(&img, format, maxval).unwrap();
        let back = decode(&bytes).unwrap();
        prop_assert_eq!((back.rows, back.cols), (rows, cols));
        prop_assert_eq!(encode(&back, format, maxval).unwrap(), bytes);
    }
}
