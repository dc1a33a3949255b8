//! Iteration-trace CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::diagnostics::IterationRecord;
use crate::error::Result;
use crate::solvers::IterationTrace;

pub const HEADER: &str = "k,residual,b0_to_ref,lagrangian_gap,fejer_margin,growth_gap,wall_time";

fn field(out: &mut String, v: Option<f64>) {
    out.push(',');
    if let Some(v) = v {
        // Debug formatting of f64 is the shortest round-trip form.
        write!(out, "{v:?}").expect("write to String");
    }
}

pub fn record_line(r: &IterationRecord) -> String {
    let mut line = r.k.to_string();
    field(&mut line, Some(r.residual));
    for v in [r.b0_to_ref, r.lagrangian_gap, r.fejer_margin, r.growth_gap, r.wall_time] {
        field(&mut line, v);
    }
    line
}

pub fn trace_csv(records: &[IterationRecord]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&record_line(r));
        out.push('\n');
    }
    out
}

pub fn emit_csv(trace: &IterationTrace, path: &Path) -> Result<()> {
    fs::write(path, trace_csv(&trace.records))?;
    Ok(())
}
