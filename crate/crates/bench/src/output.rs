//! Result files.
//!
//! Floats are written with 17 significant digits so every value round-trips
//! exactly. A sweep bundle for function `F` lands in `<out>/F/`:
//!
//! | file              | header                                                                  |
//! |-------------------|-------------------------------------------------------------------------|
//! | `sweep.csv`       | `method,eta,T,fraction_converged,n_diverged,n_budget`                   |
//! | `curves.csv`      | `method,eta,step,mean_value,mean_best_value,n_value_runs`               |
//! | `curves_time.csv` | `method,eta,step,mean_wall_time` (machine dependent)                    |
//! | `runs.csv`        | `method,eta,start,termination,steps_used,final_value,best_value`        |
//! | `starts.csv`      | `index,theta_1,...`                                                     |
//! | `contour.csv`     | `x,y,v` (only when requested)                                           |
//! | `manifest.json`   | tool version, config hash, seed, timestamp, plan summary                |
//!
//! Everything except `curves_time.csv` and the manifest timestamp is
//! reproducible byte for byte.

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use power_gd_core::objectives::GridSample;
use serde::Serialize;

use crate::harness::{ExperimentPlan, RunRecord, SweepResult, TraceRow};
use crate::Error;

pub const SCHEMA_VERSION: u32 = 1;
pub const SWEEP_HEADER: &str = "method,eta,T,fraction_converged,n_diverged,n_budget";
pub const CURVES_HEADER: &str = "method,eta,step,mean_value,mean_best_value,n_value_runs";
pub const TIME_CURVES_HEADER: &str = "method,eta,step,mean_wall_time";
pub const RUNS_HEADER: &str = "method,eta,start,termination,steps_used,final_value,best_value";
pub const CONTOUR_HEADER: &str = "x,y,v";

/// Round-trip float formatting.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn write_sweep_csv<W: Write>(mut w: W, result: &SweepResult) -> io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for cell in &result.cells {
        for c in &cell.checkpoints {
            writeln!(w, "{},{},{},{},{},{}", cell.method, fmt_f64(cell.eta), c.t, fmt_f64(c.fraction_converged), c.n_diverged, c.n_budget)?;
        }
    }
    Ok(())
}

pub fn write_curves_csv<W: Write>(mut w: W, result: &SweepResult) -> io::Result<()> {
    writeln!(w, "{CURVES_HEADER}")?;
    for cell in &result.cells {
        for p in &cell.curve {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                cell.method,
                fmt_f64(cell.eta),
                p.step,
                fmt_f64(p.mean_value),
                fmt_f64(p.mean_best_value),
                p.n_value_runs
            )?;
        }
    }
    Ok(())
}

pub fn write_time_curves_csv<W: Write>(mut w: W, result: &SweepResult) -> io::Result<()> {
    writeln!(w, "{TIME_CURVES_HEADER}")?;
    for cell in &result.cells {
        for p in &cell.curve {
            writeln!(w, "{},{},{},{}", cell.method, fmt_f64(cell.eta), p.step, fmt_f64(p.mean_wall_time))?;
        }
    }
    Ok(())
}

pub fn write_runs_csv<W: Write>(mut w: W, result: &SweepResult) -> io::Result<()> {
    writeln!(w, "{RUNS_HEADER}")?;
    for cell in &result.cells {
        for (i, r) in cell.runs.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                cell.method,
                fmt_f64(cell.eta),
                i,
                r.termination,
                r.steps_used,
                fmt_f64(r.final_value),
                fmt_f64(r.best_value)
            )?;
        }
    }
    Ok(())
}

fn theta_header(dim: usize) -> String {
    (1..=dim).map(|i| format!("theta_{i}")).collect::<Vec<_>>().join(",")
}

fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

pub fn write_starts_csv<W: Write>(mut w: W, result: &SweepResult) -> io::Result<()> {
    let dim = result.starts.first().map_or(0, |s| s.dimension());
    writeln!(w, "index,{}", theta_header(dim))?;
    for (i, s) in result.starts.iter().enumerate() {
        writeln!(w, "{i},{}", join_f64(s))?;
    }
    Ok(())
}

pub fn write_contour_csv<W: Write>(mut w: W, grid: &[GridSample]) -> io::Result<()> {
    writeln!(w, "{CONTOUR_HEADER}")?;
    for s in grid {
        writeln!(w, "{},{},{}", fmt_f64(s.x), fmt_f64(s.y), fmt_f64(s.v))?;
    }
    Ok(())
}

/// `step,theta_1..theta_N,v,grad_norm,h_norm`.
pub fn write_trace_csv<W: Write>(mut w: W, trace: &[TraceRow]) -> io::Result<()> {
    let dim = trace.first().map_or(0, |r| r.theta.len());
    writeln!(w, "step,{},v,grad_norm,h_norm", theta_header(dim))?;
    for r in trace {
        writeln!(w, "{},{},{},{},{}", r.step, join_f64(&r.theta), fmt_f64(r.value), fmt_f64(r.grad_norm), fmt_f64(r.h_norm))?;
    }
    Ok(())
}

/// Single-line JSON for a run record, fields in declaration order.
pub fn run_record_json(record: &RunRecord) -> String {
    serde_json::to_string(record).expect("run records serialize")
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema_version: u32,
    pub config_hash: String,
    pub timestamp: u64,
    pub function: String,
    pub domain: Vec<[f64; 2]>,
    pub seed: u64,
    pub n_starts: usize,
    pub starts_digest: String,
    pub methods: Vec<String>,
    pub eta_grid: Vec<f64>,
    pub t_checkpoints: Vec<u64>,
    pub curve_stride: u64,
    pub value_tolerance: f64,
    pub orbit_tolerance: f64,
    pub divergence_radius: f64,
}

impl Manifest {
    pub fn new(plan: &ExperimentPlan, result: &SweepResult, config_hash: &str) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            schema_version: SCHEMA_VERSION,
            config_hash: config_hash.to_string(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            function: plan.function.name().to_string(),
            domain: plan.function.domain().bounds().iter().map(|b| [b.lo(), b.hi()]).collect(),
            seed: plan.seed,
            n_starts: plan.n_starts,
            starts_digest: result.starts_digest.clone(),
            methods: plan.methods.iter().map(|m| m.label()).collect(),
            eta_grid: plan.eta_grid.clone(),
            t_checkpoints: plan.t_checkpoints.clone(),
            curve_stride: plan.curve_stride,
            value_tolerance: plan.criteria.value_tolerance,
            orbit_tolerance: plan.criteria.orbit_tolerance,
            divergence_radius: plan.criteria.divergence_radius,
        }
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut io::BufWriter<std::fs::File>) -> io::Result<()>) -> Result<(), Error> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = io::BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Writes the whole result bundle of one experiment under `dir/<function>/`
/// and returns that directory.
pub fn write_bundle(
    dir: &Path,
    plan: &ExperimentPlan,
    result: &SweepResult,
    config_hash: &str,
    contour: Option<&[GridSample]>,
) -> Result<PathBuf, Error> {
    let out = dir.join(plan.function.name());
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write_file(&out.join("sweep.csv"), |w| write_sweep_csv(w, result))?;
    write_file(&out.join("curves.csv"), |w| write_curves_csv(w, result))?;
    write_file(&out.join("curves_time.csv"), |w| write_time_curves_csv(w, result))?;
    write_file(&out.join("runs.csv"), |w| write_runs_csv(w, result))?;
    write_file(&out.join("starts.csv"), |w| write_starts_csv(w, result))?;
    if let Some(grid) = contour {
        write_file(&out.join("contour.csv"), |w| write_contour_csv(w, grid))?;
    }
    let manifest = Manifest::new(plan, result, config_hash);
    write_file(&out.join("manifest.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest).map_err(io::Error::other)?;
        writeln!(w)
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, std::f64::consts::PI, 5e-324] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(1e-4), "1.0000000000000000e-4");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn contour_csv_shape() {
        let grid = [GridSample { x: 0.0, y: 1.0, v: 2.0 }, GridSample { x: 1.0, y: 1.0, v: 3.0 }];
        let mut buf = Vec::new();
        write_contour_csv(&mut buf, &grid).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,y,v");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn trace_header() {
        let rows = [TraceRow { step: 0, theta: vec![1.0, 2.0], value: 3.0, grad_norm: 4.0, h_norm: 2.0 }];
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &rows).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("step,theta_1,theta_2,v,grad_norm,h_norm\n0,"));
    }
}
