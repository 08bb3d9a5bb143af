//! The `power-gd` command.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 for
//! internal failures (IO and the like).

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use power_gd_core::convergence::{quadratic_orbit, StopCriteria};
use power_gd_core::objectives::{contour_grid, CostFunction, FunctionKind};
use power_gd_core::optimizers::{Method, OptimizerConfig};
use power_gd_core::transform::ParameterVector;
use serde::Serialize;

use crate::config::ConfigFile;
use crate::harness::{run_trajectory, sweep, ExperimentPlan, RunOptions};
use crate::output::{self, run_record_json, write_bundle, write_contour_csv, write_trace_csv};
use crate::Error;

const DEFAULTS_HELP: &str = "\
Defaults:
  optimizer      gamma (momentum_damping) = 0.99, beta1 = 0.9, beta2 = 0.99,
                 beta3 = 0.999, epsilon = 1e-8, amsgrad_cap_mode = paper
  exponent H0    1 for gd/nag/adam/amsgrad, 0.5 with the h_ prefix and for adam_scheduled
  stopping       value_tolerance = 1e-4, orbit_tolerance = 1e-8, divergence_radius = 1e8
  sweep          n_starts = 100, eta_grid = 1e-4..1e1 (powers of ten),
                 t_checkpoints = 100,1000,10000, seed = 1, curve_stride = 10
  domains        v1 [-3,3]^2, v2 [-5,5]^2, v3 [-2,2]^2, v4 [-2,2]^2, beale [-4.5,4.5]^2

Environment:
  POWER_GD_OUT_DIR   output directory for `sweep` (overridden by --out)
  POWER_GD_WORKERS   worker threads for `sweep` (overridden by --workers)";

#[derive(Debug, Parser)]
#[command(name = "power-gd", version, about = "Power-gradient descent benchmarks", after_help = DEFAULTS_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the learning-rate sweeps of a configuration file and write result bundles.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Only run experiments on this function.
        #[arg(long)]
        function: Option<String>,
        /// Only run this method (e.g. `h_nag`).
        #[arg(long)]
        method: Option<String>,
        #[arg(long, env = "POWER_GD_OUT_DIR")]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores). Results do not depend on it.
        #[arg(long, env = "POWER_GD_WORKERS")]
        workers: Option<usize>,
        #[arg(long)]
        quiet: bool,
    },
    /// Run one trajectory and print its record as JSON.
    Trajectory {
        #[arg(long)]
        function: String,
        /// Stiffness of `quadratic`.
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long)]
        method: String,
        #[arg(long)]
        eta: f64,
        /// Start point, comma separated (e.g. `-1.5,0.5`).
        #[arg(long, allow_hyphen_values = true)]
        start: String,
        #[arg(long, default_value_t = 10_000)]
        steps: u64,
        /// Also write the per-step trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Sample a 2-D function on a grid over its domain (CSV `x,y,v`).
    Contour {
        #[arg(long)]
        function: String,
        #[arg(long)]
        resolution: usize,
        /// Output file (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run vanilla h-GD on kappa*theta^2/2 and report its 2-cycle.
    Orbit {
        #[arg(long)]
        kappa: f64,
        #[arg(long)]
        eta: f64,
        #[arg(long, allow_hyphen_values = true)]
        start: f64,
        #[arg(long, default_value_t = 1_000_000)]
        steps: u64,
        #[arg(long, default_value_t = StopCriteria::DEFAULT_ORBIT_TOLERANCE)]
        orbit_tolerance: f64,
    },
    /// List functions and methods with their defaults.
    List,
}

/// Parses `argv` (including the program name) and runs the command.
pub fn cli_run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(stdout, "{}", e.render());
                    return 0;
                }
                _ => 1,
            };
            let _ = write!(stderr, "{}", e.render());
            return code;
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn parse_function(name: &str, kappa: f64) -> Result<CostFunction, Error> {
    let kind: FunctionKind = name.parse()?;
    Ok(match kind {
        FunctionKind::Quadratic { .. } => CostFunction::quadratic(kappa)?,
        k => CostFunction::new(k),
    })
}

fn parse_point(text: &str) -> Result<ParameterVector, Error> {
    let coords = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Usage(format!("invalid coordinate `{s}` in `{text}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ParameterVector::new(coords)?)
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

#[derive(Serialize)]
struct OrbitReport {
    kappa: f64,
    eta: f64,
    start: f64,
    predicted_amplitude: f64,
    measured_amplitude: f64,
    amplitude_error: f64,
    orbit_detected: bool,
    orbit_sum: f64,
    steps: u64,
    theta: f64,
    previous_theta: f64,
    midpoint: f64,
    midpoint_value: f64,
}

fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), Error> {
    match command {
        Command::Sweep { config, function, method, out, workers, quiet } => {
            let cfg = ConfigFile::load(&config)?;
            let out_dir = out.or(cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("results"));
            let method_filter = method.map(|m| OptimizerConfig::from_name(&m).map(|c| c.label())).transpose()?;
            let function_filter = function.map(|f| f.parse::<FunctionKind>().map(|k| k.name())).transpose()?;
            let mut ran = 0;
            for exp in &cfg.experiments {
                if function_filter.is_some_and(|f| f != exp.plan.function.name()) {
                    continue;
                }
                let mut plan: ExperimentPlan = exp.plan.clone();
                if let Some(label) = &method_filter {
                    plan.methods.retain(|m| &m.label() == label);
                    if plan.methods.is_empty() {
                        continue;
                    }
                }
                let result = sweep(&plan, workers)?;
                let contour = exp.contour_resolution.map(|r| contour_grid(&plan.function, r)).transpose()?;
                let dir = write_bundle(&out_dir, &plan, &result, &cfg.hash, contour.as_deref())?;
                ran += 1;
                if !quiet {
                    let _ = writeln!(
                        stderr,
                        "{}: {} cells x {} starts -> {}",
                        plan.function.name(),
                        result.cells.len(),
                        plan.n_starts,
                        dir.display()
                    );
                }
            }
            if ran == 0 {
                return Err(Error::Usage("no experiment matches the --function/--method filters".into()));
            }
            Ok(())
        }
        Command::Trajectory { function, kappa, method, eta, start, steps, trace } => {
            let f = parse_function(&function, kappa)?;
            let config = OptimizerConfig::from_name(&method)?.with_learning_rate(eta);
            let start = parse_point(&start)?;
            let criteria = StopCriteria::with_budget(steps);
            let record = run_trajectory(&f, config, &start, &criteria, RunOptions { series_stride: 0, trace: trace.is_some() })?;
            if let Some(path) = trace {
                let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                let mut w = std::io::BufWriter::new(file);
                write_trace_csv(&mut w, &record.trace).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;
            }
            writeln!(stdout, "{}", run_record_json(&record)).map_err(stdout_err)
        }
        Command::Contour { function, resolution, out } => {
            let f = parse_function(&function, 1.0)?;
            let grid = contour_grid(&f, resolution)?;
            match out {
                Some(path) => {
                    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                    let mut w = std::io::BufWriter::new(file);
                    write_contour_csv(&mut w, &grid).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))
                }
                None => write_contour_csv(stdout, &grid).map_err(stdout_err),
            }
        }
        Command::Orbit { kappa, eta, start, steps, orbit_tolerance } => {
            let r = quadratic_orbit(kappa, eta, start, steps, orbit_tolerance)?;
            let report = OrbitReport {
                kappa: r.kappa,
                eta: r.learning_rate,
                start: r.start,
                predicted_amplitude: r.predicted_amplitude,
                measured_amplitude: r.measured_amplitude,
                amplitude_error: (r.measured_amplitude - r.predicted_amplitude).abs(),
                orbit_detected: r.orbit_detected,
                orbit_sum: r.orbit_sum,
                steps: r.steps,
                theta: r.theta,
                previous_theta: r.previous_theta,
                midpoint: r.midpoint,
                midpoint_value: r.midpoint_value,
            };
            let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Internal(e.to_string()))?;
            writeln!(stdout, "{json}").map_err(stdout_err)
        }
        Command::List => list(stdout).map_err(stdout_err),
    }
}

fn list(w: &mut dyn Write) -> std::io::Result<()> {
    writeln!(w, "functions:")?;
    let mut kinds: Vec<FunctionKind> = FunctionKind::BENCHMARKS.to_vec();
    kinds.push(FunctionKind::Quadratic { kappa: 1.0 });
    for kind in kinds {
        let f = CostFunction::new(kind);
        let domain: Vec<String> = f
            .domain()
            .bounds()
            .iter()
            .map(|b| format!("[{}, {}]", b.lo(), b.hi()))
            .collect();
        writeln!(
            w,
            "  {:<10} dim {}  domain {}  minimum {:?} (V = {})",
            f.name(),
            f.dimension(),
            domain.join(" x "),
            f.global_minimum().as_slice(),
            f.minimum_value()
        )?;
    }
    writeln!(w, "methods (h_ prefix sets H0 = 0.5):")?;
    for m in Method::ALL {
        let c = OptimizerConfig::new(m);
        let params = match m {
            Method::Gd => String::new(),
            Method::Nag => format!("gamma {}", c.momentum_damping),
            Method::Adam | Method::AmsGrad => format!("beta1 {} beta2 {} epsilon {:e}", c.beta1, c.beta2, c.epsilon),
            Method::AdamScheduled => {
                format!("beta1 {} beta2 {} beta3 {} epsilon {:e}", c.beta1, c.beta2, c.beta3, c.epsilon)
            }
        };
        writeln!(w, "  {:<15} H0 {:<4} {}", m.name(), c.initial_exponent.value(), params)?;
    }
    writeln!(w, "amsgrad cap modes: paper (default), accumulated")?;
    writeln!(w, "output schema version {}", output::SCHEMA_VERSION)
}
