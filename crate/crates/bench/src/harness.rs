//! Seeded start sampling, single trajectories and learning-rate sweeps.
//!
//! A sweep runs every (method, eta) cell from the same `n` start points, so
//! comparisons between cells are paired. Start `i` comes from its own ChaCha
//! stream keyed by `(seed, i)` and does not depend on scheduling or worker
//! count. Aggregation happens in start-index order, so results are
//! bit-identical for any number of workers (wall times aside).

use std::time::Instant;

use power_gd_core::convergence::{check, Iterate, OrbitDiagnostics, StopCriteria, TerminationReason};
use power_gd_core::objectives::{CostFunction, Domain, Objective};
use power_gd_core::optimizers::{make_optimizer, OptimizerConfig};
use power_gd_core::transform::{power_transform_into, ParameterVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::Error;

/// `n` points drawn uniformly from `domain`; point `i` depends only on `(seed, i)`.
pub fn sample_starts(domain: &Domain, n: usize, seed: u64) -> Vec<ParameterVector> {
    (0..n).map(|i| sample_start(domain, seed, i as u64)).collect()
}

/// The `index`-th start point of the sequence keyed by `seed`.
pub fn sample_start(domain: &Domain, seed: u64, index: u64) -> ParameterVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let coords = domain.bounds().iter().map(|b| b.lerp(rng.random::<f64>())).collect();
    ParameterVector::new(coords).expect("domain bounds are finite")
}

/// SHA-256 over the bit patterns of every start coordinate.
pub fn starts_digest(starts: &[ParameterVector]) -> String {
    let mut hasher = Sha256::new();
    for p in starts {
        for x in p.iter() {
            hasher.update(x.to_bits().to_le_bytes());
        }
    }
    hex::encode(hasher.finalize())
}

/// What a trajectory keeps besides its summary.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep `(V, best V, elapsed)` every `stride` steps (0 = keep nothing).
    pub series_stride: u64,
    /// Keep a full per-step trace.
    pub trace: bool,
}

/// One sample of a trajectory's downsampled value series.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SeriesPoint {
    pub step: u64,
    pub value: f64,
    pub best_value: f64,
    #[serde(skip)]
    pub elapsed: f64,
}

/// One row of a full trajectory trace. Norms are Euclidean.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: u64,
    pub theta: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub h_norm: f64,
}

/// Outcome of one trajectory.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RunRecord {
    pub function: String,
    pub method: String,
    pub eta: f64,
    pub start_point: Vec<f64>,
    #[serde(serialize_with = "serialize_reason")]
    pub termination: TerminationReason,
    pub steps_used: u64,
    pub final_point: Vec<f64>,
    pub final_value: f64,
    pub best_value: f64,
    pub orbit: Option<OrbitRecord>,
    pub wall_time: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub value_series: Vec<SeriesPoint>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

fn serialize_reason<S: serde::Serializer>(r: &TerminationReason, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(r.as_str())
}

/// Serializable mirror of [`OrbitDiagnostics`].
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct OrbitRecord {
    pub orbit_detected: bool,
    pub orbit_sum: f64,
    pub amplitude: Vec<f64>,
    pub midpoint: Vec<f64>,
    pub midpoint_value: f64,
}

impl From<OrbitDiagnostics> for OrbitRecord {
    fn from(d: OrbitDiagnostics) -> Self {
        Self {
            orbit_detected: d.orbit_detected,
            orbit_sum: d.orbit_sum,
            amplitude: d.amplitude,
            midpoint: d.midpoint,
            midpoint_value: d.midpoint_value,
        }
    }
}

impl RunRecord {
    pub fn converged_within(&self, t: u64) -> bool {
        self.termination.is_converged() && self.steps_used <= t
    }

    pub fn diverged_within(&self, t: u64) -> bool {
        self.termination.is_diverged() && self.steps_used <= t
    }
}

fn euclidean(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Runs `config` on `f` from `start` until a stopping rule fires.
///
/// Iterate 0 is checked before any update, so a start at the minimum
/// converges with `steps_used = 0`. Non-finite steps end the run as
/// `DIVERGED_NONFINITE`; they never abort the caller.
pub fn run_trajectory(
    f: &CostFunction,
    config: OptimizerConfig,
    start: &ParameterVector,
    criteria: &StopCriteria,
    options: RunOptions,
) -> Result<RunRecord, Error> {
    let dim = f.dimension();
    if start.dimension() != dim {
        return Err(power_gd_core::Error::DimensionMismatch { expected: dim, actual: start.dimension() }.into());
    }
    criteria.validate()?;
    let mut opt = make_optimizer(config, dim)?;

    let mut theta = start.as_slice().to_vec();
    let mut grad = vec![0.0; dim];
    let mut h = vec![0.0; dim];
    let mut prev_theta = vec![0.0; dim];
    let mut prev_h = vec![0.0; dim];
    let mut best = f64::INFINITY;
    let mut value_series = Vec::new();
    let mut trace = Vec::new();
    let clock = Instant::now();

    let mut step = 0u64;
    let (termination, orbit, final_value) = loop {
        let value = f.value(&theta);
        f.gradient_into(&theta, &mut grad);
        power_transform_into(&grad, opt.exponent(), &mut h);
        if value < best {
            best = value;
        }
        if options.series_stride > 0 && step.is_multiple_of(options.series_stride) {
            value_series.push(SeriesPoint { step, value, best_value: best, elapsed: clock.elapsed().as_secs_f64() });
        }
        if options.trace {
            trace.push(TraceRow { step, theta: theta.clone(), value, grad_norm: euclidean(&grad), h_norm: euclidean(&h) });
        }

        let previous = (step > 0).then_some(Iterate { theta: &prev_theta, power_gradient: &prev_h });
        if let Some(t) = check(f, Iterate { theta: &theta, power_gradient: &h }, value, previous, criteria, step) {
            break (t.reason, t.orbit, value);
        }

        prev_theta.copy_from_slice(&theta);
        prev_h.copy_from_slice(&h);
        step += 1;
        if opt.step_with_gradient(f, &mut theta, &grad).is_err() {
            let value = f.value(&theta);
            if options.trace {
                trace.push(TraceRow { step, theta: theta.clone(), value, grad_norm: f64::NAN, h_norm: f64::NAN });
            }
            break (TerminationReason::DivergedNonfinite, None, value);
        }
    };

    Ok(RunRecord {
        function: f.name().to_string(),
        method: config.label(),
        eta: config.learning_rate,
        start_point: start.as_slice().to_vec(),
        termination,
        steps_used: step,
        final_point: theta,
        final_value,
        best_value: best,
        orbit: orbit.map(OrbitRecord::from),
        wall_time: clock.elapsed().as_secs_f64(),
        value_series,
        trace,
    })
}

/// A full learning-rate sweep on one function.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub function: CostFunction,
    pub methods: Vec<OptimizerConfig>,
    pub n_starts: usize,
    pub eta_grid: Vec<f64>,
    /// Budgets `T` at which convergence fractions are reported; the last one
    /// is the run budget.
    pub t_checkpoints: Vec<u64>,
    pub seed: u64,
    /// Value, orbit and divergence thresholds; `max_steps` is replaced by the
    /// last checkpoint.
    pub criteria: StopCriteria,
    /// Sampling stride of the mean-value curves.
    pub curve_stride: u64,
}

impl ExperimentPlan {
    pub const DEFAULT_N_STARTS: usize = 100;
    pub const DEFAULT_T_CHECKPOINTS: [u64; 3] = [100, 1_000, 10_000];
    pub const DEFAULT_CURVE_STRIDE: u64 = 10;

    /// `10^-4, 10^-3, ..., 10^1`.
    pub fn default_eta_grid() -> Vec<f64> {
        vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0]
    }

    /// Plan with every default for `function` and `methods`.
    pub fn new(function: CostFunction, methods: Vec<OptimizerConfig>, seed: u64) -> Self {
        Self {
            function,
            methods,
            n_starts: Self::DEFAULT_N_STARTS,
            eta_grid: Self::default_eta_grid(),
            t_checkpoints: Self::DEFAULT_T_CHECKPOINTS.to_vec(),
            seed,
            criteria: StopCriteria::default(),
            curve_stride: Self::DEFAULT_CURVE_STRIDE,
        }
    }

    pub fn budget(&self) -> u64 {
        self.t_checkpoints.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let mut problems = Vec::new();
        if self.n_starts == 0 {
            problems.push("n_starts must be at least 1".to_string());
        }
        if self.methods.is_empty() {
            problems.push("at least one method is required".to_string());
        }
        if self.eta_grid.is_empty() {
            problems.push("eta_grid must not be empty".to_string());
        }
        if self.eta_grid.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            problems.push(format!("eta_grid entries must be finite and positive: {:?}", self.eta_grid));
        }
        if self.t_checkpoints.is_empty() || self.t_checkpoints[0] == 0 || self.t_checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            problems.push(format!("t_checkpoints must be positive and strictly increasing: {:?}", self.t_checkpoints));
        }
        if self.curve_stride == 0 {
            problems.push("curve_stride must be at least 1".to_string());
        }
        for m in &self.methods {
            if let Err(e) = m.with_learning_rate(1.0).validate() {
                problems.push(format!("{}: {e}", m.label()));
            }
        }
        if let Err(e) = (StopCriteria { max_steps: self.budget().max(1), ..self.criteria }).validate() {
            problems.push(e.to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Usage(problems.join("; ")))
        }
    }
}

/// Convergence counts of one cell at budget `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointStats {
    pub t: u64,
    pub fraction_converged: f64,
    pub n_converged: usize,
    pub n_diverged: usize,
    /// Runs still going at step `t`.
    pub n_budget: usize,
}

/// Population averages at one step, terminated runs held at their final value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub step: u64,
    /// Mean `V` over runs that did not diverge (NaN if all diverged).
    pub mean_value: f64,
    /// Mean running-minimum `V` over all runs.
    pub mean_best_value: f64,
    /// Number of runs in `mean_value`.
    pub n_value_runs: usize,
    /// Mean cumulative wall time in seconds. Not reproducible.
    pub mean_wall_time: f64,
}

/// Aggregates of one (method, eta) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub method: String,
    pub eta: f64,
    pub checkpoints: Vec<CheckpointStats>,
    pub curve: Vec<CurvePoint>,
    pub runs: Vec<RunRecord>,
}

impl CellResult {
    pub fn fraction(&self, t: u64) -> Option<f64> {
        self.checkpoints.iter().find(|c| c.t == t).map(|c| c.fraction_converged)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub function: String,
    pub starts: Vec<ParameterVector>,
    pub starts_digest: String,
    /// Method-major, then eta in grid order.
    pub cells: Vec<CellResult>,
}

impl SweepResult {
    pub fn cell(&self, method: &str, eta: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.method == method && c.eta == eta)
    }

    /// `max over eta of f_D(eta, t)` for `method`.
    pub fn best_fraction(&self, method: &str, t: u64) -> Option<f64> {
        self.cells.iter().filter(|c| c.method == method).filter_map(|c| c.fraction(t)).reduce(f64::max)
    }
}

fn aggregate(plan: &ExperimentPlan, method: String, eta: f64, mut runs: Vec<RunRecord>) -> CellResult {
    let n = runs.len();
    let checkpoints = plan
        .t_checkpoints
        .iter()
        .map(|&t| {
            let n_converged = runs.iter().filter(|r| r.converged_within(t)).count();
            let n_diverged = runs.iter().filter(|r| r.diverged_within(t)).count();
            CheckpointStats {
                t,
                fraction_converged: n_converged as f64 / n as f64,
                n_converged,
                n_diverged,
                n_budget: n - n_converged - n_diverged,
            }
        })
        .collect();

    let stride = plan.curve_stride;
    let points = plan.budget() / stride + 1;
    let curve = (0..points)
        .map(|k| {
            let step = k * stride;
            let (mut value_sum, mut best_sum, mut time_sum, mut n_value) = (0.0, 0.0, 0.0, 0usize);
            for r in &runs {
                let (value, best, elapsed) = match r.value_series.get(k as usize) {
                    Some(p) => (p.value, p.best_value, p.elapsed),
                    None => (r.final_value, r.best_value, r.wall_time),
                };
                if !r.termination.is_diverged() {
                    value_sum += value;
                    n_value += 1;
                }
                best_sum += best;
                time_sum += elapsed;
            }
            CurvePoint {
                step,
                mean_value: if n_value > 0 { value_sum / n_value as f64 } else { f64::NAN },
                mean_best_value: best_sum / n as f64,
                n_value_runs: n_value,
                mean_wall_time: time_sum / n as f64,
            }
        })
        .collect();

    for r in &mut runs {
        r.value_series = Vec::new();
    }
    CellResult { method, eta, checkpoints, curve, runs }
}

/// Runs every (method, eta, start) trajectory of `plan`.
///
/// `workers` sizes a dedicated thread pool (`None` = all cores). Cells run one
/// after another with their starts spread across the pool.
pub fn sweep(plan: &ExperimentPlan, workers: Option<usize>) -> Result<SweepResult, Error> {
    plan.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| Error::Internal(format!("thread pool: {e}")))?;

    let starts = sample_starts(plan.function.domain(), plan.n_starts, plan.seed);
    let criteria = StopCriteria { max_steps: plan.budget(), ..plan.criteria };
    let options = RunOptions { series_stride: plan.curve_stride, trace: false };

    let mut cells = Vec::with_capacity(plan.methods.len() * plan.eta_grid.len());
    for method in &plan.methods {
        for &eta in &plan.eta_grid {
            let config = method.with_learning_rate(eta);
            let runs: Vec<RunRecord> = pool.install(|| {
                starts
                    .par_iter()
                    .map(|s| run_trajectory(&plan.function, config, s, &criteria, options))
                    .collect::<Result<_, _>>()
            })?;
            cells.push(aggregate(plan, config.label(), eta, runs));
        }
    }

    Ok(SweepResult {
        function: plan.function.name().to_string(),
        starts_digest: starts_digest(&starts),
        starts,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use power_gd_core::objectives::{FunctionKind, Interval};
    use power_gd_core::optimizers::Method;

    fn unit_square() -> Domain {
        Domain::square(Interval::new(0.0, 1.0).unwrap(), 2)
    }

    #[test]
    fn sampling_is_deterministic_and_order_free() {
        let a = sample_starts(&unit_square(), 3, 42);
        let b = sample_starts(&unit_square(), 3, 42);
        assert_eq!(a, b);
        assert_eq!(sample_start(&unit_square(), 42, 2), a[2]);
        assert_ne!(a, sample_starts(&unit_square(), 3, 43));
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn samples_stay_in_domain() {
        let d = CostFunction::new(FunctionKind::Beale).domain().clone();
        assert!(sample_starts(&d, 10_000, 7).iter().all(|p| d.contains(p)));
    }

    #[test]
    fn sample_mean_is_centered() {
        let pts = sample_starts(&unit_square(), 100_000, 11);
        for i in 0..2 {
            let mean = pts.iter().map(|p| p[i]).sum::<f64>() / pts.len() as f64;
            assert!((mean - 0.5).abs() < 0.01, "{mean}");
        }
    }

    #[test]
    fn start_at_minimum_converges_immediately() {
        for kind in FunctionKind::BENCHMARKS {
            let f = CostFunction::new(kind);
            for m in Method::ALL {
                let r = run_trajectory(&f, OptimizerConfig::power(m), &f.global_minimum(), &StopCriteria::default(), RunOptions::default()).unwrap();
                assert_eq!(r.termination, TerminationReason::ConvergedValue);
                assert_eq!(r.steps_used, 0);
            }
        }
    }

    #[test]
    fn adam_near_minimum_of_v1() {
        let f = CostFunction::new(FunctionKind::V1);
        let start = ParameterVector::new(vec![0.1, 0.1]).unwrap();
        let r = run_trajectory(&f, OptimizerConfig::new(Method::Adam).with_learning_rate(0.1), &start, &StopCriteria::default(), RunOptions::default()).unwrap();
        assert_eq!(r.termination, TerminationReason::ConvergedValue);
        assert!(r.steps_used <= 1000, "{}", r.steps_used);
        assert!(r.best_value <= f.evaluate(&start).unwrap());
    }

    #[test]
    fn h_gd_quadratic_ends_on_orbit() {
        let f = CostFunction::quadratic(1.0).unwrap();
        let start = ParameterVector::new(vec![0.7]).unwrap();
        let r = run_trajectory(&f, OptimizerConfig::power(Method::Gd).with_learning_rate(1.0), &start, &StopCriteria::with_budget(1_000_000), RunOptions::default()).unwrap();
        assert_eq!(r.termination, TerminationReason::ConvergedOrbit);
        let orbit = r.orbit.unwrap();
        assert!((orbit.amplitude[0] - 0.25).abs() < 1e-8);
        assert!(orbit.midpoint_value < 1e-12);
    }

    #[test]
    fn runaway_plain_gd_is_recorded_not_raised() {
        let f = CostFunction::quadratic(1.0).unwrap();
        let start = ParameterVector::new(vec![0.5]).unwrap();
        let r = run_trajectory(&f, OptimizerConfig::new(Method::Gd).with_learning_rate(3.0), &start, &StopCriteria::with_budget(100), RunOptions::default()).unwrap();
        assert_eq!(r.termination, TerminationReason::DivergedRadius);
        assert!(r.steps_used <= 100);
    }

    #[test]
    fn trivial_sweep_at_minimum() {
        let f = CostFunction::new(FunctionKind::V3);
        let mut plan = ExperimentPlan::new(f.clone(), vec![OptimizerConfig::new(Method::Adam)], 0);
        plan.eta_grid = vec![0.1];
        plan.n_starts = 1;
        plan.function = CostFunction::with_domain(FunctionKind::V3, Domain::square(Interval::new(-1e-9, 1e-9).unwrap(), 2)).unwrap();
        let res = sweep(&plan, Some(1)).unwrap();
        for c in &res.cells[0].checkpoints {
            assert_eq!(c.fraction_converged, 1.0);
        }
    }

    #[test]
    fn plan_validation() {
        let f = CostFunction::new(FunctionKind::V1);
        let ok = ExperimentPlan::new(f, vec![OptimizerConfig::new(Method::Nag)], 1);
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.t_checkpoints = vec![100, 100];
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.eta_grid = vec![0.1, -1.0];
        assert!(bad.validate().is_err());
        let mut bad = ok;
        bad.n_starts = 0;
        assert!(bad.validate().is_err());
    }
}
