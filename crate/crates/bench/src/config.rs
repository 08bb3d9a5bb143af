//! TOML experiment files.
//!
//! ```toml
//! [output]
//! dir = "results"
//!
//! [criteria]               # optional, defaults shown
//! value_tolerance = 1e-4
//! orbit_tolerance = 1e-8
//! divergence_radius = 1e8
//!
//! [defaults]               # optional optimizer hyperparameter overrides
//! momentum_damping = 0.99
//! beta1 = 0.9
//! beta2 = 0.99
//! beta3 = 0.999
//! epsilon = 1e-8
//! amsgrad_cap_mode = "paper" # or "accumulated"
//!
//! [domains]                # optional search-box overrides, one [lo, hi] per axis
//! v3 = [[-2.0, 2.0], [-2.0, 2.0]]
//!
//! [[experiment]]
//! function = "v3"
//! methods = ["nag", "h_nag", { method = "adam", initial_exponent = 0.75 }]
//! n_starts = 100
//! eta_grid = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0]
//! t_checkpoints = [100, 1000, 10000]
//! seed = 1
//! curve_stride = 10
//! contour_resolution = 0   # > 0 also writes contour.csv
//! ```
//!
//! Unknown keys are rejected with their line and column.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use power_gd_core::convergence::StopCriteria;
use power_gd_core::objectives::{CostFunction, Domain, FunctionKind, Interval};
use power_gd_core::optimizers::{AmsGradCap, OptimizerConfig};
use power_gd_core::transform::PowerExponent;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::harness::ExperimentPlan;
use crate::Error;

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    criteria: RawCriteria,
    #[serde(default)]
    defaults: RawHyper,
    #[serde(default)]
    domains: BTreeMap<String, Vec<[f64; 2]>>,
    #[serde(default, rename = "experiment")]
    experiments: Vec<RawExperiment>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCriteria {
    value_tolerance: Option<f64>,
    orbit_tolerance: Option<f64>,
    divergence_radius: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHyper {
    momentum_damping: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    beta3: Option<f64>,
    epsilon: Option<f64>,
    amsgrad_cap_mode: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMethodTable {
    method: String,
    initial_exponent: Option<f64>,
    momentum_damping: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    beta3: Option<f64>,
    epsilon: Option<f64>,
    amsgrad_cap_mode: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawMethod {
    Name(String),
    Table(RawMethodTable),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    function: String,
    kappa: Option<f64>,
    methods: Vec<RawMethod>,
    n_starts: Option<usize>,
    eta_grid: Option<Vec<f64>>,
    t_checkpoints: Option<Vec<u64>>,
    seed: Option<u64>,
    curve_stride: Option<u64>,
    contour_resolution: Option<usize>,
}

/// One `[[experiment]]` entry, resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub plan: ExperimentPlan,
    pub contour_resolution: Option<usize>,
}

/// A parsed and validated configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub path: PathBuf,
    /// SHA-256 of the file contents.
    pub hash: String,
    pub output_dir: Option<PathBuf>,
    pub experiments: Vec<Experiment>,
}

impl ConfigFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, Error> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config { path: path.to_path_buf(), message: format!("cannot read: {e}") })?;
        Self::parse(&text, path)
    }

    /// Parses `text`; `path` is only used in messages.
    pub fn parse(text: &str, path: impl AsRef<Path>) -> Result<Self, Error> {
        let path = path.as_ref().to_path_buf();
        let fail = |message: String| Error::Config { path: path.clone(), message };
        let raw: RawConfig = toml::from_str(text).map_err(|e| fail(e.to_string()))?;

        let base = StopCriteria::default();
        let criteria = StopCriteria {
            value_tolerance: raw.criteria.value_tolerance.unwrap_or(base.value_tolerance),
            orbit_tolerance: raw.criteria.orbit_tolerance.unwrap_or(base.orbit_tolerance),
            divergence_radius: raw.criteria.divergence_radius.unwrap_or(base.divergence_radius),
            ..base
        };

        let mut domains = BTreeMap::new();
        for (name, bounds) in &raw.domains {
            let kind: FunctionKind = name.parse().map_err(|e: power_gd_core::Error| fail(format!("[domains]: {e}")))?;
            let intervals = bounds
                .iter()
                .map(|[lo, hi]| Interval::new(*lo, *hi))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| fail(format!("[domains] {name}: {e}")))?;
            let domain = Domain::new(intervals).map_err(|e| fail(format!("[domains] {name}: {e}")))?;
            domains.insert(kind.name(), domain);
        }

        if raw.experiments.is_empty() {
            return Err(fail("no [[experiment]] entries".into()));
        }
        let mut experiments = Vec::new();
        for (i, exp) in raw.experiments.into_iter().enumerate() {
            let ctx = |e: String| fail(format!("experiment #{} ({}): {e}", i + 1, exp.function));
            let mut kind: FunctionKind = exp.function.parse().map_err(|e: power_gd_core::Error| ctx(e.to_string()))?;
            if let Some(kappa) = exp.kappa {
                if !matches!(kind, FunctionKind::Quadratic { .. }) {
                    return Err(ctx("kappa only applies to the quadratic".into()));
                }
                kind = FunctionKind::quadratic(kappa).map_err(|e| ctx(e.to_string()))?;
            }
            let function = match domains.get(kind.name()) {
                Some(d) => CostFunction::with_domain(kind, d.clone()).map_err(|e| ctx(e.to_string()))?,
                None => CostFunction::new(kind),
            };
            let methods = exp
                .methods
                .iter()
                .map(|m| resolve_method(m, &raw.defaults))
                .collect::<Result<Vec<_>, _>>()
                .map_err(ctx)?;
            let mut plan = ExperimentPlan::new(function, methods, exp.seed.unwrap_or(DEFAULT_SEED));
            plan.criteria = criteria;
            if let Some(n) = exp.n_starts {
                plan.n_starts = n;
            }
            if let Some(g) = exp.eta_grid {
                plan.eta_grid = g;
            }
            if let Some(t) = exp.t_checkpoints {
                plan.t_checkpoints = t;
            }
            if let Some(s) = exp.curve_stride {
                plan.curve_stride = s;
            }
            plan.validate().map_err(|e| ctx(e.to_string()))?;
            let contour_resolution = exp.contour_resolution.filter(|r| *r > 0);
            if let Some(r) = contour_resolution {
                if r < 2 || plan.function.dimension() != 2 {
                    return Err(ctx("contour_resolution needs a 2-D function and a value of at least 2".into()));
                }
            }
            experiments.push(Experiment { plan, contour_resolution });
        }

        Ok(Self {
            hash: hex::encode(Sha256::digest(text.as_bytes())),
            path,
            output_dir: raw.output.dir,
            experiments,
        })
    }
}

fn apply_hyper(
    cfg: &mut OptimizerConfig,
    momentum_damping: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    beta3: Option<f64>,
    epsilon: Option<f64>,
    amsgrad_cap: Option<&str>,
) -> Result<(), String> {
    if let Some(v) = momentum_damping {
        cfg.momentum_damping = v;
    }
    if let Some(v) = beta1 {
        cfg.beta1 = v;
    }
    if let Some(v) = beta2 {
        cfg.beta2 = v;
    }
    if let Some(v) = beta3 {
        cfg.beta3 = v;
    }
    if let Some(v) = epsilon {
        cfg.epsilon = v;
    }
    if let Some(s) = amsgrad_cap {
        cfg.amsgrad_cap = s.parse::<AmsGradCap>().map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn resolve_method(raw: &RawMethod, defaults: &RawHyper) -> Result<OptimizerConfig, String> {
    let name = match raw {
        RawMethod::Name(n) => n.as_str(),
        RawMethod::Table(t) => t.method.as_str(),
    };
    let mut cfg = OptimizerConfig::from_name(name).map_err(|e| e.to_string())?;
    let d = defaults;
    apply_hyper(&mut cfg, d.momentum_damping, d.beta1, d.beta2, d.beta3, d.epsilon, d.amsgrad_cap_mode.as_deref())?;
    if let RawMethod::Table(t) = raw {
        apply_hyper(&mut cfg, t.momentum_damping, t.beta1, t.beta2, t.beta3, t.epsilon, t.amsgrad_cap_mode.as_deref())?;
        if let Some(h0) = t.initial_exponent {
            cfg.initial_exponent = PowerExponent::new(h0).map_err(|e| e.to_string())?;
        }
    }
    cfg.with_learning_rate(1.0).validate().map_err(|e| format!("{name}: {e}"))?;
    Ok(cfg)
}
