//! Power-gradient descent.
//!
//! Every gradient component `g` is replaced by `sign(g) * |g|^H` with
//! `0 < H <= 1` before it reaches the update rule. Sub-unit components are
//! amplified and super-unit components are damped, which speeds up motion on
//! plateaus and stabilizes it on steep walls. `H = 1` recovers the standard
//! methods exactly.
//!
//! This crate is `no_std` (with `alloc`) and holds only the numerics:
//!
//! - [`transform`]: vector newtypes and the power transform itself.
//! - [`objectives`]: the two-dimensional benchmark landscapes and the 1-D quadratic,
//!   with analytic gradients.
//! - [`optimizers`]: h-GD, h-NAG, h-ADAM, h(t)-ADAM and h-AMSGrad behind one stepping contract.
//! - [`convergence`]: value threshold, 2-state orbit test, divergence and budget checks.
//!
//! IO, sampling, sweeps and the command line live in the `power-gd` crate.
#![no_std]

extern crate alloc;

pub mod convergence;
pub mod error;
pub mod objectives;
pub mod optimizers;
pub mod transform;

pub use convergence::{
    check, orbit_diagnostics, quadratic_orbit, Iterate, OrbitDiagnostics, QuadraticOrbitReport, StopCriteria, Termination,
    TerminationReason,
};
pub use error::{ConfigError, Error, StepError};
pub use objectives::{contour_grid, CostFunction, Domain, FunctionKind, GridSample, Interval, Objective};
pub use optimizers::{make_optimizer, AmsGradCap, Method, Optimizer, OptimizerConfig, OptimizerState};
pub use transform::{power_transform, power_transform_into, GradientVector, ParameterVector, PowerExponent};
