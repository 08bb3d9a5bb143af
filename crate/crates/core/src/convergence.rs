//! Stopping rules.
//!
//! Vanilla h-GD on `kappa theta^2 / 2` never settles on the minimum: it locks
//! into a 2-cycle `+-eta^2 kappa / 4`. On such a cycle consecutive power
//! gradients cancel, so `|h(theta_t) + h(theta_{t-1})| ~ 0` detects it, and the
//! midpoint `(theta_t + theta_{t-1}) / 2` estimates the minimizer.

use alloc::vec::Vec;
use core::fmt;

use crate::error::Error;
use crate::objectives::Objective;
use crate::optimizers::{make_optimizer, Method, OptimizerConfig};
use crate::objectives::CostFunction;
use crate::transform::{max_norm, power_scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCriteria {
    /// Success when `V(theta_t)` drops below this.
    pub value_tolerance: f64,
    /// Orbit detected when `max_i |h_t(i) + h_{t-1}(i)|` drops below this.
    pub orbit_tolerance: f64,
    /// Budget `T`: stop after this many updates.
    pub max_steps: u64,
    /// Divergence when `max_i |theta(i)|` exceeds this.
    pub divergence_radius: f64,
}

impl StopCriteria {
    pub const DEFAULT_VALUE_TOLERANCE: f64 = 1e-4;
    pub const DEFAULT_ORBIT_TOLERANCE: f64 = 1e-8;
    pub const DEFAULT_DIVERGENCE_RADIUS: f64 = 1e8;

    pub fn with_budget(max_steps: u64) -> Self {
        Self { max_steps, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let positive = |v: f64| v > 0.0 && !v.is_nan();
        if !positive(self.value_tolerance) || !positive(self.orbit_tolerance) || !positive(self.divergence_radius) {
            return Err(Error::Usage(alloc::format!("stop criteria thresholds must be strictly positive: {self:?}")));
        }
        if self.max_steps == 0 {
            return Err(Error::Usage("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self {
            value_tolerance: Self::DEFAULT_VALUE_TOLERANCE,
            orbit_tolerance: Self::DEFAULT_ORBIT_TOLERANCE,
            max_steps: 10_000,
            divergence_radius: Self::DEFAULT_DIVERGENCE_RADIUS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TerminationReason {
    ConvergedValue,
    ConvergedOrbit,
    DivergedNonfinite,
    DivergedRadius,
    BudgetExhausted,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ConvergedValue => "CONVERGED_VALUE",
            Self::ConvergedOrbit => "CONVERGED_ORBIT",
            Self::DivergedNonfinite => "DIVERGED_NONFINITE",
            Self::DivergedRadius => "DIVERGED_RADIUS",
            Self::BudgetExhausted => "BUDGET_EXHAUSTED",
        }
    }

    pub fn is_converged(self) -> bool {
        matches!(self, Self::ConvergedValue | Self::ConvergedOrbit)
    }

    pub fn is_diverged(self) -> bool {
        matches!(self, Self::DivergedNonfinite | Self::DivergedRadius)
    }
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// State of the last two iterates seen as a candidate 2-cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitDiagnostics {
    pub orbit_detected: bool,
    /// `max_i |h_t(i) + h_{t-1}(i)|`.
    pub orbit_sum: f64,
    /// `|theta_t(i) - theta_{t-1}(i)| / 2` per component.
    pub amplitude: Vec<f64>,
    pub midpoint: Vec<f64>,
    pub midpoint_value: f64,
}

/// An iterate together with its power gradient.
#[derive(Debug, Clone, Copy)]
pub struct Iterate<'a> {
    pub theta: &'a [f64],
    pub power_gradient: &'a [f64],
}

/// Outcome of a [`check`] that stopped the run.
#[derive(Debug, Clone, PartialEq)]
pub struct Termination {
    pub reason: TerminationReason,
    /// Present whenever the orbit test holds, even if another rule fired first.
    pub orbit: Option<OrbitDiagnostics>,
}

/// Orbit diagnostics of two consecutive iterates.
pub fn orbit_diagnostics<O: Objective + ?Sized>(
    f: &O,
    current: Iterate<'_>,
    previous: Iterate<'_>,
    orbit_tolerance: f64,
) -> OrbitDiagnostics {
    let sum: Vec<f64> = current.power_gradient.iter().zip(previous.power_gradient).map(|(a, b)| a + b).collect();
    let orbit_sum = max_norm(&sum);
    let midpoint: Vec<f64> = current.theta.iter().zip(previous.theta).map(|(a, b)| 0.5 * (a + b)).collect();
    let amplitude = current.theta.iter().zip(previous.theta).map(|(a, b)| 0.5 * libm::fabs(a - b)).collect();
    let midpoint_value = f.value(&midpoint);
    OrbitDiagnostics { orbit_detected: orbit_sum < orbit_tolerance, orbit_sum, amplitude, midpoint, midpoint_value }
}

/// Applies the stopping rules to iterate number `step` (0 = starting point).
///
/// Priority: value threshold, orbit (2-cycle straddling a point with value
/// below the threshold), non-finite state, escape beyond the divergence
/// radius, exhausted budget. Returns `None` to keep going.
pub fn check<O: Objective + ?Sized>(
    f: &O,
    current: Iterate<'_>,
    value: f64,
    previous: Option<Iterate<'_>>,
    criteria: &StopCriteria,
    step: u64,
) -> Option<Termination> {
    let orbit = previous.and_then(|prev| {
        let d = orbit_diagnostics(f, current, prev, criteria.orbit_tolerance);
        d.orbit_detected.then_some(d)
    });

    let reason = if value < criteria.value_tolerance {
        TerminationReason::ConvergedValue
    } else if orbit.as_ref().is_some_and(|d| d.midpoint_value < criteria.value_tolerance) {
        TerminationReason::ConvergedOrbit
    } else if !value.is_finite()
        || current.theta.iter().chain(current.power_gradient).any(|x| !x.is_finite())
    {
        TerminationReason::DivergedNonfinite
    } else if max_norm(current.theta) > criteria.divergence_radius {
        TerminationReason::DivergedRadius
    } else if step >= criteria.max_steps {
        TerminationReason::BudgetExhausted
    } else {
        return None;
    };
    Some(Termination { reason, orbit })
}

/// Result of running vanilla h-GD (`H = 1/2`) on `kappa theta^2 / 2` until its
/// 2-cycle is detected.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticOrbitReport {
    pub kappa: f64,
    pub learning_rate: f64,
    pub start: f64,
    /// `eta^2 kappa / 4`.
    pub predicted_amplitude: f64,
    /// `|theta|` at the last iterate.
    pub measured_amplitude: f64,
    pub steps: u64,
    pub orbit_detected: bool,
    pub orbit_sum: f64,
    pub theta: f64,
    pub previous_theta: f64,
    pub midpoint: f64,
    pub midpoint_value: f64,
}

/// Iterates vanilla h-GD on the quadratic, ignoring the value threshold (the
/// cycle itself may sit below it), until the orbit test fires or `max_steps`
/// updates have run.
pub fn quadratic_orbit(
    kappa: f64,
    learning_rate: f64,
    start: f64,
    max_steps: u64,
    orbit_tolerance: f64,
) -> Result<QuadraticOrbitReport, Error> {
    let f = CostFunction::quadratic(kappa)?;
    let cfg = OptimizerConfig::power(Method::Gd).with_learning_rate(learning_rate);
    let mut opt = make_optimizer(cfg, 1)?;
    if !start.is_finite() {
        return Err(Error::NonFinite { index: 0, value: start });
    }
    let h = opt.exponent();
    let mut theta = [start];
    let mut grad = [0.0];
    let mut prev = start;
    let mut prev_h = f64::NAN;
    let mut steps = 0;
    let mut diag = None;
    loop {
        f.gradient_into(&theta, &mut grad);
        let ht = power_scalar(grad[0], h);
        if steps > 0 {
            let d = orbit_diagnostics(
                &f,
                Iterate { theta: &theta, power_gradient: &[ht] },
                Iterate { theta: &[prev], power_gradient: &[prev_h] },
                orbit_tolerance,
            );
            let detected = d.orbit_detected;
            diag = Some(d);
            if detected {
                break;
            }
        }
        if steps >= max_steps {
            break;
        }
        prev = theta[0];
        prev_h = ht;
        opt.step_with_gradient(&f, &mut theta, &grad)?;
        steps += 1;
    }
    let (orbit_detected, orbit_sum, midpoint, midpoint_value) = match diag {
        Some(d) => (d.orbit_detected, d.orbit_sum, d.midpoint[0], d.midpoint_value),
        None => (false, f64::NAN, theta[0], f.value(&theta)),
    };
    Ok(QuadraticOrbitReport {
        kappa,
        learning_rate,
        start,
        predicted_amplitude: learning_rate * learning_rate * kappa / 4.0,
        measured_amplitude: libm::fabs(theta[0]),
        steps,
        orbit_detected,
        orbit_sum,
        theta: theta[0],
        previous_theta: prev,
        midpoint,
        midpoint_value,
    })
}
