//! Update rules.
//!
//! Every method consumes the power gradient `h = sign(g)|g|^H` instead of the
//! raw gradient `g`; with `H = 1` each reduces to its textbook form.
//!
//! - `Gd`: `theta <- theta - eta * h(theta)`
//! - `Nag`: gradient at the look-ahead point `theta - gamma * v`, then
//!   `v <- gamma * v + eta * h`, `theta <- theta - v`
//! - `Adam`: bias-corrected first and second moments of `h`, fixed `H`
//! - `AdamScheduled`: as `Adam`, but `H_t = beta3 * H_{t-1} + (1 - beta3)` is
//!   updated at the start of every step, driving `H` from `H_0` towards 1
//! - `AmsGrad`: as `Adam` without bias correction on the second moment, which
//!   is capped by a max rule (see [`AmsGradCap`])

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{ConfigError, Error, StepError};
use crate::objectives::Objective;
use crate::transform::{power_scalar, ParameterVector, PowerExponent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Gd,
    Nag,
    Adam,
    AdamScheduled,
    AmsGrad,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Gd, Method::Nag, Method::Adam, Method::AdamScheduled, Method::AmsGrad];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::Nag => "nag",
            Method::Adam => "adam",
            Method::AdamScheduled => "adam_scheduled",
            Method::AmsGrad => "amsgrad",
        }
    }

    /// `H_0` used when the plain method name is given. The scheduled variant
    /// only makes sense with `H_0 < 1`.
    pub fn default_exponent(self) -> PowerExponent {
        match self {
            Method::AdamScheduled => PowerExponent::HALF,
            _ => PowerExponent::ONE,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown method `{s}` (expected gd, nag, adam, adam_scheduled, amsgrad, optionally prefixed with h_)")))
    }
}

/// Second-moment cap used by AMSGrad.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AmsGradCap {
    /// `s_hat_t = max(s_t, s_{t-1})`: only two consecutive raw moments are compared.
    #[default]
    Paper,
    /// `s_hat_t = max(s_hat_{t-1}, s_t)`: running maximum.
    Accumulated,
}

impl AmsGradCap {
    pub fn name(self) -> &'static str {
        match self {
            AmsGradCap::Paper => "paper",
            AmsGradCap::Accumulated => "accumulated",
        }
    }
}

impl FromStr for AmsGradCap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "paper" => Ok(Self::Paper),
            "accumulated" => Ok(Self::Accumulated),
            other => Err(Error::Usage(format!("unknown amsgrad cap mode `{other}` (expected paper or accumulated)"))),
        }
    }
}

/// Hyperparameters of one method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub method: Method,
    pub learning_rate: f64,
    pub momentum_damping: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub epsilon: f64,
    pub initial_exponent: PowerExponent,
    pub amsgrad_cap: AmsGradCap,
}

impl OptimizerConfig {
    pub const DEFAULT_LEARNING_RATE: f64 = 0.1;
    pub const DEFAULT_MOMENTUM_DAMPING: f64 = 0.99;
    pub const DEFAULT_BETA1: f64 = 0.9;
    pub const DEFAULT_BETA2: f64 = 0.99;
    pub const DEFAULT_BETA3: f64 = 0.999;
    pub const DEFAULT_EPSILON: f64 = 1e-8;

    /// Standard method (`H_0 = 1`, except `AdamScheduled` which starts at 1/2).
    pub fn new(method: Method) -> Self {
        Self {
            method,
            learning_rate: Self::DEFAULT_LEARNING_RATE,
            momentum_damping: Self::DEFAULT_MOMENTUM_DAMPING,
            beta1: Self::DEFAULT_BETA1,
            beta2: Self::DEFAULT_BETA2,
            beta3: Self::DEFAULT_BETA3,
            epsilon: Self::DEFAULT_EPSILON,
            initial_exponent: method.default_exponent(),
            amsgrad_cap: AmsGradCap::default(),
        }
    }

    /// Power-gradient variant with `H_0 = 1/2`.
    pub fn power(method: Method) -> Self {
        Self::new(method).with_exponent(PowerExponent::HALF)
    }

    /// Parses `gd`, `nag`, `adam`, `adam_scheduled`, `amsgrad` and their
    /// `h_`-prefixed aliases (which set `H_0 = 1/2`).
    pub fn from_name(name: &str) -> Result<Self, Error> {
        let lower = name.trim().to_ascii_lowercase();
        match lower.strip_prefix("h_") {
            Some(base) => Ok(Self::power(base.parse()?)),
            None => Ok(Self::new(lower.parse()?)),
        }
    }

    pub fn with_learning_rate(mut self, eta: f64) -> Self {
        self.learning_rate = eta;
        self
    }

    pub fn with_exponent(mut self, h0: PowerExponent) -> Self {
        self.initial_exponent = h0;
        self
    }

    pub fn with_momentum_damping(mut self, gamma: f64) -> Self {
        self.momentum_damping = gamma;
        self
    }

    pub fn with_amsgrad_cap(mut self, cap: AmsGradCap) -> Self {
        self.amsgrad_cap = cap;
        self
    }

    /// Short identifier: the method name, `h_`-prefixed when `H_0 = 1/2`
    /// differs from the method default, with an explicit `h0` otherwise.
    pub fn label(&self) -> String {
        let h0 = self.initial_exponent;
        if h0 == self.method.default_exponent() {
            self.method.name().to_string()
        } else if h0 == PowerExponent::HALF {
            format!("h_{}", self.method.name())
        } else {
            format!("{}[h0={}]", self.method.name(), h0.value())
        }
    }

    /// Checks every range, collecting all violations.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut violations = Vec::new();
        let mut unit = |name: &str, v: f64| {
            if !(0.0..1.0).contains(&v) {
                violations.push(format!("{name} = {v} must lie in [0, 1)"));
            }
        };
        unit("momentum_damping", self.momentum_damping);
        unit("beta1", self.beta1);
        unit("beta2", self.beta2);
        unit("beta3", self.beta3);
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            violations.push(format!("learning_rate = {} must be finite and positive", self.learning_rate));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            violations.push(format!("epsilon = {} must be finite and positive", self.epsilon));
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { violations })
        }
    }
}

/// Mutable per-trajectory state. All vectors start at zero, `t` at 0 and the
/// exponent at `H_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    t: u64,
    velocity: Vec<f64>,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    amsgrad_cap: Vec<f64>,
    exponent: f64,
}

impl OptimizerState {
    fn zeroed(dimension: usize, h0: PowerExponent) -> Self {
        Self {
            t: 0,
            velocity: vec![0.0; dimension],
            first_moment: vec![0.0; dimension],
            second_moment: vec![0.0; dimension],
            amsgrad_cap: vec![0.0; dimension],
            exponent: h0.value(),
        }
    }

    /// Number of completed steps.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    /// `s_hat` of the last AMSGrad step.
    pub fn amsgrad_cap(&self) -> &[f64] {
        &self.amsgrad_cap
    }

    /// `H_t`: the exponent used by the most recent step (`H_0` before the first).
    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn dimension(&self) -> usize {
        self.velocity.len()
    }
}

/// A configured method together with its running state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    state: OptimizerState,
    lookahead: Vec<f64>,
    scratch: Vec<f64>,
}

/// Validates `config` and builds a zero-initialized optimizer of the given dimension.
pub fn make_optimizer(config: OptimizerConfig, dimension: usize) -> Result<Optimizer, Error> {
    if dimension == 0 {
        return Err(Error::EmptyVector);
    }
    config.validate()?;
    Ok(Optimizer {
        config,
        state: OptimizerState::zeroed(dimension, config.initial_exponent),
        lookahead: vec![0.0; dimension],
        scratch: vec![0.0; dimension],
    })
}

impl Optimizer {
    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn dimension(&self) -> usize {
        self.state.dimension()
    }

    /// Whether the method evaluates its own gradient (at the look-ahead
    /// point) instead of using the gradient at the current iterate.
    pub fn needs_lookahead(&self) -> bool {
        self.config.method == Method::Nag
    }

    /// The exponent the next step will apply, for methods with a fixed `H`;
    /// for the scheduled variant, the exponent of the last step.
    pub fn exponent(&self) -> f64 {
        self.state.exponent
    }

    /// Advances `theta` in place by one step of the configured method.
    ///
    /// `grad_at_theta` must be the gradient of `f` at `theta`; it is ignored
    /// by NAG, which evaluates `f` at its look-ahead point. On error `theta`
    /// holds the non-finite result and the optimizer must be discarded.
    pub fn step_with_gradient<O: Objective + ?Sized>(
        &mut self,
        f: &O,
        theta: &mut [f64],
        grad_at_theta: &[f64],
    ) -> Result<(), StepError> {
        debug_assert_eq!(theta.len(), self.dimension());
        let cfg = self.config;
        let st = &mut self.state;
        st.t += 1;
        let eta = cfg.learning_rate;

        match cfg.method {
            Method::Gd => {
                let h = st.exponent;
                for (x, &g) in theta.iter_mut().zip(grad_at_theta) {
                    *x -= eta * power_scalar(g, h);
                }
            }
            Method::Nag => {
                let gamma = cfg.momentum_damping;
                for ((p, x), v) in self.lookahead.iter_mut().zip(theta.iter()).zip(&st.velocity) {
                    *p = x - gamma * v;
                }
                f.gradient_into(&self.lookahead, &mut self.scratch);
                if self.scratch.iter().any(|g| !g.is_finite()) {
                    return Err(StepError { step: st.t });
                }
                let h = st.exponent;
                for ((x, v), &g) in theta.iter_mut().zip(st.velocity.iter_mut()).zip(&self.scratch) {
                    *v = gamma * *v + eta * power_scalar(g, h);
                    *x -= *v;
                }
            }
            Method::Adam | Method::AdamScheduled => {
                if cfg.method == Method::AdamScheduled {
                    st.exponent = cfg.beta3 * st.exponent + (1.0 - cfg.beta3);
                }
                let h = st.exponent;
                let t = st.t as f64;
                let c1 = 1.0 - libm::pow(cfg.beta1, t);
                let c2 = 1.0 - libm::pow(cfg.beta2, t);
                for (i, x) in theta.iter_mut().enumerate() {
                    let hg = power_scalar(grad_at_theta[i], h);
                    let m = &mut st.first_moment[i];
                    let s = &mut st.second_moment[i];
                    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * hg;
                    *s = cfg.beta2 * *s + (1.0 - cfg.beta2) * hg * hg;
                    let m_hat = *m / c1;
                    let s_hat = *s / c2;
                    *x -= eta * m_hat / (libm::sqrt(s_hat) + cfg.epsilon);
                }
            }
            Method::AmsGrad => {
                let h = st.exponent;
                let c1 = 1.0 - libm::pow(cfg.beta1, st.t as f64);
                for (i, x) in theta.iter_mut().enumerate() {
                    let hg = power_scalar(grad_at_theta[i], h);
                    let m = &mut st.first_moment[i];
                    let s_prev = st.second_moment[i];
                    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * hg;
                    let s = cfg.beta2 * s_prev + (1.0 - cfg.beta2) * hg * hg;
                    st.second_moment[i] = s;
                    let cap = match cfg.amsgrad_cap {
                        AmsGradCap::Paper => s.max(s_prev),
                        AmsGradCap::Accumulated => s.max(st.amsgrad_cap[i]),
                    };
                    st.amsgrad_cap[i] = cap;
                    *x -= eta * (*m / c1) / (libm::sqrt(cap) + cfg.epsilon);
                }
            }
        }

        if theta.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(StepError { step: st.t })
        }
    }

    /// Checked single step on a [`ParameterVector`]. `theta` is only replaced
    /// when the new point is finite.
    pub fn step<O: Objective + ?Sized>(&mut self, f: &O, theta: &mut ParameterVector) -> Result<(), Error> {
        if theta.dimension() != self.dimension() || f.dimension() != self.dimension() {
            return Err(Error::DimensionMismatch { expected: self.dimension(), actual: theta.dimension() });
        }
        let mut grad = vec![0.0; self.dimension()];
        if !self.needs_lookahead() {
            f.gradient_into(theta, &mut grad);
        }
        let mut next = theta.as_slice().to_vec();
        self.step_with_gradient(f, &mut next, &grad)?;
        *theta = ParameterVector::new(next)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{CostFunction, FunctionKind};

    fn quad() -> CostFunction {
        CostFunction::quadratic(1.0).unwrap()
    }

    #[test]
    fn h_gd_one_step_on_quadratic() {
        let mut opt = make_optimizer(OptimizerConfig::power(Method::Gd).with_learning_rate(0.1), 1).unwrap();
        let mut theta = ParameterVector::new(vec![1.0]).unwrap();
        opt.step(&quad(), &mut theta).unwrap();
        assert_eq!(theta[0], 0.9);
        assert_eq!(opt.state().t(), 1);
    }

    #[test]
    fn scheduled_exponent_first_step() {
        let mut opt = make_optimizer(OptimizerConfig::new(Method::AdamScheduled), 1).unwrap();
        assert_eq!(opt.exponent(), 0.5);
        let mut theta = ParameterVector::new(vec![0.3]).unwrap();
        opt.step(&quad(), &mut theta).unwrap();
        assert!((opt.exponent() - 0.5005).abs() < 1e-15);
    }

    #[test]
    fn nag_without_momentum_is_plain_gd() {
        let f = CostFunction::new(FunctionKind::V3);
        let mut nag = make_optimizer(OptimizerConfig::new(Method::Nag).with_momentum_damping(0.0).with_learning_rate(0.01), 2).unwrap();
        let mut gd = make_optimizer(OptimizerConfig::new(Method::Gd).with_learning_rate(0.01), 2).unwrap();
        let mut a = ParameterVector::new(vec![1.2, -0.7]).unwrap();
        let mut b = a.clone();
        for _ in 0..50 {
            nag.step(&f, &mut a).unwrap();
            gd.step(&f, &mut b).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn first_adam_step_is_a_sign_step() {
        // t = 1 from zero state: m_hat = h, s_hat = h^2, so the update is
        // eta * h / (|h| + eps).
        let f = CostFunction::new(FunctionKind::V3);
        let theta0 = [0.8, -1.1];
        let g = f.gradient(&theta0).unwrap();
        for h0 in [PowerExponent::ONE, PowerExponent::HALF] {
            let eta = 0.05;
            let mut opt = make_optimizer(OptimizerConfig::new(Method::Adam).with_exponent(h0).with_learning_rate(eta), 2).unwrap();
            let mut theta = ParameterVector::new(theta0.to_vec()).unwrap();
            opt.step(&f, &mut theta).unwrap();
            for i in 0..2 {
                let h = power_scalar(g[i], h0.value());
                let expected = theta0[i] - eta * h / (h.abs() + 1e-8);
                assert!((theta[i] - expected).abs() < 1e-15);
                assert!((theta[i] - (theta0[i] - eta * g[i].signum())).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn fresh_state_is_zero() {
        let adam = make_optimizer(OptimizerConfig::new(Method::Adam), 2).unwrap();
        assert_eq!(adam.state().first_moment(), &[0.0, 0.0]);
        assert_eq!(adam.state().second_moment(), &[0.0, 0.0]);
        assert_eq!(adam.state().t(), 0);
        let nag = make_optimizer(OptimizerConfig::power(Method::Nag), 2).unwrap();
        assert_eq!(nag.state().velocity(), &[0.0, 0.0]);
        assert_eq!(nag.exponent(), 0.5);
    }

    #[test]
    fn invalid_configs_list_every_violation() {
        let mut cfg = OptimizerConfig::new(Method::Adam).with_learning_rate(-1.0);
        assert!(make_optimizer(cfg, 2).is_err());
        cfg.beta1 = 1.0;
        cfg.epsilon = 0.0;
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.violations.len(), 3);
        assert!(make_optimizer(OptimizerConfig::new(Method::Gd), 0).is_err());
    }

    #[test]
    fn names_and_aliases() {
        let c = OptimizerConfig::from_name("h_amsgrad").unwrap();
        assert_eq!((c.method, c.initial_exponent), (Method::AmsGrad, PowerExponent::HALF));
        assert_eq!(c.label(), "h_amsgrad");
        let c = OptimizerConfig::from_name("nag").unwrap();
        assert_eq!(c.initial_exponent, PowerExponent::ONE);
        assert_eq!(c.label(), "nag");
        assert_eq!(OptimizerConfig::from_name("adam_scheduled").unwrap().initial_exponent, PowerExponent::HALF);
        assert_eq!(OptimizerConfig::from_name("h_adam_scheduled").unwrap().label(), "adam_scheduled");
        assert!(OptimizerConfig::from_name("rmsprop").is_err());
        let custom = OptimizerConfig::new(Method::Nag).with_exponent(PowerExponent::new(0.75).unwrap());
        assert_eq!(custom.label(), "nag[h0=0.75]");
    }

    #[test]
    fn amsgrad_cap_rules() {
        let f = CostFunction::new(FunctionKind::Beale);
        for cap in [AmsGradCap::Paper, AmsGradCap::Accumulated] {
            let mut opt = make_optimizer(OptimizerConfig::power(Method::AmsGrad).with_amsgrad_cap(cap).with_learning_rate(0.1), 2).unwrap();
            let mut theta = ParameterVector::new(vec![-2.0, 1.5]).unwrap();
            let mut prev_s = vec![0.0; 2];
            let mut prev_cap = vec![0.0; 2];
            for _ in 0..500 {
                opt.step(&f, &mut theta).unwrap();
                let st = opt.state();
                for i in 0..2 {
                    let s = st.second_moment()[i];
                    let expected = match cap {
                        AmsGradCap::Paper => s.max(prev_s[i]),
                        AmsGradCap::Accumulated => s.max(prev_cap[i]),
                    };
                    assert_eq!(st.amsgrad_cap()[i], expected);
                    assert!(st.amsgrad_cap()[i] >= 0.0 && s >= 0.0);
                    if cap == AmsGradCap::Accumulated {
                        assert!(st.amsgrad_cap()[i] >= prev_cap[i]);
                    }
                }
                prev_s = st.second_moment().to_vec();
                prev_cap = st.amsgrad_cap().to_vec();
            }
        }
    }

    #[test]
    fn divergence_is_reported_with_step_index() {
        // plain GD, eta * kappa = 3 doubles |theta| every step
        let f = CostFunction::quadratic(1.0).unwrap();
        let mut opt = make_optimizer(OptimizerConfig::new(Method::Gd).with_learning_rate(3.0), 1).unwrap();
        let mut theta = vec![1e308];
        let g = vec![1e308];
        assert_eq!(opt.step_with_gradient(&f, &mut theta, &g), Err(StepError { step: 1 }));
    }

    #[test]
    fn trajectories_are_deterministic() {
        let f = CostFunction::new(FunctionKind::V4);
        let run = || {
            let mut opt = make_optimizer(OptimizerConfig::power(Method::Nag).with_learning_rate(1e-3), 2).unwrap();
            let mut theta = ParameterVector::new(vec![0.5, -0.3]).unwrap();
            for _ in 0..200 {
                opt.step(&f, &mut theta).unwrap();
            }
            theta.into_inner()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }
}
