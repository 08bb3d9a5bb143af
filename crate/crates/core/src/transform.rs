//! Parameter and gradient vectors, and the componentwise power transform.

use alloc::vec::Vec;
use core::ops::Deref;

use crate::error::Error;

fn check_finite(components: &[f64]) -> Result<(), Error> {
    match components.iter().position(|c| !c.is_finite()) {
        Some(index) => Err(Error::NonFinite { index, value: components[index] }),
        None => Ok(()),
    }
}

/// A point in parameter space. Non-empty, all components finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(components: Vec<f64>) -> Result<Self, Error> {
        if components.is_empty() {
            return Err(Error::EmptyVector);
        }
        check_finite(&components)?;
        Ok(Self(components))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParameterVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ParameterVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self, Error> {
        Self::new(v)
    }
}

/// A gradient, or a power-transformed gradient. May hold non-finite values
/// (they are reported, not hidden) but is never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector(Vec<f64>);

impl GradientVector {
    pub fn new(components: Vec<f64>) -> Result<Self, Error> {
        if components.is_empty() {
            return Err(Error::EmptyVector);
        }
        Ok(Self(components))
    }

    pub fn zeros(dimension: usize) -> Self {
        Self(alloc::vec![0.0; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Largest absolute component.
    pub fn max_norm(&self) -> f64 {
        max_norm(&self.0)
    }
}

impl Deref for GradientVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, c| {
        if c.is_nan() {
            f64::NAN
        } else {
            acc.max(libm::fabs(*c))
        }
    })
}

/// Exponent `H` of the power transform, `0 < H <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PowerExponent(f64);

impl PowerExponent {
    /// The identity transform (standard gradient).
    pub const ONE: Self = Self(1.0);
    /// Square-root transform.
    pub const HALF: Self = Self(0.5);

    pub fn new(value: f64) -> Result<Self, Error> {
        if value > 0.0 && value <= 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidExponent(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_identity(self) -> bool {
        self.0 == 1.0
    }
}

impl Default for PowerExponent {
    fn default() -> Self {
        Self::HALF
    }
}

/// `sign(g) * |g|^h` with `sign(0) = 0`.
///
/// `h = 1` returns `g` untouched and `h = 0.5` goes through `sqrt`; other
/// exponents use `pow`. Non-finite input propagates.
#[inline]
pub fn power_scalar(g: f64, h: f64) -> f64 {
    if h == 1.0 {
        return g;
    }
    if g == 0.0 {
        return 0.0;
    }
    let magnitude = if h == 0.5 { libm::sqrt(libm::fabs(g)) } else { libm::pow(libm::fabs(g), h) };
    if g < 0.0 {
        -magnitude
    } else {
        magnitude
    }
}

/// Componentwise power transform into a caller-provided buffer. No validation.
#[inline]
pub fn power_transform_into(g: &[f64], h: f64, out: &mut [f64]) {
    debug_assert_eq!(g.len(), out.len());
    for (o, &gi) in out.iter_mut().zip(g) {
        *o = power_scalar(gi, h);
    }
}

/// The power gradient `h(i) = sign(g(i)) |g(i)|^H`.
///
/// Fails with [`Error::NonFinite`] naming the first non-finite component.
pub fn power_transform(g: &GradientVector, exponent: PowerExponent) -> Result<GradientVector, Error> {
    check_finite(g)?;
    let mut out = alloc::vec![0.0; g.dimension()];
    power_transform_into(g, exponent.value(), &mut out);
    Ok(GradientVector(out))
}
