//! Benchmark landscapes with analytic gradients.
//!
//! | id          | formula                                                                  | minimum   |
//! |-------------|--------------------------------------------------------------------------|-----------|
//! | `v1`        | `3 - exp(-x²-y²) - exp(-x²) - exp(-y²)`                                   | (0, 0)    |
//! | `v2`        | `11.5 - 10 exp(-(x²+y²)/25) - exp(-x²-y²) - cos(-yx² - y² + xy + x + 2y)/2` | (0, 0)    |
//! | `v3`        | `10/27 (2y-x)⁴ + 10/9 (2x+y)² + 5y⁴`                                      | (0, 0)    |
//! | `v4`        | `ln((3x+y)²+1) + cosh(4 sin(π(3x+y)/2) + x - 3y) - 1`                     | (0, 0)    |
//! | `beale`     | `(xy³-x+2.625)² + (xy²-x+2.25)² + (xy-x+1.5)²`                            | (3, 0.5)  |
//! | `quadratic` | `κθ²/2`                                                                  | 0         |
//!
//! All minima have value 0. `v1` and `v2` are bounded; the rest diverge away
//! from the origin (`v4` exponentially).

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;
use core::fmt;
use core::str::FromStr;

use libm::{cos, cosh, exp, log, sin, sinh};

use crate::error::Error;
use crate::transform::{GradientVector, ParameterVector};

/// Anything a descent method can minimize.
///
/// Implementations must not assume the point lies inside a search domain:
/// momentum look-ahead points routinely leave it.
pub trait Objective {
    fn dimension(&self) -> usize;

    /// `V(theta)`. `theta.len() == self.dimension()` is the caller's responsibility.
    fn value(&self, theta: &[f64]) -> f64;

    /// Writes `dV/dtheta(i)` into `out`.
    fn gradient_into(&self, theta: &[f64], out: &mut [f64]);
}

/// Closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, Error> {
        if lo.is_finite() && hi.is_finite() && lo < hi {
            Ok(Self { lo, hi })
        } else {
            Err(Error::InvalidInterval { lo, hi })
        }
    }

    /// Symmetric interval `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64) -> Result<Self, Error> {
        Self::new(-half_width, half_width)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Point at fraction `u` of the way from `lo` to `hi`, clamped into the interval.
    pub fn lerp(&self, u: f64) -> f64 {
        (self.lo + u * (self.hi - self.lo)).clamp(self.lo, self.hi)
    }
}

/// Axis-aligned search box, one interval per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    bounds: Vec<Interval>,
}

impl Domain {
    pub fn new(bounds: Vec<Interval>) -> Result<Self, Error> {
        if bounds.is_empty() {
            return Err(Error::EmptyVector);
        }
        Ok(Self { bounds })
    }

    /// The same interval on every one of `dimension` axes.
    pub fn square(interval: Interval, dimension: usize) -> Self {
        Self { bounds: vec![interval; dimension.max(1)] }
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[Interval] {
        &self.bounds
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.bounds.len() && theta.iter().zip(&self.bounds).all(|(x, b)| b.contains(*x))
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|b| 0.5 * (b.lo + b.hi)).collect()
    }
}

/// Which landscape a [`CostFunction`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FunctionKind {
    /// Gaussian well with wide plateaus.
    V1,
    /// Rippled landscape with secondary minima.
    V2,
    /// Quartic bowl with power-law growth.
    V3,
    /// Exponential walls around a wavy flat ravine.
    V4,
    Beale,
    /// One-dimensional `kappa * theta^2 / 2`, `kappa > 0`.
    Quadratic { kappa: f64 },
}

impl FunctionKind {
    /// The five two-dimensional landscapes.
    pub const BENCHMARKS: [FunctionKind; 5] =
        [FunctionKind::V1, FunctionKind::V2, FunctionKind::V3, FunctionKind::V4, FunctionKind::Beale];

    pub fn quadratic(kappa: f64) -> Result<Self, Error> {
        if kappa > 0.0 && kappa.is_finite() {
            Ok(Self::Quadratic { kappa })
        } else {
            Err(Error::Usage(alloc::format!("quadratic stiffness must be finite and positive, got {kappa}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::V1 => "v1",
            Self::V2 => "v2",
            Self::V3 => "v3",
            Self::V4 => "v4",
            Self::Beale => "beale",
            Self::Quadratic { .. } => "quadratic",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Self::Quadratic { .. } => 1,
            _ => 2,
        }
    }

    /// Default search box.
    pub fn default_domain(&self) -> Domain {
        let half = match self {
            Self::V1 => 3.0,
            Self::V2 => 5.0,
            Self::V3 | Self::V4 => 2.0,
            Self::Beale => 4.5,
            Self::Quadratic { .. } => 1.0,
        };
        Domain::square(Interval { lo: -half, hi: half }, self.dimension())
    }

    pub fn global_minimum(&self) -> Vec<f64> {
        match self {
            Self::Beale => vec![3.0, 0.5],
            Self::Quadratic { .. } => vec![0.0],
            _ => vec![0.0, 0.0],
        }
    }
}

impl fmt::Display for FunctionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FunctionKind {
    type Err = Error;

    /// Accepts `v1`..`v4`, `beale`, and `quadratic` (kappa = 1).
    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "v1" => Ok(Self::V1),
            "v2" => Ok(Self::V2),
            "v3" => Ok(Self::V3),
            "v4" => Ok(Self::V4),
            "beale" | "v_beale" => Ok(Self::Beale),
            "quadratic" => Ok(Self::Quadratic { kappa: 1.0 }),
            other => Err(Error::Usage(alloc::format!(
                "unknown function `{other}` (expected one of v1, v2, v3, v4, beale, quadratic)"
            ))),
        }
    }
}

fn value_of(kind: FunctionKind, theta: &[f64]) -> f64 {
    if let FunctionKind::Quadratic { kappa } = kind {
        return 0.5 * kappa * theta[0] * theta[0];
    }
    let (x, y) = (theta[0], theta[1]);
    match kind {
        FunctionKind::V1 => 3.0 - exp(-x * x - y * y) - exp(-x * x) - exp(-y * y),
        FunctionKind::V2 => {
            let r2 = x * x + y * y;
            let q = -y * x * x - y * y + x * y + x + 2.0 * y;
            11.5 - 10.0 * exp(-r2 / 25.0) - exp(-r2) - 0.5 * cos(q)
        }
        FunctionKind::V3 => {
            let a = 2.0 * y - x;
            let b = 2.0 * x + y;
            let a2 = a * a;
            10.0 / 27.0 * a2 * a2 + 10.0 / 9.0 * b * b + 5.0 * y * y * y * y
        }
        FunctionKind::V4 => {
            let s = 3.0 * x + y;
            let w = 4.0 * sin(FRAC_PI_2 * s) + x - 3.0 * y;
            log(s * s + 1.0) + cosh(w) - 1.0
        }
        FunctionKind::Beale => {
            let t1 = x * y * y * y - x + 2.625;
            let t2 = x * y * y - x + 2.25;
            let t3 = x * y - x + 1.5;
            t1 * t1 + t2 * t2 + t3 * t3
        }
        FunctionKind::Quadratic { .. } => unreachable!(),
    }
}

fn gradient_of(kind: FunctionKind, theta: &[f64], out: &mut [f64]) {
    if let FunctionKind::Quadratic { kappa } = kind {
        out[0] = kappa * theta[0];
        return;
    }
    let (x, y) = (theta[0], theta[1]);
    let (gx, gy) = match kind {
        FunctionKind::V1 => {
            let er = exp(-x * x - y * y);
            (2.0 * x * (er + exp(-x * x)), 2.0 * y * (er + exp(-y * y)))
        }
        FunctionKind::V2 => {
            let r2 = x * x + y * y;
            let wide = 0.8 * exp(-r2 / 25.0);
            let narrow = 2.0 * exp(-r2);
            let q = -y * x * x - y * y + x * y + x + 2.0 * y;
            let sq = 0.5 * sin(q);
            let qx = -2.0 * x * y + y + 1.0;
            let qy = -x * x - 2.0 * y + x + 2.0;
            (x * (wide + narrow) + sq * qx, y * (wide + narrow) + sq * qy)
        }
        FunctionKind::V3 => {
            let a = 2.0 * y - x;
            let b = 2.0 * x + y;
            let quartic = 40.0 / 27.0 * a * a * a;
            let square = 20.0 / 9.0 * b;
            (-quartic + 2.0 * square, 2.0 * quartic + square + 20.0 * y * y * y)
        }
        FunctionKind::V4 => {
            let s = 3.0 * x + y;
            let w = 4.0 * sin(FRAC_PI_2 * s) + x - 3.0 * y;
            let log_term = 2.0 * s / (s * s + 1.0);
            let sh = sinh(w);
            let dw_ds = 4.0 * FRAC_PI_2 * cos(FRAC_PI_2 * s);
            (3.0 * log_term + sh * (3.0 * dw_ds + 1.0), log_term + sh * (dw_ds - 3.0))
        }
        FunctionKind::Beale => {
            let (y2, y3) = (y * y, y * y * y);
            let t1 = x * y3 - x + 2.625;
            let t2 = x * y2 - x + 2.25;
            let t3 = x * y - x + 1.5;
            (
                2.0 * (t1 * (y3 - 1.0) + t2 * (y2 - 1.0) + t3 * (y - 1.0)),
                2.0 * x * (3.0 * t1 * y2 + 2.0 * t2 * y + t3),
            )
        }
        FunctionKind::Quadratic { .. } => unreachable!(),
    };
    out[0] = gx;
    out[1] = gy;
}

/// A landscape paired with its search domain.
#[derive(Debug, Clone, PartialEq)]
pub struct CostFunction {
    kind: FunctionKind,
    domain: Domain,
}

impl CostFunction {
    /// The landscape with its default domain.
    pub fn new(kind: FunctionKind) -> Self {
        Self { domain: kind.default_domain(), kind }
    }

    /// The landscape on a custom domain, which must match the dimension and
    /// contain the global minimum.
    pub fn with_domain(kind: FunctionKind, domain: Domain) -> Result<Self, Error> {
        if domain.dimension() != kind.dimension() {
            return Err(Error::DimensionMismatch { expected: kind.dimension(), actual: domain.dimension() });
        }
        if !domain.contains(&kind.global_minimum()) {
            return Err(Error::Usage(alloc::format!(
                "domain for `{}` must contain its global minimum {:?}",
                kind.name(),
                kind.global_minimum()
            )));
        }
        Ok(Self { kind, domain })
    }

    pub fn quadratic(kappa: f64) -> Result<Self, Error> {
        Ok(Self::new(FunctionKind::quadratic(kappa)?))
    }

    pub fn kind(&self) -> FunctionKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn dimension(&self) -> usize {
        self.kind.dimension()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn global_minimum(&self) -> ParameterVector {
        ParameterVector::new(self.kind.global_minimum()).expect("minima are finite and non-empty")
    }

    pub fn minimum_value(&self) -> f64 {
        0.0
    }

    fn check_dimension(&self, theta: &[f64]) -> Result<(), Error> {
        if theta.len() == self.dimension() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dimension(), actual: theta.len() })
        }
    }

    /// Checked evaluation. The result may be `+inf` (e.g. `cosh` overflow far
    /// outside the domain); callers treat that as divergence.
    pub fn evaluate(&self, theta: &[f64]) -> Result<f64, Error> {
        self.check_dimension(theta)?;
        Ok(value_of(self.kind, theta))
    }

    /// Checked analytic gradient.
    pub fn gradient(&self, theta: &[f64]) -> Result<GradientVector, Error> {
        self.check_dimension(theta)?;
        let mut out = vec![0.0; self.dimension()];
        gradient_of(self.kind, theta, &mut out);
        GradientVector::new(out)
    }
}

impl Objective for CostFunction {
    fn dimension(&self) -> usize {
        self.kind.dimension()
    }

    #[inline]
    fn value(&self, theta: &[f64]) -> f64 {
        debug_assert_eq!(theta.len(), self.dimension());
        value_of(self.kind, theta)
    }

    #[inline]
    fn gradient_into(&self, theta: &[f64], out: &mut [f64]) {
        debug_assert_eq!(theta.len(), self.dimension());
        gradient_of(self.kind, theta, out)
    }
}

/// One sample of a contour grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSample {
    pub x: f64,
    pub y: f64,
    pub v: f64,
}

/// `resolution x resolution` samples of a 2-D function over its domain,
/// bounds included. Row-major: `y` is the slow index, `x` the fast one.
pub fn contour_grid(f: &CostFunction, resolution: usize) -> Result<Vec<GridSample>, Error> {
    if f.dimension() != 2 {
        return Err(Error::Usage(alloc::format!("contour grid needs a 2-D function, `{}` is {}-D", f.name(), f.dimension())));
    }
    if resolution < 2 {
        return Err(Error::Usage("contour resolution must be at least 2".to_string()));
    }
    let [bx, by] = [f.domain().bounds()[0], f.domain().bounds()[1]];
    let axis = |b: Interval, i: usize| -> f64 {
        if i + 1 == resolution {
            b.hi()
        } else {
            b.lerp(i as f64 / (resolution - 1) as f64)
        }
    };
    let mut grid = Vec::with_capacity(resolution * resolution);
    for j in 0..resolution {
        let y = axis(by, j);
        for i in 0..resolution {
            let x = axis(bx, i);
            grid.push(GridSample { x, y, v: value_of(f.kind, &[x, y]) });
        }
    }
    Ok(grid)
}

/// Names of every landscape, for help text.
pub fn function_names() -> Vec<String> {
    FunctionKind::BENCHMARKS
        .iter()
        .map(|k| k.name().to_string())
        .chain(core::iter::once("quadratic".to_string()))
        .collect()
}
