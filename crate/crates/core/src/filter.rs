//! Filter function `ν` and the scalar weights `ĝ` (jumps) and `ŵ` (coherent term).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statefn::TargetFunction;

/// Parameters of `ν_{C,ζ}(x) = exp(-sqrt(1 + C(1 - cos(xπ/ζ))))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    pub c: f64,
    pub zeta: f64,
}

impl FilterParams {
    pub fn new(c: f64, zeta: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::Parameter(format!("filter C must be >= 0, got {c}")));
        }
        if !(zeta.is_finite() && zeta > 0.0) {
            return Err(Error::Parameter(format!("filter zeta must be > 0, got {zeta}")));
        }
        Ok(Self { c, zeta })
    }

    /// Smallest `C` for which `ĝ ≤ 1` is guaranteed: `L²S²/32`, with `ζ = S`.
    pub fn for_target(target: &TargetFunction) -> Self {
        let s = target.half_period();
        let l = target.lipschitz();
        Self {
            c: l * l * s * s / 32.0,
            zeta: s,
        }
    }

    /// Same as [`for_target`](Self::for_target) unless `c_override` is given.
    pub fn for_target_with(target: &TargetFunction, c_override: Option<f64>) -> Result<Self> {
        match c_override {
            Some(c) => Self::new(c, target.half_period()),
            None => Ok(Self::for_target(target)),
        }
    }

    pub fn required_c(target: &TargetFunction) -> f64 {
        Self::for_target(target).c
    }

    /// Whether these parameters meet the boundedness requirement for `target`.
    pub fn bounds_weights_for(&self, target: &TargetFunction) -> bool {
        self.c >= Self::required_c(target) * (1.0 - 1e-12)
            && (self.zeta - target.half_period()).abs() <= 1e-12 * self.zeta
    }

    pub fn log_nu(&self, x: f64) -> f64 {
        -(1.0 + self.c * (1.0 - (x * PI / self.zeta).cos())).sqrt()
    }
}

pub fn nu(p: &FilterParams, x: f64) -> f64 {
    p.log_nu(x).exp()
}

/// Symmetric kernel `κ(E1, E2)` entering the jump weights, in log form.
pub trait Kernel: Sync {
    fn log_kappa(&self, e1: f64, e2: f64) -> f64;
}

impl Kernel for FilterParams {
    fn log_kappa(&self, e1: f64, e2: f64) -> f64 {
        self.log_nu(e1 - e2)
    }
}

/// Root taken of the ratio `f(E1)/f(E2)` in the jump weights.
///
/// Only [`Weighting::QuarticRoot`] yields detailed balance; the square root is kept
/// as a negative control for the checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    QuarticRoot,
    SquareRoot,
}

impl Weighting {
    fn exponent(self) -> f64 {
        match self {
            Weighting::QuarticRoot => 0.25,
            Weighting::SquareRoot => 0.5,
        }
    }
}

/// `ĝ(E1, E2) = (f(E1)/f(E2))^{1/4} ν(E1 - E2)`, evaluated in the log domain.
pub fn g_hat(target: &TargetFunction, p: &FilterParams, e1: f64, e2: f64) -> f64 {
    g_hat_with(target, p, Weighting::QuarticRoot, e1, e2)
}

pub fn g_hat_with<K: Kernel + ?Sized>(
    target: &TargetFunction,
    kernel: &K,
    weighting: Weighting,
    e1: f64,
    e2: f64,
) -> f64 {
    (weighting.exponent() * (target.phi(e1) - target.phi(e2)) + kernel.log_kappa(e1, e2)).exp()
}

/// `ŵ(E1, E2) = i tanh((Φ(E1) - Φ(E2))/4)`
pub fn w_hat(target: &TargetFunction, e1: f64, e2: f64) -> Complex64 {
    Complex64::new(0.0, ((target.phi(e1) - target.phi(e2)) / 4.0).tanh())
}
