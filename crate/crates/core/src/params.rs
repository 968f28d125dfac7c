//! Physical parameters of the equation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("dimension N = {0} is outside 1..=5")]
    Dimension(usize),
    #[error("exponent p = {p} must satisfy 2 < p < {upper} for N = {dim}")]
    Exponent { p: f64, dim: usize, upper: f64 },
    #[error("damping alpha = {0} must be positive and finite")]
    Damping(f64),
}

/// Dimension `N`, exponent `p` and damping `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dim: usize,
    pub p: f64,
    pub alpha: f64,
}

impl ModelParams {
    pub fn new(dim: usize, p: f64, alpha: f64) -> Result<Self, ParamError> {
        let params = ModelParams { dim, p, alpha };
        params.validate()?;
        Ok(params)
    }

    /// The cubic one-dimensional model with unit damping.
    pub fn cubic_1d() -> Self {
        ModelParams { dim: 1, p: 3.0, alpha: 1.0 }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(1..=5).contains(&self.dim) {
            return Err(ParamError::Dimension(self.dim));
        }
        let upper = self.critical_exponent();
        if !(self.p.is_finite() && self.p > 2.0 && self.p < upper) {
            return Err(ParamError::Exponent { p: self.p, dim: self.dim, upper });
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(ParamError::Damping(self.alpha));
        }
        Ok(())
    }

    /// Energy-critical exponent `(N+2)/(N-2)`, infinite for `N <= 2`.
    pub fn critical_exponent(&self) -> f64 {
        if self.dim <= 2 {
            f64::INFINITY
        } else {
            (self.dim as f64 + 2.0) / (self.dim as f64 - 2.0)
        }
    }

    /// `f(u) = |u|^(p-1) u`.
    pub fn nonlinearity(&self, u: f64) -> f64 {
        signed_power(u, self.p)
    }

    /// `F(u) = |u|^(p+1) / (p+1)`.
    pub fn potential(&self, u: f64) -> f64 {
        abs_power(u, self.p + 1.0) / (self.p + 1.0)
    }

    /// `f'(u) = p |u|^(p-1)`.
    pub fn nonlinearity_derivative(&self, u: f64) -> f64 {
        self.p * abs_power(u, self.p - 1.0)
    }
}

pub(crate) fn abs_power(u: f64, e: f64) -> f64 {
    let a = u.abs();
    if e.fract() == 0.0 && e.abs() < 64.0 {
        a.powi(e as i32)
    } else {
        a.powf(e)
    }
}

pub(crate) fn signed_power(u: f64, e: f64) -> f64 {
    abs_power(u, e - 1.0) * u
}

/// Surface area of the unit sphere in `R^n`; `|S^0| = 2`.
pub fn sphere_area(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma_half_integer(n)
}

/// `Gamma(n/2)` for positive integer `n`.
fn gamma_half_integer(n: usize) -> f64 {
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let mut k = n;
    let mut acc = 1.0;
    while k > 2 {
        k -= 2;
        acc *= k as f64 / 2.0;
    }
    if k == 1 {
        acc * sqrt_pi
    } else {
        acc
    }
}
