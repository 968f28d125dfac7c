//! Uniform radial grids and C² interpolation of radial functions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("radial grid needs h > 0 and r_max >= 20 (got h = {h}, r_max = {r_max})")]
    Invalid { r_max: f64, h: f64 },
    #[error("r_max / h = {0} is not an integer")]
    NotCommensurate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGridSpec {
    pub r_max: f64,
    pub h: f64,
}

impl Default for RadialGridSpec {
    fn default() -> Self {
        RadialGridSpec { r_max: 30.0, h: 1e-3 }
    }
}

impl RadialGridSpec {
    pub fn new(r_max: f64, h: f64) -> Result<Self, GridError> {
        let spec = RadialGridSpec { r_max, h };
        spec.validate()?;
        Ok(spec)
    }

    /// Default grid for dimension `dim`; higher dimensions need a longer
    /// radial range before the algebraic tail correction becomes small.
    pub fn default_for(dim: usize) -> Self {
        let r_max = match dim {
            0..=3 => 30.0,
            4 => 60.0,
            _ => 120.0,
        };
        RadialGridSpec { r_max, h: 1e-3 }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if !(self.h > 0.0 && self.r_max >= 20.0 && self.h.is_finite() && self.r_max.is_finite()) {
            return Err(GridError::Invalid { r_max: self.r_max, h: self.h });
        }
        let ratio = self.r_max / self.h;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) {
            return Err(GridError::NotCommensurate(ratio));
        }
        Ok(())
    }

    pub fn intervals(&self) -> usize {
        (self.r_max / self.h).round() as usize
    }

    pub fn nodes(&self) -> usize {
        self.intervals() + 1
    }

    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn refined(&self) -> Self {
        RadialGridSpec { r_max: self.r_max, h: 0.5 * self.h }
    }
}

/// Quintic Hermite interpolant of a radial function sampled with its first
/// two derivatives on `r_i = i h`.
///
/// Beyond the last node the function is continued by the exponential that
/// matches value and logarithmic derivative there.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFunction {
    h: f64,
    f: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl RadialFunction {
    pub fn new(h: f64, f: Vec<f64>, d1: Vec<f64>, d2: Vec<f64>) -> Self {
        assert!(f.len() >= 2 && f.len() == d1.len() && f.len() == d2.len());
        RadialFunction { h, f, d1, d2 }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    pub fn derivatives(&self) -> &[f64] {
        &self.d1
    }

    pub fn second_derivatives(&self) -> &[f64] {
        &self.d2
    }

    pub fn r_max(&self) -> f64 {
        (self.f.len() - 1) as f64 * self.h
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.eval3(r).0
    }

    /// Value, first and second derivative at `r >= 0`.
    pub fn eval3(&self, r: f64) -> (f64, f64, f64) {
        let last = self.f.len() - 1;
        let r_max = self.r_max();
        if r >= r_max {
            let f = self.f[last];
            if f == 0.0 {
                return (0.0, 0.0, 0.0);
            }
            let lambda = self.d1[last] / f;
            let e = f * (lambda * (r - r_max)).exp();
            return (e, lambda * e, lambda * lambda * e);
        }
        let s = r.max(0.0) / self.h;
        let i = (s.floor() as usize).min(last - 1);
        let t = s - i as f64;
        if t == 0.0 {
            return (self.f[i], self.d1[i], self.d2[i]);
        }
        let h = self.h;
        let (f0, f1) = (self.f[i], self.f[i + 1]);
        let (g0, g1) = (h * self.d1[i], h * self.d1[i + 1]);
        let (k0, k1) = (h * h * self.d2[i], h * h * self.d2[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let t5 = t4 * t;
        let b = [
            1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
            t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
            0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5),
            10.0 * t3 - 15.0 * t4 + 6.0 * t5,
            -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
            0.5 * (t3 - 2.0 * t4 + t5),
        ];
        let db = [
            -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
            1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
            0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4),
            30.0 * t2 - 60.0 * t3 + 30.0 * t4,
            -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
            0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4),
        ];
        let ddb = [
            -60.0 * t + 180.0 * t2 - 120.0 * t3,
            -36.0 * t + 96.0 * t2 - 60.0 * t3,
            0.5 * (2.0 - 18.0 * t + 36.0 * t2 - 20.0 * t3),
            60.0 * t - 180.0 * t2 + 120.0 * t3,
            -24.0 * t + 84.0 * t2 - 60.0 * t3,
            0.5 * (6.0 * t - 24.0 * t2 + 20.0 * t3),
        ];
        let c = [f0, g0, k0, f1, g1, k1];
        let combine = |w: &[f64; 6]| w.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
        (combine(&b), combine(&db) / h, combine(&ddb) / (h * h))
    }

    /// Value and derivatives of `x -> F(|x|)` on the real line.
    pub fn eval_line(&self, x: f64) -> (f64, f64, f64) {
        let (f, d1, d2) = self.eval3(x.abs());
        (f, if x < 0.0 { -d1 } else { d1 }, d2)
    }
}
