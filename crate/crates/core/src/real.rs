//! Scalar abstraction so the field stepper can run in double or
//! double-double precision.

use std::fmt::Debug;

use num_traits::Float;
use twofloat::TwoFloat;

pub trait Real: Float + From<f64> + Debug + Send + Sync + 'static {
    fn as_f64(self) -> f64;

    fn of(x: f64) -> Self {
        <Self as From<f64>>::from(x)
    }

    /// `|u|^(e-1) u`, with integer exponents evaluated by repeated products.
    fn signed_pow(self, e: f64) -> Self {
        let a = self.abs();
        let m = e - 1.0;
        let mag = if m.fract() == 0.0 && m.abs() < 64.0 {
            a.powi(m as i32)
        } else if a == Self::zero() {
            Self::zero()
        } else {
            a.powf(Self::of(m))
        };
        mag * self
    }
}

impl Real for f64 {
    fn as_f64(self) -> f64 {
        self
    }
}

impl Real for TwoFloat {
    fn as_f64(self) -> f64 {
        self.hi() + self.lo()
    }
}

/// Numeric precision used by the PDE stepper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    Double,
    DoubleDouble,
}
