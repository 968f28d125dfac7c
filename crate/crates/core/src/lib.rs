//! Numerical laboratory for two-solitary-wave dynamics of the damped
//! nonlinear Klein-Gordon equation
//!
//! ```text
//! u_tt + 2 alpha u_t - Δu + u - |u|^(p-1) u = 0
//! ```
//!
//! The crate is organised bottom-up:
//!
//! * [`groundstate`] shoots the radial ground state `Q` and extracts the
//!   decay amplitude and interaction constants.
//! * [`spectrum`] computes the negative eigenvalue of the linearized operator
//!   and the derived growth/decay rates.
//! * [`interactions`] evaluates the two-soliton interaction function `g(r)`.
//! * [`field1d`] time-steps the PDE in one space dimension.
//! * [`modulation`] decomposes a field near a two-soliton sum.
//! * [`reduced_ode`] integrates the finite-dimensional reduced flow.
//! * [`shooter`] locates the codimension-2 set of initial data whose
//!   trajectories stay two-solitary waves.

pub mod field1d;
pub mod groundstate;
pub mod interactions;
pub mod modulation;
pub mod params;
pub mod quad;
pub mod radial;
pub mod real;
pub mod reduced_ode;
pub mod shooter;
pub mod soliton;
pub mod spectrum;

pub use params::{ModelParams, ParamError};
pub use soliton::Soliton;
