//! Ground state together with its linearized spectrum.

use thiserror::Error;

use crate::groundstate::{solve_ground_state, GroundStateError, RadialProfile};
use crate::params::ModelParams;
use crate::radial::RadialGridSpec;
use crate::spectrum::{default_spectral_grid, solve_linearized_spectrum, SpectralData, SpectrumError};

/// Default shooting tolerance on `q(0)`.
pub const DEFAULT_SHOOT_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolitonError {
    #[error("ground state: {0}")]
    GroundState(#[from] GroundStateError),
    #[error("spectrum: {0}")]
    Spectrum(#[from] SpectrumError),
}

/// Everything the field-level modules need to know about one soliton.
#[derive(Debug, Clone)]
pub struct Soliton {
    pub params: ModelParams,
    pub profile: RadialProfile,
    pub spectral: SpectralData,
}

impl Soliton {
    pub fn compute(params: &ModelParams) -> Result<Self, SolitonError> {
        Self::compute_on(params, &RadialGridSpec::default_for(params.dim), DEFAULT_SHOOT_TOL)
    }

    pub fn compute_on(
        params: &ModelParams,
        grid: &RadialGridSpec,
        tol: f64,
    ) -> Result<Self, SolitonError> {
        let profile = solve_ground_state(params, grid, tol)?;
        let spectral = solve_linearized_spectrum(&profile, &default_spectral_grid(&profile))?;
        Ok(Soliton { params: *params, profile, spectral })
    }

    /// `(Q, Q', Q'')` at `x` in one dimension.
    pub fn q_line(&self, x: f64) -> (f64, f64, f64) {
        self.profile.function().eval_line(x)
    }

    /// `(Y, Y', Y'')` at `x` in one dimension.
    pub fn y_line(&self, x: f64) -> (f64, f64, f64) {
        self.spectral.function().eval_line(x)
    }
}
