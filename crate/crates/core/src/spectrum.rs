//! Negative eigenvalue of the linearized operator `L = -Δ + 1 - p Q^{p-1}`,
//! the derived rates, the kernel residual and the coercivity report.
//!
//! Each angular sector `ℓ` of `L` is discretized by a symmetric
//! finite-volume scheme on `[0, r_max]` (Neumann at the origin for `ℓ = 0`,
//! `u(0) = 0` otherwise, Dirichlet at `r_max`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::groundstate::RadialProfile;
use crate::params::{abs_power, sphere_area, ModelParams};
use crate::quad::simpson;
use crate::radial::{GridError, RadialFunction, RadialGridSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("smallest eigenvalue {0} is not negative")]
    NoNegativeEigenvalue(f64),
    #[error("inverse iteration did not converge (last increment {0:e})")]
    NotConverged(f64),
    #[error("projected smallest eigenvalue {0} is not positive")]
    CoercivityFailed(f64),
    #[error("spectral grid r_max {grid} exceeds the profile range {profile}")]
    GridBeyondProfile { grid: f64, profile: f64 },
}

const MAX_ITERATIONS: usize = 200;
const EIGEN_TOL: f64 = 1e-12;

/// Rates of the unstable/stable modes `e^{ν± t} (Y, ν± Y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rates {
    pub nu0: f64,
    pub nu0_sq: f64,
    pub nu_plus: f64,
    pub nu_minus: f64,
    pub zeta_plus: f64,
    pub zeta_minus: f64,
    pub beta: f64,
}

impl Rates {
    pub fn new(nu0_sq: f64, alpha: f64) -> Self {
        let root = (alpha * alpha + nu0_sq).sqrt();
        Rates {
            nu0: nu0_sq.sqrt(),
            nu0_sq,
            nu_plus: -alpha + root,
            nu_minus: -alpha - root,
            zeta_plus: alpha + root,
            zeta_minus: alpha - root,
            beta: 0.5 / root,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralData {
    pub grid: RadialGridSpec,
    pub rates: Rates,
    /// Eigenvalue estimates on the two grids before extrapolation.
    pub lambda_coarse: f64,
    pub lambda_fine: f64,
    /// `Y` at the grid nodes, `||Y||_{L²(R^N)} = 1`, `Y(0) > 0`.
    pub y: Vec<f64>,
    y_fn: RadialFunction,
}

impl SpectralData {
    pub fn nu0(&self) -> f64 {
        self.rates.nu0
    }

    pub fn nu_plus(&self) -> f64 {
        self.rates.nu_plus
    }

    pub fn nu_minus(&self) -> f64 {
        self.rates.nu_minus
    }

    pub fn zeta_plus(&self) -> f64 {
        self.rates.zeta_plus
    }

    pub fn zeta_minus(&self) -> f64 {
        self.rates.zeta_minus
    }

    pub fn beta(&self) -> f64 {
        self.rates.beta
    }

    pub fn function(&self) -> &RadialFunction {
        &self.y_fn
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.y_fn.eval(r)
    }
}

/// One angular sector of the linearized operator, stored as
/// `B = V^{-1/2} S V^{-1/2}` with `S` symmetric tridiagonal and `V` the
/// cell volumes.
#[derive(Debug, Clone)]
pub struct SectorOperator {
    h: f64,
    first: usize,
    vol: Vec<f64>,
    /// Conductance `r_{i+1/2}^{N-1}/h` of the face right of each unknown.
    right: Vec<f64>,
    /// Conductance of the face left of the first unknown (zero at `r = 0`).
    left_boundary: f64,
    pot: Vec<f64>,
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SectorOperator {
    /// Discretize sector `ell` with potential `1 - p q^{p-1}` on `grid`.
    pub fn new(
        params: &ModelParams,
        q: impl Fn(f64) -> f64,
        grid: &RadialGridSpec,
        ell: usize,
    ) -> Self {
        let n = params.dim;
        let h = grid.h;
        let first = if ell == 0 { 0 } else { 1 };
        let last = grid.intervals();
        let centrifugal = ell as f64 * ((ell + n) as f64 - 2.0);
        let power = |r: f64| r.powi(n as i32 - 1);
        let mut vol = Vec::new();
        let mut right = Vec::new();
        let mut pot = Vec::new();
        for i in first..last {
            let r = grid.r(i);
            vol.push(if i == 0 { (0.5 * h).powi(n as i32) / n as f64 } else { power(r) * h });
            right.push(power(r + 0.5 * h) / h);
            let cf = if r > 0.0 { centrifugal / (r * r) } else { 0.0 };
            pot.push(cf + 1.0 - params.nonlinearity_derivative(q(r)));
        }
        let left_boundary = if first == 0 { 0.0 } else { power(grid.r(first) - 0.5 * h) / h };
        let m = vol.len();
        let mut diag = vec![0.0; m];
        let mut off = vec![0.0; m.saturating_sub(1)];
        for j in 0..m {
            let left = if j == 0 { left_boundary } else { right[j - 1] };
            diag[j] = (left + right[j]) / vol[j] + pot[j];
            if j + 1 < m {
                off[j] = -right[j] / (vol[j] * vol[j + 1]).sqrt();
            }
        }
        SectorOperator { h, first, vol, right, left_boundary, pot, diag, off }
    }

    pub fn len(&self) -> usize {
        self.vol.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vol.is_empty()
    }

    /// Radius of unknown `j`.
    pub fn radius(&self, j: usize) -> f64 {
        (j + self.first) as f64 * self.h
    }

    /// Grid node index of unknown `j`.
    pub fn node(&self, j: usize) -> usize {
        j + self.first
    }

    pub fn volumes(&self) -> &[f64] {
        &self.vol
    }

    /// `(<L u, u>, ||u||², gradient part)` for nodal values `u` without the
    /// angular factor. Differences are squared before summing, so the large
    /// stencil coefficients never cancel.
    pub fn forms(&self, u: &[f64]) -> (f64, f64, f64) {
        let m = self.len();
        let mut grad = self.left_boundary * u[0] * u[0];
        let mut pot = 0.0;
        let mut mass = 0.0;
        for j in 0..m {
            let next = if j + 1 < m { u[j + 1] } else { 0.0 };
            grad += self.right[j] * (next - u[j]).powi(2);
            pot += self.vol[j] * self.pot[j] * u[j] * u[j];
            mass += self.vol[j] * u[j] * u[j];
        }
        (grad + pot, mass, grad)
    }

    /// `<L u, u>`, `||u||²_{L²}` and `||u||²_{H¹}` of nodal values.
    pub fn quadratic_forms(&self, u: &[f64], params: &ModelParams, q: impl Fn(f64) -> f64) -> QuadraticForms {
        let (lin, mass, grad) = self.forms(u);
        let mut centrifugal = 0.0;
        for j in 0..self.len() {
            let r = self.radius(j);
            let cf = self.pot[j] - 1.0 + params.nonlinearity_derivative(q(r));
            centrifugal += self.vol[j] * cf * u[j] * u[j];
        }
        QuadraticForms { lin, l2: mass, h1: grad + centrifugal + mass }
    }

    fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Vec<f64> {
        let m = self.len();
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        let mut denom = self.diag[0] - shift;
        c[0] = if m > 1 { self.off[0] / denom } else { 0.0 };
        d[0] = rhs[0] / denom;
        for j in 1..m {
            denom = self.diag[j] - shift - self.off[j - 1] * c[j - 1];
            if j + 1 < m {
                c[j] = self.off[j] / denom;
            }
            d[j] = (rhs[j] - self.off[j - 1] * d[j - 1]) / denom;
        }
        let mut x = d;
        for j in (0..m - 1).rev() {
            x[j] -= c[j] * x[j + 1];
        }
        x
    }

    /// Number of eigenvalues strictly below `x` (Sturm count of the
    /// symmetric tridiagonal form).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for j in 0..self.len() {
            let coupling = if j == 0 { 0.0 } else { self.off[j - 1] * self.off[j - 1] };
            d = self.diag[j] - x - if j == 0 { 0.0 } else { coupling / d };
            if d == 0.0 {
                d = 1e-300;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (`k = 0` is the lowest) by bisection
    /// on the Sturm count.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..self.len() {
            let a = if j == 0 { 0.0 } else { self.off[j - 1].abs() };
            let b = if j + 1 < self.len() { self.off[j].abs() } else { 0.0 };
            lo = lo.min(self.diag[j] - a - b);
            hi = hi.max(self.diag[j] + a + b);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Lowest eigenpair by shifted inverse iteration from `start` (nodal
    /// values). Returns the eigenvalue and the nodal eigenvector with unit
    /// weighted norm.
    pub fn lowest_eigenpair(&self, start: &[f64]) -> Result<(f64, Vec<f64>), SpectrumError> {
        let mut w: Vec<f64> = start.iter().zip(&self.vol).map(|(u, v)| u * v.sqrt()).collect();
        normalize(&mut w);
        let mut lambda = self.rayleigh(&w);
        let shift = if lambda < 0.0 { 2.0 * lambda } else { lambda - 1.0 };
        let mut increment = f64::INFINITY;
        for _ in 0..MAX_ITERATIONS {
            w = self.solve_shifted(shift, &w);
            normalize(&mut w);
            let next = self.rayleigh(&w);
            increment = (next - lambda).abs();
            lambda = next;
            if increment < EIGEN_TOL {
                let u = w.iter().zip(&self.vol).map(|(w, v)| w / v.sqrt()).collect();
                return Ok((lambda, u));
            }
        }
        Err(SpectrumError::NotConverged(increment))
    }

    fn rayleigh(&self, w: &[f64]) -> f64 {
        let u: Vec<f64> = w.iter().zip(&self.vol).map(|(w, v)| w / v.sqrt()).collect();
        let (lin, mass, _) = self.forms(&u);
        lin / mass
    }
}

fn normalize(w: &mut [f64]) {
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    w.iter_mut().for_each(|x| *x /= norm);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticForms {
    /// `<L u, u>`
    pub lin: f64,
    pub l2: f64,
    pub h1: f64,
}

/// Default spectral grid: the profile's range at twice its spacing, so the
/// refined grid coincides with the profile nodes.
pub fn default_spectral_grid(profile: &RadialProfile) -> RadialGridSpec {
    RadialGridSpec { r_max: profile.grid.r_max, h: 2.0 * profile.grid.h }
}

fn radial_norm_sq(values: &[f64], grid: &RadialGridSpec, dim: usize) -> f64 {
    let w: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, v)| v * v * grid.r(i).powi(dim as i32 - 1))
        .collect();
    sphere_area(dim) * simpson(&w, grid.h)
}

fn ground_mode(
    profile: &RadialProfile,
    grid: &RadialGridSpec,
) -> Result<(f64, Vec<f64>), SpectrumError> {
    let params = &profile.params;
    let qf = |r: f64| profile.eval(r);
    let op = SectorOperator::new(params, qf, grid, 0);
    let start: Vec<f64> =
        (0..op.len()).map(|j| abs_power(qf(op.radius(j)), 0.5 * (params.p + 1.0))).collect();
    let (lambda, mut u) = op.lowest_eigenpair(&start)?;
    u.push(0.0);
    let norm = radial_norm_sq(&u, grid, params.dim).sqrt();
    let sign = if u[0] < 0.0 { -1.0 } else { 1.0 };
    u.iter_mut().for_each(|x| *x *= sign / norm);
    Ok((lambda, u))
}

/// Solve for `-ν0²` and `Y` on `grid` and `grid/2`, Richardson-extrapolate,
/// and derive the rates for the profile's damping.
pub fn solve_linearized_spectrum(
    profile: &RadialProfile,
    grid: &RadialGridSpec,
) -> Result<SpectralData, SpectrumError> {
    grid.validate()?;
    if grid.r_max > profile.grid.r_max + 1e-12 {
        return Err(SpectrumError::GridBeyondProfile {
            grid: grid.r_max,
            profile: profile.grid.r_max,
        });
    }
    let fine = grid.refined();
    let (lambda_coarse, y_coarse) = ground_mode(profile, grid)?;
    let (lambda_fine, y_fine) = ground_mode(profile, &fine)?;
    let lambda = (4.0 * lambda_fine - lambda_coarse) / 3.0;
    if !(lambda < 0.0) {
        return Err(SpectrumError::NoNegativeEigenvalue(lambda));
    }
    let params = &profile.params;
    let mut y: Vec<f64> = y_coarse
        .iter()
        .enumerate()
        .map(|(i, c)| (4.0 * y_fine[2 * i] - c) / 3.0)
        .collect();
    let norm = radial_norm_sq(&y, grid, params.dim).sqrt();
    y.iter_mut().for_each(|x| *x /= norm);
    let y_fn = eigen_interpolant(&y, grid, params, |r| profile.eval(r), lambda);
    Ok(SpectralData {
        grid: *grid,
        rates: Rates::new(-lambda, params.alpha),
        lambda_coarse,
        lambda_fine,
        y,
        y_fn,
    })
}

/// Interpolant of an even radial eigenfunction: slopes by fourth-order
/// differences, curvature from the eigenvalue equation.
fn eigen_interpolant(
    y: &[f64],
    grid: &RadialGridSpec,
    params: &ModelParams,
    q: impl Fn(f64) -> f64,
    lambda: f64,
) -> RadialFunction {
    let n = y.len();
    let h = grid.h;
    let at = |i: isize| -> f64 {
        if i < 0 {
            y[(-i) as usize]
        } else if (i as usize) < n {
            y[i as usize]
        } else {
            0.0
        }
    };
    let mut d1 = vec![0.0; n];
    for (i, d) in d1.iter_mut().enumerate().take(n - 2) {
        let k = i as isize;
        *d = (-at(k + 2) + 8.0 * at(k + 1) - 8.0 * at(k - 1) + at(k - 2)) / (12.0 * h);
    }
    for i in n - 2..n {
        d1[i] = (y[i] - y[i - 1]) / h;
    }
    let dim = params.dim as f64;
    let d2: Vec<f64> = (0..n)
        .map(|i| {
            let r = grid.r(i);
            let potential = 1.0 - params.nonlinearity_derivative(q(r)) - lambda;
            if r == 0.0 {
                potential * y[i] / dim
            } else {
                potential * y[i] - (dim - 1.0) / r * d1[i]
            }
        })
        .collect();
    RadialFunction::new(h, y.to_vec(), d1, d2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelResidual {
    /// `||L ∂_1 Q||_{L²(R^N)}`.
    pub residual: f64,
    /// Richardson estimate of the stencil truncation error.
    pub truncation_estimate: f64,
    /// Size of the rounding error of the stencil.
    pub roundoff_floor: f64,
}

impl KernelResidual {
    pub fn within_truncation(&self) -> bool {
        self.residual <= 10.0 * self.truncation_estimate.max(self.roundoff_floor)
    }
}

pub fn kernel_residual(profile: &RadialProfile) -> KernelResidual {
    kernel_residual_sampled(&profile.params, &profile.grid, &profile.q, &profile.dq)
}

/// [`kernel_residual`] for arbitrary samples of `q` and `q'`.
pub fn kernel_residual_sampled(
    params: &ModelParams,
    grid: &RadialGridSpec,
    q: &[f64],
    dq: &[f64],
) -> KernelResidual {
    let fine = sector_one_residual(params, grid.h, q, dq, 1);
    let coarse = sector_one_residual(params, grid.h, q, dq, 2);
    let dim = params.dim;
    let weight = sphere_area(dim) / dim as f64;
    let norm = |v: &[(usize, f64)], step: usize| {
        let mut acc = 0.0;
        for &(i, x) in v {
            acc += x * x * grid.r(i).powi(dim as i32 - 1);
        }
        (weight * acc * grid.h * step as f64).sqrt()
    };
    let residual = norm(&fine, 1);
    let diffs: Vec<(usize, f64)> = coarse
        .iter()
        .map(|&(i, c)| {
            let f = fine.iter().find(|p| p.0 == i).map(|p| p.1).unwrap_or(0.0);
            (i, c - f)
        })
        .collect();
    let truncation_estimate = norm(&diffs, 2) / 15.0;
    let scale = dq.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let roundoff_floor = f64::EPSILON * 64.0 / 12.0 * scale / (grid.h * grid.h);
    KernelResidual { residual, truncation_estimate, roundoff_floor }
}

/// Fourth-order stencil residual of the `ℓ = 1` radial operator applied to
/// `w = q'` with stencil spacing `step * h`.
fn sector_one_residual(
    params: &ModelParams,
    h: f64,
    q: &[f64],
    w: &[f64],
    step: usize,
) -> Vec<(usize, f64)> {
    let n = w.len();
    let dim = params.dim as f64;
    let s = step as isize;
    let at = |i: isize| if i < 0 { -w[(-i) as usize] } else { w[i as usize] };
    let hs = h * step as f64;
    let mut out = Vec::new();
    let mut i = step;
    while i + 2 * step < n {
        let k = i as isize;
        let r = i as f64 * h;
        let d2 = (-at(k + 2 * s) + 16.0 * at(k + s) - 30.0 * at(k) + 16.0 * at(k - s)
            - at(k - 2 * s))
            / (12.0 * hs * hs);
        let d1 = (-at(k + 2 * s) + 8.0 * at(k + s) - 8.0 * at(k - s) + at(k - 2 * s)) / (12.0 * hs);
        let lap = d2 + (dim - 1.0) / r * d1 - (dim - 1.0) / (r * r) * at(k);
        let res = -lap + (1.0 - params.nonlinearity_derivative(q[i])) * at(k);
        out.push((i, res));
        i += step;
    }
    out
}

/// Residual of `(ν±)² Y + 2α ν± Y + L Y = 0`, i.e. of the mode
/// `e^{ν± t}(Y, ν± Y)` in the linearized flow, with `L` applied by a
/// fourth-order stencil to the stored `Y`.
pub fn mode_residual(profile: &RadialProfile, spectral: &SpectralData, plus: bool) -> f64 {
    let params = &profile.params;
    let grid = &spectral.grid;
    let nu = if plus { spectral.nu_plus() } else { spectral.nu_minus() };
    let y = &spectral.y;
    let n = y.len();
    let at = |i: isize| y[i.unsigned_abs()];
    let h = grid.h;
    let dim = params.dim as f64;
    let mut acc = 0.0;
    for i in 1..n - 2 {
        let k = i as isize;
        let r = grid.r(i);
        let d2 = (-at(k + 2) + 16.0 * at(k + 1) - 30.0 * at(k) + 16.0 * at(k - 1) - at(k - 2))
            / (12.0 * h * h);
        let d1 = (-at(k + 2) + 8.0 * at(k + 1) - 8.0 * at(k - 1) + at(k - 2)) / (12.0 * h);
        let ly = -(d2 + (dim - 1.0) / r * d1)
            + (1.0 - params.nonlinearity_derivative(profile.eval(r))) * y[i];
        let res = nu * nu * y[i] + 2.0 * params.alpha * nu * y[i] + ly;
        acc += res * res * r.powi(params.dim as i32 - 1);
    }
    (sphere_area(params.dim) * acc * h).sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivityReport {
    /// Smallest eigenvalue of `L` on the complement of `Y` and the
    /// translation modes.
    pub lambda_perp: f64,
    /// Lowest eigenvalue per sector; sector 1 carries the translation mode.
    pub sector_lowest: Vec<f64>,
    pub c_min: f64,
    pub big_c: f64,
    pub samples: usize,
    /// Worst slack of the fitted inequality over the samples (≥ 0 passes).
    pub worst_slack: f64,
}

/// Angular normalization `∫_{S^{N-1}} |harmonic|²` of the sector basis
/// `1` and `x_1/|x|`.
fn sector_weight(dim: usize, ell: usize) -> f64 {
    match ell {
        0 => sphere_area(dim),
        _ => sphere_area(dim) / dim as f64,
    }
}

/// Test function `ε = f_0(r) + f_1(r) x_1/|x|` on a spectral grid.
#[derive(Debug, Clone)]
pub struct SectorSample {
    pub even: Vec<f64>,
    pub odd: Vec<f64>,
}

/// Evaluates `<L ε, ε>`, `||ε||²_{H¹}`, `<ε, Y>` and `<ε, ∂_1 Q>` for
/// sector samples.
pub struct CoercivityForms<'a> {
    profile: &'a RadialProfile,
    spectral: &'a SpectralData,
    grid: RadialGridSpec,
    sectors: [SectorOperator; 2],
}

impl<'a> CoercivityForms<'a> {
    pub fn new(profile: &'a RadialProfile, spectral: &'a SpectralData) -> Self {
        let grid = spectral.grid;
        let q = |r: f64| profile.eval(r);
        let sectors = [
            SectorOperator::new(&profile.params, q, &grid, 0),
            SectorOperator::new(&profile.params, q, &grid, 1),
        ];
        CoercivityForms { profile, spectral, grid, sectors }
    }

    pub fn sector(&self, ell: usize) -> &SectorOperator {
        &self.sectors[ell]
    }

    /// Sample `f` at the unknowns of sector `ell`.
    pub fn sample(&self, ell: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let op = &self.sectors[ell];
        (0..op.len()).map(|j| f(op.radius(j))).collect()
    }

    /// `(<Lε,ε>, ||ε||²_{H¹}, <ε,Y>, <ε,∂_1Q>)`.
    pub fn evaluate(&self, eps: &SectorSample) -> (f64, f64, f64, f64) {
        let params = &self.profile.params;
        let q = |r: f64| self.profile.eval(r);
        let mut lin = 0.0;
        let mut h1 = 0.0;
        for (ell, f) in [(0, &eps.even), (1, &eps.odd)] {
            let forms = self.sectors[ell].quadratic_forms(f, params, q);
            let w = sector_weight(params.dim, ell);
            lin += w * forms.lin;
            h1 += w * forms.h1;
        }
        let proj = |ell: usize, f: &[f64], g: &dyn Fn(f64) -> f64| {
            let op = &self.sectors[ell];
            let s: f64 = (0..op.len()).map(|j| op.volumes()[j] * f[j] * g(op.radius(j))).sum();
            sector_weight(params.dim, ell) * s
        };
        let y = |r: f64| self.spectral.eval(r);
        let dq = |r: f64| self.profile.function().eval3(r).1;
        (lin, h1, proj(0, &eps.even, &y), proj(1, &eps.odd, &dq))
    }

    /// Remove the `L²` projections on `Y` and `∂_1 Q`.
    pub fn project_out(&self, eps: &SectorSample) -> SectorSample {
        let strip = |ell: usize, f: &[f64], g: &dyn Fn(f64) -> f64| {
            let op = &self.sectors[ell];
            let gv: Vec<f64> = (0..op.len()).map(|j| g(op.radius(j))).collect();
            let num: f64 = (0..op.len()).map(|j| op.volumes()[j] * f[j] * gv[j]).sum();
            let den: f64 = (0..op.len()).map(|j| op.volumes()[j] * gv[j] * gv[j]).sum();
            f.iter().zip(&gv).map(|(a, b)| a - num / den * b).collect::<Vec<f64>>()
        };
        let y = |r: f64| self.spectral.eval(r);
        let dq = |r: f64| self.profile.function().eval3(r).1;
        SectorSample { even: strip(0, &eps.even, &y), odd: strip(1, &eps.odd, &dq) }
    }

    pub fn grid(&self) -> &RadialGridSpec {
        &self.grid
    }
}

fn random_bumps(rng: &mut ChaCha8Rng, forms: &CoercivityForms, ell: usize) -> Vec<f64> {
    let bumps: Vec<(f64, f64, f64)> = (0..6)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..12.0), rng.gen_range(0.3..3.0)))
        .collect();
    forms.sample(ell, |r| {
        let s: f64 = bumps.iter().map(|(a, c, w)| a * (-((r - c) / w).powi(2)).exp()).sum();
        if ell == 0 {
            s
        } else {
            s * (r / 0.5).tanh()
        }
    })
}

/// Smallest projected eigenvalue plus a sampled check of
/// `<Lε,ε> >= c ||ε||²_{H¹} - C (<ε,Y>² + <ε,∂_1Q>²)`.
pub fn coercivity_check(
    profile: &RadialProfile,
    spectral: &SpectralData,
    n_samples: usize,
    seed: u64,
) -> Result<CoercivityReport, SpectrumError> {
    let params = &profile.params;
    let grid = spectral.grid;
    let q = |r: f64| profile.eval(r);
    let forms = CoercivityForms::new(profile, spectral);
    let s0 = forms.sector(0);
    let s1 = forms.sector(1);
    let mut sector_lowest = vec![s0.eigenvalue(0), s1.eigenvalue(0)];
    let mut lambda_perp = s0.eigenvalue(1).min(s1.eigenvalue(1));
    if params.dim >= 2 {
        let s2 = SectorOperator::new(params, q, &grid, 2);
        let low = s2.eigenvalue(0);
        sector_lowest.push(low);
        lambda_perp = lambda_perp.min(low);
    }
    if !(lambda_perp > 0.0) {
        return Err(SpectrumError::CoercivityFailed(lambda_perp));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<SectorSample> = (0..n_samples)
        .map(|_| SectorSample { even: random_bumps(&mut rng, &forms, 0), odd: random_bumps(&mut rng, &forms, 1) })
        .collect();
    let mut c_min = f64::INFINITY;
    for s in &samples {
        let perp = forms.project_out(s);
        let (lin, h1, _, _) = forms.evaluate(&perp);
        c_min = c_min.min(lin / h1);
    }
    if !(c_min > 0.0) {
        return Err(SpectrumError::CoercivityFailed(c_min));
    }
    let mut big_c: f64 = 0.0;
    let mut evaluated = Vec::new();
    for s in &samples {
        let (lin, h1, py, pq) = forms.evaluate(s);
        let deficit = c_min * h1 - lin;
        let proj = py * py + pq * pq;
        if deficit > 0.0 && proj > 0.0 {
            big_c = big_c.max(deficit / proj);
        }
        evaluated.push((lin, h1, proj));
    }
    let worst_slack = evaluated
        .iter()
        .map(|(lin, h1, proj)| lin - c_min * h1 + big_c * proj)
        .fold(f64::INFINITY, f64::min);
    Ok(CoercivityReport {
        lambda_perp,
        sector_lowest,
        c_min,
        big_c,
        samples: n_samples,
        worst_slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_identities() {
        for &(nu0_sq, alpha) in &[(3.0, 1.0), (2.2, 0.1), (5.0, 3.0)] {
            let r = Rates::new(nu0_sq, alpha);
            assert!((r.nu_plus * r.zeta_plus - nu0_sq).abs() < 1e-12);
            assert!((r.nu_minus * r.zeta_minus - nu0_sq).abs() < 1e-12);
            assert!((r.beta * (r.zeta_plus - r.zeta_minus) - 1.0).abs() < 1e-12);
            assert!((r.nu_plus + r.nu_minus + 2.0 * alpha).abs() < 1e-12);
            assert!((r.nu_plus * r.nu_minus + nu0_sq).abs() < 1e-12);
            assert!((r.zeta_plus - r.nu_plus - 2.0 * alpha).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_rates_at_unit_damping() {
        let r = Rates::new(3.0, 1.0);
        for (got, want) in [
            (r.nu_plus, 1.0),
            (r.nu_minus, -3.0),
            (r.zeta_plus, 3.0),
            (r.zeta_minus, -1.0),
            (r.beta, 0.25),
        ] {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn vanishing_damping_limit() {
        let r = Rates::new(3.0, 1e-12);
        let nu0 = 3f64.sqrt();
        assert!((r.nu_plus - nu0).abs() < 1e-10);
        assert!((r.nu_minus + nu0).abs() < 1e-10);
        assert!((r.zeta_plus - nu0).abs() < 1e-10);
        assert!((r.zeta_minus + nu0).abs() < 1e-10);
    }

    #[test]
    fn sturm_count_on_free_operator() {
        // Free operator -u'' + u with Dirichlet ends on [0, 20]: eigenvalues
        // 1 + ((k+1/2)π/20)² in the Neumann sector.
        let params = ModelParams::new(1, 3.0, 1.0).unwrap();
        let grid = RadialGridSpec::new(20.0, 0.01).unwrap();
        let op = SectorOperator::new(&params, |_| 0.0, &grid, 0);
        let pi = std::f64::consts::PI;
        for k in 0..3 {
            let exact = 1.0 + ((k as f64 + 0.5) * pi / 20.0).powi(2);
            assert!((op.eigenvalue(k) - exact).abs() < 1e-4, "k = {k}");
        }
    }
}
