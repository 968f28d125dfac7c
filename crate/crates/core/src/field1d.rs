//! One-dimensional time stepping of the damped Klein-Gordon equation.
//!
//! Leapfrog in time with the damping term treated implicitly and a
//! fourth-order central Laplacian in space. Homogeneous Dirichlet values are
//! imposed at both ends of a padded domain.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::ModelParams;
use crate::quad::simpson;
use crate::real::Real;
use crate::soliton::Soliton;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("grid needs at least 1001 nodes and x_max > x_min (n = {n})")]
    BadGrid { n: usize },
    #[error("grid [{x_min}, {x_max}] does not cover solitons at {centers:?} with 20 units of padding")]
    GridTooSmall { x_min: f64, x_max: f64, centers: Vec<f64> },
    #[error("dt = {dt} exceeds the stability bound 0.5 h = {bound}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("blowup at t = {t}: max |u| = {max_abs:e}")]
    Blowup { t: f64, max_abs: f64 },
    #[error("solution reached the boundary at t = {t}: |u| = {value:e}")]
    BoundaryContact { t: f64, value: f64 },
    #[error("non-finite value at t = {0}")]
    NonFinite(f64),
    #[error("initial data arrays have length {got}, grid has {want} nodes")]
    LengthMismatch { got: usize, want: usize },
    #[error("energy samples are not uniformly spaced in time")]
    NonUniformSamples,
    #[error("unstable corrector: {0}")]
    Corrector(#[from] crate::modulation::ModulationError),
}

/// Blowup threshold on `max |u|`.
pub const BLOWUP_THRESHOLD: f64 = 1e6;
/// Boundary contamination threshold.
pub const BOUNDARY_THRESHOLD: f64 = 1e-8;
/// Number of nodes next to each end that are watched for boundary contact.
const BOUNDARY_WATCH: usize = 3;
/// Padding required between the outermost soliton and the ends.
pub const PADDING: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self, FieldError> {
        if n < 1001 || !(x_max > x_min) {
            return Err(FieldError::BadGrid { n });
        }
        Ok(Grid1D { x_min, x_max, n })
    }

    /// Grid on `[-half_width, half_width]` with spacing close to `h` and an
    /// odd node count, so `x = 0` is a node and the grid is mirror
    /// symmetric.
    pub fn symmetric(half_width: f64, h: f64) -> Result<Self, FieldError> {
        let half = (half_width / h).round() as usize;
        let width = half as f64 * h;
        Self::new(-width, width, 2 * half + 1)
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        let c = (self.n - 1) as f64 / 2.0;
        let mid = 0.5 * (self.x_min + self.x_max);
        mid + (i as f64 - c) * self.h()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Check that solitons centred at `centers` keep the padding.
    pub fn check_covers(&self, centers: &[f64]) -> Result<(), FieldError> {
        let lo = centers.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = centers.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if lo - PADDING < self.x_min || hi + PADDING > self.x_max {
            return Err(FieldError::GridTooSmall {
                x_min: self.x_min,
                x_max: self.x_max,
                centers: centers.to_vec(),
            });
        }
        Ok(())
    }
}

/// Discretized pair `(u, v = u_t)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState<T = f64> {
    pub grid: Grid1D,
    pub u: Vec<T>,
    pub v: Vec<T>,
    pub t: f64,
}

impl<T: Real> FieldState<T> {
    pub fn zeros(grid: Grid1D) -> Self {
        FieldState { grid, u: vec![T::zero(); grid.n], v: vec![T::zero(); grid.n], t: 0.0 }
    }

    pub fn to_f64(&self) -> FieldState<f64> {
        FieldState {
            grid: self.grid,
            u: self.u.iter().map(|x| x.as_f64()).collect(),
            v: self.v.iter().map(|x| x.as_f64()).collect(),
            t: self.t,
        }
    }
}

impl FieldState<f64> {
    pub fn convert<T: Real>(&self) -> FieldState<T> {
        FieldState {
            grid: self.grid,
            u: self.u.iter().map(|&x| T::of(x)).collect(),
            v: self.v.iter().map(|&x| T::of(x)).collect(),
            t: self.t,
        }
    }

    /// `sum h (u_x² + u² + v²)` with the fourth-order derivative stencil.
    pub fn energy_norm_sq(&self) -> f64 {
        energy_norm_sq(&self.grid, &self.u, &self.v)
    }
}

/// `||(u, v)||²_{H¹×L²}` by Simpson's rule.
pub fn energy_norm_sq(grid: &Grid1D, u: &[f64], v: &[f64]) -> f64 {
    let ux = derivative(u, grid.h());
    let density: Vec<f64> =
        (0..grid.n).map(|i| ux[i] * ux[i] + u[i] * u[i] + v[i] * v[i]).collect();
    simpson(&density, grid.h())
}

/// Fourth-order central first derivative with zero ghost values.
pub fn derivative(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    let at = |i: isize| if i < 0 || i as usize >= n { 0.0 } else { u[i as usize] };
    (0..n as isize)
        .map(|i| (-at(i + 2) + 8.0 * at(i + 1) - 8.0 * at(i - 1) + at(i - 2)) / (12.0 * h))
        .collect()
}

/// Fourth-order central Laplacian with zero ghost values, written in the
/// mirror-symmetric form so odd data stays exactly odd.
fn laplacian_into<T: Real>(u: &[T], h: f64, out: &mut [T]) {
    let n = u.len();
    let at = |i: isize| if i < 0 || i as usize >= n { T::zero() } else { u[i as usize] };
    let scale = T::of(1.0 / (12.0 * h * h));
    let c16 = T::of(16.0);
    let c30 = T::of(30.0);
    for (i, o) in out.iter_mut().enumerate() {
        let k = i as isize;
        let outer = at(k + 2) + at(k - 2);
        let inner = at(k + 1) + at(k - 1);
        *o = (c16 * inner - outer - c30 * u[i]) * scale;
    }
}

/// Physical energy `½∫(u_x² + u² + v²) - ∫F(u)`.
pub fn energy(state: &FieldState<f64>, params: &ModelParams) -> f64 {
    let h = state.grid.h();
    let ux = derivative(&state.u, h);
    let density: Vec<f64> = (0..state.grid.n)
        .map(|i| {
            let (u, v) = (state.u[i], state.v[i]);
            0.5 * (ux[i] * ux[i] + u * u + v * v) - params.potential(u)
        })
        .collect();
    simpson(&density, h)
}

/// `||v||²_{L²}` by Simpson's rule.
pub fn kinetic_norm_sq(state: &FieldState<f64>) -> f64 {
    let sq: Vec<f64> = state.v.iter().map(|v| v * v).collect();
    simpson(&sq, state.grid.h())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub t: f64,
    pub energy: f64,
    pub v_norm_sq: f64,
}

impl EnergySample {
    pub fn of(state: &FieldState<f64>, params: &ModelParams) -> Self {
        EnergySample { t: state.t, energy: energy(state, params), v_norm_sq: kinetic_norm_sq(state) }
    }
}

/// Relative defect of `E(t2) - E(t1) = -2α ∫ ||v||² dt` between the first
/// and last sample, with the time integral by the trapezoid rule.
pub fn dissipation_check(samples: &[EnergySample], params: &ModelParams) -> Result<f64, FieldError> {
    if samples.len() < 2 {
        return Ok(0.0);
    }
    let dt = samples[1].t - samples[0].t;
    for w in samples.windows(2) {
        if ((w[1].t - w[0].t) - dt).abs() > 1e-9 * dt.abs().max(1e-300) {
            return Err(FieldError::NonUniformSamples);
        }
    }
    let v: Vec<f64> = samples.iter().map(|s| s.v_norm_sq).collect();
    let integral = crate::quad::trapezoid(&v, dt);
    let (first, last) = (samples[0], samples[samples.len() - 1]);
    Ok((last.energy - first.energy + 2.0 * params.alpha * integral).abs() / (first.energy.abs() + 1.0))
}

/// Leapfrog stepper
/// `(u⁺ - 2u + u⁻)/dt² + α(u⁺ - u⁻)/dt = D₄u - u + f(u)`.
#[derive(Debug, Clone)]
pub struct Leapfrog<T: Real> {
    grid: Grid1D,
    p: f64,
    dt: f64,
    t0: f64,
    steps: u64,
    prev: Vec<T>,
    cur: Vec<T>,
    next: Vec<T>,
    v0: Vec<T>,
    lap: Vec<T>,
    c_cur: T,
    c_prev: T,
    c_force: T,
}

impl<T: Real> Leapfrog<T> {
    pub fn new(state: &FieldState<T>, params: &ModelParams, dt: f64) -> Result<Self, FieldError> {
        let grid = state.grid;
        let h = grid.h();
        if !(dt > 0.0 && dt <= 0.5 * h) {
            return Err(FieldError::CflViolation { dt, bound: 0.5 * h });
        }
        if state.u.len() != grid.n || state.v.len() != grid.n {
            return Err(FieldError::LengthMismatch { got: state.u.len(), want: grid.n });
        }
        let a = params.alpha * dt;
        let mut stepper = Leapfrog {
            grid,
            p: params.p,
            dt,
            t0: state.t,
            steps: 0,
            prev: vec![T::zero(); grid.n],
            cur: state.u.clone(),
            next: vec![T::zero(); grid.n],
            v0: state.v.clone(),
            lap: vec![T::zero(); grid.n],
            c_cur: T::of(2.0 / (1.0 + a)),
            c_prev: T::of((1.0 - a) / (1.0 + a)),
            c_force: T::of(dt * dt / (1.0 + a)),
        };
        stepper.bootstrap(params.alpha);
        stepper.check()?;
        Ok(stepper)
    }

    /// `u¹ = u⁰ + dt v⁰ + dt²/2 (D₄u⁰ - u⁰ + f(u⁰) - 2α v⁰)`.
    fn bootstrap(&mut self, alpha: f64) {
        laplacian_into(&self.cur, self.grid.h(), &mut self.lap);
        let dt = T::of(self.dt);
        let half = T::of(0.5 * self.dt * self.dt);
        let two_alpha = T::of(2.0 * alpha);
        let last = self.grid.n - 1;
        for i in 0..self.grid.n {
            let u = self.cur[i];
            let accel = self.lap[i] - u + u.signed_pow(self.p) - two_alpha * self.v0[i];
            self.next[i] = u + dt * self.v0[i] + half * accel;
        }
        self.next[0] = T::zero();
        self.next[last] = T::zero();
    }

    pub fn time(&self) -> f64 {
        self.t0 + self.steps as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// Current displacement `u^n`.
    pub fn u(&self) -> &[T] {
        &self.cur
    }

    /// State at the current time, with `v^n = (u^{n+1} - u^{n-1}) / (2 dt)`.
    pub fn state(&self) -> FieldState<T> {
        let v = if self.steps == 0 {
            self.v0.clone()
        } else {
            let inv = T::of(0.5 / self.dt);
            self.next.iter().zip(&self.prev).map(|(a, b)| (*a - *b) * inv).collect()
        };
        FieldState { grid: self.grid, u: self.cur.clone(), v, t: self.time() }
    }

    /// Advance one step.
    pub fn step(&mut self) -> Result<(), FieldError> {
        std::mem::swap(&mut self.prev, &mut self.cur);
        std::mem::swap(&mut self.cur, &mut self.next);
        self.steps += 1;
        laplacian_into(&self.cur, self.grid.h(), &mut self.lap);
        let last = self.grid.n - 1;
        for i in 1..last {
            let u = self.cur[i];
            let force = self.lap[i] - u + u.signed_pow(self.p);
            self.next[i] = self.c_cur * u - self.c_prev * self.prev[i] + self.c_force * force;
        }
        self.next[0] = T::zero();
        self.next[last] = T::zero();
        self.check()
    }

    pub fn advance(&mut self, steps: u64) -> Result<(), FieldError> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    fn check(&self) -> Result<(), FieldError> {
        let t = self.time();
        let mut max_abs = 0.0f64;
        for x in &self.cur {
            let a = x.as_f64().abs();
            if !a.is_finite() {
                return Err(FieldError::NonFinite(t));
            }
            max_abs = max_abs.max(a);
        }
        if max_abs > BLOWUP_THRESHOLD {
            return Err(FieldError::Blowup { t, max_abs });
        }
        let n = self.grid.n;
        let edge = (1..=BOUNDARY_WATCH).chain(n - 1 - BOUNDARY_WATCH..n - 1);
        for i in edge {
            let value = self.cur[i].as_f64().abs();
            if value > BOUNDARY_THRESHOLD {
                return Err(FieldError::BoundaryContact { t, value });
            }
        }
        Ok(())
    }
}

/// Optional additive perturbation `(δu, δv)` sampled on the grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Perturbation {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Modulation parameters of a two-soliton configuration together with an
/// orthogonal remainder `ε⊥`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gamma {
    pub sigma: [f64; 2],
    pub z: [f64; 2],
    pub ell: [f64; 2],
    pub eps_perp: Option<Perturbation>,
}

/// Form of the initial data.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDataSpec {
    /// `Σ σ_k Q(x - z_k)`, second component `-ℓ_k ∂_x Q_k`.
    PlainPair { sigma: [f64; 2], z: [f64; 2], ell: [f64; 2], perturbation: Option<Perturbation> },
    /// `(Q + h₁Y⁺)(x - L/2) - (Q + h₂Y⁺)(x + L/2) + φ` with `Y⁺ = (Y, ν⁺Y)`.
    ShootingPair { l: f64, h: [f64; 2], phi: Option<Perturbation> },
    /// `Q₁ + Q₂ + W(a⁺) + ε⊥` around the modulation parameters `Γ`.
    Manifold { gamma: Gamma, a_plus: [f64; 2] },
    /// A single `σ Q(x - z)` with velocity parameter `ℓ`.
    Single { sigma: f64, z: f64, ell: f64, perturbation: Option<Perturbation> },
}

impl InitialDataSpec {
    pub fn centers(&self) -> Vec<f64> {
        match self {
            InitialDataSpec::PlainPair { z, .. } => z.to_vec(),
            InitialDataSpec::ShootingPair { l, .. } => vec![0.5 * l, -0.5 * l],
            InitialDataSpec::Manifold { gamma, .. } => gamma.z.to_vec(),
            InitialDataSpec::Single { z, .. } => vec![*z],
        }
    }
}

/// Sample `σ Q(x - z)` and its velocity field `-ℓ σ Q'(x - z)`.
pub fn add_soliton(soliton: &Soliton, grid: &Grid1D, sigma: f64, z: f64, ell: f64, u: &mut [f64], v: &mut [f64]) {
    for i in 0..grid.n {
        let (q, dq, _) = soliton.q_line(grid.x(i) - z);
        u[i] += sigma * q;
        v[i] -= ell * sigma * dq;
    }
}

/// Sample `c (Y, ν⁺Y)(x - z)`.
pub fn add_unstable_mode(soliton: &Soliton, grid: &Grid1D, c: f64, z: f64, u: &mut [f64], v: &mut [f64]) {
    let nu = soliton.spectral.nu_plus();
    for i in 0..grid.n {
        let (y, _, _) = soliton.y_line(grid.x(i) - z);
        u[i] += c * y;
        v[i] += c * nu * y;
    }
}

fn add_perturbation(p: &Option<Perturbation>, u: &mut [f64], v: &mut [f64]) -> Result<(), FieldError> {
    if let Some(p) = p {
        if p.u.len() != u.len() || p.v.len() != v.len() {
            return Err(FieldError::LengthMismatch { got: p.u.len(), want: u.len() });
        }
        u.iter_mut().zip(&p.u).for_each(|(a, b)| *a += b);
        v.iter_mut().zip(&p.v).for_each(|(a, b)| *a += b);
    }
    Ok(())
}

/// Sample the requested initial data on `grid`.
pub fn build_initial_data(
    spec: &InitialDataSpec,
    soliton: &Soliton,
    grid: &Grid1D,
) -> Result<FieldState<f64>, FieldError> {
    grid.check_covers(&spec.centers())?;
    let mut state = FieldState::zeros(*grid);
    let (u, v) = (&mut state.u, &mut state.v);
    match spec {
        InitialDataSpec::PlainPair { sigma, z, ell, perturbation } => {
            for k in 0..2 {
                add_soliton(soliton, grid, sigma[k], z[k], ell[k], u, v);
            }
            add_perturbation(perturbation, u, v)?;
        }
        InitialDataSpec::ShootingPair { l, h, phi } => {
            add_soliton(soliton, grid, 1.0, 0.5 * l, 0.0, u, v);
            add_soliton(soliton, grid, -1.0, -0.5 * l, 0.0, u, v);
            add_unstable_mode(soliton, grid, h[0], 0.5 * l, u, v);
            add_unstable_mode(soliton, grid, -h[1], -0.5 * l, u, v);
            add_perturbation(phi, u, v)?;
        }
        InitialDataSpec::Manifold { gamma, a_plus } => {
            for k in 0..2 {
                add_soliton(soliton, grid, gamma.sigma[k], gamma.z[k], gamma.ell[k], u, v);
            }
            let geometry = crate::modulation::PairGeometry { sigma: gamma.sigma, z: gamma.z };
            let w = crate::modulation::build_w(*a_plus, &geometry, soliton, grid)?;
            u.iter_mut().zip(&w.u).for_each(|(a, b)| *a += b);
            v.iter_mut().zip(&w.v).for_each(|(a, b)| *a += b);
            add_perturbation(&gamma.eps_perp, u, v)?;
        }
        InitialDataSpec::Single { sigma, z, ell, perturbation } => {
            add_soliton(soliton, grid, *sigma, *z, *ell, u, v);
            add_perturbation(perturbation, u, v)?;
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_grid_is_mirror_symmetric() {
        let g = Grid1D::symmetric(26.0, 0.05).unwrap();
        assert_eq!(g.n % 2, 1);
        for i in 0..g.n {
            assert_eq!(g.x(i), -g.x(g.n - 1 - i));
        }
        assert_eq!(g.x(g.n / 2), 0.0);
    }

    #[test]
    fn zero_data_stays_zero() {
        let params = ModelParams::cubic_1d();
        let grid = Grid1D::symmetric(30.0, 0.05).unwrap();
        let mut lf = Leapfrog::new(&FieldState::<f64>::zeros(grid), &params, 0.025).unwrap();
        lf.advance(200).unwrap();
        let s = lf.state();
        assert!(s.u.iter().chain(&s.v).all(|&x| x == 0.0));
        assert_eq!(energy(&s, &params), 0.0);
    }

    #[test]
    fn cfl_is_enforced() {
        let params = ModelParams::cubic_1d();
        let grid = Grid1D::symmetric(30.0, 0.05).unwrap();
        let err = Leapfrog::new(&FieldState::<f64>::zeros(grid), &params, 0.03).unwrap_err();
        assert!(matches!(err, FieldError::CflViolation { .. }));
    }

    #[test]
    fn dissipation_of_zero_data_is_zero() {
        let params = ModelParams::new(1, 3.0, 0.7).unwrap();
        let samples: Vec<EnergySample> =
            (0..10).map(|k| EnergySample { t: k as f64 * 0.1, energy: 0.0, v_norm_sq: 0.0 }).collect();
        assert_eq!(dissipation_check(&samples, &params).unwrap(), 0.0);
    }
}
