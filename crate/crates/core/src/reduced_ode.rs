//! Leading-order flow of the modulation parameters:
//! `ż_k = ℓ_k`, `ℓ̇_k = -2αℓ_k + (-1)^k σ ẑ g(|z|)`, `ȧ±_k = ν± a±_k`,
//! integrated by an adaptive Dormand–Prince 5(4) scheme.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::groundstate::asymptotic_tail;
use crate::interactions::GTable;
use crate::soliton::Soliton;

/// Distance below which the two solitons are considered to have collided.
pub const COLLISION_DISTANCE: f64 = 2.0;
/// Time beyond which the integrator steps in `τ = ln t`.
pub const LOG_TIME_SWITCH: f64 = 1e4;
/// Upper bound on accepted plus rejected steps of one integration.
pub const MAX_STEPS: usize = 50_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReducedError {
    #[error("separation {0} is below {COLLISION_DISTANCE}")]
    SeparationLost(f64),
    #[error("step budget exhausted at t = {0}")]
    StepBudget(f64),
    #[error("step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
    #[error("inconsistent state: {0}")]
    BadState(&'static str),
    #[error("ω did not converge: last increment {0:.3e}")]
    NotConverged(f64),
    #[error("sample times must be increasing and not before the initial time")]
    BadSchedule,
}

/// Positions, velocity parameters and exponential modes of both solitons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub t: f64,
    pub sigma: f64,
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub ell1: Vec<f64>,
    pub ell2: Vec<f64>,
    pub a1p: f64,
    pub a2p: f64,
    pub a1m: f64,
    pub a2m: f64,
}

impl ReducedState {
    /// Two solitons at rest on the first axis at `±r₀/2`.
    pub fn at_rest(dim: usize, sigma: f64, r0: f64) -> Self {
        let mut z1 = vec![0.0; dim];
        let mut z2 = vec![0.0; dim];
        z1[0] = 0.5 * r0;
        z2[0] = -0.5 * r0;
        ReducedState {
            t: 0.0,
            sigma,
            z1,
            z2,
            ell1: vec![0.0; dim],
            ell2: vec![0.0; dim],
            a1p: 0.0,
            a2p: 0.0,
            a1m: 0.0,
            a2m: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.z1.len()
    }

    /// `z = z₁ - z₂`.
    pub fn separation(&self) -> Vec<f64> {
        self.z1.iter().zip(&self.z2).map(|(a, b)| a - b).collect()
    }

    pub fn distance(&self) -> f64 {
        norm(&self.separation())
    }

    /// `ℓ = ℓ₁ - ℓ₂`.
    pub fn relative_velocity(&self) -> Vec<f64> {
        self.ell1.iter().zip(&self.ell2).map(|(a, b)| a - b).collect()
    }

    /// `r = |z + ℓ/(2α)|`.
    pub fn shifted_distance(&self, alpha: f64) -> f64 {
        let y: Vec<f64> = self
            .separation()
            .iter()
            .zip(self.relative_velocity())
            .map(|(z, l)| z + l / (2.0 * alpha))
            .collect();
        norm(&y)
    }

    fn validate(&self) -> Result<(), ReducedError> {
        let n = self.dim();
        if n == 0 || [&self.z2, &self.ell1, &self.ell2].iter().any(|v| v.len() != n) {
            return Err(ReducedError::BadState("vector lengths differ"));
        }
        if self.sigma.abs() != 1.0 {
            return Err(ReducedError::BadState("sigma must be ±1"));
        }
        if !self.pack().iter().all(|x| x.is_finite()) || !self.t.is_finite() {
            return Err(ReducedError::NonFinite(self.t));
        }
        Ok(())
    }

    fn pack(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(4 * self.dim() + 4);
        y.extend_from_slice(&self.z1);
        y.extend_from_slice(&self.z2);
        y.extend_from_slice(&self.ell1);
        y.extend_from_slice(&self.ell2);
        y.extend_from_slice(&[self.a1p, self.a2p, self.a1m, self.a2m]);
        y
    }

    fn unpack(&self, t: f64, y: &[f64]) -> Self {
        let n = self.dim();
        ReducedState {
            t,
            sigma: self.sigma,
            z1: y[..n].to_vec(),
            z2: y[n..2 * n].to_vec(),
            ell1: y[2 * n..3 * n].to_vec(),
            ell2: y[3 * n..4 * n].to_vec(),
            a1p: y[4 * n],
            a2p: y[4 * n + 1],
            a1m: y[4 * n + 2],
            a2m: y[4 * n + 3],
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Choice of the interaction function in the reduced flow.
#[derive(Debug, Clone)]
pub enum GMode {
    /// `g₀ κ r^{-(N-1)/2} e^{-r}`
    Asymptotic,
    /// Interpolated quadrature values of `g`.
    Tabulated(GTable),
}

/// Constants of the reduced flow.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub dim: usize,
    pub alpha: f64,
    pub g0: f64,
    pub kappa: f64,
    pub nu_plus: f64,
    pub nu_minus: f64,
    pub g_mode: GMode,
}

impl ReducedModel {
    pub fn from_soliton(soliton: &Soliton, g_mode: GMode) -> Self {
        ReducedModel {
            dim: soliton.params.dim,
            alpha: soliton.params.alpha,
            g0: soliton.profile.g0,
            kappa: soliton.profile.kappa,
            nu_plus: soliton.spectral.nu_plus(),
            nu_minus: soliton.spectral.nu_minus(),
            g_mode,
        }
    }

    pub fn g(&self, r: f64) -> f64 {
        match &self.g_mode {
            GMode::Asymptotic => self.g0 * asymptotic_tail(self.kappa, self.dim, r),
            GMode::Tabulated(table) => table.eval(r),
        }
    }

    /// `1/q_asym(r)`; the distance law makes this grow like `(g₀/α) t`.
    pub fn inverse_tail(&self, r: f64) -> f64 {
        1.0 / asymptotic_tail(self.kappa, self.dim, r)
    }

    /// Time derivative of `state`, as a state whose fields hold the rates.
    pub fn rhs(&self, state: &ReducedState) -> Result<ReducedState, ReducedError> {
        state.validate()?;
        if state.dim() != self.dim {
            return Err(ReducedError::BadState("dimension does not match the model"));
        }
        let r = state.distance();
        if r < COLLISION_DISTANCE {
            return Err(ReducedError::SeparationLost(r));
        }
        let mut d = vec![0.0; 4 * self.dim + 4];
        self.rhs_into(state.sigma, &state.pack(), &mut d);
        Ok(state.unpack(1.0, &d))
    }

    fn rhs_into(&self, sigma: f64, y: &[f64], out: &mut [f64]) {
        let n = self.dim;
        let r = (0..n).map(|j| (y[j] - y[n + j]).powi(2)).sum::<f64>().sqrt();
        let force = sigma * self.g(r) / r;
        for j in 0..n {
            let zhat = y[j] - y[n + j];
            out[j] = y[2 * n + j];
            out[n + j] = y[3 * n + j];
            out[2 * n + j] = -2.0 * self.alpha * y[2 * n + j] - force * zhat;
            out[3 * n + j] = -2.0 * self.alpha * y[3 * n + j] + force * zhat;
        }
        out[4 * n] = self.nu_plus * y[4 * n];
        out[4 * n + 1] = self.nu_plus * y[4 * n + 1];
        out[4 * n + 2] = self.nu_minus * y[4 * n + 2];
        out[4 * n + 3] = self.nu_minus * y[4 * n + 3];
    }
}

/// How an integration ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Completed,
    /// `|z|` reached [`COLLISION_DISTANCE`] at time `t`.
    Collision { t: f64 },
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<ReducedState>,
    pub outcome: Outcome,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// Uniform samples with spacing `dt` up to `t_uniform`, then `per_decade`
/// geometrically spaced samples up to `t_end`.
pub fn sample_times(t0: f64, t_end: f64, dt: f64, t_uniform: f64, per_decade: usize) -> Vec<f64> {
    let mut times = Vec::new();
    let mut k = 1;
    loop {
        let t = t0 + k as f64 * dt;
        if t > t_uniform.min(t_end) + 1e-12 {
            break;
        }
        times.push(t);
        k += 1;
    }
    let mut t = times.last().copied().unwrap_or(t0);
    let ratio = 10f64.powf(1.0 / per_decade as f64);
    while t < t_end {
        t = (t * ratio).min(t_end);
        times.push(t);
    }
    times
}

/// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Stepping variable: `t` itself, or `τ = ln t` past the switch.
#[derive(Clone, Copy, PartialEq)]
enum Clock {
    Linear,
    Log,
}

impl Clock {
    fn var(self, t: f64) -> f64 {
        match self {
            Clock::Linear => t,
            Clock::Log => t.ln(),
        }
    }

    fn time(self, s: f64) -> f64 {
        match self {
            Clock::Linear => s,
            Clock::Log => s.exp(),
        }
    }
}

struct Stepper<'a> {
    model: &'a ReducedModel,
    sigma: f64,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(model: &'a ReducedModel, sigma: f64, len: usize) -> Self {
        Stepper { model, sigma, k: std::array::from_fn(|_| vec![0.0; len]), tmp: vec![0.0; len] }
    }

    fn deriv(&self, clock: Clock, s: f64, y: &[f64], out: &mut [f64]) {
        self.model.rhs_into(self.sigma, y, out);
        if clock == Clock::Log {
            let t = s.exp();
            out.iter_mut().for_each(|x| *x *= t);
        }
    }

    /// One step of size `h`; returns the fifth-order solution and the
    /// embedded error vector.
    fn step(&mut self, clock: Clock, s: f64, y: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
        let n = y.len();
        for stage in 0..7 {
            for i in 0..n {
                self.tmp[i] = y[i] + h * (0..stage).map(|j| A[stage][j] * self.k[j][i]).sum::<f64>();
            }
            let mut out = std::mem::take(&mut self.k[stage]);
            self.deriv(clock, s + C[stage] * h, &self.tmp, &mut out);
            self.k[stage] = out;
        }
        let y5: Vec<f64> =
            (0..n).map(|i| y[i] + h * (0..7).map(|j| B5[j] * self.k[j][i]).sum::<f64>()).collect();
        let err: Vec<f64> =
            (0..n).map(|i| h * (0..7).map(|j| (B5[j] - B4[j]) * self.k[j][i]).sum::<f64>()).collect();
        (y5, err)
    }
}

fn separation_of(y: &[f64], n: usize) -> f64 {
    (0..n).map(|j| (y[j] - y[n + j]).powi(2)).sum::<f64>().sqrt()
}

/// Integrate from `state0` and record the state at each of `times`.
/// A collision ends the run early with the collision state as last sample.
pub fn integrate_at(
    model: &ReducedModel,
    state0: &ReducedState,
    times: &[f64],
    rtol: f64,
) -> Result<Trajectory, ReducedError> {
    model.rhs(state0)?;
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.first().is_some_and(|&t| t < state0.t) {
        return Err(ReducedError::BadSchedule);
    }
    let n = model.dim;
    let atol = rtol * 1e-6;
    let mut y = state0.pack();
    let mut t = state0.t;
    let mut stepper = Stepper::new(model, state0.sigma, y.len());
    let mut samples = vec![state0.clone()];
    let mut h_t: f64 = 1e-3;
    let (mut accepted, mut rejected) = (0, 0);
    let mut next = 0;
    while next < times.len() {
        // Targets closer than round-off are taken as reached.
        if (times[next] - t).abs() <= 1e-13 * t.abs() {
            t = times[next];
            samples.push(state0.unpack(t, &y));
            next += 1;
            continue;
        }
        if accepted + rejected >= MAX_STEPS {
            return Err(ReducedError::StepBudget(t));
        }
        let clock =
            if t >= LOG_TIME_SWITCH * (1.0 - 1e-12) { Clock::Log } else { Clock::Linear };
        let s = clock.var(t);
        let mut target_t = times[next];
        if clock == Clock::Linear && target_t > LOG_TIME_SWITCH && t < LOG_TIME_SWITCH {
            target_t = LOG_TIME_SWITCH;
        }
        let target = clock.var(target_t);
        let mut h = match clock {
            Clock::Linear => h_t,
            Clock::Log => h_t / t,
        };
        let mut hit = false;
        if s + h >= target {
            h = target - s;
            hit = true;
        }
        if !(h > 1e-14 * s.abs().max(1e-3)) {
            return Err(ReducedError::StepUnderflow(t));
        }
        let (y_new, err) = stepper.step(clock, s, &y, h);
        let e = (err
            .iter()
            .zip(y.iter().zip(&y_new))
            .map(|(e, (a, b))| (e / (atol + rtol * a.abs().max(b.abs()))).powi(2))
            .sum::<f64>()
            / y.len() as f64)
            .sqrt();
        if !e.is_finite() {
            h_t *= 0.2;
            rejected += 1;
            continue;
        }
        let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
        if e > 1.0 {
            let h_new = h * factor.min(1.0);
            h_t = match clock {
                Clock::Linear => h_new,
                Clock::Log => h_new * t,
            };
            rejected += 1;
            continue;
        }
        accepted += 1;
        let s_new = if hit { target } else { s + h };
        let t_new = if hit { target_t } else { clock.time(s_new) };
        if separation_of(&y_new, n) < COLLISION_DISTANCE {
            let (tc, yc) = locate_collision(&mut stepper, clock, s, &y, h, n);
            let state = state0.unpack(tc, &yc);
            samples.push(state);
            return Ok(Trajectory {
                samples,
                outcome: Outcome::Collision { t: tc },
                accepted_steps: accepted,
                rejected_steps: rejected,
            });
        }
        if !y_new.iter().all(|x| x.is_finite()) {
            return Err(ReducedError::NonFinite(t_new));
        }
        // Keep the proposed size unless the step was clipped to a target.
        let h_next = if hit { h.max(h * factor) } else { h * factor };
        h_t = match clock {
            Clock::Linear => h_next,
            Clock::Log => h_next * t_new,
        };
        y = y_new;
        t = t_new;
        if hit && target_t == times[next] {
            samples.push(state0.unpack(t, &y));
            next += 1;
        }
    }
    Ok(Trajectory { samples, outcome: Outcome::Completed, accepted_steps: accepted, rejected_steps: rejected })
}

/// Bisect the step size for the crossing of `|z| = COLLISION_DISTANCE`.
fn locate_collision(
    stepper: &mut Stepper,
    clock: Clock,
    s: f64,
    y: &[f64],
    h: f64,
    n: usize,
) -> (f64, Vec<f64>) {
    let (mut lo, mut hi) = (0.0, h);
    let mut y_hi = stepper.step(clock, s, y, h).0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let y_mid = stepper.step(clock, s, y, mid).0;
        if separation_of(&y_mid, n) < COLLISION_DISTANCE {
            hi = mid;
            y_hi = y_mid;
        } else {
            lo = mid;
        }
    }
    (clock.time(s + hi), y_hi)
}

/// Integrate to `t_end` with the default sampling: spacing 0.1 up to
/// `t = 10`, then 20 samples per decade.
pub fn integrate(
    model: &ReducedModel,
    state0: &ReducedState,
    t_end: f64,
    rtol: f64,
) -> Result<Trajectory, ReducedError> {
    let times = sample_times(state0.t, t_end, 0.1, state0.t + 10.0, 20);
    integrate_at(model, state0, &times, rtol)
}

/// `ln t - ((N-1)/2) ln ln t + ln(κ g₀ / α)`.
pub fn asymptotic_distance(t: f64, dim: usize, alpha: f64, kappa: f64, g0: f64) -> f64 {
    t.ln() - 0.5 * (dim as f64 - 1.0) * t.ln().ln() + (kappa * g0 / alpha).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaReport {
    pub omega: Vec<f64>,
    /// `(t, |ω(t) - ω(2t)|)` for consecutive dyadic samples.
    pub increments: Vec<(f64, f64)>,
}

/// Dyadic sample times `2^k_min, ..., 2^k_max`.
pub fn dyadic_times(k_min: i32, k_max: i32) -> Vec<f64> {
    (k_min..=k_max).map(|k| 2f64.powi(k)).collect()
}

/// Direction `z/|z|` at the last sample together with the Cauchy increments
/// over the samples whose times are powers of two.
pub fn omega_limit(trajectory: &Trajectory) -> Result<OmegaReport, ReducedError> {
    let direction = |s: &ReducedState| {
        let z = s.separation();
        let r = norm(&z);
        z.iter().map(|x| x / r).collect::<Vec<f64>>()
    };
    let dyadic: Vec<&ReducedState> = trajectory
        .samples
        .iter()
        .filter(|s| s.t >= 1.0 && {
            let k = s.t.log2().round();
            (s.t - 2f64.powf(k)).abs() <= 1e-12 * s.t
        })
        .collect();
    let increments: Vec<(f64, f64)> = dyadic
        .windows(2)
        .map(|w| {
            let (a, b) = (direction(w[0]), direction(w[1]));
            (w[0].t, norm(&a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<f64>>()))
        })
        .collect();
    let last = increments.last().map(|x| x.1).unwrap_or(f64::INFINITY);
    if trajectory.outcome != Outcome::Completed || !(last < 1e-6) {
        return Err(ReducedError::NotConverged(last));
    }
    let omega = direction(trajectory.samples.last().expect("non-empty trajectory"));
    Ok(OmegaReport { omega, increments })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic_model() -> ReducedModel {
        ReducedModel {
            dim: 1,
            alpha: 1.0,
            g0: 3.0 * 2f64.sqrt(),
            kappa: 2.0 * 2f64.sqrt(),
            nu_plus: 1.0,
            nu_minus: -3.0,
            g_mode: GMode::Asymptotic,
        }
    }

    #[test]
    fn sample_times_are_increasing() {
        let t = sample_times(0.0, 1e3, 0.1, 10.0, 20);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*t.last().unwrap(), 1e3);
        assert!((t[99] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_modes_are_exact_linear_growth() {
        let model = cubic_model();
        let mut s = ReducedState::at_rest(1, -1.0, 10.0);
        s.a1p = 1e-6;
        s.a2m = 1.0;
        let traj = integrate_at(&model, &s, &[1.0, 5.0], 1e-12).unwrap();
        let end = traj.samples.last().unwrap();
        assert!((end.a1p / (1e-6 * 5f64.exp()) - 1.0).abs() < 1e-9);
        assert!((end.a2m / (-15f64).exp() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn collision_is_a_terminal_event() {
        let model = cubic_model();
        let s = ReducedState::at_rest(1, 1.0, 4.0);
        let traj = integrate(&model, &s, 100.0, 1e-10).unwrap();
        let Outcome::Collision { t } = traj.outcome else { panic!("no collision") };
        let last = traj.samples.last().unwrap();
        assert_eq!(last.t, t);
        assert!((last.distance() - COLLISION_DISTANCE).abs() < 1e-9);
    }
}
