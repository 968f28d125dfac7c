//! Radial ground state `q(r)` of `q'' + (N-1)/r q' - q + q^p = 0`.
//!
//! The profile is found by bisection on `q(0)`; the far tail, where forward
//! shooting is dominated by the growing mode, is replaced by a backward
//! integration of the same ODE from `r_max` matched in value.

use thiserror::Error;

use crate::params::{abs_power, signed_power, sphere_area, ModelParams, ParamError};
use crate::quad::simpson;
use crate::radial::{GridError, RadialFunction, RadialGridSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroundStateError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("no sign change of the shooting classifier in q(0) in [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("bisection stalled at width {width:e} above tolerance {tol:e}")]
    ToleranceNotReached { width: f64, tol: f64 },
    #[error("fit window [{0}, {1}] is not inside [r_max/2, r_max - 2]")]
    BadWindow(f64, f64),
    #[error("decay amplitude varies by {spread:e} over the fit window (bound {bound:e})")]
    WindowUnstable { spread: f64, bound: f64 },
    #[error("e^r q^p is not summable on the grid (tail ratio {0:e})")]
    QuadratureOverflow(f64),
    #[error("profile is not positive and decreasing at r = {0}")]
    NotMonotone(f64),
}

/// Relative spread of the decay amplitude accepted by [`extract_kappa`].
pub const KAPPA_SPREAD_BOUND: f64 = 1e-2;

/// Fraction of `q(0)` below which the forward-shot profile is replaced by
/// the backward tail.
const TAIL_SWITCH: f64 = 1e-1;

/// Number of intervals of the angular rule for `A_N`.
const ANGULAR_INTERVALS: usize = 512;

#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub params: ModelParams,
    pub grid: RadialGridSpec,
    pub q: Vec<f64>,
    pub dq: Vec<f64>,
    pub q0: f64,
    pub kappa: f64,
    pub kappa_spread: f64,
    pub c1: f64,
    pub g0: f64,
    pub e_q: f64,
    /// Radius where the forward and backward branches are joined.
    pub match_radius: f64,
    /// Relative slope jump at the joining radius.
    pub slope_mismatch: f64,
    interp: RadialFunction,
}

impl RadialProfile {
    /// C² interpolant of `q` (with `q'`, `q''`).
    pub fn function(&self) -> &RadialFunction {
        &self.interp
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.interp.eval(r)
    }

    /// Leading tail `kappa r^{-(N-1)/2} e^{-r}`.
    pub fn q_asym(&self, r: f64) -> f64 {
        asymptotic_tail(self.kappa, self.params.dim, r)
    }

    pub fn r(&self, i: usize) -> f64 {
        self.grid.r(i)
    }
}

pub fn asymptotic_tail(kappa: f64, dim: usize, r: f64) -> f64 {
    kappa * r.powf(-0.5 * (dim as f64 - 1.0)) * (-r).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shot {
    Crosses,
    TurnsUp,
}

fn second_derivative(params: &ModelParams, r: f64, q: f64, dq: f64) -> f64 {
    let n = params.dim as f64;
    if r == 0.0 {
        (q - signed_power(q, params.p)) / n
    } else {
        q - signed_power(q, params.p) - (n - 1.0) / r * dq
    }
}

fn rk4(params: &ModelParams, r: f64, q: f64, dq: f64, h: f64) -> (f64, f64) {
    let f = |r: f64, q: f64, dq: f64| (dq, second_derivative(params, r, q, dq));
    let (k1q, k1d) = f(r, q, dq);
    let (k2q, k2d) = f(r + 0.5 * h, q + 0.5 * h * k1q, dq + 0.5 * h * k1d);
    let (k3q, k3d) = f(r + 0.5 * h, q + 0.5 * h * k2q, dq + 0.5 * h * k2d);
    let (k4q, k4d) = f(r + h, q + h * k3q, dq + h * k3d);
    (
        q + h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q),
        dq + h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d),
    )
}

/// Largest radius at which the profile is taken from its Taylor series at
/// the origin; beyond it the `(N-1)/r` coefficient is smooth on the step
/// scale. Steep profiles use a smaller radius, set by the size of the last
/// retained term.
const SERIES_RADIUS: f64 = 0.1;
const SERIES_TERMS: usize = 12;

fn series_nodes(grid: &RadialGridSpec, c: &[f64; SERIES_TERMS]) -> usize {
    let last = c[SERIES_TERMS - 1].abs();
    let exponent = 1.0 / (2.0 * (SERIES_TERMS - 1) as f64);
    let radius = if last > 0.0 {
        SERIES_RADIUS.min((1e-17 * c[0].abs() / last).powf(exponent))
    } else {
        SERIES_RADIUS
    };
    ((radius / grid.h).floor() as usize).max(1)
}

/// Coefficients `c_k` of the regular solution `q = sum c_k r^{2k}`.
///
/// Writing `q = q0 (1 + s)`, the equation gives
/// `2k(2k+N-2) c_k = [q - q^p]_{k-1}` with `q^p = q0^p (1+s)^p` expanded by
/// the binomial series in powers of `s`.
fn series_coefficients(params: &ModelParams, q0: f64) -> [f64; SERIES_TERMS] {
    let n = params.dim as f64;
    let p = params.p;
    let q0p = abs_power(q0, p);
    let mut c = [0.0; SERIES_TERMS];
    c[0] = q0;
    for k in 1..SERIES_TERMS {
        // s has coefficients c_j / q0 for j >= 1; (1+s)^p truncated to order k-1.
        let s: Vec<f64> = (0..k).map(|j| if j == 0 { 0.0 } else { c[j] / q0 }).collect();
        let mut power = vec![0.0; k];
        power[0] = 1.0;
        let mut binom_sum = vec![0.0; k];
        binom_sum[0] = 1.0;
        let mut binom = 1.0;
        for m in 1..k {
            let mut next = vec![0.0; k];
            for (a, pa) in power.iter().enumerate() {
                for (b, sb) in s.iter().enumerate().skip(1) {
                    if a + b < k {
                        next[a + b] += pa * sb;
                    }
                }
            }
            power = next;
            binom *= (p - (m as f64 - 1.0)) / m as f64;
            for (acc, v) in binom_sum.iter_mut().zip(&power) {
                *acc += binom * v;
            }
        }
        let rhs = c[k - 1] - q0p * binom_sum[k - 1];
        let kf = k as f64;
        c[k] = rhs / (2.0 * kf * (2.0 * kf + n - 2.0));
    }
    c
}

fn eval_series(c: &[f64; SERIES_TERMS], r: f64) -> (f64, f64) {
    let r2 = r * r;
    let mut q = 0.0;
    let mut dq = 0.0;
    for k in (0..SERIES_TERMS).rev() {
        q = q * r2 + c[k];
        if k > 0 {
            dq = dq * r2 + 2.0 * k as f64 * c[k];
        }
    }
    (q, dq * r)
}

/// Integrate forward from `q(0) = q0` until the profile crosses zero or
/// turns upward. If neither happens before `r_max`, the sign of the
/// growing-mode component decides.
fn classify(params: &ModelParams, grid: &RadialGridSpec, q0: f64) -> Shot {
    let coeffs = series_coefficients(params, q0);
    let start = series_nodes(grid, &coeffs);
    let (mut q, mut dq) = eval_series(&coeffs, grid.r(start));
    let n = params.dim as f64;
    for i in start..grid.intervals() {
        let r = grid.r(i);
        (q, dq) = rk4(params, r, q, dq, grid.h);
        if q <= 0.0 {
            return Shot::Crosses;
        }
        if dq > 0.0 {
            return Shot::TurnsUp;
        }
    }
    let r = grid.r_max;
    let decay = 1.0 + (n - 1.0) / (2.0 * r);
    if dq + decay * q > 0.0 {
        Shot::TurnsUp
    } else {
        Shot::Crosses
    }
}

fn check_tol(tol: f64) -> Result<(), GroundStateError> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(GroundStateError::BadTolerance(tol))
    }
}

/// Bisection on `q(0)`; returns the final bracket.
pub fn shoot_q0(
    params: &ModelParams,
    grid: &RadialGridSpec,
    tol: f64,
) -> Result<(f64, f64), GroundStateError> {
    params.validate()?;
    grid.validate()?;
    check_tol(tol)?;
    // q(0) <= 1 gives q''(0) >= 0, so the profile never decays.
    let mut lo = 1.0 + 1e-9;
    if classify(params, grid, lo) != Shot::TurnsUp {
        return Err(GroundStateError::NoBracket { lo, hi: lo });
    }
    let mut hi = 2.0;
    while classify(params, grid, hi) != Shot::Crosses {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(GroundStateError::NoBracket { lo: 1.0, hi });
        }
    }
    for _ in 0..400 {
        if hi - lo <= tol {
            return Ok((lo, hi));
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match classify(params, grid, mid) {
            Shot::Crosses => hi = mid,
            Shot::TurnsUp => lo = mid,
        }
    }
    if hi - lo <= tol {
        Ok((lo, hi))
    } else {
        Err(GroundStateError::ToleranceNotReached { width: hi - lo, tol })
    }
}

/// Backward integration from `r_max` down to node `stop` of the decaying
/// solution with amplitude `amp`; fills `q[stop..]`, `dq[stop..]`.
fn backward_tail(
    params: &ModelParams,
    grid: &RadialGridSpec,
    amp: f64,
    stop: usize,
    q: &mut [f64],
    dq: &mut [f64],
) {
    let last = grid.intervals();
    let n = params.dim as f64;
    let r_max = grid.r_max;
    let lambda = -1.0 - (n - 1.0) / (2.0 * r_max);
    q[last] = amp;
    dq[last] = amp * lambda;
    for i in (stop..last).rev() {
        let (a, b) = rk4(params, grid.r(i + 1), q[i + 1], dq[i + 1], -grid.h);
        q[i] = a;
        dq[i] = b;
    }
}

/// Solve for the ground state, its decay amplitude and the interaction
/// constants.
pub fn solve_ground_state(
    params: &ModelParams,
    grid: &RadialGridSpec,
    tol: f64,
) -> Result<RadialProfile, GroundStateError> {
    let (lo, hi) = shoot_q0(params, grid, tol)?;
    let q0 = 0.5 * (lo + hi);
    let nodes = grid.nodes();
    let mut q = vec![0.0; nodes];
    let mut dq = vec![0.0; nodes];
    let coeffs = series_coefficients(params, q0);
    let start = series_nodes(grid, &coeffs);
    for i in 0..=start {
        (q[i], dq[i]) = eval_series(&coeffs, grid.r(i));
    }
    let mut switch = None;
    for i in start..grid.intervals() {
        let (a, b) = rk4(params, grid.r(i), q[i], dq[i], grid.h);
        if a <= 0.0 || b > 0.0 {
            switch = Some(i);
            break;
        }
        q[i + 1] = a;
        dq[i + 1] = b;
        if a < TAIL_SWITCH * q0 {
            switch = Some(i + 1);
            break;
        }
    }
    let ic = switch.unwrap_or(grid.intervals());
    let mut slope_mismatch = 0.0;
    if ic < grid.intervals() {
        let (target, target_slope) = (q[ic], dq[ic]);
        let mut tail_q = vec![0.0; nodes];
        let mut tail_dq = vec![0.0; nodes];
        let n = params.dim as f64;
        let (rc, rm) = (grid.r(ic), grid.r_max);
        let mut amp = target * (rc - rm).exp() * (rc / rm).powf(0.5 * (n - 1.0));
        for _ in 0..50 {
            backward_tail(params, grid, amp, ic, &mut tail_q, &mut tail_dq);
            let ratio = target / tail_q[ic];
            amp *= ratio;
            if (ratio - 1.0).abs() < 1e-15 {
                break;
            }
        }
        backward_tail(params, grid, amp, ic, &mut tail_q, &mut tail_dq);
        slope_mismatch = ((tail_dq[ic] - target_slope) / target_slope).abs();
        q[ic..].copy_from_slice(&tail_q[ic..]);
        dq[ic..].copy_from_slice(&tail_dq[ic..]);
    }
    for i in 1..nodes {
        if !(q[i] > 0.0 && q[i] < q[i - 1]) {
            return Err(GroundStateError::NotMonotone(grid.r(i)));
        }
    }
    let d2: Vec<f64> = (0..nodes)
        .map(|i| second_derivative(params, grid.r(i), q[i], dq[i]))
        .collect();
    let interp = RadialFunction::new(grid.h, q.clone(), dq.clone(), d2);
    let mut profile = RadialProfile {
        params: *params,
        grid: *grid,
        q,
        dq,
        q0,
        kappa: 0.0,
        kappa_spread: 0.0,
        c1: 0.0,
        g0: 0.0,
        e_q: 0.0,
        match_radius: grid.r(ic),
        slope_mismatch,
        interp,
    };
    let fit = extract_kappa(&profile, default_kappa_window(grid))?;
    profile.kappa = fit.kappa;
    profile.kappa_spread = fit.spread;
    let (c1, g0) = interaction_constants(&profile)?;
    profile.c1 = c1;
    profile.g0 = g0;
    profile.e_q = soliton_energy(&profile);
    Ok(profile)
}

pub fn default_kappa_window(grid: &RadialGridSpec) -> (f64, f64) {
    (0.5 * grid.r_max, grid.r_max - 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaFit {
    pub kappa: f64,
    pub spread: f64,
}

/// Mean of `q r^{(N-1)/2} e^r` over the window.
pub fn extract_kappa(
    profile: &RadialProfile,
    window: (f64, f64),
) -> Result<KappaFit, GroundStateError> {
    extract_kappa_from(&profile.q, &profile.grid, profile.params.dim, window)
}

/// [`extract_kappa`] on raw samples `q(r_i)`.
pub fn extract_kappa_from(
    q: &[f64],
    grid: &RadialGridSpec,
    dim: usize,
    window: (f64, f64),
) -> Result<KappaFit, GroundStateError> {
    let (a, b) = window;
    let slack = 1e-9 * grid.r_max;
    if !(a >= 0.5 * grid.r_max - slack && b <= grid.r_max - 2.0 + slack && a < b) {
        return Err(GroundStateError::BadWindow(a, b));
    }
    let first = (a / grid.h).ceil() as usize;
    let last = ((b / grid.h).floor() as usize).min(q.len() - 1);
    let half = 0.5 * (dim as f64 - 1.0);
    let samples: Vec<f64> = (first..=last)
        .map(|i| {
            let r = grid.r(i);
            q[i] * r.powf(half) * r.exp()
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let (min, max) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let spread = (max - min) / mean.abs();
    if !(spread <= KAPPA_SPREAD_BOUND) {
        return Err(GroundStateError::WindowUnstable { spread, bound: KAPPA_SPREAD_BOUND });
    }
    Ok(KappaFit { kappa: mean, spread })
}

/// Angular factor `A_N(r)`, the integral of `e^{-x_1}` over the sphere of
/// radius `r` divided by `r^{N-1}`.
pub fn angular_factor(dim: usize, r: f64) -> f64 {
    if dim == 1 {
        return 2.0 * r.cosh();
    }
    let pi = std::f64::consts::PI;
    let h = pi / ANGULAR_INTERVALS as f64;
    let e = dim as i32 - 2;
    let values: Vec<f64> = (0..=ANGULAR_INTERVALS)
        .map(|k| {
            let theta = k as f64 * h;
            (-r * theta.cos()).exp() * theta.sin().powi(e)
        })
        .collect();
    sphere_area(dim - 1) * simpson(&values, h)
}

/// `c1 = ||∂_1 Q||²` and `g0 = (1/c1) ∫ Q^p e^{-x_1}`.
pub fn interaction_constants(profile: &RadialProfile) -> Result<(f64, f64), GroundStateError> {
    let params = &profile.params;
    let grid = &profile.grid;
    let n = params.dim;
    let w = |i: usize| grid.r(i).powi(n as i32 - 1);
    let grad: Vec<f64> = (0..grid.nodes()).map(|i| profile.dq[i] * profile.dq[i] * w(i)).collect();
    let c1 = sphere_area(n) / n as f64 * simpson(&grad, grid.h);
    let force: Vec<f64> = (0..grid.nodes())
        .map(|i| abs_power(profile.q[i], params.p) * angular_factor(n, grid.r(i)) * w(i))
        .collect();
    let total = simpson(&force, grid.h);
    let peak = force.iter().cloned().fold(0.0, f64::max);
    let tail = force[force.len() - 1] / peak;
    if !total.is_finite() || !(tail < 1e-6) {
        return Err(GroundStateError::QuadratureOverflow(tail));
    }
    Ok((c1, total / c1))
}

/// `E(Q, 0) = ½∫(|∇Q|² + Q²) - ∫ Q^{p+1}/(p+1)`.
pub fn soliton_energy(profile: &RadialProfile) -> f64 {
    let params = &profile.params;
    let grid = &profile.grid;
    let n = params.dim;
    let density: Vec<f64> = (0..grid.nodes())
        .map(|i| {
            let (q, dq) = (profile.q[i], profile.dq[i]);
            (0.5 * (dq * dq + q * q) - params.potential(q)) * grid.r(i).powi(n as i32 - 1)
        })
        .collect();
    sphere_area(n) * simpson(&density, grid.h)
}

/// Largest residual of the ODE at interior nodes, with `q''` obtained from
/// the stored `q'` by a fourth-order difference.
pub fn ode_residual(profile: &RadialProfile) -> f64 {
    let params = &profile.params;
    let h = profile.grid.h;
    let n = params.dim as f64;
    let dq = &profile.dq;
    let mut worst: f64 = 0.0;
    for i in 2..dq.len() - 2 {
        let r = profile.r(i);
        let ddq = (-dq[i + 2] + 8.0 * dq[i + 1] - 8.0 * dq[i - 1] + dq[i - 2]) / (12.0 * h);
        let q = profile.q[i];
        let res = ddq + (n - 1.0) / r * dq[i] - q + signed_power(q, params.p);
        worst = worst.max(res.abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_matches_closed_form_soliton() {
        let params = ModelParams::new(1, 3.0, 1.0).unwrap();
        let q0 = 2f64.sqrt();
        for r in [0.01, 0.05, 0.2] {
            let (q, dq) = eval_series(&series_coefficients(&params, q0), r);
            assert!((q - q0 / r.cosh()).abs() < 1e-14, "r = {r}");
            assert!((dq + q0 * r.tanh() / r.cosh()).abs() < 1e-14, "r = {r}");
        }
    }

    #[test]
    fn angular_factor_in_two_dimensions_is_bessel() {
        // 2π I_0(1) with I_0(1) = 1.2660658777520082.
        let a = angular_factor(2, 1.0);
        assert!((a - 2.0 * std::f64::consts::PI * 1.2660658777520082).abs() < 1e-12);
    }

    #[test]
    fn angular_factor_in_three_dimensions() {
        // 2π ∫ e^{-r cos θ} sin θ dθ = 4π sinh(r)/r. The integrand is not
        // periodic here, so Simpson is only fourth order (2.4e-10 at r = 3).
        let r = 3.0;
        let a = angular_factor(3, r);
        assert!((a / (4.0 * std::f64::consts::PI * r.sinh() / r) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn kappa_window_rejects_outside() {
        let grid = RadialGridSpec::default();
        let q: Vec<f64> = (0..grid.nodes()).map(|i| (-grid.r(i)).exp()).collect();
        assert!(matches!(
            extract_kappa_from(&q, &grid, 1, (5.0, 20.0)),
            Err(GroundStateError::BadWindow(..))
        ));
    }
}
