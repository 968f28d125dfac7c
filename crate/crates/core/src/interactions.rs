//! Two-soliton interaction quantities: the nonlinear coupling
//! `G = f(Q₁+Q₂) - f(Q₁) - f(Q₂)`, its projections on translation modes and
//! the scalar interaction function `g(r)`.

use thiserror::Error;

use crate::groundstate::RadialProfile;
use crate::params::{abs_power, signed_power, sphere_area};
use crate::quad::simpson;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InteractionError {
    #[error("distance {r} needs r + 5 <= r_max = {r_max}")]
    DomainTooSmall { r: f64, r_max: f64 },
    #[error("distance {0} is below the minimum 2")]
    TooClose(f64),
    #[error("solitons coincide or have mismatched dimensions")]
    DegeneratePair,
    #[error("operation is only available in one dimension")]
    OneDimensional,
    #[error("exponent m = {m} must lie in (0, p - 1]")]
    BadExponent { m: f64 },
}

/// Two signed solitons `σ_k Q(· - z_k)` in `R^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolitonPair {
    pub sigma: [f64; 2],
    pub z: [Vec<f64>; 2],
}

impl SolitonPair {
    pub fn new(sigma: [f64; 2], z1: Vec<f64>, z2: Vec<f64>) -> Result<Self, InteractionError> {
        if z1.len() != z2.len() || z1.is_empty() {
            return Err(InteractionError::DegeneratePair);
        }
        let pair = SolitonPair { sigma, z: [z1, z2] };
        if !(pair.distance() > 0.0) {
            return Err(InteractionError::DegeneratePair);
        }
        Ok(pair)
    }

    /// One-dimensional pair.
    pub fn line(sigma: [f64; 2], z1: f64, z2: f64) -> Result<Self, InteractionError> {
        Self::new(sigma, vec![z1], vec![z2])
    }

    /// `σ = σ₁σ₂`.
    pub fn sigma(&self) -> f64 {
        self.sigma[0] * self.sigma[1]
    }

    /// `z = z₁ - z₂`.
    pub fn separation(&self) -> Vec<f64> {
        self.z[0].iter().zip(&self.z[1]).map(|(a, b)| a - b).collect()
    }

    pub fn distance(&self) -> f64 {
        self.separation().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Exchange the labels of the two solitons.
    pub fn swapped(&self) -> Self {
        SolitonPair {
            sigma: [self.sigma[1], self.sigma[0]],
            z: [self.z[1].clone(), self.z[0].clone()],
        }
    }
}

/// `g(r) = (1/c₁) ∫ ∂₁(Q^p)(y) Q(y + r e₁) dy`.
pub fn interaction_g(profile: &RadialProfile, r: f64) -> Result<f64, InteractionError> {
    let r_max = profile.grid.r_max;
    if r < 2.0 {
        return Err(InteractionError::TooClose(r));
    }
    if r + 5.0 > r_max {
        return Err(InteractionError::DomainTooSmall { r, r_max });
    }
    if profile.params.dim == 1 {
        Ok(g_line(profile, r))
    } else {
        Ok(g_radial(profile, r))
    }
}

fn g_line(profile: &RadialProfile, r: f64) -> f64 {
    let p = profile.params.p;
    let h = profile.grid.h;
    let reach = 25.0f64.min(profile.grid.r_max);
    let half = (reach / h).round() as i64;
    let f = profile.function();
    let values: Vec<f64> = (-half..=half)
        .map(|k| {
            let y = k as f64 * h;
            let (q, dq, _) = f.eval_line(y);
            let force = p * abs_power(q, p - 1.0) * dq;
            force * f.eval_line(y + r).0
        })
        .collect();
    simpson(&values, h) / profile.c1
}

/// Polar reduction: `y = ρ(cos θ, sin θ ω)`, so `∂₁(Q^p) = p q^{p-1} q' cos θ`
/// and `|y + r e₁|² = ρ² + r² + 2ρr cos θ`.
fn g_radial(profile: &RadialProfile, r: f64) -> f64 {
    let n = profile.params.dim;
    let p = profile.params.p;
    let f = profile.function();
    let reach = 20.0f64.min(profile.grid.r_max);
    let h_rho = 0.005;
    let rho_nodes = (reach / h_rho).round() as usize + 1;
    let theta_intervals = 256;
    let h_theta = std::f64::consts::PI / theta_intervals as f64;
    let angular: Vec<(f64, f64)> = (0..=theta_intervals)
        .map(|k| {
            let th = k as f64 * h_theta;
            (th.cos(), th.sin().powi(n as i32 - 2))
        })
        .collect();
    let radial: Vec<f64> = (0..rho_nodes)
        .map(|i| {
            let rho = i as f64 * h_rho;
            let (q, dq, _) = f.eval3(rho);
            let force = p * abs_power(q, p - 1.0) * dq * rho.powi(n as i32 - 1);
            let inner: Vec<f64> = angular
                .iter()
                .map(|&(c, s)| {
                    let d = (rho * rho + r * r + 2.0 * rho * r * c).max(0.0).sqrt();
                    c * s * f.eval(d)
                })
                .collect();
            force * simpson(&inner, h_theta)
        })
        .collect();
    sphere_area(n - 1) * simpson(&radial, h_rho) / profile.c1
}

/// Table of `ln g` on a uniform grid with cubic interpolation.
#[derive(Debug, Clone)]
pub struct GTable {
    r0: f64,
    dr: f64,
    log_g: Vec<f64>,
}

impl GTable {
    /// Tabulate on `[2, r_max - 5]` with spacing `dr`.
    pub fn build(profile: &RadialProfile, dr: f64) -> Result<Self, InteractionError> {
        use rayon::prelude::*;
        let r0 = 2.0;
        let r1 = profile.grid.r_max - 5.0;
        let n = ((r1 - r0) / dr).floor() as usize + 1;
        let log_g = (0..n)
            .into_par_iter()
            .map(|i| interaction_g(profile, r0 + i as f64 * dr).map(f64::ln))
            .collect::<Result<Vec<f64>, _>>()?;
        Ok(GTable { r0, dr, log_g })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.r0, self.r0 + (self.log_g.len() - 1) as f64 * self.dr)
    }

    /// Interpolated `g(r)`; outside the table the end slope of `ln g` is
    /// continued linearly.
    pub fn eval(&self, r: f64) -> f64 {
        let n = self.log_g.len();
        let s = (r - self.r0) / self.dr;
        let i = (s.floor() as isize).clamp(1, n as isize - 3) as usize;
        let t = s - i as f64;
        let (a, b, c, d) = (self.log_g[i - 1], self.log_g[i], self.log_g[i + 1], self.log_g[i + 2]);
        let value = b
            + 0.5 * t * (c - a)
            + 0.5 * t * t * (2.0 * a - 5.0 * b + 4.0 * c - d)
            + 0.5 * t * t * t * (3.0 * (b - c) + d - a);
        value.exp()
    }
}

/// Uniform line grid for pair integrals: `[-(|z|/2 + 20), |z|/2 + 20]`
/// around the midpoint.
fn pair_grid(pair: &SolitonPair, h: f64) -> (Vec<f64>, f64) {
    let mid = 0.5 * (pair.z[0][0] + pair.z[1][0]);
    let half = 0.5 * pair.distance() + 20.0;
    let m = (half / h).ceil() as i64;
    let h = half / m as f64;
    ((-m..=m).map(|k| mid + k as f64 * h).collect(), h)
}

fn require_line(profile: &RadialProfile, pair: &SolitonPair) -> Result<(), InteractionError> {
    if profile.params.dim != 1 || pair.z[0].len() != 1 {
        return Err(InteractionError::OneDimensional);
    }
    Ok(())
}

/// `(⟨G, ∂ₓQ₁⟩, ⟨G, ∂ₓQ₂⟩)` on a line grid of spacing `h`.
pub fn project_g(
    pair: &SolitonPair,
    profile: &RadialProfile,
    h: f64,
) -> Result<(f64, f64), InteractionError> {
    require_line(profile, pair)?;
    let params = &profile.params;
    let f = profile.function();
    let (xs, h) = pair_grid(pair, h);
    let mut p1 = Vec::with_capacity(xs.len());
    let mut p2 = Vec::with_capacity(xs.len());
    for &x in &xs {
        let (q1, d1, _) = f.eval_line(x - pair.z[0][0]);
        let (q2, d2, _) = f.eval_line(x - pair.z[1][0]);
        let (a, b) = (pair.sigma[0] * q1, pair.sigma[1] * q2);
        let g = params.nonlinearity(a + b) - params.nonlinearity(a) - params.nonlinearity(b);
        p1.push(g * pair.sigma[0] * d1);
        p2.push(g * pair.sigma[1] * d2);
    }
    Ok((simpson(&p1, h), simpson(&p2, h)))
}

/// Overlap integrals and their ratios to the expected decay rates.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct OverlapReport {
    /// `∫ |Q₁ Q₂|^m`
    pub product: f64,
    /// `∫ |Q₁| |Q₂|^{1+m}`
    pub skew_product: f64,
    /// `||G||_{L²}`
    pub norm_g: f64,
    /// `∫|Q₁Q₂|^m / e^{-m'|z|}`
    pub product_ratio: f64,
    /// `||G|| / q(|z|)`
    pub norm_g_ratio: f64,
}

pub fn overlap_integrals(
    pair: &SolitonPair,
    profile: &RadialProfile,
    m: f64,
    m_prime: f64,
    h: f64,
) -> Result<OverlapReport, InteractionError> {
    require_line(profile, pair)?;
    let params = &profile.params;
    if !(m > 0.0 && m <= params.p - 1.0) {
        return Err(InteractionError::BadExponent { m });
    }
    let f = profile.function();
    let (xs, h) = pair_grid(pair, h);
    let mut prod = Vec::with_capacity(xs.len());
    let mut skew = Vec::with_capacity(xs.len());
    let mut g2 = Vec::with_capacity(xs.len());
    for &x in &xs {
        let q1 = f.eval_line(x - pair.z[0][0]).0;
        let q2 = f.eval_line(x - pair.z[1][0]).0;
        prod.push(abs_power(q1 * q2, m));
        skew.push(q1.abs() * abs_power(q2, 1.0 + m));
        let (a, b) = (pair.sigma[0] * q1, pair.sigma[1] * q2);
        let g = signed_power(a + b, params.p) - signed_power(a, params.p) - signed_power(b, params.p);
        g2.push(g * g);
    }
    let d = pair.distance();
    let product = simpson(&prod, h);
    let norm_g = simpson(&g2, h).sqrt();
    Ok(OverlapReport {
        product,
        skew_product: simpson(&skew, h),
        norm_g,
        product_ratio: product / (-m_prime * d).exp(),
        norm_g_ratio: norm_g / profile.eval(d),
    })
}

/// Predicted pair energy and the size of the neglected terms.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EnergyExpansion {
    /// `2E(Q,0) - σ c₁ g₀ q(|z|)`
    pub prediction: f64,
    /// `𝓝² + q(|z|)/|z|`, the order of the remainder.
    pub error_scale: f64,
}

/// `state_norm` is `𝓝`, the size of the remainder and of the velocities.
pub fn energy_expansion(pair: &SolitonPair, profile: &RadialProfile, state_norm: f64) -> EnergyExpansion {
    let r = pair.distance();
    let q = profile.eval(r);
    EnergyExpansion {
        prediction: 2.0 * profile.e_q - pair.sigma() * profile.c1 * profile.g0 * q,
        error_scale: state_norm * state_norm + q / r,
    }
}
