//! Modulation of a field state near a sum of two solitons.
//!
//! A state `(u, v)` is written as
//! `u = Q₁ + Q₂ + ε`, `v = -Σ ℓ_k ∂ₓQ_k + η` with `Q_k = σ_k Q(x - z_k)` and
//! `ε, η ⊥ ∂ₓQ_k`. All inner products here are the plain grid sums
//! `h Σ f g`, so constraints hold to round-off on the sampled fields.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field1d::{derivative, energy_norm_sq, FieldState, Grid1D};
use crate::interactions::GTable;
use crate::quad::{dot, simpson};
use crate::soliton::Soliton;

/// Default proximity gate on `||ε⃗||`.
pub const DEFAULT_GAMMA: f64 = 0.1;
/// Default lower bound on `|z₁ - z₂|`.
pub const DEFAULT_SEPARATION_FLOOR: f64 = 4.0;
/// Newton iteration cap.
pub const MAX_NEWTON_ITERATIONS: usize = 25;
/// Default constant in `R± = exp(±K𝓜)/q(r)`.
pub const DEFAULT_K: f64 = 5.0;
/// Largest sampling interval accepted by [`check_parameter_odes`].
pub const MAX_CADENCE: f64 = 0.05;
/// Exponent of the interaction remainder in the `ℓ` equation.
pub const THETA: f64 = 1.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModulationError {
    #[error("remainder norm {norm:.3e} is not below the proximity gate {gamma}")]
    ProximityViolated { norm: f64, gamma: f64 },
    #[error("separation {distance:.4} is not above the floor {floor}")]
    SeparationLost { distance: f64, floor: f64 },
    #[error("Newton iteration did not converge in {0} steps")]
    NewtonDiverged(usize),
    #[error("linear system for the unstable corrector is singular or inaccurate (residual {0:.3e})")]
    SingularSystem(f64),
    #[error("sampling interval {dt} exceeds {max}")]
    InsufficientCadence { dt: f64, max: f64 },
    #[error("need at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("field has {got} samples, grid has {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("could not locate two separated extrema")]
    NoExtrema,
}

/// Signs and centers of the two solitons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGeometry {
    pub sigma: [f64; 2],
    pub z: [f64; 2],
}

impl PairGeometry {
    pub fn distance(&self) -> f64 {
        (self.z[0] - self.z[1]).abs()
    }

    /// `σ = σ₁σ₂`.
    pub fn sigma(&self) -> f64 {
        self.sigma[0] * self.sigma[1]
    }
}

/// Sampled `Q_k`, `∂ₓQ_k`, `∂ₓ²Q_k` and `Y_k = σ_k Y(x - z_k)`.
#[derive(Debug, Clone)]
pub struct PairBasis {
    pub q: [Vec<f64>; 2],
    pub dq: [Vec<f64>; 2],
    pub d2q: [Vec<f64>; 2],
    pub y: [Vec<f64>; 2],
}

impl PairBasis {
    pub fn sample(geometry: &PairGeometry, soliton: &Soliton, grid: &Grid1D) -> Self {
        let one = |k: usize| {
            let (s, z) = (geometry.sigma[k], geometry.z[k]);
            let mut q = Vec::with_capacity(grid.n);
            let mut dq = Vec::with_capacity(grid.n);
            let mut d2q = Vec::with_capacity(grid.n);
            let mut y = Vec::with_capacity(grid.n);
            for i in 0..grid.n {
                let x = grid.x(i) - z;
                let (a, b, c) = soliton.q_line(x);
                q.push(s * a);
                dq.push(s * b);
                d2q.push(s * c);
                y.push(s * soliton.y_line(x).0);
            }
            (q, dq, d2q, y)
        };
        let (q1, dq1, d2q1, y1) = one(0);
        let (q2, dq2, d2q2, y2) = one(1);
        PairBasis { q: [q1, q2], dq: [dq1, dq2], d2q: [d2q1, d2q2], y: [y1, y2] }
    }
}

/// Dense solve with partial pivoting. Returns `None` on a vanishing pivot.
fn solve_dense<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    for col in 0..N {
        let piv = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[piv][col].abs() > 1e-14 * scale) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            for k in col..N {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let s: f64 = (row + 1..N).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// The unstable corrector `W⃗ = (W, ν⁺W)` with `W = Σ B_k Y_k + V_k ∂ₓQ_k`.
#[derive(Debug, Clone)]
pub struct WField {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// `b[k][j]`: coefficient of `Y_k` in `W(e_j)`.
    pub b: [[f64; 2]; 2],
    /// Coefficients of `∂ₓQ_k` in `W(e_j)`, same layout as `b`.
    pub translation: [[f64; 2]; 2],
}

/// Build `W⃗(a)` so that `⟨W, ∂ₓQ_k⟩ = 0` and `⟨W⃗, Z⃗_k⁺⟩ = a_k`.
///
/// With `Z⃗⁺ = (ζ⁺Y, Y)` the second condition is `⟨W, Y_k⟩ = β a_k`.
pub fn build_w(
    a: [f64; 2],
    geometry: &PairGeometry,
    soliton: &Soliton,
    grid: &Grid1D,
) -> Result<WField, ModulationError> {
    let basis = PairBasis::sample(geometry, soliton, grid);
    build_w_with(a, geometry, &basis, soliton, grid)
}

pub fn build_w_with(
    a: [f64; 2],
    geometry: &PairGeometry,
    basis: &PairBasis,
    soliton: &Soliton,
    grid: &Grid1D,
) -> Result<WField, ModulationError> {
    if geometry.distance() <= DEFAULT_SEPARATION_FLOOR {
        return Err(ModulationError::SeparationLost {
            distance: geometry.distance(),
            floor: DEFAULT_SEPARATION_FLOOR,
        });
    }
    let h = grid.h();
    let beta = soliton.spectral.beta();
    let nu = soliton.spectral.nu_plus();
    let fns: [&[f64]; 4] = [&basis.y[0], &basis.y[1], &basis.dq[0], &basis.dq[1]];
    let mut gram = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            gram[i][j] = dot(fns[i], fns[j], h);
        }
    }
    let unit = |j: usize| {
        let mut rhs = [0.0; 4];
        rhs[j] = beta;
        solve_dense(gram, rhs).ok_or(ModulationError::SingularSystem(f64::INFINITY))
    };
    let c1 = unit(0)?;
    let c2 = unit(1)?;
    let coef: Vec<f64> = (0..4).map(|i| a[0] * c1[i] + a[1] * c2[i]).collect();
    let u: Vec<f64> = (0..grid.n).map(|n| (0..4).map(|i| coef[i] * fns[i][n]).sum()).collect();
    let scale = 1.0f64.max(a[0].abs()).max(a[1].abs());
    let mut residual = 0.0f64;
    for k in 0..2 {
        residual = residual.max(dot(&u, &basis.dq[k], h).abs());
        residual = residual.max((dot(&u, &basis.y[k], h) / beta - a[k]).abs());
    }
    if !(residual <= 1e-12 * scale) {
        return Err(ModulationError::SingularSystem(residual));
    }
    let v = u.iter().map(|w| nu * w).collect();
    Ok(WField {
        u,
        v,
        b: [[c1[0], c2[0]], [c1[1], c2[1]]],
        translation: [[c1[2], c2[2]], [c1[3], c2[3]]],
    })
}

/// Make `(e_u, e_v)` admissible as a remainder: remove its `∂ₓQ_k`
/// components in both entries, then remove its `Z⃗_k⁺` components by
/// subtracting `W⃗`. The result has zero `a⁺` and satisfies the orthogonality
/// conditions on the grid.
pub fn project_remainder(
    e_u: &[f64],
    e_v: &[f64],
    geometry: &PairGeometry,
    soliton: &Soliton,
    grid: &Grid1D,
) -> Result<(Vec<f64>, Vec<f64>), ModulationError> {
    for f in [e_u, e_v] {
        if f.len() != grid.n {
            return Err(ModulationError::LengthMismatch { got: f.len(), want: grid.n });
        }
    }
    let basis = PairBasis::sample(geometry, soliton, grid);
    let h = grid.h();
    let gram = [
        [dot(&basis.dq[0], &basis.dq[0], h), dot(&basis.dq[0], &basis.dq[1], h)],
        [dot(&basis.dq[1], &basis.dq[0], h), dot(&basis.dq[1], &basis.dq[1], h)],
    ];
    let strip = |f: &[f64]| -> Result<Vec<f64>, ModulationError> {
        let rhs = [dot(f, &basis.dq[0], h), dot(f, &basis.dq[1], h)];
        let c = solve_dense(gram, rhs).ok_or(ModulationError::SingularSystem(f64::INFINITY))?;
        Ok((0..grid.n).map(|i| f[i] - c[0] * basis.dq[0][i] - c[1] * basis.dq[1][i]).collect())
    };
    let mut u = strip(e_u)?;
    let mut v = strip(e_v)?;
    let zeta = soliton.spectral.zeta_plus();
    let a = [0, 1].map(|k| zeta * dot(&u, &basis.y[k], h) + dot(&v, &basis.y[k], h));
    let w = build_w_with(a, geometry, &basis, soliton, grid)?;
    for i in 0..grid.n {
        u[i] -= w.u[i];
        v[i] -= w.v[i];
    }
    Ok((u, v))
}

/// Settings for [`decompose`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposeConfig {
    pub gamma: f64,
    pub separation_floor: f64,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig { gamma: DEFAULT_GAMMA, separation_floor: DEFAULT_SEPARATION_FLOOR }
    }
}

/// Result of modulating a state.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub grid: Grid1D,
    pub t: f64,
    pub sigma: [f64; 2],
    pub z: [f64; 2],
    pub ell: [f64; 2],
    pub eps: Vec<f64>,
    pub eta: Vec<f64>,
    pub a_plus: [f64; 2],
    pub a_minus: [f64; 2],
    /// `||ε⃗||` in `H¹ × L²`.
    pub eps_norm: f64,
    /// `max_k (|⟨ε, ∂ₓQ_k⟩|, |⟨η, ∂ₓQ_k⟩|)`.
    pub orthogonality: f64,
    pub newton_iterations: usize,
}

impl Decomposition {
    pub fn geometry(&self) -> PairGeometry {
        PairGeometry { sigma: self.sigma, z: self.z }
    }

    /// `⟨ε, Y_k⟩`, recovered from `a±`.
    pub fn eps_on_mode(&self, k: usize, zeta_plus: f64, zeta_minus: f64) -> f64 {
        (self.a_plus[k] - self.a_minus[k]) / (zeta_plus - zeta_minus)
    }
}

/// Seed for Newton from the two largest separated extrema of `|u|`.
/// Soliton 1 is the one on the right.
pub fn guess_from_extrema(grid: &Grid1D, u: &[f64], floor: f64) -> Result<PairGeometry, ModulationError> {
    let n = u.len();
    let mut peaks: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&i| u[i].abs() >= u[i - 1].abs() && u[i].abs() > u[i + 1].abs())
        .collect();
    peaks.sort_by(|&i, &j| u[j].abs().total_cmp(&u[i].abs()));
    let first = *peaks.first().ok_or(ModulationError::NoExtrema)?;
    let refine = |i: usize| {
        let (a, b, c) = (u[i - 1].abs(), u[i].abs(), u[i + 1].abs());
        let denom = a - 2.0 * b + c;
        let shift = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        grid.x(i) + shift.clamp(-0.5, 0.5) * grid.h()
    };
    let x1 = refine(first);
    let second = peaks
        .iter()
        .copied()
        .find(|&j| (refine(j) - x1).abs() > floor)
        .ok_or(ModulationError::NoExtrema)?;
    let x2 = refine(second);
    let (s1, s2) = (u[first].signum(), u[second].signum());
    Ok(if x1 > x2 {
        PairGeometry { sigma: [s1, s2], z: [x1, x2] }
    } else {
        PairGeometry { sigma: [s2, s1], z: [x2, x1] }
    })
}

/// Modulate `state` starting from `guess` (signs are taken from the guess).
pub fn decompose(
    state: &FieldState<f64>,
    soliton: &Soliton,
    guess: &PairGeometry,
    config: &DecomposeConfig,
) -> Result<Decomposition, ModulationError> {
    let grid = state.grid;
    if state.u.len() != grid.n || state.v.len() != grid.n {
        return Err(ModulationError::LengthMismatch { got: state.u.len(), want: grid.n });
    }
    let h = grid.h();
    let mut geometry = *guess;
    let mut iterations = 0;
    let (basis, eps) = loop {
        if geometry.distance() <= config.separation_floor {
            return Err(ModulationError::SeparationLost {
                distance: geometry.distance(),
                floor: config.separation_floor,
            });
        }
        let basis = PairBasis::sample(&geometry, soliton, &grid);
        let eps: Vec<f64> =
            (0..grid.n).map(|i| state.u[i] - basis.q[0][i] - basis.q[1][i]).collect();
        if iterations == MAX_NEWTON_ITERATIONS {
            return Err(ModulationError::NewtonDiverged(iterations));
        }
        let res = [dot(&eps, &basis.dq[0], h), dot(&eps, &basis.dq[1], h)];
        let cross = dot(&basis.dq[0], &basis.dq[1], h);
        let jac = [
            [dot(&basis.dq[0], &basis.dq[0], h) - dot(&eps, &basis.d2q[0], h), cross],
            [cross, dot(&basis.dq[1], &basis.dq[1], h) - dot(&eps, &basis.d2q[1], h)],
        ];
        let step = solve_dense(jac, res).ok_or(ModulationError::NewtonDiverged(iterations))?;
        if !(step[0].is_finite() && step[1].is_finite()) {
            return Err(ModulationError::NewtonDiverged(iterations));
        }
        // ∂ε/∂z_k = ∂ₓQ_k, so the update is z ← z - J⁻¹R.
        geometry.z[0] -= step[0];
        geometry.z[1] -= step[1];
        iterations += 1;
        if step[0].abs().max(step[1].abs()) < 1e-14 * (1.0 + geometry.z[0].abs().max(geometry.z[1].abs())) {
            let basis = PairBasis::sample(&geometry, soliton, &grid);
            let eps: Vec<f64> =
                (0..grid.n).map(|i| state.u[i] - basis.q[0][i] - basis.q[1][i]).collect();
            break (basis, eps);
        }
    };
    if geometry.distance() <= config.separation_floor {
        return Err(ModulationError::SeparationLost {
            distance: geometry.distance(),
            floor: config.separation_floor,
        });
    }
    let m = [
        [dot(&basis.dq[0], &basis.dq[0], h), dot(&basis.dq[0], &basis.dq[1], h)],
        [dot(&basis.dq[1], &basis.dq[0], h), dot(&basis.dq[1], &basis.dq[1], h)],
    ];
    let rhs = [-dot(&state.v, &basis.dq[0], h), -dot(&state.v, &basis.dq[1], h)];
    let ell = solve_dense(m, rhs).ok_or(ModulationError::SingularSystem(f64::INFINITY))?;
    let eta: Vec<f64> = (0..grid.n)
        .map(|i| state.v[i] + ell[0] * basis.dq[0][i] + ell[1] * basis.dq[1][i])
        .collect();
    let eps_norm = energy_norm_sq(&grid, &eps, &eta).sqrt();
    if !(eps_norm < config.gamma) {
        return Err(ModulationError::ProximityViolated { norm: eps_norm, gamma: config.gamma });
    }
    let (zp, zm) = (soliton.spectral.zeta_plus(), soliton.spectral.zeta_minus());
    let mut a_plus = [0.0; 2];
    let mut a_minus = [0.0; 2];
    let mut orthogonality = 0.0f64;
    for k in 0..2 {
        let ey = dot(&eps, &basis.y[k], h);
        let hy = dot(&eta, &basis.y[k], h);
        a_plus[k] = zp * ey + hy;
        a_minus[k] = zm * ey + hy;
        orthogonality = orthogonality
            .max(dot(&eps, &basis.dq[k], h).abs())
            .max(dot(&eta, &basis.dq[k], h).abs());
    }
    Ok(Decomposition {
        grid,
        t: state.t,
        sigma: geometry.sigma,
        z: geometry.z,
        ell,
        eps,
        eta,
        a_plus,
        a_minus,
        eps_norm,
        orthogonality,
        newton_iterations: iterations,
    })
}

/// Largest `μ` for which the quadratic form of `𝓔` on spatially constant
/// remainders stays above `μ||ε⃗||²`:
/// `(1 - (2α+1)μ + 2μ²)(1 - μ) ≥ μ²`.
pub fn sandwich_mu_limit(alpha: f64) -> f64 {
    let f = |m: f64| (1.0 - (2.0 * alpha + 1.0) * m + 2.0 * m * m) * (1.0 - m) - m * m;
    let mut hi = 1e-3;
    while f(hi) > 0.0 && hi < 1.0 {
        hi += 1e-3;
    }
    let mut lo = hi - 1e-3;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Default `μ = ½ min(1, α, |ν⁻|, μ_lim)` with `μ_lim` from
/// [`sandwich_mu_limit`].
pub fn default_mu(soliton: &Soliton) -> f64 {
    let alpha = soliton.params.alpha;
    0.5 * 1.0f64
        .min(alpha)
        .min(soliton.spectral.nu_minus().abs())
        .min(sandwich_mu_limit(alpha))
}

/// Scalar functionals of a decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    /// `𝓝 = (||ε⃗||² + Σ ℓ_k²)^{1/2}`
    pub n_norm: f64,
    pub b: f64,
    pub e_func: f64,
    pub f_func: f64,
    pub b_func: f64,
    pub m_func: f64,
    pub y: f64,
    pub r: f64,
    pub r_plus: f64,
    pub r_minus: f64,
    pub mu: f64,
    /// `μ||ε⃗||² - (1/2μ)Σ((a⁺)² + (a⁻)²) ≤ 𝓔 ≤ ||ε⃗||²/μ`
    pub sandwich_holds: bool,
}

/// Evaluate `𝓔, 𝓑, 𝓕, 𝓝, 𝓜`, `y`, `r` and `R±` at `(μ, K)`.
pub fn diagnostics(dec: &Decomposition, soliton: &Soliton, mu: f64, k: f64) -> DiagnosticRecord {
    let params = &soliton.params;
    let alpha = params.alpha;
    let rho = 2.0 * alpha - mu;
    let grid = dec.grid;
    let h = grid.h();
    let ex = derivative(&dec.eps, h);
    let geometry = dec.geometry();
    let density: Vec<f64> = (0..grid.n)
        .map(|i| {
            let x = grid.x(i);
            let r: f64 = (0..2).map(|j| geometry.sigma[j] * soliton.q_line(x - geometry.z[j]).0).sum();
            let e = dec.eps[i];
            let w = dec.eta[i] + mu * e;
            let nonlinear = params.potential(r + e) - params.potential(r) - params.nonlinearity(r) * e;
            ex[i] * ex[i] + (1.0 - rho * mu) * e * e + w * w - 2.0 * nonlinear
        })
        .collect();
    let e_func = simpson(&density, h);
    let ell_sq = dec.ell[0] * dec.ell[0] + dec.ell[1] * dec.ell[1];
    let am_sq = dec.a_minus[0] * dec.a_minus[0] + dec.a_minus[1] * dec.a_minus[1];
    let b = dec.a_plus[0] * dec.a_plus[0] + dec.a_plus[1] * dec.a_plus[1];
    let b_func = ell_sq + am_sq / (2.0 * mu);
    let f_func = e_func + b_func;
    let eps_sq = dec.eps_norm * dec.eps_norm;
    let n_norm = (eps_sq + ell_sq).sqrt();
    let m_func = (f_func - b / (2.0 * soliton.spectral.nu_plus())) / (mu * mu);
    let y = (dec.z[0] - dec.z[1]) + (dec.ell[0] - dec.ell[1]) / (2.0 * alpha);
    let r = y.abs();
    let q = soliton.profile.eval(r);
    let lower = mu * eps_sq - (b + am_sq) / (2.0 * mu);
    let upper = eps_sq / mu;
    let slack = 1e-12 * (1.0 + eps_sq / mu);
    DiagnosticRecord {
        n_norm,
        b,
        e_func,
        f_func,
        b_func,
        m_func,
        y,
        r,
        r_plus: (k * m_func).exp() / q,
        r_minus: (-k * m_func).exp() / q,
        mu,
        sandwich_holds: lower <= e_func + slack && e_func <= upper + slack,
    }
}

/// Scalar summary of one modulated sample, enough for the parameter ODE
/// checks and for output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationRecord {
    pub t: f64,
    pub sigma: [f64; 2],
    pub z: [f64; 2],
    pub ell: [f64; 2],
    pub a_plus: [f64; 2],
    pub a_minus: [f64; 2],
    pub eps_norm: f64,
    pub orthogonality: f64,
    pub diag: DiagnosticRecord,
}

impl ModulationRecord {
    pub fn new(dec: &Decomposition, diag: DiagnosticRecord) -> Self {
        ModulationRecord {
            t: dec.t,
            sigma: dec.sigma,
            z: dec.z,
            ell: dec.ell,
            a_plus: dec.a_plus,
            a_minus: dec.a_minus,
            eps_norm: dec.eps_norm,
            orthogonality: dec.orthogonality,
            diag,
        }
    }
}

/// Fitted constant of one inequality: max over interior samples of
/// `LHS / bound`, together with the largest `LHS` seen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundFit {
    pub constant: f64,
    pub max_lhs: f64,
}

impl BoundFit {
    fn new() -> Self {
        BoundFit { constant: 0.0, max_lhs: 0.0 }
    }

    fn push(&mut self, lhs: f64, bound: f64) {
        self.max_lhs = self.max_lhs.max(lhs);
        self.constant = self.constant.max(lhs / bound.max(f64::MIN_POSITIVE));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterOdeReport {
    /// `|ż_k - ℓ_k| ≲ ||ε⃗||² + Σℓ²`
    pub position: BoundFit,
    /// `|ℓ̇_k + 2αℓ_k - (-1)^k σ ẑ g(|z|)| ≲ ||ε⃗||² + Σℓ² + e^{-θ|z|}`
    pub velocity: BoundFit,
    /// `|ȧ⁺_k - ν⁺a⁺_k| ≲ ||ε⃗||² + Σℓ² + q(|z|)`
    pub unstable: BoundFit,
    /// Same with `a⁻, ν⁻`.
    pub stable: BoundFit,
    /// `|d/dt(1/q(r)) + σg₀/α| ≲ (𝓝² + q(r)/r)/q(r)`
    pub distance: BoundFit,
    /// `|ḃ - 2ν⁺b| ≲ 𝓝³ + q(r)𝓝`
    pub growth: BoundFit,
    /// `(𝓕̇ + 2μ𝓕)₊ ≲ 𝓝³ + q(r)𝓝`
    pub damping: BoundFit,
    /// Smallest `C` with `𝓜̇ ≤ -𝓝² + C q(r)²`.
    pub lyapunov: BoundFit,
    pub samples: usize,
}

/// Compare central-difference time derivatives of the modulation parameters
/// with the bounds they are expected to satisfy.
pub fn check_parameter_odes(
    records: &[ModulationRecord],
    soliton: &Soliton,
    g: &GTable,
) -> Result<ParameterOdeReport, ModulationError> {
    if records.len() < 3 {
        return Err(ModulationError::TooFewSamples(records.len()));
    }
    for w in records.windows(2) {
        let dt = w[1].t - w[0].t;
        if !(dt > 0.0 && dt <= MAX_CADENCE * (1.0 + 1e-9)) {
            return Err(ModulationError::InsufficientCadence { dt, max: MAX_CADENCE });
        }
    }
    let alpha = soliton.params.alpha;
    let (nu_p, nu_m) = (soliton.spectral.nu_plus(), soliton.spectral.nu_minus());
    let g0 = soliton.profile.g0;
    let q = |r: f64| soliton.profile.eval(r);
    let mut report = ParameterOdeReport {
        position: BoundFit::new(),
        velocity: BoundFit::new(),
        unstable: BoundFit::new(),
        stable: BoundFit::new(),
        distance: BoundFit::new(),
        growth: BoundFit::new(),
        damping: BoundFit::new(),
        lyapunov: BoundFit::new(),
        samples: records.len() - 2,
    };
    for w in records.windows(3) {
        let (prev, cur, next) = (&w[0], &w[1], &w[2]);
        let span = next.t - prev.t;
        let d = |f: &dyn Fn(&ModulationRecord) -> f64| (f(next) - f(prev)) / span;
        let ell_sq = cur.ell[0] * cur.ell[0] + cur.ell[1] * cur.ell[1];
        let small = cur.eps_norm * cur.eps_norm + ell_sq;
        let sigma = cur.sigma[0] * cur.sigma[1];
        let zsep = cur.z[0] - cur.z[1];
        let dist = zsep.abs();
        let force = sigma * zsep.signum() * g.eval(dist);
        let nn = cur.diag.n_norm;
        let qr = q(cur.diag.r);
        for k in 0..2 {
            let zd = d(&|m: &ModulationRecord| m.z[k]);
            report.position.push((zd - cur.ell[k]).abs(), small);
            let ld = d(&|m: &ModulationRecord| m.ell[k]);
            let sign = if k == 0 { -1.0 } else { 1.0 };
            report
                .velocity
                .push((ld + 2.0 * alpha * cur.ell[k] - sign * force).abs(), small + (-THETA * dist).exp());
            let ap = d(&|m: &ModulationRecord| m.a_plus[k]);
            report.unstable.push((ap - nu_p * cur.a_plus[k]).abs(), small + q(dist));
            let am = d(&|m: &ModulationRecord| m.a_minus[k]);
            report.stable.push((am - nu_m * cur.a_minus[k]).abs(), small + q(dist));
        }
        let inv_q = d(&|m: &ModulationRecord| 1.0 / q(m.diag.r));
        report
            .distance
            .push((inv_q + sigma * g0 / alpha).abs(), (nn * nn + qr / cur.diag.r) / qr);
        let bd = d(&|m: &ModulationRecord| m.diag.b);
        report.growth.push((bd - 2.0 * nu_p * cur.diag.b).abs(), nn.powi(3) + qr * nn);
        let fd = d(&|m: &ModulationRecord| m.diag.f_func);
        report.damping.push((fd + 2.0 * cur.diag.mu * cur.diag.f_func).max(0.0), nn.powi(3) + qr * nn);
        let md = d(&|m: &ModulationRecord| m.diag.m_func);
        report.lyapunov.push((md + nn * nn).max(0.0), qr * qr);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_solver_matches_known_solution() {
        let a = [[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        let x = [1.0, -2.0, 0.5];
        let b = [0, 1, 2].map(|i| (0..3).map(|j| a[i][j] * x[j]).sum::<f64>());
        let got = solve_dense(a, b).unwrap();
        for i in 0..3 {
            assert!((got[i] - x[i]).abs() < 1e-14);
        }
        assert!(solve_dense([[1.0, 2.0], [2.0, 4.0]], [1.0, 1.0]).is_none());
    }

    #[test]
    fn mu_limit_solves_the_constant_mode_condition() {
        let m = sandwich_mu_limit(1.0);
        assert!((m - 0.3522).abs() < 1e-3, "{m}");
        let f = (1.0 - 3.0 * m + 2.0 * m * m) * (1.0 - m) - m * m;
        assert!(f.abs() < 1e-12);
    }
}
