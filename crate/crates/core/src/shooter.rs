//! Shooting for the two unstable coefficients that make a two-soliton
//! configuration persist.
//!
//! Initial data form an affine family `base + c₁D₁ + c₂D₂` where `D_k` is the
//! unstable direction attached to soliton `k`. A candidate is run forward
//! with modulation tracking until one of the unstable modes takes over, and
//! the sign with which each mode leaves decides on which side of the
//! persisting value its coefficient lies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use twofloat::TwoFloat;

use crate::field1d::{
    build_initial_data, energy_norm_sq, FieldError, FieldState, Gamma, Grid1D, InitialDataSpec,
    Leapfrog, Perturbation,
};
use crate::modulation::{
    decompose, default_mu, diagnostics, DecomposeConfig, ModulationError, ModulationRecord,
    PairGeometry, DEFAULT_GAMMA, DEFAULT_K,
};
use crate::quad::dot;
use crate::real::{Precision, Real};
use crate::soliton::Soliton;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShootError {
    #[error("search box does not bracket: corner classifications {0:?}")]
    NoSignChange(Vec<TraceEntry>),
    #[error("bisection did not reach the tolerance in {0} iterations")]
    MaxIterations(usize),
    #[error("final candidate did not persist: {0:?}")]
    NotPersisted(ExitKind),
    #[error("candidate left through {0:?}, which an opposite-sign bisection cannot use")]
    UnexpectedExit(ExitKind),
    #[error("separation {distance} is not above the gate {gate}")]
    SeparationGate { distance: f64, gate: f64 },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("perturbation norm {norm:.3e} is not below delta = {delta}")]
    PerturbationTooLarge { norm: f64, delta: f64 },
    #[error("the two configurations coincide")]
    DegenerateProbe,
    #[error("field: {0}")]
    Field(#[from] FieldError),
    #[error("modulation: {0}")]
    Modulation(#[from] ModulationError),
}

/// Grid and time step of the PDE runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeSettings {
    pub half_width: f64,
    pub h: f64,
    pub dt: f64,
    pub precision: Precision,
}

impl Default for PdeSettings {
    fn default() -> Self {
        PdeSettings { half_width: 26.0, h: 0.025, dt: 0.0125, precision: Precision::DoubleDouble }
    }
}

impl PdeSettings {
    pub fn grid(&self) -> Result<Grid1D, FieldError> {
        Grid1D::symmetric(self.half_width, self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootConfig {
    /// Smallness scale of the configuration.
    pub delta: f64,
    /// Half-width of the search box in `a⁺` units; `δ^{5/4}` when unset.
    pub search_radius: Option<f64>,
    /// Exit threshold on `b`; `δ^{3/2}` when unset.
    pub b_exit: Option<f64>,
    pub t_accept: f64,
    /// Bisection stops once both box sides are below this width.
    pub tol: f64,
    /// Modulation sampling interval.
    pub cadence: f64,
    pub separation_gate: f64,
    pub collision_floor: f64,
    /// Smallest increment of `a_k⁺` over the last time unit that counts as
    /// a definite exit sign.
    pub sign_confidence: f64,
    pub max_iterations: usize,
    pub pde: PdeSettings,
}

impl ShootConfig {
    /// Double-double runs to `T = 50`, bisected down to `1e-26`.
    pub fn persistence(delta: f64) -> Self {
        ShootConfig {
            delta,
            search_radius: None,
            b_exit: None,
            t_accept: 50.0,
            tol: 1e-26,
            cadence: 0.05,
            separation_gate: 8.0,
            collision_floor: 2.0,
            sign_confidence: 1e-6,
            max_iterations: 200,
            pde: PdeSettings::default(),
        }
    }

    /// Double-precision runs to `T = 20`, bisected down to `1e-12`.
    pub fn fast(delta: f64) -> Self {
        ShootConfig {
            t_accept: 20.0,
            tol: 1e-12,
            pde: PdeSettings { precision: Precision::Double, ..PdeSettings::default() },
            ..Self::persistence(delta)
        }
    }

    pub fn search_radius(&self) -> f64 {
        self.search_radius.unwrap_or_else(|| self.delta.powf(1.25))
    }

    pub fn b_exit(&self) -> f64 {
        self.b_exit.unwrap_or_else(|| self.delta.powf(1.5))
    }

    fn validate(&self) -> Result<(), ShootError> {
        let bad = |s: &str| Err(ShootError::BadConfig(s.to_string()));
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if !(self.search_radius() > 0.0 && self.b_exit() > 0.0 && self.tol > 0.0) {
            return bad("radius, b_exit and tol must be positive");
        }
        if !(self.t_accept > 0.0 && self.cadence > 0.0) {
            return bad("t_accept and cadence must be positive");
        }
        let ratio = self.cadence / self.pde.dt;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return bad("cadence must be a multiple of dt");
        }
        Ok(())
    }

    fn steps_per_sample(&self) -> u64 {
        (self.cadence / self.pde.dt).round() as u64
    }
}

/// How a candidate left the neighbourhood of the two-soliton family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExitKind {
    Persisted { t: f64 },
    /// `b` reached the exit threshold; `k` is the dominant mode (0 or 1)
    /// and `sign` the sign of its `a_k⁺`.
    UnstableExit { k: usize, sign: f64, t: f64 },
    Collision { t: f64, decomposition_lost: bool },
    Blowup { t: f64 },
}

impl ExitKind {
    pub fn time(&self) -> f64 {
        match *self {
            ExitKind::Persisted { t }
            | ExitKind::UnstableExit { t, .. }
            | ExitKind::Collision { t, .. }
            | ExitKind::Blowup { t } => t,
        }
    }

    pub fn persisted(&self) -> bool {
        matches!(self, ExitKind::Persisted { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitClassification {
    pub kind: ExitKind,
    /// `a_k⁺(t_end) - a_k⁺(t_end - 1)`.
    pub increments: [f64; 2],
    /// Sign of each increment when it exceeds the confidence level.
    pub signs: [Option<f64>; 2],
    pub b_final: f64,
    /// Slope of `ln b` over the last two time units before the exit.
    pub b_rate: Option<f64>,
    pub r_start: f64,
    pub r_end: f64,
    /// The coercivity sandwich held at every sample.
    pub sandwich_held: bool,
    pub records: Vec<ModulationRecord>,
}

/// `base + c₁D₁ + c₂D₂`.
#[derive(Debug, Clone)]
pub struct AffineFamily {
    pub base: FieldState<f64>,
    pub directions: [Perturbation; 2],
    pub geometry: PairGeometry,
    /// Coefficient per unit of `a_k⁺` (`β` for the `h` coordinates, 1 for
    /// the `a⁺` coordinates).
    pub scale: f64,
}

impl AffineFamily {
    /// `(Q + h₁Y⁺)(x - L/2) - (Q + h₂Y⁺)(x + L/2) + φ` in the coordinates
    /// `(h₁, h₂)`.
    pub fn shooting_pair(
        l: f64,
        phi: Option<&Perturbation>,
        soliton: &Soliton,
        grid: &Grid1D,
    ) -> Result<Self, ShootError> {
        let spec = InitialDataSpec::ShootingPair { l, h: [0.0, 0.0], phi: phi.cloned() };
        let base = build_initial_data(&spec, soliton, grid)?;
        let nu = soliton.spectral.nu_plus();
        let mode = |sign: f64, z: f64| {
            let u: Vec<f64> = (0..grid.n).map(|i| sign * soliton.y_line(grid.x(i) - z).0).collect();
            let v = u.iter().map(|y| nu * y).collect();
            Perturbation { u, v }
        };
        Ok(AffineFamily {
            base,
            directions: [mode(1.0, 0.5 * l), mode(-1.0, -0.5 * l)],
            geometry: PairGeometry { sigma: [1.0, -1.0], z: [0.5 * l, -0.5 * l] },
            scale: soliton.spectral.beta(),
        })
    }

    /// `Q₁ + Q₂ + W⃗(a⁺) + ε⃗⊥` around `Γ`, in the coordinates `a⁺`.
    pub fn manifold(gamma: &Gamma, soliton: &Soliton, grid: &Grid1D) -> Result<Self, ShootError> {
        let spec = InitialDataSpec::Manifold { gamma: gamma.clone(), a_plus: [0.0, 0.0] };
        let base = build_initial_data(&spec, soliton, grid)?;
        let geometry = PairGeometry { sigma: gamma.sigma, z: gamma.z };
        let w = |k: usize| -> Result<Perturbation, ShootError> {
            let mut a = [0.0; 2];
            a[k] = 1.0;
            let w = crate::modulation::build_w(a, &geometry, soliton, grid)?;
            Ok(Perturbation { u: w.u, v: w.v })
        };
        Ok(AffineFamily { base, directions: [w(0)?, w(1)?], geometry, scale: 1.0 })
    }

    /// Sample the member with coefficients `c` in precision `T`.
    pub fn state<T: Real>(&self, c: [T; 2]) -> FieldState<T> {
        let n = self.base.grid.n;
        let [d1, d2] = &self.directions;
        let mix = |b: f64, x: f64, y: f64| T::of(b) + c[0] * T::of(x) + c[1] * T::of(y);
        FieldState {
            grid: self.base.grid,
            u: (0..n).map(|i| mix(self.base.u[i], d1.u[i], d2.u[i])).collect(),
            v: (0..n).map(|i| mix(self.base.v[i], d1.v[i], d2.v[i])).collect(),
            t: self.base.t,
        }
    }
}

fn slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 5 {
        return None;
    }
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Run `initial` forward with modulation tracking until it exits or
/// reaches `t_accept`.
pub fn classify_exit<T: Real>(
    initial: &FieldState<T>,
    guess: &PairGeometry,
    soliton: &Soliton,
    config: &ShootConfig,
) -> Result<ExitClassification, ShootError> {
    config.validate()?;
    let params = &soliton.params;
    let mut stepper = Leapfrog::new(initial, params, config.pde.dt)?;
    let per_sample = config.steps_per_sample();
    let dcfg = DecomposeConfig { gamma: DEFAULT_GAMMA, separation_floor: config.collision_floor };
    let mu = default_mu(soliton);
    let b_exit = config.b_exit();
    let mut geometry = *guess;
    let mut records: Vec<ModulationRecord> = Vec::new();
    let kind = loop {
        let state = stepper.state().to_f64();
        let t = state.t;
        let dec = match decompose(&state, soliton, &geometry, &dcfg) {
            Ok(dec) => dec,
            Err(ModulationError::SeparationLost { .. }) => {
                break ExitKind::Collision { t, decomposition_lost: false }
            }
            Err(_) => break ExitKind::Collision { t, decomposition_lost: true },
        };
        geometry = dec.geometry();
        let diag = diagnostics(&dec, soliton, mu, DEFAULT_K);
        records.push(ModulationRecord::new(&dec, diag));
        if diag.b >= b_exit {
            let k = if dec.a_plus[0].abs() >= dec.a_plus[1].abs() { 0 } else { 1 };
            break ExitKind::UnstableExit { k, sign: dec.a_plus[k].signum(), t };
        }
        if t >= config.t_accept - 0.5 * config.pde.dt {
            break ExitKind::Persisted { t };
        }
        match stepper.advance(per_sample) {
            Ok(()) => {}
            Err(FieldError::Blowup { t, .. }) | Err(FieldError::NonFinite(t)) => {
                break ExitKind::Blowup { t }
            }
            Err(e) => return Err(e.into()),
        }
    };
    let last = records.last().copied();
    let (increments, signs) = match (kind, last) {
        (ExitKind::Persisted { .. } | ExitKind::UnstableExit { .. }, Some(last)) => {
            let back = (1.0 / config.cadence).round() as usize;
            let earlier = records[records.len().saturating_sub(1 + back)];
            let inc = [0, 1].map(|k| last.a_plus[k] - earlier.a_plus[k]);
            let sgn = inc.map(|d| (d.abs() >= config.sign_confidence).then(|| d.signum()));
            (inc, sgn)
        }
        _ => ([0.0; 2], [None; 2]),
    };
    let b_rate = match (kind, last) {
        (ExitKind::UnstableExit { t, .. }, Some(_)) => slope(
            &records
                .iter()
                .filter(|r| r.t >= t - 2.0 && r.diag.b > 0.0)
                .map(|r| (r.t, r.diag.b.ln()))
                .collect::<Vec<_>>(),
        ),
        _ => None,
    };
    Ok(ExitClassification {
        kind,
        increments,
        signs,
        b_final: last.map(|r| r.diag.b).unwrap_or(f64::NAN),
        b_rate,
        r_start: records.first().map(|r| r.diag.r).unwrap_or(f64::NAN),
        r_end: last.map(|r| r.diag.r).unwrap_or(f64::NAN),
        sandwich_held: records.iter().all(|r| r.diag.sandwich_holds),
        records,
    })
}

/// Classify the family member at `c`, in the precision of the config.
pub fn classify_member(
    family: &AffineFamily,
    c: [TwoFloat; 2],
    soliton: &Soliton,
    config: &ShootConfig,
) -> Result<ExitClassification, ShootError> {
    match config.pde.precision {
        Precision::Double => {
            let s = family.state::<f64>([c[0].as_f64(), c[1].as_f64()]);
            classify_exit(&s, &family.geometry, soliton, config)
        }
        Precision::DoubleDouble => {
            classify_exit(&family.state::<TwoFloat>(c), &family.geometry, soliton, config)
        }
    }
}

/// One probed candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// Leading and trailing parts of each coefficient.
    pub c: [f64; 2],
    pub c_lo: [f64; 2],
    pub kind: ExitKind,
    pub signs: [Option<f64>; 2],
    pub increments: [f64; 2],
    pub b_rate: Option<f64>,
}

impl TraceEntry {
    fn new(c: [TwoFloat; 2], cls: &ExitClassification) -> Self {
        TraceEntry {
            c: c.map(|x| x.hi()),
            c_lo: c.map(|x| x.lo()),
            kind: cls.kind,
            signs: cls.signs,
            increments: cls.increments,
            b_rate: cls.b_rate,
        }
    }

    pub fn coefficient(&self, k: usize) -> TwoFloat {
        TwoFloat::from(self.c[k]) + TwoFloat::from(self.c_lo[k])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootResult {
    /// Persisting coefficients in family units (`h` or `a⁺`).
    pub coefficients: [f64; 2],
    pub coefficients_lo: [f64; 2],
    /// The same point in `a⁺` units.
    pub a_plus: [f64; 2],
    pub trace: Vec<TraceEntry>,
    pub iterations: usize,
    pub box_width: [f64; 2],
    /// Both exit signs became indistinguishable before the tolerance.
    pub converged_at_resolution: bool,
    /// Every probed sign is consistent with a single crossing per
    /// coordinate.
    pub monotone: bool,
    pub residual_b_at_t: f64,
    pub final_run: ExitClassification,
}

fn monotone(trace: &[TraceEntry]) -> bool {
    (0..2).all(|k| {
        let below = trace
            .iter()
            .filter(|e| e.signs[k] == Some(-1.0))
            .map(|e| e.coefficient(k))
            .fold(None::<TwoFloat>, |m, x| Some(m.map_or(x, |m| if x > m { x } else { m })));
        let above = trace
            .iter()
            .filter(|e| e.signs[k] == Some(1.0))
            .map(|e| e.coefficient(k))
            .fold(None::<TwoFloat>, |m, x| Some(m.map_or(x, |m| if x < m { x } else { m })));
        match (below, above) {
            (Some(b), Some(a)) => b < a,
            _ => true,
        }
    })
}

/// Bisect both coefficients at once on the exit signs.
///
/// Each run yields a definite sign for the dominant mode and, when large
/// enough, for the other one; a coordinate whose sign is undecided keeps
/// its bracket for that step.
pub fn find_unstable_pair(
    family: &AffineFamily,
    soliton: &Soliton,
    config: &ShootConfig,
) -> Result<ShootResult, ShootError> {
    config.validate()?;
    let distance = family.geometry.distance();
    if distance <= config.separation_gate {
        return Err(ShootError::SeparationGate { distance, gate: config.separation_gate });
    }
    let radius = family.scale * config.search_radius();
    let corners: Vec<[f64; 2]> =
        vec![[radius, radius], [radius, -radius], [-radius, radius], [-radius, -radius]];
    let corner_runs: Vec<(TraceEntry, ExitKind)> = corners
        .par_iter()
        .map(|c| {
            let c = c.map(TwoFloat::from);
            classify_member(family, c, soliton, config).map(|cls| (TraceEntry::new(c, &cls), cls.kind))
        })
        .collect::<Result<_, _>>()?;
    let mut trace: Vec<TraceEntry> = corner_runs.iter().map(|x| x.0).collect();
    let bracketed = corners
        .iter()
        .zip(&trace)
        .all(|(c, e)| (0..2).all(|k| e.signs[k] == Some(c[k].signum())));
    if !bracketed {
        return Err(ShootError::NoSignChange(trace));
    }
    let mut lo = [TwoFloat::from(-radius); 2];
    let mut hi = [TwoFloat::from(radius); 2];
    let width = |lo: &[TwoFloat; 2], hi: &[TwoFloat; 2]| [0, 1].map(|k| (hi[k] - lo[k]).as_f64());
    let mut iterations = 0;
    let mut converged_at_resolution = false;
    loop {
        let w = width(&lo, &hi);
        if w[0] <= config.tol && w[1] <= config.tol {
            break;
        }
        if iterations == config.max_iterations {
            return Err(ShootError::MaxIterations(iterations));
        }
        iterations += 1;
        let mid = [0, 1].map(|k| (lo[k] + hi[k]) * TwoFloat::from(0.5));
        let cls = classify_member(family, mid, soliton, config)?;
        trace.push(TraceEntry::new(mid, &cls));
        if !matches!(cls.kind, ExitKind::Persisted { .. } | ExitKind::UnstableExit { .. }) {
            return Err(ShootError::UnexpectedExit(cls.kind));
        }
        let mut moved = false;
        for k in 0..2 {
            if w[k] <= config.tol {
                continue;
            }
            match cls.signs[k] {
                Some(s) if s > 0.0 => {
                    hi[k] = mid[k];
                    moved = true;
                }
                Some(_) => {
                    lo[k] = mid[k];
                    moved = true;
                }
                None => {}
            }
        }
        if !moved {
            converged_at_resolution = cls.kind.persisted();
            if !converged_at_resolution {
                return Err(ShootError::UnexpectedExit(cls.kind));
            }
            break;
        }
    }
    let point = [0, 1].map(|k| (lo[k] + hi[k]) * TwoFloat::from(0.5));
    let final_run = classify_member(family, point, soliton, config)?;
    trace.push(TraceEntry::new(point, &final_run));
    if !final_run.kind.persisted() {
        return Err(ShootError::NotPersisted(final_run.kind));
    }
    let coefficients = point.map(|x| x.hi());
    Ok(ShootResult {
        coefficients,
        coefficients_lo: point.map(|x| x.lo()),
        a_plus: coefficients.map(|c| c / family.scale),
        monotone: monotone(&trace),
        trace,
        iterations,
        box_width: width(&lo, &hi),
        converged_at_resolution,
        residual_b_at_t: final_run.b_final,
        final_run,
    })
}

/// `H(L, φ)` together with the linear projection of `φ` on the unstable
/// directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HResult {
    pub h: [f64; 2],
    /// `-β ⟨φ⃗, Z⃗_k⁺⟩` for the two solitons.
    pub h_parallel: [f64; 2],
    pub shoot: ShootResult,
}

/// `-β ⟨φ⃗, Z⃗_k⁺⟩` with `Z⃗_k⁺ = σ_k (ζ⁺Y, Y)(· - z_k)`.
pub fn unstable_projection(phi: &Perturbation, family: &AffineFamily, soliton: &Soliton) -> [f64; 2] {
    let h = family.base.grid.h();
    let beta = soliton.spectral.beta();
    let zeta = soliton.spectral.zeta_plus();
    [0, 1].map(|k| {
        // D_k = σ_k Y⃗⁺(· - z_k), so its first entry is σ_k Y(· - z_k).
        let y = &family.directions[k].u;
        -beta * (zeta * dot(&phi.u, y, h) + dot(&phi.v, y, h))
    })
}

/// Shoot directly in the coefficients `h` of the data
/// `(Q + h₁Y⁺)(x - L/2) - (Q + h₂Y⁺)(x + L/2) + φ`.
pub fn find_h(
    l: f64,
    phi: Option<&Perturbation>,
    soliton: &Soliton,
    config: &ShootConfig,
) -> Result<HResult, ShootError> {
    let grid = config.pde.grid()?;
    if let Some(phi) = phi {
        let norm = energy_norm_sq(&grid, &phi.u, &phi.v).sqrt();
        if !(norm < config.delta) {
            return Err(ShootError::PerturbationTooLarge { norm, delta: config.delta });
        }
    }
    let family = AffineFamily::shooting_pair(l, phi, soliton, &grid)?;
    let h_parallel = phi.map(|p| unstable_projection(p, &family, soliton)).unwrap_or([0.0; 2]);
    let shoot = find_unstable_pair(&family, soliton, config)?;
    Ok(HResult { h: shoot.coefficients, h_parallel, shoot })
}

/// `Ω = (L, φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Omega {
    pub l: f64,
    pub phi: Option<Perturbation>,
}

impl Omega {
    /// `|L - L̃| + ||φ - φ̃||_{H¹×L²}`.
    pub fn distance(&self, other: &Omega, grid: &Grid1D) -> f64 {
        let zero = vec![0.0; grid.n];
        let (u1, v1) = self.phi.as_ref().map(|p| (&p.u, &p.v)).unwrap_or((&zero, &zero));
        let (u2, v2) = other.phi.as_ref().map(|p| (&p.u, &p.v)).unwrap_or((&zero, &zero));
        let du: Vec<f64> = u1.iter().zip(u2).map(|(a, b)| a - b).collect();
        let dv: Vec<f64> = v1.iter().zip(v2).map(|(a, b)| a - b).collect();
        (self.l - other.l).abs() + energy_norm_sq(grid, &du, &dv).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub delta: f64,
    pub h_base: [f64; 2],
    /// `(||Ω - Ω̃||, |H(Ω) - H(Ω̃)|, ratio)` per direction.
    pub samples: Vec<(f64, f64, f64)>,
    pub max_ratio: f64,
    /// `max_ratio / δ^{1/4}`.
    pub fitted_c: f64,
}

/// `|H(Ω) - H(Ω̃_j)| / ||Ω - Ω̃_j||` over a batch of perturbed
/// configurations.
pub fn lipschitz_probe(
    config: &ShootConfig,
    base: &Omega,
    perturbed: &[Omega],
    soliton: &Soliton,
) -> Result<LipschitzReport, ShootError> {
    let grid = config.pde.grid()?;
    let distances: Vec<f64> = perturbed.iter().map(|o| base.distance(o, &grid)).collect();
    if distances.iter().any(|&d| !(d > 0.0)) {
        return Err(ShootError::DegenerateProbe);
    }
    if let Some(&d) = distances.iter().find(|&&d| !(d < config.delta)) {
        return Err(ShootError::BadConfig(format!("||Ω - Ω̃|| = {d} is not below delta")));
    }
    let all: Vec<&Omega> = std::iter::once(base).chain(perturbed).collect();
    for o in &all {
        grid.check_covers(&[0.5 * o.l, -0.5 * o.l])?;
    }
    let hs: Vec<[f64; 2]> = all
        .par_iter()
        .map(|o| {
            let r = find_h(o.l, o.phi.as_ref(), soliton, config)?;
            let lo = r.shoot.coefficients_lo;
            Ok([r.h[0] + lo[0], r.h[1] + lo[1]])
        })
        .collect::<Result<_, ShootError>>()?;
    let h0 = hs[0];
    let samples: Vec<(f64, f64, f64)> = hs[1..]
        .iter()
        .zip(&distances)
        .map(|(h, &d)| {
            let dh = ((h[0] - h0[0]).powi(2) + (h[1] - h0[1]).powi(2)).sqrt();
            (d, dh, dh / d)
        })
        .collect();
    let max_ratio = samples.iter().map(|s| s.2).fold(0.0, f64::max);
    Ok(LipschitzReport {
        delta: config.delta,
        h_base: h0,
        samples,
        max_ratio,
        fitted_c: max_ratio / config.delta.powf(0.25),
    })
}

/// Unit-norm direction built from a few random Gaussian bumps, with its
/// translation and unstable components at the nominal positions removed.
fn random_direction(
    rng: &mut rand_chacha::ChaCha8Rng,
    family: &AffineFamily,
    soliton: &Soliton,
    grid: &Grid1D,
) -> Result<Perturbation, ShootError> {
    use rand::Rng;
    let reach = family.geometry.z[0].abs().max(family.geometry.z[1].abs()) + 4.0;
    let mut bumps = |count: usize| {
        let spec: Vec<(f64, f64, f64)> = (0..count)
            .map(|_| (rng.gen_range(-reach..reach), rng.gen_range(0.7..2.0), rng.gen_range(-1.0..1.0)))
            .collect();
        (0..grid.n)
            .map(|i| {
                let x = grid.x(i);
                spec.iter().map(|(c, w, a)| a * (-((x - c) / w).powi(2)).exp()).sum::<f64>()
            })
            .collect::<Vec<f64>>()
    };
    let (u, v) = (bumps(3), bumps(3));
    admissible(&u, &v, family, soliton, grid, 1.0)
}

/// Project `(u, v)` off the translation and unstable directions and scale it
/// to energy norm `size`.
fn admissible(
    u: &[f64],
    v: &[f64],
    family: &AffineFamily,
    soliton: &Soliton,
    grid: &Grid1D,
    size: f64,
) -> Result<Perturbation, ShootError> {
    let (u, v) = crate::modulation::project_remainder(u, v, &family.geometry, soliton, grid)?;
    let norm = energy_norm_sq(grid, &u, &v).sqrt();
    let s = size / norm;
    Ok(Perturbation { u: u.iter().map(|x| s * x).collect(), v: v.iter().map(|x| s * x).collect() })
}

/// Base configuration `Ω = (L, φ₀)` with `||φ₀|| = δ/2` and perturbed copies:
/// `random` random directions of size `δ/4`, a translation of `φ₀`, a shift
/// of `L` by `δ/4` and the rescaling `3φ₀/2`. All `φ` are free of
/// translation and unstable components at the nominal positions.
pub fn probe_batch(
    l: f64,
    delta: f64,
    random: usize,
    seed: u64,
    soliton: &Soliton,
    grid: &Grid1D,
) -> Result<(Omega, Vec<Omega>), ShootError> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let family = AffineFamily::shooting_pair(l, None, soliton, grid)?;
    let psi0 = random_direction(&mut rng, &family, soliton, grid)?;
    let scaled = |p: &Perturbation, s: f64| Perturbation {
        u: p.u.iter().map(|x| s * x).collect(),
        v: p.v.iter().map(|x| s * x).collect(),
    };
    let add = |a: &Perturbation, b: &Perturbation| Perturbation {
        u: a.u.iter().zip(&b.u).map(|(x, y)| x + y).collect(),
        v: a.v.iter().zip(&b.v).map(|(x, y)| x + y).collect(),
    };
    let phi0 = scaled(&psi0, 0.5 * delta);
    let base = Omega { l, phi: Some(phi0.clone()) };
    let mut out = Vec::with_capacity(random + 3);
    for _ in 0..random {
        let psi = random_direction(&mut rng, &family, soliton, grid)?;
        out.push(Omega { l, phi: Some(add(&phi0, &scaled(&psi, 0.25 * delta))) });
    }
    // Translate by whole grid cells, halving the shift until the change is
    // at most δ/4.
    let mut shift = (0.5 / grid.h()).round() as usize;
    loop {
        let moved = |f: &[f64]| -> Vec<f64> {
            (0..grid.n).map(|i| if i >= shift { f[i - shift] } else { 0.0 }).collect()
        };
        let (mu, mv) = (moved(&phi0.u), moved(&phi0.v));
        let (pu, pv) = crate::modulation::project_remainder(&mu, &mv, &family.geometry, soliton, grid)?;
        let candidate = Omega { l, phi: Some(Perturbation { u: pu, v: pv }) };
        if base.distance(&candidate, grid) <= 0.25 * delta || shift == 1 {
            out.push(candidate);
            break;
        }
        shift /= 2;
    }
    out.push(Omega { l: l + 0.25 * delta, phi: Some(phi0.clone()) });
    out.push(Omega { l, phi: Some(scaled(&phi0, 1.5)) });
    Ok((base, out))
}

/// One constant `C` fitted on the largest `δ`, then every batch checked
/// against `2 C δ^{1/4}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzTrend {
    pub c: f64,
    /// `(δ, max ratio, 2 C δ^{1/4})`
    pub batches: Vec<(f64, f64, f64)>,
    pub passed: bool,
}

pub fn lipschitz_trend(reports: &[LipschitzReport]) -> LipschitzTrend {
    let reference = reports.iter().max_by(|a, b| a.delta.total_cmp(&b.delta));
    let c = reference.map(|r| r.fitted_c).unwrap_or(f64::NAN);
    let batches: Vec<(f64, f64, f64)> =
        reports.iter().map(|r| (r.delta, r.max_ratio, 2.0 * c * r.delta.powf(0.25))).collect();
    let passed = !batches.is_empty() && batches.iter().all(|b| b.1 <= b.2);
    LipschitzTrend { c, batches, passed }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_gates_follow_delta() {
        let c = ShootConfig::persistence(1e-2);
        assert!((c.search_radius() - 1e-2f64.powf(1.25)).abs() < 1e-18);
        assert!((c.b_exit() - 1e-3).abs() < 1e-15);
        assert_eq!(c.steps_per_sample(), 4);
        assert!(c.validate().is_ok());
        let bad = ShootConfig { cadence: 0.03, ..c };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn slope_of_a_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        assert!((slope(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert!(slope(&pts[..3]).is_none());
    }
}
