//! Scenario pipelines. Each writes its outputs into a [`RunDir`] and
//! returns a JSON summary that also lands in `summary.json`.

use std::path::Path;
use std::time::Instant;

use dampkg::field1d::{
    build_initial_data, dissipation_check, EnergySample, FieldState, Gamma, Grid1D, InitialDataSpec, Leapfrog,
    Perturbation,
};
use dampkg::interactions::{interaction_g, overlap_integrals, GTable, SolitonPair};
use dampkg::modulation::{
    decompose, default_mu, diagnostics, guess_from_extrema, DecomposeConfig, ModulationRecord, PairGeometry,
    DEFAULT_K,
};
use dampkg::radial::RadialGridSpec;
use dampkg::real::Precision;
use dampkg::reduced_ode::{
    asymptotic_distance, integrate, integrate_at, sample_times, GMode, Outcome, ReducedModel, ReducedState,
};
use dampkg::shooter::{
    classify_member, find_h, lipschitz_probe, lipschitz_trend, probe_batch, AffineFamily, ExitKind, PdeSettings,
    ShootConfig,
};
use dampkg::Soliton;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use twofloat::TwoFloat;

use crate::config::{GModeConfig, InitialData, PerturbationConfig, RunConfig, Scenario};
use crate::error::CliError;
use crate::output::{RunDir, RunManifest};

pub fn scenario_name(s: Scenario) -> &'static str {
    match s {
        Scenario::Constants => "constants",
        Scenario::Interactions => "interactions",
        Scenario::Simulate => "simulate",
        Scenario::Reduced => "reduced",
        Scenario::Shoot => "shoot",
        Scenario::Lipschitz => "lipschitz",
        Scenario::SameSign => "same_sign",
        Scenario::LogLaw => "log_law",
    }
}

/// Check everything that can be checked before any work is done.
pub fn validate(config: &RunConfig) -> Result<(), CliError> {
    let bad = |s: String| Err(CliError::ConfigInvalid(s));
    config.params.validate().map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
    if let Some(grid) = &config.numerics.ground_state.grid {
        grid.validate().map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
    }
    let n = &config.numerics;
    let line_only = matches!(
        config.scenario,
        Scenario::Simulate | Scenario::Shoot | Scenario::Lipschitz | Scenario::SameSign
    );
    if line_only && config.params.dim != 1 {
        return bad(format!("scenario {} needs dim = 1", scenario_name(config.scenario)));
    }
    match config.scenario {
        Scenario::Interactions => {
            let i = &n.interactions;
            if !(i.r_min >= 2.0 && i.r_max >= i.r_min && i.r_step > 0.0 && i.h > 0.0) {
                return bad("interactions range must satisfy 2 <= r_min <= r_max, step > 0".into());
            }
        }
        Scenario::Simulate => {
            let s = &n.simulate;
            check_cadence(s.cadence, s.dt)?;
            if !(s.t_end >= 0.0 && s.half_width > 0.0 && s.h > 0.0) {
                return bad("simulate needs t_end >= 0, half_width > 0, h > 0".into());
            }
            if s.modulation && matches!(s.initial, InitialData::Single { .. }) {
                return bad("modulation needs a two-soliton initial state".into());
            }
            if s.snapshots.iter().any(|&t| !(t >= 0.0 && t <= s.t_end)) {
                return bad("snapshot times must lie in [0, t_end]".into());
            }
            check_perturbation(&s.perturbation)?;
        }
        Scenario::Reduced | Scenario::LogLaw => {
            let r = &n.reduced;
            if config.scenario == Scenario::LogLaw && r.sigma != -1.0 {
                return bad("log_law needs sigma = -1".into());
            }
            if r.sigma.abs() != 1.0 {
                return bad("sigma must be +1 or -1".into());
            }
            for v in [&r.z1, &r.z2, &r.ell1, &r.ell2].into_iter().flatten() {
                if v.len() != config.params.dim {
                    return bad(format!("vector of length {} in dimension {}", v.len(), config.params.dim));
                }
            }
            if r.z1.is_some() != r.z2.is_some() {
                return bad("give both z1 and z2 or neither".into());
            }
            if !(r.t_end > 0.0 && r.rtol > 0.0 && r.samples_per_decade > 0) {
                return bad("reduced needs t_end > 0, rtol > 0, samples_per_decade > 0".into());
            }
        }
        Scenario::Shoot => {
            let s = &n.shoot;
            check_perturbation(&s.perturbation)?;
            if let Some(p) = &s.perturbation {
                if !(p.size < s.delta) {
                    return bad("perturbation size must be below delta".into());
                }
            }
        }
        Scenario::Lipschitz => {
            let l = &n.lipschitz;
            if l.deltas.is_empty() || l.deltas.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
                return bad("lipschitz deltas must lie in (0, 1)".into());
            }
        }
        Scenario::SameSign => {
            let s = &n.same_sign;
            check_cadence(s.cadence, s.dt)?;
            if s.r0.iter().any(|&r| !(r > 2.0)) {
                return bad("same_sign r0 must exceed the collision distance".into());
            }
        }
        Scenario::Constants => {}
    }
    Ok(())
}

fn check_cadence(cadence: f64, dt: f64) -> Result<(), CliError> {
    let ratio = cadence / dt;
    if !(dt > 0.0 && ratio >= 1.0 - 1e-9 && (ratio - ratio.round()).abs() <= 1e-9) {
        return Err(CliError::ConfigInvalid(format!("cadence {cadence} is not a multiple of dt {dt}")));
    }
    Ok(())
}

fn check_perturbation(p: &Option<PerturbationConfig>) -> Result<(), CliError> {
    if let Some(p) = p {
        if !(p.size >= 0.0 && p.bumps > 0) {
            return Err(CliError::ConfigInvalid("perturbation needs size >= 0 and bumps > 0".into()));
        }
    }
    Ok(())
}

/// Validate, run the scenario into `dir` and commit the manifest.
pub fn run(config: &RunConfig, dir: &Path) -> Result<(RunManifest, Value), CliError> {
    validate(config)?;
    let start = Instant::now();
    let mut out = RunDir::create(dir)?;
    let name = scenario_name(config.scenario);
    let soliton = soliton(config)?;
    let summary = match config.scenario {
        Scenario::Constants => constants(config, &soliton, &mut out),
        Scenario::Interactions => interactions(config, &soliton, &mut out),
        Scenario::Simulate => simulate(config, &soliton, &mut out),
        Scenario::Reduced => reduced(config, &soliton, &mut out, false),
        Scenario::LogLaw => reduced(config, &soliton, &mut out, true),
        Scenario::SameSign => same_sign(config, &soliton, &mut out),
        Scenario::Shoot => shoot(config, &soliton, &mut out),
        Scenario::Lipschitz => lipschitz(config, &soliton, &mut out),
    }
    .map_err(|e| match e {
        CliError::ScenarioFailed { .. } | CliError::Io(_) | CliError::ConfigInvalid(_) => e,
        other => CliError::scenario(name, other),
    })?;
    out.write_json("summary.json", &summary)?;
    let echo = serde_json::to_value(config).map_err(|e| CliError::Io(e.to_string()))?;
    let manifest = out.commit(echo, start.elapsed().as_secs_f64())?;
    Ok((manifest, summary))
}

fn soliton(config: &RunConfig) -> Result<Soliton, CliError> {
    let gs = &config.numerics.ground_state;
    let grid = gs.grid.unwrap_or_else(|| RadialGridSpec::default_for(config.params.dim));
    Soliton::compute_on(&config.params, &grid, gs.shoot_tol).map_err(|e| CliError::scenario("ground_state", e))
}

/// The constants record printed by `constants`.
pub fn constants_record(soliton: &Soliton) -> Value {
    let p = &soliton.profile;
    let r = &soliton.spectral.rates;
    json!({
        "dim": soliton.params.dim,
        "p": soliton.params.p,
        "alpha": soliton.params.alpha,
        "q0": p.q0,
        "kappa": p.kappa,
        "kappa_spread": p.kappa_spread,
        "c1": p.c1,
        "g0": p.g0,
        "E_Q": p.e_q,
        "nu0": r.nu0,
        "nu0_sq": r.nu0_sq,
        "nu_plus": r.nu_plus,
        "nu_minus": r.nu_minus,
        "zeta_plus": r.zeta_plus,
        "zeta_minus": r.zeta_minus,
        "beta": r.beta,
        "lambda_coarse": soliton.spectral.lambda_coarse,
        "lambda_fine": soliton.spectral.lambda_fine,
    })
}

fn constants(config: &RunConfig, soliton: &Soliton, out: &mut RunDir) -> Result<Value, CliError> {
    let record = constants_record(soliton);
    out.write_json("constants.json", &record)?;
    if config.numerics.ground_state.dump_profiles {
        let p = &soliton.profile;
        let rows: Vec<[f64; 3]> = (0..p.q.len()).map(|i| [p.r(i), p.q[i], p.dq[i]]).collect();
        out.write_csv("profile.csv", &["r", "q", "dq"], rows.iter().map(|r| &r[..]))?;
        let s = &soliton.spectral;
        let rows: Vec<[f64; 2]> = (0..s.y.len()).map(|i| [s.grid.r(i), s.y[i]]).collect();
        out.write_csv("eigenfunction.csv", &["r", "y"], rows.iter().map(|r| &r[..]))?;
    }
    Ok(record)
}

fn interactions(config: &RunConfig, soliton: &Soliton, out: &mut RunDir) -> Result<Value, CliError> {
    let i = &config.numerics.interactions;
    let name = "interactions";
    let profile = &soliton.profile;
    let count = ((i.r_max - i.r_min) / i.r_step + 1e-9).floor() as usize + 1;
    let radii: Vec<f64> = (0..count).map(|k| i.r_min + k as f64 * i.r_step).collect();
    let line = config.params.dim == 1;
    let rows = radii
        .par_iter()
        .map(|&r| -> Result<Vec<f64>, CliError> {
            let g = interaction_g(profile, r).map_err(|e| CliError::scenario(name, e))?;
            let asym = profile.g0 * profile.eval(r);
            let mut row = vec![r, g, asym, g / asym - 1.0];
            if line {
                let pair = SolitonPair::line([1.0, -1.0], 0.5 * r, -0.5 * r).map_err(|e| CliError::scenario(name, e))?;
                let m = config.params.p - 1.0;
                let o = overlap_integrals(&pair, profile, m, m, i.h).map_err(|e| CliError::scenario(name, e))?;
                row.extend([o.norm_g, o.norm_g_ratio, o.product_ratio]);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut header = vec!["r", "g", "g0_q", "rel_dev"];
    if line {
        header.extend(["norm_g", "norm_g_ratio", "product_ratio"]);
    }
    out.write_csv("interactions.csv", &header, rows.iter().map(|r| &r[..]))?;
    let worst = rows.iter().map(|row| row[3].abs() * row[0]).fold(0.0, f64::max);
    Ok(json!({ "rows": rows.len(), "max_r_times_rel_dev": worst, "bound_5_over_r_holds": worst <= 5.0 }))
}

/// Sum of Gaussian bumps near the centers, scaled to energy norm `size`.
pub fn random_perturbation(
    rng: &mut ChaCha8Rng,
    grid: &Grid1D,
    centers: &[f64],
    p: &PerturbationConfig,
) -> Perturbation {
    let mut u = vec![0.0; grid.n];
    let mut v = vec![0.0; grid.n];
    for _ in 0..p.bumps {
        let c = centers[rng.gen_range(0..centers.len())] + rng.gen_range(-3.0..3.0);
        let width = rng.gen_range(0.5..2.0);
        let (au, av): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        for i in 0..grid.n {
            let s = (grid.x(i) - c) / width;
            let bump = (-0.5 * s * s).exp();
            u[i] += au * bump;
            v[i] += av * bump;
        }
    }
    let norm = dampkg::field1d::energy_norm_sq(grid, &u, &v).sqrt();
    let scale = if norm > 0.0 { p.size / norm } else { 0.0 };
    u.iter_mut().for_each(|x| *x *= scale);
    v.iter_mut().for_each(|x| *x *= scale);
    Perturbation { u, v }
}

fn initial_spec(initial: &InitialData, perturbation: Option<Perturbation>) -> InitialDataSpec {
    match initial.clone() {
        InitialData::PlainPair { sigma, z, ell } => InitialDataSpec::PlainPair { sigma, z, ell, perturbation },
        InitialData::ShootingPair { l, h } => InitialDataSpec::ShootingPair { l, h, phi: perturbation },
        InitialData::Manifold { sigma, z, ell, a_plus } => InitialDataSpec::Manifold {
            gamma: Gamma { sigma, z, ell, eps_perp: perturbation },
            a_plus,
        },
        InitialData::Single { sigma, z, ell } => InitialDataSpec::Single { sigma, z, ell, perturbation },
    }
}

const MODULATION_COLUMNS: [&str; 20] = [
    "z1", "z2", "ell1", "ell2", "a1p", "a2p", "a1m", "a2m", "eps_norm", "orthogonality", "b", "N_norm",
    "E_func", "F_func", "M_func", "y", "r", "R_plus", "R_minus", "sandwich",
];

fn modulation_row(r: &ModulationRecord) -> [f64; 20] {
    let d = &r.diag;
    [
        r.z[0],
        r.z[1],
        r.ell[0],
        r.ell[1],
        r.a_plus[0],
        r.a_plus[1],
        r.a_minus[0],
        r.a_minus[1],
        r.eps_norm,
        r.orthogonality,
        d.b,
        d.n_norm,
        d.e_func,
        d.f_func,
        d.m_func,
        d.y,
        d.r,
        d.r_plus,
        d.r_minus,
        if d.sandwich_holds { 1.0 } else { 0.0 },
    ]
}

fn simulate(config: &RunConfig, soliton: &Soliton, out: &mut RunDir) -> Result<Value, CliError> {
    let s = &config.numerics.simulate;
    let name = "simulate";
    let fail = |e: &dyn std::fmt::Display| CliError::scenario(name, e);
    let grid = Grid1D::symmetric(s.half_width, s.h).map_err(|e| fail(&e))?;
    let bare = initial_spec(&s.initial, None);
    let perturbation = s.perturbation.map(|p| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        random_perturbation(&mut rng, &grid, &bare.centers(), &p)
    });
    let spec = initial_spec(&s.initial, perturbation);
    let state = build_initial_data(&spec, soliton, &grid).map_err(|e| fail(&e))?;
    let params = &soliton.params;
    let mut stepper = Leapfrog::new(&state, params, s.dt).map_err(|e| fail(&e))?;
    let per_sample = (s.cadence / s.dt).round() as u64;
    let samples_total = (s.t_end / s.cadence + 1e-9).floor() as usize;
    let snapshot_steps: Vec<(u64, f64)> =
        s.snapshots.iter().map(|&t| ((t / s.dt).round() as u64, t)).collect();

    let dcfg = DecomposeConfig::default();
    let mu = default_mu(soliton);
    let mut geometry: Option<PairGeometry> = None;
    let mut modulation_lost: Option<(f64, String)> = None;
    let mut sandwich_held = true;
    let mut max_orthogonality: f64 = 0.0;
    let mut energies = Vec::with_capacity(samples_total + 1);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(samples_total + 1);
    let mut snapshots = Vec::new();
    let mut k = 0usize;
    loop {
        let st: FieldState<f64> = stepper.state();
        let sample = EnergySample::of(&st, params);
        energies.push(sample);
        let mut row = vec![sample.t, sample.energy, sample.v_norm_sq];
        if s.modulation {
            let record = if modulation_lost.is_none() {
                let guess = match geometry {
                    Some(g) => Ok(g),
                    None => guess_from_extrema(&grid, &st.u, dcfg.separation_floor),
                };
                match guess.and_then(|g| decompose(&st, soliton, &g, &dcfg)) {
                    Ok(dec) => {
                        geometry = Some(dec.geometry());
                        let r = ModulationRecord::new(&dec, diagnostics(&dec, soliton, mu, DEFAULT_K));
                        sandwich_held &= r.diag.sandwich_holds;
                        max_orthogonality = max_orthogonality.max(r.orthogonality);
                        Some(r)
                    }
                    Err(e) => {
                        modulation_lost = Some((sample.t, e.to_string()));
                        None
                    }
                }
            } else {
                None
            };
            match record {
                Some(r) => row.extend(modulation_row(&r)),
                None => row.extend([f64::NAN; 20]),
            }
        }
        rows.push(row);
        let step = stepper.steps();
        for &(target, t) in &snapshot_steps {
            if target >= step && target < step + per_sample.max(1) {
                let mut snap = stepper.state();
                let mut extra = Leapfrog::new(&snap, params, s.dt).map_err(|e| fail(&e))?;
                if target > step {
                    extra.advance(target - step).map_err(|e| fail(&e))?;
                    snap = extra.state();
                }
                snapshots.push((t, snap));
            }
        }
        if k == samples_total {
            break;
        }
        stepper.advance(per_sample).map_err(|e| fail(&e))?;
        k += 1;
    }
    let mut header = vec!["t", "E", "normvsq"];
    if s.modulation {
        header.extend(MODULATION_COLUMNS);
    }
    out.write_csv("timeseries.csv", &header, rows.iter().map(|r| &r[..]))?;
    let mut snapshot_files = Vec::new();
    for (t, snap) in &snapshots {
        let file = format!("state_{t:.4}.csv");
        let rows: Vec<[f64; 3]> = (0..grid.n).map(|i| [grid.x(i), snap.u[i], snap.v[i]]).collect();
        out.write_csv(&file, &["x", "u", "v"], rows.iter().map(|r| &r[..]))?;
        snapshot_files.push(file);
    }
    let residual = dissipation_check(&energies, params).map_err(|e| fail(&e))?;
    let first = energies[0];
    let last = energies[energies.len() - 1];
    Ok(json!({
        "t_end": last.t,
        "samples": energies.len(),
        "energy_start": first.energy,
        "energy_end": last.energy,
        "dissipation_residual": residual,
        "modulation": s.modulation,
        "modulation_lost": modulation_lost.map(|(t, e)| json!({ "t": t, "error": e })),
        "sandwich_held": s.modulation.then_some(sandwich_held),
        "max_orthogonality": s.modulation.then_some(max_orthogonality),
        "snapshots": snapshot_files,
    }))
}

fn reduced_model(config: &RunConfig, soliton: &Soliton) -> Result<ReducedModel, CliError> {
    let mode = match config.numerics.reduced.g_mode {
        GModeConfig::Asymptotic => GMode::Asymptotic,
        GModeConfig::Tabulated => GMode::Tabulated(
            GTable::build(&soliton.profile, 0.05).map_err(|e| CliError::scenario("reduced", e))?,
        ),
    };
    Ok(ReducedModel::from_soliton(soliton, mode))
}

fn reduced_initial(config: &RunConfig) -> ReducedState {
    let r = &config.numerics.reduced;
    let dim = config.params.dim;
    let mut s = ReducedState::at_rest(dim, r.sigma, r.r0);
    if let (Some(z1), Some(z2)) = (&r.z1, &r.z2) {
        s.z1 = z1.clone();
        s.z2 = z2.clone();
    }
    if let Some(l) = &r.ell1 {
        s.ell1 = l.clone();
    }
    if let Some(l) = &r.ell2 {
        s.ell2 = l.clone();
    }
    [s.a1p, s.a2p] = r.a_plus;
    [s.a1m, s.a2m] = r.a_minus;
    s
}

fn reduced(config: &RunConfig, soliton: &Soliton, out: &mut RunDir, log_law: bool) -> Result<Value, CliError> {
    let r = &config.numerics.reduced;
    let name = if log_law { "log_law" } else { "reduced" };
    let model = reduced_model(config, soliton)?;
    let state0 = reduced_initial(config);
    let times = sample_times(0.0, r.t_end, 0.1, 10.0, r.samples_per_decade);
    let traj = integrate_at(&model, &state0, &times, r.rtol).map_err(|e| CliError::scenario(name, e))?;
    let dim = model.dim;
    let asym = |t: f64| {
        if r.sigma < 0.0 && t > 1.0 {
            asymptotic_distance(t, dim, model.alpha, model.kappa, model.g0)
        } else {
            f64::NAN
        }
    };
    let mut header: Vec<String> = vec!["t".into(), "r".into()];
    for prefix in ["z1", "z2", "ell1", "ell2"] {
        header.extend((0..dim).map(|j| format!("{prefix}_{j}")));
    }
    header.extend(["a1p", "a2p", "a1m", "a2m", "r_asym", "defect"].map(String::from));
    let rows: Vec<Vec<f64>> = traj
        .samples
        .iter()
        .map(|s| {
            let d = s.distance();
            let ra = asym(s.t);
            let mut row = vec![s.t, d];
            for v in [&s.z1, &s.z2, &s.ell1, &s.ell2] {
                row.extend(v.iter().copied());
            }
            row.extend([s.a1p, s.a2p, s.a1m, s.a2m, ra, d - ra]);
            row
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write_csv("reduced.csv", &header_refs, rows.iter().map(|r| &r[..]))?;
    let last = traj.samples.last().expect("trajectory has the initial sample");
    let defect = last.distance() - asym(last.t);
    let outcome = match traj.outcome {
        Outcome::Completed => json!("completed"),
        Outcome::Collision { t } => json!({ "collision": t }),
    };
    let mut summary = json!({
        "outcome": outcome,
        "t_final": last.t,
        "r_final": last.distance(),
        "r_asym_final": asym(last.t),
        "defect_final": defect,
        "accepted_steps": traj.accepted_steps,
        "rejected_steps": traj.rejected_steps,
    });
    if log_law {
        // The defect should shrink monotonically once the transient is over.
        let tail: Vec<f64> = traj.samples.iter().filter(|s| s.t >= 1e3).map(|s| s.distance() - asym(s.t)).collect();
        let decreasing = tail.windows(2).all(|w| w[1].abs() <= w[0].abs());
        summary["defect_decreasing_after_1e3"] = json!(decreasing);
        summary["passed"] = json!(traj.outcome == Outcome::Completed && defect.abs() <= 0.01 && decreasing);
    }
    Ok(summary)
}

fn same_sign(config: &RunConfig, soliton: &Soliton, out: &mut RunDir) -> Result<Value, CliError> {
    let s = &config.numerics.same_sign;
    let name = "same_sign";
    let fail = |e: &dyn std::fmt::Display| CliError::scenario(name, e);
    let model = ReducedModel::from_soliton(soliton, GMode::Asymptotic);
    let rate = model.kappa * model.g0 / model.alpha;
    let reduced_rows = s
        .r0
        .par_iter()
        .map(|&r0| {
            let state = ReducedState::at_rest(model.dim, 1.0, r0);
            let traj = integrate(&model, &state, s.t_end, s.rtol).map_err(|e| fail(&e))?;
            let t_c = match traj.outcome {
                Outcome::Collision { t } => t,
                Outcome::Completed => f64::NAN,
            };
            Ok([r0, t_c, r0.exp() / rate])
        })
        .collect::<Result<Vec<[f64; 3]>, CliError>>()?;
    out.write_csv(
        "same_sign_reduced.csv",
        &["r0", "t_collision", "estimate"],
        reduced_rows.iter().map(|r| &r[..]),
    )?;
    let all_collide = reduced_rows.iter().all(|r| r[1].is_finite());

    // Field run from a plain same-sign pair at rest.
    let grid = Grid1D::symmetric(s.half_width, s.h).map_err(|e| fail(&e))?;
    let spec = InitialDataSpec::PlainPair {
        sigma: [1.0, 1.0],
        z: [0.5 * s.l, -0.5 * s.l],
        ell: [0.0; 2],
        perturbation: None,
    };
    let state = build_initial_data(&spec, soliton, &grid).map_err(|e| fail(&e))?;
    let params = &soliton.params;
    let mut stepper = Leapfrog::new(&state, params, s.dt).map_err(|e| fail(&e))?;
    let per_sample = (s.cadence / s.dt).round() as u64;
    let dcfg = DecomposeConfig::default();
    let mut geometry = PairGeometry { sigma: [1.0, 1.0], z: [0.5 * s.l, -0.5 * s.l] };
    let mut rows: Vec<[f64; 6]> = Vec::new();
    let mut stop = "t_max".to_string();
    loop {
        let st = stepper.state();
        let e = dampkg::field1d::energy(&st, params);
        match decompose(&st, soliton, &geometry, &dcfg) {
            Ok(dec) => {
                geometry = dec.geometry();
                let b = dec.a_plus[0].powi(2) + dec.a_plus[1].powi(2);
                rows.push([st.t, e, dec.z[0] - dec.z[1], dec.z[0], dec.z[1], b]);
            }
            Err(err) => {
                stop = format!("modulation lost at t = {}: {err}", st.t);
                break;
            }
        }
        if st.t >= s.t_max - 0.5 * s.dt {
            break;
        }
        if let Err(err) = stepper.advance(per_sample) {
            stop = format!("field stopped: {err}");
            break;
        }
    }
    out.write_csv("timeseries.csv", &["t", "E", "r", "z1", "z2", "b"], rows.iter().map(|r| &r[..]))?;
    let two_eq = 2.0 * soliton.profile.e_q;
    let r_decreasing = rows.len() >= 2 && rows.windows(2).all(|w| w[1][2] <= w[0][2]);
    let e_below = rows.iter().any(|r| r[1] < two_eq);
    Ok(json!({
        "reduced_all_collide": all_collide,
        "reduced": reduced_rows.iter().map(|r| json!({ "r0": r[0], "t_collision": r[1], "estimate": r[2] })).collect::<Vec<_>>(),
        "pde_tracked_until": rows.last().map(|r| r[0]),
        "pde_stop": stop,
        "pde_r_start": rows.first().map(|r| r[2]),
        "pde_r_end": rows.last().map(|r| r[2]),
        "pde_r_decreasing": r_decreasing,
        "pde_energy_below_two_eq": e_below,
        "two_eq": two_eq,
    }))
}

fn shoot_config(config: &RunConfig) -> ShootConfig {
    let s = &config.numerics.shoot;
    let base = match s.precision {
        Precision::DoubleDouble => ShootConfig::persistence(s.delta),
        Precision::Double => ShootConfig::fast(s.delta),
    };
    ShootConfig {
        t_accept: s.t_accept.unwrap_or(base.t_accept),
        tol: s.tol.unwrap_or(base.tol),
        search_radius: s.search_radius,
        b_exit: s.b_exit,
        separation_gate: s.separation_gate,
        pde: PdeSettings { half_width: s.half_width, h: s.h, dt: s.dt, precision: s.precision },
        ..base
    }
}

fn kind_code(kind: &ExitKind) -> f64 {
    match kind {
        ExitKind::Persisted { .. } => 0.0,
        ExitKind::UnstableExit { .. } => 1.0,
        ExitKind::Collision { .. } => 2.0,
        ExitKind::Blowup { .. } => 3.0,
    }
}

fn shoot(config: &RunConfig, soliton: &Soliton, out: &mut RunDir) -> Result<Value, CliError> {
    let s = &config.numerics.shoot;
    let name = "shoot";
    let fail = |e: &dyn std::fmt::Display| CliError::scenario(name, e);
    let cfg = shoot_config(config);
    let grid = cfg.pde.grid().map_err(|e| fail(&e))?;
    let phi = s.perturbation.map(|p| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        random_perturbation(&mut rng, &grid, &[0.5 * s.l, -0.5 * s.l], &p)
    });
    let result = find_h(s.l, phi.as_ref(), soliton, &cfg).map_err(|e| fail(&e))?;
    let shot = &result.shoot;

    let trace_rows: Vec<[f64; 12]> = shot
        .trace
        .iter()
        .enumerate()
        .map(|(i, e)| {
            [
                i as f64,
                e.c[0],
                e.c_lo[0],
                e.c[1],
                e.c_lo[1],
                kind_code(&e.kind),
                e.kind.time(),
                e.signs[0].unwrap_or(0.0),
                e.signs[1].unwrap_or(0.0),
                e.increments[0],
                e.increments[1],
                e.b_rate.unwrap_or(f64::NAN),
            ]
        })
        .collect();
    out.write_csv(
        "trace.csv",
        &["iteration", "h1", "h1_lo", "h2", "h2_lo", "kind", "t_exit", "sign1", "sign2", "inc1", "inc2", "b_rate"],
        trace_rows.iter().map(|r| &r[..]),
    )?;
    let persisted: Vec<Vec<f64>> = shot
        .final_run
        .records
        .iter()
        .map(|r| {
            let mut row = vec![r.t];
            row.extend(modulation_row(r));
            row
        })
        .collect();
    let mut header = vec!["t"];
    header.extend(MODULATION_COLUMNS);
    out.write_csv("persisted.csv", &header, persisted.iter().map(|r| &r[..]))?;

    // Neighbours of H along each axis must leave.
    let offsets: Vec<Value> = match s.offset_check {
        Some(d) => {
            let family = AffineFamily::shooting_pair(s.l, phi.as_ref(), soliton, &grid).map_err(|e| fail(&e))?;
            let centre = [0, 1].map(|k| TwoFloat::from(shot.coefficients[k]) + TwoFloat::from(shot.coefficients_lo[k]));
            let shifts = [[d, 0.0], [-d, 0.0], [0.0, d], [0.0, -d]];
            shifts
                .par_iter()
                .map(|dc| {
                    let c = [0, 1].map(|k| centre[k] + TwoFloat::from(dc[k]));
                    let cls = classify_member(&family, c, soliton, &cfg).map_err(|e| fail(&e))?;
                    Ok(json!({ "offset": dc, "kind": cls.kind, "b_rate": cls.b_rate }))
                })
                .collect::<Result<Vec<_>, CliError>>()?
        }
        None => Vec::new(),
    };
    let fr = &shot.final_run;
    let summary = json!({
        "l": s.l,
        "delta": s.delta,
        "precision": s.precision,
        "h": result.h,
        "h_lo": shot.coefficients_lo,
        "h_parallel": result.h_parallel,
        "a_plus": shot.a_plus,
        "iterations": shot.iterations,
        "box_width": shot.box_width,
        "converged_at_resolution": shot.converged_at_resolution,
        "monotone": shot.monotone,
        "b_exit": cfg.b_exit(),
        "residual_b_at_t": shot.residual_b_at_t,
        "t_accept": cfg.t_accept,
        "final_run": {
            "kind": fr.kind,
            "r_start": fr.r_start,
            "r_end": fr.r_end,
            "b_final": fr.b_final,
            "sandwich_held": fr.sandwich_held,
        },
        "rates": {
            "target_b_rate": 2.0 * soliton.spectral.nu_plus(),
            "trace_b_rates": shot.trace.iter().filter_map(|e| e.b_rate).collect::<Vec<_>>(),
        },
        "offsets": offsets,
    });
    let mut full = summary.clone();
    full["trace"] = serde_json::to_value(&shot.trace).map_err(|e| CliError::Io(e.to_string()))?;
    out.write_json("shoot_result.json", &full)?;
    Ok(summary)
}

fn lipschitz(config: &RunConfig, soliton: &Soliton, out: &mut RunDir) -> Result<Value, CliError> {
    let l = &config.numerics.lipschitz;
    let name = "lipschitz";
    let fail = |e: &dyn std::fmt::Display| CliError::scenario(name, e);
    let mut reports = Vec::with_capacity(l.deltas.len());
    for &delta in &l.deltas {
        let mut cfg = ShootConfig { t_accept: l.t_accept, tol: l.tol, ..ShootConfig::fast(delta) };
        cfg.pde.half_width = l.half_width;
        let grid = cfg.pde.grid().map_err(|e| fail(&e))?;
        let (base, perturbed) =
            probe_batch(l.l, delta, l.random_directions, config.seed, soliton, &grid).map_err(|e| fail(&e))?;
        reports.push(lipschitz_probe(&cfg, &base, &perturbed, soliton).map_err(|e| fail(&e))?);
    }
    let trend = lipschitz_trend(&reports);
    let value = json!({ "reports": reports, "trend": trend });
    out.write_json("lipschitz.json", &value)?;
    Ok(json!({ "c": trend.c, "batches": trend.batches, "passed": trend.passed }))
}
