use dampkg::field1d::{add_unstable_mode, energy_norm_sq, Perturbation};
use dampkg::modulation::{decompose, DecomposeConfig, PairGeometry};
use dampkg::shooter::{
    classify_member, find_h, lipschitz_trend, probe_batch, AffineFamily, ExitKind, HResult, LipschitzReport,
    Omega, ShootConfig, ShootError,
};
use dampkg::{ModelParams, Soliton};
use std::sync::OnceLock;
use twofloat::TwoFloat;

fn cubic() -> &'static Soliton {
    static S: OnceLock<Soliton> = OnceLock::new();
    S.get_or_init(|| Soliton::compute(&ModelParams::cubic_1d()).unwrap())
}

fn fast() -> ShootConfig {
    ShootConfig::fast(1e-2)
}

/// The double-precision shoot at `L = 12` with `φ = 0`.
fn shot() -> &'static HResult {
    static H: OnceLock<HResult> = OnceLock::new();
    H.get_or_init(|| find_h(12.0, None, cubic(), &fast()).unwrap())
}

#[test]
fn unperturbed_shoot_is_symmetric_and_small() {
    let r = shot();
    // The data are odd, and the stepper preserves oddness exactly.
    assert!((r.h[0] - r.h[1]).abs() <= 1e-8, "{:?}", r.h);
    let bound = 10.0 * (-6f64).exp();
    assert!(r.h.iter().all(|h| h.abs() <= bound), "{:?}", r.h);
    assert!(r.shoot.final_run.kind.persisted());
    assert!(r.shoot.final_run.b_final <= fast().b_exit() / 10.0, "{}", r.shoot.final_run.b_final);
    assert!(r.shoot.final_run.sandwich_held);
    assert!(r.shoot.monotone);
    assert_eq!(r.h_parallel, [0.0, 0.0]);
    // a⁺ coordinates are h / β.
    assert!((r.shoot.a_plus[0] - r.h[0] / cubic().spectral.beta()).abs() < 1e-18);
}

#[test]
fn corners_exit_with_their_own_signs() {
    let trace = &shot().shoot.trace;
    let radius = cubic().spectral.beta() * fast().search_radius();
    for entry in &trace[..4] {
        assert!(matches!(entry.kind, ExitKind::UnstableExit { .. }), "{entry:?}");
        for k in 0..2 {
            assert_eq!(entry.c[k].abs(), radius);
            assert_eq!(entry.signs[k], Some(entry.c[k].signum()));
        }
    }
}

#[test]
fn exits_grow_at_twice_the_unstable_rate() {
    let nu = cubic().spectral.nu_plus();
    let rates: Vec<f64> = shot().shoot.trace.iter().filter_map(|e| e.b_rate).collect();
    assert!(rates.len() >= 4);
    for rate in rates {
        assert!((rate / (2.0 * nu) - 1.0).abs() <= 0.1, "{rate}");
    }
}

#[test]
fn offsets_from_the_shot_leave_early() {
    let s = cubic();
    let cfg = fast();
    let grid = cfg.pde.grid().unwrap();
    let family = AffineFamily::shooting_pair(12.0, None, s, &grid).unwrap();
    let h = shot().h;
    for (k, sign) in [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0)] {
        let mut c = h.map(TwoFloat::from);
        c[k] += TwoFloat::from(sign * 1e-3);
        let cls = classify_member(&family, c, s, &cfg).unwrap();
        let ExitKind::UnstableExit { k: dominant, sign: exit_sign, t } = cls.kind else {
            panic!("offset {k} {sign}: {:?}", cls.kind)
        };
        assert!(t < 15.0, "{t}");
        assert_eq!(dominant, k);
        assert_eq!(exit_sign, sign);
    }
}

#[test]
fn unstable_mode_in_the_perturbation_shifts_the_coefficient() {
    // Adding c·Y⃗⁺ at the first soliton is the same data as h₁ + c.
    let s = cubic();
    let cfg = fast();
    let grid = cfg.pde.grid().unwrap();
    // Must stay inside the search box of half-width β δ^{5/4}.
    let c = 3e-4;
    let mut phi = Perturbation { u: vec![0.0; grid.n], v: vec![0.0; grid.n] };
    add_unstable_mode(s, &grid, c, 6.0, &mut phi.u, &mut phi.v);
    assert!(energy_norm_sq(&grid, &phi.u, &phi.v).sqrt() < cfg.delta);
    let r = find_h(12.0, Some(&phi), s, &cfg).unwrap();
    let base = shot().h;
    assert!((r.h[0] - (base[0] - c)).abs() <= 1e-9, "{} vs {}", r.h[0], base[0] - c);
    assert!((r.h[1] - base[1]).abs() <= 1e-9, "{} vs {}", r.h[1], base[1]);
    // The linear projection sees the same shift up to the tail coupling.
    assert!((r.h_parallel[0] + c).abs() <= c * 1e-3, "{:?}", r.h_parallel);
    assert!(r.h_parallel[1].abs() <= c * 1e-3, "{:?}", r.h_parallel);
}

#[test]
fn shot_initial_data_decomposes_near_the_nominal_pair() {
    let s = cubic();
    let cfg = fast();
    let grid = cfg.pde.grid().unwrap();
    let family = AffineFamily::shooting_pair(12.0, None, s, &grid).unwrap();
    let state = family.state::<f64>(shot().h);
    let dec = decompose(&state, s, &PairGeometry { sigma: [1.0, -1.0], z: [6.0, -6.0] }, &DecomposeConfig::default())
        .unwrap();
    assert!((dec.z[0] - 6.0).abs() < 1e-3 && (dec.z[1] + 6.0).abs() < 1e-3, "{:?}", dec.z);
    // β a⁺ and h agree to second order in the small quantities.
    for k in 0..2 {
        let beta_a = s.spectral.beta() * dec.a_plus[k];
        assert!((beta_a - shot().h[k]).abs() <= 1e-2 * cfg.delta, "{beta_a} vs {}", shot().h[k]);
    }
}

#[test]
fn shoot_refuses_bad_requests() {
    let s = cubic();
    let cfg = fast();
    assert!(matches!(find_h(6.0, None, s, &cfg), Err(ShootError::SeparationGate { .. })));
    let grid = cfg.pde.grid().unwrap();
    let big = Perturbation { u: vec![0.0; grid.n], v: grid.xs().iter().map(|x| 0.1 * (-x * x).exp()).collect() };
    assert!(matches!(find_h(12.0, Some(&big), s, &cfg), Err(ShootError::PerturbationTooLarge { .. })));
    let bad = ShootConfig { cadence: 0.03, ..cfg };
    assert!(matches!(find_h(12.0, None, s, &bad), Err(ShootError::BadConfig(_))));
    assert!(matches!(find_h(14.0, None, s, &cfg), Err(ShootError::Field(_))));
}

#[test]
fn probe_batch_directions_are_admissible() {
    let s = cubic();
    let delta = 1e-2;
    let grid = dampkg::field1d::Grid1D::symmetric(27.0, 0.025).unwrap();
    let (base, batch) = probe_batch(12.0, delta, 3, 7, s, &grid).unwrap();
    assert_eq!(batch.len(), 6);
    let zero = Omega { l: 12.0, phi: None };
    assert!((base.distance(&zero, &grid) - 0.5 * delta).abs() < 1e-12);
    for o in &batch {
        let d = base.distance(o, &grid);
        assert!(d > 0.0 && d <= 0.25 * delta + 1e-12, "{d}");
        assert!(o.distance(&zero, &grid) < delta);
    }
    // Same seed, same batch.
    let (base2, batch2) = probe_batch(12.0, delta, 3, 7, s, &grid).unwrap();
    assert_eq!(base, base2);
    assert_eq!(batch, batch2);

    let family = AffineFamily::shooting_pair(12.0, None, s, &grid).unwrap();
    let h = grid.h();
    let dot = |a: &[f64], b: &[f64]| dampkg::quad::simpson(&a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>(), h);
    let phi = base.phi.as_ref().unwrap();
    for k in 0..2 {
        let dq: Vec<f64> = grid.xs().iter().map(|x| s.q_line(x - family.geometry.z[k]).1).collect();
        assert!(dot(&phi.u, &dq).abs() < 1e-12 && dot(&phi.v, &dq).abs() < 1e-12);
    }
}

#[test]
fn trend_uses_one_constant_for_all_batches() {
    let report = |delta: f64, max_ratio: f64| LipschitzReport {
        delta,
        h_base: [0.0; 2],
        samples: vec![],
        max_ratio,
        fitted_c: max_ratio / delta.powf(0.25),
    };
    let c = 1e-3 / 1e-2f64.powf(0.25);
    let ok = lipschitz_trend(&[report(1e-2, 1e-3), report(1e-3, 1.9 * c * 1e-3f64.powf(0.25))]);
    assert!(ok.passed && (ok.c - c).abs() < 1e-15);
    let bad = lipschitz_trend(&[report(1e-2, 1e-3), report(1e-3, 2.1 * c * 1e-3f64.powf(0.25))]);
    assert!(!bad.passed);
    assert!(!lipschitz_trend(&[]).passed);
}
