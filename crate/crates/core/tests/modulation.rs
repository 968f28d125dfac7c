use dampkg::field1d::{
    add_soliton, add_unstable_mode, build_initial_data, FieldState, Gamma, Grid1D, InitialDataSpec, Leapfrog,
    Perturbation,
};
use dampkg::interactions::GTable;
use dampkg::modulation::{
    build_w, check_parameter_odes, decompose, default_mu, diagnostics, guess_from_extrema, project_remainder,
    DecomposeConfig, ModulationError, ModulationRecord, PairGeometry,
};
use dampkg::quad::simpson;
use dampkg::{ModelParams, Soliton};
use proptest::prelude::*;
use std::sync::OnceLock;

fn cubic() -> &'static Soliton {
    static S: OnceLock<Soliton> = OnceLock::new();
    S.get_or_init(|| Soliton::compute(&ModelParams::cubic_1d()).unwrap())
}

fn grid() -> Grid1D {
    Grid1D::symmetric(30.0, 0.02).unwrap()
}

fn dot(a: &[f64], b: &[f64], h: f64) -> f64 {
    let p: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    simpson(&p, h)
}

/// Closed-form `(√3/2) sech²` and `√2 sech' `.
fn y_closed(x: f64) -> f64 {
    0.75f64.sqrt() / x.cosh().powi(2)
}

fn dq_closed(x: f64) -> f64 {
    -(2f64.sqrt()) * x.tanh() / x.cosh()
}

fn pair_state(sigma: [f64; 2], z: [f64; 2], ell: [f64; 2]) -> FieldState {
    let spec = InitialDataSpec::PlainPair { sigma, z, ell, perturbation: None };
    build_initial_data(&spec, cubic(), &grid()).unwrap()
}

fn smooth_remainder(grid: &Grid1D, size: f64) -> (Vec<f64>, Vec<f64>) {
    let xs = grid.xs();
    let u = xs.iter().map(|x| size * (-(x - 1.0f64).powi(2)).exp()).collect();
    let v = xs.iter().map(|x| 2.0 * size * x * (-(x + 2.0f64).powi(2)).exp()).collect();
    (u, v)
}

#[test]
fn exact_pair_decomposes_to_zero_remainder() {
    let s = cubic();
    let state = pair_state([1.0, -1.0], [5.0, -5.0], [0.0; 2]);
    let guess = PairGeometry { sigma: [1.0, -1.0], z: [5.1, -4.95] };
    let dec = decompose(&state, s, &guess, &DecomposeConfig::default()).unwrap();
    assert!((dec.z[0] - 5.0).abs() < 1e-12 && (dec.z[1] + 5.0).abs() < 1e-12, "{:?}", dec.z);
    assert!(dec.ell.iter().chain(&dec.a_plus).chain(&dec.a_minus).all(|x| x.abs() < 1e-12));
    assert!(dec.eps_norm < 1e-12);

    let d = diagnostics(&dec, s, default_mu(s), 5.0);
    // Zero up to round-off in the quadratures.
    assert!(d.e_func.abs() < 1e-14 && d.n_norm < 1e-12 && d.m_func.abs() < 1e-13 && d.b < 1e-24, "{d:?}");
    assert!(d.f_func.abs() < 1e-14);
    let inv_q = 1.0 / s.profile.eval(10.0);
    assert!(((d.r_plus - inv_q) / inv_q).abs() < 1e-12 && ((d.r_minus - inv_q) / inv_q).abs() < 1e-12);
    assert!((d.r - 10.0).abs() < 1e-12);
}

#[test]
fn unstable_mode_bump_gives_both_coefficients() {
    let s = cubic();
    let g = grid();
    let mut state = pair_state([1.0, -1.0], [5.0, -5.0], [0.0; 2]);
    let mut v = vec![0.0; g.n];
    let mut u_mode = vec![0.0; g.n];
    add_unstable_mode(s, &g, 1e-3, 5.0, &mut u_mode, &mut v);
    state.u.iter_mut().zip(&u_mode).for_each(|(a, b)| *a += b);
    let dec = decompose(&state, s, &PairGeometry { sigma: [1.0, -1.0], z: [5.0, -5.0] }, &DecomposeConfig::default())
        .unwrap();
    // ∫Y² = 1 and the second soliton sees the bump only through its tail.
    let bound = 10.0 * (-5.0f64).exp();
    for (got, zeta) in [(dec.a_plus[0], 3.0), (dec.a_minus[0], -1.0)] {
        let want = zeta * 1e-3;
        assert!(((got - want) / want).abs() < bound, "{got} vs {want}");
    }
    // Independent closed-form inner products against the returned remainder.
    let eps_y: f64 = dot(&dec.eps, &g.xs().iter().map(|x| y_closed(x - dec.z[0])).collect::<Vec<_>>(), g.h());
    let eta_y: f64 = dot(&dec.eta, &g.xs().iter().map(|x| y_closed(x - dec.z[0])).collect::<Vec<_>>(), g.h());
    assert!((dec.a_plus[0] - (3.0 * eps_y + eta_y)).abs() < 1e-8);
    assert!((dec.a_minus[0] - (-eps_y + eta_y)).abs() < 1e-8);
}

#[test]
fn remainder_is_orthogonal_to_translations() {
    let s = cubic();
    let g = grid();
    let mut state = pair_state([1.0, 1.0], [6.0, -6.0], [2e-3, -1e-3]);
    let (du, dv) = smooth_remainder(&g, 5e-3);
    state.u.iter_mut().zip(&du).for_each(|(a, b)| *a += b);
    state.v.iter_mut().zip(&dv).for_each(|(a, b)| *a += b);
    let guess = guess_from_extrema(&g, &state.u, 4.0).unwrap();
    let dec = decompose(&state, s, &guess, &DecomposeConfig::default()).unwrap();
    for k in 0..2 {
        let dq: Vec<f64> = g.xs().iter().map(|x| dq_closed(x - dec.z[k])).collect();
        assert!(dot(&dec.eps, &dq, g.h()).abs() <= 1e-10 * dec.eps_norm);
        assert!(dot(&dec.eta, &dq, g.h()).abs() <= 1e-10 * dec.eps_norm);
    }
    assert!(dec.orthogonality <= 1e-10 * dec.eps_norm);
    // Reconstruction is exact by construction.
    for i in 0..g.n {
        let x = g.x(i);
        let sum: f64 = (0..2).map(|k| s.q_line(x - dec.z[k]).0).sum();
        assert!((state.u[i] - sum - dec.eps[i]).abs() < 1e-15);
        let slope: f64 = (0..2).map(|k| dec.ell[k] * s.q_line(x - dec.z[k]).1).sum();
        assert!((state.v[i] + slope - dec.eta[i]).abs() < 1e-15);
    }
}

#[test]
fn stable_and_unstable_coefficients_recover_the_mode_projection() {
    let s = cubic();
    let g = grid();
    let mut state = pair_state([1.0, -1.0], [6.0, -6.0], [1e-3, 0.0]);
    let (du, dv) = smooth_remainder(&g, 1e-2);
    state.u.iter_mut().zip(&du).for_each(|(a, b)| *a += b);
    state.v.iter_mut().zip(&dv).for_each(|(a, b)| *a += b);
    let dec = decompose(&state, s, &PairGeometry { sigma: [1.0, -1.0], z: [6.0, -6.0] }, &DecomposeConfig::default())
        .unwrap();
    let (zp, zm) = (s.spectral.zeta_plus(), s.spectral.zeta_minus());
    for k in 0..2 {
        let yk: Vec<f64> = g.xs().iter().map(|x| dec.sigma[k] * s.y_line(x - dec.z[k]).0).collect();
        let direct = dot(&dec.eps, &yk, g.h());
        assert!((dec.eps_on_mode(k, zp, zm) - direct).abs() <= 1e-12 * (1.0 + direct.abs()), "k = {k}");
    }
}

#[test]
fn manifold_round_trip_at_separation_twelve() {
    let s = cubic();
    let g = grid();
    let geometry = PairGeometry { sigma: [1.0, -1.0], z: [6.0, -6.0] };
    let (du, dv) = smooth_remainder(&g, 1e-3);
    let (pu, pv) = project_remainder(&du, &dv, &geometry, s, &g).unwrap();
    let gamma =
        Gamma { sigma: [1.0, -1.0], z: [6.0, -6.0], ell: [1e-3, -2e-3], eps_perp: Some(Perturbation { u: pu, v: pv }) };
    let a_plus = [3e-3, -1e-3];
    let state = build_initial_data(&InitialDataSpec::Manifold { gamma: gamma.clone(), a_plus }, s, &g).unwrap();
    let guess = guess_from_extrema(&g, &state.u, 4.0).unwrap();
    let dec = decompose(&state, s, &guess, &DecomposeConfig::default()).unwrap();
    for k in 0..2 {
        assert!((dec.z[k] - gamma.z[k]).abs() < 1e-8, "{:?}", dec.z);
        assert!((dec.ell[k] - gamma.ell[k]).abs() < 1e-8, "{:?}", dec.ell);
        assert!((dec.a_plus[k] - a_plus[k]).abs() < 1e-8, "{:?}", dec.a_plus);
    }
    assert!(dec.orthogonality <= 1e-10 * dec.eps_norm);
}

#[test]
fn corrector_satisfies_its_constraints() {
    let s = cubic();
    let g = grid();
    let geometry = PairGeometry { sigma: [1.0, -1.0], z: [6.0, -6.0] };
    let zero = build_w([0.0; 2], &geometry, s, &g).unwrap();
    assert!(zero.u.iter().chain(&zero.v).all(|&x| x == 0.0));

    let nu = s.spectral.nu_plus();
    let zp = s.spectral.zeta_plus();
    for a in [[1.0, 0.0], [0.0, 1.0], [0.3, -0.7]] {
        let w = build_w(a, &geometry, s, &g).unwrap();
        assert!(w.u.iter().zip(&w.v).all(|(u, v)| (v - nu * u).abs() < 1e-15));
        for k in 0..2 {
            let yk: Vec<f64> = g.xs().iter().map(|x| geometry.sigma[k] * s.y_line(x - geometry.z[k]).0).collect();
            let dqk: Vec<f64> = g.xs().iter().map(|x| geometry.sigma[k] * s.q_line(x - geometry.z[k]).1).collect();
            assert!(dot(&w.u, &dqk, g.h()).abs() < 1e-12);
            let on_z = zp * dot(&w.u, &yk, g.h()) + dot(&w.v, &yk, g.h());
            assert!((on_z - a[k]).abs() < 1e-12, "a = {a:?}, k = {k}: {on_z}");
        }
    }
}

#[test]
fn corrector_is_diagonal_at_large_separation() {
    let s = cubic();
    let g = Grid1D::symmetric(40.0, 0.02).unwrap();
    let w = build_w([1.0, 0.0], &PairGeometry { sigma: [1.0, -1.0], z: [15.0, -15.0] }, s, &g).unwrap();
    let beta = s.spectral.beta();
    let off = [(w.b[0][0] - beta).abs(), (w.b[1][1] - beta).abs(), w.b[0][1].abs(), w.b[1][0].abs()];
    assert!(off.iter().all(|&e| e < 1e-9), "{:?} vs {beta}", w.b);
}

#[test]
fn decomposition_refuses_bad_inputs() {
    let s = cubic();
    let cfg = DecomposeConfig::default();
    let state = pair_state([1.0, -1.0], [2.0, -2.0], [0.0; 2]);
    let err = decompose(&state, s, &PairGeometry { sigma: [1.0, -1.0], z: [2.0, -2.0] }, &cfg).unwrap_err();
    assert!(matches!(err, ModulationError::SeparationLost { .. }), "{err:?}");

    let mut state = pair_state([1.0, -1.0], [6.0, -6.0], [0.0; 2]);
    let (du, _) = smooth_remainder(&grid(), 0.2);
    state.u.iter_mut().zip(&du).for_each(|(a, b)| *a += b);
    let err = decompose(&state, s, &PairGeometry { sigma: [1.0, -1.0], z: [6.0, -6.0] }, &cfg).unwrap_err();
    assert!(matches!(err, ModulationError::ProximityViolated { .. }), "{err:?}");

    let flat = FieldState::<f64>::zeros(grid());
    assert!(matches!(guess_from_extrema(&grid(), &flat.u, 4.0), Err(ModulationError::NoExtrema)));
}

#[test]
fn decomposition_map_is_lipschitz() {
    let s = cubic();
    let g = grid();
    let base = pair_state([1.0, -1.0], [6.0, -6.0], [0.0; 2]);
    let geometry = PairGeometry { sigma: [1.0, -1.0], z: [6.0, -6.0] };
    let cfg = DecomposeConfig::default();
    let d0 = decompose(&base, s, &geometry, &cfg).unwrap();
    let mut worst = 0.0f64;
    for (shift, size) in [(0.0, 1e-3), (3.0, 1e-3), (-5.0, 1e-4), (7.0, 1e-4)] {
        let mut state = base.clone();
        let xs = g.xs();
        let du: Vec<f64> = xs.iter().map(|x| size * (-(x - shift as f64).powi(2)).exp()).collect();
        let dv: Vec<f64> = xs.iter().map(|x| size * (x - shift) * (-(x - shift as f64).powi(2)).exp()).collect();
        state.u.iter_mut().zip(&du).for_each(|(a, b)| *a += b);
        state.v.iter_mut().zip(&dv).for_each(|(a, b)| *a += b);
        let d = decompose(&state, s, &geometry, &cfg).unwrap();
        let change = (0..2).map(|k| (d.z[k] - d0.z[k]).powi(2) + (d.ell[k] - d0.ell[k]).powi(2)).sum::<f64>().sqrt();
        let norm = dampkg::field1d::energy_norm_sq(&g, &du, &dv).sqrt();
        worst = worst.max(change / norm);
    }
    assert!(worst <= 10.0, "{worst}");
}

/// Pair at ±15 with `c·Y⃗⁺` on the first soliton, decomposed every `cadence`.
fn tracked_run(c: f64, t_end: f64) -> Vec<ModulationRecord> {
    let s = cubic();
    let g = Grid1D::symmetric(36.0, 0.02).unwrap();
    let mut state = FieldState::<f64>::zeros(g);
    add_soliton(s, &g, 1.0, 15.0, 0.0, &mut state.u, &mut state.v);
    add_soliton(s, &g, -1.0, -15.0, 0.0, &mut state.u, &mut state.v);
    add_unstable_mode(s, &g, c, 15.0, &mut state.u, &mut state.v);
    let mut lf = Leapfrog::new(&state, &s.params, 0.01).unwrap();
    let mut geometry = PairGeometry { sigma: [1.0, -1.0], z: [15.0, -15.0] };
    let mu = default_mu(s);
    let mut out = Vec::new();
    for k in 0..=(t_end / 0.05).round() as usize {
        if k > 0 {
            lf.advance(5).unwrap();
        }
        let dec = decompose(&lf.state(), s, &geometry, &DecomposeConfig::default()).unwrap();
        geometry = dec.geometry();
        let d = diagnostics(&dec, s, mu, 5.0);
        assert!(d.sandwich_holds, "t = {}", dec.t);
        out.push(ModulationRecord::new(&dec, d));
    }
    out
}

#[test]
fn parameter_equations_hold_along_a_tracked_run() {
    let s = cubic();
    let records = tracked_run(1e-4, 3.0);
    let table = GTable::build(&s.profile, 0.05).unwrap();
    let report = check_parameter_odes(&records, s, &table).unwrap();
    for fit in [report.position, report.velocity, report.unstable, report.stable, report.distance, report.growth] {
        assert!(fit.constant.is_finite(), "{report:?}");
    }
    // Local growth of a₁⁺ from centred differences.
    let nu = s.spectral.nu_plus();
    for w in records.windows(3).step_by(10) {
        let rate = (w[2].a_plus[0] - w[0].a_plus[0]) / (w[2].t - w[0].t) / w[1].a_plus[0];
        assert!(((rate - nu) / nu).abs() < 0.05, "t = {}: {rate}", w[1].t);
    }
    let sparse: Vec<ModulationRecord> = records.iter().step_by(2).copied().collect();
    assert!(matches!(
        check_parameter_odes(&sparse, s, &table),
        Err(ModulationError::InsufficientCadence { .. })
    ));
    assert!(matches!(check_parameter_odes(&records[..2], s, &table), Err(ModulationError::TooFewSamples(2))));
}

#[test]
fn frozen_pair_has_no_parameter_drift() {
    let s = cubic();
    let records = tracked_run(0.0, 0.2);
    let table = GTable::build(&s.profile, 0.05).unwrap();
    let report = check_parameter_odes(&records, s, &table).unwrap();
    assert!(report.position.max_lhs < 1e-6, "{:?}", report.position);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn coercivity_sandwich_on_small_remainders(
        size in 1e-4f64..2e-2,
        c1 in -3.0f64..3.0,
        c2 in -3.0f64..3.0,
        w in 0.5f64..3.0,
        ell in -1e-3f64..1e-3,
    ) {
        let s = cubic();
        let g = grid();
        let mut state = pair_state([1.0, -1.0], [6.0, -6.0], [ell, -ell]);
        for i in 0..g.n {
            let x = g.x(i);
            state.u[i] += size * (-((x - c1) / w).powi(2)).exp();
            state.v[i] += size * ((x - c2) / w) * (-((x - c2) / w).powi(2)).exp();
        }
        let dec = decompose(&state, s, &PairGeometry { sigma: [1.0, -1.0], z: [6.0, -6.0] }, &DecomposeConfig::default())
            .unwrap();
        let d = diagnostics(&dec, s, default_mu(s), 5.0);
        prop_assert!(d.sandwich_holds);
        prop_assert!((d.b - dec.a_plus[0].powi(2) - dec.a_plus[1].powi(2)).abs() <= 1e-15 * (1.0 + d.b));
    }
}
