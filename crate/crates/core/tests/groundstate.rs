use dampkg::groundstate::{
    extract_kappa, extract_kappa_from, interaction_constants, ode_residual, soliton_energy, solve_ground_state,
    GroundStateError,
};
use dampkg::quad::simpson;
use dampkg::radial::RadialGridSpec;
use dampkg::ModelParams;
use proptest::prelude::*;

const TOL: f64 = 1e-14;

/// `((p+1)/2)^{1/(p-1)} sech^{2/(p-1)}((p-1)x/2)`
fn closed_form(p: f64, x: f64) -> f64 {
    ((p + 1.0) / 2.0).powf(1.0 / (p - 1.0)) * (1.0 / (0.5 * (p - 1.0) * x).cosh()).powf(2.0 / (p - 1.0))
}

fn line_profile(p: f64) -> dampkg::groundstate::RadialProfile {
    let params = ModelParams::new(1, p, 1.0).unwrap();
    solve_ground_state(&params, &RadialGridSpec::default_for(1), TOL).unwrap()
}

/// Simpson on `[-a, a]` of a closed-form integrand at spacing `h`.
fn line_integral(f: impl Fn(f64) -> f64, a: f64, h: f64) -> f64 {
    let n = (2.0 * a / h).round() as usize;
    let v: Vec<f64> = (0..=n).map(|i| f(-a + i as f64 * h)).collect();
    simpson(&v, 2.0 * a / n as f64)
}

#[test]
fn peak_matches_closed_form_cubic_and_quintic() {
    let q3 = line_profile(3.0);
    assert!((q3.q0 - 2f64.sqrt()).abs() < 1e-8, "{}", q3.q0);
    let q5 = line_profile(5.0);
    assert!((q5.q0 - 3f64.powf(0.25)).abs() < 1e-8, "{}", q5.q0);
}

#[test]
fn profile_matches_closed_form_at_every_node() {
    for p in [3.0, 5.0] {
        let prof = line_profile(p);
        let worst = (0..prof.q.len()).map(|i| (prof.q[i] - closed_form(p, prof.r(i))).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-7, "p = {p}: {worst:e}");
    }
}

#[test]
fn decay_amplitude_matches_closed_form() {
    // sqrt(2) sech r ~ 2 sqrt(2) e^{-r}; 3^{1/4} sech^{1/2}(2r) ~ 3^{1/4} sqrt(2) e^{-r}.
    let k3 = line_profile(3.0).kappa;
    assert!((k3 - 2.0 * 2f64.sqrt()).abs() < 1e-3, "{k3}");
    let k5 = line_profile(5.0).kappa;
    assert!((k5 - 3f64.powf(0.25) * 2f64.sqrt()).abs() < 1e-3, "{k5}");
}

#[test]
fn decay_amplitude_of_pure_exponential_is_exact() {
    let grid = RadialGridSpec::default_for(1);
    let q: Vec<f64> = (0..grid.nodes()).map(|i| 5.0 * (-grid.r(i)).exp()).collect();
    let fit = extract_kappa_from(&q, &grid, 1, (15.0, 28.0)).unwrap();
    assert!((fit.kappa - 5.0).abs() < 1e-12);
    assert!(fit.spread < 1e-12);
}

#[test]
fn decay_window_outside_the_tail_is_rejected() {
    let prof = line_profile(3.0);
    assert!(matches!(extract_kappa(&prof, (5.0, 10.0)), Err(GroundStateError::BadWindow(..))));
}

#[test]
fn three_dimensional_profile_is_decreasing_with_small_residual() {
    let params = ModelParams::new(3, 3.0, 1.0).unwrap();
    let grid = RadialGridSpec::new(24.0, 1e-3).unwrap();
    let prof = solve_ground_state(&params, &grid, TOL).unwrap();
    assert!(prof.q.windows(2).all(|w| w[1] < w[0]));
    assert!(ode_residual(&prof) < 1e-8, "{:e}", ode_residual(&prof));
    let fit = extract_kappa(&prof, (12.0, 18.0)).unwrap();
    assert!(fit.spread <= 1e-2, "{}", fit.spread);
}

#[test]
fn translation_norm_and_force_constant_match_quadrature_oracle() {
    let prof = line_profile(3.0);
    // Independent quadrature of the closed form on a finer line grid.
    let dq = |x: f64| -(2f64.sqrt()) * x.tanh() / x.cosh();
    let c1 = line_integral(|x| dq(x).powi(2), 30.0, 2.5e-4);
    let force = line_integral(|x| closed_form(3.0, x).powi(3) * (-x).exp(), 30.0, 2.5e-4);
    assert!((c1 - 4.0 / 3.0).abs() < 1e-10);
    assert!((force - 4.0 * 2f64.sqrt()).abs() < 1e-10);
    assert!((prof.c1 - c1).abs() < 1e-6, "{}", prof.c1);
    assert!((prof.g0 - force / c1).abs() < 1e-5, "{}", prof.g0);
    let (c1b, g0b) = interaction_constants(&prof).unwrap();
    assert_eq!((c1b, g0b), (prof.c1, prof.g0));
}

#[test]
fn soliton_energy_matches_sech_integrals() {
    let prof = line_profile(3.0);
    let sech2 = line_integral(|x| (1.0 / x.cosh()).powi(2), 30.0, 2.5e-4);
    let sech4 = line_integral(|x| (1.0 / x.cosh()).powi(4), 30.0, 2.5e-4);
    assert!((sech2 - 2.0).abs() < 1e-10 && (sech4 - 4.0 / 3.0).abs() < 1e-10);
    let oracle = 0.5 * (4.0 / 3.0 + 2.0 * sech2) - 0.25 * 4.0 * sech4;
    assert!((prof.e_q - oracle).abs() < 1e-6, "{}", prof.e_q);
    assert!((soliton_energy(&prof) - prof.e_q).abs() < 1e-15);
}

#[test]
fn soliton_energy_is_resolution_independent() {
    let params = ModelParams::cubic_1d();
    let coarse = solve_ground_state(&params, &RadialGridSpec::new(30.0, 2e-3).unwrap(), TOL).unwrap();
    let fine = solve_ground_state(&params, &RadialGridSpec::new(30.0, 1e-3).unwrap(), TOL).unwrap();
    assert!((coarse.e_q - fine.e_q).abs() < 1e-8, "{:e}", coarse.e_q - fine.e_q);
}

#[test]
fn constants_are_positive_across_dimensions_and_exponents() {
    for dim in 1..=3 {
        for p in [2.5, 3.0, 4.0] {
            let params = ModelParams::new(dim, p, 1.0).unwrap();
            let prof = solve_ground_state(&params, &RadialGridSpec::default_for(dim), TOL).unwrap();
            assert!(prof.e_q > 0.0 && prof.c1 > 0.0 && prof.g0 > 0.0 && prof.kappa > 0.0, "N={dim} p={p}");
        }
    }
}

#[test]
fn line_virial_identity() {
    // Multiply the profile equation by q and integrate over the line.
    let prof = line_profile(3.0);
    let h = prof.grid.h;
    let term = |f: &dyn Fn(usize) -> f64| 2.0 * simpson(&(0..prof.q.len()).map(f).collect::<Vec<_>>(), h);
    let grad = term(&|i| prof.dq[i] * prof.dq[i]);
    let mass = term(&|i| prof.q[i] * prof.q[i]);
    let pot = term(&|i| prof.q[i].powi(4));
    assert!((grad + mass - pot).abs() < 1e-9, "{:e}", grad + mass - pot);
}

#[test]
fn tail_stays_positive_and_below_half_rate_envelope() {
    for dim in [1, 3] {
        let params = ModelParams::new(dim, 3.0, 1.0).unwrap();
        let prof = solve_ground_state(&params, &RadialGridSpec::default_for(dim), TOL).unwrap();
        for i in 0..prof.q.len() {
            let r = prof.r(i);
            assert!(prof.q[i] > 0.0, "N={dim} r={r}");
            if r > 5.0 {
                assert!(prof.q[i] < prof.q0 * (-0.5 * r).exp(), "N={dim} r={r}");
            }
        }
    }
}

#[test]
fn decay_amplitude_consistent_near_the_edge() {
    for dim in [1, 2, 3] {
        let params = ModelParams::new(dim, 3.0, 1.0).unwrap();
        let prof = solve_ground_state(&params, &RadialGridSpec::default_for(dim), TOL).unwrap();
        let r = prof.grid.r_max - 2.0;
        let ratio = prof.eval(r) * r.powf(0.5 * (dim as f64 - 1.0)) * r.exp() / prof.kappa;
        assert!((ratio - 1.0).abs() <= 2.0 / prof.grid.r_max, "N={dim}: {ratio}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn line_peak_follows_closed_form(p in 2.2f64..6.0) {
        let prof = line_profile(p);
        prop_assert!((prof.q0 - closed_form(p, 0.0)).abs() < 1e-8);
        let x = 1.7;
        prop_assert!((prof.eval(x) - closed_form(p, x)).abs() < 1e-7);
    }
}
