use dampkg::groundstate::solve_ground_state;
use dampkg::quad::simpson;
use dampkg::radial::RadialGridSpec;
use dampkg::spectrum::{
    coercivity_check, kernel_residual, kernel_residual_sampled, mode_residual, solve_linearized_spectrum,
    CoercivityForms, Rates, SectorSample,
};
use dampkg::{ModelParams, Soliton};
use proptest::prelude::*;

fn cubic() -> Soliton {
    Soliton::compute(&ModelParams::cubic_1d()).unwrap()
}

#[test]
fn negative_eigenvalue_and_mode_match_poschl_teller() {
    let s = cubic();
    assert!((s.spectral.rates.nu0_sq - 3.0).abs() < 1e-6, "{}", s.spectral.rates.nu0_sq);
    let worst = (0..s.spectral.y.len())
        .map(|i| {
            let r = s.spectral.grid.r(i);
            (s.spectral.y[i] - 0.75f64.sqrt() / r.cosh().powi(2)).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-5, "{worst:e}");
}

#[test]
fn cubic_rates_at_unit_damping() {
    let s = cubic();
    let d = &s.spectral;
    let want = [1.0, -3.0, 3.0, -1.0, 0.25];
    let got = [d.nu_plus(), d.nu_minus(), d.zeta_plus(), d.zeta_minus(), d.beta()];
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() < 1e-6, "{got:?}");
    }
}

#[test]
fn eigenfunction_is_normalized() {
    let s = cubic();
    let d = &s.spectral;
    let sq: Vec<f64> = d.y.iter().map(|y| y * y).collect();
    let norm = 2.0 * simpson(&sq, d.grid.h);
    assert!((norm - 1.0).abs() < 1e-8, "{norm}");
    assert!(d.y[0] > 0.0);
}

#[test]
fn undamped_limit() {
    let r = Rates::new(3.0, 0.0);
    let nu0 = 3f64.sqrt();
    assert!((r.nu_plus - nu0).abs() < 1e-15 && (r.nu_minus + nu0).abs() < 1e-15);
    assert!((r.zeta_plus - nu0).abs() < 1e-15 && (r.zeta_minus + nu0).abs() < 1e-15);
}

#[test]
fn translation_mode_is_in_the_kernel() {
    let s = cubic();
    let k = kernel_residual(&s.profile);
    assert!(k.residual < 1e-5, "{k:?}");
    assert!(k.within_truncation(), "{k:?}");

    let params = ModelParams::new(3, 3.0, 1.0).unwrap();
    let prof = solve_ground_state(&params, &RadialGridSpec::default_for(3), 1e-14).unwrap();
    let k3 = kernel_residual(&prof);
    assert!(k3.residual < 1e-4, "{k3:?}");
}

#[test]
fn kernel_residual_is_fourth_order() {
    // Closed-form samples isolate the stencil error from the profile error.
    let params = ModelParams::cubic_1d();
    let residual = |h: f64| {
        let grid = RadialGridSpec::new(20.0, h).unwrap();
        let q: Vec<f64> = (0..grid.nodes()).map(|i| 2f64.sqrt() / grid.r(i).cosh()).collect();
        let dq: Vec<f64> =
            (0..grid.nodes()).map(|i| -(2f64.sqrt()) * grid.r(i).tanh() / grid.r(i).cosh()).collect();
        kernel_residual_sampled(&params, &grid, &q, &dq).residual
    };
    let ratio = residual(0.04) / residual(0.02);
    assert!((12.0..20.0).contains(&ratio), "{ratio}");
}

#[test]
fn richardson_eigenvalue_converges() {
    let s = cubic();
    let at = |h: f64| {
        solve_linearized_spectrum(&s.profile, &RadialGridSpec::new(30.0, h).unwrap()).unwrap().rates.nu0_sq
    };
    let v = [at(0.04), at(0.02), at(0.01)];
    let d1 = (v[0] - v[1]).abs();
    let d2 = (v[1] - v[2]).abs();
    assert!(d1 >= 8.0 * d2, "{v:?}");
}

#[test]
fn exponential_modes_solve_the_linearized_flow() {
    let s = cubic();
    for plus in [true, false] {
        let res = mode_residual(&s.profile, &s.spectral, plus);
        assert!(res < 1e-4, "plus={plus}: {res:e}");
    }
}

#[test]
fn linearized_operator_is_coercive_off_the_special_directions() {
    let s = cubic();
    let report = coercivity_check(&s.profile, &s.spectral, 16, 3).unwrap();
    assert!(report.lambda_perp > 0.0 && report.c_min > 0.0, "{report:?}");
    assert!(report.worst_slack >= -1e-12, "{report:?}");
}

#[test]
fn quadratic_form_on_the_negative_direction_and_the_kernel() {
    let s = cubic();
    let forms = CoercivityForms::new(&s.profile, &s.spectral);
    let y = SectorSample { even: forms.sample(0, |r| s.spectral.eval(r)), odd: forms.sample(1, |_| 0.0) };
    let (lin, h1, py, _) = forms.evaluate(&y);
    assert!((lin + 3.0).abs() < 1e-3, "{lin}");
    assert!((py - 1.0).abs() < 1e-3, "{py}");
    // The deficit along Y is paid for by a finite multiple of <ε,Y>².
    let report = coercivity_check(&s.profile, &s.spectral, 16, 3).unwrap();
    let needed = (report.c_min * h1 - lin) / (py * py);
    assert!(needed.is_finite() && needed > 0.0 && needed < 10.0, "{needed}");

    let dq = SectorSample {
        even: forms.sample(0, |_| 0.0),
        odd: forms.sample(1, |r| s.profile.function().eval3(r).1),
    };
    let (lin, h1, _, _) = forms.evaluate(&dq);
    assert!(lin.abs() < 1e-4 * h1, "{lin:e}");
}

proptest! {
    #[test]
    fn rate_identities_hold(nu0_sq in 0.1f64..20.0, alpha in 0.0f64..5.0) {
        let r = Rates::new(nu0_sq, alpha);
        let tol = 1e-12 * (1.0 + nu0_sq + alpha * alpha);
        prop_assert!((r.nu_plus + r.nu_minus + 2.0 * alpha).abs() < tol);
        prop_assert!((r.nu_plus * r.nu_minus + nu0_sq).abs() < tol);
        prop_assert!((r.zeta_plus - r.nu_plus - 2.0 * alpha).abs() < tol);
        prop_assert!((r.zeta_minus - r.nu_minus - 2.0 * alpha).abs() < tol);
        prop_assert!((r.nu_plus * r.zeta_plus - nu0_sq).abs() < tol);
        prop_assert!((r.nu_minus * r.zeta_minus - nu0_sq).abs() < tol);
        prop_assert!((r.beta * (r.zeta_plus - r.zeta_minus) - 1.0).abs() < 1e-12);
        prop_assert!(r.nu_plus > 0.0 && r.nu_minus < 0.0);
    }
}
