use dampkg::field1d::{build_initial_data, energy, Grid1D, InitialDataSpec};
use dampkg::interactions::{
    energy_expansion, interaction_g, overlap_integrals, project_g, GTable, InteractionError, SolitonPair,
};
use dampkg::quad::simpson;
use dampkg::{ModelParams, Soliton};
use proptest::prelude::*;
use std::sync::OnceLock;

fn cubic() -> &'static Soliton {
    static S: OnceLock<Soliton> = OnceLock::new();
    S.get_or_init(|| Soliton::compute(&ModelParams::cubic_1d()).unwrap())
}

fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

/// Simpson on `[a, b]` with about `h` spacing.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, h: f64) -> f64 {
    let n = 2 * ((b - a) / h / 2.0).round() as usize;
    let step = (b - a) / n as f64;
    let v: Vec<f64> = (0..=n).map(|i| f(a + i as f64 * step)).collect();
    simpson(&v, step)
}

#[test]
fn interaction_at_ten_matches_fine_closed_form_quadrature() {
    let s = cubic();
    let q = |x: f64| 2f64.sqrt() * sech(x);
    let dq = |x: f64| -(2f64.sqrt()) * sech(x) * x.tanh();
    let oracle = integrate(|y| 3.0 * q(y).powi(2) * dq(y) * q(y + 10.0), -25.0, 25.0, s.profile.grid.h / 10.0)
        / (4.0 / 3.0);
    let g = interaction_g(&s.profile, 10.0).unwrap();
    assert!(((g - oracle) / oracle).abs() < 1e-8, "{g} vs {oracle}");
}

#[test]
fn interaction_approaches_its_asymptotic_form() {
    let s = cubic();
    let p = &s.profile;
    for r in [8.0, 10.0, 12.0, 14.0, 16.0] {
        let g = interaction_g(p, r).unwrap();
        let asym = p.g0 * p.eval(r);
        assert!(g > 0.0);
        assert!((g - asym).abs() <= 5.0 * p.eval(r) / r, "r = {r}");
    }
}

#[test]
fn interaction_domain_checks() {
    let p = &cubic().profile;
    assert!(matches!(interaction_g(p, 1.0), Err(InteractionError::TooClose(_))));
    assert!(matches!(interaction_g(p, 26.0), Err(InteractionError::DomainTooSmall { .. })));
}

#[test]
fn table_reproduces_direct_evaluation() {
    let p = &cubic().profile;
    let table = GTable::build(p, 0.05).unwrap();
    // Cubic interpolation of ln g is least accurate where g bends most.
    for (r, tol) in [(3.33, 1e-6), (4.07, 1e-6), (8.01, 1e-9), (12.5, 1e-9), (19.97, 1e-9)] {
        let direct = interaction_g(p, r).unwrap();
        assert!(((table.eval(r) - direct) / direct).abs() < tol, "r = {r}");
    }
}

#[test]
fn planar_interaction_is_positive_and_near_its_asymptotic_form() {
    let params = ModelParams::new(2, 3.0, 1.0).unwrap();
    let s = Soliton::compute(&params).unwrap();
    let p = &s.profile;
    for r in [8.0, 12.0] {
        let g = interaction_g(p, r).unwrap();
        let asym = p.g0 * p.eval(r);
        assert!(g > 0.0 && ((g - asym) / asym).abs() < 5.0 / r, "r = {r}: {g} vs {asym}");
    }
}

#[test]
fn projection_on_first_translation_mode_matches_interaction() {
    let s = cubic();
    let pair = SolitonPair::line([1.0, -1.0], 6.0, -6.0).unwrap();
    let (p1, _) = project_g(&pair, &s.profile, 0.01).unwrap();
    let g = interaction_g(&s.profile, 12.0).unwrap();
    let c1g = s.profile.c1 * g;
    assert!(((p1 + c1g) / c1g).abs() <= 1e-2, "{p1} vs {}", -c1g);
}

#[test]
fn projections_under_mirror_and_relabelling() {
    let p = &cubic().profile;
    let pair = SolitonPair::line([1.0, -1.0], 5.0, -4.0).unwrap();
    let (a1, a2) = project_g(&pair, p, 0.01).unwrap();
    let mirror = SolitonPair::line([1.0, -1.0], -5.0, 4.0).unwrap();
    let (m1, m2) = project_g(&mirror, p, 0.01).unwrap();
    assert!((m1 + a1).abs() < 1e-12 * a1.abs() && (m2 + a2).abs() < 1e-12 * a2.abs());
    // G is a cancellation of O(1) terms, so relabelling changes it at round-off.
    let (s1, s2) = project_g(&pair.swapped(), p, 0.01).unwrap();
    assert!((s1 - a2).abs() < 1e-9 * a2.abs() && (s2 - a1).abs() < 1e-9 * a1.abs());
}

#[test]
fn projection_correction_decays_faster_than_the_interaction() {
    let p = &cubic().profile;
    for sigma in [-1.0, 1.0] {
        let mut scaled = Vec::new();
        for d in [8.0, 10.0, 12.0, 14.0] {
            // Off-centre on purpose: only relative positions matter.
            let pair = SolitonPair::line([1.0, sigma], 0.5 * d + 0.3, -0.5 * d + 0.3).unwrap();
            let (a, b) = project_g(&pair, p, 0.01).unwrap();
            let g = interaction_g(p, d).unwrap();
            scaled.push((a - sigma * p.c1 * g).abs() * (1.5 * d).exp());
            // On the line the two projections cancel by reflection symmetry.
            assert!((a + b).abs() <= 1e-12 * a.abs(), "d = {d}");
        }
        assert!(scaled.windows(2).all(|w| w[1] < w[0]) && scaled[0] < 30.0, "{scaled:?}");
    }
}

#[test]
fn interaction_norm_decays_like_the_tail() {
    let p = &cubic().profile;
    let norm = |d: f64| {
        let pair = SolitonPair::line([1.0, -1.0], 0.5 * d, -0.5 * d).unwrap();
        overlap_integrals(&pair, p, 1.0, 0.5, 0.01).unwrap().norm_g
    };
    let ratio = norm(16.0) / norm(8.0);
    let expected = p.eval(16.0) / p.eval(8.0);
    assert!((ratio / expected - 1.0).abs() < 0.2, "{ratio} vs {expected}");
    let ds = [8.0, 10.0, 12.0, 14.0, 16.0];
    let logs: Vec<f64> = ds.iter().map(|&d| norm(d).ln()).collect();
    let mean_d = ds.iter().sum::<f64>() / 5.0;
    let mean_l = logs.iter().sum::<f64>() / 5.0;
    let slope = ds.iter().zip(&logs).map(|(d, l)| (d - mean_d) * (l - mean_l)).sum::<f64>()
        / ds.iter().map(|d| (d - mean_d).powi(2)).sum::<f64>();
    assert!((slope + 1.0).abs() <= 0.05, "{slope}");
}

#[test]
fn overlap_matches_fine_closed_form_quadrature() {
    let p = &cubic().profile;
    let pair = SolitonPair::line([1.0, 1.0], 5.0, -5.0).unwrap();
    let report = overlap_integrals(&pair, p, 1.0, 0.5, 0.01).unwrap();
    let q = |x: f64| 2f64.sqrt() * sech(x);
    let oracle = integrate(|x| (q(x - 5.0) * q(x + 5.0)).abs(), -25.0, 25.0, 0.001);
    assert!((report.product - oracle).abs() < 1e-8, "{} vs {oracle}", report.product);
    assert!(matches!(overlap_integrals(&pair, p, 3.0, 0.5, 0.01), Err(InteractionError::BadExponent { .. })));
}

#[test]
fn coincident_pair_is_rejected() {
    assert!(matches!(SolitonPair::line([1.0, 1.0], 2.0, 2.0), Err(InteractionError::DegeneratePair)));
}

#[test]
fn pair_energy_expansion() {
    let s = cubic();
    let p = &s.profile;
    let two_e = 2.0 * p.e_q;
    let opposite = SolitonPair::line([1.0, -1.0], 5.0, -5.0).unwrap();
    assert!(energy_expansion(&opposite, p, 0.0).prediction > two_e);

    // Field energy of the sampled same-sign pair at rest.
    let grid = Grid1D::symmetric(30.0, 0.01).unwrap();
    let spec = InitialDataSpec::PlainPair { sigma: [1.0, 1.0], z: [5.0, -5.0], ell: [0.0; 2], perturbation: None };
    let state = build_initial_data(&spec, s, &grid).unwrap();
    let measured = energy(&state, &s.params) - two_e;
    let predicted = -p.c1 * p.g0 * p.eval(10.0);
    assert!(((measured - predicted) / predicted).abs() < 0.1, "{measured} vs {predicted}");
    let same = SolitonPair::line([1.0, 1.0], 5.0, -5.0).unwrap();
    assert!((energy_expansion(&same, p, 0.0).prediction - two_e - predicted).abs() < 1e-15);

    let far = SolitonPair::line([1.0, -1.0], 12.5, -12.5).unwrap();
    assert!((energy_expansion(&far, p, 0.0).prediction - 8.0 / 3.0).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn interaction_bound_over_the_window(r in 8.0f64..16.0) {
        let p = &cubic().profile;
        let g = interaction_g(p, r).unwrap();
        prop_assert!(g > 0.0);
        prop_assert!((g - p.g0 * p.eval(r)).abs() * r <= 5.0 * p.eval(r));
    }

    #[test]
    fn relabelling_exchanges_projections(z1 in 3.0f64..8.0, z2 in -8.0f64..-3.0, s in prop::bool::ANY) {
        let p = &cubic().profile;
        let sigma = if s { [1.0, -1.0] } else { [1.0, 1.0] };
        let pair = SolitonPair::line(sigma, z1, z2).unwrap();
        let (a1, a2) = project_g(&pair, p, 0.02).unwrap();
        let (b1, b2) = project_g(&pair.swapped(), p, 0.02).unwrap();
        prop_assert!((a1 - b2).abs() <= 1e-9 * a1.abs());
        prop_assert!((a2 - b1).abs() <= 1e-9 * a2.abs());
    }
}
