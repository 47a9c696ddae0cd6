//! Closed forms, the canonical lower bound and agreement between the
//! estimation routes for C_G.

use dualaction::cg_constant::{
    cg_closed_form, estimate_cg_ratio, flow_characterization, gamma_sweep, lower_bound_slack, orbit_ratio,
    period_formula, period_formula_beta, power_orbit_start, simonenko_sandwich, ConstrainedOptions, FlowOptions,
    RatioOptions,
};
use dualaction::{GFunction, Trajectory};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn period_formulas_agree_and_are_symmetric(p in 1.05..12.0f64) {
        let (a, b) = (period_formula(p).unwrap(), period_formula_beta(p).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a);
        let q = p / (p - 1.0);
        prop_assert!((period_formula(q).unwrap() - a).abs() <= 1e-12 * a);
        prop_assert!((cg_closed_form(p).unwrap() * a - 2.0).abs() <= 1e-13);
    }

    #[test]
    fn canonical_bound_holds_for_symplectic_powers(
        p in 1.3..5.0f64, seed in 0u64..10_000, period in 0.1..10.0f64, amp in -2.0..2.0f64
    ) {
        let g = GFunction::symplectic_power(p, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = Trajectory::random_band_limited(&mut rng, period, 64, 2, 8).unwrap().scale(10f64.powf(amp));
        let (slack, _) = lower_bound_slack(&g, &u, 2.0 / period, 0.0).unwrap();
        prop_assert!(slack >= -1e-10 * (1.0 + u.symplectic_action().abs()), "slack {slack}");
    }

    #[test]
    fn sharp_constant_is_never_beaten(p in 1.4..4.0f64, seed in 0u64..10_000) {
        // the sharp constant C_G(T) = C_G(1)/T also bounds every trajectory
        let g = GFunction::symplectic_power(p, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = Trajectory::random_band_limited(&mut rng, 1.0, 128, 2, 4).unwrap();
        let (slack, _) = lower_bound_slack(&g, &u, cg_closed_form(p).unwrap(), 0.0).unwrap();
        prop_assert!(slack >= -1e-9 * (1.0 + u.symplectic_action().abs()), "slack {slack}");
    }
}

#[test]
fn flow_orbits_certify_the_closed_form() {
    for p in [1.5, 2.0, 3.0] {
        let g = GFunction::symplectic_power(p, 1).unwrap();
        let r = flow_characterization(&g, &power_orbit_start(p).unwrap(), &FlowOptions::default()).unwrap();
        let cg = cg_closed_form(p).unwrap();
        assert!((r.ratio - cg).abs() < 1e-3 * cg, "p={p}: {} vs {cg}", r.ratio);
        assert!((orbit_ratio(&g, &r.orbit.u).unwrap() - r.ratio).abs() < 1e-14);
        // rescaled to period 1 the orbit attains the canonical quotient -C_G
        let t = r.orbit.period;
        let unit = Trajectory::new(1.0, r.orbit.u.n(), 2, r.orbit.u.scale(1.0 / t).into_values()).unwrap();
        let (_, quotient) = lower_bound_slack(&g, &unit, 0.0, 0.0).unwrap();
        assert!((quotient + cg).abs() < 1e-3 * cg, "p={p}: {quotient}");
    }
}

#[test]
fn ratio_and_sweep_routes_agree() {
    let g = GFunction::symplectic_power(3.0, 1).unwrap();
    let ratio = estimate_cg_ratio(&g, 1.0, &RatioOptions { n: 128, restarts: 2, ..Default::default() }).unwrap();
    let (sweep, sols) = gamma_sweep(&g, &[0.5, 1.0, 2.0], 1.0, &ConstrainedOptions { n: 128, ..Default::default() }).unwrap();
    assert!((ratio.value - sweep.value).abs() < 1e-3 * ratio.value, "{} vs {}", ratio.value, sweep.value);
    // A(γ)/γ does not depend on the level for a homogeneous pair
    let first = sols[0].a_gamma / sols[0].gamma;
    for s in &sols {
        assert!((s.a_gamma / s.gamma - first).abs() < 1e-4 * first.abs());
        assert!(s.lambda < 0.0);
    }
}

#[test]
fn sandwich_is_tight_for_the_quadratic_case() {
    let g = GFunction::half_square(2);
    let r = flow_characterization(&g, &[1.0, 0.0], &FlowOptions::default()).unwrap();
    assert!((r.orbit.period - 2.0 * PI).abs() < 1e-5);
    let s = simonenko_sandwich(&g, &[r.orbit], Some(1.0 / PI)).unwrap();
    assert!((s.lower - 1.0 / PI).abs() < 1e-3 && (s.upper - 1.0 / PI).abs() < 1e-3);
    assert_eq!(s.contains_estimate, Some(true));
}

#[test]
fn non_symplectic_input_is_rejected() {
    // |u₁|³/3 + |u₂|³/3 is not symplectic
    let g = GFunction::power(3.0, 2).unwrap();
    assert!(estimate_cg_ratio(&g, 1.0, &RatioOptions { n: 32, restarts: 1, ..Default::default() }).is_err());
}
