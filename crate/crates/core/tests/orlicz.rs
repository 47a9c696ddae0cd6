//! Luxemburg norm, Hölder, Poincaré–Wirtinger and norm/modular bounds on
//! random band-limited trajectories.

use dualaction::gfunc::{GFunction, PowerBlock};
use dualaction::orlicz::{
    holder_check, luxemburg_norm, modular, norm_modular_bound, poincare_wirtinger_check, sobolev_norms,
};
use dualaction::Trajectory;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn g_for(kind: u8, p: f64) -> GFunction {
    match kind % 3 {
        0 => GFunction::symplectic_power(p, 1).unwrap(),
        1 => GFunction::half_square(2),
        _ => GFunction::power_sum(vec![PowerBlock::new(p, 0.7, 2).unwrap()]).unwrap(),
    }
}

fn random(seed: u64, period: f64, amp: f64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = Trajectory::random_band_limited(&mut rng, period, 64, 2, 6).unwrap();
    u.scale(amp).add_constant(&[0.3 * amp, -0.1 * amp])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unit_ball_boundary_has_unit_modular(kind in 0u8..3, p in 1.3..4.0f64, seed in 0u64..1000, amp in 0.01..50.0f64) {
        let g = g_for(kind, p);
        let u = random(seed, 1.0, amp);
        let n = luxemburg_norm(&g, &u).unwrap();
        let m = modular(&g, &u.scale(1.0 / n)).unwrap();
        prop_assert!((m - 1.0).abs() < 1e-8, "modular {m}");
    }

    #[test]
    fn norm_is_homogeneous_and_subadditive(
        kind in 0u8..3, p in 1.3..4.0f64, s1 in 0u64..1000, s2 in 0u64..1000, c in -5.0..5.0f64
    ) {
        prop_assume!(c.abs() > 1e-3);
        let g = g_for(kind, p);
        let (u, v) = (random(s1, 2.0, 1.0), random(s2 + 7919, 2.0, 3.0));
        let nu = luxemburg_norm(&g, &u).unwrap();
        let ncu = luxemburg_norm(&g, &u.scale(c)).unwrap();
        prop_assert!((ncu - c.abs() * nu).abs() <= 1e-8 * ncu);
        let nv = luxemburg_norm(&g, &v).unwrap();
        let nuv = luxemburg_norm(&g, &u.add(&v).unwrap()).unwrap();
        prop_assert!(nuv <= (nu + nv) * (1.0 + 1e-9));
    }

    #[test]
    fn holder_and_norm_modular_bounds(kind in 0u8..3, p in 1.3..4.0f64, s1 in 0u64..1000, amp in 0.01..50.0f64) {
        let g = g_for(kind, p);
        let gs = g.conjugate().unwrap();
        let u = random(s1, 1.0, amp);
        let v = random(s1 + 104_729, 1.0, 1.0 / amp);
        prop_assert!(holder_check(&g, &gs, &u, &v).unwrap().holds);
        prop_assert!(norm_modular_bound(&g, &u).unwrap().holds);
    }

    #[test]
    fn poincare_wirtinger_holds(kind in 0u8..3, p in 1.3..4.0f64, seed in 0u64..1000, period in 0.2..8.0f64, amp in 0.01..20.0f64) {
        let g = g_for(kind, p);
        let u = random(seed, period, amp);
        let rep = poincare_wirtinger_check(&g, &u).unwrap();
        prop_assert!(rep.holds, "{} > {}", rep.lhs, rep.rhs);
    }
}

#[test]
fn sobolev_norms_are_equivalent_on_a_sample() {
    // The two norms bound each other; record that their ratio stays in a
    // narrow band over very different amplitudes and means.
    let g = GFunction::symplectic_power(3.0, 1).unwrap();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for seed in 0..50 {
        let u = random(seed, 1.0, 10f64.powf(seed as f64 / 12.5 - 2.0));
        let (a, b) = sobolev_norms(&g, &u).unwrap();
        lo = lo.min(a / b);
        hi = hi.max(a / b);
    }
    assert!(lo > 0.1 && hi < 10.0, "ratio range [{lo}, {hi}]");
}

#[test]
fn csv_round_trip_recovers_period_and_values() {
    let u = random(3, 2.5, 1.7);
    let back = Trajectory::from_csv(&u.to_csv()).unwrap();
    assert_eq!(back.n(), u.n());
    assert!((back.period() - 2.5).abs() < 1e-12);
    assert_eq!(back.values(), u.values());
}
