//! Structural properties of the discrete dual action.

use dualaction::dual_action::registry::{quadratic_forced, tian_ge};
use dualaction::dual_action::{dual_modular, DualActionProblem, EpsilonSchedule, HypothesisPolicy};
use dualaction::{linalg, Trajectory};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn forced(n: usize) -> DualActionProblem {
    DualActionProblem::new(quadratic_forced(1.0, 1.0, 0.5, 1.5).unwrap(), 1.0, n).with_cg_star(1.0 / PI)
}

fn cubic(n: usize) -> DualActionProblem {
    DualActionProblem::new(tian_ge(3.0, 0.2, 0.5, &[0.1], 1).unwrap(), 1.0, n)
}

fn problem(kind: u8, n: usize) -> DualActionProblem {
    if kind % 2 == 0 {
        forced(n)
    } else {
        cubic(n)
    }
}

fn random_v(seed: u64, period: f64, n: usize, amp: f64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Trajectory::random_band_limited(&mut rng, period, n, 2, 4).unwrap().scale(amp)
}

/// `∫ ½<J u̇, u> + H(t, u) dt` on the grid.
fn hamiltonian_action(p: &DualActionProblem, u: &Trajectory) -> f64 {
    let h: f64 = (0..u.n()).map(|k| p.hamiltonian.value(u.time(k), u.row(k)).unwrap()).sum();
    0.5 * u.symplectic_action() + u.weight() * h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn constants_do_not_change_the_action(kind in 0u8..2, seed in 0u64..500, c1 in -3.0..3.0f64, c2 in -3.0..3.0f64) {
        let p = problem(kind, 32);
        let v = random_v(seed, 1.0, 32, 0.5);
        let a = p.dual_action_value(0.0, &v).unwrap();
        let b = p.dual_action_value(0.0, &v.add_constant(&[c1, c2])).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn larger_perturbation_lowers_the_action(kind in 0u8..2, seed in 0u64..500, e in 1e-3..0.3f64, amp in 0.05..2.0f64) {
        // H_ε grows with ε, so H_ε* and χ_ε decrease
        let p = problem(kind, 32);
        let v = random_v(seed, 1.0, 32, amp);
        let small = p.dual_action_value(0.5 * e, &v).unwrap();
        let large = p.dual_action_value(e, &v).unwrap();
        prop_assert!(large <= small + 1e-9 * (1.0 + small.abs()), "{large} > {small}");
    }

    #[test]
    fn coercivity_floor_holds(seed in 0u64..500, amp in 0.01..100.0f64, e in 0.0..0.5f64) {
        let p = forced(32);
        let (c_chi, b_chi) = p.coercivity_constants().unwrap();
        prop_assert!(c_chi > 0.0);
        let g_star = p.hamiltonian.growth().unwrap().g.conjugate().unwrap();
        let v = random_v(seed, 1.0, 32, amp);
        let chi = p.dual_action_value(e, &v).unwrap();
        let floor = c_chi * dual_modular(&g_star, &v).unwrap() - b_chi;
        prop_assert!(chi >= floor - 1e-9 * (1.0 + floor.abs()), "{chi} < {floor}");
    }
}

#[test]
fn dual_minimum_is_minus_the_hamiltonian_action() {
    for p in [forced(64), cubic(64)] {
        let p = p.with_schedule(EpsilonSchedule::Fixed { epsilon: 0.0 }).with_policy(HypothesisPolicy::Waive);
        let res = p.minimize(None).unwrap().orbit;
        let a = hamiltonian_action(&p, &res.u);
        assert!((res.chi_value + a).abs() < 1e-8 * (1.0 + a.abs()), "{} vs {}", res.chi_value, -a);
        // v̇ = ∇H(u) = -J u̇, so v = -J ũ
        let ut = res.u.tilde();
        for k in 0..ut.n() {
            let expect = linalg::scale(&linalg::apply_j(ut.row(k)), -1.0);
            assert!(linalg::norm(&linalg::sub(res.v.row(k), &expect)) < 1e-7);
        }
    }
}

#[test]
fn random_starts_reach_the_same_orbit() {
    let p = forced(32).with_schedule(EpsilonSchedule::Fixed { epsilon: 0.0 });
    let base = p.minimize(None).unwrap().orbit.u;
    for seed in 0..4 {
        let v0 = random_v(seed, 1.0, 32, 3.0);
        let u = p.minimize(Some(&v0)).unwrap().orbit.u;
        assert!(u.max_distance(&base).unwrap() < 1e-7);
    }
}
