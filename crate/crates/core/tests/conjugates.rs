//! Fenchel–Young, biconjugation and order reversal on closed-form
//! G-functions, each checked against an independent numerical conjugate.

use dualaction::gfunc::{young_identity_residual, ConjugateOptions, GFunction, PowerBlock};
use dualaction::linalg;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn family(kind: u8, p: f64, a: f64) -> GFunction {
    match kind % 4 {
        0 => GFunction::symplectic_power(p, 1).unwrap(),
        1 => GFunction::power_sum(vec![PowerBlock::new(p, a, 2).unwrap()]).unwrap(),
        2 => {
            let m = DMatrix::from_row_slice(2, 2, &[2.0, a, a, 1.0 + a * a]);
            GFunction::quadratic(m, 0.5).unwrap()
        }
        _ => {
            let inner = GFunction::power_sum(vec![
                PowerBlock::new(p, a, 1).unwrap(),
                PowerBlock::normalized(2.0, 1).unwrap(),
            ])
            .unwrap();
            let m = DMatrix::from_row_slice(2, 2, &[1.0, a, 0.0, 1.0]);
            GFunction::linear_image(inner, m).unwrap()
        }
    }
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0..4.0f64, 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn fenchel_young_inequality_and_equality(
        kind in 0u8..4, p in 1.3..5.0f64, a in 0.2..1.5f64, u in point(), v in point()
    ) {
        let g = family(kind, p, a);
        let gs = g.conjugate().unwrap();
        let gap = g.evaluate(&u).unwrap() + gs.evaluate(&v).unwrap() - linalg::dot(&u, &v);
        prop_assert!(gap >= -1e-10 * (1.0 + gap.abs()), "gap {gap}");
        let scale = 1.0 + g.evaluate(&u).unwrap();
        prop_assert!(young_identity_residual(&g, &gs, &u).unwrap() <= 1e-9 * scale);
    }

    #[test]
    fn conjugate_gradient_inverts_gradient(kind in 0u8..4, p in 1.3..5.0f64, a in 0.2..1.5f64, u in point()) {
        prop_assume!(linalg::norm(&u) > 1e-3);
        let g = family(kind, p, a);
        let back = g.conjugate().unwrap().gradient(&g.gradient(&u).unwrap()).unwrap();
        prop_assert!(linalg::norm(&linalg::sub(&back, &u)) <= 1e-8 * (1.0 + linalg::norm(&u)));
    }

    #[test]
    fn closed_form_matches_numerical_supremum(kind in 0u8..4, p in 1.3..5.0f64, a in 0.2..1.5f64, v in point()) {
        let g = family(kind, p, a);
        let closed = g.conjugate().unwrap().evaluate(&v).unwrap();
        let numeric = g.numerical_conjugate(ConjugateOptions::default()).evaluate(&v).unwrap();
        prop_assert!((closed - numeric).abs() <= 1e-7 * (1.0 + closed.abs()), "{closed} vs {numeric}");
    }

    #[test]
    fn biconjugate_returns_the_function(kind in 0u8..4, p in 1.3..5.0f64, a in 0.2..1.5f64, u in point()) {
        let g = family(kind, p, a);
        let gss = g.conjugate().unwrap().numerical_conjugate(ConjugateOptions::default());
        let (x, y) = (g.evaluate(&u).unwrap(), gss.evaluate(&u).unwrap());
        prop_assert!((x - y).abs() <= 1e-6 * (1.0 + x.abs()), "{x} vs {y}");
    }

    #[test]
    fn conjugation_reverses_order(p in 1.3..5.0f64, a in 0.2..1.0f64, k in 1.1..4.0f64, v in point()) {
        // G₁ = a|u|^p <= G₂ = ka|u|^p, so G₂* <= G₁*
        let g1 = GFunction::power_sum(vec![PowerBlock::new(p, a, 2).unwrap()]).unwrap();
        let g2 = GFunction::power_sum(vec![PowerBlock::new(p, k * a, 2).unwrap()]).unwrap();
        let opts = ConjugateOptions::default();
        let (s1, s2) = (
            g1.numerical_conjugate(opts).evaluate(&v).unwrap(),
            g2.numerical_conjugate(opts).evaluate(&v).unwrap(),
        );
        prop_assert!(s2 <= s1 + 1e-10 * (1.0 + s1.abs()), "{s2} > {s1}");
    }

    #[test]
    fn symplectic_pair_is_invariant_under_j(p in 1.3..5.0f64, u in point()) {
        let g = GFunction::symplectic_power(p, 1).unwrap();
        let ju = [u[1], -u[0]];
        let (x, y) = (g.conjugate().unwrap().evaluate(&ju).unwrap(), g.evaluate(&u).unwrap());
        prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y));
    }
}
