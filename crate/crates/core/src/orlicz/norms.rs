//! Modulars, Luxemburg norms and the inequalities built on them.

use super::Trajectory;
use crate::error::{Error, Result};
use crate::gfunc::GFunction;
use crate::linalg;
use serde::{Deserialize, Serialize};

/// Default relative tolerance of [`luxemburg_norm`].
pub const LUXEMBURG_TOL: f64 = 1e-10;

/// `∫₀ᵀ G(u) dt` by the rectangle rule.
pub fn modular(g: &GFunction, u: &Trajectory) -> Result<f64> {
    Error::check_dim(g.dim(), u.dim())?;
    let mut s = 0.0;
    for row in u.rows() {
        s += g.evaluate(row)?;
    }
    Ok(u.weight() * s)
}

fn scaled_modular(g: &GFunction, u: &Trajectory, lambda: f64) -> Result<f64> {
    let inv = 1.0 / lambda;
    let mut s = 0.0;
    let mut buf = vec![0.0; u.dim()];
    for row in u.rows() {
        for (b, x) in buf.iter_mut().zip(row) {
            *b = x * inv;
        }
        s += g.evaluate(&buf)?;
    }
    Ok(u.weight() * s)
}

pub fn luxemburg_norm(g: &GFunction, u: &Trajectory) -> Result<f64> {
    luxemburg_norm_with_tol(g, u, LUXEMBURG_TOL)
}

/// `inf{λ > 0 : ∫ G(u/λ) dt <= 1}` by bisection on a bracket grown
/// geometrically from `λ = 1`.
pub fn luxemburg_norm_with_tol(g: &GFunction, u: &Trajectory, tol: f64) -> Result<f64> {
    Error::check_dim(g.dim(), u.dim())?;
    if u.values().iter().all(|x| *x == 0.0) {
        return Ok(0.0);
    }
    let mut trace = Vec::new();
    let (mut lo, mut hi) = (1.0_f64, 1.0_f64);
    let m1 = scaled_modular(g, u, 1.0)?;
    trace.push((1.0, m1));
    if m1 > 1.0 {
        loop {
            hi *= 2.0;
            let m = scaled_modular(g, u, hi)?;
            trace.push((hi, m));
            if m <= 1.0 {
                break;
            }
            if trace.len() > 2100 {
                return Err(Error::BracketFailure(format!("no upper bracket: {trace:?}")));
            }
        }
        lo = hi / 2.0;
    } else {
        loop {
            lo /= 2.0;
            let m = scaled_modular(g, u, lo)?;
            trace.push((lo, m));
            if m > 1.0 {
                break;
            }
            if trace.len() > 2100 {
                return Err(Error::BracketFailure(format!("no lower bracket: {trace:?}")));
            }
        }
        hi = lo * 2.0;
    }
    while hi - lo > tol * hi {
        let mid = 0.5 * (lo + hi);
        let m = scaled_modular(g, u, mid)?;
        if !m.is_finite() {
            return Err(Error::BracketFailure(format!("modular not finite at λ = {mid}")));
        }
        if m <= 1.0 {
            hi = mid;
            if m >= 1.0 - tol {
                break;
            }
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormModularReport {
    pub norm: f64,
    pub modular: f64,
    /// `modular + 1 - norm`; nonnegative when `‖u‖ <= ∫G(u) + 1` holds.
    pub upper_slack: f64,
    /// `modular - norm` when `‖u‖ > 1`, where `∫G(u) >= ‖u‖` should hold.
    pub lower_slack: Option<f64>,
    pub holds: bool,
}

pub fn norm_modular_bound(g: &GFunction, u: &Trajectory) -> Result<NormModularReport> {
    let norm = luxemburg_norm(g, u)?;
    let modular = modular(g, u)?;
    let tol = 1e-8 * (1.0 + norm);
    let upper_slack = modular + 1.0 - norm;
    let lower_slack = (norm > 1.0).then_some(modular - norm);
    let holds = upper_slack >= -tol && lower_slack.is_none_or(|s| s >= -tol);
    Ok(NormModularReport { norm, modular, upper_slack, lower_slack, holds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    /// `∫ <u, v> dt`.
    pub lhs: f64,
    /// `2 ‖u‖_G ‖v‖_{G*}`.
    pub rhs: f64,
    /// `lhs / rhs` (0 when both vanish).
    pub ratio: f64,
    pub holds: bool,
}

pub fn holder_check(
    g: &GFunction,
    g_star: &GFunction,
    u: &Trajectory,
    v: &Trajectory,
) -> Result<HolderReport> {
    let lhs = u.inner(v)?;
    let rhs = 2.0 * luxemburg_norm(g, u)? * luxemburg_norm(g_star, v)?;
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok(HolderReport { lhs, rhs, ratio, holds: lhs <= rhs * (1.0 + 1e-9) + 1e-14 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareWirtingerReport {
    /// `∫ G(ũ) dt`.
    pub lhs: f64,
    /// `∫ G(T u̇) dt`.
    pub rhs: f64,
    pub holds: bool,
}

pub fn poincare_wirtinger_check(g: &GFunction, u: &Trajectory) -> Result<PoincareWirtingerReport> {
    let lhs = modular(g, &u.tilde())?;
    let rhs = modular(g, &u.derivative().scale(u.period()))?;
    let tol = 1e-10 * (1.0 + rhs.abs());
    Ok(PoincareWirtingerReport { lhs, rhs, holds: lhs <= rhs + tol })
}

/// `|ū| + ‖u̇‖_G` and `‖u‖_G + ‖u̇‖_G`, the two equivalent norms whose ratio
/// the tests record.
pub fn sobolev_norms(g: &GFunction, u: &Trajectory) -> Result<(f64, f64)> {
    let du = luxemburg_norm(g, &u.derivative())?;
    Ok((linalg::norm(&u.mean()) + du, luxemburg_norm(g, u)? + du))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gfunc::PowerBlock;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn square() -> GFunction {
        GFunction::power_sum(vec![PowerBlock::new(2.0, 1.0, 1).unwrap()]).unwrap()
    }

    #[test]
    fn modular_examples() {
        let u = Trajectory::from_fn(2.0, 8, 2, |_| vec![1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(modular(&GFunction::half_square(2), &u).unwrap(), 1.0, epsilon = 1e-14);
        let z = Trajectory::zeros(1.0, 8, 2).unwrap();
        assert_eq!(modular(&GFunction::half_square(2), &z).unwrap(), 0.0);
    }

    #[test]
    fn modular_of_cubed_sine_matches_fine_quadrature() {
        let g = GFunction::power(3.0, 1).unwrap();
        let u = Trajectory::from_fn(1.0, 256, 1, |t| vec![(2.0 * PI * t).sin()]).unwrap();
        // oracle: midpoint rule on a much finer grid
        let m = 200_000;
        let fine: f64 =
            (0..m).map(|k| ((2.0 * PI * (k as f64 + 0.5) / m as f64).sin().abs()).powi(3) / 3.0).sum::<f64>()
                / m as f64;
        assert_abs_diff_eq!(modular(&g, &u).unwrap(), fine, epsilon = 1e-9);
        assert_abs_diff_eq!(fine, 4.0 / (9.0 * PI), epsilon = 1e-9);
    }

    #[test]
    fn luxemburg_of_constants() {
        let c = 3.7;
        let u = Trajectory::from_fn(1.0, 4, 1, |_| vec![c]).unwrap();
        assert_abs_diff_eq!(luxemburg_norm(&square(), &u).unwrap(), c, epsilon = 1e-9 * c);
        let u = Trajectory::from_fn(4.0, 4, 1, |_| vec![c]).unwrap();
        assert_abs_diff_eq!(luxemburg_norm(&square(), &u).unwrap(), 2.0 * c, epsilon = 1e-9 * c);
        let z = Trajectory::zeros(1.0, 4, 1).unwrap();
        assert_eq!(luxemburg_norm(&square(), &z).unwrap(), 0.0);
    }

    #[test]
    fn luxemburg_is_homogeneous() {
        let g = GFunction::symplectic_power(3.0, 1).unwrap();
        let u = Trajectory::from_fn(1.0, 32, 2, |t| vec![(2.0 * PI * t).sin() * 5.0, 0.1 + t]).unwrap();
        let a = luxemburg_norm(&g, &u).unwrap();
        let b = luxemburg_norm(&g, &u.scale(2.0)).unwrap();
        assert_abs_diff_eq!(b, 2.0 * a, epsilon = 1e-8 * a);
    }

    #[test]
    fn norm_at_unit_boundary_has_unit_modular() {
        let g = GFunction::power(3.0, 1).unwrap();
        let u = Trajectory::from_fn(1.0, 64, 1, |t| vec![(2.0 * PI * t).cos() + 0.3]).unwrap();
        let n = luxemburg_norm(&g, &u).unwrap();
        let rep = norm_modular_bound(&g, &u.scale(1.0 / n)).unwrap();
        assert_abs_diff_eq!(rep.modular, 1.0, epsilon = 1e-8);
        assert!(rep.holds);
    }

    #[test]
    fn poincare_wirtinger_circle() {
        let u = Trajectory::from_fn(1.0, 64, 2, |t| vec![(2.0 * PI * t).sin(), (2.0 * PI * t).cos()]).unwrap();
        let rep = poincare_wirtinger_check(&GFunction::half_square(2), &u).unwrap();
        assert_abs_diff_eq!(rep.lhs, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.rhs, 2.0 * PI * PI, epsilon = 1e-9);
        assert!(rep.holds);
        let c = Trajectory::from_fn(1.0, 8, 2, |_| vec![1.0, 2.0]).unwrap();
        let rep = poincare_wirtinger_check(&GFunction::half_square(2), &c).unwrap();
        assert!(rep.lhs.abs() < 1e-14 && rep.rhs.abs() < 1e-14 && rep.holds);
    }

    #[test]
    fn holder_for_half_square() {
        let g = GFunction::half_square(1);
        let u = Trajectory::from_fn(1.0, 64, 1, |t| vec![(2.0 * PI * t).sin() + 0.5]).unwrap();
        let v = Trajectory::from_fn(1.0, 64, 1, |t| vec![(2.0 * PI * t).cos() - t]).unwrap();
        let rep = holder_check(&g, &g, &u, &v).unwrap();
        // ‖·‖ for |x|²/2 is the L² norm divided by √2
        let l2 = |w: &Trajectory| w.inner(w).unwrap().sqrt();
        assert_abs_diff_eq!(rep.rhs, l2(&u) * l2(&v), epsilon = 1e-8);
        assert!(rep.lhs.abs() <= l2(&u) * l2(&v));
        assert!(rep.holds);
        let z = Trajectory::zeros(1.0, 8, 1).unwrap();
        let rep = holder_check(&g, &g, &z, &z).unwrap();
        assert_eq!((rep.lhs, rep.rhs), (0.0, 0.0));
    }
}
