//! Numerical Legendre–Fenchel conjugation by damped Newton ascent.

use super::{ConvexFunction, GFunction};
use crate::error::{Error, Result};
use crate::linalg;
use nalgebra::DMatrix;

/// A twice-differentiable convex function, as seen by the conjugate solver.
pub trait Smooth {
    fn dim(&self) -> usize;
    fn value(&self, u: &[f64]) -> Result<f64>;
    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>>;
    fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateOptions {
    /// Stop once `|v - ∇F(u)| <= tol (1 + |v|)`.
    pub tol: f64,
    pub max_newton: usize,
    /// Iteration budget of the gradient-ascent fallback.
    pub max_ascent: usize,
    /// Accepted residual when progress stalls at rounding level.
    pub stall_tol: f64,
}

impl Default for ConjugateOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_newton: 100, max_ascent: 20_000, stall_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugatePoint {
    /// `F*(v)`.
    pub value: f64,
    /// The maximiser `u*`, which equals `∇F*(v)`.
    pub argmax: Vec<f64>,
    pub iterations: usize,
    /// Final residual `|v - ∇F(u*)|`.
    pub residual: f64,
}

/// Maximises `<u, v> - F(u)` over `u`.
///
/// Newton steps on the regularised Hessian with an Armijo backtrack; a step
/// is also accepted when it shrinks the residual, which keeps progress going
/// once the objective stops changing at rounding level. Falls back to
/// gradient ascent when Newton cannot make progress.
pub fn maximize_conjugate(
    f: &dyn Smooth,
    v: &[f64],
    warm: Option<&[f64]>,
    opts: &ConjugateOptions,
) -> Result<ConjugatePoint> {
    Error::check_dim(f.dim(), v.len())?;
    let vn = linalg::norm(v);
    let target = opts.tol * (1.0 + vn);
    let mut u = match warm {
        Some(w) if w.len() == v.len() && w.iter().all(|x| x.is_finite()) => w.to_vec(),
        // ∇F is monotone, so u = v is a sensible guess that also avoids the
        // singular Hessians power blocks have at the origin.
        _ => v.to_vec(),
    };
    let mut trace = Vec::new();
    let mut fu = f.value(&u)?;
    let mut r = linalg::sub(v, &f.gradient(&u)?);
    let mut rn = linalg::norm(&r);

    for it in 0..opts.max_newton {
        trace.push(rn);
        if rn <= target {
            return Ok(done(u, v, fu, it, rn));
        }
        let mut h = f.hessian(&u)?;
        for i in 0..h.nrows() {
            h[(i, i)] += 1e-10 * h[(i, i)].abs() + 1e-14;
        }
        let mut d = match linalg::solve(&h, &r) {
            Some(d) if linalg::dot(&r, &d) > 0.0 => d,
            _ => r.clone(),
        };
        // Cap absurd steps from a nearly singular Hessian.
        let dn = linalg::norm(&d);
        let cap = 1e3 * (1.0 + linalg::norm(&u) + vn);
        if dn > cap {
            d = linalg::scale(&d, cap / dn);
        }
        let phi0 = linalg::dot(&u, v) - fu;
        let slope = linalg::dot(&r, &d);
        let mut accepted = None;
        // The full step, when it improves both the objective and the residual.
        let un: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + b).collect();
        if let Some((fn_, rn_new)) = probe(f, v, &un) {
            if linalg::dot(&un, v) - fn_ >= phi0 + 1e-4 * slope && rn_new < rn {
                accepted = Some((un, fn_));
            }
        }
        // Otherwise the Newton model is off (curvature blowing up near a
        // power block's origin, say): maximise along d exactly.
        if accepted.is_none() {
            if let Some(alpha) = exact_line_search(f, v, &u, &d) {
                let un: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
                if let Some((fn_, rn_new)) = probe(f, v, &un) {
                    if linalg::dot(&un, v) - fn_ > phi0 || rn_new < rn * (1.0 - 1e-4) {
                        accepted = Some((un, fn_));
                    }
                }
            }
        }
        let mut alpha = 1.0;
        for _ in 0..if accepted.is_some() { 0 } else { 60 } {
            let un: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            if let Ok(fn_) = f.value(&un) {
                if fn_.is_finite() {
                    let phi = linalg::dot(&un, v) - fn_;
                    let rn_new = match f.gradient(&un) {
                        Ok(g) => linalg::norm(&linalg::sub(v, &g)),
                        Err(_) => f64::INFINITY,
                    };
                    if phi >= phi0 + 1e-4 * alpha * slope || rn_new < rn * (1.0 - 1e-4 * alpha) {
                        accepted = Some((un, fn_));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((un, fn_)) => {
                let moved = linalg::norm(&linalg::sub(&un, &u));
                u = un;
                fu = fn_;
                r = linalg::sub(v, &f.gradient(&u)?);
                rn = linalg::norm(&r);
                if moved <= 1e-15 * (1.0 + linalg::norm(&u)) {
                    break;
                }
            }
            None => break,
        }
    }
    if rn <= target {
        return Ok(done(u, v, fu, trace.len(), rn));
    }
    if rn <= opts.stall_tol * (1.0 + vn) {
        return Ok(done(u, v, fu, trace.len(), rn));
    }
    gradient_ascent(f, v, u, trace, opts)
}

/// `F(u)` and the residual `|v - ∇F(u)|`, if both are finite.
fn probe(f: &dyn Smooth, v: &[f64], u: &[f64]) -> Option<(f64, f64)> {
    let fu = f.value(u).ok().filter(|x| x.is_finite())?;
    let rn = linalg::norm(&linalg::sub(v, &f.gradient(u).ok()?));
    rn.is_finite().then_some((fu, rn))
}

/// Maximiser of the concave `α ↦ <u + αd, v> - F(u + αd)` for `α > 0`, by
/// bisection on its (monotone) derivative `<v - ∇F(u + αd), d>`.
fn exact_line_search(f: &dyn Smooth, v: &[f64], u: &[f64], d: &[f64]) -> Option<f64> {
    let slope_at = |alpha: f64| -> f64 {
        let un: Vec<f64> = u.iter().zip(d).map(|(a, b)| a + alpha * b).collect();
        match f.gradient(&un) {
            Ok(g) => linalg::dot(&linalg::sub(v, &g), d),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut doublings = 0;
    while slope_at(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        if slope_at(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo > 0.0 || hi > 0.0).then_some(0.5 * (lo + hi))
}

fn done(u: Vec<f64>, v: &[f64], fu: f64, iterations: usize, residual: f64) -> ConjugatePoint {
    ConjugatePoint { value: linalg::dot(&u, v) - fu, argmax: u, iterations, residual }
}

fn gradient_ascent(
    f: &dyn Smooth,
    v: &[f64],
    mut u: Vec<f64>,
    mut trace: Vec<f64>,
    opts: &ConjugateOptions,
) -> Result<ConjugatePoint> {
    let vn = linalg::norm(v);
    let target = opts.stall_tol * (1.0 + vn);
    let mut fu = f.value(&u)?;
    let mut step = 1.0;
    for it in 0..opts.max_ascent {
        let r = linalg::sub(v, &f.gradient(&u)?);
        let rn = linalg::norm(&r);
        if it % 100 == 0 {
            trace.push(rn);
        }
        if rn <= target {
            return Ok(done(u, v, fu, trace.len() + it, rn));
        }
        let phi0 = linalg::dot(&u, v) - fu;
        let mut ok = false;
        for _ in 0..60 {
            let un: Vec<f64> = u.iter().zip(&r).map(|(a, b)| a + step * b).collect();
            if let (Ok(fn_), Ok(gn)) = (f.value(&un), f.gradient(&un)) {
                let phi = linalg::dot(&un, v) - fn_;
                let rn_new = linalg::norm(&linalg::sub(v, &gn));
                if fn_.is_finite() && (phi >= phi0 + 1e-4 * step * rn * rn || rn_new < rn * (1.0 - 1e-4)) {
                    u = un;
                    fu = fn_;
                    ok = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !ok {
            break;
        }
        step *= 2.0;
    }
    Err(Error::ConjugateNonConvergence { point: v.to_vec(), trace })
}

/// The conjugate of a [`GFunction`] evaluated pointwise by inner
/// maximisation. Its gradient is the maximiser and its own conjugate is the
/// original function.
#[derive(Debug, Clone)]
pub struct NumericalConjugate {
    primal: GFunction,
    opts: ConjugateOptions,
}

impl NumericalConjugate {
    pub fn new(primal: GFunction, opts: ConjugateOptions) -> Self {
        Self { primal, opts }
    }

    pub fn solve(&self, v: &[f64]) -> Result<ConjugatePoint> {
        maximize_conjugate(&self.primal, v, None, &self.opts)
    }
}

impl ConvexFunction for NumericalConjugate {
    fn dim(&self) -> usize {
        self.primal.dim()
    }

    fn value(&self, v: &[f64]) -> Result<f64> {
        Ok(self.solve(v)?.value)
    }

    fn gradient(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve(v)?.argmax)
    }

    /// Inverse of the primal Hessian at the maximiser.
    fn hessian(&self, v: &[f64]) -> Result<DMatrix<f64>> {
        let u = self.solve(v)?.argmax;
        let h = self.primal.hessian(&u)?;
        let n = h.nrows();
        let delta = 1e-12 * (1.0 + h.abs().max());
        (h + DMatrix::identity(n, n) * delta)
            .try_inverse()
            .ok_or_else(|| Error::Unsupported("singular primal Hessian".into()))
    }

    fn conjugate(&self) -> Option<GFunction> {
        Some(self.primal.clone())
    }

    fn name(&self) -> String {
        format!("numerical_conjugate({})", self.primal.describe())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gfunc::PowerBlock;
    use approx::assert_abs_diff_eq;

    #[test]
    fn numeric_matches_closed_form_power() {
        let g = GFunction::symplectic_power(3.0, 1).unwrap();
        let closed = g.conjugate().unwrap();
        let numeric = g.numerical_conjugate(ConjugateOptions::default());
        for v in [[0.3, -2.0], [5.0, 0.01], [-1e-3, 40.0], [0.0, 0.0]] {
            let a = closed.evaluate(&v).unwrap();
            let b = numeric.evaluate(&v).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn numeric_argmax_is_conjugate_gradient() {
        let g = GFunction::power_sum(vec![PowerBlock::new(4.0, 0.7, 2).unwrap()]).unwrap();
        let closed = g.conjugate().unwrap();
        let nc = NumericalConjugate::new(g, ConjugateOptions::default());
        let v = [1.5, -0.4];
        let p = nc.solve(&v).unwrap();
        let grad = closed.gradient(&v).unwrap();
        for (a, b) in p.argmax.iter().zip(&grad) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn handles_sub_quadratic_blocks() {
        // p < 2 has an unbounded Hessian at the origin.
        let g = GFunction::power(1.5, 2).unwrap();
        let closed = g.conjugate().unwrap();
        let nc = NumericalConjugate::new(g, ConjugateOptions::default());
        let v = [0.2, 0.1];
        let a = closed.evaluate(&v).unwrap();
        let b = nc.value(&v).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
    }

    #[test]
    fn small_v_next_to_a_sub_quadratic_block() {
        // the maximiser's first coordinate is about 1e-5, where the p = 1.5
        // curvature makes full Newton steps overshoot through zero
        let g = GFunction::symplectic_power(1.5, 1).unwrap();
        let closed = g.conjugate().unwrap();
        let nc = NumericalConjugate::new(g, ConjugateOptions::default());
        let v = [-0.0034189643243718384, 0.011137208234929318];
        let p = nc.solve(&v).unwrap();
        assert!(p.residual <= 1e-12);
        assert_abs_diff_eq!(p.value, closed.evaluate(&v).unwrap(), epsilon = 1e-15);
    }
}
