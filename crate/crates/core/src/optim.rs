//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! The objective chooses the inner product its gradient is a Riesz
//! representative for, and may supply a preconditioner used as the initial
//! inverse-Hessian approximation. Both matter for discretised functionals,
//! where the Euclidean metric on samples scales badly with the grid size.

use crate::error::Result;
use crate::linalg;
use std::collections::VecDeque;

pub trait Objective {
    /// Value and gradient at `x`.
    fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        linalg::dot(a, b)
    }

    /// Self-adjoint positive approximation of the inverse Hessian.
    fn precondition(&self, g: &[f64]) -> Vec<f64> {
        g.to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    /// Stop once the gradient norm in the objective's metric drops below.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search: usize,
    /// Stop with [`Status::Stalled`] once `|Δf| <= f_tol (1 + |f|)` for
    /// `STALL_WINDOW` consecutive steps. Zero disables the test.
    pub f_tol: f64,
}

const STALL_WINDOW: usize = 10;

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self { memory: 12, grad_tol: 1e-9, max_iter: 2000, c1: 1e-4, c2: 0.9, max_line_search: 40, f_tol: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIterations,
    LineSearchFailed,
    /// The value stopped moving before the gradient test was met.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: Status,
}

struct Counter<'a> {
    obj: &'a dyn Objective,
    evals: usize,
}

impl Counter<'_> {
    /// Evaluation errors are reported as an infinite value, which the line
    /// search treats as "step too long".
    fn eval(&mut self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        self.evals += 1;
        match self.obj.eval(x) {
            Ok((f, g)) if f.is_finite() && g.iter().all(|v| v.is_finite()) => Some((f, g)),
            _ => None,
        }
    }
}

pub fn minimize(obj: &dyn Objective, x0: &[f64], opts: &LbfgsOptions) -> Result<Outcome> {
    let mut x = x0.to_vec();
    let (mut f, mut g) = obj.eval(&x)?;
    let mut counter = Counter { obj, evals: 1 };
    let mut gn = obj.inner(&g, &g).sqrt();
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut status = Status::MaxIterations;
    let mut iterations = 0;
    let mut just_restarted = false;
    let mut flat = 0;

    while iterations < opts.max_iter {
        if gn <= opts.grad_tol {
            status = Status::Converged;
            break;
        }
        iterations += 1;
        let mut d = direction(obj, &g, &mem);
        let mut slope = obj.inner(&g, &d);
        if !(slope < 0.0) {
            mem.clear();
            d = obj.precondition(&g);
            d.iter_mut().for_each(|v| *v = -*v);
            slope = obj.inner(&g, &d);
            if !(slope < 0.0) {
                status = Status::LineSearchFailed;
                break;
            }
        }
        match line_search(&mut counter, &x, f, slope, &d, opts) {
            Some((alpha, fx, gx)) => {
                let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
                let s = linalg::scale(&d, alpha);
                let y = linalg::sub(&gx, &g);
                let sy = obj.inner(&s, &y);
                if sy > 1e-16 * obj.inner(&s, &s).sqrt() * obj.inner(&y, &y).sqrt() && sy > 0.0 {
                    if mem.len() == opts.memory {
                        mem.pop_front();
                    }
                    mem.push_back((s, y, 1.0 / sy));
                }
                x = xn;
                if (f - fx).abs() <= opts.f_tol * (1.0 + fx.abs()) {
                    flat += 1;
                } else {
                    flat = 0;
                }
                f = fx;
                g = gx;
                gn = obj.inner(&g, &g).sqrt();
                just_restarted = false;
                if opts.f_tol > 0.0 && flat >= STALL_WINDOW {
                    status = if gn <= opts.grad_tol { Status::Converged } else { Status::Stalled };
                    break;
                }
            }
            None => {
                if just_restarted || mem.is_empty() {
                    status = Status::LineSearchFailed;
                    break;
                }
                log::debug!("line search failed at iteration {iterations}; clearing memory");
                mem.clear();
                just_restarted = true;
            }
        }
    }
    if status == Status::MaxIterations && gn <= opts.grad_tol {
        status = Status::Converged;
    }
    Ok(Outcome { x, value: f, grad: g, grad_norm: gn, iterations, evaluations: counter.evals, status })
}

/// Two-loop recursion with `H₀ = γ P`.
fn direction(obj: &dyn Objective, g: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * obj.inner(s, &q);
        linalg::axpy(-a, y, &mut q);
        alphas.push(a);
    }
    let mut r = obj.precondition(&q);
    if let Some((s, y, _)) = mem.back() {
        let py = obj.precondition(y);
        let yhy = obj.inner(y, &py);
        if yhy > 0.0 {
            let gamma = obj.inner(s, y) / yhy;
            r.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
        let b = rho * obj.inner(y, &r);
        linalg::axpy(a - b, s, &mut r);
    }
    r.iter_mut().for_each(|v| *v = -*v);
    r
}

/// Strong-Wolfe bracketing and zoom.
///
/// Near a minimiser the value differences drop below rounding error, so a
/// step is also accepted under the approximate Wolfe test: the value did not
/// rise beyond noise level and the slope satisfies
/// `c2·φ'(0) <= φ'(α) <= (1 - 2c1)·|φ'(0)|`.
fn line_search(
    c: &mut Counter<'_>,
    x: &[f64],
    f0: f64,
    slope0: f64,
    d: &[f64],
    opts: &LbfgsOptions,
) -> Option<(f64, f64, Vec<f64>)> {
    let ls = Search { x, d, f0, slope0, opts, noise: 1e-11 * f0.abs().max(1e-300) };
    let mut a_prev = 0.0;
    let mut f_prev = f0;
    let mut s_prev = slope0;
    let mut a = 1.0;
    for i in 0..opts.max_line_search {
        let Some((fa, sa, ga)) = ls.at(c, a) else {
            return ls.zoom(c, a_prev, f_prev, s_prev, a, f64::INFINITY);
        };
        if ls.accept(a, fa, sa) {
            return Some((a, fa, ga));
        }
        if !ls.armijo(a, fa) || (i > 0 && fa >= f_prev) {
            return ls.zoom(c, a_prev, f_prev, s_prev, a, fa);
        }
        if sa >= 0.0 {
            return ls.zoom(c, a, fa, sa, a_prev, f_prev);
        }
        a_prev = a;
        f_prev = fa;
        s_prev = sa;
        a *= 2.5;
    }
    None
}

struct Search<'a> {
    x: &'a [f64],
    d: &'a [f64],
    f0: f64,
    slope0: f64,
    opts: &'a LbfgsOptions,
    noise: f64,
}

impl Search<'_> {
    fn at(&self, c: &mut Counter<'_>, a: f64) -> Option<(f64, f64, Vec<f64>)> {
        let xa: Vec<f64> = self.x.iter().zip(self.d).map(|(xi, di)| xi + a * di).collect();
        c.eval(&xa).map(|(f, g)| {
            let s = c.obj.inner(&g, self.d);
            (f, s, g)
        })
    }

    fn armijo(&self, a: f64, f: f64) -> bool {
        f <= self.f0 + self.opts.c1 * a * self.slope0
    }

    fn accept(&self, a: f64, f: f64, s: f64) -> bool {
        let curvature = s.abs() <= -self.opts.c2 * self.slope0;
        let approx = f <= self.f0 + self.noise
            && s >= self.opts.c2 * self.slope0
            && s <= -(1.0 - 2.0 * self.opts.c1) * self.slope0;
        (self.armijo(a, f) && curvature) || approx
    }

    fn zoom(
        &self,
        c: &mut Counter<'_>,
        mut lo: f64,
        mut f_lo: f64,
        mut s_lo: f64,
        mut hi: f64,
        mut f_hi: f64,
    ) -> Option<(f64, f64, Vec<f64>)> {
        let mut best: Option<(f64, f64, Vec<f64>)> = None;
        for _ in 0..self.opts.max_line_search {
            let width = (hi - lo).abs();
            // quadratic interpolation from (lo, f_lo, s_lo) and (hi, f_hi), safeguarded
            let mut a = if f_hi.is_finite() {
                let denom = 2.0 * (f_hi - f_lo - s_lo * (hi - lo));
                if denom.abs() > 0.0 {
                    lo - s_lo * (hi - lo) * (hi - lo) / denom
                } else {
                    0.5 * (lo + hi)
                }
            } else {
                lo + 0.1 * (hi - lo)
            };
            let (min, max) = (lo.min(hi), lo.max(hi));
            if !(a > min + 0.1 * width && a < max - 0.1 * width) {
                a = 0.5 * (lo + hi);
            }
            let Some((fa, sa, ga)) = self.at(c, a) else {
                hi = a;
                f_hi = f64::INFINITY;
                continue;
            };
            if self.accept(a, fa, sa) {
                return Some((a, fa, ga));
            }
            if !self.armijo(a, fa) || fa >= f_lo {
                hi = a;
                f_hi = fa;
            } else {
                if sa * (hi - lo) >= 0.0 {
                    hi = lo;
                    f_hi = f_lo;
                }
                lo = a;
                f_lo = fa;
                s_lo = sa;
                best = Some((a, fa, ga));
            }
            if width < 1e-16 * lo.abs().max(1e-300) {
                break;
            }
        }
        // Accept a sufficient-decrease point even without the curvature condition.
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;
    impl Objective for Rosenbrock {
        fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Ok((f, g))
        }
    }

    #[test]
    fn minimizes_rosenbrock() {
        let out = minimize(&Rosenbrock, &[-1.2, 1.0], &LbfgsOptions::default()).unwrap();
        assert_eq!(out.status, Status::Converged);
        assert!((out.x[0] - 1.0).abs() < 1e-8 && (out.x[1] - 1.0).abs() < 1e-8);
    }

    struct Quadratic(Vec<f64>);
    impl Objective for Quadratic {
        fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
            let g: Vec<f64> = x.iter().zip(&self.0).map(|(xi, c)| c * xi).collect();
            Ok((0.5 * linalg::dot(x, &g), g))
        }
        fn precondition(&self, g: &[f64]) -> Vec<f64> {
            g.iter().zip(&self.0).map(|(gi, c)| gi / c).collect()
        }
    }

    #[test]
    fn exact_preconditioner_converges_in_one_step() {
        let q = Quadratic((1..=50).map(|k| (k * k) as f64).collect());
        let out = minimize(&q, &vec![1.0; 50], &LbfgsOptions::default()).unwrap();
        assert_eq!(out.status, Status::Converged);
        assert!(out.iterations <= 2);
    }

    struct Walled;
    impl Objective for Walled {
        fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
            if x[0] > 2.0 {
                return Err(crate::Error::InvalidParameter("outside domain".into()));
            }
            Ok(((x[0] - 1.9).powi(2), vec![2.0 * (x[0] - 1.9)]))
        }
    }

    #[test]
    fn evaluation_errors_shorten_the_step() {
        let out = minimize(&Walled, &[-10.0], &LbfgsOptions::default()).unwrap();
        assert_eq!(out.status, Status::Converged);
        assert!((out.x[0] - 1.9).abs() < 1e-8);
    }
}
