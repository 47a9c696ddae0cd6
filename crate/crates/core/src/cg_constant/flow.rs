//! Periodic orbits of `u̇ = J∇G(u)` and the ratio they certify.

use crate::error::{Error, Result};
use crate::gfunc::GFunction;
use crate::linalg;
use crate::orlicz::Trajectory;
use nalgebra::DMatrix;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct PeriodicOrbit {
    /// One period sampled uniformly on `[0, T_u)`.
    #[serde(skip)]
    pub u: Trajectory,
    /// `G(u(0))`.
    pub energy: f64,
    pub period: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowResult {
    pub orbit: PeriodicOrbit,
    /// `(1/T_u) ∫<∇G(u), u> / ∫G*(∇G(u))`.
    pub ratio: f64,
    /// `max |G(u(t)) - G(u(0))|` over the sampled period.
    pub energy_drift: f64,
    /// `|u(T_u) - u(0)|` at the detected return.
    pub return_error: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    /// Period guess; the step is `T_guess / steps_per_period`. Estimated
    /// from `|u0| / |∇G(u0)|` when absent.
    pub t_guess: Option<f64>,
    pub steps_per_period: usize,
    /// Give up after this many multiples of the guess.
    pub max_periods: f64,
    pub newton_tol: f64,
    pub energy_tol: f64,
    /// Accept a section crossing as a return when `|u - u0|` is below this
    /// (relative to `1 + |u0|`).
    pub return_tol: f64,
    /// Pull every step back onto the level set `G = G(u0)`.
    pub project_energy: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            t_guess: None,
            steps_per_period: 2048,
            max_periods: 50.0,
            newton_tol: 1e-14,
            energy_tol: 1e-8,
            return_tol: 1e-8,
            project_energy: true,
        }
    }
}

struct Integrator<'a> {
    g: &'a GFunction,
    energy: f64,
    opts: &'a FlowOptions,
}

impl Integrator<'_> {
    fn field(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(linalg::apply_j(&self.g.gradient(u)?))
    }

    /// One implicit-midpoint step `x = u + h J∇G((u + x)/2)`.
    fn step(&self, u: &[f64], h: f64) -> Result<Vec<f64>> {
        let dim = u.len();
        let j = linalg::j_matrix(dim);
        // explicit midpoint predictor
        let k1 = self.field(u)?;
        let mid: Vec<f64> = u.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
        let mut x: Vec<f64> = u.iter().zip(&self.field(&mid)?).map(|(a, b)| a + h * b).collect();
        let scale = 1.0 + linalg::norm(u);
        let mut converged = false;
        for _ in 0..50 {
            let m: Vec<f64> = u.iter().zip(&x).map(|(a, b)| 0.5 * (a + b)).collect();
            let f = self.field(&m)?;
            let r: Vec<f64> = (0..dim).map(|i| x[i] - u[i] - h * f[i]).collect();
            if linalg::norm(&r) <= self.opts.newton_tol * scale {
                converged = true;
                break;
            }
            let jac = DMatrix::identity(dim, dim) - &j * self.g.hessian(&m)? * (0.5 * h);
            let dx = linalg::solve(&jac, &r)
                .ok_or_else(|| Error::DescentFailure("singular implicit-midpoint Jacobian".into()))?;
            let prev = linalg::norm(&dx);
            linalg::axpy(-1.0, &dx, &mut x);
            if prev <= 1e-16 * scale {
                converged = true;
                break;
            }
        }
        if !converged {
            log::debug!("implicit midpoint Newton stopped above tolerance");
        }
        if self.opts.project_energy {
            x = self.project(x)?;
        }
        Ok(x)
    }

    /// Newton steps along `∇G` onto `G = energy`.
    fn project(&self, mut x: Vec<f64>) -> Result<Vec<f64>> {
        for _ in 0..5 {
            let gap = self.g.evaluate(&x)? - self.energy;
            if gap.abs() <= 1e-15 * (1.0 + self.energy) {
                break;
            }
            let grad = self.g.gradient(&x)?;
            let gg = linalg::dot(&grad, &grad);
            if !(gg > 0.0) {
                break;
            }
            linalg::axpy(-gap / gg, &grad, &mut x);
        }
        Ok(x)
    }
}

/// First return to the section through `u0` orthogonal to the flow.
fn find_period(it: &Integrator<'_>, u0: &[f64], h: f64, max_time: f64) -> Result<(f64, f64)> {
    let n0 = it.field(u0)?;
    let sigma = |u: &[f64]| linalg::dot(&linalg::sub(u, u0), &n0);
    let scale = 1.0 + linalg::norm(u0);
    let mut u = u0.to_vec();
    let mut t = 0.0;
    let mut left = false;
    let far = 1e-2 * linalg::norm(u0).max(1e-300);
    while t < max_time {
        let un = it.step(&u, h)?;
        let (s0, s1) = (sigma(&u), sigma(&un));
        if linalg::norm(&linalg::sub(&un, u0)) > far {
            left = true;
        }
        if left && s0 < 0.0 && s1 >= 0.0 {
            let (f0, f1) = (it.field(&u)?, it.field(&un)?);
            let (d0, d1) = (linalg::dot(&f0, &n0) * h, linalg::dot(&f1, &n0) * h);
            let theta = hermite_root(s0, s1, d0, d1);
            let x = hermite_point(&u, &un, &f0, &f1, h, theta);
            let err = linalg::norm(&linalg::sub(&x, u0));
            if err <= 1e-3 * scale {
                return Ok((t + theta * h, err));
            }
        }
        u = un;
        t += h;
    }
    Err(Error::PeriodNotDetected { max_time })
}

/// Root in `[0, 1]` of the cubic Hermite interpolant of `σ`.
fn hermite_root(s0: f64, s1: f64, d0: f64, d1: f64) -> f64 {
    let p = |x: f64| {
        let (x2, x3) = (x * x, x * x * x);
        (2.0 * x3 - 3.0 * x2 + 1.0) * s0 + (x3 - 2.0 * x2 + x) * d0 + (-2.0 * x3 + 3.0 * x2) * s1 + (x3 - x2) * d1
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if p(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn hermite_point(u0: &[f64], u1: &[f64], f0: &[f64], f1: &[f64], h: f64, x: f64) -> Vec<f64> {
    let (x2, x3) = (x * x, x * x * x);
    let (h00, h10, h01, h11) = (2.0 * x3 - 3.0 * x2 + 1.0, x3 - 2.0 * x2 + x, -2.0 * x3 + 3.0 * x2, x3 - x2);
    (0..u0.len())
        .map(|i| h00 * u0[i] + h10 * h * f0[i] + h01 * u1[i] + h11 * h * f1[i])
        .collect()
}

/// Integrates `u̇ = J∇G(u)` from `u0` by implicit midpoint, detects the
/// period on a Poincaré section and evaluates the orbit ratio.
pub fn flow_characterization(g: &GFunction, u0: &[f64], opts: &FlowOptions) -> Result<FlowResult> {
    if u0.len() != g.dim() || u0.len() % 2 != 0 {
        return Err(Error::InvalidParameter("u0 must match the (even) dimension of G".into()));
    }
    if linalg::norm(u0) == 0.0 {
        return Err(Error::InvalidParameter("u0 must be nonzero".into()));
    }
    let energy = g.evaluate(u0)?;
    let it = Integrator { g, energy, opts };
    let guess = match opts.t_guess {
        Some(t) => t,
        None => 2.0 * std::f64::consts::PI * linalg::norm(u0) / linalg::norm(&g.gradient(u0)?),
    };
    let m = opts.steps_per_period.max(16);
    let max_time = opts.max_periods * guess;

    // coarse pass with the guessed step, then a pass at the detected period
    let (t1, _) = find_period(&it, u0, guess / m as f64, max_time)?;
    let (period, return_error) = find_period(&it, u0, t1 / m as f64, max_time.max(2.0 * t1))?;
    if return_error > opts.return_tol * (1.0 + linalg::norm(u0)) {
        return Err(Error::PeriodNotDetected { max_time });
    }

    // uniform samples over exactly one period
    let h = period / m as f64;
    let mut values = Vec::with_capacity(m * u0.len());
    let mut u = u0.to_vec();
    let mut drift: f64 = 0.0;
    for _ in 0..m {
        drift = drift.max((g.evaluate(&u)? - energy).abs());
        values.extend_from_slice(&u);
        u = it.step(&u, h)?;
    }
    if drift > opts.energy_tol * (1.0 + energy) {
        return Err(Error::IntegratorDrift { drift, tol: opts.energy_tol });
    }
    let traj = Trajectory::new(period, m, u0.len(), values)?;
    let ratio = orbit_ratio(g, &traj)?;
    Ok(FlowResult { orbit: PeriodicOrbit { u: traj, energy, period }, ratio, energy_drift: drift, return_error })
}

/// `(1/T_u) ∫<∇G(u), u> / ∫G*(∇G(u))` on a sampled orbit.
pub fn orbit_ratio(g: &GFunction, u: &Trajectory) -> Result<f64> {
    let g_star = g.conjugate()?;
    let (mut num, mut den) = (0.0, 0.0);
    for row in u.rows() {
        let grad = g.gradient(row)?;
        num += linalg::dot(&grad, row);
        den += g_star.evaluate(&grad)?;
    }
    Ok(num / den / u.period())
}
