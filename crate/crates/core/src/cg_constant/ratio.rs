//! Direct minimisation of `∫<J u̇, u> / ∫G(T u̇)` and the constrained
//! problem `min f(u)` subject to `g(u) = γ`.

use super::{CgEstimate, CgMethod};
use crate::error::{Error, Result};
use crate::gfunc::{symplectic_test, GFunction};
use crate::linalg;
use crate::optim::{self, LbfgsOptions, Objective, Status};
use crate::orlicz::{DerivativeOperator, DerivativeRule, Trajectory};
use crate::sampling::SampleSpec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// `f(u) = ∫<J u̇, u>` and `g(u) = ∫G(T u̇)` on the grid, with gradients in
/// the `w Σ <·,·>` metric.
pub(crate) struct QuadraticForm {
    g: GFunction,
    op: DerivativeOperator,
    period: f64,
    n: usize,
    dim: usize,
}

impl QuadraticForm {
    pub(crate) fn new(g: &GFunction, period: f64, n: usize) -> Self {
        Self {
            g: g.clone(),
            op: DerivativeOperator::new(period, n, DerivativeRule::Spectral),
            period,
            n,
            dim: g.dim(),
        }
    }

    fn weight(&self) -> f64 {
        self.period / self.n as f64
    }

    fn derivative(&self, u: &[f64]) -> Vec<f64> {
        self.op.apply(u, self.dim)
    }

    /// `(f, ∇f)`.
    pub(crate) fn f(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let du = self.derivative(u);
        let jdu: Vec<f64> = du.chunks_exact(self.dim).flat_map(linalg::apply_j).collect();
        let ju: Vec<f64> = u.chunks_exact(self.dim).flat_map(linalg::apply_j).collect();
        let dt_ju = self.op.adjoint(&ju, self.dim);
        let grad = jdu.iter().zip(&dt_ju).map(|(a, b)| a - b).collect();
        (self.weight() * linalg::dot(&jdu, u), grad)
    }

    /// `(g(su), ∇g(su))` from a precomputed `u̇`.
    fn g_scaled(&self, du: &[f64], s: f64) -> Result<(f64, Vec<f64>)> {
        let t = self.period;
        let mut val = 0.0;
        let mut inner = Vec::with_capacity(du.len());
        for row in du.chunks_exact(self.dim) {
            let x = linalg::scale(row, s * t);
            val += self.g.evaluate(&x)?;
            inner.extend(linalg::scale(&self.g.gradient(&x)?, t));
        }
        Ok((self.weight() * val, self.op.adjoint(&inner, self.dim)))
    }

    pub(crate) fn g(&self, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.g_scaled(&self.derivative(u), 1.0)
    }

    /// `(g(su), d/ds g(su))` without the gradient field.
    fn g_level(&self, du: &[f64], s: f64) -> Result<(f64, f64)> {
        let t = self.period;
        let (mut val, mut slope) = (0.0, 0.0);
        for row in du.chunks_exact(self.dim) {
            let x = linalg::scale(row, s * t);
            val += self.g.evaluate(&x)?;
            slope += t * linalg::dot(&self.g.gradient(&x)?, row);
        }
        Ok((self.weight() * val, self.weight() * slope))
    }

    /// `s > 0` with `g(su) = level`: bracketing, then Newton safeguarded by
    /// bisection.
    fn level_scale(&self, du: &[f64], level: f64) -> Result<f64> {
        let val = |s: f64| -> Result<(f64, f64)> {
            let (v, d) = self.g_level(du, s)?;
            Ok((v - level, d))
        };
        let (mut lo, mut hi) = (1.0, 1.0);
        let mut it = 0;
        while val(hi)?.0 < 0.0 {
            hi *= 2.0;
            it += 1;
            if it > 2000 {
                return Err(Error::BracketFailure("level scale: g(su) stays below the level".into()));
            }
        }
        while val(lo)?.0 > 0.0 {
            lo *= 0.5;
            it += 1;
            if it > 2000 || lo == 0.0 {
                return Err(Error::BracketFailure("level scale: g(su) stays above the level".into()));
            }
        }
        let mut s = 0.5 * (lo + hi);
        for _ in 0..200 {
            let (v, d) = val(s)?;
            if v == 0.0 {
                return Ok(s);
            }
            if v < 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            if hi - lo <= 1e-15 * hi || v.abs() <= 1e-15 * level {
                break;
            }
            let newton = s - v / d;
            s = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        }
        Ok(s)
    }

    /// Rescales `u` onto `g(u) = level`.
    pub(crate) fn normalize(&self, u: &[f64], level: f64) -> Result<Vec<f64>> {
        let s = self.level_scale(&self.derivative(u), level)?;
        Ok(linalg::scale(u, s))
    }

    fn trajectory(&self, u: Vec<f64>) -> Result<Trajectory> {
        Trajectory::new(self.period, self.n, self.dim, u)
    }

    fn project_mean(&self, x: &mut [f64]) {
        let n = self.n as f64;
        for i in 0..self.dim {
            let m = x.iter().skip(i).step_by(self.dim).sum::<f64>() / n;
            x.iter_mut().skip(i).step_by(self.dim).for_each(|v| *v -= m);
        }
    }
}

/// `F(u) = f(s(u) u)` with `g(s(u) u) = level`: the quadratic form on the
/// level set, reached by radial retraction.
struct Retracted<'a> {
    q: &'a QuadraticForm,
    level: f64,
}

impl Objective for Retracted<'_> {
    fn eval(&self, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        let du = self.q.derivative(u);
        let s = self.q.level_scale(&du, self.level)?;
        let (f, gf) = self.q.f(u);
        let (_, gg) = self.q.g_scaled(&du, s)?;
        let w = self.q.weight();
        let radial = w * linalg::dot(&gg, u);
        if !(radial > 0.0) {
            return Err(Error::DescentFailure("degenerate radial derivative".into()));
        }
        let s2 = s * s;
        let mut grad: Vec<f64> = gf.iter().zip(&gg).map(|(a, b)| s2 * a - 2.0 * s2 * f * b / radial).collect();
        self.q.project_mean(&mut grad);
        Ok((s2 * f, grad))
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.q.weight() * linalg::dot(a, b)
    }

    fn precondition(&self, g: &[f64]) -> Vec<f64> {
        self.q.op.precondition(g, self.q.dim)
    }
}

#[derive(Debug, Clone)]
pub struct RatioOptions {
    pub n: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Fourier modes of the random starts.
    pub modes: usize,
    /// Level `γ₀` of the constraint `g(u) = γ₀`. For G with a scaling
    /// symmetry (power sums, quadratics) every level gives the same ratio.
    pub level: f64,
    pub solver: LbfgsOptions,
    /// Re-solve at `2T` and report `2 C_G(2T) / C_G(T)`.
    pub check_scaling: bool,
}

impl Default for RatioOptions {
    fn default() -> Self {
        Self {
            n: 256,
            restarts: 8,
            seed: 0,
            modes: 8,
            level: 1.0,
            solver: LbfgsOptions { grad_tol: 1e-9, max_iter: 3000, f_tol: 1e-13, ..LbfgsOptions::default() },
            check_scaling: false,
        }
    }
}

struct Start {
    value: f64,
    u: Vec<f64>,
}

fn descend(q: &QuadraticForm, opts: &RatioOptions, seed: u64) -> Result<Start> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u0 = Trajectory::random_band_limited(&mut rng, q.period, q.n, q.dim, opts.modes)?.into_values();
    let obj = Retracted { q, level: opts.level };
    let x0 = q.normalize(&u0, opts.level)?;
    let out = optim::minimize(&obj, &x0, &opts.solver)?;
    if out.status == Status::LineSearchFailed && out.grad_norm > 1e3 * opts.solver.grad_tol {
        log::debug!("ratio descent (seed {seed}) stopped with gradient {:e}", out.grad_norm);
    }
    let u = q.normalize(&out.x, opts.level)?;
    let value = q.f(&u).0 / opts.level;
    if !value.is_finite() {
        return Err(Error::UnboundedRatio(format!("non-finite ratio from seed {seed}")));
    }
    Ok(Start { value, u })
}

/// `C_G(T)` as minus the minimal ratio `∫<J u̇, u> / ∫G(T u̇)`, by
/// multi-start preconditioned descent on the level set `g(u) = γ₀`.
pub fn estimate_cg_ratio(g: &GFunction, period: f64, opts: &RatioOptions) -> Result<CgEstimate> {
    if !(period > 0.0) {
        return Err(Error::InvalidParameter(format!("period must be > 0, got {period}")));
    }
    let g_star = g.conjugate()?;
    let sym = symplectic_test(g, &g_star, &SampleSpec::default().with_points(50).with_seed(opts.seed), 1e-6)?;
    if !sym.symplectic {
        return Err(Error::HypothesisFailure(format!(
            "G is not symplectic (worst residual {:.3e})",
            sym.worst_residual
        )));
    }
    let (value, orbit) = best_ratio(g, period, opts)?;
    let scaling_check = if opts.check_scaling {
        let (v2, _) = best_ratio(g, 2.0 * period, opts)?;
        Some(2.0 * v2 / value)
    } else {
        None
    };
    Ok(CgEstimate {
        value,
        period,
        method: CgMethod::RatioMinimization,
        certificate_orbit: orbit,
        gamma_record: Vec::new(),
        scaling_check,
    })
}

fn best_ratio(g: &GFunction, period: f64, opts: &RatioOptions) -> Result<(f64, Trajectory)> {
    let q = QuadraticForm::new(g, period, opts.n);
    let runs: Vec<Result<Start>> = (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|i| descend(&q, opts, opts.seed.wrapping_add(i as u64)))
        .collect();
    let mut best: Option<Start> = None;
    let mut last_err = None;
    for r in runs {
        match r {
            Ok(s) if best.as_ref().is_none_or(|b| s.value < b.value) => best = Some(s),
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    let best = match (best, last_err) {
        (Some(b), _) => b,
        (None, Some(e)) => return Err(e),
        (None, None) => unreachable!("at least one restart runs"),
    };
    if best.value >= 0.0 {
        return Err(Error::DescentFailure(format!("no negative ratio found (best {})", best.value)));
    }
    if best.value < -1e8 {
        return Err(Error::UnboundedRatio(format!("ratio reached {:e}", best.value)));
    }
    Ok((-best.value, q.trajectory(best.u)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstrainedSolution {
    pub gamma: f64,
    /// `A(γ) = f(u_γ)`.
    pub a_gamma: f64,
    #[serde(skip)]
    pub u: Trajectory,
    /// Multiplier in `f'(u) = 2λ g'(u)`.
    pub lambda: f64,
    pub constraint_residual: f64,
    /// `max_k |J u̇ + λ d/dt ∇G(T u̇)|`, relative to `max |J u̇|`.
    pub stationarity_residual: f64,
    /// The same residual at the wrap-around node `t = 0`, which encodes
    /// `u̇(0) = u̇(T)`.
    pub boundary_residual: f64,
    pub outer_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct ConstrainedOptions {
    pub n: usize,
    pub seed: u64,
    pub restarts: usize,
    pub penalty: f64,
    pub max_outer: usize,
    /// Relative feasibility `|g(u) - γ| <= tol γ`.
    pub tol: f64,
    pub solver: LbfgsOptions,
}

impl Default for ConstrainedOptions {
    fn default() -> Self {
        Self {
            n: 128,
            seed: 0,
            restarts: 4,
            penalty: 10.0,
            max_outer: 40,
            tol: 1e-9,
            solver: LbfgsOptions { grad_tol: 1e-9, max_iter: 3000, ..LbfgsOptions::default() },
        }
    }
}

/// `f(u) - μ(g(u) - γ) + (ρ/2)(g(u) - γ)²`.
struct AugmentedLagrangian<'a> {
    q: &'a QuadraticForm,
    gamma: f64,
    mu: f64,
    rho: f64,
}

impl Objective for AugmentedLagrangian<'_> {
    fn eval(&self, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (f, gf) = self.q.f(u);
        let (g, gg) = self.q.g(u)?;
        let c = g - self.gamma;
        let k = -self.mu + self.rho * c;
        let mut grad: Vec<f64> = gf.iter().zip(&gg).map(|(a, b)| a + k * b).collect();
        self.q.project_mean(&mut grad);
        Ok((f - self.mu * c + 0.5 * self.rho * c * c, grad))
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.q.weight() * linalg::dot(a, b)
    }

    fn precondition(&self, g: &[f64]) -> Vec<f64> {
        self.q.op.precondition(g, self.q.dim)
    }
}

/// Solves `min ∫<J u̇, u>` subject to `∫G(T u̇) = γ` by the augmented
/// Lagrangian method, started from ratio minimisers on the same level.
pub fn solve_constrained_p(
    g: &GFunction,
    gamma: f64,
    period: f64,
    opts: &ConstrainedOptions,
) -> Result<ConstrainedSolution> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
    }
    let q = QuadraticForm::new(g, period, opts.n);
    let ratio_opts = RatioOptions {
        n: opts.n,
        restarts: opts.restarts,
        seed: opts.seed,
        level: gamma,
        solver: opts.solver,
        ..RatioOptions::default()
    };
    let (_, start) = best_ratio(g, period, &ratio_opts)?;
    let mut u = start.into_values();

    // multiplier estimate from the start: ∇f ≈ μ ∇g
    let w = q.weight();
    let (_, gf) = q.f(&u);
    let (_, gg) = q.g(&u)?;
    let mut mu = w * linalg::dot(&gf, &gg) / (w * linalg::dot(&gg, &gg));
    let mut rho = opts.penalty;
    let mut outer = 0;
    let mut viol = f64::INFINITY;
    while outer < opts.max_outer {
        outer += 1;
        let al = AugmentedLagrangian { q: &q, gamma, mu, rho };
        let out = optim::minimize(&al, &u, &opts.solver)?;
        u = out.x;
        let c = q.g(&u)?.0 - gamma;
        let new_viol = c.abs() / gamma;
        mu -= rho * c;
        if new_viol <= opts.tol && out.grad_norm <= 1e3 * opts.solver.grad_tol {
            viol = new_viol;
            break;
        }
        if new_viol > 0.25 * viol {
            rho *= 4.0;
        }
        viol = new_viol;
    }
    if viol > opts.tol {
        return Err(Error::ConstraintInfeasible(format!(
            "|g(u) - gamma| / gamma = {viol:e} after {outer} outer iterations"
        )));
    }
    let lambda = mu / 2.0;
    if lambda >= 0.0 {
        return Err(Error::MultiplierSign(lambda));
    }
    let a_gamma = q.f(&u).0;
    let (stat, boundary) = stationarity(&q, &u, lambda)?;
    Ok(ConstrainedSolution {
        gamma,
        a_gamma,
        u: q.trajectory(u)?,
        lambda,
        constraint_residual: viol,
        stationarity_residual: stat,
        boundary_residual: boundary,
        outer_iterations: outer,
    })
}

/// `J u̇ + λ T d/dt ∇G(T u̇)` at every node, relative to `max |J u̇|`.
fn stationarity(q: &QuadraticForm, u: &[f64], lambda: f64) -> Result<(f64, f64)> {
    let du = q.derivative(u);
    let t = q.period;
    let mut grads = Vec::with_capacity(du.len());
    for row in du.chunks_exact(q.dim) {
        grads.extend(q.g.gradient(&linalg::scale(row, t))?);
    }
    let dgrad = q.op.apply(&grads, q.dim);
    let scale = du.chunks_exact(q.dim).map(linalg::norm).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    let mut at_zero = 0.0;
    for k in 0..q.n {
        let r: Vec<f64> = linalg::apply_j(&du[k * q.dim..(k + 1) * q.dim])
            .iter()
            .zip(&dgrad[k * q.dim..(k + 1) * q.dim])
            .map(|(a, b)| a + lambda * t * b)
            .collect();
        let rn = linalg::norm(&r) / scale;
        if k == 0 {
            at_zero = rn;
        }
        worst = worst.max(rn);
    }
    Ok((worst, at_zero))
}

/// `(γ, A(γ)/γ)` over `gammas`, solved in parallel.
pub fn gamma_sweep(
    g: &GFunction,
    gammas: &[f64],
    period: f64,
    opts: &ConstrainedOptions,
) -> Result<(CgEstimate, Vec<ConstrainedSolution>)> {
    let sols: Vec<ConstrainedSolution> = gammas
        .par_iter()
        .map(|&gm| solve_constrained_p(g, gm, period, opts))
        .collect::<Result<_>>()?;
    let record: Vec<(f64, f64)> = sols.iter().map(|s| (s.gamma, s.a_gamma / s.gamma)).collect();
    let best = sols
        .iter()
        .min_by(|a, b| (a.a_gamma / a.gamma).total_cmp(&(b.a_gamma / b.gamma)))
        .ok_or_else(|| Error::InvalidParameter("empty gamma list".into()))?;
    Ok((
        CgEstimate {
            value: -best.a_gamma / best.gamma,
            period,
            method: CgMethod::GammaSweep,
            certificate_orbit: best.u.clone(),
            gamma_record: record,
            scaling_check: None,
        },
        sols,
    ))
}
