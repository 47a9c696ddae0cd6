//! Discretised dual action and its minimisation.

use super::hamiltonian::{perturbed_hamiltonian, Hamiltonian, PERTURBATION_R};
use super::hypotheses::{check_existence_hypotheses, HypothesisOptions};
use crate::error::{Error, Result};
use crate::gfunc::GFunction;
use crate::linalg;
use crate::optim::{self, LbfgsOptions, Objective, Status};
use crate::orlicz::{modular, DerivativeOperator, DerivativeRule, Trajectory};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Mutex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EpsilonSchedule {
    /// One solve at the given `ε` (0 disables the perturbation).
    Fixed { epsilon: f64 },
    /// Solve at `initial`, divide by `factor`, repeat until the orbit moves
    /// less than `tol` in max-norm or `min` is reached.
    Continuation { initial: f64, factor: f64, min: f64, tol: f64 },
}

impl EpsilonSchedule {
    /// The default continuation `ε₀ = 1e-3 Λ`, `ε → ε/10`.
    pub fn default_for(big_lambda: f64) -> Self {
        let initial = 1e-3 * big_lambda;
        EpsilonSchedule::Continuation { initial, factor: 10.0, min: initial * 1e-4, tol: 1e-8 }
    }

    pub fn sequence(&self) -> Vec<f64> {
        match *self {
            EpsilonSchedule::Fixed { epsilon } => vec![epsilon],
            EpsilonSchedule::Continuation { initial, factor, min, .. } => {
                let mut out = vec![initial];
                let mut e = initial;
                while e / factor >= min * (1.0 - 1e-12) && out.len() < 64 {
                    e /= factor;
                    out.push(e);
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisPolicy {
    Check,
    Waive,
}

#[derive(Debug, Clone)]
pub struct DualActionProblem {
    pub hamiltonian: Hamiltonian,
    pub period: f64,
    pub n: usize,
    pub schedule: EpsilonSchedule,
    /// G-function of the perturbation `G(εu)`; defaults to the certificate's.
    pub perturbation: Option<GFunction>,
    pub rule: DerivativeRule,
    pub solver: LbfgsOptions,
    pub policy: HypothesisPolicy,
    /// `C_{G*}(1)`; the constant at period `T` is `cg_star / T`.
    pub cg_star: Option<f64>,
    pub parallel: bool,
}

impl DualActionProblem {
    pub fn new(hamiltonian: Hamiltonian, period: f64, n: usize) -> Self {
        let schedule = match hamiltonian.growth() {
            Some(c) => EpsilonSchedule::default_for(c.big_lambda),
            None => EpsilonSchedule::Fixed { epsilon: 0.0 },
        };
        Self {
            hamiltonian,
            period,
            n,
            schedule,
            perturbation: None,
            rule: DerivativeRule::Spectral,
            solver: LbfgsOptions { grad_tol: 1e-10, max_iter: 5000, ..LbfgsOptions::default() },
            policy: HypothesisPolicy::Check,
            cg_star: None,
            parallel: true,
        }
    }

    pub fn with_schedule(mut self, schedule: EpsilonSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_policy(mut self, policy: HypothesisPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_rule(mut self, rule: DerivativeRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_solver(mut self, solver: LbfgsOptions) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_cg_star(mut self, cg_star: f64) -> Self {
        self.cg_star = Some(cg_star);
        self
    }

    pub fn with_perturbation(mut self, g: GFunction) -> Self {
        self.perturbation = Some(g);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.period > 0.0) {
            return Err(Error::InvalidParameter(format!("period must be > 0, got {}", self.period)));
        }
        if self.n < 4 {
            return Err(Error::InvalidParameter(format!("need N >= 4, got {}", self.n)));
        }
        if self.hamiltonian.dim() % 2 != 0 {
            return Err(Error::InvalidParameter("Hamiltonian dimension must be even".into()));
        }
        Ok(())
    }

    fn perturbation_g(&self) -> GFunction {
        self.perturbation
            .clone()
            .or_else(|| self.hamiltonian.growth().map(|c| c.g.clone()))
            .unwrap_or_else(|| GFunction::half_square(self.hamiltonian.dim()))
    }

    /// The discretised functional `χ_ε` for one fixed `ε`.
    pub fn functional(&self, epsilon: f64) -> Result<DualFunctional> {
        self.validate()?;
        if let Some(c) = self.hamiltonian.growth() {
            if epsilon > 0.0 && epsilon >= PERTURBATION_R * c.big_lambda {
                return Err(Error::InvalidParameter(format!(
                    "epsilon {epsilon} must stay below r·Λ = {}",
                    PERTURBATION_R * c.big_lambda
                )));
            }
        }
        let h = perturbed_hamiltonian(&self.hamiltonian, &self.perturbation_g(), epsilon)?;
        Ok(DualFunctional::new(h, self.period, self.n, self.rule, self.parallel))
    }

    pub fn dual_action_value(&self, epsilon: f64, v: &Trajectory) -> Result<f64> {
        self.functional(epsilon)?.value(v)
    }

    pub fn dual_action_gradient(&self, epsilon: f64, v: &Trajectory) -> Result<Trajectory> {
        self.functional(epsilon)?.gradient(v)
    }

    /// `(C_χ, B_χ)` of the coercivity floor
    /// `χ_ε(v) >= C_χ ∫G*(T v̇) - B_χ`, from the certificate and `cg_star`.
    pub fn coercivity_constants(&self) -> Result<(f64, f64)> {
        let c = self
            .hamiltonian
            .growth()
            .ok_or_else(|| Error::HypothesisFailure("no growth certificate".into()))?;
        let cg_star = self
            .cg_star
            .ok_or_else(|| Error::InvalidParameter("coercivity constants need cg_star".into()))?;
        let t = self.period;
        let c_chi = 1.0 / (t * (1.0 + PERTURBATION_R) * c.big_lambda) - cg_star / t / 2.0;
        let m = 256;
        let alpha_int: f64 = (0..m).map(|k| (c.gamma)(k as f64 * t / m as f64)).sum::<f64>() * t / m as f64;
        Ok((c_chi, alpha_int))
    }

    /// Minimises `χ_ε` along the ε-schedule and recovers the orbit.
    pub fn minimize(&self, v0: Option<&Trajectory>) -> Result<SolveReport> {
        self.validate()?;
        if self.policy == HypothesisPolicy::Check {
            let cg_star = self.cg_star.unwrap_or(2.0);
            let rep = check_existence_hypotheses(
                &self.hamiltonian,
                self.period,
                cg_star,
                &HypothesisOptions::default(),
            )?;
            if !rep.pass {
                return Err(Error::HypothesisFailure(rep.summary()));
            }
        }
        let mut runs: Vec<OrbitResult> = Vec::new();
        let mut start = v0.cloned();
        let tol = match self.schedule {
            EpsilonSchedule::Continuation { tol, .. } => Some(tol),
            EpsilonSchedule::Fixed { .. } => None,
        };
        for eps in self.schedule.sequence() {
            let res = self.minimize_at(eps, start.as_ref())?;
            let moved = runs.last().map(|prev| prev.u.max_distance(&res.u)).transpose()?;
            start = Some(res.v.clone());
            runs.push(res);
            if let (Some(m), Some(tol)) = (moved, tol) {
                if m < tol {
                    break;
                }
            }
        }
        let orbit = runs.last().cloned().expect("schedule is never empty");
        Ok(SolveReport { orbit, runs })
    }

    /// One minimisation of `χ_ε` at fixed `ε`.
    pub fn minimize_at(&self, epsilon: f64, v0: Option<&Trajectory>) -> Result<OrbitResult> {
        let f = self.functional(epsilon)?;
        let dim = self.hamiltonian.dim();
        let x0 = match v0 {
            Some(v) => {
                Error::check_dim(self.n * dim, v.values().len())?;
                v.tilde().into_values()
            }
            None => vec![0.0; self.n * dim],
        };
        let out = optim::minimize(&f, &x0, &self.solver)?;
        let last = |x: &[f64]| f.trajectory(x.to_vec());
        let mut reduced_accuracy = false;
        let (x, grad_norm, iterations) = match out.status {
            Status::Converged => (out.x, out.grad_norm, out.iterations),
            Status::MaxIterations => {
                return Err(Error::MaxIterations {
                    iterations: out.iterations,
                    grad_norm: out.grad_norm,
                    last: Box::new(last(&out.x)?),
                })
            }
            Status::LineSearchFailed | Status::Stalled => {
                let (x, gn, it) = f.subgradient_descent(out.x, out.value, 2000, self.solver.grad_tol)?;
                if gn > 1e3 * self.solver.grad_tol {
                    return Err(Error::LineSearchFailure {
                        iterations: out.iterations + it,
                        grad_norm: gn,
                        last: Box::new(last(&x)?),
                    });
                }
                reduced_accuracy = true;
                (x, gn, out.iterations + it)
            }
        };
        let v = f.trajectory(x)?;
        let (chi_value, u) = f.recover(&v)?;
        let hamiltonian_residual = residual(&self.hamiltonian, &u)?;
        let perturbed_residual = residual(f.hamiltonian(), &u)?;
        Ok(OrbitResult {
            v,
            u,
            epsilon,
            chi_value,
            grad_norm,
            hamiltonian_residual,
            perturbed_residual,
            iterations,
            reduced_accuracy,
        })
    }
}

/// `max_k |J u̇(t_k) + ∇H(t_k, u_k)|`.
pub fn residual(h: &Hamiltonian, u: &Trajectory) -> Result<f64> {
    let du = u.derivative().apply_j();
    let mut worst: f64 = 0.0;
    for k in 0..u.n() {
        let g = h.gradient(u.time(k), u.row(k))?;
        worst = worst.max(linalg::norm(&linalg::add(du.row(k), &g)));
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct OrbitResult {
    /// Mean-zero dual minimiser.
    pub v: Trajectory,
    /// Primal orbit `u = ∇H_ε*(t, v̇)`.
    pub u: Trajectory,
    pub epsilon: f64,
    pub chi_value: f64,
    pub grad_norm: f64,
    /// Residual against the unperturbed Hamiltonian.
    pub hamiltonian_residual: f64,
    /// Residual against `H_ε`.
    pub perturbed_residual: f64,
    pub iterations: usize,
    /// Set when the quasi-Newton line search stalled and the subgradient
    /// fallback produced the result.
    pub reduced_accuracy: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitSummary {
    pub epsilon: f64,
    pub chi_value: f64,
    pub grad_norm: f64,
    pub hamiltonian_residual: f64,
    pub perturbed_residual: f64,
    pub iterations: usize,
    pub reduced_accuracy: bool,
}

impl OrbitResult {
    pub fn summary(&self) -> OrbitSummary {
        OrbitSummary {
            epsilon: self.epsilon,
            chi_value: self.chi_value,
            grad_norm: self.grad_norm,
            hamiltonian_residual: self.hamiltonian_residual,
            perturbed_residual: self.perturbed_residual,
            iterations: self.iterations,
            reduced_accuracy: self.reduced_accuracy,
        }
    }
}

/// All runs of an ε-schedule; `orbit` is the last one.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub orbit: OrbitResult,
    pub runs: Vec<OrbitResult>,
}

/// `χ_ε(v) = ∫ ½<J v̇, v> + H_ε*(t, v̇) dt` on the grid, with its gradient
/// in the `L²` metric `w Σ <·,·>`, `w = T/N`.
pub struct DualFunctional {
    h: Hamiltonian,
    op: DerivativeOperator,
    period: f64,
    n: usize,
    dim: usize,
    parallel: bool,
    /// Maximiser at each node from the previous evaluation.
    warm: Mutex<Vec<Option<Vec<f64>>>>,
}

impl DualFunctional {
    pub fn new(h: Hamiltonian, period: f64, n: usize, rule: DerivativeRule, parallel: bool) -> Self {
        let dim = h.dim();
        Self {
            h,
            op: DerivativeOperator::new(period, n, rule),
            period,
            n,
            dim,
            parallel,
            warm: Mutex::new(vec![None; n]),
        }
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.h
    }

    fn weight(&self) -> f64 {
        self.period / self.n as f64
    }

    fn time(&self, k: usize) -> f64 {
        k as f64 * self.period / self.n as f64
    }

    pub fn trajectory(&self, values: Vec<f64>) -> Result<Trajectory> {
        Ok(Trajectory::new(self.period, self.n, self.dim, values)?.with_rule(self.op.rule()))
    }

    /// Node-wise conjugate values and maximisers at `v̇ = D v`.
    fn conjugates(&self, dv: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let warm = self.warm.lock().expect("warm-start cache poisoned").clone();
        let solve = |k: usize| {
            let row = &dv[k * self.dim..(k + 1) * self.dim];
            self.h.conjugate(self.time(k), row, warm[k].as_deref())
        };
        let points: Vec<_> = if self.parallel {
            (0..self.n).into_par_iter().map(solve).collect::<Result<_>>()?
        } else {
            (0..self.n).map(solve).collect::<Result<_>>()?
        };
        let mut values = Vec::with_capacity(self.n);
        let mut args = Vec::with_capacity(self.n * self.dim);
        let mut next_warm = Vec::with_capacity(self.n);
        for p in points {
            values.push(p.value);
            args.extend_from_slice(&p.argmax);
            next_warm.push(Some(p.argmax));
        }
        *self.warm.lock().expect("warm-start cache poisoned") = next_warm;
        Ok((values, args))
    }

    fn eval_values(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let dv = self.op.apply(x, self.dim);
        let (hstar, args) = self.conjugates(&dv)?;
        let jdv: Vec<f64> = dv.chunks_exact(self.dim).flat_map(linalg::apply_j).collect();
        let w = self.weight();
        let value = w * (0.5 * linalg::dot(&jdv, x) + hstar.iter().sum::<f64>());

        // Riesz gradient: ½(J D v - Dᵀ J v) + Dᵀ U, mean removed
        let jv: Vec<f64> = x.chunks_exact(self.dim).flat_map(linalg::apply_j).collect();
        let dt_jv = self.op.adjoint(&jv, self.dim);
        let dt_u = self.op.adjoint(&args, self.dim);
        let mut grad: Vec<f64> = (0..x.len()).map(|i| 0.5 * (jdv[i] - dt_jv[i]) + dt_u[i]).collect();
        project_mean(&mut grad, self.dim);
        Ok((value, grad))
    }

    pub fn value(&self, v: &Trajectory) -> Result<f64> {
        Ok(self.eval_values(&self.projected(v)?)?.0)
    }

    pub fn gradient(&self, v: &Trajectory) -> Result<Trajectory> {
        let g = self.eval_values(&self.projected(v)?)?.1;
        self.trajectory(g)
    }

    fn projected(&self, v: &Trajectory) -> Result<Vec<f64>> {
        Error::check_dim(self.n * self.dim, v.values().len())?;
        let mean = linalg::norm(&v.mean());
        if mean > 1e-12 * (1.0 + v.max_norm()) {
            log::warn!("dual action called with a non-mean-zero v (|mean| = {mean:e}); projecting");
        }
        Ok(v.tilde().into_values())
    }

    /// `(χ_ε(v), u)` with `u_k = ∇H_ε*(t_k, v̇_k)`.
    pub fn recover(&self, v: &Trajectory) -> Result<(f64, Trajectory)> {
        let x = v.values();
        let value = self.eval_values(x)?.0;
        let dv = self.op.apply(x, self.dim);
        let (_, args) = self.conjugates(&dv)?;
        Ok((value, self.trajectory(args)?))
    }

    /// Normalised subgradient steps with diminishing lengths, keeping the
    /// iterate of smallest gradient norm; stops at `target` or after 200
    /// steps without improvement.
    fn subgradient_descent(&self, x0: Vec<f64>, f0: f64, iters: usize, target: f64) -> Result<(Vec<f64>, f64, usize)> {
        let (mut x, mut best_x) = (x0.clone(), x0);
        let (_, g0) = self.eval(&x)?;
        let mut best_gn = self.inner(&g0, &g0).sqrt();
        let mut g = g0;
        let scale = (self.inner(&x, &x).sqrt()).max(1.0) * 1e-3;
        let mut f_best = f0;
        let mut last_gain = 0;
        let mut used = 0;
        for k in 0..iters {
            used = k + 1;
            if best_gn <= target || k - last_gain > 200 {
                break;
            }
            let pg = self.precondition(&g);
            let pn = self.inner(&pg, &pg).sqrt();
            if pn == 0.0 {
                break;
            }
            let step = scale / ((k + 1) as f64).sqrt() / pn;
            linalg::axpy(-step, &pg, &mut x);
            let (f, gn) = match self.eval(&x) {
                Ok(r) => r,
                Err(_) => break,
            };
            g = gn;
            let norm = self.inner(&g, &g).sqrt();
            if norm < best_gn || f < f_best {
                f_best = f_best.min(f);
                if norm < best_gn {
                    best_gn = norm;
                    best_x = x.clone();
                    last_gain = k;
                }
            }
        }
        Ok((best_x, best_gn, used))
    }
}

impl Objective for DualFunctional {
    fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.eval_values(x)
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weight() * linalg::dot(a, b)
    }

    fn precondition(&self, g: &[f64]) -> Vec<f64> {
        self.op.precondition(g, self.dim)
    }
}

fn project_mean(x: &mut [f64], dim: usize) {
    let n = x.len() / dim;
    for i in 0..dim {
        let m = (0..n).map(|k| x[k * dim + i]).sum::<f64>() / n as f64;
        for k in 0..n {
            x[k * dim + i] -= m;
        }
    }
}

/// `∫ G*(T v̇) dt`, the quantity of the coercivity floor.
pub fn dual_modular(g_star: &GFunction, v: &Trajectory) -> Result<f64> {
    modular(g_star, &v.derivative().scale(v.period()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual_action::registry::{quadratic_forced, scaled_g};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn forced(n: usize) -> DualActionProblem {
        DualActionProblem::new(quadratic_forced(1.0, 1.0, 0.5, 1.5).unwrap(), 1.0, n).with_cg_star(1.0 / PI)
    }

    #[test]
    fn value_of_circle_for_half_square() {
        let h = scaled_g(GFunction::half_square(2), 1.0).unwrap();
        let p = DualActionProblem::new(h, 2.0 * PI, 64);
        let v = Trajectory::from_fn(2.0 * PI, 64, 2, |t| vec![t.sin(), t.cos()]).unwrap();
        assert!(p.dual_action_value(0.0, &v).unwrap().abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = forced(32);
        let f = p.functional(1e-2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = Trajectory::random_band_limited(&mut rng, 1.0, 32, 2, 4).unwrap().scale(0.1);
        let g = f.gradient(&v).unwrap();
        for _ in 0..5 {
            let d = Trajectory::random_band_limited(&mut rng, 1.0, 32, 2, 6).unwrap();
            let h = 1e-6;
            let fd = (f.value(&v.add(&d.scale(h)).unwrap()).unwrap() - f.value(&v.sub(&d.scale(h)).unwrap()).unwrap())
                / (2.0 * h);
            let an = g.inner(&d).unwrap();
            assert!((fd - an).abs() < 1e-6 * (1.0 + an.abs()), "{fd} vs {an}");
        }
    }

    #[test]
    fn solves_forced_linear_system() {
        let p = forced(64).with_schedule(EpsilonSchedule::Fixed { epsilon: 0.0 });
        let r = p.minimize(None).unwrap().orbit;
        let c = -1.0 / (1.0 + 2.0 * PI);
        let exact = Trajectory::from_fn(1.0, 64, 2, |t| vec![c * (2.0 * PI * t).cos(), c * (2.0 * PI * t).sin()]).unwrap();
        assert!(r.u.max_distance(&exact).unwrap() < 1e-8, "{}", r.u.max_distance(&exact).unwrap());
        assert!(r.hamiltonian_residual < 1e-8);
    }

    #[test]
    fn unforced_power_has_zero_orbit() {
        let g = GFunction::symplectic_power(3.0, 1).unwrap();
        let p = DualActionProblem::new(scaled_g(g, 0.3).unwrap(), 1.0, 32).with_cg_star(2.0);
        let r = p.minimize(None).unwrap().orbit;
        assert!(r.u.max_norm() < 1e-8);
    }

    #[test]
    fn translation_invariance() {
        let p = forced(16);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = Trajectory::random_band_limited(&mut rng, 1.0, 16, 2, 3).unwrap();
        let a = p.dual_action_value(0.0, &v).unwrap();
        let b = p.dual_action_value(0.0, &v.add_constant(&[3.0, -1.0])).unwrap();
        assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn epsilon_above_r_lambda_is_rejected() {
        assert!(forced(16).functional(1.0).is_err());
    }
}
