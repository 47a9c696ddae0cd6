//! Periodic solutions of `d/dt ∇Φ(q̇) + ∇V(t, q) = 0` through the
//! Hamiltonian `H(t, z) = Φ*(Λz₂) + V(t, z₁/Λ)`.
//!
//! Along an orbit of `H`, `q = z₁/Λ` satisfies `∇Φ(q̇) = Λz₂`, so the
//! second-order equation follows from `ż₂ = -∇V(t, q)/Λ`. The assumptions
//! on `V` translate one-to-one into the growth certificate of `H`:
//! `<l, q> <= V` gives `H >= <(l/Λ, 0), z>`, `V(t,q) <= Φ(Λ²q) + γ(t)` gives
//! `H <= G(Λz) + γ` with `G(z) = Φ(z₁) + Φ*(z₂)`, and coercivity of `∫V`
//! gives coercivity of `∫H`.

mod potential;

pub use potential::{Potential, PotentialSpec, PowerPotential};

use crate::cg_constant::{cg_closed_form, estimate_cg_ratio, RatioOptions};
use crate::dual_action::{
    check_existence_hypotheses, DualActionProblem, EpsilonSchedule, GrowthCertificate, Hamiltonian, HamiltonianField,
    HypothesisOptions, HypothesisPolicy, HypothesisReport, OrbitSummary, ScalarProfile, SolveReport, VectorProfile,
};
use crate::dual_action::registry::{EpsilonSpec, SolverSpec};
use crate::error::{Error, Result};
use crate::gfunc::{GForm, GFunction, GFunctionSpec, PowerBlock};
use crate::linalg;
use crate::orlicz::{DerivativeRule, Trajectory};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Margin in the automatic choice `Λ = 0.9 / (T max{1, C_G(T)/2})`.
pub const LAMBDA_MARGIN: f64 = 0.9;

const DEFAULT_GRAD_TOL: f64 = 1e-8;

#[derive(Clone)]
pub struct PhiLaplacianProblem {
    pub phi: GFunction,
    pub potential: Arc<dyn Potential>,
    pub period: f64,
    pub big_lambda: f64,
    /// `C_G(1)` for `G(q, p) = Φ(q) + Φ*(p)`.
    pub cg: f64,
    /// Offset in `V(t,q) <= Φ(Λ²q) + γ(t)`; taken from the potential when absent.
    pub gamma: Option<ScalarProfile>,
    /// Slope in `<l(t), q> <= V(t,q)`; taken from the potential when absent.
    pub l: Option<VectorProfile>,
}

impl fmt::Debug for PhiLaplacianProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhiLaplacianProblem")
            .field("phi", &self.phi.describe())
            .field("potential", &self.potential.name())
            .field("T", &self.period)
            .field("Lambda", &self.big_lambda)
            .field("cg", &self.cg)
            .finish()
    }
}

/// `G(q, p) = Φ(q) + Φ*(p)`, kept as a power sum when `Φ` is one.
pub fn phi_g(phi: &GFunction) -> Result<GFunction> {
    let phi_star = phi.conjugate()?;
    match (phi.form(), phi_star.form()) {
        (GForm::PowerSum(a), GForm::PowerSum(b)) => GFunction::power_sum(a.iter().chain(b).copied().collect()),
        _ => GFunction::sum(vec![phi.clone(), phi_star]),
    }
}

fn single_block(phi: &GFunction) -> Option<PowerBlock> {
    match phi.form() {
        GForm::PowerSum(blocks) if blocks.len() == 1 => Some(blocks[0]),
        _ => None,
    }
}

/// `C_G(1)` for `G = Φ ⊕ Φ*`: closed form for `|x|^p/p` on the line and
/// for `|x|²/2` in any dimension, ratio minimisation otherwise.
pub fn phi_cg(phi: &GFunction) -> Result<f64> {
    if let Some(b) = single_block(phi) {
        let normalized = (b.a * b.p - 1.0).abs() < 1e-14;
        if normalized && (b.size == 1 || b.p == 2.0) {
            return cg_closed_form(b.p);
        }
    }
    let opts = RatioOptions { n: 128, restarts: 4, ..RatioOptions::default() };
    Ok(estimate_cg_ratio(&phi_g(phi)?, 1.0, &opts)?.value)
}

/// `Λ = 0.9 / (T max{1, C_G(T)/2})` with `C_G(T) = cg / T`.
pub fn automatic_lambda(period: f64, cg: f64) -> f64 {
    LAMBDA_MARGIN / (period * 1f64.max(cg / period / 2.0))
}

impl PhiLaplacianProblem {
    /// `C_G` and `Λ` are filled in automatically.
    pub fn new(phi: GFunction, potential: Arc<dyn Potential>, period: f64) -> Result<Self> {
        let cg = phi_cg(&phi)?;
        Self::new_with_cg(phi, potential, period, cg)
    }

    /// As [`new`](Self::new) with a known `C_G(1)`.
    pub fn new_with_cg(phi: GFunction, potential: Arc<dyn Potential>, period: f64, cg: f64) -> Result<Self> {
        Error::check_dim(phi.dim(), potential.dim())?;
        if !(period > 0.0) {
            return Err(Error::InvalidParameter(format!("period must be > 0, got {period}")));
        }
        Ok(Self { big_lambda: automatic_lambda(period, cg), phi, potential, period, cg, gamma: None, l: None })
    }

    pub fn with_lambda(mut self, big_lambda: f64) -> Result<Self> {
        if !(big_lambda > 0.0 && big_lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("Lambda must be > 0, got {big_lambda}")));
        }
        self.big_lambda = big_lambda;
        Ok(self)
    }

    pub fn with_cg(mut self, cg: f64) -> Self {
        self.cg = cg;
        self
    }

    pub fn with_certificate(mut self, gamma: ScalarProfile, l: VectorProfile) -> Self {
        self.gamma = Some(gamma);
        self.l = Some(l);
        self
    }

    pub fn dim(&self) -> usize {
        self.phi.dim()
    }

    fn certificate_profiles(&self) -> Result<(ScalarProfile, VectorProfile)> {
        let gamma = match &self.gamma {
            Some(g) => g.clone(),
            None => self.potential.upper_offset(&self.phi, self.big_lambda, self.period).ok_or_else(|| {
                Error::HypothesisFailure(format!(
                    "no gamma with V(t,q) <= Phi(Lambda^2 q) + gamma(t) is known for {} with Lambda = {}",
                    self.potential.name(),
                    self.big_lambda
                ))
            })??,
        };
        let l = match &self.l {
            Some(l) => l.clone(),
            None => self.potential.lower_slope(self.period).ok_or_else(|| {
                Error::HypothesisFailure(format!("no slope l with <l, q> <= V(t,q) is known for {}", self.potential.name()))
            })?,
        };
        Ok((gamma, l))
    }

    /// Growth certificate of the reduced Hamiltonian: `G = Φ ⊕ Φ*`, the
    /// same `Λ` and `γ`, and `ξ = (l/Λ, 0)`. No lower growth `G(λz) - β <= H`
    /// is claimed (`λ = 0`, `β = ∞`).
    pub fn certificate(&self) -> Result<GrowthCertificate> {
        let (gamma, l) = self.certificate_profiles()?;
        let n = self.dim();
        let inv = 1.0 / self.big_lambda;
        let xi: VectorProfile = Arc::new(move |t| {
            let mut x = linalg::scale(&l(t), inv);
            x.resize(2 * n, 0.0);
            x
        });
        Ok(GrowthCertificate {
            g: phi_g(&self.phi)?,
            lambda: 0.0,
            big_lambda: self.big_lambda,
            beta: Arc::new(|_| f64::INFINITY),
            gamma,
            xi,
        })
    }

    /// `H(t, z) = Φ*(Λz₂) + V(t, z₁/Λ)` on `R^{2N}`, carrying
    /// [`certificate`](Self::certificate) when one exists.
    pub fn to_hamiltonian(&self) -> Result<Hamiltonian> {
        let field = Arc::new(PhiLaplacianField {
            phi: self.phi.clone(),
            phi_star: self.phi.conjugate()?,
            potential: self.potential.clone(),
            big_lambda: self.big_lambda,
        });
        let h = Hamiltonian::new(field);
        match self.certificate() {
            Ok(c) => h.with_growth(c),
            Err(Error::HypothesisFailure(msg)) => {
                log::warn!("reduced Hamiltonian left uncertified: {msg}");
                Ok(h)
            }
            Err(e) => Err(e),
        }
    }

    /// (V₁)–(V₃) and the condition on `Λ`, checked as the equivalent
    /// hypotheses on the reduced Hamiltonian.
    pub fn check_hypotheses(&self, opts: &HypothesisOptions) -> Result<HypothesisReport> {
        self.certificate()?;
        check_existence_hypotheses(&self.to_hamiltonian()?, self.period, self.cg, opts)
    }

    /// The dual-action problem for the reduced Hamiltonian. The gradient
    /// tolerance is `1e-8`: for non-quadratic `Φ` the dual gradient carries
    /// noise from the conjugate solves at about that level.
    pub fn dual_problem(&self, n: usize) -> Result<DualActionProblem> {
        let mut p = DualActionProblem::new(self.to_hamiltonian()?, self.period, n).with_cg_star(self.cg);
        p.solver.grad_tol = DEFAULT_GRAD_TOL;
        Ok(p)
    }
}

#[derive(Debug, Clone)]
struct PhiLaplacianField {
    phi: GFunction,
    phi_star: GFunction,
    potential: Arc<dyn Potential>,
    big_lambda: f64,
}

impl PhiLaplacianField {
    fn split<'a>(&self, z: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        z.split_at(self.phi.dim())
    }
}

impl HamiltonianField for PhiLaplacianField {
    fn dim(&self) -> usize {
        2 * self.phi.dim()
    }

    fn value(&self, t: f64, z: &[f64]) -> Result<f64> {
        let (z1, z2) = self.split(z);
        let l = self.big_lambda;
        Ok(self.phi_star.evaluate(&linalg::scale(z2, l))? + self.potential.value(t, &linalg::scale(z1, 1.0 / l)))
    }

    fn gradient(&self, t: f64, z: &[f64]) -> Result<Vec<f64>> {
        let (z1, z2) = self.split(z);
        let l = self.big_lambda;
        let mut out = linalg::scale(&self.potential.gradient(t, &linalg::scale(z1, 1.0 / l)), 1.0 / l);
        out.extend(linalg::scale(&self.phi_star.gradient(&linalg::scale(z2, l))?, l));
        Ok(out)
    }

    fn hessian(&self, t: f64, z: &[f64]) -> Result<DMatrix<f64>> {
        let (z1, z2) = self.split(z);
        let (n, l) = (self.phi.dim(), self.big_lambda);
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        let hv = self.potential.hessian(t, &linalg::scale(z1, 1.0 / l)) / (l * l);
        let hp = self.phi_star.hessian(&linalg::scale(z2, l))? * (l * l);
        h.view_mut((0, 0), (n, n)).copy_from(&hv);
        h.view_mut((n, n), (n, n)).copy_from(&hp);
        Ok(h)
    }

    /// `H*(t, w) = V*(t, Λw₁) + Φ(w₂/Λ)`.
    fn conjugate(&self, t: f64, w: &[f64]) -> Option<Result<(f64, Vec<f64>)>> {
        let (w1, w2) = self.split(w);
        let l = self.big_lambda;
        let (v_star, arg) = self.potential.conjugate(t, &linalg::scale(w1, l))?;
        let y = linalg::scale(w2, 1.0 / l);
        Some((|| {
            let value = v_star + self.phi.evaluate(&y)?;
            let mut grad = linalg::scale(&arg, l);
            grad.extend(linalg::scale(&self.phi.gradient(&y)?, 1.0 / l));
            Ok((value, grad))
        })())
    }

    fn name(&self) -> String {
        format!("phi-laplacian[{}; {}; Lambda={}]", self.phi.describe(), self.potential.name(), self.big_lambda)
    }
}

#[derive(Debug, Clone)]
pub struct PhiLaplacianSolution {
    /// `q = z₁/Λ`.
    pub q: Trajectory,
    /// Hamiltonian orbit `z = (z₁, z₂)`.
    pub z: Trajectory,
    /// `max_k |D[∇Φ(q̇)]_k + ∇V(t_k, q_k)|` with the grid's derivative rule.
    pub residual: f64,
    /// `max_k |∇Φ(q̇_k) - Λz₂_k|`.
    pub momentum_residual: f64,
    pub report: SolveReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhiLaplacianSummary {
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub cg: f64,
    pub residual: f64,
    pub momentum_residual: f64,
    pub orbit: OrbitSummary,
    pub runs: Vec<OrbitSummary>,
}

impl PhiLaplacianSolution {
    pub fn summary(&self, problem: &PhiLaplacianProblem) -> PhiLaplacianSummary {
        PhiLaplacianSummary {
            big_lambda: problem.big_lambda,
            cg: problem.cg,
            residual: self.residual,
            momentum_residual: self.momentum_residual,
            orbit: self.report.orbit.summary(),
            runs: self.report.runs.iter().map(|r| r.summary()).collect(),
        }
    }
}

/// `max_k |D[∇Φ(q̇)]_k + ∇V(t_k, q_k)|`.
pub fn el_residual(phi: &GFunction, potential: &dyn Potential, q: &Trajectory) -> Result<f64> {
    let dq = q.derivative();
    let mut momentum = Vec::with_capacity(dq.values().len());
    for row in dq.rows() {
        momentum.extend(phi.gradient(row)?);
    }
    let dp = q.with_values(momentum)?.derivative();
    let mut worst: f64 = 0.0;
    for k in 0..q.n() {
        let r = linalg::add(dp.row(k), &potential.gradient(q.time(k), q.row(k)));
        worst = worst.max(linalg::norm(&r));
    }
    Ok(worst)
}

/// Solves the reduced Hamiltonian system with the dual action and checks
/// the recovered `q` against the second-order equation.
pub fn solve_phi_laplacian(problem: &PhiLaplacianProblem, dual: &DualActionProblem) -> Result<PhiLaplacianSolution> {
    let report = dual.minimize(None)?;
    let z = report.orbit.u.clone();
    let n = problem.dim();
    let inv = 1.0 / problem.big_lambda;
    let mut q_vals = Vec::with_capacity(z.n() * n);
    for row in z.rows() {
        q_vals.extend(linalg::scale(&row[..n], inv));
    }
    let q = Trajectory::new(z.period(), z.n(), n, q_vals)?.with_rule(dual.rule);
    let residual = el_residual(&problem.phi, problem.potential.as_ref(), &q)?;
    let dq = q.derivative();
    let mut momentum_residual: f64 = 0.0;
    for k in 0..q.n() {
        let p = problem.phi.gradient(dq.row(k))?;
        let z2 = linalg::scale(&z.row(k)[n..], problem.big_lambda);
        momentum_residual = momentum_residual.max(linalg::norm(&linalg::sub(&p, &z2)));
    }
    Ok(PhiLaplacianSolution { q, z, residual, momentum_residual, report })
}

/// JSON description of a Φ-Laplacian problem.
///
/// ```json
/// {"phi": {"form": {"kind": "power_sum", "blocks": [{"p": 3}]}},
///  "potential": {"kind": "power", "p": 3, "k": 0.25, "forcing": [1]},
///  "T": 1, "N": 256}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiLaplacianSpec {
    pub phi: GFunctionSpec,
    pub potential: PotentialSpec,
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default, rename = "Lambda", skip_serializing_if = "Option::is_none")]
    pub big_lambda: Option<f64>,
    /// `C_G(1)` for `Φ ⊕ Φ*`; computed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<EpsilonSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub rule: DerivativeRule,
    #[serde(default = "check_default")]
    pub check_hypotheses: bool,
}

fn check_default() -> bool {
    true
}

impl PhiLaplacianSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<(PhiLaplacianProblem, DualActionProblem)> {
        let phi = self.phi.build()?;
        let potential = self.potential.build(self.period)?;
        let mut p = match self.cg {
            Some(cg) => PhiLaplacianProblem::new_with_cg(phi, potential, self.period, cg)?,
            None => PhiLaplacianProblem::new(phi, potential, self.period)?,
        };
        if let Some(l) = self.big_lambda {
            p = p.with_lambda(l)?;
        }
        let mut dual = p.dual_problem(self.n)?.with_rule(self.rule);
        dual.solver = self.solver.apply(dual.solver);
        if let Some(e) = &self.epsilon {
            dual.schedule = match e {
                EpsilonSpec::Value(v) => EpsilonSchedule::Fixed { epsilon: *v },
                EpsilonSpec::Schedule(s) => *s,
            };
        }
        if !self.check_hypotheses {
            dual.policy = HypothesisPolicy::Waive;
        }
        Ok((p, dual))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn linear_instance() -> PhiLaplacianProblem {
        let v = Arc::new(PowerPotential::new(2.0, 0.5, vec![1.0, 0.0], vec![], 1.0).unwrap());
        PhiLaplacianProblem::new(GFunction::half_square(2), v, 1.0).unwrap()
    }

    #[test]
    fn automatic_lambda_for_quadratic_phi() {
        let p = linear_instance();
        assert!((p.cg - 1.0 / PI).abs() < 1e-15);
        assert!((p.big_lambda - 0.9).abs() < 1e-15);
    }

    #[test]
    fn reduced_hamiltonian_matches_definition() {
        let p = linear_instance().with_lambda(0.95).unwrap();
        let h = p.to_hamiltonian().unwrap();
        let (t, z) = (0.3, [0.4, -0.2, 1.1, 0.5]);
        let q = [0.4 / 0.95, -0.2 / 0.95];
        let c = (2.0 * PI * t).cos();
        let v = (q[0] * q[0] + q[1] * q[1]) / 4.0 + c * q[0];
        let expect = 0.95 * 0.95 * (1.1 * 1.1 + 0.5 * 0.5) / 2.0 + v;
        assert!((h.value(t, &z).unwrap() - expect).abs() < 1e-14);
        // closed-form conjugate agrees with the numerical one
        let w = [0.3, 0.7, -0.4, 0.2];
        let a = h.conjugate(t, &w, None).unwrap();
        let b = h.numerical_conjugate(t, &w, None).unwrap();
        assert!((a.value - b.value).abs() < 1e-9, "{} vs {}", a.value, b.value);
        assert!(linalg::norm(&linalg::sub(&a.argmax, &b.argmax)) < 1e-6);
    }

    #[test]
    fn hypotheses_hold_for_linear_instance() {
        let p = linear_instance();
        let rep = p.check_hypotheses(&HypothesisOptions::default()).unwrap();
        assert!(rep.pass, "{}", rep.summary());
    }

    #[test]
    fn linear_instance_matches_undetermined_coefficients() {
        // q'' + q/2 + cos(2πt) e₁ = 0 with q = c cos(2πt) e₁:
        // -4π² c + c/2 + 1 = 0
        let c = 1.0 / (4.0 * PI * PI - 0.5);
        let p = linear_instance();
        let sol = solve_phi_laplacian(&p, &p.dual_problem(64).unwrap()).unwrap();
        for k in 0..sol.q.n() {
            let t = sol.q.time(k);
            let row = sol.q.row(k);
            assert!((row[0] - c * (2.0 * PI * t).cos()).abs() < 1e-8);
            assert!(row[1].abs() < 1e-8);
        }
        assert!(sol.residual < 1e-6, "{}", sol.residual);
        assert!(sol.momentum_residual < 1e-7);
    }

    #[test]
    fn stationary_point_of_v_is_the_solution() {
        let v = Arc::new(PowerPotential::new(2.0, 0.25, vec![], vec![0.3, -0.2], 1.0).unwrap());
        let p = PhiLaplacianProblem::new(GFunction::half_square(2), v, 1.0).unwrap();
        let sol = solve_phi_laplacian(&p, &p.dual_problem(32).unwrap()).unwrap();
        for row in sol.q.rows() {
            assert!((row[0] - 0.3).abs() < 1e-7 && (row[1] + 0.2).abs() < 1e-7, "{row:?}");
        }
    }

    #[test]
    fn lambda_too_small_has_no_certificate() {
        // Λ⁴/2 < 1/4: V outgrows Φ(Λ²q)
        let p = linear_instance().with_lambda(0.8).unwrap();
        assert!(matches!(p.check_hypotheses(&HypothesisOptions::default()), Err(Error::HypothesisFailure(_))));
        assert!(p.to_hamiltonian().unwrap().growth().is_none());
    }

    #[test]
    fn lambda_too_large_fails_the_constant_condition() {
        let p = linear_instance().with_lambda(1.2).unwrap();
        let rep = p.check_hypotheses(&HypothesisOptions::default()).unwrap();
        assert!(!rep.h2_constant.pass);
    }
}
