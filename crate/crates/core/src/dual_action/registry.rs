//! Closed-form Hamiltonians addressable from JSON, each with its growth
//! certificate.
//!
//! ```json
//! {"hamiltonian": {"kind": "quadratic_forced", "amplitude": 1.0},
//!  "T": 1.0, "N": 128, "epsilon": 1e-3, "solver": {"grad_tol": 1e-10}}
//! ```

use super::hamiltonian::{constant_profile, Forced, GField, GrowthCertificate, Hamiltonian, VectorProfile};
use super::problem::{DualActionProblem, EpsilonSchedule, HypothesisPolicy};
use crate::error::{Error, Result};
use crate::gfunc::{conjugate_exponent, GFunction, GFunctionSpec, PowerBlock};
use crate::linalg;
use crate::optim::LbfgsOptions;
use crate::orlicz::DerivativeRule;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianSpec {
    /// `|u|²/2 + a <e(t), u>` with `e(t) = (cos 2πt/T, sin 2πt/T)`.
    QuadraticForced {
        #[serde(default = "unit")]
        amplitude: f64,
        #[serde(default = "default_big_lambda", rename = "Lambda")]
        big_lambda: f64,
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    /// `G(Λu)`.
    ScaledG {
        g: GFunctionSpec,
        #[serde(rename = "Lambda")]
        big_lambda: f64,
    },
    /// `κa/p |u₁|^p + a^{q-1}/q |u₂|^q + <l/a, u₁>`.
    TianGe {
        p: f64,
        a: f64,
        #[serde(default = "half")]
        kappa: f64,
        #[serde(default)]
        forcing: Vec<f64>,
        #[serde(default = "one")]
        n: usize,
    },
    /// `<c, u>`: bounded above by a G-function but not coercive.
    Linear { c: Vec<f64> },
}

fn unit() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn one() -> usize {
    1
}
fn default_big_lambda() -> f64 {
    1.5
}
fn default_lambda() -> f64 {
    0.5
}

impl HamiltonianSpec {
    pub fn build(&self, period: f64) -> Result<Hamiltonian> {
        match self {
            HamiltonianSpec::QuadraticForced { amplitude, big_lambda, lambda } => {
                quadratic_forced(*amplitude, period, *lambda, *big_lambda)
            }
            HamiltonianSpec::ScaledG { g, big_lambda } => scaled_g(g.build()?, *big_lambda),
            HamiltonianSpec::TianGe { p, a, kappa, forcing, n } => {
                let l = if forcing.is_empty() { vec![0.0; *n] } else { forcing.clone() };
                tian_ge(*p, *a, *kappa, &l, *n)
            }
            HamiltonianSpec::Linear { c } => linear(c),
        }
    }
}

/// Forcing direction `(cos 2πt/T, sin 2πt/T)`.
pub fn rotating_forcing(amplitude: f64, period: f64) -> VectorProfile {
    Arc::new(move |t| {
        let w = 2.0 * PI * t / period;
        vec![amplitude * w.cos(), amplitude * w.sin()]
    })
}

/// `|u|²/2 + a <e(t), u>` on `R²` with certificate `G = |u|²/2`,
/// `λ < 1 < Λ`, `β = a²/(2(1-λ²))`, `γ = a²/(2(Λ²-1))`, `ξ = a e`.
pub fn quadratic_forced(amplitude: f64, period: f64, lambda: f64, big_lambda: f64) -> Result<Hamiltonian> {
    if !(0.0 < lambda && lambda < 1.0 && big_lambda > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "quadratic_forced needs 0 < lambda < 1 < Lambda, got {lambda}, {big_lambda}"
        )));
    }
    let g = GFunction::half_square(2);
    let forcing = rotating_forcing(amplitude, period);
    let field = Forced::new(Arc::new(GField::new(g.clone(), 1.0)?), forcing.clone());
    let a2 = amplitude * amplitude;
    Hamiltonian::new(Arc::new(field)).with_growth(GrowthCertificate {
        g,
        lambda,
        big_lambda,
        beta: constant_profile(a2 / (2.0 * (1.0 - lambda * lambda))),
        gamma: constant_profile(a2 / (2.0 * (big_lambda * big_lambda - 1.0))),
        xi: forcing,
    })
}

/// `G(Λu)` with `λ = Λ/2`, `β = γ = 0`, `ξ = 0`.
pub fn scaled_g(g: GFunction, big_lambda: f64) -> Result<Hamiltonian> {
    let dim = g.dim();
    Hamiltonian::new(Arc::new(GField::new(g.clone(), big_lambda)?)).with_growth(GrowthCertificate {
        g,
        lambda: big_lambda / 2.0,
        big_lambda,
        beta: constant_profile(0.0),
        gamma: constant_profile(0.0),
        xi: Arc::new(move |_| vec![0.0; dim]),
    })
}

/// The two-exponent family `κa/p |u₁|^p + a^{q-1}/q |u₂|^q + <l/a, u₁>`
/// on `R^{2n}`, certified by `G(u) = |u₁|^p/p + |u₂|^q/q` with `Λ = a^{1/p}`,
/// `γ = ((1-κ)a)^{1-q} |l/a|^q / q`, `λ^p <= κa/2`, `λ^q <= a^{q-1}`,
/// `β = (κa/2)^{1-q} |l/a|^q / q` and `ξ = (l/a, 0)`.
pub fn tian_ge(p: f64, a: f64, kappa: f64, l: &[f64], n: usize) -> Result<Hamiltonian> {
    let q = conjugate_exponent(p)?;
    if !(a > 0.0 && 0.0 < kappa && kappa < 1.0) {
        return Err(Error::InvalidParameter(format!("need a > 0 and 0 < kappa < 1, got {a}, {kappa}")));
    }
    Error::check_dim(n, l.len())?;
    let h_g = GFunction::power_sum(vec![
        PowerBlock::new(p, kappa * a / p, n)?,
        PowerBlock::new(q, a.powf(q - 1.0) / q, n)?,
    ])?;
    let xi_vec: Vec<f64> = l.iter().map(|x| x / a).chain(std::iter::repeat_n(0.0, n)).collect();
    let xi_c = xi_vec.clone();
    let xi: VectorProfile = Arc::new(move |_| xi_c.clone());
    let field = Forced::new(Arc::new(GField::new(h_g, 1.0)?), xi.clone());
    let la_q = linalg::norm(&xi_vec).powf(q) / q;
    let lambda = (kappa * a / 2.0).powf(1.0 / p).min(a.powf((q - 1.0) / q));
    Hamiltonian::new(Arc::new(field)).with_growth(GrowthCertificate {
        g: GFunction::symplectic_power(p, n)?,
        lambda,
        big_lambda: a.powf(1.0 / p),
        beta: constant_profile((kappa * a / 2.0).powf(1.0 - q) * la_q),
        gamma: constant_profile(((1.0 - kappa) * a).powf(1.0 - q) * la_q),
        xi,
    })
}

/// `<c, u>` with the certificate `G = |u|²/2`, `Λ = 1/2`, `γ = 2|c|²`,
/// `ξ = c`. The lower growth bound cannot hold.
pub fn linear(c: &[f64]) -> Result<Hamiltonian> {
    let dim = c.len();
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::InvalidParameter("linear Hamiltonian needs an even, nonzero dimension".into()));
    }
    let cv = c.to_vec();
    let c2 = linalg::dot(c, c);
    let (cv1, cv2) = (cv.clone(), cv.clone());
    let field = super::hamiltonian::ClosureField::new(
        "linear",
        dim,
        move |_, u| linalg::dot(&cv1, u),
        move |_, _| cv2.clone(),
    );
    Hamiltonian::new(Arc::new(field)).with_growth(GrowthCertificate {
        g: GFunction::half_square(dim),
        lambda: 0.25,
        big_lambda: 0.5,
        beta: constant_profile(0.0),
        gamma: constant_profile(2.0 * c2),
        xi: Arc::new(move |_| cv.clone()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsilonSpec {
    Value(f64),
    Schedule(EpsilonSchedule),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub grad_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub memory: Option<usize>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

impl SolverSpec {
    pub fn apply(&self, mut o: LbfgsOptions) -> LbfgsOptions {
        if let Some(v) = self.grad_tol {
            o.grad_tol = v;
        }
        if let Some(v) = self.max_iter {
            o.max_iter = v;
        }
        if let Some(v) = self.memory {
            o.memory = v;
        }
        if let Some(v) = self.c1 {
            o.c1 = v;
        }
        if let Some(v) = self.c2 {
            o.c2 = v;
        }
        o
    }
}

/// JSON problem description for [`DualActionProblem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub hamiltonian: HamiltonianSpec,
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<EpsilonSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    /// `C_{G*}(1)`; defaults to 2, the bound valid for every symplectic `G`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cg_star: Option<f64>,
    #[serde(default)]
    pub rule: DerivativeRule,
    #[serde(default = "check_default")]
    pub check_hypotheses: bool,
}

fn check_default() -> bool {
    true
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<DualActionProblem> {
        let h = self.hamiltonian.build(self.period)?;
        let mut p = DualActionProblem::new(h, self.period, self.n).with_rule(self.rule);
        p.solver = self.solver.apply(p.solver);
        if let Some(e) = &self.epsilon {
            p.schedule = match e {
                EpsilonSpec::Value(v) => EpsilonSchedule::Fixed { epsilon: *v },
                EpsilonSpec::Schedule(s) => *s,
            };
        }
        p.cg_star = Some(self.cg_star.unwrap_or(2.0));
        if !self.check_hypotheses {
            p.policy = HypothesisPolicy::Waive;
        }
        Ok(p)
    }
}
