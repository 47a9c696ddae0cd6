//! Time-dependent convex Hamiltonians and their growth certificates.

use crate::error::{Error, Result};
use crate::gfunc::{fd_hessian, maximize_conjugate, ConjugateOptions, ConjugatePoint, GFunction, Smooth};
use crate::linalg;
use nalgebra::DMatrix;
use std::fmt;
use std::sync::Arc;

pub type ScalarProfile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type VectorProfile = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

pub fn constant_profile(c: f64) -> ScalarProfile {
    Arc::new(move |_| c)
}

pub fn zero_vector_profile(dim: usize) -> VectorProfile {
    Arc::new(move |_| vec![0.0; dim])
}

/// `H(t, u)`, convex in `u` for every `t`.
pub trait HamiltonianField: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, t: f64, u: &[f64]) -> Result<f64>;
    fn gradient(&self, t: f64, u: &[f64]) -> Result<Vec<f64>>;

    fn hessian(&self, t: f64, u: &[f64]) -> Result<DMatrix<f64>> {
        fd_hessian(u, |x| self.gradient(t, x))
    }

    /// Closed-form `(H*(t, v), ∇H*(t, v))` when known.
    fn conjugate(&self, _t: f64, _v: &[f64]) -> Option<Result<(f64, Vec<f64>)>> {
        None
    }

    fn name(&self) -> String;
}

/// Growth data `G(λu) - β(t) <= H(t,u) <= G(Λu) + γ(t)` and the slope
/// `ξ` of the affine minorant `H(t,u) >= <ξ(t), u>`.
#[derive(Clone)]
pub struct GrowthCertificate {
    pub g: GFunction,
    pub lambda: f64,
    pub big_lambda: f64,
    pub beta: ScalarProfile,
    pub gamma: ScalarProfile,
    pub xi: VectorProfile,
}

impl fmt::Debug for GrowthCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GrowthCertificate")
            .field("g", &self.g.describe())
            .field("lambda", &self.lambda)
            .field("Lambda", &self.big_lambda)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct Hamiltonian {
    field: Arc<dyn HamiltonianField>,
    growth: Option<GrowthCertificate>,
    conj_opts: ConjugateOptions,
}

impl Hamiltonian {
    pub fn new(field: Arc<dyn HamiltonianField>) -> Self {
        Self { field, growth: None, conj_opts: ConjugateOptions::default() }
    }

    pub fn with_growth(mut self, growth: GrowthCertificate) -> Result<Self> {
        Error::check_dim(self.dim(), growth.g.dim())?;
        self.growth = Some(growth);
        Ok(self)
    }

    pub fn with_conjugate_options(mut self, opts: ConjugateOptions) -> Self {
        self.conj_opts = opts;
        self
    }

    pub fn field(&self) -> &Arc<dyn HamiltonianField> {
        &self.field
    }

    pub fn growth(&self) -> Option<&GrowthCertificate> {
        self.growth.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn name(&self) -> String {
        self.field.name()
    }

    pub fn value(&self, t: f64, u: &[f64]) -> Result<f64> {
        Error::check_dim(self.dim(), u.len())?;
        self.field.value(t, u)
    }

    pub fn gradient(&self, t: f64, u: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.dim(), u.len())?;
        self.field.gradient(t, u)
    }

    /// `sup_u <u, v> - H(t, u)` and its maximiser `∇H*(t, v)`.
    pub fn conjugate(&self, t: f64, v: &[f64], warm: Option<&[f64]>) -> Result<ConjugatePoint> {
        Error::check_dim(self.dim(), v.len())?;
        if let Some(res) = self.field.conjugate(t, v) {
            let (value, argmax) = res.map_err(|e| at_time(t, e))?;
            return Ok(ConjugatePoint { value, argmax, iterations: 0, residual: 0.0 });
        }
        let slice = AtTime { field: self.field.as_ref(), t };
        maximize_conjugate(&slice, v, warm, &self.conj_opts).map_err(|e| at_time(t, e))
    }

    /// Same as [`conjugate`](Self::conjugate) but always numeric.
    pub fn numerical_conjugate(&self, t: f64, v: &[f64], warm: Option<&[f64]>) -> Result<ConjugatePoint> {
        let slice = AtTime { field: self.field.as_ref(), t };
        maximize_conjugate(&slice, v, warm, &self.conj_opts).map_err(|e| at_time(t, e))
    }
}

fn at_time(t: f64, e: Error) -> Error {
    Error::ConjugateAtTime { t, source: Box::new(e) }
}

struct AtTime<'a> {
    field: &'a dyn HamiltonianField,
    t: f64,
}

impl Smooth for AtTime<'_> {
    fn dim(&self) -> usize {
        self.field.dim()
    }
    fn value(&self, u: &[f64]) -> Result<f64> {
        self.field.value(self.t, u)
    }
    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.field.gradient(self.t, u)
    }
    fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        self.field.hessian(self.t, u)
    }
}

/// Autonomous `H(u) = G(Λu)`.
#[derive(Debug, Clone)]
pub struct GField {
    g: GFunction,
    g_star: Option<GFunction>,
    scale: f64,
}

impl GField {
    pub fn new(g: GFunction, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidParameter(format!("scale must be > 0, got {scale}")));
        }
        let g_star = if g.has_closed_form_conjugate() { Some(g.conjugate()?) } else { None };
        Ok(Self { g, g_star, scale })
    }
}

impl HamiltonianField for GField {
    fn dim(&self) -> usize {
        self.g.dim()
    }
    fn value(&self, _t: f64, u: &[f64]) -> Result<f64> {
        self.g.evaluate(&linalg::scale(u, self.scale))
    }
    fn gradient(&self, _t: f64, u: &[f64]) -> Result<Vec<f64>> {
        Ok(linalg::scale(&self.g.gradient(&linalg::scale(u, self.scale))?, self.scale))
    }
    fn hessian(&self, _t: f64, u: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.g.hessian(&linalg::scale(u, self.scale))? * (self.scale * self.scale))
    }
    /// `H*(v) = G*(v/Λ)`, `∇H*(v) = ∇G*(v/Λ)/Λ`.
    fn conjugate(&self, _t: f64, v: &[f64]) -> Option<Result<(f64, Vec<f64>)>> {
        let gs = self.g_star.as_ref()?;
        let w = linalg::scale(v, 1.0 / self.scale);
        Some((|| Ok((gs.evaluate(&w)?, linalg::scale(&gs.gradient(&w)?, 1.0 / self.scale))))())
    }
    fn name(&self) -> String {
        format!("{}(Λ={})", self.g.describe(), self.scale)
    }
}

/// `H(t, u) + <e(t), u>`.
#[derive(Clone)]
pub struct Forced {
    base: Arc<dyn HamiltonianField>,
    forcing: VectorProfile,
}

impl Forced {
    pub fn new(base: Arc<dyn HamiltonianField>, forcing: VectorProfile) -> Self {
        Self { base, forcing }
    }
}

impl fmt::Debug for Forced {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Forced").field("base", &self.base).finish()
    }
}

impl HamiltonianField for Forced {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn value(&self, t: f64, u: &[f64]) -> Result<f64> {
        Ok(self.base.value(t, u)? + linalg::dot(&(self.forcing)(t), u))
    }
    fn gradient(&self, t: f64, u: &[f64]) -> Result<Vec<f64>> {
        Ok(linalg::add(&self.base.gradient(t, u)?, &(self.forcing)(t)))
    }
    fn hessian(&self, t: f64, u: &[f64]) -> Result<DMatrix<f64>> {
        self.base.hessian(t, u)
    }
    /// `(H + <e,·>)*(v) = H*(v - e)` with the same maximiser.
    fn conjugate(&self, t: f64, v: &[f64]) -> Option<Result<(f64, Vec<f64>)>> {
        self.base.conjugate(t, &linalg::sub(v, &(self.forcing)(t)))
    }
    fn name(&self) -> String {
        format!("{} + <e(t), u>", self.base.name())
    }
}

/// `H(t, u) + G(εu)`.
#[derive(Debug, Clone)]
pub struct Perturbed {
    base: Arc<dyn HamiltonianField>,
    g: GFunction,
    epsilon: f64,
}

impl HamiltonianField for Perturbed {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn value(&self, t: f64, u: &[f64]) -> Result<f64> {
        Ok(self.base.value(t, u)? + self.g.evaluate(&linalg::scale(u, self.epsilon))?)
    }
    fn gradient(&self, t: f64, u: &[f64]) -> Result<Vec<f64>> {
        let ge = self.g.gradient(&linalg::scale(u, self.epsilon))?;
        Ok(linalg::add(&self.base.gradient(t, u)?, &linalg::scale(&ge, self.epsilon)))
    }
    fn hessian(&self, t: f64, u: &[f64]) -> Result<DMatrix<f64>> {
        let he = self.g.hessian(&linalg::scale(u, self.epsilon))? * (self.epsilon * self.epsilon);
        Ok(self.base.hessian(t, u)? + he)
    }
    fn conjugate(&self, t: f64, v: &[f64]) -> Option<Result<(f64, Vec<f64>)>> {
        if self.epsilon == 0.0 {
            self.base.conjugate(t, v)
        } else {
            None
        }
    }
    fn name(&self) -> String {
        format!("{} + G(εu), ε={}", self.base.name(), self.epsilon)
    }
}

type ClosureValue = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;
type ClosureGrad = dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync;

/// Field given by closures; the conjugate is computed numerically.
#[derive(Clone)]
pub struct ClosureField {
    name: String,
    dim: usize,
    value: Arc<ClosureValue>,
    gradient: Arc<ClosureGrad>,
}

impl ClosureField {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        value: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), dim, value: Arc::new(value), gradient: Arc::new(gradient) }
    }
}

impl fmt::Debug for ClosureField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosureField").field("name", &self.name).finish()
    }
}

impl HamiltonianField for ClosureField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, t: f64, u: &[f64]) -> Result<f64> {
        Ok((self.value)(t, u))
    }
    fn gradient(&self, t: f64, u: &[f64]) -> Result<Vec<f64>> {
        Ok((self.gradient)(t, u))
    }
    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Auxiliary constant `r` of the perturbation argument.
pub const PERTURBATION_R: f64 = 0.5;

/// `H_ε(t, u) = H(t, u) + G(εu)`.
///
/// The growth certificate is widened to
/// `G((1-r)εu) - G*(ξ(t)/(rε)) <= H_ε <= G((1+r)Λu) + γ(t)` with
/// `r =` [`PERTURBATION_R`], which is valid when `ε < rΛ`.
pub fn perturbed_hamiltonian(h: &Hamiltonian, g: &GFunction, epsilon: f64) -> Result<Hamiltonian> {
    Error::check_dim(h.dim(), g.dim())?;
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if epsilon == 0.0 {
        return Ok(h.clone());
    }
    let field = Arc::new(Perturbed { base: h.field.clone(), g: g.clone(), epsilon });
    let growth = match &h.growth {
        Some(c) => {
            let r = PERTURBATION_R;
            let g_star = c.g.conjugate()?;
            let xi = c.xi.clone();
            let s = 1.0 / (r * epsilon);
            let beta: ScalarProfile =
                Arc::new(move |t| g_star.evaluate(&linalg::scale(&xi(t), s)).unwrap_or(f64::INFINITY));
            Some(GrowthCertificate {
                g: c.g.clone(),
                lambda: (1.0 - r) * epsilon,
                big_lambda: (1.0 + r) * c.big_lambda,
                beta,
                gamma: c.gamma.clone(),
                xi: c.xi.clone(),
            })
        }
        None => None,
    };
    Ok(Hamiltonian { field, growth, conj_opts: h.conj_opts })
}
