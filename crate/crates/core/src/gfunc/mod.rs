//! Anisotropic G-functions and their Legendre–Fenchel conjugates.
//!
//! A [`GFunction`] is an even, convex, superlinear function `R^dim -> [0, ∞)`
//! vanishing only at the origin. Closed-form families ([`GForm::PowerSum`],
//! [`GForm::Quadratic`], [`GForm::LinearImage`], [`GForm::Sum`]) conjugate in
//! closed form; anything else is wrapped as [`GForm::Custom`] and conjugated
//! numerically by maximising `<u, v> - G(u)`.

mod properties;
mod solve;
mod spec;

pub use properties::{
    check_axioms, conjugate_gradient_bound, delta2_certificate, embedding_constant,
    growth_indices, semi_symplectic_certificate, symplectic_test, young_identity_residual,
    AxiomReport, ConjugateBoundReport, Delta2Certificate, GrowthIndices, GrowthSampleSpec,
    SemiSymplecticCertificate, SemiSymplecticSearch, SymplecticReport,
};
pub use solve::{maximize_conjugate, ConjugateOptions, ConjugatePoint, NumericalConjugate, Smooth};
pub use spec::{BlockSpec, FormSpec, GFunctionSpec};

use crate::error::{Error, Result};
use crate::linalg;
use nalgebra::DMatrix;
use std::fmt;
use std::sync::Arc;

/// Smallest block radius used when a Hessian is singular at the block origin.
const HESSIAN_FLOOR: f64 = 1e-150;

/// One block `a |x|^p` of a power sum, `x ∈ R^size` with the Euclidean norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBlock {
    pub p: f64,
    pub a: f64,
    pub size: usize,
}

impl PowerBlock {
    pub fn new(p: f64, a: f64, size: usize) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("power exponent must be > 1, got {p}")));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!("power weight must be > 0, got {a}")));
        }
        if size == 0 {
            return Err(Error::InvalidParameter("empty power block".into()));
        }
        Ok(Self { p, a, size })
    }

    /// `|x|^p / p`.
    pub fn normalized(p: f64, size: usize) -> Result<Self> {
        Self::new(p, 1.0 / p, size)
    }

    /// Conjugate block: `(a|·|^p)^* = b |·|^q` with `q = p/(p-1)` and
    /// `b = a (p-1) (a p)^{-q}`.
    pub fn conjugate(&self) -> Self {
        let q = self.p / (self.p - 1.0);
        let b = self.a * (self.p - 1.0) * (self.a * self.p).powf(-q);
        Self { p: q, a: b, size: self.size }
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.a * linalg::norm(x).powf(self.p)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let r = linalg::norm(x);
        if r == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let c = self.a * self.p * r.powf(self.p - 2.0);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = c * xi;
        }
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let r = linalg::norm(x);
        if r == 0.0 && self.p > 2.0 {
            return DMatrix::zeros(n, n);
        }
        let r_eff = r.max(HESSIAN_FLOOR);
        let c = self.a * self.p * r_eff.powf(self.p - 2.0);
        let mut h = DMatrix::identity(n, n) * c;
        if r > 0.0 {
            let k = c * (self.p - 2.0) / (r * r);
            for i in 0..n {
                for j in 0..n {
                    h[(i, j)] += k * x[i] * x[j];
                }
            }
        }
        h
    }
}

/// A convex function supplied through code rather than a closed form.
///
/// Implementations must be convex; the G-function axioms (evenness,
/// positivity, superlinearity) are checked by sampling, not assumed.
pub trait ConvexFunction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, u: &[f64]) -> Result<f64>;
    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>>;

    /// Defaults to central differences of the gradient.
    fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        fd_hessian(u, |x| self.gradient(x))
    }

    /// Closed-form conjugate, when the implementor knows one.
    fn conjugate(&self) -> Option<GFunction> {
        None
    }

    fn name(&self) -> String {
        "custom".into()
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// [`ConvexFunction`] built from closures.
#[derive(Clone)]
pub struct ClosureFunction {
    name: String,
    dim: usize,
    value: Arc<ValueFn>,
    gradient: Arc<GradFn>,
    conjugate: Option<GFunction>,
}

impl ClosureFunction {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            conjugate: None,
        }
    }

    pub fn with_conjugate(mut self, conj: GFunction) -> Self {
        self.conjugate = Some(conj);
        self
    }

    pub fn into_gfunction(self) -> GFunction {
        GFunction::custom(Arc::new(self))
    }
}

impl fmt::Debug for ClosureFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosureFunction")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish()
    }
}

impl ConvexFunction for ClosureFunction {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, u: &[f64]) -> Result<f64> {
        Ok((self.value)(u))
    }
    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok((self.gradient)(u))
    }
    fn conjugate(&self) -> Option<GFunction> {
        self.conjugate.clone()
    }
    fn name(&self) -> String {
        self.name.clone()
    }
}

#[derive(Debug, Clone)]
pub enum GForm {
    /// `Σ a_i |x_i|^{p_i}` over consecutive blocks.
    PowerSum(Vec<PowerBlock>),
    /// `(scale/2) uᵀ M u` with `M` symmetric positive definite.
    Quadratic { matrix: DMatrix<f64>, scale: f64 },
    /// `G(A u)` for an invertible `A`.
    LinearImage { inner: Box<GFunction>, matrix: DMatrix<f64> },
    /// `Σ G_i(u_i)` on a product split.
    Sum(Vec<GFunction>),
    Custom(Arc<dyn ConvexFunction>),
}

#[derive(Debug, Clone)]
pub struct GFunction {
    dim: usize,
    form: GForm,
}

impl GFunction {
    pub fn power_sum(blocks: Vec<PowerBlock>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidParameter("power sum needs at least one block".into()));
        }
        let dim = blocks.iter().map(|b| b.size).sum();
        Ok(Self { dim, form: GForm::PowerSum(blocks) })
    }

    /// `|u|^p / p` on `R^dim` (a single Euclidean block).
    pub fn power(p: f64, dim: usize) -> Result<Self> {
        Self::power_sum(vec![PowerBlock::normalized(p, dim)?])
    }

    /// `|u|² / 2` on `R^dim`.
    pub fn half_square(dim: usize) -> Self {
        Self::power(2.0, dim).expect("valid exponent")
    }

    /// `|u₁|^p/p + |u₂|^q/q` with `u₁, u₂ ∈ R^n` and `1/p + 1/q = 1`.
    ///
    /// This is the standard symplectic G-function on `R^{2n}`.
    pub fn symplectic_power(p: f64, n: usize) -> Result<Self> {
        let q = conjugate_exponent(p)?;
        Self::power_sum(vec![PowerBlock::normalized(p, n)?, PowerBlock::normalized(q, n)?])
    }

    pub fn quadratic(matrix: DMatrix<f64>, scale: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidParameter("quadratic form matrix must be square".into()));
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidParameter(format!("quadratic scale must be > 0, got {scale}")));
        }
        let sym_err = (&matrix - matrix.transpose()).abs().max();
        if sym_err > 1e-12 * (1.0 + matrix.abs().max()) {
            return Err(Error::InvalidParameter("quadratic form matrix must be symmetric".into()));
        }
        if matrix.clone().cholesky().is_none() {
            return Err(Error::InvalidParameter(
                "quadratic form matrix must be positive definite".into(),
            ));
        }
        Ok(Self { dim: matrix.nrows(), form: GForm::Quadratic { matrix, scale } })
    }

    pub fn linear_image(inner: GFunction, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != inner.dim || !matrix.is_square() {
            return Err(Error::DimensionMismatch { expected: inner.dim, got: matrix.nrows() });
        }
        if matrix.clone().try_inverse().is_none() {
            return Err(Error::InvalidParameter("linear image matrix must be invertible".into()));
        }
        Ok(Self { dim: inner.dim, form: GForm::LinearImage { inner: Box::new(inner), matrix } })
    }

    /// `u ↦ G(s u)`.
    pub fn scaled_argument(inner: GFunction, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::InvalidParameter(format!("argument scale must be > 0, got {s}")));
        }
        let d = inner.dim;
        Self::linear_image(inner, DMatrix::identity(d, d) * s)
    }

    pub fn sum(components: Vec<GFunction>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("sum needs at least one component".into()));
        }
        let dim = components.iter().map(|c| c.dim).sum();
        Ok(Self { dim, form: GForm::Sum(components) })
    }

    pub fn custom(f: Arc<dyn ConvexFunction>) -> Self {
        Self { dim: f.dim(), form: GForm::Custom(f) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn form(&self) -> &GForm {
        &self.form
    }

    /// True when [`conjugate`](Self::conjugate) returns a closed form.
    pub fn has_closed_form_conjugate(&self) -> bool {
        match &self.form {
            GForm::PowerSum(_) | GForm::Quadratic { .. } => true,
            GForm::LinearImage { inner, .. } => inner.has_closed_form_conjugate(),
            GForm::Sum(c) => c.iter().all(|g| g.has_closed_form_conjugate()),
            GForm::Custom(f) => f.conjugate().is_some(),
        }
    }

    /// Human-readable description used in reports.
    pub fn describe(&self) -> String {
        match &self.form {
            GForm::PowerSum(blocks) => {
                let parts: Vec<String> = blocks
                    .iter()
                    .map(|b| format!("{}|x|^{}[{}]", b.a, b.p, b.size))
                    .collect();
                format!("power_sum({})", parts.join(" + "))
            }
            GForm::Quadratic { scale, .. } => format!("quadratic(scale {scale})"),
            GForm::LinearImage { inner, .. } => format!("linear_image({})", inner.describe()),
            GForm::Sum(c) => {
                let parts: Vec<String> = c.iter().map(|g| g.describe()).collect();
                format!("sum({})", parts.join(", "))
            }
            GForm::Custom(f) => f.name(),
        }
    }

    pub fn evaluate(&self, u: &[f64]) -> Result<f64> {
        Error::check_dim(self.dim, u.len())?;
        match &self.form {
            GForm::PowerSum(blocks) => {
                let mut off = 0;
                let mut s = 0.0;
                for b in blocks {
                    s += b.value(&u[off..off + b.size]);
                    off += b.size;
                }
                Ok(s)
            }
            GForm::Quadratic { matrix, scale } => {
                Ok(0.5 * scale * linalg::dot(u, &linalg::mat_vec(matrix, u)))
            }
            GForm::LinearImage { inner, matrix } => inner.evaluate(&linalg::mat_vec(matrix, u)),
            GForm::Sum(components) => {
                let mut off = 0;
                let mut s = 0.0;
                for c in components {
                    s += c.evaluate(&u[off..off + c.dim])?;
                    off += c.dim;
                }
                Ok(s)
            }
            GForm::Custom(f) => f.value(u),
        }
    }

    /// `∇G(u)`. For power blocks with `p < 2` the gradient at the block
    /// origin is the minimal-norm subgradient `0`.
    pub fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.dim, u.len())?;
        match &self.form {
            GForm::PowerSum(blocks) => {
                let mut out = vec![0.0; self.dim];
                let mut off = 0;
                for b in blocks {
                    b.gradient(&u[off..off + b.size], &mut out[off..off + b.size]);
                    off += b.size;
                }
                Ok(out)
            }
            GForm::Quadratic { matrix, scale } => Ok(linalg::scale(&linalg::mat_vec(matrix, u), *scale)),
            GForm::LinearImage { inner, matrix } => {
                let g = inner.gradient(&linalg::mat_vec(matrix, u))?;
                Ok(linalg::mat_t_vec(matrix, &g))
            }
            GForm::Sum(components) => {
                let mut out = Vec::with_capacity(self.dim);
                let mut off = 0;
                for c in components {
                    out.extend(c.gradient(&u[off..off + c.dim])?);
                    off += c.dim;
                }
                Ok(out)
            }
            GForm::Custom(f) => f.gradient(u),
        }
    }

    pub fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        Error::check_dim(self.dim, u.len())?;
        match &self.form {
            GForm::PowerSum(blocks) => {
                let mut h = DMatrix::zeros(self.dim, self.dim);
                let mut off = 0;
                for b in blocks {
                    let hb = b.hessian(&u[off..off + b.size]);
                    h.view_mut((off, off), (b.size, b.size)).copy_from(&hb);
                    off += b.size;
                }
                Ok(h)
            }
            GForm::Quadratic { matrix, scale } => Ok(matrix * *scale),
            GForm::LinearImage { inner, matrix } => {
                let hi = inner.hessian(&linalg::mat_vec(matrix, u))?;
                Ok(matrix.transpose() * hi * matrix)
            }
            GForm::Sum(components) => {
                let mut h = DMatrix::zeros(self.dim, self.dim);
                let mut off = 0;
                for c in components {
                    let hc = c.hessian(&u[off..off + c.dim])?;
                    h.view_mut((off, off), (c.dim, c.dim)).copy_from(&hc);
                    off += c.dim;
                }
                Ok(h)
            }
            GForm::Custom(f) => f.hessian(u),
        }
    }

    /// Legendre–Fenchel conjugate `G*(v) = sup_u <u,v> - G(u)`.
    ///
    /// Closed forms are used whenever the form admits one; otherwise the
    /// result evaluates the supremum numerically with default options.
    pub fn conjugate(&self) -> Result<GFunction> {
        self.conjugate_with(ConjugateOptions::default())
    }

    pub fn conjugate_with(&self, opts: ConjugateOptions) -> Result<GFunction> {
        match &self.form {
            GForm::PowerSum(blocks) => {
                GFunction::power_sum(blocks.iter().map(PowerBlock::conjugate).collect())
            }
            GForm::Quadratic { matrix, scale } => {
                let inv = matrix.clone().try_inverse().ok_or_else(|| {
                    Error::InvalidParameter("quadratic form matrix is singular".into())
                })?;
                let inv = (&inv + inv.transpose()) * 0.5;
                Ok(GFunction { dim: self.dim, form: GForm::Quadratic { matrix: inv, scale: 1.0 / scale } })
            }
            GForm::LinearImage { inner, matrix } => {
                // (G∘A)^* = G^* ∘ A^{-T}
                let inv_t = matrix
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| Error::InvalidParameter("linear image matrix is singular".into()))?
                    .transpose();
                GFunction::linear_image(inner.conjugate_with(opts)?, inv_t)
            }
            GForm::Sum(components) => GFunction::sum(
                components
                    .iter()
                    .map(|c| c.conjugate_with(opts))
                    .collect::<Result<Vec<_>>>()?,
            ),
            GForm::Custom(f) => match f.conjugate() {
                Some(c) => Ok(c),
                None => Ok(self.numerical_conjugate(opts)),
            },
        }
    }

    /// Conjugate evaluated by inner maximisation, regardless of form.
    pub fn numerical_conjugate(&self, opts: ConjugateOptions) -> GFunction {
        GFunction::custom(Arc::new(NumericalConjugate::new(self.clone(), opts)))
    }
}

impl Smooth for GFunction {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, u: &[f64]) -> Result<f64> {
        self.evaluate(u)
    }
    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        GFunction::gradient(self, u)
    }
    fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        GFunction::hessian(self, u)
    }
}

/// `q = p / (p - 1)`.
pub fn conjugate_exponent(p: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("exponent must be > 1, got {p}")));
    }
    Ok(p / (p - 1.0))
}

/// Central-difference Hessian from a gradient oracle, symmetrised.
pub fn fd_hessian(u: &[f64], grad: impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<DMatrix<f64>> {
    let n = u.len();
    let mut h = DMatrix::zeros(n, n);
    let mut x = u.to_vec();
    for j in 0..n {
        let step = 1e-5 * (1.0 + u[j].abs());
        x[j] = u[j] + step;
        let gp = grad(&x)?;
        x[j] = u[j] - step;
        let gm = grad(&x)?;
        x[j] = u[j];
        for i in 0..n {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    Ok((&h + h.transpose()) * 0.5)
}
