//! Convex potentials `V(t, q)`.

use crate::dual_action::{ScalarProfile, VectorProfile};
use crate::error::{Error, Result};
use crate::gfunc::{conjugate_exponent, fd_hessian, GForm, GFunction};
use crate::linalg;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// `V(t, q)`, convex and `C¹` in `q`.
pub trait Potential: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, t: f64, q: &[f64]) -> f64;
    fn gradient(&self, t: f64, q: &[f64]) -> Vec<f64>;
    fn name(&self) -> String;

    fn hessian(&self, t: f64, q: &[f64]) -> DMatrix<f64> {
        fd_hessian(q, |x| Ok(self.gradient(t, x))).expect("gradient is infallible")
    }

    /// `(V*(t, y), ∇V*(t, y))` when known in closed form.
    fn conjugate(&self, _t: f64, _y: &[f64]) -> Option<(f64, Vec<f64>)> {
        None
    }

    /// `l` with `<l(t), q> <= V(t, q)`.
    fn lower_slope(&self, _period: f64) -> Option<VectorProfile> {
        None
    }

    /// `γ` with `V(t, q) <= Φ(Λ²q) + γ(t)`. `Some(Err)` when no finite `γ`
    /// exists for this `Φ` and `Λ`.
    fn upper_offset(&self, _phi: &GFunction, _big_lambda: f64, _period: f64) -> Option<Result<ScalarProfile>> {
        None
    }
}

/// `V(t, q) = k|q - q*|^p / p + <f(t), q>` with `f(t) = cos(2πt/T) f`, or
/// with `f` rotated by `2πt/T` in each coordinate pair when `rotating`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerPotential {
    pub p: f64,
    pub k: f64,
    pub forcing: Vec<f64>,
    pub shift: Vec<f64>,
    pub period: f64,
    pub rotating: bool,
}

impl PowerPotential {
    /// Empty `forcing` or `shift` means zero; otherwise the lengths fix the
    /// dimension and must agree.
    pub fn new(p: f64, k: f64, forcing: Vec<f64>, shift: Vec<f64>, period: f64) -> Result<Self> {
        conjugate_exponent(p)?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidParameter(format!("potential weight must be > 0, got {k}")));
        }
        if !(period > 0.0) {
            return Err(Error::InvalidParameter(format!("period must be > 0, got {period}")));
        }
        let dim = forcing.len().max(shift.len());
        if dim == 0 {
            return Err(Error::InvalidParameter("potential needs a forcing or shift vector to fix the dimension".into()));
        }
        let pad = |mut v: Vec<f64>| -> Result<Vec<f64>> {
            if v.is_empty() {
                v = vec![0.0; dim];
            }
            Error::check_dim(dim, v.len())?;
            Ok(v)
        };
        Ok(Self { p, k, forcing: pad(forcing)?, shift: pad(shift)?, period, rotating: false })
    }

    /// Rotating forcing; the dimension must be even.
    pub fn rotating(mut self) -> Result<Self> {
        if self.forcing.len() % 2 != 0 {
            return Err(Error::InvalidParameter("rotating forcing needs an even dimension".into()));
        }
        self.rotating = true;
        Ok(self)
    }

    pub fn force(&self, t: f64) -> Vec<f64> {
        let (s, c) = (2.0 * PI * t / self.period).sin_cos();
        if !self.rotating {
            return linalg::scale(&self.forcing, c);
        }
        self.forcing.chunks_exact(2).flat_map(|f| [c * f[0] - s * f[1], s * f[0] + c * f[1]]).collect()
    }

    fn has_shift(&self) -> bool {
        self.shift.iter().any(|&s| s != 0.0)
    }
}

impl Potential for PowerPotential {
    fn dim(&self) -> usize {
        self.forcing.len()
    }

    fn value(&self, t: f64, q: &[f64]) -> f64 {
        let d = linalg::sub(q, &self.shift);
        self.k * linalg::norm(&d).powf(self.p) / self.p + linalg::dot(&self.force(t), q)
    }

    fn gradient(&self, t: f64, q: &[f64]) -> Vec<f64> {
        let d = linalg::sub(q, &self.shift);
        let r = linalg::norm(&d);
        let s = if r > 0.0 { self.k * r.powf(self.p - 2.0) } else { 0.0 };
        linalg::add(&linalg::scale(&d, s), &self.force(t))
    }

    /// `k|d|^{p-2} (I + (p-2) d dᵀ/|d|²)` with `d = q - q*`.
    fn hessian(&self, _t: f64, q: &[f64]) -> DMatrix<f64> {
        let d = DVector::from_vec(linalg::sub(q, &self.shift));
        let r = d.norm().max(1e-150);
        let n = d.len();
        let outer = &d * d.transpose() / (r * r);
        (DMatrix::identity(n, n) + outer * (self.p - 2.0)) * (self.k * r.powf(self.p - 2.0))
    }

    fn name(&self) -> String {
        format!("power-potential(p={}, k={})", self.p, self.k)
    }

    /// `V*(y) = <y - f, q*> + k^{1-q}|y - f|^q / q`.
    fn conjugate(&self, t: f64, y: &[f64]) -> Option<(f64, Vec<f64>)> {
        let q = self.p / (self.p - 1.0);
        let e = linalg::sub(y, &self.force(t));
        let r = linalg::norm(&e);
        let c = self.k.powf(1.0 - q);
        let value = linalg::dot(&e, &self.shift) + c * r.powf(q) / q;
        let s = if r > 0.0 { c * r.powf(q - 2.0) } else { 0.0 };
        Some((value, linalg::add(&self.shift, &linalg::scale(&e, s))))
    }

    /// `V - <l, q> = k|q - q*|^p/p >= 0` with `l = cos(2πt/T) f`.
    fn lower_slope(&self, _period: f64) -> Option<VectorProfile> {
        let me = self.clone();
        Some(Arc::new(move |t| me.force(t)))
    }

    /// For `Φ = a|·|^p` with the potential's exponent. With a shift,
    /// `|q - q*|^p <= 2^{p-1}(|q|^p + |q*|^p)` is used.
    fn upper_offset(&self, phi: &GFunction, big_lambda: f64, _period: f64) -> Option<Result<ScalarProfile>> {
        let block = match phi.form() {
            GForm::PowerSum(b) if b.len() == 1 && b[0].p == self.p && b[0].size == self.dim() => b[0],
            _ => return None,
        };
        let (k, offset) = if self.has_shift() {
            let w = self.k * 2f64.powf(self.p - 1.0);
            (w, w * linalg::norm(&self.shift).powf(self.p) / self.p)
        } else {
            (self.k, 0.0)
        };
        let c = block.a * self.p * big_lambda.powf(2.0 * self.p) - k;
        if !(c > 0.0) {
            return Some(Err(Error::HypothesisFailure(format!(
                "V grows faster than Phi(Lambda^2 q): need a p Lambda^(2p) > {k}, got {}",
                c + k
            ))));
        }
        let q = self.p / (self.p - 1.0);
        let coef = c.powf(1.0 - q) / q;
        let me = self.clone();
        Some(Ok(Arc::new(move |t| coef * linalg::norm(&me.force(t)).powf(q) + offset)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `k|q - q*|^p / p + <f(t), q>`.
    Power {
        p: f64,
        #[serde(default = "unit")]
        k: f64,
        #[serde(default)]
        forcing: Vec<f64>,
        #[serde(default)]
        shift: Vec<f64>,
        #[serde(default)]
        rotating: bool,
    },
}

fn unit() -> f64 {
    1.0
}

impl PotentialSpec {
    pub fn build(&self, period: f64) -> Result<Arc<dyn Potential>> {
        match self {
            PotentialSpec::Power { p, k, forcing, shift, rotating } => {
                let v = PowerPotential::new(*p, *k, forcing.clone(), shift.clone(), period)?;
                Ok(Arc::new(if *rotating { v.rotating()? } else { v }))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugate_satisfies_young_equality() {
        let v = PowerPotential::new(3.0, 0.7, vec![0.4, -1.0], vec![0.2, 0.1], 2.0).unwrap();
        let t = 0.37;
        for q in [[0.3, -0.8], [1.5, 2.0], [0.2, 0.1]] {
            let y = v.gradient(t, &q);
            let (vs, arg) = v.conjugate(t, &y).unwrap();
            assert!((v.value(t, &q) + vs - linalg::dot(&q, &y)).abs() < 1e-12);
            assert!(linalg::norm(&linalg::sub(&arg, &q)) < 1e-12);
            let fd = fd_hessian(&q, |x| Ok(v.gradient(t, x))).unwrap();
            // central differences are O(h) accurate where d = 0
            assert!((v.hessian(t, &q) - fd).abs().max() < 1e-4);
        }
    }

    #[test]
    fn offset_bounds_the_potential() {
        let v = PowerPotential::new(3.0, 0.25, vec![1.0], vec![], 1.0).unwrap();
        let phi = GFunction::power(3.0, 1).unwrap();
        let lam: f64 = 0.9;
        let gamma = v.upper_offset(&phi, lam, 1.0).unwrap().unwrap();
        for t in [0.0, 0.1, 0.5] {
            let mut worst = f64::NEG_INFINITY;
            for i in -400..=400 {
                let q = [i as f64 * 0.01];
                let gap = v.value(t, &q) - phi.evaluate(&[lam * lam * q[0]]).unwrap();
                worst = worst.max(gap);
            }
            // the offset is the supremum, attained inside the scanned range
            assert!(worst <= gamma(t) + 1e-12);
            assert!(worst >= gamma(t) - 1e-3);
        }
    }
}
