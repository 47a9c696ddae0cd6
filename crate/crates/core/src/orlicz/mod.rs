//! Periodic trajectories on a uniform grid and Orlicz-space numerics.
//!
//! A [`Trajectory`] stores one period: sample `k` sits at `t_k = kT/N` and
//! index `N` wraps to `0`. Integrals use the rectangle rule with weight
//! `T/N`, which on a periodic grid coincides with the trapezoid rule.

mod io;
mod norms;
mod spectral;

pub use norms::{
    holder_check, luxemburg_norm, luxemburg_norm_with_tol, modular, norm_modular_bound,
    poincare_wirtinger_check, sobolev_norms, HolderReport, NormModularReport, PoincareWirtingerReport,
    LUXEMBURG_TOL,
};
pub use spectral::DerivativeOperator;

use crate::error::{Error, Result};
use crate::linalg;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeRule {
    /// Fourier differentiation with the Nyquist mode dropped.
    #[default]
    Spectral,
    /// `(u_{k+1} - u_k) / h` with wrap-around.
    ForwardDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    period: f64,
    n: usize,
    dim: usize,
    /// Row-major `n × dim`.
    values: Vec<f64>,
    rule: DerivativeRule,
}

impl Trajectory {
    pub fn new(period: f64, n: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidParameter(format!("period must be > 0, got {period}")));
        }
        if n == 0 || dim == 0 {
            return Err(Error::InvalidParameter("trajectory needs n >= 1 and dim >= 1".into()));
        }
        Error::check_dim(n * dim, values.len())?;
        Ok(Self { period, n, dim, values, rule: DerivativeRule::default() })
    }

    pub fn zeros(period: f64, n: usize, dim: usize) -> Result<Self> {
        Self::new(period, n, dim, vec![0.0; n * dim])
    }

    /// Samples `f` at `t_k = kT/N`.
    pub fn from_fn(period: f64, n: usize, dim: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(n * dim);
        for k in 0..n {
            let row = f(k as f64 * period / n as f64);
            Error::check_dim(dim, row.len())?;
            values.extend(row);
        }
        Self::new(period, n, dim, values)
    }

    /// Same as `self` but with new values on the same grid.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Error::check_dim(self.values.len(), values.len())?;
        Ok(Self { values, ..self.clone() })
    }

    pub fn with_rule(mut self, rule: DerivativeRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn period(&self) -> f64 {
        self.period
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn rule(&self) -> DerivativeRule {
        self.rule
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Quadrature weight `T/N`.
    pub fn weight(&self) -> f64 {
        self.period / self.n as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.period / self.n as f64
    }

    /// Sample `k`, wrapping modulo `N`.
    pub fn row(&self, k: usize) -> &[f64] {
        let k = k % self.n;
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    /// `(1/T) ∫ u dt`.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for row in self.rows() {
            linalg::axpy(1.0, row, &mut m);
        }
        linalg::scale(&m, 1.0 / self.n as f64)
    }

    /// `ũ = u - ū`.
    pub fn tilde(&self) -> Self {
        let m = self.mean();
        self.map_rows(|row| linalg::sub(row, &m))
    }

    pub fn map_rows(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for row in self.rows() {
            values.extend(f(row));
        }
        let dim = values.len() / self.n;
        Self { values, dim, ..self.clone() }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { values: linalg::scale(&self.values, s), ..self.clone() }
    }

    pub fn add_constant(&self, c: &[f64]) -> Self {
        self.map_rows(|row| linalg::add(row, c))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        Ok(Self { values: linalg::add(&self.values, &other.values), ..self.clone() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        Ok(Self { values: linalg::sub(&self.values, &other.values), ..self.clone() })
    }

    /// `∫ <u, v> dt`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self.weight() * linalg::dot(&self.values, &other.values))
    }

    /// `max_k |u(t_k)|`.
    pub fn max_norm(&self) -> f64 {
        self.rows().map(linalg::norm).fold(0.0, f64::max)
    }

    /// Node-wise `max_k |u(t_k) - v(t_k)|`.
    pub fn max_distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.max_norm())
    }

    /// `u(t_k) ↦ J u(t_k)`.
    pub fn apply_j(&self) -> Self {
        self.map_rows(linalg::apply_j)
    }

    pub fn derivative(&self) -> Self {
        let op = DerivativeOperator::new(self.period, self.n, self.rule);
        let values = op.apply(&self.values, self.dim);
        Self { values, ..self.clone() }
    }

    /// Mean-zero antiderivative. Exact inverse of the spectral derivative on
    /// mean-zero inputs without a Nyquist component.
    pub fn antiderivative(&self) -> Self {
        let op = DerivativeOperator::new(self.period, self.n, self.rule);
        let values = op.antiderivative(&self.values, self.dim);
        Self { values, ..self.clone() }
    }

    /// `∫ <J u̇, u> dt`.
    pub fn symplectic_action(&self) -> f64 {
        let d = self.derivative().apply_j();
        self.weight() * linalg::dot(d.values(), &self.values)
    }

    /// `t ↦ u(t/c)` on the period `cT` (same samples, stretched grid).
    pub fn rescale_time(&self, c: f64) -> Result<Self> {
        Self::new(self.period * c, self.n, self.dim, self.values.clone()).map(|t| t.with_rule(self.rule))
    }

    /// Random mean-zero band-limited trajectory with Fourier modes
    /// `1..=modes` and standard normal coefficients.
    pub fn random_band_limited<R: Rng>(
        rng: &mut R,
        period: f64,
        n: usize,
        dim: usize,
        modes: usize,
    ) -> Result<Self> {
        let mut coef = Vec::with_capacity(modes * dim * 2);
        for _ in 0..modes * dim * 2 {
            coef.push(crate::sampling::standard_normal(rng));
        }
        let traj = Self::from_fn(period, n, dim, |t| {
            let w = 2.0 * std::f64::consts::PI * t / period;
            (0..dim)
                .map(|i| {
                    (1..=modes)
                        .map(|k| {
                            let c = &coef[((k - 1) * dim + i) * 2..];
                            let kw = k as f64 * w;
                            c[0] * kw.cos() + c[1] * kw.sin()
                        })
                        .sum()
                })
                .collect()
        })?;
        Ok(traj.tilde())
    }

    fn check_grid(&self, other: &Self) -> Result<()> {
        Error::check_dim(self.n, other.n)?;
        Error::check_dim(self.dim, other.dim)?;
        if (self.period - other.period).abs() > 1e-12 * self.period {
            return Err(Error::InvalidParameter(format!(
                "period mismatch: {} vs {}",
                self.period, other.period
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn spectral_derivative_of_sine() {
        let u = Trajectory::from_fn(1.0, 64, 1, |t| vec![(2.0 * PI * t).sin()]).unwrap();
        let d = u.derivative();
        for k in 0..64 {
            let expect = 2.0 * PI * (2.0 * PI * u.time(k)).cos();
            assert!((d.row(k)[0] - expect).abs() < 1e-10);
        }
        let u = Trajectory::from_fn(1.0, 64, 1, |t| vec![(4.0 * PI * t).cos()]).unwrap();
        let d = u.derivative();
        for k in 0..64 {
            let expect = -4.0 * PI * (4.0 * PI * u.time(k)).sin();
            assert!((d.row(k)[0] - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_has_zero_derivative() {
        for rule in [DerivativeRule::Spectral, DerivativeRule::ForwardDifference] {
            let u = Trajectory::from_fn(3.0, 16, 2, |_| vec![1.5, -2.0]).unwrap().with_rule(rule);
            assert!(u.derivative().max_norm() < 1e-13);
        }
    }

    #[test]
    fn mean_tilde_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = Trajectory::random_band_limited(&mut rng, 2.0, 32, 3, 5)
            .unwrap()
            .add_constant(&[1.0, 2.0, 3.0]);
        let back = u.tilde().add_constant(&u.mean());
        assert!(back.max_distance(&u).unwrap() < 1e-14);
        assert!(linalg::norm(&u.tilde().mean()) < 1e-14);
    }

    #[test]
    fn antiderivative_inverts_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = Trajectory::random_band_limited(&mut rng, 1.5, 64, 2, 8).unwrap();
        let back = u.derivative().antiderivative();
        assert!(back.max_distance(&u).unwrap() < 1e-10);
    }

    #[test]
    fn symplectic_action_of_circle() {
        // clockwise circle (cos t, -sin t) on [0, 2π]: ∫<J u̇, u> = -2π
        let u = Trajectory::from_fn(2.0 * PI, 64, 2, |t| vec![t.cos(), -t.sin()]).unwrap();
        assert!((u.symplectic_action() + 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Trajectory::new(1.0, 4, 2, vec![0.0; 7]).is_err());
        assert!(Trajectory::new(0.0, 4, 1, vec![0.0; 4]).is_err());
    }
}
