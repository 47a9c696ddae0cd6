//! Discrete periodic differentiation.

use super::DerivativeRule;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// Discrete derivative `D` on a periodic grid, with its adjoint and the
/// Fourier-diagonal helpers the solvers need.
///
/// The spectral rule drops the Nyquist mode so that `D` stays real and
/// antisymmetric (`Dᵀ = -D`).
#[derive(Clone)]
pub struct DerivativeOperator {
    period: f64,
    n: usize,
    rule: DerivativeRule,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for DerivativeOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DerivativeOperator")
            .field("period", &self.period)
            .field("n", &self.n)
            .field("rule", &self.rule)
            .finish()
    }
}

impl DerivativeOperator {
    pub fn new(period: f64, n: usize, rule: DerivativeRule) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            period,
            n,
            rule,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn rule(&self) -> DerivativeRule {
        self.rule
    }

    fn step(&self) -> f64 {
        self.period / self.n as f64
    }

    /// Signed wavenumber of FFT bin `k`, or `None` for the Nyquist bin.
    fn wavenumber(&self, k: usize) -> Option<f64> {
        let n = self.n;
        if n % 2 == 0 && k == n / 2 {
            None
        } else if k <= n / 2 {
            Some(k as f64)
        } else {
            Some(k as f64 - n as f64)
        }
    }

    /// Fourier symbol of `D` at bin `k`.
    fn symbol(&self, k: usize) -> Complex64 {
        match self.rule {
            DerivativeRule::Spectral => match self.wavenumber(k) {
                Some(m) => Complex64::new(0.0, 2.0 * PI * m / self.period),
                None => Complex64::new(0.0, 0.0),
            },
            DerivativeRule::ForwardDifference => {
                let th = 2.0 * PI * k as f64 / self.n as f64;
                Complex64::new(th.cos() - 1.0, th.sin()) / self.step()
            }
        }
    }

    /// `D u` for row-major `n × dim` samples.
    pub fn apply(&self, values: &[f64], dim: usize) -> Vec<f64> {
        match self.rule {
            DerivativeRule::Spectral => self.diagonal(values, dim, |s, _| s),
            DerivativeRule::ForwardDifference => {
                let h = self.step();
                let n = self.n;
                let mut out = vec![0.0; values.len()];
                for k in 0..n {
                    let next = (k + 1) % n;
                    for i in 0..dim {
                        out[k * dim + i] = (values[next * dim + i] - values[k * dim + i]) / h;
                    }
                }
                out
            }
        }
    }

    /// `Dᵀ y` with respect to the Euclidean product on samples.
    pub fn adjoint(&self, values: &[f64], dim: usize) -> Vec<f64> {
        match self.rule {
            DerivativeRule::Spectral => {
                let mut out = self.apply(values, dim);
                out.iter_mut().for_each(|x| *x = -*x);
                out
            }
            DerivativeRule::ForwardDifference => {
                let h = self.step();
                let n = self.n;
                let mut out = vec![0.0; values.len()];
                for k in 0..n {
                    let prev = (k + n - 1) % n;
                    for i in 0..dim {
                        out[k * dim + i] = (values[prev * dim + i] - values[k * dim + i]) / h;
                    }
                }
                out
            }
        }
    }

    /// Mean-zero solution of `D w = u` on the range of `D`.
    pub fn antiderivative(&self, values: &[f64], dim: usize) -> Vec<f64> {
        self.diagonal(values, dim, |s, _| if s.norm() > 0.0 { 1.0 / s } else { Complex64::new(0.0, 0.0) })
    }

    /// Applies `(DᵀD)⁻¹` on non-constant modes and removes the mean. The
    /// spectral Nyquist bin, where `D` vanishes, is scaled as if it carried
    /// wavenumber `N/2`.
    pub fn precondition(&self, values: &[f64], dim: usize) -> Vec<f64> {
        let nyq = PI * self.n as f64 / self.period;
        self.diagonal(values, dim, |s, k| {
            if k == 0 {
                Complex64::new(0.0, 0.0)
            } else if s.norm() > 0.0 {
                Complex64::new(1.0 / s.norm_sqr(), 0.0)
            } else {
                Complex64::new(1.0 / (nyq * nyq), 0.0)
            }
        })
    }

    /// Multiplies each Fourier bin by `f(symbol, bin)`, column by column.
    fn diagonal(&self, values: &[f64], dim: usize, f: impl Fn(Complex64, usize) -> Complex64) -> Vec<f64> {
        let n = self.n;
        debug_assert_eq!(values.len(), n * dim);
        let mut out = vec![0.0; values.len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let factors: Vec<Complex64> = (0..n).map(|k| f(self.symbol(k), k) / n as f64).collect();
        for i in 0..dim {
            for k in 0..n {
                buf[k] = Complex64::new(values[k * dim + i], 0.0);
            }
            self.fwd.process(&mut buf);
            for (b, c) in buf.iter_mut().zip(&factors) {
                *b *= c;
            }
            self.inv.process(&mut buf);
            for k in 0..n {
                out[k * dim + i] = buf[k].re;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
    }

    #[test]
    fn adjoint_is_transpose() {
        for rule in [DerivativeRule::Spectral, DerivativeRule::ForwardDifference] {
            for n in [16, 17] {
                let op = DerivativeOperator::new(2.5, n, rule);
                let x = random(2 * n, 1);
                let y = random(2 * n, 2);
                let lhs = linalg::dot(&op.apply(&x, 2), &y);
                let rhs = linalg::dot(&x, &op.adjoint(&y, 2));
                assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()), "{rule:?} n={n}");
            }
        }
    }

    #[test]
    fn forward_difference_of_linear_ramp() {
        let op = DerivativeOperator::new(1.0, 8, DerivativeRule::ForwardDifference);
        let x: Vec<f64> = (0..8).map(|k| k as f64).collect();
        let d = op.apply(&x, 1);
        assert!((d[0] - 8.0).abs() < 1e-12);
        assert!((d[7] + 56.0).abs() < 1e-12);
    }

    #[test]
    fn precondition_inverts_dtd_on_mean_zero() {
        for rule in [DerivativeRule::Spectral, DerivativeRule::ForwardDifference] {
            let n = 15; // odd: no Nyquist bin
            let op = DerivativeOperator::new(1.0, n, rule);
            let mut x = random(n, 5);
            let m = x.iter().sum::<f64>() / n as f64;
            x.iter_mut().for_each(|v| *v -= m);
            let dtd = op.adjoint(&op.apply(&x, 1), 1);
            let back = op.precondition(&dtd, 1);
            assert!(linalg::norm(&linalg::sub(&back, &x)) < 1e-10, "{rule:?}");
        }
    }
}
