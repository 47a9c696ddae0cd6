//! Deterministic sampling used by the property checks.
//!
//! Universally quantified statements are checked on a finite sample: by
//! default 200 points with log-uniform radii in `[1e-3, 1e3]` and uniformly
//! distributed directions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub n_points: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub seed: u64,
    /// Also include `±e_i` scaled to every sampled radius decade.
    pub include_axes: bool,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self {
            n_points: 200,
            r_min: 1e-3,
            r_max: 1e3,
            seed: 0,
            include_axes: true,
        }
    }
}

impl SampleSpec {
    pub fn with_points(mut self, n: usize) -> Self {
        self.n_points = n;
        self
    }

    pub fn with_radii(mut self, r_min: f64, r_max: f64) -> Self {
        self.r_min = r_min;
        self.r_max = r_max;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn describe(&self) -> String {
        format!(
            "{} points, log-uniform radii in [{:e}, {:e}], seed {}{}",
            self.n_points,
            self.r_min,
            self.r_max,
            self.seed,
            if self.include_axes { ", plus axes" } else { "" }
        )
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// Nonzero sample points in `R^dim`.
    pub fn points(&self, dim: usize) -> Vec<Vec<f64>> {
        let mut rng = self.rng();
        let (lo, hi) = (self.r_min.ln(), self.r_max.ln());
        let mut out: Vec<Vec<f64>> = (0..self.n_points)
            .map(|_| {
                let dir = random_direction(&mut rng, dim);
                let r = (lo + (hi - lo) * rng.random::<f64>()).exp();
                dir.into_iter().map(|x| x * r).collect()
            })
            .collect();
        if self.include_axes {
            let decades = ((hi - lo) / std::f64::consts::LN_10).ceil().max(1.0) as usize;
            for d in 0..=decades {
                let r = (lo + (hi - lo) * d as f64 / decades as f64).exp();
                for i in 0..dim {
                    for s in [1.0, -1.0] {
                        let mut e = vec![0.0; dim];
                        e[i] = s * r;
                        out.push(e);
                    }
                }
            }
        }
        out
    }

    /// Unit directions (no radius).
    pub fn directions(&self, dim: usize) -> Vec<Vec<f64>> {
        let mut rng = self.rng();
        let mut out: Vec<Vec<f64>> = (0..self.n_points)
            .map(|_| random_direction(&mut rng, dim))
            .collect();
        if self.include_axes {
            for i in 0..dim {
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                out.push(e);
            }
        }
        out
    }
}

pub fn random_direction<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = crate::linalg::norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}
