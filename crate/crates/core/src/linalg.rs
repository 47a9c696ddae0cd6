//! Small dense helpers on `&[f64]` used throughout the crate.

use nalgebra::{DMatrix, DVector};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Canonical symplectic matrix applied to `u = (u1, u2)`: `J u = (u2, -u1)`.
///
/// Panics if `u.len()` is odd.
pub fn apply_j(u: &[f64]) -> Vec<f64> {
    assert!(u.len() % 2 == 0, "J needs an even dimension");
    let n = u.len() / 2;
    let mut out = vec![0.0; u.len()];
    out[..n].copy_from_slice(&u[n..]);
    for i in 0..n {
        out[n + i] = -u[i];
    }
    out
}

/// `J^T u = -J u = (-u2, u1)`.
pub fn apply_jt(u: &[f64]) -> Vec<f64> {
    let mut out = apply_j(u);
    out.iter_mut().for_each(|x| *x = -*x);
    out
}

pub fn j_matrix(dim: usize) -> DMatrix<f64> {
    let n = dim / 2;
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..n {
        m[(i, n + i)] = 1.0;
        m[(n + i, i)] = -1.0;
    }
    m
}

pub fn mat_vec(m: &DMatrix<f64>, u: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(u)).as_slice().to_vec()
}

pub fn mat_t_vec(m: &DMatrix<f64>, u: &[f64]) -> Vec<f64> {
    (m.transpose() * DVector::from_column_slice(u))
        .as_slice()
        .to_vec()
}

/// Solves `m x = b`, returning `None` when `m` is numerically singular.
pub fn solve(m: &DMatrix<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let lu = m.clone().lu();
    lu.solve(&DVector::from_column_slice(b))
        .map(|x| x.as_slice().to_vec())
        .filter(|x| x.iter().all(|v| v.is_finite()))
}
