//! Dense linear-algebra helpers for block matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Result};

/// Spectral norm by power iteration on `A^T A`, stopped when successive
/// estimates agree to relative 1e-12.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.ncols();
    if n == 0 || a.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    let ata = a.transpose() * a;
    // a symmetric PSD matrix: the largest eigenvalue is exact via the
    // eigendecomposition for small sizes, power iteration refines it
    let eig = SymmetricEigen::new(ata.clone());
    let mut v = eig
        .eigenvectors
        .column(eig.eigenvalues.imax())
        .into_owned();
    let mut lambda = eig.eigenvalues.max();
    for _ in 0..10_000 {
        let w = &ata * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        let done = (next - lambda).abs() <= 1e-12 * next.abs();
        lambda = next;
        if done {
            break;
        }
    }
    lambda.max(0.0).sqrt()
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn symmetric_spectrum(a: &DMatrix<f64>) -> Result<(f64, f64)> {
    if !is_symmetric(a, 1e-12) {
        return Err(domain("matrix is not symmetric"));
    }
    let eig = SymmetricEigen::new(a.clone());
    Ok((eig.eigenvalues.min(), eig.eigenvalues.max()))
}

pub fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    a.is_square()
        && (0..a.nrows()).all(|i| {
            (0..i).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= tol * (1.0 + a[(i, j)].abs()))
        })
}

/// Orthogonal matrix from the QR factorization of a Gaussian matrix drawn
/// with `seed`; column signs are fixed so the result is deterministic.
pub fn random_orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Symmetric matrix `Q diag(eigs) Q^T` with a seeded random orthogonal `Q`.
pub fn spd_with_spectrum(eigs: &[f64], seed: u64) -> DMatrix<f64> {
    let d = eigs.len();
    let q = random_orthogonal(d, seed);
    let m = &q * DMatrix::from_diagonal(&DVector::from_column_slice(eigs)) * q.transpose();
    // exact symmetry
    DMatrix::from_fn(d, d, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

/// Eigenvalues spread geometrically between `min` and `max`.
pub fn geometric_spectrum(d: usize, min: f64, max: f64) -> Vec<f64> {
    if d == 1 {
        return vec![max];
    }
    (0..d)
        .map(|j| {
            if j == 0 {
                min
            } else if j == d - 1 {
                max
            } else {
                min * (max / min).powf(j as f64 / (d - 1) as f64)
            }
        })
        .collect()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// `out = A x` for a square block.
pub fn mat_vec(a: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = (0..x.len()).map(|j| a[(i, j)] * x[j]).sum();
    }
}
