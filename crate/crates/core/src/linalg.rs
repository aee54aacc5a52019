//! Small dense helpers on `Array2<C64>` shared by the spectral and dynamics
//! layers. Eigenproblems are delegated to LAPACK through `ndarray-linalg`.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, EigVals, EigValsh, Inverse, Solve};

use crate::{Result, C64};

/// Eigenvalues of a general complex matrix.
pub fn eigenvalues(a: &Array2<C64>) -> Result<Vec<C64>> {
    Ok(a.eigvals()?.to_vec())
}

/// Eigenvalues and right eigenvectors (columns, unit 2-norm).
pub fn eig(a: &Array2<C64>) -> Result<(Vec<C64>, Array2<C64>)> {
    let (vals, vecs) = a.eig()?;
    Ok((vals.to_vec(), vecs))
}

pub fn inverse(a: &Array2<C64>) -> Result<Array2<C64>> {
    Ok(a.inv()?)
}

/// Solves `A x = b` by LU factorization.
pub fn solve(a: &Array2<C64>, b: &Array1<C64>) -> Result<Array1<C64>> {
    Ok(a.solve(b)?)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &Array2<C64>) -> Result<Array1<f64>> {
    Ok(a.eigvalsh(ndarray_linalg::UPLO::Lower)?)
}

pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Frobenius (Hilbert-Schmidt) norm.
pub fn frobenius(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entry of `|A - A^dagger|`.
pub fn hermiticity_error(a: &Array2<C64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    worst
}

pub fn trace(a: &Array2<C64>) -> C64 {
    a.diag().sum()
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
///
/// Intended for the small `(N+1) x (N+1)` dynamical matrix; the scaled
/// argument has 1-norm below 1/2, where 24 Taylor terms are far below
/// double-precision roundoff.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0u32;
    if norm1 > 0.5 {
        squarings = (norm1 / 0.5).log2().ceil() as u32;
    }
    let scaled = a / C64::from(2f64.powi(squarings as i32));

    let mut result = Array2::<C64>::eye(n);
    let mut term = Array2::<C64>::eye(n);
    for k in 1..=24 {
        term = term.dot(&scaled) / C64::from(k as f64);
        result += &term;
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}
