//! Small symmetric-matrix utilities shared by the filters.

use nalgebra::{DMatrix, SMatrix};

pub fn symmetrize<const N: usize>(m: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (m + m.transpose()) * 0.5
}

fn eigenvalues<const N: usize>(m: &SMatrix<f64, N, N>) -> Vec<f64> {
    let d = DMatrix::from_column_slice(N, N, m.as_slice());
    d.symmetric_eigenvalues().iter().copied().collect()
}

pub fn min_eigenvalue<const N: usize>(m: &SMatrix<f64, N, N>) -> f64 {
    eigenvalues(m).into_iter().fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue<const N: usize>(m: &SMatrix<f64, N, N>) -> f64 {
    eigenvalues(m).into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Symmetric within `1e-9` (relative to the largest entry) and no eigenvalue
/// below `-tol`.
pub fn is_symmetric_psd<const N: usize>(m: &SMatrix<f64, N, N>, tol: f64) -> bool {
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= 1e-9 * scale && min_eigenvalue(m) >= -tol
}

/// Nearest PSD matrix in Frobenius norm: clamp eigenvalues at `floor`.
pub fn project_psd<const N: usize>(m: &SMatrix<f64, N, N>, floor: f64) -> SMatrix<f64, N, N> {
    let d = DMatrix::from_column_slice(N, N, symmetrize(m).as_slice());
    let eig = d.symmetric_eigen();
    let clamped = eig.eigenvalues.map(|l| l.max(floor));
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    symmetrize(&SMatrix::<f64, N, N>::from_column_slice(out.as_slice()))
}

/// 2-norm condition number of a symmetric matrix; infinite when singular.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let ev = m.clone().symmetric_eigenvalues();
    let max = ev.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let min = ev.iter().fold(f64::INFINITY, |a, &b| a.min(b.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
