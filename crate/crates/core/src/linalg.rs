//! Dense linear algebra helpers over `nalgebra`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

/// Eigenvalues (ascending) of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = SymmetricEigen::new(m.clone());
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Largest deviation from Hermiticity, `max |m_ij - conj(m_ji)|`.
pub fn hermitian_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Trace norm `sum of singular values`; Hermitian inputs use the eigenvalue route.
pub fn nuclear_norm(m: &DMatrix<C64>) -> f64 {
    let scale = m.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if m.is_square() && hermitian_defect(m) <= 1e-13 * scale.max(1e-300) {
        let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
        return hermitian_eigenvalues(&herm).iter().map(|v| v.abs()).sum();
    }
    m.clone().svd(false, false).singular_values.iter().sum()
}
