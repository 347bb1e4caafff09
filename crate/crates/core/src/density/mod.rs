//! Order-`k` density matrices: a dense tensor form for small sizes and a structured
//! sum-of-products form for everything else, behind one [`DensityOperator`] interface.

pub mod dense;
pub mod metrics;
pub mod product;

pub use dense::{dense_budget, set_dense_budget, volume_factor, DensityMatrix, DEFAULT_DENSE_BUDGET};
pub use metrics::{hierarchy_metrics, EtaFamily, HierarchyMetrics, HierarchySequence};
pub use product::{ProductBasis, ProductKernel, ProductTerm, RankOne};

use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::spectral::{ModeLattice, TorusField};

/// Operations shared by the dense and structured representations.
pub trait DensityOperator: Clone + Send + Sync + Sized {
    fn order(&self) -> usize;
    fn lattice(&self) -> ModeLattice;
    fn factorized(phi: &TorusField, k: usize) -> Result<Self>;
    fn free_evolve(&self, t: f64) -> Self;
    fn sobolev_weight(&self, alpha: f64) -> Self;
    fn laplacian_commutator(&self) -> Self;
    /// `B_{j,k+1}` with `j` counted from 1.
    fn collision_apply(&self, j: usize) -> Result<Self>;
    fn linear_combination(items: &[(C64, &Self)]) -> Result<Self>;
    fn hs_inner(&self, other: &Self) -> Result<C64>;
    fn trace(&self) -> C64;
    fn trace_norm(&self) -> Result<f64>;
    fn partial_trace(&self, k: usize) -> Result<Self>;
    /// `gamma^(n; n')` for lattice multi-indices.
    fn fourier_entry(&self, row: &[usize], col: &[usize]) -> C64;

    /// `B_{k+1} = sum_j B_{j,k+1}`.
    fn full_collision(&self) -> Result<Self> {
        crate::collision::full_collision(self)
    }

    fn hs_norm(&self) -> f64 {
        self.hs_inner(self).map(|v| v.re.max(0.0).sqrt()).unwrap_or(f64::NAN)
    }

    /// Shared orthonormal coordinates for a family of operators.
    fn basis_for(items: &[&Self]) -> Result<Basis>;

    /// Coordinates in `basis`; Euclidean inner products of coordinates are
    /// Hilbert-Schmidt inner products of operators.
    fn coordinates(&self, basis: &Basis) -> Result<Vec<C64>>;

    /// `|| sum_i a_i K_i ||_{HS}` without Gram-matrix cancellation.
    fn combination_norm(items: &[(C64, &Self)]) -> Result<f64> {
        let refs: Vec<&Self> = items.iter().map(|x| x.1).collect();
        let basis = Self::basis_for(&refs)?;
        let mut acc: Vec<C64> = Vec::new();
        for (a, x) in items {
            let c = x.coordinates(&basis)?;
            if acc.is_empty() {
                acc = vec![C64::new(0.0, 0.0); c.len()];
            }
            acc.iter_mut().zip(&c).for_each(|(s, v)| *s += a * v);
        }
        Ok(coordinate_norm(&acc))
    }
}

pub fn coordinate_norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Coordinate system returned by [`DensityOperator::basis_for`].
#[derive(Debug, Clone)]
pub enum Basis {
    /// Fourier entries scaled to the orthonormal exponential basis.
    Dense,
    Product(ProductBasis),
}

impl DensityOperator for DensityMatrix {
    fn order(&self) -> usize {
        DensityMatrix::order(self)
    }
    fn lattice(&self) -> ModeLattice {
        DensityMatrix::lattice(self)
    }
    fn factorized(phi: &TorusField, k: usize) -> Result<Self> {
        DensityMatrix::factorized_state(phi, k)
    }
    fn free_evolve(&self, t: f64) -> Self {
        DensityMatrix::free_evolve(self, t)
    }
    fn sobolev_weight(&self, alpha: f64) -> Self {
        DensityMatrix::sobolev_weight(self, alpha)
    }
    fn laplacian_commutator(&self) -> Self {
        DensityMatrix::laplacian_commutator(self)
    }
    fn collision_apply(&self, j: usize) -> Result<Self> {
        crate::collision::collision_apply(self, j)
    }
    fn linear_combination(items: &[(C64, &Self)]) -> Result<Self> {
        let first = items.first().ok_or_else(|| crate::Error::Argument("empty combination".into()))?.1;
        let mut out = DensityMatrix::zeros(first.lattice(), first.order())?;
        for (a, x) in items {
            out.axpy(*a, x)?;
        }
        Ok(out)
    }
    fn hs_inner(&self, other: &Self) -> Result<C64> {
        DensityMatrix::hs_inner(self, other)
    }
    fn trace(&self) -> C64 {
        DensityMatrix::trace(self)
    }
    fn trace_norm(&self) -> Result<f64> {
        Ok(DensityMatrix::trace_norm(self))
    }
    fn partial_trace(&self, k: usize) -> Result<Self> {
        DensityMatrix::partial_trace(self, k)
    }
    fn fourier_entry(&self, row: &[usize], col: &[usize]) -> C64 {
        self.get(row, col)
    }
    fn basis_for(_items: &[&Self]) -> Result<Basis> {
        Ok(Basis::Dense)
    }
    fn coordinates(&self, basis: &Basis) -> Result<Vec<C64>> {
        match basis {
            Basis::Dense => {
                let f = volume_factor(self.order());
                Ok(self.data().iter().map(|v| v * f).collect())
            }
            Basis::Product(_) => Err(crate::Error::Argument("dense operator in a product basis".into())),
        }
    }
}

impl DensityOperator for ProductKernel {
    fn order(&self) -> usize {
        ProductKernel::order(self)
    }
    fn lattice(&self) -> ModeLattice {
        ProductKernel::lattice(self)
    }
    fn factorized(phi: &TorusField, k: usize) -> Result<Self> {
        ProductKernel::factorized(phi, k)
    }
    fn free_evolve(&self, t: f64) -> Self {
        ProductKernel::free_evolve(self, t)
    }
    fn sobolev_weight(&self, alpha: f64) -> Self {
        ProductKernel::sobolev_weight(self, alpha)
    }
    fn laplacian_commutator(&self) -> Self {
        ProductKernel::laplacian_commutator(self)
    }
    fn collision_apply(&self, j: usize) -> Result<Self> {
        crate::collision::collision_apply_product(self, j)
    }
    fn full_collision(&self) -> Result<Self> {
        crate::collision::full_collision_product(self)
    }
    fn linear_combination(items: &[(C64, &Self)]) -> Result<Self> {
        ProductKernel::linear_combination(items)
    }
    fn hs_inner(&self, other: &Self) -> Result<C64> {
        ProductKernel::hs_inner(self, other)
    }
    fn trace(&self) -> C64 {
        ProductKernel::trace(self)
    }
    fn trace_norm(&self) -> Result<f64> {
        ProductKernel::trace_norm(self)
    }
    fn partial_trace(&self, k: usize) -> Result<Self> {
        ProductKernel::partial_trace(self, k)
    }
    fn fourier_entry(&self, row: &[usize], col: &[usize]) -> C64 {
        ProductKernel::fourier_entry(self, row, col)
    }
    fn basis_for(items: &[&Self]) -> Result<Basis> {
        Ok(Basis::Product(ProductBasis::for_norms(items)?))
    }
    fn coordinates(&self, basis: &Basis) -> Result<Vec<C64>> {
        match basis {
            Basis::Product(b) => b.coordinates(self),
            Basis::Dense => Err(crate::Error::Argument("product kernel in the dense basis".into())),
        }
    }
}
