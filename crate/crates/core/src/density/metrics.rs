//! Hierarchy sequences and the `h_-` / `eta_k` distances between them.

use num_complex::Complex64 as C64;

use super::dense::volume_factor;
use super::DensityOperator;
use crate::error::{Error, Result};
use crate::spectral::{bracket, ModeLattice};

/// `(gamma^(1), ..., gamma^(K))` on one lattice.
#[derive(Debug, Clone)]
pub struct HierarchySequence<D> {
    entries: Vec<D>,
}

impl<D: DensityOperator> HierarchySequence<D> {
    pub fn new(entries: Vec<D>) -> Result<Self> {
        let first = entries.first().ok_or_else(|| Error::Argument("empty hierarchy sequence".into()))?;
        let lattice = first.lattice();
        for (i, e) in entries.iter().enumerate() {
            if e.order() != i + 1 {
                return Err(Error::Shape(format!("entry {i} has order {}, expected {}", e.order(), i + 1)));
            }
            if e.lattice() != lattice {
                return Err(Error::Shape("entries live on different lattices".into()));
            }
        }
        Ok(HierarchySequence { entries })
    }

    /// Factorized sequence `|phi><phi|^{tensor k}`, `k = 1..K`.
    pub fn factorized(phi: &crate::spectral::TorusField, max_order: usize) -> Result<Self> {
        Self::new((1..=max_order).map(|k| D::factorized(phi, k)).collect::<Result<_>>()?)
    }

    pub fn max_order(&self) -> usize {
        self.entries.len()
    }

    pub fn lattice(&self) -> ModeLattice {
        self.entries[0].lattice()
    }

    /// `gamma^(k)`, `k` counted from 1.
    pub fn get(&self, k: usize) -> Option<&D> {
        k.checked_sub(1).and_then(|i| self.entries.get(i))
    }

    pub fn entries(&self) -> &[D] {
        &self.entries
    }
}

/// Countable test family for `eta_k`: rank-one operators `|e_a><e_b|` between the
/// lowest normalized `k`-particle exponentials, weighted `2^{-l}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EtaFamily {
    /// Number of `k`-particle exponentials used.
    pub basis: usize,
    /// Number of `(a, b)` pairs kept.
    pub terms: usize,
}

impl Default for EtaFamily {
    fn default() -> Self {
        EtaFamily { basis: 6, terms: 32 }
    }
}

impl EtaFamily {
    /// The `k`-particle exponentials as lattice multi-indices, ordered by
    /// `(sum <n_j>, indices)`.
    pub fn exponentials(&self, lattice: &ModeLattice, k: usize) -> Vec<Vec<usize>> {
        let mut single: Vec<usize> = (0..lattice.len()).collect();
        single.sort_by(|&a, &b| {
            bracket(lattice.mode(a)).total_cmp(&bracket(lattice.mode(b))).then(a.cmp(&b))
        });
        single.truncate(self.basis.max(1));
        let mut tuples: Vec<Vec<usize>> = vec![vec![]];
        for _ in 0..k {
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    single.iter().map(move |&i| {
                        let mut u = t.clone();
                        u.push(i);
                        u
                    })
                })
                .collect();
        }
        let weight = |t: &Vec<usize>| t.iter().map(|&i| bracket(lattice.mode(i))).sum::<f64>();
        tuples.sort_by(|a, b| weight(a).total_cmp(&weight(b)).then(a.cmp(b)));
        tuples.truncate(self.basis);
        tuples
    }

    /// `(a, b)` pairs in row-major order, truncated to `terms`.
    pub fn pairs(&self, lattice: &ModeLattice, k: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
        let e = self.exponentials(lattice, k);
        let mut out = Vec::new();
        for a in &e {
            for b in &e {
                if out.len() < self.terms {
                    out.push((a.clone(), b.clone()));
                }
            }
        }
        out
    }

    /// `sum_l 2^{-l} |Tr(|e_a><e_b| gamma)|`, where `Tr(|e_a><e_b| gamma) = (2pi)^{-3k} gamma^(b; a)`.
    pub fn eta<D: DensityOperator>(&self, gamma: &D) -> f64 {
        let k = gamma.order();
        let f = volume_factor(k);
        self.pairs(&gamma.lattice(), k)
            .iter()
            .enumerate()
            .map(|(l, (a, b))| 0.5f64.powi(l as i32 + 1) * (gamma.fourier_entry(b, a) * f).norm())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyMetrics {
    /// `sum_k 2^{-k} ||gamma_1^(k) - gamma_2^(k)||_{L^2}^2`.
    pub h_minus: f64,
    /// `eta_k(gamma_1^(k), gamma_2^(k))` for `k = 1..K`.
    pub eta: Vec<f64>,
}

pub fn hierarchy_metrics<D: DensityOperator>(
    g1: &HierarchySequence<D>,
    g2: &HierarchySequence<D>,
    family: &EtaFamily,
) -> Result<HierarchyMetrics> {
    if g1.max_order() != g2.max_order() || g1.lattice() != g2.lattice() {
        return Err(Error::Shape("hierarchy sequences differ in length or lattice".into()));
    }
    let one = C64::new(1.0, 0.0);
    let mut h_minus = 0.0;
    let mut eta = Vec::with_capacity(g1.max_order());
    for (k, (a, b)) in g1.entries().iter().zip(g2.entries()).enumerate() {
        let diff = D::linear_combination(&[(one, a), (-one, b)])?;
        h_minus += 0.5f64.powi(k as i32 + 1) * diff.hs_norm().powi(2);
        eta.push(family.eta(&diff));
    }
    Ok(HierarchyMetrics { h_minus, eta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{DensityMatrix, ProductKernel};
    use crate::spectral::make_lattice;
    use crate::spectral::random::{random_unit_field, Envelope};

    #[test]
    fn identical_sequences_have_zero_distance() {
        let lat = make_lattice(1).unwrap();
        let phi = random_unit_field(lat, 1, 0, Envelope::Flat);
        let g = HierarchySequence::<ProductKernel>::factorized(&phi, 3).unwrap();
        let m = hierarchy_metrics(&g, &g, &EtaFamily::default()).unwrap();
        assert!(m.h_minus.abs() < 1e-14);
        assert!(m.eta.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn single_entry_contribution() {
        let lat = make_lattice(1).unwrap();
        let z1 = DensityMatrix::zeros(lat, 1).unwrap();
        let z2 = DensityMatrix::zeros(lat, 2).unwrap();
        let mut bump = z2.clone();
        // an entry of Hilbert-Schmidt norm 1: |gamma^|^2 (2pi)^{-12} = 1
        bump.data_mut()[7] = C64::new(crate::spectral::TORUS_VOLUME.powi(2), 0.0);
        let a = HierarchySequence::new(vec![z1.clone(), z2]).unwrap();
        let b = HierarchySequence::new(vec![z1, bump]).unwrap();
        let m = hierarchy_metrics(&a, &b, &EtaFamily::default()).unwrap();
        assert!((m.h_minus - 0.25).abs() < 1e-12);
    }

    #[test]
    fn eta_duality_bound() {
        let lat = make_lattice(1).unwrap();
        let fam = EtaFamily::default();
        for k in 1..=2 {
            let phi = random_unit_field(lat, 11, k as u64, Envelope::Flat);
            let g = DensityMatrix::factorized_state(&phi, k).unwrap();
            let bound: f64 = (1..=fam.terms).map(|l| 0.5f64.powi(l as i32)).sum::<f64>() * g.trace_norm();
            assert!(fam.eta(&g) <= bound + 1e-12);
            assert_eq!(fam.pairs(&lat, k).len(), 32);
        }
    }

    #[test]
    fn mismatched_sequences_rejected() {
        let phi1 = random_unit_field(make_lattice(1).unwrap(), 1, 0, Envelope::Flat);
        let phi2 = random_unit_field(make_lattice(2).unwrap(), 1, 0, Envelope::Flat);
        let a = HierarchySequence::<ProductKernel>::factorized(&phi1, 2).unwrap();
        let b = HierarchySequence::<ProductKernel>::factorized(&phi2, 2).unwrap();
        assert!(matches!(hierarchy_metrics(&a, &b, &EtaFamily::default()), Err(Error::Shape(_))));
    }
}
