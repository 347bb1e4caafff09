//! Collision operators `B_{j,k+1} gamma = Tr_{k+1} [delta(x_j - x_{k+1}), gamma]` on the
//! truncated lattice.
//!
//! The dense route contracts the `(k+1)`-th slot pair in Fourier space and shifts the
//! `j`-th mode; the structured route multiplies slot fields on the padded grid. Both drop
//! output modes outside the lattice, so they agree to roundoff.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::density::dense::{multi_index, volume_factor};
use crate::density::{DensityMatrix, DensityOperator, ProductKernel, ProductTerm, RankOne};
use crate::error::{Error, Result};
use crate::spectral::{ModeLattice, TorusField};

fn check_slot(order: usize, j: usize) -> Result<usize> {
    if order < 2 {
        return Err(Error::Argument(format!("collision needs order >= 2, got {order}")));
    }
    let k = order - 1;
    if j == 0 || j > k {
        return Err(Error::Argument(format!("collision slot j = {j} outside 1..={k}")));
    }
    Ok(k)
}

/// `shift[(a * len + b) * len + c]` is the lattice index of `n_a - n_b + n_c`, if any.
fn shift_table(lattice: &ModeLattice) -> Vec<Option<u32>> {
    let len = lattice.len();
    let mut out = Vec::with_capacity(len * len * len);
    for a in 0..len {
        let na = lattice.mode(a);
        for b in 0..len {
            let nb = lattice.mode(b);
            for c in 0..len {
                let nc = lattice.mode(c);
                out.push(
                    lattice
                        .index_of([na[0] - nb[0] + nc[0], na[1] - nb[1] + nc[1], na[2] - nb[2] + nc[2]])
                        .map(|i| i as u32),
                );
            }
        }
    }
    out
}

/// `B_{j,k+1}` on a dense order-`(k+1)` matrix (`j` counted from 1).
pub fn collision_apply(gamma: &DensityMatrix, j: usize) -> Result<DensityMatrix> {
    let k = check_slot(gamma.order(), j)?;
    let lattice = gamma.lattice();
    let len = lattice.len();
    let shift = shift_table(&lattice);
    let factor = volume_factor(2);
    let mut out = DensityMatrix::zeros(lattice, k)?;
    let odim = out.dim();
    let idim = gamma.dim();
    let s = j - 1;
    // position weight of slot s inside an order-k flat index
    let stride = len.pow((k - 1 - s) as u32);
    out.data_mut().par_chunks_mut(odim).enumerate().for_each(|(row, chunk)| {
        let mut a = vec![0; k];
        let mut b = vec![0; k];
        multi_index(&lattice, k, row, &mut a);
        for (col, v) in chunk.iter_mut().enumerate() {
            multi_index(&lattice, k, col, &mut b);
            let mut acc = C64::new(0.0, 0.0);
            for m in 0..len {
                for mp in 0..len {
                    // gain: unprimed slot s reads n_s - m + m'
                    if let Some(q) = shift[(a[s] * len + m) * len + mp] {
                        let r = (row as isize + (q as isize - a[s] as isize) * stride as isize) as usize;
                        acc += gamma.entry(r * len + m, col * len + mp);
                    }
                    // loss: primed slot s reads n'_s + m - m'
                    if let Some(q) = shift[(b[s] * len + mp) * len + m] {
                        let c = (col as isize + (q as isize - b[s] as isize) * stride as isize) as usize;
                        acc -= gamma.entry(row * len + m, c * len + mp);
                    }
                }
            }
            *v = acc * factor;
        }
    });
    debug_assert_eq!(idim, odim * len);
    Ok(out)
}

/// `B_{j,k+1}` on a sum of product kernels: slot `j` of every term absorbs the
/// `(k+1)`-th slot, `chi_j -> P_M(chi_j chi_{k+1} conj psi_{k+1})` for the gain part and
/// `psi_j -> P_M(psi_j psi_{k+1} conj chi_{k+1})` for the loss part.
pub fn collision_apply_product(gamma: &ProductKernel, j: usize) -> Result<ProductKernel> {
    collision_apply_cached(gamma, j, &mut CubicCache::default())
}

/// Cubic products keyed by the identity of their three factors.
#[derive(Default)]
pub struct CubicCache {
    map: HashMap<[*const TorusField; 3], Arc<TorusField>>,
}

impl CubicCache {
    fn get(&mut self, f: &Arc<TorusField>, g: &Arc<TorusField>, h: &Arc<TorusField>) -> Arc<TorusField> {
        let key = [Arc::as_ptr(f), Arc::as_ptr(g), Arc::as_ptr(h)];
        self.map
            .entry(key)
            .or_insert_with(|| {
                if Arc::ptr_eq(f, g) && Arc::ptr_eq(g, h) {
                    Arc::new(f.cubic_nonlinearity())
                } else {
                    Arc::new(TorusField::cubic_product(f, g, h))
                }
            })
            .clone()
    }
}

/// `B_{k+1}` on a product kernel, reusing cubic products shared between slots and terms.
pub fn full_collision_product(gamma: &ProductKernel) -> Result<ProductKernel> {
    let k = check_slot(gamma.order(), 1)?;
    let mut cache = CubicCache::default();
    let mut out = ProductKernel::zero(gamma.lattice(), k);
    for j in 1..=k {
        out.axpy(C64::new(1.0, 0.0), &collision_apply_cached(gamma, j, &mut cache)?)?;
    }
    Ok(out)
}

fn collision_apply_cached(gamma: &ProductKernel, j: usize, cache: &mut CubicCache) -> Result<ProductKernel> {
    let k = check_slot(gamma.order(), j)?;
    let s = j - 1;
    let mut out = ProductKernel::zero(gamma.lattice(), k);
    for t in gamma.terms() {
        let (cj, last) = (&t.slots[s], &t.slots[k]);
        let gain = cache.get(&cj.left, &last.left, &last.right);
        let loss = cache.get(&cj.right, &last.right, &last.left);
        let mut plus = t.slots[..k].to_vec();
        plus[s] = RankOne { left: gain, right: cj.right.clone() };
        out.push(ProductTerm { coeff: t.coeff, slots: plus });
        let mut minus = t.slots[..k].to_vec();
        minus[s] = RankOne { left: cj.left.clone(), right: loss };
        out.push(ProductTerm { coeff: -t.coeff, slots: minus });
    }
    Ok(out)
}

/// `B_{k+1} = sum_{j=1}^k B_{j,k+1}`.
pub fn full_collision<D: DensityOperator>(gamma: &D) -> Result<D> {
    let k = check_slot(gamma.order(), 1)?;
    let parts: Vec<D> = (1..=k).map(|j| gamma.collision_apply(j)).collect::<Result<_>>()?;
    let one = C64::new(1.0, 0.0);
    let items: Vec<(C64, &D)> = parts.iter().map(|p| (one, p)).collect();
    D::linear_combination(&items)
}

/// `|psi><phi| - |phi><psi|` with `psi = P_M(|phi|^2 phi)`, the kernel of
/// `B_{1,2} |phi><phi|^{tensor 2}`.
pub fn commutator_kernel(phi: &TorusField) -> ProductKernel {
    let psi = Arc::new(phi.cubic_nonlinearity());
    let phi = Arc::new(phi.clone());
    let terms = vec![
        ProductTerm { coeff: C64::new(1.0, 0.0), slots: vec![RankOne { left: psi.clone(), right: phi.clone() }] },
        ProductTerm { coeff: C64::new(-1.0, 0.0), slots: vec![RankOne { left: phi, right: psi }] },
    ];
    ProductKernel::from_terms(phi_lattice(&terms), 1, terms).expect("consistent slots")
}

fn phi_lattice(terms: &[ProductTerm]) -> ModeLattice {
    terms[0].slots[0].left.lattice()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_lattice;
    use crate::spectral::random::{random_field, random_unit_field, Envelope};

    #[test]
    fn dense_and_product_routes_agree() {
        let lat = make_lattice(1).unwrap();
        let mut k = ProductKernel::zero(lat, 2);
        for t in 0..2u64 {
            let f = |s| random_field(lat, 3, 4 * t + s, Envelope::Flat);
            k.push(ProductTerm {
                coeff: C64::new(0.7, 0.2 * t as f64),
                slots: vec![RankOne::new(f(0), f(1)), RankOne::new(f(2), f(3))],
            });
        }
        let dense = collision_apply(&k.to_dense().unwrap(), 1).unwrap();
        let prod = collision_apply_product(&k, 1).unwrap().to_dense().unwrap();
        assert!(dense.sub(&prod).unwrap().hs_norm() < 1e-11 * dense.hs_norm());
    }

    #[test]
    fn factorized_collision_is_commutator_kernel() {
        let lat = make_lattice(1).unwrap();
        let phi = random_unit_field(lat, 2, 0, Envelope::Flat);
        let g2 = DensityMatrix::factorized_state(&phi, 2).unwrap();
        let b = collision_apply(&g2, 1).unwrap();
        let expect = commutator_kernel(&phi).to_dense().unwrap();
        assert!(b.sub(&expect).unwrap().hs_norm() < 1e-12 * expect.hs_norm());
        assert!(b.trace().norm() < 1e-12);
        // anti-Hermitian output
        let mut worst = 0.0f64;
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                worst = worst.max((b.entry(i, j) + b.entry(j, i).conj()).norm());
            }
        }
        assert!(worst < 1e-12);
    }

    #[test]
    fn constant_field_has_no_collision() {
        let lat = make_lattice(1).unwrap();
        let phi = TorusField::constant(lat, C64::new(0.1, 0.05));
        let b = collision_apply(&DensityMatrix::factorized_state(&phi, 2).unwrap(), 1).unwrap();
        assert!(b.hs_norm() < 1e-15);
    }

    #[test]
    fn slot_range_checked() {
        let lat = make_lattice(1).unwrap();
        let g = DensityMatrix::zeros(lat, 2).unwrap();
        assert!(collision_apply(&g, 0).is_err());
        assert!(collision_apply(&g, 2).is_err());
        assert!(collision_apply(&DensityMatrix::zeros(lat, 1).unwrap(), 1).is_err());
        assert_eq!(full_collision(&g).unwrap().hs_norm(), 0.0);
    }

    #[test]
    fn full_collision_k1_matches_single() {
        let lat = make_lattice(1).unwrap();
        let phi = random_unit_field(lat, 5, 0, Envelope::Flat);
        let g = DensityMatrix::factorized_state(&phi, 2).unwrap();
        assert_eq!(full_collision(&g).unwrap(), collision_apply(&g, 1).unwrap());
    }
}
