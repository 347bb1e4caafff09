//! Dense order-`k` density matrices `gamma^(n_1..n_k; n'_1..n'_k)`.
//!
//! Storage is row-major with the unprimed multi-index as row and the primed one as column;
//! a multi-index flattens lattice indices with the first slot slowest.

use std::io::{Read, Write};
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, nuclear_norm};
use crate::spectral::io::{check_magic, read_complex, read_u32, write_complex, write_u32};
use crate::spectral::{bracket, norm_sq, ModeLattice, TorusField, ORDERING_VERSION, TORUS_VOLUME};

pub const DEFAULT_DENSE_BUDGET: usize = 1 << 22;
pub const CONVENTION_VERSION: u32 = 1;
const DENSITY_MAGIC: &[u8; 4] = b"GPHD";

static DENSE_BUDGET: AtomicUsize = AtomicUsize::new(DEFAULT_DENSE_BUDGET);

/// Largest number of complex entries a dense density matrix may hold.
pub fn dense_budget() -> usize {
    DENSE_BUDGET.load(Ordering::Relaxed)
}

pub fn set_dense_budget(entries: usize) {
    DENSE_BUDGET.store(entries, Ordering::Relaxed);
}

/// `(2 pi)^{-3 k}`.
pub fn volume_factor(k: usize) -> f64 {
    TORUS_VOLUME.powi(-(k as i32))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    order: usize,
    lattice: ModeLattice,
    dim: usize,
    data: Vec<C64>,
}

pub(crate) fn multi_index(lattice: &ModeLattice, k: usize, mut flat: usize, out: &mut [usize]) {
    let len = lattice.len();
    for slot in (0..k).rev() {
        out[slot] = flat % len;
        flat /= len;
    }
}

pub(crate) fn flatten(lattice: &ModeLattice, idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| acc * lattice.len() + i)
}

fn check_budget(lattice: &ModeLattice, k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::Argument("density matrix order must be at least 1".into()));
    }
    let len = lattice.len() as u128;
    let entries = len.checked_pow(2 * k as u32).unwrap_or(u128::MAX);
    if entries > dense_budget() as u128 {
        return Err(Error::Budget(format!(
            "order {k} at cutoff {} needs {entries} entries (budget {}); reduce M or k, or use the product representation",
            lattice.cutoff(),
            dense_budget()
        )));
    }
    Ok(len.pow(k as u32) as usize)
}

impl DensityMatrix {
    pub fn zeros(lattice: ModeLattice, order: usize) -> Result<Self> {
        let dim = check_budget(&lattice, order)?;
        Ok(DensityMatrix { order, lattice, dim, data: vec![C64::new(0.0, 0.0); dim * dim] })
    }

    /// Fills `gamma^(n; n')` from lattice multi-indices.
    pub fn from_fn(
        lattice: ModeLattice,
        order: usize,
        f: impl Fn(&[usize], &[usize]) -> C64 + Sync,
    ) -> Result<Self> {
        let mut out = Self::zeros(lattice, order)?;
        let dim = out.dim;
        out.data.par_chunks_mut(dim).enumerate().for_each(|(row, chunk)| {
            let mut a = vec![0; order];
            let mut b = vec![0; order];
            multi_index(&lattice, order, row, &mut a);
            for (col, v) in chunk.iter_mut().enumerate() {
                multi_index(&lattice, order, col, &mut b);
                *v = f(&a, &b);
            }
        });
        Ok(out)
    }

    pub fn from_data(lattice: ModeLattice, order: usize, data: Vec<C64>) -> Result<Self> {
        let dim = check_budget(&lattice, order)?;
        if data.len() != dim * dim {
            return Err(Error::Shape(format!("expected {} entries, got {}", dim * dim, data.len())));
        }
        Ok(DensityMatrix { order, lattice, dim, data })
    }

    /// `|phi><phi|^{tensor k}`, i.e. `prod_j phi^(n_j) conj(phi^(n'_j))`.
    pub fn factorized_state(phi: &TorusField, k: usize) -> Result<Self> {
        Self::product_of(&vec![(phi, phi); k])
    }

    /// `tensor_j |chi_j><psi_j|`.
    pub fn product_of(slots: &[(&TorusField, &TorusField)]) -> Result<Self> {
        let lattice = slots
            .first()
            .ok_or_else(|| Error::Argument("empty product".into()))?
            .0
            .lattice();
        let left: Vec<&[C64]> = slots.iter().map(|s| s.0.coeffs()).collect();
        let right: Vec<&[C64]> = slots.iter().map(|s| s.1.coeffs()).collect();
        Self::from_fn(lattice, slots.len(), |a, b| {
            let mut v = C64::new(1.0, 0.0);
            for j in 0..a.len() {
                v *= left[j][a[j]] * right[j][b[j]].conj();
            }
            v
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn lattice(&self) -> ModeLattice {
        self.lattice
    }

    /// Side length `(2M+1)^{3k}` of the matricized operator.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn get(&self, row: &[usize], col: &[usize]) -> C64 {
        self.data[flatten(&self.lattice, row) * self.dim + flatten(&self.lattice, col)]
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    pub(crate) fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.order != other.order || self.lattice != other.lattice {
            return Err(Error::Shape(format!(
                "order {} / cutoff {} vs order {} / cutoff {}",
                self.order,
                self.lattice.cutoff(),
                other.order,
                other.lattice.cutoff()
            )));
        }
        Ok(())
    }

    pub fn scale(&self, a: C64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= a);
        out
    }

    pub fn axpy(&mut self, a: C64, x: &Self) -> Result<()> {
        self.same_shape(x)?;
        self.data.iter_mut().zip(&x.data).for_each(|(y, v)| *y += a * v);
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(C64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    /// Operator matrix `(2 pi)^{-3k} gamma^` in the orthonormal exponential basis.
    pub fn operator_matrix(&self) -> DMatrix<C64> {
        let f = volume_factor(self.order);
        DMatrix::from_row_iterator(self.dim, self.dim, self.data.iter().map(|v| v * f))
    }

    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..=i {
                worst = worst.max((self.entry(i, j) - self.entry(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Largest change under simultaneous permutation of unprimed and primed slots.
    pub fn symmetry_defect(&self) -> f64 {
        let k = self.order;
        let perms = permutations(k);
        let mut a = vec![0; k];
        let mut b = vec![0; k];
        let mut pa = vec![0; k];
        let mut pb = vec![0; k];
        let mut worst = 0.0f64;
        for row in 0..self.dim {
            multi_index(&self.lattice, k, row, &mut a);
            for col in 0..self.dim {
                multi_index(&self.lattice, k, col, &mut b);
                let v = self.entry(row, col);
                for p in &perms {
                    for j in 0..k {
                        pa[j] = a[p[j]];
                        pb[j] = b[p[j]];
                    }
                    worst = worst.max((self.get(&pa, &pb) - v).norm());
                }
            }
        }
        worst
    }

    /// `Tr gamma = int gamma(x; x) dx`.
    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.entry(i, i)).sum::<C64>() * volume_factor(self.order)
    }

    /// `Tr |gamma|` from the singular values of the operator matrix.
    pub fn trace_norm(&self) -> f64 {
        nuclear_norm(&self.operator_matrix())
    }

    /// Eigenvalues (ascending) of the Hermitian part of the operator.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = self.operator_matrix();
        hermitian_eigenvalues(&((&m + m.adjoint()) * C64::new(0.5, 0.0)))
    }

    /// `||gamma||_{L^2}^2 = (2 pi)^{-6k} sum |gamma^|^2`, the squared Hilbert-Schmidt norm.
    pub fn hs_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() * volume_factor(2 * self.order)
    }

    pub fn hs_norm(&self) -> f64 {
        self.hs_norm_sq().sqrt()
    }

    pub fn hs_inner(&self, other: &Self) -> Result<C64> {
        self.same_shape(other)?;
        let s: C64 = self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum();
        Ok(s * volume_factor(2 * self.order))
    }

    /// `Tr_{k+1..m} gamma`.
    pub fn partial_trace(&self, k: usize) -> Result<Self> {
        let m = self.order;
        if k == 0 || k >= m {
            return Err(Error::Argument(format!("cannot trace order {m} down to {k}")));
        }
        let inner = self.lattice.len().pow((m - k) as u32);
        let factor = volume_factor(m - k);
        let mut out = Self::zeros(self.lattice, k)?;
        let odim = out.dim;
        out.data.par_chunks_mut(odim).enumerate().for_each(|(a, chunk)| {
            for (b, v) in chunk.iter_mut().enumerate() {
                let mut s = C64::new(0.0, 0.0);
                for c in 0..inner {
                    s += self.data[(a * inner + c) * self.dim + b * inner + c];
                }
                *v = s * factor;
            }
        });
        Ok(out)
    }

    fn multiply_entries(&self, f: impl Fn(&[usize], &[usize]) -> C64 + Sync) -> Self {
        let mut out = self.clone();
        let (lattice, k, dim) = (self.lattice, self.order, self.dim);
        out.data.par_chunks_mut(dim).enumerate().for_each(|(row, chunk)| {
            let mut a = vec![0; k];
            let mut b = vec![0; k];
            multi_index(&lattice, k, row, &mut a);
            for (col, v) in chunk.iter_mut().enumerate() {
                multi_index(&lattice, k, col, &mut b);
                *v *= f(&a, &b);
            }
        });
        out
    }

    /// `S^{(k, alpha)}`: multiplies by `prod <n_j>^alpha <n'_j>^alpha`.
    pub fn sobolev_weight(&self, alpha: f64) -> Self {
        let w: Vec<f64> = self.lattice.modes().map(|n| bracket(n).powf(alpha)).collect();
        self.multiply_entries(|a, b| {
            C64::new(a.iter().chain(b).map(|&i| w[i]).product(), 0.0)
        })
    }

    /// `U^{(k)}(t) gamma`: phase `exp(-i t (sum |n_j|^2 - sum |n'_j|^2))`.
    pub fn free_evolve(&self, t: f64) -> Self {
        let e = self.lattice.squared_norms();
        self.multiply_entries(|a, b| {
            let s: f64 = a.iter().map(|&i| e[i]).sum::<f64>() - b.iter().map(|&i| e[i]).sum::<f64>();
            C64::from_polar(1.0, -t * s)
        })
    }

    /// `(Delta_x - Delta_x') gamma`.
    pub fn laplacian_commutator(&self) -> Self {
        let e = self.lattice.squared_norms();
        self.multiply_entries(|a, b| {
            let s: f64 = a.iter().map(|&i| e[i]).sum::<f64>() - b.iter().map(|&i| e[i]).sum::<f64>();
            C64::new(-s, 0.0)
        })
    }

    /// Conjugates the kernel by a relabeling of the particles: slot `j` of the output
    /// reads slot `perm[j]` of the input.
    pub fn permute_slots(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.order {
            return Err(Error::Shape("permutation length differs from the order".into()));
        }
        let k = self.order;
        Self::from_fn(self.lattice, k, |a, b| {
            let mut pa = vec![0; k];
            let mut pb = vec![0; k];
            for j in 0..k {
                pa[perm[j]] = a[j];
                pb[perm[j]] = b[j];
            }
            self.get(&pa, &pb)
        })
    }

    /// Mode tuple of a flat multi-index, for diagnostics.
    pub fn modes_of(&self, flat: usize) -> Vec<[i64; 3]> {
        let mut idx = vec![0; self.order];
        multi_index(&self.lattice, self.order, flat, &mut idx);
        idx.iter().map(|&i| self.lattice.mode(i)).collect()
    }

    /// Kinetic weight `sum |n_j|^2` of a multi-index.
    pub fn kinetic(&self, idx: &[usize]) -> i64 {
        idx.iter().map(|&i| norm_sq(self.lattice.mode(i))).sum()
    }

    /// Header `GPHD`, then `u32` order, cutoff, ordering version, convention version,
    /// then the entries row-major as `f64` pairs.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(DENSITY_MAGIC)?;
        write_u32(w, self.order as u32)?;
        write_u32(w, self.lattice.cutoff() as u32)?;
        write_u32(w, ORDERING_VERSION)?;
        write_u32(w, CONVENTION_VERSION)?;
        write_complex(w, &self.data)
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        check_magic(r, DENSITY_MAGIC)?;
        let order = read_u32(r)? as usize;
        let lattice = ModeLattice::new(read_u32(r)? as usize)?;
        let ordering = read_u32(r)?;
        let convention = read_u32(r)?;
        if ordering != ORDERING_VERSION || convention != CONVENTION_VERSION {
            return Err(Error::Format(format!(
                "unsupported ordering/convention version {ordering}/{convention}"
            )));
        }
        let dim = check_budget(&lattice, order)?;
        let data = read_complex(r, dim * dim)?;
        Self::from_data(lattice, order, data)
    }
}

pub(crate) fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_lattice;
    use crate::spectral::random::{random_field, random_unit_field, Envelope};

    fn random_hermitian(lattice: ModeLattice, k: usize, seed: u64) -> DensityMatrix {
        let fields: Vec<TorusField> =
            (0..3).map(|s| random_field(lattice, seed, s, Envelope::Flat)).collect();
        let mut g = DensityMatrix::zeros(lattice, k).unwrap();
        for (i, f) in fields.iter().enumerate() {
            let w = C64::new([0.5, -0.3, 0.2][i], 0.0);
            g.axpy(w, &DensityMatrix::factorized_state(f, k).unwrap()).unwrap();
        }
        g
    }

    #[test]
    fn factorized_trace_and_rank() {
        let lat = make_lattice(1).unwrap();
        let phi = random_unit_field(lat, 3, 0, Envelope::Flat);
        let g1 = DensityMatrix::factorized_state(&phi, 1).unwrap();
        assert!((g1.trace() - 1.0).norm() < 1e-12);
        assert!((g1.trace_norm() - 1.0).abs() < 1e-12);
        let g2 = DensityMatrix::factorized_state(&phi, 2).unwrap();
        let ev = g2.eigenvalues();
        assert!((ev.last().unwrap() - 1.0).abs() < 1e-12);
        assert!(ev[..ev.len() - 1].iter().all(|v| v.abs() < 1e-12));
        assert!(g2.hermitian_defect() < 1e-14);
        assert!(g2.symmetry_defect() < 1e-14);
    }

    #[test]
    fn plane_wave_is_single_entry() {
        let lat = make_lattice(1).unwrap();
        let pw = TorusField::plane_wave(lat, [1, 0, -1], C64::new(1.0, 0.0)).unwrap();
        let g = DensityMatrix::factorized_state(&pw, 1).unwrap();
        assert_eq!(g.data().iter().filter(|v| v.norm() > 0.0).count(), 1);
    }

    #[test]
    fn partial_trace_of_product() {
        let lat = make_lattice(1).unwrap();
        let phi = random_field(lat, 4, 0, Envelope::Flat);
        let g2 = DensityMatrix::factorized_state(&phi, 2).unwrap();
        let g1 = DensityMatrix::factorized_state(&phi, 1).unwrap().scale(C64::new(phi.l2_norm_sq(), 0.0));
        let pt = g2.partial_trace(1).unwrap();
        let scale = g1.data().iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(pt.sub(&g1).unwrap().data().iter().all(|v| v.norm() < 1e-12 * scale));
        assert!(g2.partial_trace(2).is_err());
        assert!(g2.partial_trace(0).is_err());
        let h = random_hermitian(lat, 2, 9);
        assert!((h.partial_trace(1).unwrap().trace() - h.trace()).norm() < 1e-12);
    }

    #[test]
    fn mixture_trace_norm() {
        let lat = make_lattice(1).unwrap();
        let a = TorusField::plane_wave(lat, [0, 0, 0], C64::new(TORUS_VOLUME.powf(-0.5), 0.0)).unwrap();
        let b = TorusField::plane_wave(lat, [1, 0, 0], C64::new(TORUS_VOLUME.powf(-0.5), 0.0)).unwrap();
        let mut g = DensityMatrix::factorized_state(&a, 1).unwrap().scale(C64::new(0.3, 0.0));
        g.axpy(C64::new(0.7, 0.0), &DensityMatrix::factorized_state(&b, 1).unwrap()).unwrap();
        assert!((g.trace() - 1.0).norm() < 1e-12);
        assert!((g.trace_norm() - 1.0).abs() < 1e-12);
        let neg = g.scale(C64::new(-1.0, 0.0));
        assert!((neg.trace() + g.trace()).norm() < 1e-14);
        assert!((neg.trace_norm() - g.trace_norm()).abs() < 1e-12);
    }

    #[test]
    fn weights_and_evolution() {
        let lat = make_lattice(1).unwrap();
        let g = random_hermitian(lat, 1, 5);
        assert_eq!(g.sobolev_weight(0.0), g);
        let ab = g.sobolev_weight(0.5).sobolev_weight(1.5);
        let c = g.sobolev_weight(2.0);
        assert!(ab.sub(&c).unwrap().hs_norm() < 1e-12 * c.hs_norm());
        assert_eq!(g.free_evolve(0.0), g);
        let u = g.free_evolve(0.8);
        assert!((u.trace_norm() - g.trace_norm()).abs() < 1e-10);
        assert!((u.trace() - g.trace()).norm() < 1e-12);
        let swap = g.free_evolve(0.3).sobolev_weight(1.0).sub(&g.sobolev_weight(1.0).free_evolve(0.3)).unwrap();
        assert!(swap.hs_norm() < 1e-12);
        let phi = random_unit_field(lat, 6, 0, Envelope::Flat);
        let lhs = DensityMatrix::factorized_state(&phi, 1).unwrap().free_evolve(0.4);
        let rhs = DensityMatrix::factorized_state(&crate::nls::free_propagate(&phi, 0.4), 1).unwrap();
        assert!(lhs.sub(&rhs).unwrap().hs_norm() < 1e-12);
    }

    #[test]
    fn budget_refuses_large_orders() {
        let lat = make_lattice(4).unwrap();
        assert!(matches!(DensityMatrix::zeros(lat, 2), Err(Error::Budget(_))));
    }

    #[test]
    fn binary_round_trip() {
        let lat = make_lattice(1).unwrap();
        let g = random_hermitian(lat, 1, 2);
        let mut buf = Vec::new();
        g.write_binary(&mut buf).unwrap();
        assert_eq!(DensityMatrix::read_binary(&mut buf.as_slice()).unwrap(), g);
        buf[0] = b'X';
        assert!(DensityMatrix::read_binary(&mut buf.as_slice()).is_err());
    }
}
