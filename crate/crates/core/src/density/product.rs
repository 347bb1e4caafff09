//! Sums of tensor products of rank-one kernels,
//! `sum_t c_t  tensor_j |chi_{t,j}><psi_{t,j}|`.
//!
//! Every quantity used by the hierarchy checks (traces, partial traces, Hilbert-Schmidt
//! norms, trace norms, free evolution, collisions) is computed from one-particle inner
//! products, so orders and cutoffs far beyond the dense budget stay cheap.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::dense::DensityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, nuclear_norm};
use super::dense::dense_budget;
use crate::nls::free_propagate;
use crate::spectral::{bracket, ModeLattice, TorusField};

/// `|left><right|` on one particle.
#[derive(Debug, Clone)]
pub struct RankOne {
    pub left: Arc<TorusField>,
    pub right: Arc<TorusField>,
}

impl RankOne {
    pub fn new(left: TorusField, right: TorusField) -> Self {
        RankOne { left: Arc::new(left), right: Arc::new(right) }
    }

    pub fn projector(f: TorusField) -> Self {
        let a = Arc::new(f);
        RankOne { left: a.clone(), right: a }
    }
}

#[derive(Debug, Clone)]
pub struct ProductTerm {
    pub coeff: C64,
    pub slots: Vec<RankOne>,
}

#[derive(Debug, Clone)]
pub struct ProductKernel {
    lattice: ModeLattice,
    order: usize,
    terms: Vec<ProductTerm>,
}

impl ProductKernel {
    pub fn zero(lattice: ModeLattice, order: usize) -> Self {
        ProductKernel { lattice, order, terms: Vec::new() }
    }

    pub fn from_terms(lattice: ModeLattice, order: usize, terms: Vec<ProductTerm>) -> Result<Self> {
        for t in &terms {
            if t.slots.len() != order {
                return Err(Error::Shape(format!("term with {} slots in an order-{order} kernel", t.slots.len())));
            }
            if t.slots.iter().any(|s| s.left.lattice() != lattice || s.right.lattice() != lattice) {
                return Err(Error::Shape("slot field on a different lattice".into()));
            }
        }
        Ok(ProductKernel { lattice, order, terms })
    }

    /// `|phi><phi|^{tensor k}`.
    pub fn factorized(phi: &TorusField, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Argument("order must be at least 1".into()));
        }
        let p = RankOne::projector(phi.clone());
        Ok(ProductKernel {
            lattice: phi.lattice(),
            order: k,
            terms: vec![ProductTerm { coeff: C64::new(1.0, 0.0), slots: vec![p; k] }],
        })
    }

    /// `sum_i p_i |phi_i><phi_i|^{tensor k}`.
    pub fn mixture(atoms: &[(f64, TorusField)], k: usize) -> Result<Self> {
        let lattice = atoms.first().ok_or_else(|| Error::Argument("empty mixture".into()))?.1.lattice();
        let terms = atoms
            .iter()
            .map(|(p, f)| ProductTerm { coeff: C64::new(*p, 0.0), slots: vec![RankOne::projector(f.clone()); k] })
            .collect();
        Self::from_terms(lattice, k, terms)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn lattice(&self) -> ModeLattice {
        self.lattice
    }

    pub fn terms(&self) -> &[ProductTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn push(&mut self, term: ProductTerm) {
        debug_assert_eq!(term.slots.len(), self.order);
        self.terms.push(term);
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
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
        out.terms.iter_mut().for_each(|t| t.coeff *= a);
        out
    }

    /// `self + a * other` by concatenating terms.
    pub fn axpy(&mut self, a: C64, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        self.terms.extend(other.terms.iter().map(|t| ProductTerm { coeff: t.coeff * a, slots: t.slots.clone() }));
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(C64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    /// `sum_i a_i K_i`.
    pub fn linear_combination(items: &[(C64, &ProductKernel)]) -> Result<Self> {
        let first = items.first().ok_or_else(|| Error::Argument("empty combination".into()))?.1;
        let mut out = Self::zero(first.lattice, first.order);
        for (a, k) in items {
            out.axpy(*a, k)?;
        }
        Ok(out)
    }

    fn map_slots(&self, f: impl Fn(&TorusField) -> TorusField) -> Self {
        let mut cache: HashMap<*const TorusField, Arc<TorusField>> = HashMap::new();
        let mut get = |a: &Arc<TorusField>| {
            cache.entry(Arc::as_ptr(a)).or_insert_with(|| Arc::new(f(a))).clone()
        };
        let terms = self
            .terms
            .iter()
            .map(|t| ProductTerm {
                coeff: t.coeff,
                slots: t.slots.iter().map(|s| RankOne { left: get(&s.left), right: get(&s.right) }).collect(),
            })
            .collect();
        ProductKernel { lattice: self.lattice, order: self.order, terms }
    }

    /// `U^{(k)}(t)`: propagates every left and right factor.
    pub fn free_evolve(&self, t: f64) -> Self {
        if t == 0.0 {
            return self.clone();
        }
        self.map_slots(|f| free_propagate(f, t))
    }

    /// `S^{(k, alpha)}`.
    pub fn sobolev_weight(&self, alpha: f64) -> Self {
        self.map_slots(|f| f.multiplier(|n| bracket(n).powf(alpha)))
    }

    /// `(Delta_x - Delta_x') gamma`.
    pub fn laplacian_commutator(&self) -> Self {
        let mut terms = Vec::with_capacity(2 * self.order * self.terms.len());
        for t in &self.terms {
            for j in 0..self.order {
                let mut plus = t.slots.clone();
                plus[j] = RankOne { left: Arc::new(t.slots[j].left.laplacian()), right: t.slots[j].right.clone() };
                terms.push(ProductTerm { coeff: t.coeff, slots: plus });
                let mut minus = t.slots.clone();
                minus[j] = RankOne { left: t.slots[j].left.clone(), right: Arc::new(t.slots[j].right.laplacian()) };
                terms.push(ProductTerm { coeff: -t.coeff, slots: minus });
            }
        }
        ProductKernel { lattice: self.lattice, order: self.order, terms }
    }

    /// `Tr gamma = sum_t c_t prod_j <psi_{t,j}, chi_{t,j}>`.
    pub fn trace(&self) -> C64 {
        self.terms
            .iter()
            .map(|t| t.coeff * t.slots.iter().map(|s| s.right.inner(&s.left)).product::<C64>())
            .sum()
    }

    /// `Tr_{k+1..m}`.
    pub fn partial_trace(&self, k: usize) -> Result<Self> {
        if k == 0 || k >= self.order {
            return Err(Error::Argument(format!("cannot trace order {} down to {k}", self.order)));
        }
        let terms = self
            .terms
            .iter()
            .map(|t| ProductTerm {
                coeff: t.coeff * t.slots[k..].iter().map(|s| s.right.inner(&s.left)).product::<C64>(),
                slots: t.slots[..k].to_vec(),
            })
            .collect();
        Ok(ProductKernel { lattice: self.lattice, order: k, terms })
    }

    /// `gamma^(n; n')` for lattice multi-indices.
    pub fn fourier_entry(&self, row: &[usize], col: &[usize]) -> C64 {
        self.terms
            .iter()
            .map(|t| {
                t.coeff
                    * t.slots
                        .iter()
                        .enumerate()
                        .map(|(j, s)| s.left.coeffs()[row[j]] * s.right.coeffs()[col[j]].conj())
                        .product::<C64>()
            })
            .sum()
    }

    pub fn to_dense(&self) -> Result<DensityMatrix> {
        DensityMatrix::from_fn(self.lattice, self.order, |a, b| self.fourier_entry(a, b))
    }

    pub fn hs_inner(&self, other: &Self) -> Result<C64> {
        self.check_compatible(other)?;
        let g = cross_gram(&self.terms, &other.terms, self.order);
        let mut s = C64::new(0.0, 0.0);
        for (i, a) in self.terms.iter().enumerate() {
            for (j, b) in other.terms.iter().enumerate() {
                s += a.coeff.conj() * b.coeff * g[(i, j)];
            }
        }
        Ok(s)
    }

    /// Falls back to the Gram route when the coordinate matrix would exceed the dense budget.
    pub fn hs_norm_sq(&self) -> f64 {
        match ProductBasis::for_norms(&[self]).and_then(|b| b.coordinates(self)) {
            Ok(v) => v.iter().map(|x| x.norm_sqr()).sum(),
            Err(_) => self.hs_inner(self).map(|v| v.re.max(0.0)).unwrap_or(f64::NAN),
        }
    }

    pub fn hs_norm(&self) -> f64 {
        self.hs_norm_sq().sqrt()
    }

    /// Hilbert-Schmidt Gram matrix `<T_s, T_t>` of the individual (unit-coefficient) terms.
    pub fn term_gram(&self) -> DMatrix<C64> {
        cross_gram(&self.terms, &self.terms, self.order)
    }

    /// `Tr |gamma|` from the operator restricted to the span of its slot fields.
    pub fn trace_norm(&self) -> Result<f64> {
        if self.terms.is_empty() {
            return Ok(0.0);
        }
        let b = ProductBasis::new(&[self])?;
        Ok(nuclear_norm(&b.operator_matrix(self)?))
    }

    /// Spectrum (ascending) of the Hermitian part of the operator on the span of its slot
    /// fields; the remaining eigenvalues are zero.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if self.terms.is_empty() {
            return Ok(Vec::new());
        }
        let b = ProductBasis::new(&[self])?;
        let a = b.operator_matrix(self)?;
        Ok(hermitian_eigenvalues(&((&a + a.adjoint()) * C64::new(0.5, 0.0))))
    }

    /// `K_1 tensor K_2 tensor ...`, slots in the given order.
    pub fn tensor_product(factors: &[&ProductKernel]) -> Result<Self> {
        let first = factors.first().ok_or_else(|| Error::Argument("empty tensor product".into()))?;
        let lattice = first.lattice;
        if factors.iter().any(|f| f.lattice != lattice) {
            return Err(Error::Shape("tensor factors on different lattices".into()));
        }
        let mut terms = vec![ProductTerm { coeff: C64::new(1.0, 0.0), slots: Vec::new() }];
        for f in factors {
            terms = terms
                .iter()
                .flat_map(|a| {
                    f.terms.iter().map(move |b| {
                        let mut slots = a.slots.clone();
                        slots.extend(b.slots.iter().cloned());
                        ProductTerm { coeff: a.coeff * b.coeff, slots }
                    })
                })
                .collect();
        }
        let order = factors.iter().map(|f| f.order).sum();
        Ok(ProductKernel { lattice, order, terms })
    }

    /// Relabels particles: slot `j` of the output is slot `perm[j]` of the input.
    pub fn permute_slots(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.order {
            return Err(Error::Shape("permutation length differs from the order".into()));
        }
        let terms = self
            .terms
            .iter()
            .map(|t| ProductTerm { coeff: t.coeff, slots: perm.iter().map(|&p| t.slots[p].clone()).collect() })
            .collect();
        Ok(ProductKernel { lattice: self.lattice, order: self.order, terms })
    }
}

/// Inner products between distinct (by identity) fields.
struct InnerTable {
    index: HashMap<*const TorusField, usize>,
    gram: DMatrix<C64>,
}

impl InnerTable {
    fn new<'a>(fields: impl Iterator<Item = &'a Arc<TorusField>>) -> Self {
        let mut index = HashMap::new();
        let mut list: Vec<&Arc<TorusField>> = Vec::new();
        for f in fields {
            index.entry(Arc::as_ptr(f)).or_insert_with(|| {
                list.push(f);
                list.len() - 1
            });
        }
        let len = list.first().map(|f| f.coeffs().len()).unwrap_or(0);
        let m = DMatrix::from_fn(len, list.len(), |r, c| list[c].coeffs()[r]);
        let gram = m.adjoint() * &m / C64::new(crate::spectral::TORUS_VOLUME, 0.0);
        InnerTable { index, gram }
    }

    /// `<a, b>`.
    fn get(&self, a: &Arc<TorusField>, b: &Arc<TorusField>) -> C64 {
        self.gram[(self.index[&Arc::as_ptr(a)], self.index[&Arc::as_ptr(b)])]
    }
}

/// `<T_a, T_b>_{HS} = prod_j <chi_a, chi_b> <psi_b, psi_a>`.
fn cross_gram(a: &[ProductTerm], b: &[ProductTerm], order: usize) -> DMatrix<C64> {
    let fields: Vec<Arc<TorusField>> = a
        .iter()
        .chain(b)
        .flat_map(|t| t.slots.iter().flat_map(|s| [s.left.clone(), s.right.clone()]))
        .collect();
    let table = InnerTable::new(fields.iter());
    DMatrix::from_fn(a.len(), b.len(), |i, j| {
        (0..order)
            .map(|s| {
                let (x, y) = (&a[i].slots[s], &b[j].slots[s]);
                table.get(&x.left, &y.left) * table.get(&y.right, &x.right)
            })
            .product()
    })
}

/// Orthonormal coordinates for the fields of each slot, shared by a family of kernels.
///
/// Norms of sums with heavy cancellation computed from coordinates keep full relative
/// accuracy, unlike quadratic forms in a Gram matrix.
#[derive(Debug, Clone)]
pub struct ProductBasis {
    order: usize,
    slots: Vec<SlotBasis>,
}

#[derive(Debug, Clone)]
struct SlotBasis {
    index: HashMap<*const TorusField, usize>,
    coords: Vec<Vec<C64>>,
    rank: usize,
    pairs: Option<PairBasis>,
}

/// Orthonormal coordinates for the rank-one operators `|chi><psi|` met in one slot.
#[derive(Debug, Clone)]
struct PairBasis {
    index: HashMap<[*const TorusField; 2], usize>,
    coords: Vec<Vec<C64>>,
    rank: usize,
}

// Raw pointers are used only as identity keys into fields kept alive by the caller.
unsafe impl Send for SlotBasis {}
unsafe impl Sync for SlotBasis {}
unsafe impl Send for PairBasis {}
unsafe impl Sync for PairBasis {}

fn qr_columns(m: DMatrix<C64>) -> (Vec<Vec<C64>>, usize) {
    let cols = m.ncols();
    let r = m.qr().r();
    let rank = r.nrows();
    ((0..cols).map(|c| r.column(c).iter().copied().collect()).collect(), rank)
}

impl SlotBasis {
    fn new(fields: Vec<&Arc<TorusField>>) -> Self {
        let mut index = HashMap::new();
        let mut list: Vec<&Arc<TorusField>> = Vec::new();
        for f in fields {
            index.entry(Arc::as_ptr(f)).or_insert_with(|| {
                list.push(f);
                list.len() - 1
            });
        }
        let len = list[0].coeffs().len();
        let scale = crate::spectral::TORUS_VOLUME.powf(-0.5);
        let m = DMatrix::from_fn(len, list.len(), |r, c| list[c].coeffs()[r] * scale);
        let (coords, rank) = qr_columns(m);
        SlotBasis { index, coords, rank, pairs: None }
    }

    fn coords(&self, f: &Arc<TorusField>) -> Result<&[C64]> {
        self.index
            .get(&Arc::as_ptr(f))
            .map(|&i| self.coords[i].as_slice())
            .ok_or_else(|| Error::Argument("field not registered in this basis".into()))
    }

    fn pair_vector(&self, s: &RankOne) -> Result<Vec<C64>> {
        let r: Vec<C64> = self.coords(&s.right)?.iter().map(|v| v.conj()).collect();
        Ok(kron(self.coords(&s.left)?, &r))
    }

    /// Switches to pair coordinates when there are fewer independent pairs than `rank^2`.
    fn attach_pairs(&mut self, pairs: Vec<&RankOne>) -> Result<()> {
        let mut index = HashMap::new();
        let mut list: Vec<&RankOne> = Vec::new();
        for p in pairs {
            index.entry([Arc::as_ptr(&p.left), Arc::as_ptr(&p.right)]).or_insert_with(|| {
                list.push(p);
                list.len() - 1
            });
        }
        let full = self.rank * self.rank;
        if list.len() >= full || full.saturating_mul(list.len()) > dense_budget() {
            return Ok(());
        }
        let vecs = list.iter().map(|p| self.pair_vector(p)).collect::<Result<Vec<_>>>()?;
        let m = DMatrix::from_fn(full, list.len(), |r, c| vecs[c][r]);
        let (coords, rank) = qr_columns(m);
        self.pairs = Some(PairBasis { index, coords, rank });
        Ok(())
    }

    fn operator_dim(&self) -> usize {
        self.pairs.as_ref().map(|p| p.rank).unwrap_or(self.rank * self.rank)
    }

    fn operator_coords(&self, s: &RankOne) -> Result<Vec<C64>> {
        match &self.pairs {
            Some(p) => p
                .index
                .get(&[Arc::as_ptr(&s.left), Arc::as_ptr(&s.right)])
                .map(|&i| p.coords[i].clone())
                .ok_or_else(|| Error::Argument("pair not registered in this basis".into())),
            None => self.pair_vector(s),
        }
    }
}

fn kron(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

impl ProductBasis {
    fn slot_bases(kernels: &[&ProductKernel]) -> Result<(usize, Vec<SlotBasis>)> {
        let first = kernels.first().ok_or_else(|| Error::Argument("no kernels".into()))?;
        for k in kernels {
            first.check_compatible(k)?;
        }
        let order = first.order;
        let mut slots = Vec::with_capacity(order);
        for j in 0..order {
            let fields: Vec<&Arc<TorusField>> = kernels
                .iter()
                .flat_map(|k| k.terms.iter().flat_map(move |t| [&t.slots[j].left, &t.slots[j].right]))
                .collect();
            if fields.is_empty() {
                let zero = Arc::new(TorusField::zeros(first.lattice));
                slots.push(SlotBasis::new(vec![&zero]));
            } else {
                slots.push(SlotBasis::new(fields));
            }
        }
        Ok((order, slots))
    }

    /// Field coordinates in every slot; supports [`ProductBasis::operator_matrix`].
    pub fn new(kernels: &[&ProductKernel]) -> Result<Self> {
        let (order, slots) = Self::slot_bases(kernels)?;
        let dim: usize = slots.iter().map(|s| s.rank).product();
        if dim.saturating_mul(dim) > dense_budget() {
            return Err(Error::Budget(format!("coordinate matrix of side {dim} exceeds the dense budget")));
        }
        Ok(ProductBasis { order, slots })
    }

    /// Coordinates for Hilbert-Schmidt geometry only; each slot uses whichever of field
    /// products or rank-one pairs gives the shorter vector.
    pub fn for_norms(kernels: &[&ProductKernel]) -> Result<Self> {
        let (order, mut slots) = Self::slot_bases(kernels)?;
        for (j, slot) in slots.iter_mut().enumerate() {
            let pairs: Vec<&RankOne> = kernels.iter().flat_map(|k| k.terms.iter().map(move |t| &t.slots[j])).collect();
            if !pairs.is_empty() {
                slot.attach_pairs(pairs)?;
            }
        }
        let len = slots.iter().try_fold(1usize, |acc, s| acc.checked_mul(s.operator_dim()));
        match len {
            Some(l) if l <= dense_budget() => Ok(ProductBasis { order, slots }),
            _ => Err(Error::Budget("coordinate vector exceeds the dense budget".into())),
        }
    }

    /// Side length of the coordinate operator matrix.
    pub fn dim(&self) -> usize {
        self.slots.iter().map(|s| s.rank).product()
    }

    /// Length of [`ProductBasis::coordinates`].
    pub fn coordinate_len(&self) -> usize {
        self.slots.iter().map(|s| s.operator_dim()).product()
    }

    /// Orthonormal Hilbert-Schmidt coordinates of `k`.
    pub fn coordinates(&self, k: &ProductKernel) -> Result<Vec<C64>> {
        if k.order != self.order {
            return Err(Error::Shape("kernel order differs from the basis".into()));
        }
        let mut out = vec![C64::new(0.0, 0.0); self.coordinate_len()];
        for t in &k.terms {
            let mut v = vec![t.coeff];
            for (j, s) in t.slots.iter().enumerate() {
                v = kron(&v, &self.slots[j].operator_coords(s)?);
            }
            out.iter_mut().zip(&v).for_each(|(o, x)| *o += x);
        }
        Ok(out)
    }

    /// The operator in the product orthonormal basis (rows: unprimed, columns: primed).
    pub fn operator_matrix(&self, k: &ProductKernel) -> Result<DMatrix<C64>> {
        if k.order != self.order {
            return Err(Error::Shape("kernel order differs from the basis".into()));
        }
        let d = self.dim();
        let mut m = DMatrix::<C64>::zeros(d, d);
        for t in &k.terms {
            let mut l = vec![t.coeff];
            let mut r = vec![C64::new(1.0, 0.0)];
            for (j, s) in t.slots.iter().enumerate() {
                l = kron(&l, self.slots[j].coords(&s.left)?);
                r = kron(&r, self.slots[j].coords(&s.right)?);
            }
            for (a, la) in l.iter().enumerate() {
                if *la == C64::new(0.0, 0.0) {
                    continue;
                }
                for (b, rb) in r.iter().enumerate() {
                    m[(a, b)] += la * rb.conj();
                }
            }
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_lattice;
    use crate::spectral::random::{random_field, Envelope};

    fn sample(lattice: ModeLattice, order: usize, terms: usize, seed: u64) -> ProductKernel {
        let mut k = ProductKernel::zero(lattice, order);
        let mut s = 0;
        for t in 0..terms {
            let slots = (0..order)
                .map(|_| {
                    s += 2;
                    RankOne::new(
                        random_field(lattice, seed, s, Envelope::Flat),
                        random_field(lattice, seed, s + 1, Envelope::Flat),
                    )
                })
                .collect();
            k.push(ProductTerm { coeff: C64::new(1.0 + t as f64, -0.5 * t as f64), slots });
        }
        k
    }

    #[test]
    fn agrees_with_dense() {
        let lat = make_lattice(1).unwrap();
        let k = sample(lat, 2, 3, 1);
        let d = k.to_dense().unwrap();
        assert!((k.trace() - d.trace()).norm() < 1e-10 * d.trace().norm().max(1.0));
        assert!((k.hs_norm() - d.hs_norm()).abs() < 1e-10 * d.hs_norm());
        assert!((k.trace_norm().unwrap() - d.trace_norm()).abs() < 1e-9 * d.trace_norm());
        let pt = k.partial_trace(1).unwrap().to_dense().unwrap();
        assert!(pt.sub(&d.partial_trace(1).unwrap()).unwrap().hs_norm() < 1e-10 * pt.hs_norm());
        let ev = k.free_evolve(0.3).to_dense().unwrap();
        assert!(ev.sub(&d.free_evolve(0.3)).unwrap().hs_norm() < 1e-10 * d.hs_norm());
        let lc = k.laplacian_commutator().to_dense().unwrap();
        let dl = d.laplacian_commutator();
        assert!(lc.sub(&dl).unwrap().hs_norm() < 1e-10 * dl.hs_norm());
        let sw = k.sobolev_weight(1.0).to_dense().unwrap();
        let dw = d.sobolev_weight(1.0);
        assert!(sw.sub(&dw).unwrap().hs_norm() < 1e-10 * dw.hs_norm());
        let p = k.permute_slots(&[1, 0]).unwrap().to_dense().unwrap();
        let dp = d.permute_slots(&[1, 0]).unwrap();
        assert!(p.sub(&dp).unwrap().hs_norm() < 1e-10 * dp.hs_norm());
    }

    #[test]
    fn hermitian_spectrum_matches_dense() {
        let lat = make_lattice(1).unwrap();
        let atoms: Vec<(f64, TorusField)> =
            (0..3).map(|i| ([0.5, 0.3, 0.2][i], random_field(lat, 7, i as u64, Envelope::Flat))).collect();
        let k = ProductKernel::mixture(&atoms, 2).unwrap();
        let mut ev = k.eigenvalues().unwrap();
        ev.retain(|v| v.abs() > 1e-9);
        let mut dv = k.to_dense().unwrap().eigenvalues();
        dv.retain(|v| v.abs() > 1e-9);
        assert_eq!(ev.len(), dv.len());
        for (a, b) in ev.iter().zip(&dv) {
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0));
        }
    }
}
