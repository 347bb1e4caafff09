//! Bosonic N-body wave functions on the truncated lattice and their marginals.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::spectral::random::{complex_gaussian, stream_rng};
use crate::spectral::{ModeLattice, TorusField};

/// Largest `(2M+1)^{3N}` that any N-body routine will allocate.
pub const KRYLOV_LIMIT: usize = 10_000_000;

const SYMMETRY_TOL: f64 = 1e-12;

/// `(2M+1)^{3N}`, rejected above [`KRYLOV_LIMIT`].
pub fn state_dim(lattice: ModeLattice, n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::Argument("particle number must be positive".into()));
    }
    let d = (lattice.len() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if d > KRYLOV_LIMIT as u128 {
        return Err(Error::Budget(format!(
            "N = {n} at cutoff {} needs {d} amplitudes (limit {KRYLOV_LIMIT})",
            lattice.cutoff()
        )));
    }
    Ok(d as usize)
}

/// `Psi_N` stored by its coordinates in the orthonormal basis `prod_j (2pi)^{-3/2} e^{i n_j x_j}`,
/// i.e. `a(n_1..n_N) = (2pi)^{-3N/2} hat Psi(n_1..n_N)`, first slot slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct NBodyState {
    n: usize,
    lattice: ModeLattice,
    amps: Vec<C64>,
    symmetric: bool,
}

impl NBodyState {
    pub fn from_amplitudes(lattice: ModeLattice, n: usize, amps: Vec<C64>, symmetric: bool) -> Result<Self> {
        let d = state_dim(lattice, n)?;
        if amps.len() != d {
            return Err(Error::Shape(format!("expected {d} amplitudes, got {}", amps.len())));
        }
        let s = NBodyState { n, lattice, amps, symmetric };
        if symmetric {
            let scale = s.norm().max(1.0);
            let defect = s.symmetry_defect();
            if defect > SYMMETRY_TOL * scale {
                return Err(Error::Argument(format!("state flagged symmetric has defect {defect:.2e}")));
            }
        }
        Ok(s)
    }

    /// `phi^{tensor N}`.
    pub fn factorized(phi: &TorusField, n: usize) -> Result<Self> {
        let lattice = phi.lattice();
        let d = state_dim(lattice, n)?;
        let len = lattice.len();
        let c = (2.0 * PI).powf(-1.5);
        let one: Vec<C64> = phi.coeffs().iter().map(|v| v * c).collect();
        let amps = (0..d)
            .into_par_iter()
            .map(|mut i| {
                let mut v = C64::new(1.0, 0.0);
                for _ in 0..n {
                    v *= one[i % len];
                    i /= len;
                }
                v
            })
            .collect();
        Ok(NBodyState { n, lattice, amps, symmetric: true })
    }

    /// Normalized symmetrization of i.i.d. complex Gaussian amplitudes.
    pub fn random_symmetric(lattice: ModeLattice, n: usize, seed: u64) -> Result<Self> {
        let d = state_dim(lattice, n)?;
        let mut rng = stream_rng(seed, 0);
        let amps = (0..d).map(|_| complex_gaussian(&mut rng)).collect();
        let s = NBodyState { n, lattice, amps, symmetric: false };
        let mut s = s.symmetrize().normalized()?;
        s.symmetric = true;
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lattice(&self) -> ModeLattice {
        self.lattice
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub(crate) fn with_amplitudes(&self, amps: Vec<C64>) -> Self {
        NBodyState { n: self.n, lattice: self.lattice, amps, symmetric: self.symmetric }
    }

    /// `||Psi||_{L^2(Lambda^N)}`.
    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let s = self.norm();
        if s == 0.0 {
            return Err(Error::Degenerate("cannot normalize the zero state".into()));
        }
        Ok(self.with_amplitudes(self.amps.iter().map(|v| v / s).collect()))
    }

    /// `<self, other>`, conjugate linear in `self`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.amps.len() != other.amps.len() {
            return Err(Error::Shape("states live on different spaces".into()));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn distance(&self, other: &Self) -> Result<f64> {
        if self.amps.len() != other.amps.len() {
            return Err(Error::Shape("states live on different spaces".into()));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt())
    }

    fn digits(&self, mut i: usize, out: &mut [usize]) {
        let len = self.lattice.len();
        for d in out.iter_mut().rev() {
            *d = i % len;
            i /= len;
        }
    }

    fn compose(&self, digits: &[usize]) -> usize {
        let len = self.lattice.len();
        digits.iter().fold(0, |acc, &d| acc * len + d)
    }

    /// Slot `j` of the result reads slot `perm[j]` of `self`.
    pub fn permute_slots(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.n];
        if perm.len() != self.n || perm.iter().any(|&p| p >= self.n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Argument(format!("{perm:?} is not a permutation of {} slots", self.n)));
        }
        let amps = (0..self.dim())
            .into_par_iter()
            .map(|i| {
                let mut d = vec![0; self.n];
                let mut e = vec![0; self.n];
                self.digits(i, &mut d);
                for (j, &p) in perm.iter().enumerate() {
                    e[p] = d[j];
                }
                self.amps[self.compose(&e)]
            })
            .collect();
        Ok(self.with_amplitudes(amps))
    }

    /// Largest `|Psi - Psi o tau|` over adjacent transpositions `tau`.
    pub fn symmetry_defect(&self) -> f64 {
        (0..self.n.saturating_sub(1))
            .map(|j| {
                let mut perm: Vec<usize> = (0..self.n).collect();
                perm.swap(j, j + 1);
                let p = self.permute_slots(&perm).expect("valid transposition");
                self.amps.iter().zip(&p.amps).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Average over all `N!` slot permutations.
    pub fn symmetrize(&self) -> Self {
        let perms = permutations(self.n);
        let mut acc = vec![C64::new(0.0, 0.0); self.dim()];
        for p in &perms {
            let q = self.permute_slots(p).expect("valid permutation");
            acc.iter_mut().zip(&q.amps).for_each(|(a, b)| *a += b);
        }
        let w = 1.0 / perms.len() as f64;
        acc.iter_mut().for_each(|a| *a *= w);
        NBodyState { symmetric: true, ..self.with_amplitudes(acc) }
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// `gamma^(k) = Tr_{k+1..N} |Psi><Psi|`, and the zero matrix when `k > N`.
pub fn marginal(psi: &NBodyState, k: usize) -> Result<DensityMatrix> {
    if k == 0 {
        return Err(Error::Argument("marginal order must be at least 1".into()));
    }
    if k > psi.n {
        return DensityMatrix::zeros(psi.lattice, k);
    }
    let dk = psi.lattice.len().pow(k as u32);
    let rest = psi.dim() / dk;
    let scale = (2.0 * PI).powi(3 * k as i32);
    let x = &psi.amps;
    let mut data = vec![C64::new(0.0, 0.0); dk * dk];
    data.par_chunks_mut(dk).enumerate().for_each(|(a, row)| {
        let xa = &x[a * rest..(a + 1) * rest];
        for (b, v) in row.iter_mut().enumerate() {
            let xb = &x[b * rest..(b + 1) * rest];
            *v = xa.iter().zip(xb).map(|(p, q)| p * q.conj()).sum::<C64>() * scale;
        }
    });
    DensityMatrix::from_data(psi.lattice, k, data)
}
