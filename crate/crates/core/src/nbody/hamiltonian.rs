//! `H_N = -sum Delta_j + (c/N) sum_{l<j} V_N(x_l - x_j)` and its flow.

use std::f64::consts::PI;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::potential::ScaledPotential;
use super::state::{state_dim, NBodyState};
use crate::error::{Error, Result};
use crate::linalg::hermitian_eigen;
use crate::spectral::ModeLattice;

/// Largest dimension for dense assembly and eigendecomposition.
pub const DENSE_LIMIT: usize = 2048;

const KRYLOV_MAX: usize = 40;
const KRYLOV_TOL: f64 = 1e-13;

/// Matrix elements of one pair interaction in the orthonormal two-particle basis:
/// `<e_a e_b, V(x - y) e_c e_d> = (2pi)^{-3} hat V(n_a - n_c)` when `n_a + n_b = n_c + n_d`.
#[derive(Debug, Clone)]
pub struct PairStencil {
    len: usize,
    entries: Vec<Vec<(usize, usize, f64)>>,
}

impl PairStencil {
    pub fn new(potential: &ScaledPotential) -> Self {
        let lattice = potential.lattice();
        let len = lattice.len();
        let w = (2.0 * PI).powi(-3);
        let entries = (0..len * len)
            .into_par_iter()
            .map(|ab| {
                let (na, nb) = (lattice.mode(ab / len), lattice.mode(ab % len));
                let mut row = Vec::new();
                for c in 0..len {
                    let nc = lattice.mode(c);
                    let q = [na[0] - nc[0], na[1] - nc[1], na[2] - nc[2]];
                    if let Some(d) = lattice.index_of([nb[0] + q[0], nb[1] + q[1], nb[2] + q[2]]) {
                        let v = potential.coeff(q) * w;
                        if v != 0.0 {
                            row.push((c, d, v));
                        }
                    }
                }
                row
            })
            .collect();
        PairStencil { len, entries }
    }

    /// Adds `scale * V_{l j} x` to `out` on `order` particles.
    pub fn apply_pair(&self, order: usize, l: usize, j: usize, scale: f64, x: &[C64], out: &mut [C64]) {
        let len = self.len;
        let (sl, sj) = (len.pow((order - 1 - l) as u32), len.pow((order - 1 - j) as u32));
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let (dl, dj) = ((i / sl) % len, (i / sj) % len);
            let base = i - dl * sl - dj * sj;
            let mut acc = C64::new(0.0, 0.0);
            for &(c, d, w) in &self.entries[dl * len + dj] {
                acc += x[base + c * sl + d * sj] * w;
            }
            *o += acc * scale;
        });
    }

    /// Dense `V_{l j}` on `order` particles.
    pub fn pair_matrix(&self, order: usize, l: usize, j: usize) -> DMatrix<C64> {
        let dim = self.len.pow(order as u32);
        let mut m = DMatrix::zeros(dim, dim);
        let mut e = vec![C64::new(0.0, 0.0); dim];
        let mut col = vec![C64::new(0.0, 0.0); dim];
        for c in 0..dim {
            e[c] = C64::new(1.0, 0.0);
            col.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            self.apply_pair(order, l, j, 1.0, &e, &mut col);
            m.column_mut(c).iter_mut().zip(&col).for_each(|(a, b)| *a = *b);
            e[c] = C64::new(0.0, 0.0);
        }
        m
    }
}

/// `sum_j |n_j|^2` on `order` particles, first slot slowest.
pub fn kinetic_diagonal(lattice: ModeLattice, order: usize) -> Vec<f64> {
    let e = lattice.squared_norms();
    let len = lattice.len();
    (0..len.pow(order as u32))
        .map(|mut i| {
            let mut s = 0.0;
            for _ in 0..order {
                s += e[i % len];
                i /= len;
            }
            s
        })
        .collect()
}

#[derive(Debug)]
pub struct HamiltonianHandle {
    n: usize,
    lattice: ModeLattice,
    coupling: f64,
    potential: ScaledPotential,
    kinetic: Vec<f64>,
    stencil: PairStencil,
    eigen: OnceLock<(Vec<f64>, DMatrix<C64>)>,
}

impl HamiltonianHandle {
    /// `H_N` for `N = potential.n`, with the interaction multiplied by `coupling`.
    pub fn new(potential: &ScaledPotential, coupling: f64) -> Result<Self> {
        if !coupling.is_finite() {
            return Err(Error::Argument("coupling must be finite".into()));
        }
        let (n, lattice) = (potential.n, potential.lattice());
        state_dim(lattice, n)?;
        Ok(HamiltonianHandle {
            n,
            lattice,
            coupling,
            potential: potential.clone(),
            kinetic: kinetic_diagonal(lattice, n),
            stencil: PairStencil::new(potential),
            eigen: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lattice(&self) -> ModeLattice {
        self.lattice
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn potential(&self) -> &ScaledPotential {
        &self.potential
    }

    pub fn stencil(&self) -> &PairStencil {
        &self.stencil
    }

    pub fn dim(&self) -> usize {
        self.kinetic.len()
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut out: Vec<C64> = x.par_iter().zip(&self.kinetic).map(|(v, e)| v * e).collect();
        if self.coupling != 0.0 {
            let scale = self.coupling / self.n as f64;
            for l in 0..self.n {
                for j in l + 1..self.n {
                    self.stencil.apply_pair(self.n, l, j, scale, x, &mut out);
                }
            }
        }
        out
    }

    /// `<H Psi, Psi>`.
    pub fn energy(&self, psi: &NBodyState) -> Result<f64> {
        self.check(psi)?;
        let hx = self.apply(psi.amplitudes());
        Ok(psi.amplitudes().iter().zip(&hx).map(|(a, b)| (a.conj() * b).re).sum())
    }

    /// `<H^p Psi, Psi>`.
    pub fn moment(&self, psi: &NBodyState, p: usize) -> Result<f64> {
        self.check(psi)?;
        let mut v = psi.amplitudes().to_vec();
        for _ in 0..p {
            v = self.apply(&v);
        }
        Ok(psi.amplitudes().iter().zip(&v).map(|(a, b)| (a.conj() * b).re).sum())
    }

    pub fn assemble(&self) -> Result<DMatrix<C64>> {
        let dim = self.dim();
        if dim > DENSE_LIMIT {
            return Err(Error::Budget(format!(
                "dense H_N has dimension {dim} (limit {DENSE_LIMIT}); use Krylov stepping"
            )));
        }
        let mut m = DMatrix::zeros(dim, dim);
        let mut e = vec![C64::new(0.0, 0.0); dim];
        for c in 0..dim {
            e[c] = C64::new(1.0, 0.0);
            let col = self.apply(&e);
            m.column_mut(c).iter_mut().zip(&col).for_each(|(a, b)| *a = *b);
            e[c] = C64::new(0.0, 0.0);
        }
        Ok(m)
    }

    /// Cached eigenpairs of the assembled matrix.
    pub fn eigen(&self) -> Result<&(Vec<f64>, DMatrix<C64>)> {
        if let Some(e) = self.eigen.get() {
            return Ok(e);
        }
        let m = self.assemble()?;
        Ok(self.eigen.get_or_init(|| hermitian_eigen(&m)))
    }

    fn check(&self, psi: &NBodyState) -> Result<()> {
        if psi.n() != self.n || psi.lattice() != self.lattice {
            return Err(Error::Shape(format!(
                "state has N = {} at cutoff {}, Hamiltonian N = {} at cutoff {}",
                psi.n(),
                psi.lattice().cutoff(),
                self.n,
                self.lattice.cutoff()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Dense,
    Krylov,
    /// Dense when the dimension fits [`DENSE_LIMIT`].
    Auto,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Method::Dense),
            "krylov" => Ok(Method::Krylov),
            "auto" => Ok(Method::Auto),
            other => Err(Error::Config(format!("unknown evolution method `{other}`"))),
        }
    }
}

/// `e^{-i t H_N} Psi`.
pub fn nbody_evolve(psi: &NBodyState, h: &HamiltonianHandle, t: f64, method: Method) -> Result<NBodyState> {
    h.check(psi)?;
    if !t.is_finite() {
        return Err(Error::Argument("evolution time must be finite".into()));
    }
    if t == 0.0 {
        return Ok(psi.clone());
    }
    let dense = match method {
        Method::Dense => true,
        Method::Krylov => false,
        Method::Auto => h.dim() <= DENSE_LIMIT,
    };
    let amps = if dense { dense_evolve(h, psi.amplitudes(), t)? } else { krylov_evolve(h, psi.amplitudes(), t)? };
    Ok(psi.with_amplitudes(amps))
}

fn dense_evolve(h: &HamiltonianHandle, x: &[C64], t: f64) -> Result<Vec<C64>> {
    let (vals, vecs) = h.eigen()?;
    let v = nalgebra::DVector::from_column_slice(x);
    let mut c = vecs.adjoint() * v;
    c.iter_mut().zip(vals).for_each(|(a, l)| *a *= C64::from_polar(1.0, -t * l));
    Ok((vecs * c).iter().copied().collect())
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// One Lanczos step of length `h`, or `None` when `KRYLOV_MAX` vectors do not reach the tolerance.
fn krylov_step(ham: &HamiltonianHandle, x: &[C64], h: f64) -> Option<Vec<C64>> {
    let beta0 = dot(x, x).re.sqrt();
    if beta0 == 0.0 {
        return Some(x.to_vec());
    }
    let mut basis: Vec<Vec<C64>> = vec![x.iter().map(|v| v / beta0).collect()];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    for m in 1..=KRYLOV_MAX {
        let mut w = ham.apply(&basis[m - 1]);
        alpha.push(dot(&basis[m - 1], &w).re);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(a, b)| *a -= b * c);
            }
        }
        let b = dot(&w, &w).re.sqrt();
        let y = tridiagonal_exp(&alpha, &beta, h);
        let breakdown = b <= 1e-14 * alpha.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if breakdown || b * y[m - 1].norm() < KRYLOV_TOL {
            let mut out = vec![C64::new(0.0, 0.0); x.len()];
            for (q, c) in basis.iter().zip(&y) {
                out.iter_mut().zip(q).for_each(|(a, v)| *a += v * c * beta0);
            }
            return Some(out);
        }
        beta.push(b);
        basis.push(w.iter().map(|v| v / b).collect());
    }
    None
}

/// `exp(-i h T) e_1` for the symmetric tridiagonal `T`.
fn tridiagonal_exp(alpha: &[f64], beta: &[f64], h: f64) -> Vec<C64> {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let q = eig.eigenvectors[(i, j)] * eig.eigenvectors[(0, j)];
                    C64::from_polar(q, -h * eig.eigenvalues[j])
                })
                .sum()
        })
        .collect()
}

fn krylov_evolve(ham: &HamiltonianHandle, x: &[C64], t: f64) -> Result<Vec<C64>> {
    let mut state = x.to_vec();
    let mut done = 0.0;
    let mut h = t;
    let mut halvings = 0;
    while (t - done).abs() > 1e-15 * t.abs() {
        let step = if (t - done).abs() < h.abs() { t - done } else { h };
        match krylov_step(ham, &state, step) {
            Some(next) => {
                state = next;
                done += step;
            }
            None => {
                halvings += 1;
                if halvings > 40 {
                    return Err(Error::Convergence(format!(
                        "Lanczos did not converge with {KRYLOV_MAX} vectors at step {step:.3e}"
                    )));
                }
                h = step / 2.0;
            }
        }
    }
    Ok(state)
}
