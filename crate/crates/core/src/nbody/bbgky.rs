//! Finite-difference defects of marginal trajectories in the BBGKY hierarchy
//!
//! `i d/dt gamma^(k) = [-sum Delta_j + (c/N) sum_{l<j<=k} V_lj, gamma^(k)]
//!     + c (N-k)/N sum_{j<=k} Tr_{k+1} [V_{j,k+1}, gamma^(k+1)]`,
//!
//! evaluated on operator matrices in the orthonormal exponential basis.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::hamiltonian::{kinetic_diagonal, PairStencil};
use super::potential::ScaledPotential;
use crate::density::DensityMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BbgkyResidual {
    pub k: usize,
    /// Interior sample times.
    pub times: Vec<f64>,
    /// Hilbert-Schmidt norm of the defect at each interior time.
    pub norms: Vec<f64>,
}

impl BbgkyResidual {
    pub fn max(&self) -> f64 {
        self.norms.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BbgkySetup<'a> {
    pub potential: &'a ScaledPotential,
    pub n: usize,
    pub coupling: f64,
    /// Differentiate `e^{iKt} gamma e^{-iKt}` instead of `gamma`, which removes the
    /// free phases from the finite-difference error.
    pub interaction_picture: bool,
}

/// `[A, G]` for `A = sum_{l<j} V_lj` on `order` particles.
fn pair_commutator(stencil: &PairStencil, order: usize, pairs: &[(usize, usize)], g: &DMatrix<C64>) -> DMatrix<C64> {
    let dim = g.nrows();
    let mut out = DMatrix::<C64>::zeros(dim, dim);
    let gt = g.adjoint();
    let mut buf = vec![C64::new(0.0, 0.0); dim];
    for c in 0..dim {
        for (src, sign) in [(g, 1.0), (&gt, -1.0)] {
            buf.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            let col: Vec<C64> = src.column(c).iter().copied().collect();
            for &(l, j) in pairs {
                stencil.apply_pair(order, l, j, 1.0, &col, &mut buf);
            }
            if sign > 0.0 {
                out.column_mut(c).iter_mut().zip(&buf).for_each(|(a, b)| *a += b);
            } else {
                // (V G^*)^* = G V, stored transposed-conjugated
                for (r, b) in buf.iter().enumerate() {
                    out[(c, r)] -= b.conj();
                }
            }
        }
    }
    out
}

/// `Tr_{last}` of an operator matrix on `order` particles with `len` modes each.
fn trace_last(m: &DMatrix<C64>, len: usize) -> DMatrix<C64> {
    let d = m.nrows() / len;
    DMatrix::from_fn(d, d, |a, b| (0..len).map(|c| m[(a * len + c, b * len + c)]).sum())
}

fn conjugate_phases(g: &DMatrix<C64>, e: &[f64], t: f64) -> DMatrix<C64> {
    DMatrix::from_fn(g.nrows(), g.ncols(), |a, b| g[(a, b)] * C64::from_polar(1.0, t * (e[a] - e[b])))
}

/// Defect of `gamma^(k)` at each interior time by central differences. `upper` carries
/// `gamma^(k+1)` at the same times and is required unless `k = N`.
pub fn bbgky_residual(
    setup: &BbgkySetup,
    times: &[f64],
    lower: &[DensityMatrix],
    upper: Option<&[DensityMatrix]>,
) -> Result<BbgkyResidual> {
    if times.len() < 3 || lower.len() != times.len() {
        return Err(Error::Argument("need the order-k marginal at three or more times".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("times must be increasing".into()));
    }
    let k = lower[0].order();
    let n = setup.n;
    if k == 0 || k > n {
        return Err(Error::Argument(format!("order {k} outside 1..={n}")));
    }
    let upper = if k < n {
        let u = upper.ok_or_else(|| Error::Argument(format!("order {} marginal is required for k = {k} < N", k + 1)))?;
        if u.len() != times.len() || u.iter().any(|g| g.order() != k + 1) {
            return Err(Error::Shape("order k+1 trajectory does not match the times".into()));
        }
        Some(u)
    } else {
        None
    };
    let lattice = lower[0].lattice();
    let len = lattice.len();
    let stencil = PairStencil::new(setup.potential);
    let e = kinetic_diagonal(lattice, k);
    let inner_pairs: Vec<(usize, usize)> = (0..k).flat_map(|l| (l + 1..k).map(move |j| (l, j))).collect();
    let cross_pairs: Vec<(usize, usize)> = (0..k).map(|j| (j, k)).collect();
    let c_inner = setup.coupling / n as f64;
    let c_cross = setup.coupling * (n - k) as f64 / n as f64;

    let ops: Vec<DMatrix<C64>> = lower.iter().map(|g| g.operator_matrix()).collect();
    let rhs = |i: usize| -> DMatrix<C64> {
        let g = &ops[i];
        let mut r = if inner_pairs.is_empty() {
            DMatrix::zeros(g.nrows(), g.ncols())
        } else {
            pair_commutator(&stencil, k, &inner_pairs, g) * C64::new(c_inner, 0.0)
        };
        if let Some(u) = upper {
            if c_cross != 0.0 {
                let gu = u[i].operator_matrix();
                let comm = pair_commutator(&stencil, k + 1, &cross_pairs, &gu);
                r += trace_last(&comm, len) * C64::new(c_cross, 0.0);
            }
        }
        r
    };

    let mut out = BbgkyResidual { k, times: Vec::new(), norms: Vec::new() };
    for i in 1..times.len() - 1 {
        let (tm, t, tp) = (times[i - 1], times[i], times[i + 1]);
        let defect = if setup.interaction_picture {
            let d = (conjugate_phases(&ops[i + 1], &e, tp) - conjugate_phases(&ops[i - 1], &e, tm))
                * C64::new(0.0, 1.0 / (tp - tm));
            d - conjugate_phases(&rhs(i), &e, t)
        } else {
            let kin = DMatrix::from_fn(ops[i].nrows(), ops[i].ncols(), |a, b| ops[i][(a, b)] * (e[a] - e[b]));
            (&ops[i + 1] - &ops[i - 1]) * C64::new(0.0, 1.0 / (tp - tm)) - kin - rhs(i)
        };
        out.times.push(t);
        out.norms.push(defect.norm());
    }
    Ok(out)
}
