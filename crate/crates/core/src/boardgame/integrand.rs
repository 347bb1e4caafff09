//! The Duhamel integrand `J^k(sigma; t, t_1, ..., t_r)`, its factorization over the trees
//! of the forest, and the kernel tableau `theta_a` of each tree.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::Rng;

use super::forest::{TreeForest, Vertex};
use super::maps::{path_to_representative, upper_echelon_classes, CollisionMap};
use crate::density::{DensityOperator, ProductKernel, ProductTerm, RankOne};
use crate::error::{Error, Result};
use crate::nls::free_propagate;
use crate::spectral::random::{random_unit_field, stream_rng, Envelope};
use crate::spectral::{norm_sq, ModeLattice, TorusField};

fn check_times(sigma: &CollisionMap, times: &[f64]) -> Result<()> {
    if times.len() != sigma.r() {
        return Err(Error::Shape(format!("{} times for r = {}", times.len(), sigma.r())));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Argument("non-finite time".into()));
    }
    Ok(())
}

/// `U(t - t_1) B_{sigma(k+1),k+1} U(t_1 - t_2) ... B_{sigma(k+r),k+r} U(t_r - s) state`,
/// applied rightmost first; `s` is `leaf_time`.
pub fn duhamel_integrand_from_state<D: DensityOperator>(
    sigma: &CollisionMap,
    state: &D,
    t: f64,
    times: &[f64],
    leaf_time: f64,
) -> Result<D> {
    check_times(sigma, times)?;
    let (k, r) = (sigma.k(), sigma.r());
    if state.order() != k + r {
        return Err(Error::Shape(format!("state of order {} for k + r = {}", state.order(), k + r)));
    }
    let mut cur = state.free_evolve(times.last().copied().unwrap_or(t) - leaf_time);
    for l in (1..=r).rev() {
        cur = cur.collision_apply(sigma.at(k + l))?;
        let before = if l == 1 { t } else { times[l - 2] };
        cur = cur.free_evolve(before - times[l - 1]);
    }
    Ok(cur)
}

/// `J^k` on `|phi><phi|^{tensor (k+r)}` with the leaves at `t_r` (at `0` when `r = 0`).
pub fn evaluate_duhamel_integrand<D: DensityOperator>(
    sigma: &CollisionMap,
    phi: &TorusField,
    t: f64,
    times: &[f64],
) -> Result<D> {
    check_times(sigma, times)?;
    let state = D::factorized(phi, sigma.k() + sigma.r()).map_err(|e| match e {
        Error::Budget(m) => Error::Budget(format!("{m}; evaluate the tree factors instead")),
        other => other,
    })?;
    duhamel_integrand_from_state(sigma, &state, t, times, times.last().copied().unwrap_or(0.0))
}

/// Collision map of one tree with its particles relabeled `1..=m_j+1` in creation order,
/// together with the time labels `l_{j,a}`.
pub fn tree_map(forest: &TreeForest, j: usize) -> Result<(CollisionMap, Vec<usize>)> {
    let tree = &forest.trees[j - 1];
    let k = forest.k();
    let label = |p: usize| -> usize {
        if p == j {
            1
        } else {
            tree.internal.iter().position(|&l| k + l == p).map(|a| a + 2).unwrap_or(0)
        }
    };
    let rho = tree.internal.iter().map(|&l| label(forest.sigma.at(k + l))).collect();
    Ok((CollisionMap::new(1, rho)?, tree.internal.clone()))
}

#[derive(Debug, Clone)]
pub struct TreeFactors {
    /// `J^1_j` in root order.
    pub factors: Vec<ProductKernel>,
    pub product: ProductKernel,
}

/// Each `J^1_j` by operator composition inside its tree, and their tensor product.
pub fn evaluate_tree_factors(forest: &TreeForest, phi: &TorusField, t: f64, times: &[f64]) -> Result<TreeFactors> {
    check_times(&forest.sigma, times)?;
    let leaf = times.last().copied().unwrap_or(0.0);
    let mut factors = Vec::with_capacity(forest.k());
    for j in 1..=forest.k() {
        let (map, labels) = tree_map(forest, j)?;
        let tj: Vec<f64> = labels.iter().map(|&l| times[l - 1]).collect();
        let state = ProductKernel::factorized(phi, map.r() + 1)?;
        factors.push(duhamel_integrand_from_state(&map, &state, t, &tj, leaf)?);
    }
    let refs: Vec<&ProductKernel> = factors.iter().collect();
    let product = ProductKernel::tensor_product(&refs)?;
    Ok(TreeFactors { factors, product })
}

/// One `(chi, psi)` term of `theta_a`; the flags mark fields that depend on `psi~ = |phi|^2 phi`.
#[derive(Debug, Clone)]
pub struct ThetaTerm {
    pub coeff: f64,
    pub chi: Arc<TorusField>,
    pub psi: Arc<TorusField>,
    pub chi_distinguished: bool,
    pub psi_distinguished: bool,
}

/// `theta_a = sum_beta c_beta chi_beta(x) conj(psi_beta(x'))` at the internal vertex `v_l`.
#[derive(Debug, Clone)]
pub struct ThetaFactor {
    pub vertex: usize,
    /// Position `a` of the vertex inside its tree, from 1.
    pub index: usize,
    pub time: f64,
    pub terms: Vec<ThetaTerm>,
    /// `2^{m_j - a + 1}`.
    pub bound: usize,
}

#[derive(Debug, Clone)]
pub struct ThetaTableau {
    pub tree: usize,
    pub factors: Vec<ThetaFactor>,
    /// Terms hanging from the root, before the final propagator `U(t - time)`.
    pub root_terms: Vec<ThetaTerm>,
    pub root_time: f64,
}

impl ThetaTableau {
    /// `J^1_j = U(t - t_{l_{j,1}}) theta_1`.
    pub fn resum(&self, t: f64) -> Result<ProductKernel> {
        let lattice = self.root_terms[0].chi.lattice();
        let terms = self
            .root_terms
            .iter()
            .map(|b| ProductTerm {
                coeff: C64::new(b.coeff, 0.0),
                slots: vec![RankOne { left: b.chi.clone(), right: b.psi.clone() }],
            })
            .collect();
        Ok(ProductKernel::from_terms(lattice, 1, terms)?.free_evolve(t - self.root_time))
    }

    pub fn within_bounds(&self) -> bool {
        self.factors.iter().all(|f| f.terms.len() <= f.bound)
    }
}

fn cubic(f: &Arc<TorusField>, g: &Arc<TorusField>, h: &Arc<TorusField>) -> Arc<TorusField> {
    if Arc::ptr_eq(f, g) && Arc::ptr_eq(g, h) {
        Arc::new(f.cubic_nonlinearity())
    } else {
        Arc::new(TorusField::cubic_product(f, g, h))
    }
}

fn dress(terms: &[ThetaTerm], dt: f64) -> Vec<ThetaTerm> {
    if dt == 0.0 {
        return terms.to_vec();
    }
    terms
        .iter()
        .map(|b| {
            let chi = Arc::new(free_propagate(&b.chi, dt));
            let psi = if Arc::ptr_eq(&b.chi, &b.psi) { chi.clone() } else { Arc::new(free_propagate(&b.psi, dt)) };
            ThetaTerm { chi, psi, ..b.clone() }
        })
        .collect()
}

/// Bottom-up `theta_a` for tree `j`: leaves contribute `phi(x) conj(phi(x'))` at `t_r`, and
/// every internal vertex combines its propagated children in a gain and a loss form,
/// the continuing child's kernel split across `(x, x')` and the created child's
/// contracted at `x` or at `x'`.
pub fn expand_theta_kernels(forest: &TreeForest, j: usize, phi: &TorusField, times: &[f64]) -> Result<ThetaTableau> {
    check_times(&forest.sigma, times)?;
    if j == 0 || j > forest.k() {
        return Err(Error::Argument(format!("tree {j} outside 1..={}", forest.k())));
    }
    let tree = &forest.trees[j - 1];
    let leaf_time = times.last().copied().unwrap_or(0.0);
    let phi = Arc::new(phi.clone());
    let leaf = vec![ThetaTerm {
        coeff: 1.0,
        chi: phi.clone(),
        psi: phi,
        chi_distinguished: false,
        psi_distinguished: false,
    }];
    let m = tree.m();
    let mut done: Vec<Option<ThetaFactor>> = vec![None; forest.r() + 1];
    for (a0, &l) in tree.internal.iter().enumerate().rev() {
        let tl = times[l - 1];
        let child = |v: Vertex| -> (Vec<ThetaTerm>, f64) {
            match v {
                Vertex::Internal(c) => {
                    let f = done[c].as_ref().expect("children are expanded first");
                    (f.terms.clone(), f.time)
                }
                _ => (leaf.clone(), leaf_time),
            }
        };
        let node = forest.node(l);
        let (c1, s1) = child(node.continuing);
        let (c2, s2) = child(node.created);
        let (c1, c2) = (dress(&c1, tl - s1), dress(&c2, tl - s2));
        let distinguished_vertex = forest.distinguished_vertex() == Some(l);
        let mut terms = Vec::with_capacity(2 * c1.len() * c2.len());
        for x in &c1 {
            for y in &c2 {
                let gain = cubic(&x.chi, &y.chi, &y.psi);
                terms.push(ThetaTerm {
                    coeff: x.coeff * y.coeff,
                    chi: gain,
                    psi: x.psi.clone(),
                    chi_distinguished: distinguished_vertex || x.chi_distinguished || y.chi_distinguished || y.psi_distinguished,
                    psi_distinguished: x.psi_distinguished,
                });
            }
        }
        for x in &c1 {
            for y in &c2 {
                let loss = cubic(&x.psi, &y.psi, &y.chi);
                terms.push(ThetaTerm {
                    coeff: -x.coeff * y.coeff,
                    chi: x.chi.clone(),
                    psi: loss,
                    chi_distinguished: x.chi_distinguished,
                    psi_distinguished: distinguished_vertex || x.psi_distinguished || y.chi_distinguished || y.psi_distinguished,
                });
            }
        }
        let a = a0 + 1;
        done[l] = Some(ThetaFactor { vertex: l, index: a, time: tl, terms, bound: 1usize << (m - a + 1) });
    }
    let (root_terms, root_time) = match tree.child {
        Vertex::Internal(l) => {
            let f = done[l].as_ref().expect("root child expanded");
            (f.terms.clone(), f.time)
        }
        _ => (leaf, leaf_time),
    };
    let factors = tree.internal.iter().map(|&l| done[l].take().expect("expanded")).collect();
    Ok(ThetaTableau { tree: j, factors, root_terms, root_time })
}

/// `sum_i p_i |f_i><f_i|` where `f_i` is the normalized sum of exponentials on a single
/// energy shell, so the state commutes with `U(t)` without being translation invariant.
pub fn stationary_state(lattice: ModeLattice, atoms: &[(f64, Vec<[i64; 3]>)]) -> Result<ProductKernel> {
    let fields = atoms
        .iter()
        .map(|(p, modes)| {
            let shell = modes.first().map(|&n| norm_sq(n)).ok_or_else(|| Error::Argument("empty atom".into()))?;
            if modes.iter().any(|&n| norm_sq(n) != shell) {
                return Err(Error::Argument("atom modes lie on different energy shells".into()));
            }
            let mut f = TorusField::zeros(lattice);
            for &n in modes {
                f.axpy(C64::new(1.0, 0.0), &TorusField::plane_wave(lattice, n, C64::new(1.0, 0.0))?);
            }
            Ok((*p, f.normalized()?))
        })
        .collect::<Result<Vec<_>>>()?;
    ProductKernel::mixture(&fields, 1)
}

/// Monte-Carlo comparison for one class.
#[derive(Debug, Clone)]
pub struct ClassIntegralRow {
    pub representative: CollisionMap,
    pub size: usize,
    /// `sum_{rho in class} int_{simplex} L(J(rho; s)) ds`.
    pub class_sum: C64,
    /// `int L(J(sigma; s)) ds` over the images of the simplex under the move permutations.
    pub representative_integral: C64,
    pub std_error: f64,
}

impl ClassIntegralRow {
    pub fn agrees(&self, sigmas: f64) -> bool {
        (self.class_sum - self.representative_integral).norm()
            <= sigmas * self.std_error + 1e-12 * self.class_sum.norm().max(self.representative_integral.norm())
    }
}

#[derive(Debug, Clone)]
pub struct ClassIntegralReport {
    pub k: usize,
    pub r: usize,
    /// Largest relative HS gap of `J(rho; s) - J(sigma; pi(s))` over members and sample times.
    pub max_pointwise: f64,
    pub rows: Vec<ClassIntegralRow>,
}

fn in_simplex(t: f64, s: &[f64]) -> bool {
    s.first().is_none_or(|&s1| s1 <= t) && s.windows(2).all(|w| w[0] >= w[1]) && s.last().is_none_or(|&v| v >= 0.0)
}

/// Checks that summing simplex integrals over a class equals integrating the
/// representative over the permuted simplices, for the stationary product state
/// `omega^{tensor (k+r)}`. The scalar functional is the Hilbert-Schmidt pairing with a
/// seeded random rank-one product operator.
pub fn class_integral_check(
    k: usize,
    r: usize,
    omega: &ProductKernel,
    t: f64,
    samples: usize,
    seed: u64,
) -> Result<ClassIntegralReport> {
    if omega.order() != 1 {
        return Err(Error::Shape("one-particle state expected".into()));
    }
    if samples < 2 {
        return Err(Error::TooFewSamples(format!("{samples} samples")));
    }
    let refs = vec![omega; k + r];
    let state = ProductKernel::tensor_product(&refs)?;
    let probe = {
        let lattice = omega.lattice();
        let slots = (0..k)
            .map(|i| {
                RankOne::new(
                    random_unit_field(lattice, seed, 1000 + 2 * i as u64, Envelope::Flat),
                    random_unit_field(lattice, seed, 1001 + 2 * i as u64, Envelope::Flat),
                )
            })
            .collect();
        ProductKernel::from_terms(lattice, k, vec![ProductTerm { coeff: C64::new(1.0, 0.0), slots }])?
    };
    let functional = |j: &ProductKernel| -> C64 { probe.hs_inner(j).expect("orders match") };
    let volume = t.powi(r as i32);
    let mut rows = Vec::new();
    let mut max_pointwise: f64 = 0.0;
    for (ci, class) in upper_echelon_classes(k, r)?.into_iter().enumerate() {
        let sigma = &class.representative;
        let perms: Vec<(CollisionMap, Vec<usize>)> = class
            .members
            .iter()
            .map(|rho| {
                let (rep, perm) = path_to_representative(rho);
                debug_assert_eq!(&rep, sigma);
                (rho.clone(), perm)
            })
            .collect();
        let eval = |map: &CollisionMap, s: &[f64]| -> Result<ProductKernel> {
            duhamel_integrand_from_state(map, &state, t, s, s.last().copied().unwrap_or(0.0))
        };
        let mut rng = stream_rng(seed, 3 * ci as u64);
        for _ in 0..2 {
            let mut s: Vec<f64> = (0..r).map(|_| rng.random::<f64>() * t).collect();
            s.sort_by(|a, b| b.total_cmp(a));
            for (rho, perm) in &perms {
                let direct = eval(rho, &s)?;
                let moved: Vec<f64> = perm.iter().map(|&p| s[p]).collect();
                let via = eval(sigma, &moved)?;
                let gap = ProductKernel::combination_norm(&[(C64::new(1.0, 0.0), &direct), (C64::new(-1.0, 0.0), &via)])?;
                max_pointwise = max_pointwise.max(gap / direct.hs_norm().max(f64::MIN_POSITIVE));
            }
        }
        let stats = |stream: u64, f: &mut dyn FnMut(&[f64]) -> Result<C64>| -> Result<(C64, f64)> {
            let mut rng = stream_rng(seed, stream);
            let (mut sum, mut sq) = (C64::new(0.0, 0.0), 0.0);
            for _ in 0..samples {
                let s: Vec<f64> = (0..r).map(|_| rng.random::<f64>() * t).collect();
                let v = f(&s)?;
                sum += v;
                sq += v.norm_sqr();
            }
            let n = samples as f64;
            let mean = sum / n;
            let var = ((sq / n - mean.norm_sqr()) * n / (n - 1.0)).max(0.0);
            Ok((mean * volume, (var / n).sqrt() * volume))
        };
        let (lhs, e1) = stats(3 * ci as u64 + 1, &mut |s| {
            if !in_simplex(t, s) {
                return Ok(C64::new(0.0, 0.0));
            }
            let mut acc = C64::new(0.0, 0.0);
            for (rho, _) in &perms {
                acc += functional(&eval(rho, s)?);
            }
            Ok(acc)
        })?;
        let (rhs, e2) = stats(3 * ci as u64 + 2, &mut |s| {
            let hits = perms
                .iter()
                .filter(|(_, perm)| {
                    let mut u = vec![0.0; r];
                    for (l, &p) in perm.iter().enumerate() {
                        u[p] = s[l];
                    }
                    in_simplex(t, &u)
                })
                .count();
            if hits == 0 {
                return Ok(C64::new(0.0, 0.0));
            }
            Ok(functional(&eval(sigma, s)?) * hits as f64)
        })?;
        rows.push(ClassIntegralRow {
            representative: sigma.clone(),
            size: class.size(),
            class_sum: lhs,
            representative_integral: rhs,
            std_error: (e1 * e1 + e2 * e2).sqrt(),
        });
    }
    Ok(ClassIntegralReport { k, r, max_pointwise, rows })
}
