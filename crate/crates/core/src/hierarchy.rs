//! Residual checks for candidate solutions of the GP hierarchy
//! `i d/dt gamma^(k) + (Delta_x - Delta_x') gamma^(k) = lambda B_{k+1} gamma^(k+1)`.

use std::io::Write;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::density::{coordinate_norm, DensityOperator, HierarchySequence};
use crate::error::{Error, Result};
use crate::nls::{evolve_to, nls_evolve, NlsParams};
use crate::spectral::TorusField;

/// Finite atomic measure `sum_i p_i delta_{phi_i}` on the unit ball.
#[derive(Debug, Clone)]
pub struct AtomicDeFinettiMeasure {
    atoms: Vec<(f64, TorusField)>,
}

impl AtomicDeFinettiMeasure {
    pub fn new(atoms: Vec<(f64, TorusField)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Argument("measure needs at least one atom".into()));
        }
        let lattice = atoms[0].1.lattice();
        let mut total = 0.0;
        for (p, phi) in &atoms {
            if !(*p >= 0.0 && *p <= 1.0) {
                return Err(Error::Argument(format!("atom weight {p} outside [0, 1]")));
            }
            if phi.lattice() != lattice {
                return Err(Error::Shape("atoms live on different lattices".into()));
            }
            if phi.l2_norm() > 1.0 + 1e-12 {
                return Err(Error::Argument(format!("atom norm {} exceeds 1", phi.l2_norm())));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Argument(format!("atom weights sum to {total}, not 1")));
        }
        Ok(AtomicDeFinettiMeasure { atoms })
    }

    pub fn single(phi: TorusField) -> Result<Self> {
        Self::new(vec![(1.0, phi)])
    }

    pub fn atoms(&self) -> &[(f64, TorusField)] {
        &self.atoms
    }
}

/// `gamma^(k)(t) = sum_i p_i |S_t phi_i><S_t phi_i|^{tensor k}`.
pub fn definetti_evolve<D: DensityOperator>(
    mu: &AtomicDeFinettiMeasure,
    t: f64,
    k: usize,
    params: &NlsParams,
) -> Result<D> {
    let evolved: Vec<(f64, D)> = mu
        .atoms
        .iter()
        .map(|(p, phi)| Ok((*p, D::factorized(&evolve_to(phi, t, params)?, k)?)))
        .collect::<Result<_>>()?;
    let items: Vec<(C64, &D)> = evolved.iter().map(|(p, d)| (C64::new(*p, 0.0), d)).collect();
    D::linear_combination(&items)
}

/// Samples of `(gamma^(1)(t), ..., gamma^(K+1)(t))` on a common time grid.
#[derive(Debug, Clone)]
pub struct HierarchyTrajectory<D> {
    pub lambda: f64,
    pub times: Vec<f64>,
    pub sequences: Vec<HierarchySequence<D>>,
}

impl<D: DensityOperator> HierarchyTrajectory<D> {
    pub fn new(lambda: f64, times: Vec<f64>, sequences: Vec<HierarchySequence<D>>) -> Result<Self> {
        if times.len() != sequences.len() {
            return Err(Error::Shape(format!("{} times but {} sequences", times.len(), sequences.len())));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument("trajectory times must be increasing".into()));
        }
        if let Some(first) = sequences.first() {
            if sequences
                .iter()
                .any(|s| s.lattice() != first.lattice() || s.max_order() != first.max_order())
            {
                return Err(Error::Shape("sequences differ in lattice or length".into()));
            }
        }
        Ok(HierarchyTrajectory { lambda, times, sequences })
    }

    /// Mixture trajectory `sum_i p_i |S_t phi_i><S_t phi_i|^{tensor k}`, `k = 1..=max_order`.
    pub fn from_measure(
        mu: &AtomicDeFinettiMeasure,
        params: &NlsParams,
        times: &[f64],
        max_order: usize,
    ) -> Result<Self> {
        let runs: Vec<Vec<TorusField>> = mu
            .atoms
            .par_iter()
            .map(|(_, phi)| nls_evolve(phi, params, times).map(|t| t.states))
            .collect::<Result<_>>()?;
        let sequences = (0..times.len())
            .map(|i| {
                let entries = (1..=max_order)
                    .map(|k| {
                        let parts: Vec<(f64, D)> = mu
                            .atoms
                            .iter()
                            .zip(&runs)
                            .map(|((p, _), states)| Ok((*p, D::factorized(&states[i], k)?)))
                            .collect::<Result<_>>()?;
                        let items: Vec<(C64, &D)> = parts.iter().map(|(p, d)| (C64::new(*p, 0.0), d)).collect();
                        D::linear_combination(&items)
                    })
                    .collect::<Result<Vec<D>>>()?;
                HierarchySequence::new(entries)
            })
            .collect::<Result<_>>()?;
        Self::new(params.lambda, times.to_vec(), sequences)
    }

    /// `|S_t phi><S_t phi|^{tensor k}`, `k = 1..=max_order`.
    pub fn factorized(phi: &TorusField, params: &NlsParams, times: &[f64], max_order: usize) -> Result<Self> {
        Self::from_measure(&AtomicDeFinettiMeasure::single(phi.clone())?, params, times, max_order)
    }

    /// `U^{(k)}(t) gamma_0^(k)`, the solution with `lambda = 0`.
    pub fn free(initial: &HierarchySequence<D>, times: &[f64]) -> Result<Self> {
        let sequences = times
            .iter()
            .map(|&t| HierarchySequence::new(initial.entries().iter().map(|g| g.free_evolve(t)).collect()))
            .collect::<Result<_>>()?;
        Self::new(0.0, times.to_vec(), sequences)
    }

    pub fn max_order(&self) -> usize {
        self.sequences.first().map(|s| s.max_order()).unwrap_or(0)
    }

    fn entry(&self, i: usize, k: usize) -> &D {
        self.sequences[i].get(k).expect("order checked by caller")
    }

    fn check_order(&self, k: usize) -> Result<()> {
        if k == 0 || k + 1 > self.max_order() {
            return Err(Error::Argument(format!(
                "order {k} needs gamma^({}) but the trajectory stops at {}",
                k + 1,
                self.max_order()
            )));
        }
        Ok(())
    }
}

/// How `i d/dt gamma^(k) + (Delta - Delta') gamma^(k)` is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeDerivative {
    /// Three-point stencil on `gamma^(k)`, plus the commutator as a Fourier multiplier.
    Direct,
    /// Three-point stencil on `U(t_i - t) gamma^(k)(t)`, which equals the sum of both terms
    /// without differencing the fast free phases.
    InteractionPicture,
}

/// `(t_i, ||i d/dt gamma^(k) + (Delta - Delta') gamma^(k) - lambda B_{k+1} gamma^(k+1)||_{HS})`
/// at every interior sample; the derivative is the second-order three-point stencil in the
/// interaction picture.
pub fn gp_residual<D: DensityOperator>(traj: &HierarchyTrajectory<D>, k: usize) -> Result<Vec<(f64, f64)>> {
    gp_residual_with(traj, k, TimeDerivative::InteractionPicture)
}

pub fn gp_residual_with<D: DensityOperator>(
    traj: &HierarchyTrajectory<D>,
    k: usize,
    scheme: TimeDerivative,
) -> Result<Vec<(f64, f64)>> {
    traj.check_order(k)?;
    let n = traj.times.len();
    if n < 3 {
        return Err(Error::TooFewSamples(format!("residual needs at least 3 samples, got {n}")));
    }
    let lam = C64::new(traj.lambda, 0.0);
    let i_unit = C64::new(0.0, 1.0);
    (1..n - 1)
        .into_par_iter()
        .map(|i| {
            let (t0, t1, t2) = (traj.times[i - 1], traj.times[i], traj.times[i + 1]);
            let (h1, h2) = (t1 - t0, t2 - t1);
            let c0 = -h2 / (h1 * (h1 + h2));
            let c1 = (h2 - h1) / (h1 * h2);
            let c2 = h1 / (h2 * (h1 + h2));
            let coll = traj.entry(i, k + 1).full_collision()?;
            match scheme {
                TimeDerivative::Direct => {
                    let lap = traj.entry(i, k).laplacian_commutator();
                    let mut items = vec![
                        (i_unit * c0, traj.entry(i - 1, k)),
                        (i_unit * c2, traj.entry(i + 1, k)),
                        (C64::new(1.0, 0.0), &lap),
                        (-lam, &coll),
                    ];
                    if c1 != 0.0 {
                        items.push((i_unit * c1, traj.entry(i, k)));
                    }
                    Ok((t1, D::combination_norm(&items)?))
                }
                TimeDerivative::InteractionPicture => {
                    let before = traj.entry(i - 1, k).free_evolve(h1);
                    let after = traj.entry(i + 1, k).free_evolve(-h2);
                    let mut items = vec![(i_unit * c0, &before), (i_unit * c2, &after), (-lam, &coll)];
                    if c1 != 0.0 {
                        items.push((i_unit * c1, traj.entry(i, k)));
                    }
                    Ok((t1, D::combination_norm(&items)?))
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    Simpson,
    Trapezoid,
}

/// Hilbert-Schmidt defect of the mild form
/// `gamma^(k)(t) = U(t) gamma_0^(k) - i lambda int_0^t U(t-s) B_{k+1} gamma^(k+1)(s) ds`
/// at the quadrature nodes `t = s_j`, using every `stride`-th sample so that the final time
/// is split into `quadrature_steps` subintervals. Simpson reports even `j` only.
pub fn duhamel_defect<D: DensityOperator>(
    traj: &HierarchyTrajectory<D>,
    k: usize,
    quadrature_steps: usize,
    rule: QuadratureRule,
) -> Result<Vec<(f64, f64)>> {
    traj.check_order(k)?;
    let intervals = traj.times.len().saturating_sub(1);
    if quadrature_steps == 0 || intervals < quadrature_steps || intervals % quadrature_steps != 0 {
        return Err(Error::TooFewSamples(format!(
            "{intervals} sample intervals cannot carry {quadrature_steps} quadrature subintervals"
        )));
    }
    if rule == QuadratureRule::Simpson && quadrature_steps % 2 != 0 {
        return Err(Error::Argument("Simpson needs an even number of subintervals".into()));
    }
    if (traj.times[0]).abs() > 0.0 {
        return Err(Error::Argument("the trajectory must start at t = 0".into()));
    }
    let stride = intervals / quadrature_steps;
    let nodes: Vec<usize> = (0..=quadrature_steps).map(|i| i * stride).collect();
    let h = traj.times[nodes[1]] - traj.times[0];
    for w in nodes.windows(2) {
        let d = traj.times[w[1]] - traj.times[w[0]];
        if (d - h).abs() > 1e-9 * h {
            return Err(Error::Argument("quadrature nodes must be equally spaced".into()));
        }
    }
    // interaction picture: U(-s) gamma^(k)(s) and U(-s) B gamma^(k+1)(s)
    let states: Vec<D> = nodes.par_iter().map(|&i| traj.entry(i, k).free_evolve(-traj.times[i])).collect();
    let sources: Vec<D> = nodes
        .par_iter()
        .map(|&i| Ok(traj.entry(i, k + 1).full_collision()?.free_evolve(-traj.times[i])))
        .collect::<Result<_>>()?;
    let all: Vec<&D> = states.iter().chain(&sources).collect();
    let basis = D::basis_for(&all)?;
    let coords = |d: &D| d.coordinates(&basis);
    let a0 = coords(&states[0])?;
    let b: Vec<Vec<C64>> = sources.par_iter().map(coords).collect::<Result<_>>()?;
    let ilam = C64::new(0.0, traj.lambda);
    let mut integral = vec![C64::new(0.0, 0.0); a0.len()];
    let mut out = vec![(traj.times[0], 0.0)];
    let step = match rule {
        QuadratureRule::Simpson => 2,
        QuadratureRule::Trapezoid => 1,
    };
    let mut j = step;
    while j < nodes.len() {
        match rule {
            QuadratureRule::Simpson => {
                for (((s, x), y), z) in integral.iter_mut().zip(&b[j - 2]).zip(&b[j - 1]).zip(&b[j]) {
                    *s += (x + y * 4.0 + z) * (h / 3.0);
                }
            }
            QuadratureRule::Trapezoid => {
                for ((s, x), y) in integral.iter_mut().zip(&b[j - 1]).zip(&b[j]) {
                    *s += (x + y) * (h / 2.0);
                }
            }
        }
        let aj = coords(&states[j])?;
        let v: Vec<C64> = aj.iter().zip(&a0).zip(&integral).map(|((x, y), z)| x - y + ilam * z).collect();
        out.push((traj.times[nodes[j]], coordinate_norm(&v)));
        j += step;
    }
    Ok(out)
}

/// Values `Tr |S^{(k,alpha)} gamma^(k)|` and the smallest `M` with
/// `Tr |S^{(k,alpha)} gamma^(k)| <= M^{2k}` for every `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub values: Vec<f64>,
    pub minimal_bound: f64,
    /// Whether the supplied guess satisfies every bound.
    pub guess_holds: bool,
}

pub fn growth_bound_check<D: DensityOperator>(
    seq: &HierarchySequence<D>,
    alpha: f64,
    m_guess: f64,
) -> Result<GrowthReport> {
    if !(alpha >= 0.0) {
        return Err(Error::Argument(format!("alpha must be nonnegative, got {alpha}")));
    }
    let values: Vec<f64> = seq
        .entries()
        .par_iter()
        .map(|g| g.sobolev_weight(alpha).trace_norm())
        .collect::<Result<_>>()?;
    let minimal_bound = values
        .iter()
        .enumerate()
        .map(|(i, v)| v.powf(1.0 / (2.0 * (i + 1) as f64)))
        .fold(0.0, f64::max);
    let guess_holds = values
        .iter()
        .enumerate()
        .all(|(i, v)| *v <= m_guess.powi(2 * (i as i32 + 1)) * (1.0 + 1e-12));
    Ok(GrowthReport { values, minimal_bound, guess_holds })
}

/// One line of the residual report; missing quantities are written as empty fields.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResidualRow {
    pub t: f64,
    pub k: usize,
    pub residual_hs: Option<f64>,
    pub defect_hs: Option<f64>,
    pub growth_value: Option<f64>,
}

pub fn write_residual_csv<W: Write>(w: &mut W, rows: &[ResidualRow]) -> Result<()> {
    writeln!(w, "t,k,residual_hs,defect_hs,growth_value_k")?;
    let f = |v: Option<f64>| v.map(|x| format!("{x:.10e}")).unwrap_or_default();
    for r in rows {
        writeln!(w, "{:.10e},{},{},{},{}", r.t, r.k, f(r.residual_hs), f(r.defect_hs), f(r.growth_value))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{DensityMatrix, ProductKernel};
    use crate::nls::{uniform_times, Integrator};
    use crate::spectral::make_lattice;
    use crate::spectral::random::{random_unit_field, smooth_unit_field, Envelope};

    fn params(dt: f64, t: f64) -> NlsParams {
        NlsParams::new(1.0, dt, t, Integrator::IntegratingFactorRk4).unwrap()
    }

    #[test]
    fn factorized_residual_is_small_and_second_order() {
        let lat = make_lattice(2).unwrap();
        let phi = smooth_unit_field(lat, 1, 0);
        let mut worst = Vec::new();
        for dt in [2e-3f64, 1e-3] {
            let times = uniform_times(0.1, (0.1 / dt).round() as usize);
            let traj = HierarchyTrajectory::<ProductKernel>::factorized(&phi, &params(dt, 0.1), &times, 3).unwrap();
            let r = gp_residual(&traj, 2).unwrap();
            worst.push(r.iter().map(|x| x.1).fold(0.0, f64::max));
        }
        assert!(worst[1] < 1e-5, "{worst:?}");
        let ratio = worst[0] / worst[1];
        assert!(ratio > 3.5 && ratio < 4.5, "{ratio}");
    }

    #[test]
    fn free_trajectory_residual_vanishes() {
        let lat = make_lattice(1).unwrap();
        let phi = random_unit_field(lat, 2, 0, Envelope::Flat);
        let seq = HierarchySequence::<DensityMatrix>::factorized(&phi, 2).unwrap();
        let traj = HierarchyTrajectory::free(&seq, &uniform_times(0.02, 20)).unwrap();
        let d = duhamel_defect(&traj, 1, 20, QuadratureRule::Simpson).unwrap();
        assert!(d.iter().all(|x| x.1 < 1e-13));
        assert_eq!(d[0].1, 0.0);
    }

    #[test]
    fn constant_field_residual_is_derivative_only() {
        let lat = make_lattice(1).unwrap();
        let c = C64::new(crate::nls::unit_constant_amplitude(), 0.0);
        let phi = TorusField::constant(lat, c);
        let times = uniform_times(0.05, 10);
        let traj = HierarchyTrajectory::<ProductKernel>::factorized(&phi, &params(1e-3, 0.05), &times, 2).unwrap();
        // gamma^(1) is constant in time and every collision term vanishes
        let r = gp_residual(&traj, 1).unwrap();
        assert!(r.iter().all(|x| x.1 < 1e-12));
    }

    #[test]
    fn definetti_examples() {
        let lat = make_lattice(1).unwrap();
        let a = TorusField::plane_wave(lat, [0, 0, 0], c(crate::nls::unit_constant_amplitude())).unwrap();
        let b = TorusField::plane_wave(lat, [0, 1, 0], c(crate::nls::unit_constant_amplitude())).unwrap();
        let mu = AtomicDeFinettiMeasure::new(vec![(0.25, a.clone()), (0.75, b.clone())]).unwrap();
        let p = params(1e-3, 1.0);
        let g: DensityMatrix = definetti_evolve(&mu, 0.0, 1, &p).unwrap();
        let ev = g.eigenvalues();
        assert!((ev[ev.len() - 1] - 0.75).abs() < 1e-12 && (ev[ev.len() - 2] - 0.25).abs() < 1e-12);
        let phi = random_unit_field(lat, 3, 0, Envelope::Flat);
        let z = C64::from_polar(1.0, 0.7);
        let g1: DensityMatrix = definetti_evolve(&AtomicDeFinettiMeasure::single(phi.clone()).unwrap(), 0.05, 2, &p).unwrap();
        let g2: DensityMatrix = definetti_evolve(&AtomicDeFinettiMeasure::single(phi.scale(z)).unwrap(), 0.05, 2, &p).unwrap();
        assert!(g1.sub(&g2).unwrap().hs_norm() < 1e-12);
        assert!(AtomicDeFinettiMeasure::new(vec![(0.5, a)]).is_err());
    }

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn growth_bound_examples() {
        let lat = make_lattice(2).unwrap();
        let phi = smooth_unit_field(lat, 4, 0);
        let seq = HierarchySequence::<ProductKernel>::factorized(&phi, 3).unwrap();
        let h1 = phi.sobolev_norm(1.0).unwrap();
        let rep = growth_bound_check(&seq, 1.0, h1 * 1.001).unwrap();
        for (k, v) in rep.values.iter().enumerate() {
            assert!((v / h1.powi(2 * (k as i32 + 1)) - 1.0).abs() < 1e-10);
        }
        assert!((rep.minimal_bound - h1).abs() < 1e-10 * h1);
        assert!(rep.guess_holds);
        let rep0 = growth_bound_check(&seq, 0.0, 1.0).unwrap();
        assert!(rep0.values.iter().all(|v| (v - 1.0).abs() < 1e-10));
        assert!(growth_bound_check(&seq, -1.0, 1.0).is_err());
    }

    #[test]
    fn too_few_samples() {
        let lat = make_lattice(1).unwrap();
        let phi = random_unit_field(lat, 2, 0, Envelope::Flat);
        let traj = HierarchyTrajectory::<ProductKernel>::factorized(&phi, &params(1e-3, 0.01), &[0.0, 0.01], 2).unwrap();
        assert!(matches!(gp_residual(&traj, 1), Err(Error::TooFewSamples(_))));
        assert!(gp_residual(&traj, 2).is_err());
    }
}
