//! Energy cutoff of initial data and the propagation-of-chaos diagnostic.

use std::io::Write;

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use super::hamiltonian::{nbody_evolve, HamiltonianHandle, Method};
use super::potential::{build_potential, Profile};
use super::state::{marginal, NBodyState};
use crate::density::{dense_budget, DensityMatrix};
use crate::error::{Error, Result};
use crate::nls::{evolve_to, free_propagate, NlsParams};
use crate::spectral::{bump, TorusField};

/// Highest power of `H_N` checked against the moment bound.
pub const MOMENT_ORDERS: usize = 4;

#[derive(Debug, Clone, Serialize)]
pub struct MomentCheck {
    pub order: usize,
    /// `<H^k Psi~, Psi~>`.
    pub moment: f64,
    /// `2^k N^k / kappa^k`.
    pub bound: f64,
}

impl MomentCheck {
    pub fn holds(&self) -> bool {
        self.moment <= self.bound * (1.0 + 1e-12)
    }
}

#[derive(Debug, Clone)]
pub struct CutoffResult {
    pub state: NBodyState,
    pub kappa: f64,
    /// `||Psi - Psi~||`.
    pub distance: f64,
    pub moments: Vec<MomentCheck>,
}

/// `zeta(kappa H / N) Psi / ||zeta(kappa H / N) Psi||` through the dense eigenbasis.
pub fn cutoff_initial_data(psi: &NBodyState, h: &HamiltonianHandle, kappa: f64) -> Result<CutoffResult> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Argument(format!("kappa must be positive, got {kappa}")));
    }
    if psi.n() != h.n() || psi.lattice() != h.lattice() {
        return Err(Error::Shape("state and Hamiltonian disagree on N or the lattice".into()));
    }
    let (vals, vecs) = h.eigen()?;
    let n = h.n() as f64;
    let x = DVector::from_column_slice(psi.amplitudes());
    let mut c = vecs.adjoint() * x;
    c.iter_mut().zip(vals).for_each(|(a, l)| *a *= bump(kappa * l / n));
    let norm = c.norm();
    if norm <= 1e-14 * psi.norm() {
        return Err(Error::Degenerate(format!(
            "the cutoff at kappa = {kappa} removes the whole state (spectrum above {:.3e})",
            2.0 * n / kappa
        )));
    }
    c /= C64::new(norm, 0.0);
    let moments = (1..=MOMENT_ORDERS)
        .map(|k| MomentCheck {
            order: k,
            moment: c.iter().zip(vals).map(|(a, l)| l.powi(k as i32) * a.norm_sqr()).sum(),
            bound: (2.0 * n / kappa).powi(k as i32),
        })
        .collect();
    let state = psi.with_amplitudes((vecs * c).iter().copied().collect());
    let distance = psi.distance(&state)?;
    Ok(CutoffResult { state, kappa, distance, moments })
}

#[derive(Debug, Clone, Serialize)]
pub struct CutoffSweepRow {
    pub kappa: f64,
    pub distance: f64,
    pub moments_hold: bool,
}

/// Distances over a kappa sweep and the least-squares slope of `log distance` against
/// `log kappa` over the rows with nonzero distance.
pub fn cutoff_sweep(psi: &NBodyState, h: &HamiltonianHandle, kappas: &[f64]) -> Result<(Vec<CutoffSweepRow>, Option<f64>)> {
    let mut rows = Vec::new();
    for &kappa in kappas {
        let r = cutoff_initial_data(psi, h, kappa)?;
        rows.push(CutoffSweepRow {
            kappa,
            distance: r.distance,
            moments_hold: r.moments.iter().all(|m| m.holds()),
        });
    }
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.distance > 1e-14).map(|r| (r.kappa.ln(), r.distance.ln())).collect();
    let slope = (pts.len() >= 2).then(|| {
        let m = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
        let (mx, my) = (sx / m, sy / m);
        let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        num / den
    });
    Ok((rows, slope))
}

#[derive(Debug, Clone)]
pub struct ChaosConfig {
    pub n_list: Vec<usize>,
    /// Nondecreasing, starting at or after 0.
    pub times: Vec<f64>,
    pub beta: f64,
    /// Interaction strength in `H_N` and the NLS coupling; 0 or 1.
    pub coupling: f64,
    pub kappa: Option<f64>,
    pub profile: Profile,
    pub nls_dt: f64,
    pub method: Method,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChaosRow {
    pub n: usize,
    pub t: f64,
    pub trace_dist_k1: f64,
    pub trace_dist_k2: Option<f64>,
    pub energy_per_particle: f64,
    pub asympt_fact_dist: f64,
    pub kappa: Option<f64>,
    pub beta: f64,
    pub m: usize,
    pub dt: f64,
}

fn limit_flow(phi: &TorusField, t: f64, cfg: &ChaosConfig) -> Result<TorusField> {
    if cfg.coupling == 0.0 {
        Ok(free_propagate(phi, t))
    } else {
        evolve_to(phi, t, &NlsParams::new(cfg.coupling, cfg.nls_dt, t, crate::nls::Integrator::SplitStepStrang)?)
    }
}

fn dense_fits(phi: &TorusField, k: usize) -> bool {
    (phi.lattice().len() as u128).pow(2 * k as u32) <= dense_budget() as u128
}

fn run_one(phi: &TorusField, n: usize, cfg: &ChaosConfig) -> Result<Vec<ChaosRow>> {
    let lattice = phi.lattice();
    let v = build_potential(cfg.profile, n, cfg.beta, lattice)?;
    let h = HamiltonianHandle::new(&v, cfg.coupling)?;
    let mut psi = NBodyState::factorized(phi, n)?;
    if let Some(kappa) = cfg.kappa {
        psi = cutoff_initial_data(&psi, &h, kappa)?.state;
    }
    let energy = h.energy(&psi)? / n as f64;
    let target1 = DensityMatrix::factorized_state(phi, 1)?;
    let asympt = marginal(&psi, 1)?.sub(&target1)?.trace_norm();
    let with_k2 = n >= 2 && dense_fits(phi, 2);
    let mut rows = Vec::with_capacity(cfg.times.len());
    let mut now = 0.0;
    for &t in &cfg.times {
        psi = nbody_evolve(&psi, &h, t - now, cfg.method)?;
        now = t;
        let s = limit_flow(phi, t, cfg)?;
        let d1 = marginal(&psi, 1)?.sub(&DensityMatrix::factorized_state(&s, 1)?)?.trace_norm();
        let d2 = if with_k2 {
            Some(marginal(&psi, 2)?.sub(&DensityMatrix::factorized_state(&s, 2)?)?.trace_norm())
        } else {
            None
        };
        rows.push(ChaosRow {
            n,
            t,
            trace_dist_k1: d1,
            trace_dist_k2: d2,
            energy_per_particle: energy,
            asympt_fact_dist: asympt,
            kappa: cfg.kappa,
            beta: cfg.beta,
            m: lattice.cutoff(),
            dt: cfg.nls_dt,
        });
    }
    Ok(rows)
}

/// Trace-norm distances between the N-body marginals of `phi^{tensor N}` and the tensor
/// powers of the NLS flow, one row per `(N, t)`.
pub fn chaos_diagnostic(phi: &TorusField, cfg: &ChaosConfig) -> Result<Vec<ChaosRow>> {
    if cfg.coupling != 0.0 && cfg.coupling != 1.0 {
        return Err(Error::Config(format!("coupling must be 0 or 1 (defocusing), got {}", cfg.coupling)));
    }
    if cfg.times.iter().any(|&t| t < 0.0) || cfg.times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Argument("times must be nonnegative and nondecreasing".into()));
    }
    if cfg.n_list.is_empty() {
        return Err(Error::Argument("empty particle-number list".into()));
    }
    let norm = phi.l2_norm();
    if (norm - 1.0).abs() > 1e-12 {
        log::warn!("normalizing phi (norm {norm})");
    }
    let phi = phi.normalized()?;
    let runs: Vec<Result<Vec<ChaosRow>>> = cfg.n_list.par_iter().map(|&n| run_one(&phi, n, cfg)).collect();
    let mut rows = Vec::new();
    for r in runs {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn write_chaos_csv<W: Write>(w: &mut W, rows: &[ChaosRow]) -> Result<()> {
    writeln!(w, "N,t,trace_dist_k1,trace_dist_k2,energy_per_particle,asympt_fact_dist,kappa,beta,M,dt")?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
    for r in rows {
        writeln!(
            w,
            "{},{},{:.12e},{},{:.12e},{:.12e},{},{},{},{}",
            r.n,
            r.t,
            r.trace_dist_k1,
            opt(r.trace_dist_k2),
            r.energy_per_particle,
            r.asympt_fact_dist,
            r.kappa.map(|k| k.to_string()).unwrap_or_default(),
            r.beta,
            r.m,
            r.dt
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_lattice;
    use crate::spectral::random::smooth_unit_field;

    fn hamiltonian(n: usize) -> HamiltonianHandle {
        let lat = make_lattice(1).unwrap();
        let v = build_potential(Profile::default(), n, 0.5, lat).unwrap();
        HamiltonianHandle::new(&v, 1.0).unwrap()
    }

    fn eigenstate(h: &HamiltonianHandle, i: usize) -> (f64, NBodyState) {
        let (vals, vecs) = h.eigen().unwrap();
        let amps = vecs.column(i).iter().copied().collect();
        (vals[i], NBodyState::from_amplitudes(h.lattice(), h.n(), amps, false).unwrap())
    }

    #[test]
    fn low_eigenvector_is_kept() {
        let h = hamiltonian(2);
        let (l, psi) = eigenstate(&h, 5);
        let kappa = 2.0 / l.max(1e-3);
        let r = cutoff_initial_data(&psi, &h, kappa).unwrap();
        assert!(r.distance < 1e-12);
    }

    #[test]
    fn high_eigenvector_is_removed() {
        let h = hamiltonian(2);
        let (l, psi) = eigenstate(&h, 700);
        assert!(matches!(cutoff_initial_data(&psi, &h, 2.0 * 2.0 / l * 1.01), Err(Error::Degenerate(_))));
    }

    #[test]
    fn moment_bound_on_a_mixture() {
        let h = hamiltonian(2);
        let (_, a) = eigenstate(&h, 3);
        let (_, b) = eigenstate(&h, 600);
        let amps: Vec<C64> = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| x * 0.6 + y * 0.8).collect();
        let psi = NBodyState::from_amplitudes(h.lattice(), 2, amps, false).unwrap();
        for kappa in [0.1, 0.2, 0.4, 0.8] {
            let r = cutoff_initial_data(&psi, &h, kappa).unwrap();
            assert!((r.state.norm() - 1.0).abs() < 1e-12);
            assert!(r.moments.iter().all(|m| m.holds()), "{:?}", r.moments);
            let direct = h.moment(&r.state, 2).unwrap();
            assert!((direct - r.moments[1].moment).abs() < 1e-9 * direct.max(1.0));
        }
    }

    #[test]
    fn chaos_zero_at_start_and_without_coupling() {
        let lat = make_lattice(1).unwrap();
        let phi = smooth_unit_field(lat, 4, 0);
        let mut cfg = ChaosConfig {
            n_list: vec![1, 2],
            times: vec![0.0, 0.1],
            beta: 0.5,
            coupling: 1.0,
            kappa: None,
            profile: Profile::default(),
            nls_dt: 1e-3,
            method: Method::Auto,
        };
        let rows = chaos_diagnostic(&phi, &cfg).unwrap();
        for r in rows.iter().filter(|r| r.t == 0.0) {
            assert!(r.trace_dist_k1 < 1e-12 && r.trace_dist_k2.unwrap_or(0.0) < 1e-12);
            assert!(r.asympt_fact_dist < 1e-12);
        }
        assert!(rows.iter().any(|r| r.t > 0.0 && r.trace_dist_k1 > 1e-6));
        cfg.coupling = 0.0;
        for r in chaos_diagnostic(&phi, &cfg).unwrap() {
            assert!(r.trace_dist_k1 < 1e-11 && r.trace_dist_k2.unwrap_or(0.0) < 1e-11);
        }
        let mut out = Vec::new();
        write_chaos_csv(&mut out, &rows).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 5);
    }
}
