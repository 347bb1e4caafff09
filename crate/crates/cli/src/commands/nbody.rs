use std::io::Write as _;
use std::path::Path;

use serde_json::json;

use super::{datum, lattice, write_output, Outcome};
use crate::config::Params;
use gph_core::nbody::{
    bbgky_residual, build_potential, chaos_diagnostic, cutoff_initial_data, cutoff_sweep, marginal, nbody_evolve,
    write_chaos_csv, BbgkySetup, ChaosConfig, HamiltonianHandle, Method, NBodyState, Profile,
};
use gph_core::spectral::random::{random_unit_field, Envelope};
use gph_core::{Error, Result};

fn hamiltonian(p: &Params) -> Result<HamiltonianHandle> {
    let v = build_potential(Profile::default(), p.get("n")?, p.get("beta")?, lattice(p)?)?;
    HamiltonianHandle::new(&v, p.get("coupling")?)
}

pub fn evolve_cmd(p: &Params, out: &Path) -> Result<Outcome> {
    let h = hamiltonian(p)?;
    let method: Method = p.str("method")?.parse()?;
    let steps = p.step_count("t-final", "dt")?;
    let dt: f64 = p.get("dt")?;
    let mut psi = NBodyState::factorized(&datum(p)?, h.n())?;
    let (n0, e0) = (psi.norm(), h.energy(&psi)?);
    let mut rows = Vec::new();
    for i in 0..=steps {
        if i > 0 {
            psi = nbody_evolve(&psi, &h, dt, method)?;
        }
        let (norm, energy) = (psi.norm(), h.energy(&psi)?);
        let trace = marginal(&psi, 1)?.trace().re;
        rows.push((i as f64 * dt, norm, energy, (norm - n0).abs(), (energy - e0).abs(), trace, psi.symmetry_defect()));
    }
    let (nd, ed) = rows.iter().fold((0.0f64, 0.0f64), |a, r| (a.0.max(r.3), a.1.max(r.4)));
    let mut files = Vec::new();
    write_output(out, "nbody.csv", &mut files, |w| {
        writeln!(w, "t,norm,energy,norm_drift,energy_drift,marginal_trace,symmetry_defect")?;
        for r in &rows {
            writeln!(w, "{:.6e},{:.15e},{:.15e},{:.3e},{:.3e},{:.15e},{:.3e}", r.0, r.1, r.2, r.3, r.4, r.5, r.6)?;
        }
        Ok(())
    })?;
    Ok(Outcome { files, summary: json!({ "dim": h.dim(), "max_norm_drift": nd, "max_energy_drift": ed }) })
}

pub fn bbgky_cmd(p: &Params, out: &Path) -> Result<Outcome> {
    let h = hamiltonian(p)?;
    let k: usize = p.get("k")?;
    let n = h.n();
    if k == 0 || k > n {
        return Err(Error::Config(format!("`k` must lie in 1..={n}")));
    }
    let dt = p.positive("dt")?;
    let samples: usize = p.get("samples")?;
    if samples < 2 {
        return Err(Error::Config("`samples` must be at least 2".into()));
    }
    let interaction_picture = match p.str("scheme")? {
        "interaction" => true,
        "direct" => false,
        other => return Err(Error::Config(format!("unknown scheme `{other}`"))),
    };
    let mut psi = NBodyState::factorized(&datum(p)?, n)?;
    let (mut times, mut lower, mut upper) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..=samples {
        if i > 0 {
            psi = nbody_evolve(&psi, &h, dt, Method::Auto)?;
        }
        times.push(i as f64 * dt);
        lower.push(marginal(&psi, k)?);
        if k < n {
            upper.push(marginal(&psi, k + 1)?);
        }
    }
    let setup = BbgkySetup { potential: h.potential(), n, coupling: h.coupling(), interaction_picture };
    let res = bbgky_residual(&setup, &times, &lower, (k < n).then_some(upper.as_slice()))?;
    let mut files = Vec::new();
    write_output(out, "bbgky.csv", &mut files, |w| {
        writeln!(w, "t,k,dt,residual_hs")?;
        for (t, v) in res.times.iter().zip(&res.norms) {
            writeln!(w, "{t:.6e},{k},{dt},{v:.6e}")?;
        }
        Ok(())
    })?;
    Ok(Outcome { files, summary: json!({ "k": k, "max_residual_hs": res.max() }) })
}

pub fn cutoff_cmd(p: &Params, out: &Path) -> Result<Outcome> {
    let h = hamiltonian(p)?;
    let kappas: Vec<f64> = p.list("kappa")?;
    if kappas.is_empty() {
        return Err(Error::Config("`kappa` needs at least one value".into()));
    }
    let width = p.positive("envelope-width")?;
    let phi = random_unit_field(lattice(p)?, p.get("seed")?, 0, Envelope::Gaussian { width });
    let psi = NBodyState::factorized(&phi, h.n())?;
    let mut lines = Vec::new();
    let mut all_hold = true;
    for &kappa in &kappas {
        let r = cutoff_initial_data(&psi, &h, kappa)?;
        for m in &r.moments {
            all_hold &= m.holds();
            lines.push(format!("{kappa},{},{:.12e},{:.12e},{},{:.12e}", m.order, m.moment, m.bound, m.holds(), r.distance));
        }
    }
    let (_, slope) = cutoff_sweep(&psi, &h, &kappas)?;
    let mut files = Vec::new();
    write_output(out, "cutoff.csv", &mut files, |w| {
        writeln!(w, "kappa,order,moment,bound,holds,distance")?;
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })?;
    Ok(Outcome { files, summary: json!({ "moment_bounds_hold": all_hold, "distance_slope": slope }) })
}

pub fn chaos_cmd(p: &Params, out: &Path) -> Result<Outcome> {
    let cfg = ChaosConfig {
        n_list: p.list("n-list")?,
        times: p.list("times")?,
        beta: p.get("beta")?,
        coupling: p.get("coupling")?,
        kappa: p.opt("kappa")?,
        profile: Profile::default(),
        nls_dt: p.positive("dt")?,
        method: p.str("method")?.parse()?,
    };
    let rows = chaos_diagnostic(&datum(p)?, &cfg)?;
    let mut files = Vec::new();
    write_output(out, "chaos.csv", &mut files, |w| write_chaos_csv(w, &rows))?;
    let last = cfg.times.last().copied().unwrap_or(0.0);
    let mut trend: Vec<(usize, f64)> = rows.iter().filter(|r| r.t == last).map(|r| (r.n, r.trace_dist_k1)).collect();
    trend.sort_by_key(|r| r.0);
    let nonincreasing = trend.windows(2).all(|w| w[1].1 <= w[0].1);
    for (n, d) in &trend {
        println!("N = {n}: trace distance {d:.6e} at t = {last}");
    }
    Ok(Outcome {
        files,
        summary: json!({ "t": last, "trace_dist_k1_by_n": trend, "nonincreasing_in_n": nonincreasing }),
    })
}
