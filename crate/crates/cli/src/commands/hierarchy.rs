use std::io::Write as _;
use std::path::Path;

use serde_json::json;

use super::{datum, lattice, write_output, Outcome};
use crate::config::Params;
use gph_core::density::{DensityMatrix, DensityOperator, HierarchySequence, ProductKernel};
use gph_core::hierarchy::{
    definetti_evolve, duhamel_defect, gp_residual_with, growth_bound_check, write_residual_csv,
    AtomicDeFinettiMeasure, HierarchyTrajectory, QuadratureRule, ResidualRow, TimeDerivative,
};
use gph_core::nls::{nls_evolve, uniform_times, Integrator, NlsParams};
use gph_core::spectral::random::smooth_unit_field;
use gph_core::{Error, Result};

fn nls_params(p: &Params) -> Result<NlsParams> {
    let integrator: Integrator = p.opt::<String>("integrator")?.as_deref().unwrap_or("strang").parse()?;
    NlsParams::new(p.get("lambda")?, p.positive("dt")?, p.get("t-final")?, integrator)
}

fn orders(p: &Params) -> Result<Vec<usize>> {
    let k: Vec<usize> = p.list("k")?;
    if k.is_empty() || k.contains(&0) {
        return Err(Error::Config("`k` must list orders >= 1".into()));
    }
    Ok(k)
}

fn scheme(p: &Params) -> Result<TimeDerivative> {
    match p.str("scheme")? {
        "interaction" => Ok(TimeDerivative::InteractionPicture),
        "direct" => Ok(TimeDerivative::Direct),
        other => Err(Error::Config(format!("unknown scheme `{other}`"))),
    }
}

enum Repr {
    Dense,
    Product,
}

fn repr(p: &Params) -> Result<Repr> {
    match p.str("repr")? {
        "dense" => Ok(Repr::Dense),
        "product" => Ok(Repr::Product),
        other => Err(Error::Config(format!("unknown representation `{other}`"))),
    }
}

pub fn nls_evolve_cmd(p: &Params, out: &Path) -> Result<Outcome> {
    let params = nls_params(p)?;
    let samples: usize = p.get("samples")?;
    if samples == 0 {
        return Err(Error::Config("`samples` must be positive".into()));
    }
    let traj = nls_evolve(&datum(p)?, &params, &uniform_times(params.t_final, samples))?;
    let mut files = Vec::new();
    write_output(out, "nls_trajectory.csv", &mut files, |w| traj.write_csv(w))?;
    let (mass, energy) = traj.drifts();
    Ok(Outcome { files, summary: json!({ "mass_drift": mass, "energy_drift": energy }) })
}

fn residual_rows<D: DensityOperator>(p: &Params) -> Result<(Vec<ResidualRow>, Vec<f64>)> {
    let params = nls_params(p)?;
    let steps = p.step_count("t-final", "dt")?;
    let ks = orders(p)?;
    let scheme = scheme(p)?;
    let max = *ks.iter().max().unwrap();
    let traj = HierarchyTrajectory::<D>::factorized(&datum(p)?, &params, &uniform_times(params.t_final, steps), max + 1)?;
    let mut rows = Vec::new();
    let mut worst = Vec::new();
    for &k in &ks {
        let res = gp_residual_with(&traj, k, scheme)?;
        worst.push(res.iter().map(|r| r.1).fold(0.0, f64::max));
        rows.extend(res.into_iter().map(|(t, v)| ResidualRow { t, k, residual_hs: Some(v), ..Default::default() }));
    }
    Ok((rows, worst))
}

pub fn residual_cmd(p: &Params, out: &Path) -> Result<Outcome> {
    let (rows, worst) = match repr(p)? {
        Repr::Dense => residual_rows::<DensityMatrix>(p)?,
        Repr::Product => residual_rows::<ProductKernel>(p)?,
    };
    let mut files = Vec::new();
    write_output(out, "residual.csv", &mut files, |w| write_residual_csv(w, &rows))?;
    Ok(Outcome { files, summary: json!({ "k": orders(p)?, "max_residual_hs": worst }) })
}

fn duhamel_rows<D: DensityOperator>(p: &Params) -> Result<(Vec<ResidualRow>, Vec<f64>)> {
    let params = nls_params(p)?;
    let steps = p.step_count("t-final", "dt")?;
    let ks = orders(p)?;
    let quad: usize = p.get("quadrature-steps")?;
    let rule = match p.str("rule")? {
        "simpson" => QuadratureRule::Simpson,
        "trapezoid" => QuadratureRule::Trapezoid,
        other => return Err(Error::Config(format!("unknown rule `{other}`"))),
    };
    let max = *ks.iter().max().unwrap();
    let traj = HierarchyTrajectory::<D>::factorized(&datum(p)?, &params, &uniform_times(params.t_final, steps), max + 1)?;
    let mut rows = Vec::new();
    let mut worst = Vec::new();
    for &k in &ks {
        let d = duhamel_defect(&traj, k, quad, rule)?;
        worst.push(d.iter().map(|r| r.1).fold(0.0, f64::max));
        rows.extend(d.into_iter().map(|(t, v)| ResidualRow { t, k, defect_hs: Some(v), ..Default::default() }));
    }
    Ok((rows, worst))
}

pub fn duhamel_cmd(p: &Params, out: &Path) -> Result<Outcome> {
    let (rows, worst) = match repr(p)? {
        Repr::Dense => duhamel_rows::<DensityMatrix>(p)?,
        Repr::Product => duhamel_rows::<ProductKernel>(p)?,
    };
    let mut files = Vec::new();
    write_output(out, "duhamel.csv", &mut files, |w| write_residual_csv(w, &rows))?;
    Ok(Outcome { files, summary: json!({ "k": orders(p)?, "max_defect_hs": worst }) })
}

pub fn definetti_cmd(p: &Params, out: &Path) -> Result<Outcome> {
    let params = nls_params(p)?;
    let steps = p.step_count("t-final", "dt")?;
    let ks = orders(p)?;
    let lat = lattice(p)?;
    let seed: u64 = p.get("seed")?;
    let count: usize = p.get("atoms")?;
    if count == 0 {
        return Err(Error::Config("`atoms` must be positive".into()));
    }
    let weights: Vec<f64> = match p.opt::<String>("weights")? {
        Some(_) => p.list("weights")?,
        None => vec![1.0 / count as f64; count],
    };
    if weights.len() != count {
        return Err(Error::Config(format!("{} weights for {count} atoms", weights.len())));
    }
    let atoms: Vec<_> = weights.iter().enumerate().map(|(i, &w)| (w, smooth_unit_field(lat, seed, i as u64))).collect();
    let mu = AtomicDeFinettiMeasure::new(atoms)?;
    let times = uniform_times(params.t_final, steps);
    let max = *ks.iter().max().unwrap();
    let mixture = HierarchyTrajectory::<ProductKernel>::from_measure(&mu, &params, &times, max + 1)?;
    let singles: Vec<_> = mu
        .atoms()
        .iter()
        .map(|(_, phi)| HierarchyTrajectory::<ProductKernel>::factorized(phi, &params, &times, max + 1))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let (mut worst_mix, mut worst_atom) = (0.0f64, 0.0f64);
    for &k in &ks {
        let mix = gp_residual_with(&mixture, k, TimeDerivative::InteractionPicture)?;
        let per_atom: Vec<Vec<(f64, f64)>> = singles
            .iter()
            .map(|tr| gp_residual_with(tr, k, TimeDerivative::InteractionPicture))
            .collect::<Result<_>>()?;
        for (i, (t, v)) in mix.iter().enumerate() {
            let a = per_atom.iter().map(|r| r[i].1).fold(0.0, f64::max);
            worst_mix = worst_mix.max(*v);
            worst_atom = worst_atom.max(a);
            rows.push((*t, k, *v, a));
        }
    }
    let alpha: f64 = p.get("alpha")?;
    let initial = HierarchySequence::new(
        (1..=max).map(|k| definetti_evolve::<ProductKernel>(&mu, 0.0, k, &params)).collect::<Result<Vec<_>>>()?,
    )?;
    let growth = growth_bound_check(&initial, alpha, 1.0)?;
    let mut files = Vec::new();
    write_output(out, "definetti.csv", &mut files, |w| {
        writeln!(w, "t,k,mixture_residual,worst_atom_residual")?;
        for (t, k, v, a) in &rows {
            writeln!(w, "{t:.10e},{k},{v:.10e},{a:.10e}")?;
        }
        Ok(())
    })?;
    write_output(out, "growth.csv", &mut files, |w| {
        writeln!(w, "k,alpha,value")?;
        for (i, v) in growth.values.iter().enumerate() {
            writeln!(w, "{},{alpha},{v:.12e}", i + 1)?;
        }
        Ok(())
    })?;
    Ok(Outcome {
        files,
        summary: json!({
            "max_mixture_residual": worst_mix,
            "max_atom_residual": worst_atom,
            "within_twice_worst_atom": worst_mix <= 2.0 * worst_atom,
            "minimal_growth_bound": growth.minimal_bound,
        }),
    })
}
