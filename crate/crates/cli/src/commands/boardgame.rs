use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use serde_json::json;

use super::{lattice, write_output, Outcome};
use crate::config::Params;
use gph_core::boardgame::{
    build_tree_graph, collision_map_count, enumerate_collision_maps, evaluate_duhamel_integrand,
    evaluate_tree_factors, expand_theta_kernels, upper_echelon_classes, write_class_csv, CollisionMap,
};
use gph_core::density::{DensityOperator, ProductKernel};
use gph_core::spectral::random::{smooth_unit_field, stream_rng};
use gph_core::{Error, Result, C64};

fn collision_map(p: &Params) -> Result<CollisionMap> {
    let k: usize = p.get("k")?;
    let raw = p.str("map")?;
    let rho = if raw.trim().is_empty() {
        Vec::new()
    } else {
        raw.split('-')
            .map(|v| v.trim().parse().map_err(|_| Error::Config(format!("bad map entry `{v}` in `{raw}`"))))
            .collect::<Result<Vec<usize>>>()?
    };
    CollisionMap::new(k, rho)
}

fn rel_gap(a: &ProductKernel, b: &ProductKernel) -> Result<f64> {
    let one = C64::new(1.0, 0.0);
    Ok(ProductKernel::combination_norm(&[(one, a), (-one, b)])? / a.hs_norm().max(f64::MIN_POSITIVE))
}

/// `t > t_1 > ... > t_r > 0`, drawn uniformly and sorted.
fn ordered_times(seed: u64, stream: u64, t: f64, r: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, stream);
    let mut v: Vec<f64> = (0..r).map(|_| rng.random::<f64>() * t).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn join<T: ToString>(v: &[T], sep: &str) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

pub fn enum_cmd(p: &Params, out: &Path) -> Result<Outcome> {
    let (k, r): (usize, usize) = (p.get("k")?, p.get("r")?);
    let maps = enumerate_collision_maps(k, r)?;
    let classes = upper_echelon_classes(k, r)?;
    let mut class_of = vec![0; maps.len()];
    for (i, c) in classes.iter().enumerate() {
        for m in &c.members {
            class_of[m.rank()] = i;
        }
    }
    let mut files = Vec::new();
    write_output(out, "maps.csv", &mut files, |w| {
        writeln!(w, "k,r,rank,map,upper_echelon,class_id")?;
        for m in &maps {
            writeln!(w, "{k},{r},{},{},{},{}", m.rank(), m.encoding(), m.is_upper_echelon(), class_of[m.rank()])?;
        }
        Ok(())
    })?;
    write_output(out, "classes.csv", &mut files, |w| write_class_csv(w, k, r, &classes))?;
    let bound = 2u128.pow((k + r) as u32);
    Ok(Outcome {
        files,
        summary: json!({
            "k": k,
            "r": r,
            "maps": maps.len(),
            "product_formula": collision_map_count(k, r).to_string(),
            "classes": classes.len(),
            "power_bound": bound.to_string(),
            "classes_within_power_bound": (classes.len() as u128) <= bound,
        }),
    })
}

pub fn tree_cmd(p: &Params, out: &Path) -> Result<Outcome> {
    let sigma = collision_map(p)?;
    let forest = build_tree_graph(&sigma)?;
    let mut files = Vec::new();
    write_output(out, "trees.csv", &mut files, |w| {
        writeln!(w, "tree,child,internal,leaves,distinguished")?;
        for t in &forest.trees {
            writeln!(w, "{},{},{},{},{}", t.root, t.child.name(), join(&t.internal, "-"), join(&t.leaves, "-"), t.distinguished)?;
        }
        Ok(())
    })?;
    write_output(out, "forest.dot", &mut files, |w| Ok(w.write_all(forest.to_dot().as_bytes())?))?;
    Ok(Outcome {
        files,
        summary: json!({
            "map": sigma.to_string(),
            "upper_echelon": sigma.is_upper_echelon(),
            "tree_sizes": forest.trees.iter().map(|t| t.m()).collect::<Vec<_>>(),
        }),
    })
}

pub fn product_check_cmd(p: &Params, out: &Path) -> Result<Outcome> {
    let mut p = p.clone();
    if p.flag("example-435")? {
        p.set("k", "3");
        p.set("map", "1-2-3-4-6");
        p.set("m", "2");
    }
    let sigma = collision_map(&p)?;
    let forest = build_tree_graph(&sigma)?;
    let lat = lattice(&p)?;
    let seed: u64 = p.get("seed")?;
    let (fields, trials): (usize, usize) = (p.get("fields")?, p.get("trials")?);
    let t = p.positive("t")?;
    let mut rows = Vec::new();
    for f in 0..fields {
        let phi = smooth_unit_field(lat, seed, f as u64);
        for trial in 0..trials {
            let times = ordered_times(seed, 100 + (f * trials + trial) as u64, t, sigma.r());
            let direct: ProductKernel = evaluate_duhamel_integrand(&sigma, &phi, t, &times)?;
            let factors = evaluate_tree_factors(&forest, &phi, t, &times)?;
            rows.push((f, trial, times, rel_gap(&direct, &factors.product)?));
        }
    }
    let worst = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    println!("max relative error {worst:.3e} over {} trials", rows.len());
    let mut files = Vec::new();
    write_output(out, "product_check.csv", &mut files, |w| {
        writeln!(w, "field,trial,t,times,rel_error")?;
        for (f, trial, times, e) in &rows {
            let ts: Vec<String> = times.iter().map(|v| format!("{v:.12e}")).collect();
            writeln!(w, "{f},{trial},{t},{},{e:.6e}", ts.join(" "))?;
        }
        Ok(())
    })?;
    Ok(Outcome { files, summary: json!({ "map": sigma.to_string(), "max_rel_error": worst }) })
}

pub fn theta_cmd(p: &Params, out: &Path) -> Result<Outcome> {
    let sigma = collision_map(p)?;
    let forest = build_tree_graph(&sigma)?;
    let lat = lattice(p)?;
    let seed: u64 = p.get("seed")?;
    let t = p.positive("t")?;
    let times: Vec<f64> = match p.opt::<String>("times")? {
        Some(_) => p.list("times")?,
        None => ordered_times(seed, 100, t, sigma.r()),
    };
    let phi = smooth_unit_field(lat, seed, 0);
    let tf = evaluate_tree_factors(&forest, &phi, t, &times)?;
    let mut lines = Vec::new();
    let mut worst = 0.0f64;
    let mut all_bounded = true;
    for j in 1..=sigma.k() {
        let tab = expand_theta_kernels(&forest, j, &phi, &times)?;
        let gap = rel_gap(&tf.factors[j - 1], &tab.resum(t)?)?;
        worst = worst.max(gap);
        all_bounded &= tab.within_bounds();
        for f in &tab.factors {
            lines.push(format!(
                "{j},v{},{},{:.12e},{},{},{},{gap:.6e}",
                f.vertex,
                f.index,
                f.time,
                f.terms.len(),
                f.bound,
                f.terms.len() <= f.bound
            ));
        }
        lines.push(format!("{j},w{j},0,{:.12e},{},,,{gap:.6e}", tab.root_time, tab.root_terms.len()));
    }
    let mut files = Vec::new();
    write_output(out, "theta.csv", &mut files, |w| {
        writeln!(w, "tree,vertex,index,time,terms,bound,within_bound,resum_rel_error")?;
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })?;
    Ok(Outcome {
        files,
        summary: json!({ "map": sigma.to_string(), "max_resum_rel_error": worst, "term_counts_within_bounds": all_bounded }),
    })
}
