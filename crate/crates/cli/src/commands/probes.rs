use std::io::Write as _;
use std::path::Path;


use super::{lattice, write_output, Outcome};
use crate::config::Params;
use gph_core::probe::{multilinear_probe, sobolev_probe, trilinear_probe, ProbeReport};
use gph_core::{Error, Result};

fn interval(p: &Params) -> Result<(f64, f64)> {
    match p.list::<f64>("interval")?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(Error::Config("`interval` must be two numbers a,b".into())),
    }
}

fn finish(report: &ProbeReport, name: &str, out: &Path, mut files: Vec<String>) -> Result<Outcome> {
    write_output(out, name, &mut files, |w| report.write_csv(w))?;
    let summary = report.summary();
    println!(
        "{}: max ratio {:.6e}, first half {:.6e}, Parseval gap {:.1e}",
        summary.probe,
        summary.max_ratio,
        summary.max_ratio_half,
        report.max_cross_check_gap()
    );
    Ok(Outcome { files, summary: serde_json::to_value(summary).map_err(|e| Error::Format(e.to_string()))? })
}

pub fn trilinear_cmd(p: &Params, out: &Path) -> Result<Outcome> {
    let sweep: Vec<[u64; 3]> = p
        .list::<String>("sweep")?
        .iter()
        .map(|s| {
            let v: Vec<u64> = s.split(':').map(|x| x.trim().parse()).collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("bad dyadic triple `{s}`")))?;
            <[u64; 3]>::try_from(v).map_err(|_| Error::Config(format!("`{s}` is not a triple N1:N2:N3")))
        })
        .collect::<Result<_>>()?;
    let report = trilinear_probe(lattice(p)?, &sweep, p.get("samples")?, p.get("seed")?, interval(p)?, &p.list("deltas")?)?;
    let mut files = Vec::new();
    write_output(out, "trilinear_trend.csv", &mut files, |w| {
        writeln!(w, "delta,slope,growing,max_ratios")?;
        for t in &report.trends {
            let m: Vec<String> = t.max_ratios.iter().map(|v| format!("{v:.6e}")).collect();
            writeln!(w, "{},{:.6e},{},{}", t.delta, t.slope, t.growing, m.join(" "))?;
        }
        Ok(())
    })?;
    finish(&report, "trilinear.csv", out, files)
}

pub fn multilinear_cmd(p: &Params, out: &Path) -> Result<Outcome> {
    let report = multilinear_probe(lattice(p)?, p.get("s")?, p.get("samples")?, p.get("seed")?, interval(p)?, p.get("band")?)?;
    finish(&report, "multilinear.csv", out, Vec::new())
}

pub fn sobolev_cmd(p: &Params, out: &Path) -> Result<Outcome> {
    let report = sobolev_probe(lattice(p)?, p.get("samples")?, p.get("seed")?, p.get("band")?)?;
    finish(&report, "sobolev.csv", out, Vec::new())
}
