//! Monte-Carlo probes of the trilinear and multilinear dispersive estimates and of the
//! Sobolev embedding `H^1 -> L^6`.
//!
//! Sampling can only be consistent or inconsistent with an estimate; the reports never
//! claim more than a trend.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::spectral::grid::{grid_index, GridPlan};
use crate::spectral::littlewood_paley::{is_dyadic, lp_project};
use crate::spectral::random::{random_field, random_unit_field, Envelope};
use crate::spectral::{norm_sq, ModeLattice, TorusField, TORUS_VOLUME};

/// Gauss-Legendre nodes per time panel.
pub const GL_NODES: usize = 64;
/// Largest `bandwidth * panel length` handed to one panel.
const PANEL_PHASE: f64 = 150.0;

/// Nonzero modes of a field, ready to be placed on a grid at any time.
struct Sparse {
    modes: Vec<([i64; 3], C64, f64)>,
    extent: usize,
    spread: f64,
}

impl Sparse {
    fn new(f: &TorusField, conjugate: bool) -> Self {
        let lat = f.lattice();
        let mut modes = Vec::new();
        for (i, c) in f.coeffs().iter().enumerate() {
            if *c != C64::new(0.0, 0.0) {
                let n = lat.mode(i);
                let w = norm_sq(n) as f64;
                if conjugate {
                    modes.push(([-n[0], -n[1], -n[2]], c.conj(), -w));
                } else {
                    modes.push((n, *c, w));
                }
            }
        }
        let extent = modes.iter().map(|(n, _, _)| n.iter().map(|v| v.unsigned_abs() as usize).max().unwrap_or(0)).max().unwrap_or(0);
        let (lo, hi) = modes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| (lo.min(m.2), hi.max(m.2)));
        Sparse { modes, extent, spread: if hi >= lo { hi - lo } else { 0.0 } }
    }

    /// Point values of `e^{it Delta} f` (or of its conjugate) on an `n^3` grid.
    fn grid(&self, t: f64, n: usize) -> Vec<C64> {
        let plan = GridPlan::get(n);
        let mut data = vec![C64::new(0.0, 0.0); n * n * n];
        let scale = (2.0 * PI).powi(-3);
        for (m, c, w) in &self.modes {
            data[grid_index(*m, n)] = c * C64::from_polar(scale, -t * w);
        }
        let k = self.extent;
        let keep: Vec<bool> = (0..n).map(|i| i <= k || i + k >= n).collect();
        plan.inverse_pruned(&mut data, &keep);
        data
    }
}

/// Composite Gauss-Legendre rule on `[a, b]` resolving time frequencies up to `bandwidth`.
fn time_rule(a: f64, b: f64, bandwidth: f64) -> Vec<(f64, f64)> {
    let panels = ((bandwidth * (b - a) / PANEL_PHASE).ceil() as usize).max(1);
    let h = (b - a) / panels as f64;
    (0..panels).flat_map(|p| gauss_legendre(GL_NODES, a + p as f64 * h, a + (p + 1) as f64 * h)).collect()
}

/// `|| m(D) prod_i u_i ||_{L^2(I x T^3)}` with `u_i = e^{it Delta} f_i` (conjugated where
/// flagged), evaluated by time quadrature of the spatial norms. Returns the norm from the
/// Fourier side and, as a cross-check, from the grid side.
fn spacetime_norm(
    fields: &[(&TorusField, bool)],
    interval: (f64, f64),
    weight: Option<&dyn Fn([i64; 3]) -> f64>,
) -> (f64, f64) {
    let sparse: Vec<Sparse> = fields.iter().map(|(f, c)| Sparse::new(f, *c)).collect();
    if sparse.iter().any(|s| s.modes.is_empty()) {
        return (0.0, 0.0);
    }
    let side = fields[0].0.lattice().side();
    let extent: usize = sparse.iter().map(|s| s.extent).sum();
    let n = (2 * extent + 1).max(side);
    let bandwidth: f64 = sparse.iter().map(|s| s.spread).sum();
    let plan = GridPlan::get(n);
    let cell = (2.0 * PI / n as f64).powi(3);
    let freq = |i: usize| if i <= n / 2 { i as i64 } else { i as i64 - n as i64 };
    let mut fourier = 0.0;
    let mut grid = 0.0;
    for (t, w) in time_rule(interval.0, interval.1, bandwidth) {
        let mut prod = sparse[0].grid(t, n);
        for s in &sparse[1..] {
            prod.iter_mut().zip(s.grid(t, n)).for_each(|(p, v)| *p *= v);
        }
        match weight {
            None => {
                grid += w * prod.iter().map(|v| v.norm_sqr()).sum::<f64>() * cell;
                plan.forward(&mut prod);
                fourier += w * prod.iter().map(|v| (v * cell).norm_sqr()).sum::<f64>() / TORUS_VOLUME;
            }
            Some(m) => {
                plan.forward(&mut prod);
                let mut acc = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            let idx = (a * n + b) * n + c;
                            let mw = m([freq(a), freq(b), freq(c)]);
                            prod[idx] *= mw;
                            acc += (prod[idx] * cell).norm_sqr();
                        }
                    }
                }
                fourier += w * acc / TORUS_VOLUME;
                plan.inverse(&mut prod);
                let back = (n as f64).powi(-3);
                grid += w * prod.iter().map(|v| (v * back).norm_sqr()).sum::<f64>() * cell;
            }
        }
    }
    (fourier.max(0.0).sqrt(), grid.max(0.0).sqrt())
}

/// One sampled ratio.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeSample {
    pub dyadics: Option<[u64; 3]>,
    pub s: Option<f64>,
    pub delta: Option<f64>,
    pub sample: usize,
    pub seed: u64,
    pub lhs: f64,
    pub rhs_bound: f64,
    pub ratio: f64,
    /// The same left side computed on the other side of Parseval.
    #[serde(skip)]
    pub lhs_check: f64,
}

/// Growth diagnostic of the per-scale maximal ratios for one `delta`.
#[derive(Debug, Clone, Serialize)]
pub struct TrendRow {
    pub delta: f64,
    /// Maximal ratio at each sweep point, in sweep order.
    pub max_ratios: Vec<f64>,
    /// Least-squares slope of `log2(max ratio)` against `log2(N1 N2 N3)`.
    pub slope: f64,
    pub growing: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeSummary {
    pub probe: String,
    pub max_ratio: f64,
    /// Maximal ratio over the first half of the samples.
    pub max_ratio_half: f64,
    pub fitted_delta: Option<f64>,
    pub n_samples: usize,
    pub seed: u64,
    pub consistent: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub probe: String,
    pub seed: u64,
    pub n_samples: usize,
    pub samples: Vec<ProbeSample>,
    pub trends: Vec<TrendRow>,
    pub fitted_delta: Option<f64>,
}

impl ProbeReport {
    pub fn max_ratio(&self) -> f64 {
        self.samples.iter().map(|s| s.ratio).fold(0.0, f64::max)
    }

    /// Maximum over the samples with index below `count`; a run with `count` samples and
    /// the same seed reports exactly this value.
    pub fn max_ratio_upto(&self, count: usize) -> f64 {
        self.samples.iter().filter(|s| s.sample < count).map(|s| s.ratio).fold(0.0, f64::max)
    }

    /// Largest relative gap between the two evaluations of each left side.
    pub fn max_cross_check_gap(&self) -> f64 {
        self.samples
            .iter()
            .filter(|s| s.lhs > 0.0)
            .map(|s| (s.lhs - s.lhs_check).abs() / s.lhs)
            .fold(0.0, f64::max)
    }

    /// No growth trend at the surrogate `delta` (or no trend data at all).
    pub fn consistent(&self) -> bool {
        self.trends.is_empty() || self.fitted_delta.is_some()
    }

    pub fn summary(&self) -> ProbeSummary {
        ProbeSummary {
            probe: self.probe.clone(),
            max_ratio: self.max_ratio(),
            max_ratio_half: self.max_ratio_upto(self.n_samples / 2),
            fitted_delta: self.fitted_delta,
            n_samples: self.n_samples,
            seed: self.seed,
            consistent: self.consistent(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "probe,n1,n2,n3,s,delta,sample,seed,lhs,rhs_bound,ratio")?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for s in &self.samples {
            let (n1, n2, n3) = match s.dyadics {
                Some([a, b, c]) => (a.to_string(), b.to_string(), c.to_string()),
                None => Default::default(),
            };
            writeln!(
                w,
                "{},{n1},{n2},{n3},{},{},{},{},{:.12e},{:.12e},{:.12e}",
                self.probe,
                opt(s.s),
                opt(s.delta),
                s.sample,
                s.seed,
                s.lhs,
                s.rhs_bound,
                s.ratio
            )?;
        }
        Ok(())
    }
}

fn check_interval(interval: (f64, f64)) -> Result<()> {
    let (a, b) = interval;
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a >= b {
        return Err(Error::Argument(format!("time interval [{a}, {b}] must be a nonempty subset of [0, 1]")));
    }
    Ok(())
}

fn check_samples(samples: usize) -> Result<()> {
    if samples == 0 {
        return Err(Error::TooFewSamples("at least one sample is required".into()));
    }
    Ok(())
}

/// `N_2 N_3 max{N_3/N_1, 1/N_2}^delta`.
pub fn trilinear_bound_factor(dyadics: [u64; 3], delta: f64) -> f64 {
    let [n1, n2, n3] = dyadics.map(|v| v as f64);
    n2 * n3 * (n3 / n1).max(1.0 / n2).powf(delta)
}

/// Stream index of field `i` in sample `sample`.
fn stream(sample: usize, i: usize) -> u64 {
    (sample * 3 + i) as u64
}

/// Left side of the trilinear estimate for given fields (already projected).
pub fn trilinear_lhs(u: [&TorusField; 3], interval: (f64, f64)) -> (f64, f64) {
    spacetime_norm(&[(u[0], false), (u[1], false), (u[2], false)], interval, None)
}

fn check_dyadics(lattice: &ModeLattice, d: [u64; 3]) -> Result<()> {
    if !d.iter().all(|&n| is_dyadic(n)) || !(d[0] >= d[1] && d[1] >= d[2]) {
        return Err(Error::Argument(format!("{d:?} must be dyadic with N1 >= N2 >= N3")));
    }
    if 2 * d[0] as usize - 1 > lattice.cutoff() {
        return Err(Error::Argument(format!(
            "scale N1 = {} needs cutoff at least {}, got {}",
            d[0],
            2 * d[0] - 1,
            lattice.cutoff()
        )));
    }
    Ok(())
}

/// Ratios of the trilinear estimate over a dyadic sweep, for every `delta` in the grid.
pub fn trilinear_probe(
    lattice: ModeLattice,
    sweep: &[[u64; 3]],
    samples: usize,
    seed: u64,
    interval: (f64, f64),
    delta_grid: &[f64],
) -> Result<ProbeReport> {
    check_interval(interval)?;
    check_samples(samples)?;
    if sweep.is_empty() || delta_grid.is_empty() {
        return Err(Error::Argument("empty sweep or delta grid".into()));
    }
    for d in sweep {
        check_dyadics(&lattice, *d)?;
    }
    let mut rows = Vec::new();
    let mut per_point: Vec<Vec<(f64, f64)>> = Vec::new();
    for (pi, &d) in sweep.iter().enumerate() {
        let base: Vec<(usize, f64, f64, f64)> = (0..samples)
            .into_par_iter()
            .map(|i| -> Result<(usize, f64, f64, f64)> {
                let key = seed.wrapping_add(pi as u64 * 0x9E37_79B9);
                let u: Vec<TorusField> = (0..3)
                    .map(|j| lp_project(&random_unit_field(lattice, key, stream(i, j), Envelope::Shell { dyadic: d[j] }), d[j]))
                    .collect::<Result<_>>()?;
                let (lhs, check) = trilinear_lhs([&u[0], &u[1], &u[2]], interval);
                let norms: f64 = u.iter().map(|f| f.l2_norm()).product();
                Ok((i, lhs, check, norms))
            })
            .collect::<Result<_>>()?;
        per_point.push(base.iter().map(|b| (b.1, b.3)).collect());
        for &delta in delta_grid {
            for &(i, lhs, check, norms) in &base {
                let rhs = trilinear_bound_factor(d, delta) * norms;
                rows.push(ProbeSample {
                    dyadics: Some(d),
                    s: None,
                    delta: Some(delta),
                    sample: i,
                    seed,
                    lhs,
                    rhs_bound: rhs,
                    ratio: lhs / rhs,
                    lhs_check: check,
                });
            }
        }
    }
    let xs: Vec<f64> = sweep.iter().map(|d| d.iter().map(|&v| (v as f64).log2()).sum()).collect();
    let trends: Vec<TrendRow> = delta_grid
        .iter()
        .map(|&delta| {
            let max_ratios: Vec<f64> = sweep
                .iter()
                .zip(&per_point)
                .map(|(d, pts)| {
                    let f = trilinear_bound_factor(*d, delta);
                    pts.iter().map(|(l, n)| l / (f * n)).fold(0.0, f64::max)
                })
                .collect();
            let slope = fit_slope(&xs, &max_ratios.iter().map(|v| v.log2()).collect::<Vec<_>>());
            TrendRow { delta, max_ratios, slope, growing: slope > GROWTH_SLOPE }
        })
        .collect();
    let fitted_delta = trends.iter().filter(|t| !t.growing).map(|t| t.delta).fold(None, |a: Option<f64>, d| Some(a.map_or(d, |x| x.max(d))));
    Ok(ProbeReport { probe: "trilinear".into(), seed, n_samples: samples, samples: rows, trends, fitted_delta })
}

/// Slope above which a sweep counts as growing: about 7% per doubling of `N1 N2 N3`.
pub const GROWTH_SLOPE: f64 = 0.1;

fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return 0.0;
    }
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx
}

/// `|n|^s` with `|0|^s = 0`.
pub fn fractional_gradient_weight(s: f64) -> impl Fn([i64; 3]) -> f64 {
    move |n| {
        let q = norm_sq(n);
        if q == 0 {
            0.0
        } else {
            (q as f64).powf(0.5 * s)
        }
    }
}

/// `|| |grad|^s (e^{it Delta} f1 conj(e^{it Delta} f2) e^{it Delta} f3) ||_{L^2(I x T^3)}`.
pub fn multilinear_lhs(f: [&TorusField; 3], s: f64, interval: (f64, f64)) -> (f64, f64) {
    let m = fractional_gradient_weight(s);
    spacetime_norm(&[(f[0], false), (f[1], true), (f[2], false)], interval, Some(&m))
}

/// `min` over the placement of `H^s` among the three factors, others in `H^1`.
pub fn multilinear_bound(f: [&TorusField; 3], s: f64) -> Result<f64> {
    let hs: Vec<f64> = f.iter().map(|g| g.sobolev_norm(s)).collect::<Result<_>>()?;
    let h1: Vec<f64> = f.iter().map(|g| g.sobolev_norm(1.0)).collect::<Result<_>>()?;
    Ok((0..3).map(|i| (0..3).map(|j| if i == j { hs[j] } else { h1[j] }).product::<f64>()).fold(f64::INFINITY, f64::min))
}

/// Fields with complex Gaussian coefficients on `|n| < 2 band`, normalized in `H^1`.
fn h1_unit_field(lattice: ModeLattice, seed: u64, stream: u64, band: u64) -> Result<TorusField> {
    let f = random_field(lattice, seed, stream, Envelope::Flat);
    let r = 2.0 * band as f64;
    let f = f.multiplier(|n| if (norm_sq(n) as f64) < r * r { 1.0 } else { 0.0 });
    let h1 = f.sobolev_norm(1.0)?;
    if h1 == 0.0 {
        return Err(Error::Degenerate("empty sample support".into()));
    }
    Ok(f.scale(C64::new(1.0 / h1, 0.0)))
}

/// Ratios of the multilinear `H^s` estimate on `H^1`-normalized random samples supported
/// on `|n| < 2 band`.
pub fn multilinear_probe(
    lattice: ModeLattice,
    s: f64,
    samples: usize,
    seed: u64,
    interval: (f64, f64),
    band: u64,
) -> Result<ProbeReport> {
    check_interval(interval)?;
    check_samples(samples)?;
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Argument(format!("s = {s} outside [0, 1]")));
    }
    let rows: Vec<ProbeSample> = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<ProbeSample> {
            let f: Vec<TorusField> =
                (0..3).map(|j| h1_unit_field(lattice, seed, stream(i, j), band)).collect::<Result<_>>()?;
            let refs = [&f[0], &f[1], &f[2]];
            let (lhs, check) = multilinear_lhs(refs, s, interval);
            let rhs = multilinear_bound(refs, s)?;
            Ok(ProbeSample { dyadics: None, s: Some(s), delta: None, sample: i, seed, lhs, rhs_bound: rhs, ratio: lhs / rhs, lhs_check: check })
        })
        .collect::<Result<_>>()?;
    Ok(ProbeReport { probe: "multilinear".into(), seed, n_samples: samples, samples: rows, trends: Vec::new(), fitted_delta: None })
}

/// `||phi||_{L^6} / ||phi||_{H^1}`, with the sixth power integrated exactly on a grid
/// sized to the field's support.
pub fn sobolev_ratio(phi: &TorusField) -> Result<(f64, f64)> {
    let sp = Sparse::new(phi, false);
    let n = (6 * sp.extent + 1).max(phi.lattice().side());
    let cell = (2.0 * PI / n as f64).powi(3);
    let l6 = (sp.grid(0.0, n).iter().map(|v| v.norm_sqr().powi(3)).sum::<f64>() * cell).powf(1.0 / 6.0);
    Ok((l6, phi.sobolev_norm(1.0)?))
}

/// `L^6 / H^1` ratios of random fields supported on `|n| < 2 band`.
pub fn sobolev_probe(lattice: ModeLattice, samples: usize, seed: u64, band: u64) -> Result<ProbeReport> {
    check_samples(samples)?;
    let rows: Vec<ProbeSample> = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<ProbeSample> {
            let phi = h1_unit_field(lattice, seed, stream(i, 0), band)?;
            let (lhs, rhs) = sobolev_ratio(&phi)?;
            Ok(ProbeSample { dyadics: None, s: None, delta: None, sample: i, seed, lhs, rhs_bound: rhs, ratio: lhs / rhs, lhs_check: lhs })
        })
        .collect::<Result<_>>()?;
    Ok(ProbeReport { probe: "sobolev".into(), seed, n_samples: samples, samples: rows, trends: Vec::new(), fitted_delta: None })
}
