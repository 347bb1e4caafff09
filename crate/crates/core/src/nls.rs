//! Free Schrodinger propagator and the Galerkin-truncated cubic NLS
//! `i u_t + Delta u = lambda |u|^2 u` on the torus.

use std::io::Write;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::spectral::{norm_sq, GridValues, TorusField, TORUS_VOLUME};

/// `e^{it Delta} f`: the coefficient at `n` picks up `e^{-it|n|^2}`.
pub fn free_propagate(f: &TorusField, t: f64) -> TorusField {
    if t == 0.0 {
        return f.clone();
    }
    f.complex_multiplier(|n| C64::from_polar(1.0, -t * norm_sq(n) as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Exact linear half steps around an exact pointwise nonlinear phase.
    SplitStepStrang,
    /// Lawson (integrating-factor) fourth-order Runge-Kutta.
    IntegratingFactorRk4,
}

impl std::str::FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "split_step_strang" | "strang" => Ok(Integrator::SplitStepStrang),
            "integrating_factor_rk4" | "ifrk4" => Ok(Integrator::IntegratingFactorRk4),
            other => Err(Error::Config(format!("unknown integrator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlsParams {
    /// Coupling `lambda`: `+1` defocusing, `-1` focusing.
    pub lambda: f64,
    pub dt: f64,
    pub t_final: f64,
    pub integrator: Integrator,
}

impl NlsParams {
    pub fn new(lambda: f64, dt: f64, t_final: f64, integrator: Integrator) -> Result<Self> {
        let p = NlsParams { lambda, dt, t_final, integrator };
        p.validate()?;
        Ok(p)
    }

    pub fn defocusing(dt: f64, t_final: f64) -> Self {
        NlsParams { lambda: 1.0, dt, t_final, integrator: Integrator::SplitStepStrang }
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda != 1.0 && self.lambda != -1.0 {
            return Err(Error::Config(format!("lambda must be +1 or -1, got {}", self.lambda)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("t_final must be nonnegative, got {}", self.t_final)));
        }
        Ok(())
    }
}

/// Samples `S_t(phi)` at increasing times.
#[derive(Debug, Clone)]
pub struct NlsTrajectory {
    pub lambda: f64,
    pub times: Vec<f64>,
    pub states: Vec<TorusField>,
}

/// Growth factor of the `H^1` norm that triggers the blow-up abort.
pub const BLOWUP_FACTOR: f64 = 1e3;

fn nonlinear_rhs(u: &TorusField, lambda: f64) -> TorusField {
    u.cubic_nonlinearity().scale(C64::new(0.0, -lambda))
}

/// Precomputed free phases `exp(-i h |n|^2 / 2)` for one step size.
struct HalfStep {
    phases: Vec<C64>,
}

impl HalfStep {
    fn new(lattice: &crate::spectral::ModeLattice, h: f64) -> Self {
        HalfStep { phases: lattice.squared_norms().iter().map(|e| C64::from_polar(1.0, -0.5 * h * e)).collect() }
    }

    fn apply(&self, f: &TorusField) -> TorusField {
        let coeffs = f.coeffs().iter().zip(&self.phases).map(|(c, p)| c * p).collect();
        TorusField::from_coeffs(f.lattice(), coeffs).expect("same lattice")
    }
}

fn strang_step(u: &TorusField, h: f64, lambda: f64, e: &HalfStep) -> TorusField {
    let half = e.apply(u);
    let mut g: GridValues = half.to_grid(u.lattice().side()).expect("lattice side resolves itself");
    for v in g.values.iter_mut() {
        *v *= C64::from_polar(1.0, -lambda * v.norm_sqr() * h);
    }
    let mid = TorusField::from_grid(u.lattice(), g).expect("grid matches lattice");
    e.apply(&mid)
}

fn ifrk4_step(u: &TorusField, h: f64, lambda: f64, e: &HalfStep) -> TorusField {
    let one = C64::new(1.0, 0.0);
    let half = C64::new(0.5, 0.0);
    let hc = C64::new(h, 0.0);
    let k1 = nonlinear_rhs(u, lambda).scale(hc);
    let mut a = u.clone();
    a.axpy(half, &k1);
    let k2 = nonlinear_rhs(&e.apply(&a), lambda).scale(hc);
    let eu = e.apply(u);
    let mut b = eu.clone();
    b.axpy(half, &k2);
    let k3 = nonlinear_rhs(&b, lambda).scale(hc);
    let mut c = e.apply(&eu);
    c.axpy(one, &e.apply(&k3));
    let k4 = nonlinear_rhs(&c, lambda).scale(hc);
    let mut out = e.apply(&eu);
    let mut mid = k2.clone();
    mid.axpy(one, &k3);
    out.axpy(C64::new(1.0 / 6.0, 0.0), &e.apply(&e.apply(&k1)));
    out.axpy(C64::new(2.0 / 6.0, 0.0), &e.apply(&mid));
    out.axpy(C64::new(1.0 / 6.0, 0.0), &k4);
    out
}

/// One step of size `h` (which may be negative).
pub fn nls_step(u: &TorusField, h: f64, lambda: f64, integrator: Integrator) -> TorusField {
    step_with(u, h, lambda, integrator, &HalfStep::new(&u.lattice(), h))
}

fn step_with(u: &TorusField, h: f64, lambda: f64, integrator: Integrator, e: &HalfStep) -> TorusField {
    match integrator {
        Integrator::SplitStepStrang => strang_step(u, h, lambda, e),
        Integrator::IntegratingFactorRk4 => ifrk4_step(u, h, lambda, e),
    }
}

fn check_finite(u: &TorusField) -> Result<()> {
    if u.coeffs().iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric("NLS state contains non-finite coefficients".into()))
    }
}

/// Advances `u` by `span` (any sign) in equal steps of at most `dt`.
fn advance(u: &TorusField, span: f64, params: &NlsParams, h1_limit: f64) -> Result<TorusField> {
    if span == 0.0 {
        return Ok(u.clone());
    }
    let steps = (span.abs() / params.dt).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let e = HalfStep::new(&u.lattice(), h);
    let mut state = u.clone();
    for _ in 0..steps {
        state = step_with(&state, h, params.lambda, params.integrator, &e);
        check_finite(&state)?;
        let h1 = state.sobolev_norm(1.0)?;
        if h1 > h1_limit {
            return Err(Error::Divergence(format!(
                "H^1 norm {h1:.3e} exceeded {BLOWUP_FACTOR:e} times its initial value"
            )));
        }
    }
    Ok(state)
}

fn stiffness_warning(phi: &TorusField, params: &NlsParams) {
    let m = phi.lattice().cutoff() as f64;
    if params.dt * (2.0 * m) * (2.0 * m) > 1.0 {
        log::warn!(
            "dt = {} under-resolves the fastest linear phase at cutoff {} (dt (2M)^2 = {:.2})",
            params.dt,
            m,
            params.dt * 4.0 * m * m
        );
    }
}

/// `S_t(phi)` at a single time `t` (negative times run the flow backwards).
pub fn evolve_to(phi: &TorusField, t: f64, params: &NlsParams) -> Result<TorusField> {
    params.validate()?;
    let limit = BLOWUP_FACTOR * phi.sobolev_norm(1.0)?.max(f64::MIN_POSITIVE);
    advance(phi, t, params, limit)
}

/// Samples of `S_t(phi)` at `sample_times` (nondecreasing, within `[0, t_final]`). Interior
/// steps are sized to land exactly on every sample time.
pub fn nls_evolve(phi: &TorusField, params: &NlsParams, sample_times: &[f64]) -> Result<NlsTrajectory> {
    params.validate()?;
    if sample_times.is_empty() {
        return Err(Error::Argument("at least one sample time is required".into()));
    }
    if sample_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Argument("sample times must be nondecreasing".into()));
    }
    if sample_times[0] < 0.0 || *sample_times.last().unwrap() > params.t_final * (1.0 + 1e-12) {
        return Err(Error::Argument(format!(
            "sample times must lie in [0, t_final = {}]",
            params.t_final
        )));
    }
    stiffness_warning(phi, params);
    let limit = BLOWUP_FACTOR * phi.sobolev_norm(1.0)?.max(f64::MIN_POSITIVE);
    let mut states = Vec::with_capacity(sample_times.len());
    let mut current = phi.clone();
    let mut t_now = 0.0;
    for &t in sample_times {
        current = advance(&current, t - t_now, params, limit)?;
        t_now = t;
        states.push(current.clone());
    }
    Ok(NlsTrajectory { lambda: params.lambda, times: sample_times.to_vec(), states })
}

/// `count + 1` equally spaced times `0, t_final/count, ..., t_final`.
pub fn uniform_times(t_final: f64, count: usize) -> Vec<f64> {
    (0..=count).map(|i| t_final * i as f64 / count as f64).collect()
}

/// `(mass, energy)` with `mass = int |u|^2` and `energy = int |grad u|^2 + (lambda/2) int |u|^4`.
pub fn conserved_quantities(u: &TorusField, lambda: f64) -> (f64, f64) {
    let mass = u.l2_norm_sq();
    let energy = u.gradient_norm_sq() + 0.5 * lambda * u.lp_norm_pow(4);
    (mass, energy)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub h1_norm: f64,
}

impl NlsTrajectory {
    pub fn diagnostics(&self) -> Vec<TrajectoryRow> {
        self.times
            .iter()
            .zip(&self.states)
            .map(|(&t, u)| {
                let (mass, energy) = conserved_quantities(u, self.lambda);
                TrajectoryRow { t, mass, energy, h1_norm: u.sobolev_norm(1.0).unwrap_or(f64::NAN) }
            })
            .collect()
    }

    /// CSV with columns `t,mass,energy,H1_norm`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "t,mass,energy,H1_norm")?;
        for row in self.diagnostics() {
            writeln!(w, "{:.12e},{:.16e},{:.16e},{:.16e}", row.t, row.mass, row.energy, row.h1_norm)?;
        }
        Ok(())
    }

    /// Largest relative drift of mass and energy from their initial values.
    pub fn drifts(&self) -> (f64, f64) {
        let rows = self.diagnostics();
        let m0 = rows[0].mass;
        let e0 = rows[0].energy;
        let md = rows.iter().map(|r| (r.mass - m0).abs()).fold(0.0, f64::max) / m0.abs().max(1e-300);
        let ed = rows.iter().map(|r| (r.energy - e0).abs()).fold(0.0, f64::max) / e0.abs().max(1e-300);
        (md, ed)
    }
}

/// The constant solution amplitude `(2pi)^{-3/2}`, of unit mass.
pub fn unit_constant_amplitude() -> f64 {
    TORUS_VOLUME.powf(-0.5)
}
