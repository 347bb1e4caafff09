//! The scaled pair potential `V_N(x) = N^{3 beta} V(N^beta x)` on the torus.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::spectral::{norm_sq, ModeLattice};

const RADIAL_NODES: usize = 200;

/// Radial, nonnegative, compactly supported profile with unit integral over `R^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `exp(-1 / (1 - (r/R)^2))` inside the ball of radius `R`, normalized.
    Bump { radius: f64 },
}

impl Default for Profile {
    fn default() -> Self {
        Profile::Bump { radius: 0.5 }
    }
}

impl Profile {
    pub fn radius(&self) -> f64 {
        match *self {
            Profile::Bump { radius } => radius,
        }
    }

    fn shape(&self, r: f64) -> f64 {
        match *self {
            Profile::Bump { radius } => {
                let s = r / radius;
                if s >= 1.0 {
                    0.0
                } else {
                    (-1.0 / (1.0 - s * s)).exp()
                }
            }
        }
    }

    /// `int_{R^3} V(x) e^{-i xi x} dx` for `|xi| = k`, before normalization.
    fn raw_transform(&self, k: f64, nodes: &[(f64, f64)]) -> f64 {
        nodes
            .iter()
            .map(|&(r, w)| {
                let sinc = if k * r == 0.0 { 1.0 } else { (k * r).sin() / (k * r) };
                w * 4.0 * PI * r * r * self.shape(r) * sinc
            })
            .sum()
    }
}

/// Lattice coefficients of the periodized `V_N`, `V_N(x) = (2pi)^{-3} sum_n hat V_N(n) e^{inx}`.
#[derive(Debug, Clone)]
pub struct ScaledPotential {
    pub profile: Profile,
    pub n: usize,
    pub beta: f64,
    lattice: ModeLattice,
    /// Indexed by the difference lattice of cutoff `2M`.
    coeffs: Vec<f64>,
    diff: ModeLattice,
    /// Support radius of `V_N` exceeds `pi`, so periodic images overlap.
    pub wraps: bool,
}

impl ScaledPotential {
    pub fn lattice(&self) -> ModeLattice {
        self.lattice
    }

    /// `hat V_N(q)` for any `q` that is a difference of two lattice modes.
    pub fn coeff(&self, q: [i64; 3]) -> f64 {
        self.diff.index_of(q).map(|i| self.coeffs[i]).unwrap_or(0.0)
    }
}

/// Builds `hat V_N(n) = hat V(n / N^beta)` from the radial Fourier transform of the profile.
pub fn build_potential(profile: Profile, n: usize, beta: f64, lattice: ModeLattice) -> Result<ScaledPotential> {
    if n == 0 {
        return Err(Error::Argument("particle number must be positive".into()));
    }
    if !(beta > 0.0 && beta < 0.6) {
        return Err(Error::Argument(format!("beta = {beta} outside (0, 3/5)")));
    }
    let radius = profile.radius();
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Argument(format!("profile radius {radius} must be positive")));
    }
    let scale = (n as f64).powf(beta);
    let wraps = radius / scale > PI;
    if wraps {
        log::warn!("V_N support radius {} exceeds pi; periodic images overlap", radius / scale);
    }
    let nodes = gauss_legendre(RADIAL_NODES, 0.0, radius);
    let mass = profile.raw_transform(0.0, &nodes);
    let diff = ModeLattice::new(2 * lattice.cutoff())?;
    let coeffs = diff
        .modes()
        .map(|q| {
            if q == [0, 0, 0] {
                1.0
            } else {
                profile.raw_transform((norm_sq(q) as f64).sqrt() / scale, &nodes) / mass
            }
        })
        .collect();
    Ok(ScaledPotential { profile, n, beta, lattice, coeffs, diff, wraps })
}
