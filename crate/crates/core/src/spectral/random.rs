//! Seeded random fields. Every draw is keyed by `(seed, stream)` so that sample `i`
//! of a run is reproducible independently of how many samples precede it.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::field::TorusField;
use super::lattice::{norm_sq, ModeLattice};
use super::littlewood_paley::dyadic_multiplier;

/// Counter-based generator for one `(seed, stream)` pair.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn complex_gaussian<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Amplitude profile applied to the i.i.d. complex Gaussian coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Envelope {
    /// Every lattice mode equally weighted.
    Flat,
    /// `exp(-|n|^2 / (2 w^2))`, a smooth (rapidly decaying) random field.
    Gaussian { width: f64 },
    /// Restricted to the support of the Littlewood-Paley multiplier `Phi_N`.
    Shell { dyadic: u64 },
}

impl Envelope {
    fn weight(&self, n: [i64; 3]) -> f64 {
        match *self {
            Envelope::Flat => 1.0,
            Envelope::Gaussian { width } => (-(norm_sq(n) as f64) / (2.0 * width * width)).exp(),
            Envelope::Shell { dyadic } => {
                if dyadic_multiplier(dyadic, n) > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Random field with complex Gaussian coefficients shaped by `envelope` (not normalized).
pub fn random_field(lattice: ModeLattice, seed: u64, stream: u64, envelope: Envelope) -> TorusField {
    let mut rng = stream_rng(seed, stream);
    let coeffs = lattice
        .modes()
        .map(|n| complex_gaussian(&mut rng) * envelope.weight(n))
        .collect();
    TorusField::from_coeffs(lattice, coeffs).expect("length matches lattice")
}

/// Random field normalized to unit `L^2` norm.
pub fn random_unit_field(
    lattice: ModeLattice,
    seed: u64,
    stream: u64,
    envelope: Envelope,
) -> TorusField {
    random_field(lattice, seed, stream, envelope)
        .normalized()
        .expect("random field is nonzero with probability one")
}

/// Default smooth random datum used by the hierarchy experiments.
pub fn smooth_unit_field(lattice: ModeLattice, seed: u64, stream: u64) -> TorusField {
    random_unit_field(lattice, seed, stream, Envelope::Gaussian { width: 1.0 })
}
