//! Smooth dyadic frequency decomposition.

use super::field::TorusField;
use super::lattice::{norm_sq, ModeLattice};
use crate::error::{Error, Result};

fn smooth_zero(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

/// The bump `Phi`: identically 1 on `[0, 1]`, 0 on `[2, inf)`, with the C-infinity
/// transition `g(2-r) / (g(2-r) + g(r-1))`, `g(s) = exp(-1/s)`.
pub fn bump(r: f64) -> f64 {
    let r = r.abs();
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let a = smooth_zero(2.0 - r);
        let b = smooth_zero(r - 1.0);
        a / (a + b)
    }
}

pub fn is_dyadic(n: u64) -> bool {
    n >= 1 && n.is_power_of_two()
}

/// `Phi_N(xi)`: `Phi(|xi|)` for `N = 1`, `Phi(|xi|/N) - Phi(2|xi|/N)` otherwise.
pub fn dyadic_multiplier(dyadic: u64, xi: [i64; 3]) -> f64 {
    let r = (norm_sq(xi) as f64).sqrt();
    if dyadic == 1 {
        bump(r)
    } else {
        let n = dyadic as f64;
        bump(r / n) - bump(2.0 * r / n)
    }
}

/// Smallest dyadic `N` with `N >= sqrt(3) M`: the multipliers up to it sum to one on the lattice.
pub fn max_dyadic(lattice: &ModeLattice) -> u64 {
    let top = lattice.max_frequency();
    let mut n = 1u64;
    while (n as f64) < top {
        n *= 2;
    }
    n
}

/// Dyadic scales `1, 2, 4, ..., max_dyadic`.
pub fn dyadic_scales(lattice: &ModeLattice) -> Vec<u64> {
    let top = max_dyadic(lattice);
    std::iter::successors(Some(1u64), |n| Some(n * 2)).take_while(|&n| n <= top).collect()
}

/// `P_N f`.
pub fn lp_project(f: &TorusField, dyadic: u64) -> Result<TorusField> {
    if !is_dyadic(dyadic) {
        return Err(Error::Argument(format!("{dyadic} is not a dyadic integer")));
    }
    let lattice = f.lattice();
    if dyadic > max_dyadic(&lattice) {
        return Err(Error::Argument(format!(
            "dyadic scale {dyadic} exceeds the largest resolvable scale {} at cutoff {}",
            max_dyadic(&lattice),
            lattice.cutoff()
        )));
    }
    Ok(f.multiplier(|n| dyadic_multiplier(dyadic, n)))
}
