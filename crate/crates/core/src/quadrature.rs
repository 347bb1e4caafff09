//! One-dimensional quadrature rules.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[a, b]` (Newton iteration on `P_n`).
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    assert!(n > 0);
    let mut out = vec![(0.0, 0.0); n];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (mid - half * x, half * w);
        out[n - 1 - i] = (mid + half * x, half * w);
    }
    out
}

/// Composite Simpson weights for `intervals` equal subintervals of width `h`.
pub fn simpson_weights(intervals: usize, h: f64) -> Result<Vec<f64>> {
    if intervals == 0 || intervals % 2 != 0 {
        return Err(Error::Argument(format!(
            "Simpson's rule needs an even, positive number of subintervals, got {intervals}"
        )));
    }
    let mut w = vec![0.0; intervals + 1];
    for (i, wi) in w.iter_mut().enumerate() {
        *wi = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        } * h
            / 3.0;
    }
    Ok(w)
}

pub fn trapezoid_weights(intervals: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; intervals + 1];
    w[0] = 0.5 * h;
    w[intervals] = 0.5 * h;
    if intervals == 0 {
        w[0] = 0.0;
    }
    w
}
