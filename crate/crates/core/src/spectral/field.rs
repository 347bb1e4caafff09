use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use super::grid::{grid_to_modes, modes_to_grid};
use super::lattice::{bracket, norm_sq, ModeLattice};
use crate::error::{Error, Result};

/// `(2pi)^3`, the volume of the torus.
pub const TORUS_VOLUME: f64 = 8.0 * PI * PI * PI;

/// Direction of a [`TorusField::transform`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToModes,
    ToGrid,
}

/// One-particle field on the torus stored by its Fourier coefficients
/// `f^(n) = int f(x) e^{-i<x,n>} dx` over the mode lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusField {
    lattice: ModeLattice,
    coeffs: Vec<C64>,
}

/// Point values of a field on an `n^3` collocation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridValues {
    pub size: usize,
    pub values: Vec<C64>,
}

impl TorusField {
    pub fn zeros(lattice: ModeLattice) -> Self {
        TorusField { coeffs: vec![C64::new(0.0, 0.0); lattice.len()], lattice }
    }

    pub fn from_coeffs(lattice: ModeLattice, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != lattice.len() {
            return Err(Error::Shape(format!(
                "expected {} coefficients for cutoff {}, got {}",
                lattice.len(),
                lattice.cutoff(),
                coeffs.len()
            )));
        }
        Ok(TorusField { lattice, coeffs })
    }

    /// `e^{i<x,n>}`, whose coefficient at `n` is `(2pi)^3`.
    pub fn plane_wave(lattice: ModeLattice, n: [i64; 3], amplitude: C64) -> Result<Self> {
        let idx = lattice
            .index_of(n)
            .ok_or_else(|| Error::Argument(format!("mode {n:?} outside the lattice")))?;
        let mut f = Self::zeros(lattice);
        f.coeffs[idx] = amplitude * TORUS_VOLUME;
        Ok(f)
    }

    /// The constant function `value`.
    pub fn constant(lattice: ModeLattice, value: C64) -> Self {
        Self::plane_wave(lattice, [0, 0, 0], value).expect("zero mode is always present")
    }

    #[inline]
    pub fn lattice(&self) -> ModeLattice {
        self.lattice
    }

    #[inline]
    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    pub fn coeff(&self, n: [i64; 3]) -> C64 {
        self.lattice.index_of(n).map_or(C64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    fn check_grid(&self, n: usize) -> Result<()> {
        if n < self.lattice.side() {
            return Err(Error::Shape(format!(
                "grid of {n} points per axis cannot resolve cutoff {}",
                self.lattice.cutoff()
            )));
        }
        Ok(())
    }

    /// Point values on an `n^3` grid.
    pub fn to_grid(&self, n: usize) -> Result<GridValues> {
        self.check_grid(n)?;
        Ok(GridValues { size: n, values: modes_to_grid(&self.lattice, &self.coeffs, n) })
    }

    /// Samples point values on the lattice's padded product grid.
    pub fn to_padded_grid(&self) -> GridValues {
        self.to_grid(self.lattice.grid_size()).expect("padded grid always resolves the lattice")
    }

    /// Projects grid values back onto `lattice`, discarding higher modes.
    pub fn from_grid(lattice: ModeLattice, grid: GridValues) -> Result<Self> {
        if grid.values.len() != grid.size.pow(3) {
            return Err(Error::Shape(format!(
                "grid of size {} holds {} values",
                grid.size,
                grid.values.len()
            )));
        }
        if grid.size < lattice.side() {
            return Err(Error::Shape(format!(
                "grid of {} points per axis cannot resolve cutoff {}",
                grid.size,
                lattice.cutoff()
            )));
        }
        let coeffs = grid_to_modes(&lattice, grid.values, grid.size);
        Ok(TorusField { lattice, coeffs })
    }

    /// Round trip helper mirroring the two directions of the transform on the padded grid.
    pub fn transform(&self, direction: Direction) -> Result<Self> {
        match direction {
            Direction::ToModes => Ok(self.clone()),
            Direction::ToGrid => {
                let g = self.to_padded_grid();
                Self::from_grid(self.lattice, g)
            }
        }
    }

    /// `int |f|^2 dx = (2pi)^{-3} sum_n |f^(n)|^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() / TORUS_VOLUME
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// `<f, g> = int conj(f) g dx`.
    pub fn inner(&self, other: &TorusField) -> C64 {
        debug_assert_eq!(self.lattice, other.lattice);
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            / TORUS_VOLUME
    }

    /// `(sum_n |f^(n)|^2 <n>^{2s})^{1/2}`, scaled so that `s = 0` gives the L^2 norm.
    pub fn sobolev_norm(&self, s: f64) -> Result<f64> {
        if !s.is_finite() {
            return Err(Error::Argument(format!("Sobolev exponent must be finite, got {s}")));
        }
        let mut acc = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::Numeric(format!("coefficient {i} is {c}")));
            }
            acc += c.norm_sqr() * bracket(self.lattice.mode(i)).powf(2.0 * s);
        }
        Ok((acc / TORUS_VOLUME).sqrt())
    }

    /// `int |grad f|^2 dx`.
    pub fn gradient_norm_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c.norm_sqr() * norm_sq(self.lattice.mode(i)) as f64)
            .sum::<f64>()
            / TORUS_VOLUME
    }

    /// Applies a real Fourier multiplier `m(n)`.
    pub fn multiplier(&self, m: impl Fn([i64; 3]) -> f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * m(self.lattice.mode(i)))
            .collect();
        TorusField { lattice: self.lattice, coeffs }
    }

    /// Applies a complex Fourier multiplier.
    pub fn complex_multiplier(&self, m: impl Fn([i64; 3]) -> C64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * m(self.lattice.mode(i)))
            .collect();
        TorusField { lattice: self.lattice, coeffs }
    }

    /// `Delta f`.
    pub fn laplacian(&self) -> Self {
        self.multiplier(|n| -(norm_sq(n) as f64))
    }

    pub fn conj(&self) -> Self {
        // conj(f)^(n) = conj(f^(-n))
        let len = self.lattice.len();
        let coeffs = (0..len).map(|i| self.coeffs[self.lattice.negated(i)].conj()).collect();
        TorusField { lattice: self.lattice, coeffs }
    }

    pub fn scale(&self, a: C64) -> Self {
        TorusField { lattice: self.lattice, coeffs: self.coeffs.iter().map(|c| c * a).collect() }
    }

    pub fn axpy(&mut self, a: C64, x: &TorusField) {
        debug_assert_eq!(self.lattice, x.lattice);
        for (y, xv) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *y += a * xv;
        }
    }

    pub fn sub(&self, other: &TorusField) -> Self {
        let mut out = self.clone();
        out.axpy(C64::new(-1.0, 0.0), other);
        out
    }

    pub fn max_abs_diff(&self, other: &TorusField) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.l2_norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Degenerate("cannot normalize a zero field".into()));
        }
        Ok(self.scale(C64::new(1.0 / n, 0.0)))
    }

    /// Galerkin-truncated product `P_M(f * g * conj(h))`, evaluated alias-free on the
    /// padded grid.
    pub fn cubic_product(f: &TorusField, g: &TorusField, h: &TorusField) -> Self {
        let n = f.lattice.grid_size();
        let fg = f.to_padded_grid();
        let gg = g.to_padded_grid();
        let hg = h.to_padded_grid();
        let values = fg
            .values
            .iter()
            .zip(&gg.values)
            .zip(&hg.values)
            .map(|((a, b), c)| a * b * c.conj())
            .collect();
        Self::from_grid(f.lattice, GridValues { size: n, values })
            .expect("padded grid matches lattice")
    }

    /// `P_M(|f|^2 f)`.
    pub fn cubic_nonlinearity(&self) -> Self {
        let mut g = self.to_padded_grid();
        for v in g.values.iter_mut() {
            *v *= v.norm_sqr();
        }
        Self::from_grid(self.lattice, g).expect("padded grid matches lattice")
    }

    /// `int |f|^p dx`, computed on a grid that integrates `|f|^p` exactly for even `p`.
    pub fn lp_norm_pow(&self, p: u32) -> f64 {
        let n = self.lattice.cutoff() * p as usize + 1;
        let g = self.to_grid(n.max(self.lattice.side())).expect("grid resolves lattice");
        let w = TORUS_VOLUME / (g.size as f64).powi(3);
        g.values.iter().map(|v| v.norm().powi(p as i32)).sum::<f64>() * w
    }
}

impl GridValues {
    /// Trapezoidal (spectrally exact for band-limited integrands) `int |u|^2 dx`.
    pub fn l2_norm_sq(&self) -> f64 {
        let w = TORUS_VOLUME / (self.size as f64).powi(3);
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * w
    }
}
