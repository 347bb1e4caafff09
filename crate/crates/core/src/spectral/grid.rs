//! Three-dimensional FFTs on uniform collocation grids of `[0, 2pi]^3`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use super::lattice::ModeLattice;

/// Cached forward/inverse plans for one grid size.
pub struct GridPlan {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plan_cache() -> &'static Mutex<HashMap<usize, Arc<GridPlan>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GridPlan>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl GridPlan {
    pub fn get(n: usize) -> Arc<GridPlan> {
        let mut cache = plan_cache().lock().expect("fft plan cache poisoned");
        cache
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Arc::new(GridPlan {
                    n,
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                })
            })
            .clone()
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Unnormalized forward transform `X_k = sum_j x_j e^{-2 pi i jk/n}` along all three axes.
    pub fn forward(&self, data: &mut [C64]) {
        self.forward_pruned(data, &vec![true; self.n]);
    }

    /// Unnormalized inverse transform `x_j = sum_k X_k e^{+2 pi i jk/n}` along all three axes.
    pub fn inverse(&self, data: &mut [C64]) {
        self.inverse_pruned(data, &vec![true; self.n]);
    }

    /// Forward transform whose output is only read at indices with `keep` set on every axis.
    pub fn forward_pruned(&self, data: &mut [C64], keep: &[bool]) {
        let fft = &self.forward;
        self.first_axis(data, fft);
        self.middle_axis(data, fft, keep);
        self.last_axis(data, fft, keep);
    }

    /// Inverse transform of data supported on indices with `keep` set on every axis.
    pub fn inverse_pruned(&self, data: &mut [C64], keep: &[bool]) {
        let fft = &self.inverse;
        self.last_axis(data, fft, keep);
        self.middle_axis(data, fft, keep);
        self.first_axis(data, fft);
    }

    fn scratch(fft: &Arc<dyn Fft<f64>>) -> Vec<C64> {
        vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()]
    }

    fn last_axis(&self, data: &mut [C64], fft: &Arc<dyn Fft<f64>>, keep: &[bool]) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n, "grid buffer has wrong length");
        let mut scratch = Self::scratch(fft);
        for a in (0..n).filter(|&a| keep[a]) {
            for b in (0..n).filter(|&b| keep[b]) {
                let start = (a * n + b) * n;
                fft.process_with_scratch(&mut data[start..start + n], &mut scratch);
            }
        }
    }

    fn middle_axis(&self, data: &mut [C64], fft: &Arc<dyn Fft<f64>>, keep: &[bool]) {
        let n = self.n;
        let mut scratch = Self::scratch(fft);
        let mut buf = vec![C64::new(0.0, 0.0); n * n];
        for a in (0..n).filter(|&a| keep[a]) {
            let slab = &mut data[a * n * n..(a + 1) * n * n];
            for b in 0..n {
                for c in 0..n {
                    buf[c * n + b] = slab[b * n + c];
                }
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for b in 0..n {
                for c in 0..n {
                    slab[b * n + c] = buf[c * n + b];
                }
            }
        }
    }

    fn first_axis(&self, data: &mut [C64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let mut scratch = Self::scratch(fft);
        let mut buf = vec![C64::new(0.0, 0.0); n * n];
        for b in 0..n {
            for a in 0..n {
                let row = (a * n + b) * n;
                for c in 0..n {
                    buf[c * n + a] = data[row + c];
                }
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for a in 0..n {
                let row = (a * n + b) * n;
                for c in 0..n {
                    data[row + c] = buf[c * n + a];
                }
            }
        }
    }
}

/// Grid indices along one axis that carry lattice modes.
fn lattice_support(lattice: &ModeLattice, n: usize) -> Vec<bool> {
    let m = lattice.cutoff();
    (0..n).map(|i| i <= m || i >= n - m).collect()
}

#[inline]
fn wrap(c: i64, n: usize) -> usize {
    c.rem_euclid(n as i64) as usize
}

/// Grid offset of lattice mode `mode` on an `n^3` grid.
#[inline]
pub fn grid_index(mode: [i64; 3], n: usize) -> usize {
    (wrap(mode[0], n) * n + wrap(mode[1], n)) * n + wrap(mode[2], n)
}

/// Point values `u(x_j) = (2pi)^{-3} sum_n c_n e^{i<n, x_j>}` on an `n^3` grid.
pub fn modes_to_grid(lattice: &ModeLattice, coeffs: &[C64], n: usize) -> Vec<C64> {
    assert!(n >= lattice.side(), "grid too small for lattice");
    let plan = GridPlan::get(n);
    let mut data = vec![C64::new(0.0, 0.0); n * n * n];
    let scale = (2.0 * std::f64::consts::PI).powi(-3);
    for (i, mode) in lattice.modes().enumerate() {
        data[grid_index(mode, n)] = coeffs[i] * scale;
    }
    plan.inverse_pruned(&mut data, &lattice_support(lattice, n));
    data
}

/// Lattice coefficients `c_n = (2pi/n)^3 sum_j u(x_j) e^{-i<n, x_j>}`; modes beyond the
/// lattice are discarded (Galerkin truncation).
pub fn grid_to_modes(lattice: &ModeLattice, mut values: Vec<C64>, n: usize) -> Vec<C64> {
    assert_eq!(values.len(), n * n * n, "grid buffer has wrong length");
    let plan = GridPlan::get(n);
    plan.forward_pruned(&mut values, &lattice_support(lattice, n));
    let scale = (2.0 * std::f64::consts::PI / n as f64).powi(3);
    lattice
        .modes()
        .map(|mode| values[grid_index(mode, n)] * scale)
        .collect()
}

/// Collocation points per axis to integrate a product of `degree` fields from `lattice` exactly.
pub fn exact_grid_size(lattice: &ModeLattice, degree: usize) -> usize {
    degree * lattice.cutoff() + 1
}
