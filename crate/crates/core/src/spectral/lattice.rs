use crate::error::{Error, Result};

/// Largest supported cutoff.
pub const MAX_CUTOFF: usize = 64;

/// Version tag of the mode enumeration, written into every serialized record.
pub const ORDERING_VERSION: u32 = 1;

/// Truncated cubic mode lattice `{n in Z^3 : |n|_inf <= M}`.
///
/// Modes are enumerated lexicographically with the first component varying
/// slowest, so index `((n1+M)*S + (n2+M))*S + (n3+M)` with `S = 2M+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeLattice {
    cutoff: usize,
}

impl ModeLattice {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff == 0 || cutoff > MAX_CUTOFF {
            return Err(Error::Config(format!(
                "lattice cutoff must lie in 1..={MAX_CUTOFF}, got {cutoff}"
            )));
        }
        Ok(ModeLattice { cutoff })
    }

    #[inline]
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Modes per axis, `2M+1`.
    #[inline]
    pub fn side(&self) -> usize {
        2 * self.cutoff + 1
    }

    /// Total number of modes, `(2M+1)^3`.
    #[inline]
    pub fn len(&self) -> usize {
        let s = self.side();
        s * s * s
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Collocation points per axis for alias-free cubic products.
    #[inline]
    pub fn grid_size(&self) -> usize {
        2 * self.side()
    }

    #[inline]
    pub fn mode(&self, index: usize) -> [i64; 3] {
        let s = self.side();
        let m = self.cutoff as i64;
        let c = (index % s) as i64 - m;
        let b = ((index / s) % s) as i64 - m;
        let a = (index / (s * s)) as i64 - m;
        [a, b, c]
    }

    #[inline]
    pub fn index_of(&self, n: [i64; 3]) -> Option<usize> {
        let m = self.cutoff as i64;
        if n.iter().any(|&c| c < -m || c > m) {
            return None;
        }
        let s = self.side();
        let idx = |c: i64| (c + m) as usize;
        Some((idx(n[0]) * s + idx(n[1])) * s + idx(n[2]))
    }

    /// Index of `-n` for the mode at `index`.
    #[inline]
    pub fn negated(&self, index: usize) -> usize {
        self.len() - 1 - index
    }

    pub fn modes(&self) -> impl Iterator<Item = [i64; 3]> + '_ {
        (0..self.len()).map(move |i| self.mode(i))
    }

    /// `|n|^2` per mode, in enumeration order.
    pub fn squared_norms(&self) -> Vec<f64> {
        self.modes().map(|n| norm_sq(n) as f64).collect()
    }

    /// Largest Euclidean frequency on the lattice, `sqrt(3) M`.
    pub fn max_frequency(&self) -> f64 {
        3f64.sqrt() * self.cutoff as f64
    }
}

#[inline]
pub fn norm_sq(n: [i64; 3]) -> i64 {
    n[0] * n[0] + n[1] * n[1] + n[2] * n[2]
}

/// Japanese bracket `<n> = sqrt(1 + |n|^2)`.
#[inline]
pub fn bracket(n: [i64; 3]) -> f64 {
    (1.0 + norm_sq(n) as f64).sqrt()
}

/// Builds the lattice with cutoff `cutoff`.
pub fn make_lattice(cutoff: usize) -> Result<ModeLattice> {
    ModeLattice::new(cutoff)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_counts() {
        assert_eq!(make_lattice(1).unwrap().len(), 27);
        assert_eq!(make_lattice(2).unwrap().len(), 125);
        assert_eq!(make_lattice(8).unwrap().len(), 4913);
    }

    #[test]
    fn cutoff_out_of_range() {
        assert!(matches!(make_lattice(0), Err(Error::Config(_))));
        assert!(matches!(make_lattice(65), Err(Error::Config(_))));
        assert!(make_lattice(64).is_ok());
    }

    #[test]
    fn enumeration_is_bijective_and_symmetric() {
        let lat = make_lattice(3).unwrap();
        for i in 0..lat.len() {
            let n = lat.mode(i);
            assert_eq!(lat.index_of(n), Some(i));
            let neg = [-n[0], -n[1], -n[2]];
            assert_eq!(lat.index_of(neg), Some(lat.negated(i)));
        }
        assert_eq!(lat.mode(0), [-3, -3, -3]);
        assert_eq!(lat.index_of([4, 0, 0]), None);
    }
}
