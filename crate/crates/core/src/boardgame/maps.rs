//! Collision maps `rho: {k+1..k+r} -> {1..k+r-1}` with `rho(j) < j`, and their
//! upper-echelon classes under the boardgame moves.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest `k + r` accepted by the enumerators.
pub const MAX_ENUMERATION: usize = 12;

/// `rho[l - 1] = rho(k + l)`, particle labels counted from 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CollisionMap {
    k: usize,
    rho: Vec<usize>,
}

impl CollisionMap {
    pub fn new(k: usize, rho: Vec<usize>) -> Result<Self> {
        if k == 0 {
            return Err(Error::Argument("k must be at least 1".into()));
        }
        for (i, &p) in rho.iter().enumerate() {
            let j = k + i + 1;
            if p == 0 || p >= j {
                return Err(Error::Argument(format!("rho({j}) = {p} violates 1 <= rho(j) < j")));
            }
        }
        Ok(CollisionMap { k, rho })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> usize {
        self.rho.len()
    }

    /// `rho(j)` for `j` in `k+1..=k+r`.
    pub fn at(&self, j: usize) -> usize {
        self.rho[j - self.k - 1]
    }

    pub fn values(&self) -> &[usize] {
        &self.rho
    }

    /// Nondecreasing in `j`.
    pub fn is_upper_echelon(&self) -> bool {
        self.rho.windows(2).all(|w| w[0] <= w[1])
    }

    /// Maps reachable by one move.
    ///
    /// A move is allowed at column `l` when `rho(k+l+1) < rho(k+l)`: the two columns are
    /// exchanged and the labels `k+l` and `k+l+1` are swapped in every later column. It
    /// corresponds to exchanging the time variables `t_l` and `t_{l+1}`.
    pub fn moves(&self) -> Vec<(usize, CollisionMap)> {
        let (k, r) = (self.k, self.r());
        let mut out = Vec::new();
        for l in 0..r.saturating_sub(1) {
            if self.rho[l + 1] < self.rho[l] {
                let (a, b) = (k + l + 1, k + l + 2);
                let mut n = self.rho.clone();
                n.swap(l, l + 1);
                for v in n.iter_mut().skip(l + 2) {
                    if *v == a {
                        *v = b;
                    } else if *v == b {
                        *v = a;
                    }
                }
                out.push((l, CollisionMap { k, rho: n }));
            }
        }
        out
    }

    /// Position in the lexicographic enumeration of `M_{k,r}`.
    pub fn rank(&self) -> usize {
        self.rho.iter().enumerate().fold(0, |acc, (i, &p)| acc * (self.k + i) + (p - 1))
    }

    pub fn encoding(&self) -> String {
        self.rho.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("-")
    }
}

impl fmt::Display for CollisionMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.rho.iter().enumerate().map(|(i, p)| format!("{}->{}", self.k + i + 1, p)).collect();
        write!(f, "({})", parts.join(", "))
    }
}

fn check_size(k: usize, r: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    if k + r > MAX_ENUMERATION {
        return Err(Error::Budget(format!("k + r = {} exceeds the enumeration limit {MAX_ENUMERATION}", k + r)));
    }
    Ok(())
}

/// `prod_{l=1}^r (k + l - 1)`.
pub fn collision_map_count(k: usize, r: usize) -> u128 {
    (1..=r).map(|l| (k + l - 1) as u128).product()
}

fn extend(k: usize, r: usize, prefix: Vec<usize>, out: &mut Vec<CollisionMap>) {
    if prefix.len() == r {
        out.push(CollisionMap { k, rho: prefix });
        return;
    }
    let bound = k + prefix.len();
    for p in 1..=bound {
        let mut next = prefix.clone();
        next.push(p);
        extend(k, r, next, out);
    }
}

/// All of `M_{k,r}` in lexicographic order.
pub fn enumerate_collision_maps(k: usize, r: usize) -> Result<Vec<CollisionMap>> {
    check_size(k, r)?;
    if r == 0 {
        return Ok(vec![CollisionMap { k, rho: Vec::new() }]);
    }
    let branches: Vec<Vec<CollisionMap>> = (1..=k)
        .into_par_iter()
        .map(|first| {
            let mut out = Vec::new();
            extend(k, r, vec![first], &mut out);
            out
        })
        .collect();
    Ok(branches.into_iter().flatten().collect())
}

/// One class of the move closure.
#[derive(Debug, Clone)]
pub struct EchelonClass {
    pub representative: CollisionMap,
    pub members: Vec<CollisionMap>,
}

impl EchelonClass {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Partition of `M_{k,r}` into move classes, sorted by representative.
pub fn upper_echelon_classes(k: usize, r: usize) -> Result<Vec<EchelonClass>> {
    let maps = enumerate_collision_maps(k, r)?;
    let mut parent: Vec<usize> = (0..maps.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, m) in maps.iter().enumerate() {
        for (_, n) in m.moves() {
            let (a, b) = (find(&mut parent, i), find(&mut parent, n.rank()));
            if a != b {
                parent[a] = b;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<CollisionMap>> = Default::default();
    for (i, m) in maps.into_iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(m);
    }
    let mut classes = Vec::with_capacity(groups.len());
    for (_, members) in groups {
        let reps: Vec<&CollisionMap> = members.iter().filter(|m| m.is_upper_echelon()).collect();
        if reps.len() != 1 {
            return Err(Error::Degenerate(format!(
                "class of {} has {} monotone members",
                members[0],
                reps.len()
            )));
        }
        classes.push(EchelonClass { representative: reps[0].clone(), members });
    }
    classes.sort_by(|a, b| a.representative.cmp(&b.representative));
    Ok(classes)
}

/// Time permutation `pi` with `J(rho; t) = J(sigma; t_pi)`, where `(t_pi)_l = t_{pi[l]}`,
/// following moves from `rho` until the monotone representative is reached.
pub fn path_to_representative(rho: &CollisionMap) -> (CollisionMap, Vec<usize>) {
    let mut cur = rho.clone();
    let mut perm: Vec<usize> = (0..rho.r()).collect();
    while let Some((l, next)) = cur.moves().into_iter().next() {
        perm.swap(l, l + 1);
        cur = next;
    }
    (cur, perm)
}

pub fn write_class_csv<W: Write>(w: &mut W, k: usize, r: usize, classes: &[EchelonClass]) -> Result<()> {
    writeln!(w, "k,r,class_id,representative,class_size")?;
    for (i, c) in classes.iter().enumerate() {
        writeln!(w, "{k},{r},{i},{},{}", c.representative.encoding(), c.size())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_product_formula() {
        for k in 1..=7 {
            for r in 0..=(8 - k) {
                let maps = enumerate_collision_maps(k, r).unwrap();
                assert_eq!(maps.len() as u128, collision_map_count(k, r), "k={k} r={r}");
                for (i, m) in maps.iter().enumerate() {
                    assert_eq!(m.rank(), i);
                }
            }
        }
        assert_eq!(enumerate_collision_maps(3, 5).unwrap().len(), 2520);
        assert_eq!(enumerate_collision_maps(2, 2).unwrap().len(), 6);
    }

    #[test]
    fn small_classes() {
        let c = upper_echelon_classes(1, 2).unwrap();
        let reps: Vec<String> = c.iter().map(|c| c.representative.encoding()).collect();
        assert_eq!(reps, ["1-1", "1-2"]);
        assert_eq!(upper_echelon_classes(1, 1).unwrap().len(), 1);
        let m = CollisionMap::new(3, vec![1, 2, 3, 4, 6]).unwrap();
        assert!(m.is_upper_echelon());
    }

    #[test]
    fn guards() {
        assert!(enumerate_collision_maps(6, 7).is_err());
        assert!(CollisionMap::new(2, vec![3]).is_err());
        assert!(CollisionMap::new(2, vec![0]).is_err());
    }

    #[test]
    fn path_reaches_the_class_representative() {
        for c in upper_echelon_classes(2, 4).unwrap() {
            for m in &c.members {
                let (rep, perm) = path_to_representative(m);
                assert_eq!(rep, c.representative);
                let mut p = perm.clone();
                p.sort();
                assert_eq!(p, (0..4).collect::<Vec<_>>());
            }
        }
    }
}
