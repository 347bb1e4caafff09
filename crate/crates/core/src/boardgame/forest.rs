//! Binary-tree forests attached to a collision map.

use std::fmt::Write as _;

use super::maps::CollisionMap;
use crate::error::Result;

/// Vertex of the forest; labels count from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Vertex {
    /// Root `w_j`.
    Root(usize),
    /// Internal vertex `v_l`, carrying the time `t_l`.
    Internal(usize),
    /// Leaf `u_i`.
    Leaf(usize),
}

impl Vertex {
    pub fn name(&self) -> String {
        match self {
            Vertex::Root(j) => format!("w{j}"),
            Vertex::Internal(l) => format!("v{l}"),
            Vertex::Leaf(i) => format!("u{i}"),
        }
    }
}

/// Children of `v_l`. `continuing` follows the particle `sigma(k+l)`, `created` the
/// particle `k+l` that the collision contracts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InternalNode {
    pub continuing: Vertex,
    pub created: Vertex,
}

impl InternalNode {
    /// Internal children as `(kappa_minus, kappa_plus)` with `kappa_minus < kappa_plus`.
    pub fn kappa(&self) -> (Option<usize>, Option<usize>) {
        let mut v: Vec<usize> = [self.continuing, self.created]
            .iter()
            .filter_map(|c| if let Vertex::Internal(l) = c { Some(*l) } else { None })
            .collect();
        v.sort();
        (v.first().copied(), v.get(1).copied())
    }
}

#[derive(Debug, Clone)]
pub struct Tree {
    /// Root index `j`.
    pub root: usize,
    pub child: Vertex,
    /// `l_{j,1} < ... < l_{j,m_j}`.
    pub internal: Vec<usize>,
    pub leaves: Vec<usize>,
    pub distinguished: bool,
}

impl Tree {
    pub fn m(&self) -> usize {
        self.internal.len()
    }
}

#[derive(Debug, Clone)]
pub struct TreeForest {
    pub sigma: CollisionMap,
    /// `nodes[l - 1]` describes `v_l`.
    pub nodes: Vec<InternalNode>,
    pub trees: Vec<Tree>,
}

impl TreeForest {
    pub fn k(&self) -> usize {
        self.sigma.k()
    }

    pub fn r(&self) -> usize {
        self.sigma.r()
    }

    /// `v_r`, absent when `r = 0`.
    pub fn distinguished_vertex(&self) -> Option<usize> {
        (self.r() > 0).then(|| self.r())
    }

    pub fn node(&self, l: usize) -> &InternalNode {
        &self.nodes[l - 1]
    }

    pub fn children(&self, v: Vertex) -> Vec<Vertex> {
        match v {
            Vertex::Root(j) => vec![self.trees[j - 1].child],
            Vertex::Internal(l) => vec![self.node(l).continuing, self.node(l).created],
            Vertex::Leaf(_) => Vec::new(),
        }
    }

    /// Graphviz description with the distinguished tree drawn bold.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("graph forest {\n");
        for tree in &self.trees {
            let attr = if tree.distinguished { " [penwidth=3]" } else { "" };
            let mut stack = vec![Vertex::Root(tree.root)];
            while let Some(v) = stack.pop() {
                for c in self.children(v) {
                    let _ = writeln!(s, "  {} -- {}{attr};", v.name(), c.name());
                    stack.push(c);
                }
            }
        }
        if let Some(l) = self.distinguished_vertex() {
            let _ = writeln!(s, "  v{l} [shape=doublecircle];");
        }
        s.push_str("}\n");
        s
    }
}

fn first_from(sigma: &CollisionMap, start: usize, particle: usize) -> Option<usize> {
    let k = sigma.k();
    (start..=sigma.r()).find(|&l| sigma.at(k + l) == particle)
}

/// Forest of `sigma`: `w_j` links to the first collision of particle `j`; `v_l` links to
/// the next collision of `sigma(k+l)` and to the first collision of `k+l`, each replaced
/// by the particle's leaf when there is none.
pub fn build_tree_graph(sigma: &CollisionMap) -> Result<TreeForest> {
    if !sigma.is_upper_echelon() {
        log::warn!("building a forest for {sigma}, which is not upper echelon");
    }
    let (k, r) = (sigma.k(), sigma.r());
    let nodes: Vec<InternalNode> = (1..=r)
        .map(|l| {
            let p = sigma.at(k + l);
            InternalNode {
                continuing: first_from(sigma, l + 1, p).map(Vertex::Internal).unwrap_or(Vertex::Leaf(p)),
                created: first_from(sigma, l + 1, k + l).map(Vertex::Internal).unwrap_or(Vertex::Leaf(k + l)),
            }
        })
        .collect();
    let mut trees = Vec::with_capacity(k);
    for j in 1..=k {
        let child = first_from(sigma, 1, j).map(Vertex::Internal).unwrap_or(Vertex::Leaf(j));
        let (mut internal, mut leaves) = (Vec::new(), Vec::new());
        let mut stack = vec![child];
        while let Some(v) = stack.pop() {
            match v {
                Vertex::Internal(l) => {
                    internal.push(l);
                    stack.push(nodes[l - 1].continuing);
                    stack.push(nodes[l - 1].created);
                }
                Vertex::Leaf(i) => leaves.push(i),
                Vertex::Root(_) => unreachable!(),
            }
        }
        internal.sort();
        leaves.sort();
        let distinguished = r > 0 && internal.contains(&r);
        trees.push(Tree { root: j, child, internal, leaves, distinguished });
    }
    Ok(TreeForest { sigma: sigma.clone(), nodes, trees })
}
