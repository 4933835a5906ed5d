//! Hypergraphs of queries and the structural algorithms on them.
//!
//! Vertices are kept in a fixed order (for a query: order of first
//! occurrence in the atoms). Every search breaks ties by that order, which
//! makes all witnesses deterministic.

mod head_path;
mod join_tree;
mod minor;

pub use head_path::{find_head_path, HeadPath};
pub use join_tree::{find_join_tree, is_free_connex, JoinTree};
pub use minor::{find_tetra_pseudo_minor, PseudoMinorOp, PseudoMinorTrace, TraceShape};

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{bail, Result};
use crate::model::{Query, Var};

/// Edge identifier; for the hypergraph of a query it is the atom index.
pub type EdgeId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub id: EdgeId,
    pub vars: BTreeSet<Var>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hypergraph {
    vertices: Vec<Var>,
    edges: Vec<Edge>,
}

impl Hypergraph {
    /// Checks that vertices are distinct, edges are non-empty subsets of the
    /// vertices, and edge ids are distinct.
    pub fn new(vertices: Vec<Var>, edges: Vec<(EdgeId, BTreeSet<Var>)>) -> Result<Self> {
        for (i, v) in vertices.iter().enumerate() {
            if vertices[..i].contains(v) {
                bail!(Usage, "vertex {v} is listed twice");
            }
        }
        let mut ids = BTreeSet::new();
        for (id, vars) in &edges {
            if !ids.insert(*id) {
                bail!(Usage, "edge id {id} is used twice");
            }
            if vars.is_empty() {
                bail!(Usage, "edge {id} is empty");
            }
            if let Some(v) = vars.iter().find(|v| !vertices.contains(v)) {
                bail!(Usage, "edge {id} mentions unknown vertex {v}");
            }
        }
        Ok(Hypergraph { vertices, edges: edges.into_iter().map(|(id, vars)| Edge { id, vars }).collect() })
    }

    /// `H(Q)`: one vertex per variable, one edge per atom (id = atom index).
    pub fn of_query(q: &Query) -> Self {
        Hypergraph {
            vertices: q.vars(),
            edges: q.atoms().iter().enumerate().map(|(i, a)| Edge { id: i, vars: a.var_set() }).collect(),
        }
    }

    /// A graph given by vertex names and edge lists (convenience for tests
    /// and generators).
    pub fn from_lists(vertices: &[&str], edges: &[&[&str]]) -> Result<Self> {
        Hypergraph::new(
            vertices.iter().map(|v| Var::new(v)).collect(),
            edges.iter().enumerate().map(|(i, e)| (i, e.iter().map(|v| Var::new(v)).collect())).collect(),
        )
    }

    pub fn vertices(&self) -> &[Var] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edges.iter().find(|e| e.id == id)
    }

    /// Position of `v` in the vertex order.
    pub fn rank(&self, v: &Var) -> Option<usize> {
        self.vertices.iter().position(|u| u == v)
    }

    pub fn has_vertex(&self, v: &Var) -> bool {
        self.vertices.contains(v)
    }

    /// Distinct vertices sharing an edge.
    pub fn adjacent(&self, u: &Var, v: &Var) -> bool {
        u != v && self.edges.iter().any(|e| e.vars.contains(u) && e.vars.contains(v))
    }

    /// Neighbours of `v`, in vertex order.
    pub fn neighbors(&self, v: &Var) -> Vec<Var> {
        self.vertices.iter().filter(|u| self.adjacent(u, v)).cloned().collect()
    }

    /// Whether some edge contains every vertex of `set`.
    pub fn covered(&self, set: &BTreeSet<Var>) -> bool {
        self.edges.iter().any(|e| set.is_subset(&e.vars))
    }

    /// The same hypergraph plus one edge (ignored when `vars` is empty).
    pub fn with_edge(&self, id: EdgeId, vars: BTreeSet<Var>) -> Result<Self> {
        let mut edges: Vec<(EdgeId, BTreeSet<Var>)> = self.edges.iter().map(|e| (e.id, e.vars.clone())).collect();
        if !vars.is_empty() {
            edges.push((id, vars));
        }
        Hypergraph::new(self.vertices.clone(), edges)
    }

    pub fn is_acyclic(&self) -> bool {
        find_join_tree(self).is_some()
    }

    /// Every clique of the primal graph lies inside an edge.
    pub fn is_conformal(&self) -> bool {
        self.smallest_nonconformal_clique().is_none()
    }

    /// The smallest set of pairwise-adjacent vertices not contained in any
    /// edge (first in vertex order among those of that size).
    pub fn smallest_nonconformal_clique(&self) -> Option<Vec<Var>> {
        for size in 3..=self.vertices.len() {
            let mut found = None;
            self.cliques_of_size(size, &mut Vec::new(), 0, &mut |c| {
                let set: BTreeSet<Var> = c.iter().cloned().collect();
                if !self.covered(&set) {
                    found = Some(c.to_vec());
                    true
                } else {
                    false
                }
            });
            if found.is_some() {
                return found;
            }
        }
        None
    }

    /// Visits cliques of exactly `size` vertices in lexicographic vertex
    /// order; stops when `visit` returns true.
    fn cliques_of_size(
        &self,
        size: usize,
        cur: &mut Vec<Var>,
        from: usize,
        visit: &mut dyn FnMut(&[Var]) -> bool,
    ) -> bool {
        if cur.len() == size {
            return visit(cur);
        }
        for i in from..self.vertices.len() {
            if self.vertices.len() - i < size - cur.len() {
                break;
            }
            let v = &self.vertices[i];
            if cur.iter().all(|u| self.adjacent(u, v)) {
                cur.push(v.clone());
                let stop = self.cliques_of_size(size, cur, i + 1, visit);
                cur.pop();
                if stop {
                    return true;
                }
            }
        }
        false
    }

    /// A chordless cycle of length at least four in the primal graph,
    /// shortest first, starting at its smallest vertex.
    pub fn find_chordless_cycle(&self) -> Option<Vec<Var>> {
        let n = self.vertices.len();
        for len in 4..=n {
            for s in 0..n {
                let mut path = alloc::vec![s];
                if self.extend_induced(&mut path, len) {
                    return Some(path.into_iter().map(|i| self.vertices[i].clone()).collect());
                }
            }
        }
        None
    }

    fn adj_idx(&self, a: usize, b: usize) -> bool {
        self.adjacent(&self.vertices[a], &self.vertices[b])
    }

    /// Extends an induced path starting at `path[0]` (all other vertices of
    /// larger index) to an induced cycle of exactly `len` vertices.
    fn extend_induced(&self, path: &mut Vec<usize>, len: usize) -> bool {
        let s = path[0];
        let last = *path.last().expect("path is non-empty");
        for n in s + 1..self.vertices.len() {
            if path.contains(&n) || !self.adj_idx(last, n) {
                continue;
            }
            // No chord to interior vertices of the path.
            if path.len() > 2 && path[1..path.len() - 1].iter().any(|&p| self.adj_idx(p, n)) {
                continue;
            }
            let closes = path.len() > 1 && self.adj_idx(s, n);
            if path.len() + 1 == len {
                if closes {
                    path.push(n);
                    return true;
                }
                continue;
            }
            if closes {
                continue;
            }
            path.push(n);
            if self.extend_induced(path, len) {
                return true;
            }
            path.pop();
        }
        false
    }

    /// `Some(k)` iff the hypergraph has `k ≥ 3` vertices and its maximal
    /// edges are exactly the `(k−1)`-subsets of the vertices.
    pub fn tetra_order(&self) -> Option<usize> {
        let k = self.vertices.len();
        if k < 3 {
            return None;
        }
        let maximal: BTreeSet<BTreeSet<Var>> = self
            .edges
            .iter()
            .filter(|e| !self.edges.iter().any(|f| f.id != e.id && e.vars.is_subset(&f.vars) && e.vars != f.vars))
            .map(|e| e.vars.clone())
            .collect();
        let all: BTreeSet<Var> = self.vertices.iter().cloned().collect();
        let expected: BTreeSet<BTreeSet<Var>> = self
            .vertices
            .iter()
            .map(|v| {
                let mut s = all.clone();
                s.remove(v);
                s
            })
            .collect();
        (maximal == expected).then_some(k)
    }

    /// Whether some `k` vertices have each of their `(k−1)`-subsets
    /// contained in an edge (brute force).
    pub fn contains_sub_tetra(&self, k: usize) -> Result<bool> {
        if k < 3 {
            bail!(Usage, "Tetra(k) needs k >= 3, got {k}");
        }
        if k > self.vertices.len() {
            return Ok(false);
        }
        // Every pair of a Tetra(k) (k ≥ 3) lies in a (k−1)-subset, so the
        // candidates are cliques of the primal graph.
        Ok(self.cliques_of_size(k, &mut Vec::new(), 0, &mut |c| {
            let set: BTreeSet<Var> = c.iter().cloned().collect();
            c.iter().all(|v| {
                let mut sub = set.clone();
                sub.remove(v);
                self.covered(&sub)
            })
        }))
    }
}

/// `Tetra(k)`: vertices `v1..vk`, one edge per `(k−1)`-subset.
pub fn tetra(k: usize) -> Hypergraph {
    let vertices: Vec<Var> = (1..=k).map(|i| Var::new(&alloc::format!("v{i}"))).collect();
    let edges = (0..k)
        .map(|skip| (skip, vertices.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, v)| v.clone()).collect()))
        .collect();
    Hypergraph::new(vertices, edges).expect("Tetra(k) is well-formed")
}

impl fmt::Display for Hypergraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("V = {")?;
        for (i, v) in self.vertices.iter().enumerate() {
            write!(f, "{}{v}", if i > 0 { ", " } else { "" })?;
        }
        f.write_str("}, E = {")?;
        for (i, e) in self.edges.iter().enumerate() {
            write!(f, "{}e{}: {{", if i > 0 { ", " } else { "" }, e.id)?;
            for (j, v) in e.vars.iter().enumerate() {
                write!(f, "{}{v}", if j > 0 { ", " } else { "" })?;
            }
            f.write_str("}")?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_query;

    fn vs(names: &[&str]) -> BTreeSet<Var> {
        names.iter().map(|n| Var::new(n)).collect()
    }

    #[test]
    fn hypergraph_of_query() {
        let h = Hypergraph::of_query(&parse_query("Q(x,y) :- R1(z,x), R2(z,y)").unwrap());
        assert_eq!(h.vertices(), &[Var::new("z"), Var::new("x"), Var::new("y")]);
        assert_eq!(h.edges()[0].vars, vs(&["z", "x"]));
        assert_eq!(h.edges()[1].vars, vs(&["z", "y"]));
        let h = Hypergraph::of_query(&parse_query("Q() :- R(x)").unwrap());
        assert_eq!(h.edges().len(), 1);
        let h = Hypergraph::of_query(&parse_query("Q(x,y) :- R1(x,z,t1), R2(z,y,t1,t2)").unwrap());
        assert_eq!(h.edges()[0].vars, vs(&["x", "z", "t1"]));
        assert_eq!(h.edges()[1].vars, vs(&["z", "y", "t1", "t2"]));
    }

    #[test]
    fn rejects_malformed() {
        assert!(Hypergraph::from_lists(&["a"], &[&["b"]]).is_err());
        assert!(Hypergraph::from_lists(&["a", "a"], &[]).is_err());
        assert!(Hypergraph::from_lists(&["a"], &[&[]]).is_err());
    }

    #[test]
    fn conformality_and_cycles() {
        let tri = tetra(3);
        assert_eq!(tri.smallest_nonconformal_clique().unwrap().len(), 3);
        assert!(tri.find_chordless_cycle().is_none());
        let square = Hypergraph::from_lists(&["a", "b", "c", "d"], &[&["a", "b"], &["b", "c"], &["c", "d"], &["d", "a"]])
            .unwrap();
        assert!(square.is_conformal());
        assert_eq!(square.find_chordless_cycle().unwrap().len(), 4);
        let chorded = square.with_edge(9, vs(&["a", "c"])).unwrap();
        assert!(chorded.find_chordless_cycle().is_none());
        assert!(!chorded.is_conformal());
    }

    #[test]
    fn tetra_recognition() {
        for k in 3..7 {
            assert_eq!(tetra(k).tetra_order(), Some(k));
            assert!(tetra(k).contains_sub_tetra(k).unwrap());
        }
        let path = Hypergraph::from_lists(&["a", "b", "c"], &[&["a", "b"], &["b", "c"]]).unwrap();
        assert_eq!(path.tetra_order(), None);
        assert!(!path.contains_sub_tetra(3).unwrap());
        assert!(path.contains_sub_tetra(2).is_err());
        // A triangle plus a contained singleton edge still counts.
        let t = tetra(3).with_edge(7, vs(&["v1"])).unwrap();
        assert_eq!(t.tetra_order(), Some(3));
    }

    #[test]
    fn sub_tetra_uses_containment() {
        // One big edge contains every (k−1)-subset of its vertices.
        let h = Hypergraph::from_lists(&["a", "b", "c", "d"], &[&["a", "b", "c", "d"]]).unwrap();
        assert!(h.contains_sub_tetra(3).unwrap());
        assert!(h.contains_sub_tetra(4).unwrap());
        assert!(!tetra(4).contains_sub_tetra(5).unwrap());
    }
}
