//! Head-paths: chordless paths between two free variables through
//! non-free variables. An acyclic query has one iff it is not free-connex.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;
use core::fmt;

use super::Hypergraph;
use crate::error::{bail, Result};
use crate::model::{Query, Var};

/// `(x, z1, …, zk, y)` with `k ≥ 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeadPath(Vec<Var>);

impl HeadPath {
    pub fn new(path: Vec<Var>) -> Self {
        HeadPath(path)
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }

    pub fn x(&self) -> &Var {
        &self.0[0]
    }

    pub fn y(&self) -> &Var {
        &self.0[self.0.len() - 1]
    }

    /// `z1, …, zk`.
    pub fn interior(&self) -> &[Var] {
        &self.0[1..self.0.len() - 1]
    }

    /// Checks every defining property against `q`.
    pub fn check(&self, q: &Query) -> Result<()> {
        let p = &self.0;
        if p.len() < 3 {
            bail!(Structure, "a head-path needs at least three variables");
        }
        for (i, v) in p.iter().enumerate() {
            if p[..i].contains(v) {
                bail!(Structure, "variable {v} repeats on the path");
            }
        }
        if !q.is_free(self.x()) || !q.is_free(self.y()) {
            bail!(Structure, "head-path endpoints must be free");
        }
        if let Some(z) = self.interior().iter().find(|z| q.is_free(z)) {
            bail!(Structure, "interior variable {z} is free");
        }
        let h = Hypergraph::of_query(q);
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                let adj = h.adjacent(&p[i], &p[j]);
                if j == i + 1 && !adj {
                    bail!(Structure, "{} and {} share no atom", p[i], p[j]);
                }
                if j > i + 1 && adj {
                    bail!(Structure, "chord between {} and {}", p[i], p[j]);
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for HeadPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.0.iter().enumerate() {
            write!(f, "{}{v}", if i > 0 { ", " } else { "" })?;
        }
        f.write_str(")")
    }
}

/// Finds a head-path of an acyclic query, or `None` if it is free-connex.
///
/// For every pair of non-adjacent free variables (in vertex order) a
/// breadth-first search runs through non-free variables only. A shortest
/// such path has no chords: a chord would give a shorter path that is
/// still admissible.
pub fn find_head_path(q: &Query) -> Result<Option<HeadPath>> {
    let h = Hypergraph::of_query(q);
    if !h.is_acyclic() {
        bail!(Structure, "head-paths are only defined for acyclic queries");
    }
    let free: Vec<&Var> = h.vertices().iter().filter(|v| q.is_free(v)).collect();
    for (i, x) in free.iter().enumerate() {
        for y in &free[i + 1..] {
            if h.adjacent(x, y) {
                continue;
            }
            if let Some(p) = shortest_through_bound(&h, q, x, y) {
                return Ok(Some(HeadPath(p)));
            }
        }
    }
    Ok(None)
}

fn shortest_through_bound(h: &Hypergraph, q: &Query, x: &Var, y: &Var) -> Option<Vec<Var>> {
    let mut prev: BTreeMap<Var, Var> = BTreeMap::new();
    let mut queue: VecDeque<Var> = VecDeque::new();
    for n in h.neighbors(x) {
        if !q.is_free(&n) {
            prev.insert(n.clone(), x.clone());
            queue.push_back(n);
        }
    }
    while let Some(w) = queue.pop_front() {
        for n in h.neighbors(&w) {
            if &n == y {
                let mut out = alloc::vec![y.clone(), w.clone()];
                let mut cur = w.clone();
                while &prev[&cur] != x {
                    cur = prev[&cur].clone();
                    out.push(cur.clone());
                }
                out.push(x.clone());
                out.reverse();
                return Some(out);
            }
            if !q.is_free(&n) && &n != x && !prev.contains_key(&n) {
                prev.insert(n.clone(), w.clone());
                queue.push_back(n);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::is_free_connex;
    use crate::parse::parse_query;

    fn names(p: &HeadPath) -> Vec<&str> {
        p.vars().iter().map(Var::name).collect()
    }

    #[test]
    fn examples() {
        let q = parse_query("Q(x,y) :- R1(z,x), R2(z,y)").unwrap();
        let p = find_head_path(&q).unwrap().unwrap();
        assert_eq!(names(&p), ["x", "z", "y"]);
        p.check(&q).unwrap();
        let q = parse_query("Q(x,y) :- R1(x,z,t1), R2(z,y,t1,t2)").unwrap();
        assert_eq!(names(&find_head_path(&q).unwrap().unwrap()), ["x", "z", "y"]);
        let q = parse_query("Q(x) :- R(x,y)").unwrap();
        assert!(find_head_path(&q).unwrap().is_none());
        let cyclic = parse_query("Q(x) :- A(x,y), B(y,z), C(z,x)").unwrap();
        assert!(find_head_path(&cyclic).is_err());
    }

    #[test]
    fn longer_path() {
        let q = parse_query("Q(a,e) :- R(a,b), S(b,c), T(c,d), U(d,e)").unwrap();
        let p = find_head_path(&q).unwrap().unwrap();
        assert_eq!(names(&p), ["a", "b", "c", "d", "e"]);
        p.check(&q).unwrap();
        assert!(!is_free_connex(&q));
    }

    #[test]
    fn check_rejects_bad_paths() {
        let q = parse_query("Q(x,y) :- R1(z,x), R2(z,y), R3(x,w)").unwrap();
        let bad = |v: &[&str]| HeadPath::new(v.iter().map(|s| Var::new(s)).collect()).check(&q).is_err();
        assert!(bad(&["x", "y"]));
        assert!(bad(&["x", "w", "y"]));
        assert!(bad(&["z", "x", "y"]));
        assert!(!bad(&["x", "z", "y"]));
    }
}
