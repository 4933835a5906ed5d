//! Pseudo-minor operations and the search for `Tetra(k)` pseudo-minors.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use super::{Edge, EdgeId, Hypergraph};
use crate::error::{bail, Result};
use crate::model::Var;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PseudoMinorOp {
    /// Delete a vertex from every edge; edges that become empty disappear.
    RemoveVertex(Var),
    /// Delete `edge`, which must be contained in `container`.
    RemoveEdge { edge: EdgeId, container: EdgeId },
    /// Replace `from` by its neighbour `into` everywhere.
    Contract { from: Var, into: Var },
}

impl fmt::Display for PseudoMinorOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PseudoMinorOp::RemoveVertex(v) => write!(f, "remove vertex {v}"),
            PseudoMinorOp::RemoveEdge { edge, container } => write!(f, "remove edge e{edge} (inside e{container})"),
            PseudoMinorOp::Contract { from, into } => write!(f, "contract {from} into {into}"),
        }
    }
}

/// Which of the two admitted op orders a trace follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceShape {
    /// Vertex removals, then all possible edge removals.
    CliqueRemoval,
    /// Vertex and edge removals down to a chordless cycle, then
    /// contractions and edge removals down to a triangle.
    CycleContraction,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PseudoMinorTrace {
    pub ops: Vec<PseudoMinorOp>,
    pub result: Hypergraph,
    pub k: usize,
    pub shape: TraceShape,
}

impl PseudoMinorTrace {
    /// Replays the trace on `h`, returning every intermediate hypergraph
    /// (the first is `h`, the last equals `result`).
    pub fn replay(&self, h: &Hypergraph) -> Result<Vec<Hypergraph>> {
        let mut states = alloc::vec![h.clone()];
        for op in &self.ops {
            let next = states.last().expect("non-empty").apply(op)?;
            states.push(next);
        }
        if states.last() != Some(&self.result) {
            bail!(Internal, "trace replay does not reach the recorded result");
        }
        Ok(states)
    }
}

impl Hypergraph {
    /// Applies one pseudo-minor operation, checking that it is legal.
    pub fn apply(&self, op: &PseudoMinorOp) -> Result<Hypergraph> {
        match op {
            PseudoMinorOp::RemoveVertex(v) => {
                if !self.has_vertex(v) {
                    bail!(Precondition, "vertex removal: {v} is not a vertex");
                }
                let vertices = self.vertices.iter().filter(|u| *u != v).cloned().collect();
                let edges = self
                    .edges
                    .iter()
                    .filter_map(|e| {
                        let mut vars = e.vars.clone();
                        vars.remove(v);
                        (!vars.is_empty()).then_some(Edge { id: e.id, vars })
                    })
                    .collect();
                Ok(Hypergraph { vertices, edges })
            }
            PseudoMinorOp::RemoveEdge { edge, container } => {
                let (Some(e), Some(f)) = (self.edge(*edge), self.edge(*container)) else {
                    bail!(Precondition, "edge removal: unknown edge id");
                };
                if edge == container || !e.vars.is_subset(&f.vars) {
                    bail!(Precondition, "edge removal: e{edge} is not contained in another edge e{container}");
                }
                let edges = self.edges.iter().filter(|x| x.id != *edge).cloned().collect();
                Ok(Hypergraph { vertices: self.vertices.clone(), edges })
            }
            PseudoMinorOp::Contract { from, into } => {
                if !self.adjacent(from, into) {
                    bail!(Precondition, "edge contraction: {from} and {into} are not neighbours");
                }
                let vertices = self.vertices.iter().filter(|u| *u != from).cloned().collect();
                let edges = self
                    .edges
                    .iter()
                    .map(|e| {
                        let mut vars = e.vars.clone();
                        if vars.remove(from) {
                            vars.insert(into.clone());
                        }
                        Edge { id: e.id, vars }
                    })
                    .collect();
                Ok(Hypergraph { vertices, edges })
            }
        }
    }

    /// The first edge (in edge order) contained in another edge, with the
    /// first such container.
    fn contained_edge(&self) -> Option<(EdgeId, EdgeId)> {
        self.edges.iter().find_map(|e| {
            self.edges.iter().find(|f| f.id != e.id && e.vars.is_subset(&f.vars)).map(|f| (e.id, f.id))
        })
    }
}

fn push(ops: &mut Vec<PseudoMinorOp>, h: &mut Hypergraph, op: PseudoMinorOp) {
    *h = h.apply(&op).expect("search only emits legal operations");
    ops.push(op);
}

fn remove_all_contained(ops: &mut Vec<PseudoMinorOp>, h: &mut Hypergraph) {
    while let Some((edge, container)) = h.contained_edge() {
        push(ops, h, PseudoMinorOp::RemoveEdge { edge, container });
    }
}

/// A `Tetra(k)` pseudo-minor of a cyclic hypergraph (`None` iff acyclic).
///
/// A non-conformal hypergraph yields its smallest non-conformal clique
/// (every other vertex removed, then every contained edge); otherwise a
/// shortest chordless cycle is isolated the same way and contracted,
/// last vertex into its predecessor, until a triangle remains.
pub fn find_tetra_pseudo_minor(h: &Hypergraph) -> Option<PseudoMinorTrace> {
    if h.is_acyclic() {
        return None;
    }
    let (keep, shape) = match h.smallest_nonconformal_clique() {
        Some(c) => (c, TraceShape::CliqueRemoval),
        None => (h.find_chordless_cycle()?, TraceShape::CycleContraction),
    };
    let mut ops = Vec::new();
    let mut cur = h.clone();
    let keep_set: BTreeSet<&Var> = keep.iter().collect();
    for v in h.vertices().iter().filter(|v| !keep_set.contains(v)) {
        push(&mut ops, &mut cur, PseudoMinorOp::RemoveVertex(v.clone()));
    }
    remove_all_contained(&mut ops, &mut cur);
    if shape == TraceShape::CycleContraction {
        let mut cycle = keep;
        while cycle.len() > 3 {
            let from = cycle.pop().expect("cycle has more than three vertices");
            let into = cycle.last().expect("cycle is non-empty").clone();
            push(&mut ops, &mut cur, PseudoMinorOp::Contract { from, into });
            remove_all_contained(&mut ops, &mut cur);
        }
    }
    let k = cur.tetra_order()?;
    Some(PseudoMinorTrace { ops, result: cur, k, shape })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::tetra;
    use crate::parse::parse_query;

    fn vs(names: &[&str]) -> BTreeSet<Var> {
        names.iter().map(|n| Var::new(n)).collect()
    }

    #[test]
    fn single_ops() {
        let h = Hypergraph::from_lists(&["v", "u", "w"], &[&["v", "u"], &["u", "w"]]).unwrap();
        let g = h.apply(&PseudoMinorOp::RemoveVertex(Var::new("v"))).unwrap();
        assert_eq!(g.edges()[0].vars, vs(&["u"]));
        let g2 = g.apply(&PseudoMinorOp::RemoveEdge { edge: 0, container: 1 }).unwrap();
        assert_eq!(g2.edges().len(), 1);
        assert_eq!(g2.edges()[0].vars, vs(&["u", "w"]));
        assert!(h.apply(&PseudoMinorOp::RemoveEdge { edge: 0, container: 1 }).is_err());
        assert!(h.apply(&PseudoMinorOp::Contract { from: Var::new("v"), into: Var::new("w") }).is_err());
        assert!(h.apply(&PseudoMinorOp::RemoveVertex(Var::new("q"))).is_err());
    }

    #[test]
    fn contracting_a_square() {
        let sq = Hypergraph::from_lists(&["a", "b", "c", "d"], &[&["a", "b"], &["b", "c"], &["c", "d"], &["d", "a"]])
            .unwrap();
        let g = sq.apply(&PseudoMinorOp::Contract { from: Var::new("d"), into: Var::new("c") }).unwrap();
        let g = g.apply(&PseudoMinorOp::RemoveEdge { edge: 2, container: 1 }).unwrap();
        assert_eq!(g.tetra_order(), Some(3));
        let t = find_tetra_pseudo_minor(&sq).unwrap();
        assert_eq!(t.k, 3);
        assert_eq!(t.shape, TraceShape::CycleContraction);
        assert_eq!(t.ops.iter().filter(|o| matches!(o, PseudoMinorOp::Contract { .. })).count(), 1);
        t.replay(&sq).unwrap();
    }

    #[test]
    fn tetra_itself_needs_no_ops() {
        for k in 3..6 {
            let t = find_tetra_pseudo_minor(&tetra(k)).unwrap();
            assert!(t.ops.is_empty());
            assert_eq!(t.k, k);
        }
    }

    #[test]
    fn clique_is_preferred_over_cycle() {
        // Four relations; every pair of {x,y,z} is covered but not the triple.
        let q = parse_query("Q() :- R1(x,y,u), R2(x,w,z), R3(y,v,z), R4(u,v,w)").unwrap();
        let h = Hypergraph::of_query(&q);
        let t = find_tetra_pseudo_minor(&h).unwrap();
        assert_eq!(t.shape, TraceShape::CliqueRemoval);
        assert_eq!(t.k, 3);
        assert_eq!(t.result.vertices(), &[Var::new("x"), Var::new("y"), Var::new("z")]);
        t.replay(&h).unwrap();
    }

    #[test]
    fn acyclic_has_none() {
        let h = Hypergraph::of_query(&parse_query("Q(x) :- R(x,y), S(y,z)").unwrap());
        assert!(find_tetra_pseudo_minor(&h).is_none());
    }

    #[test]
    fn long_cycle() {
        let h = Hypergraph::from_lists(
            &["a", "b", "c", "d", "e", "f"],
            &[&["a", "b"], &["b", "c"], &["c", "d"], &["d", "e"], &["e", "f"], &["f", "a"], &["a"]],
        )
        .unwrap();
        let t = find_tetra_pseudo_minor(&h).unwrap();
        assert_eq!(t.k, 3);
        t.replay(&h).unwrap();
    }
}
