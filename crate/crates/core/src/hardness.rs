//! Instance generators for the two lower bounds.
//!
//! * Acyclic but not free-connex: [`compute_reduction_sets`] splits the
//!   variables of `Q⁺` around a head-path, and [`gen_matmul_instance`]
//!   encodes two Boolean matrices so that the answers of `Q⁺` are exactly
//!   the non-zero entries of their product.
//! * Cyclic with unary dependencies: [`gen_tetra_instance`] reverses a
//!   `Tetra(k)` pseudo-minor trace so that `Q⁺` has an answer iff the input
//!   hypergraph contains `Tetra(k)`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use hashbrown::HashSet;

use crate::error::{bail, Error, Result};
use crate::extension::variable_dependencies;
use crate::hypergraph::{
    find_join_tree, is_free_connex, EdgeId, HeadPath, Hypergraph, PseudoMinorOp, PseudoMinorTrace,
};
use crate::instance::{validate_dependencies, Instance, Relation, Tuple, Value};
use crate::model::{Query, Schema, Var};
use crate::transform::{describe_violations, require_self_join_free};

/// Which part of the join tree an atom belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Part {
    Tx,
    Ty,
    Mid,
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Part::Tx => "Tx",
            Part::Ty => "Ty",
            Part::Mid => "Tmid",
        })
    }
}

/// The variable sets behind the matrix-multiplication encoding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionSets {
    pub vx: BTreeSet<Var>,
    pub vy: BTreeSet<Var>,
    pub vz: BTreeSet<Var>,
    /// Atom index of `Q⁺` → part of the join tree.
    pub partition: BTreeMap<EdgeId, Part>,
    pub sep_x: EdgeId,
    pub sep_y: EdgeId,
}

/// `Implies(w)`: every variable on the left of a dependency of `Q⁺` whose
/// right-hand side is `w`.
fn implies_map(q_plus: &Query, delta_plus: &Schema) -> BTreeMap<Var, BTreeSet<Var>> {
    let mut m: BTreeMap<Var, BTreeSet<Var>> = BTreeMap::new();
    for (lhs, rhs, _) in variable_dependencies(q_plus, delta_plus) {
        m.entry(rhs).or_default().extend(lhs);
    }
    m
}

fn close_backwards(
    base: impl IntoIterator<Item = Var>,
    implies: &BTreeMap<Var, BTreeSet<Var>>,
    excluded: &BTreeSet<Var>,
) -> BTreeSet<Var> {
    let mut set: BTreeSet<Var> = base.into_iter().collect();
    let mut todo: Vec<Var> = set.iter().cloned().collect();
    while let Some(w) = todo.pop() {
        for t in implies.get(&w).into_iter().flatten() {
            if !excluded.contains(t) && set.insert(t.clone()) {
                todo.push(t.clone());
            }
        }
    }
    set
}

fn vars_of(q: &Query, atoms: impl IntoIterator<Item = EdgeId>) -> BTreeSet<Var> {
    atoms.into_iter().flat_map(|a| q.atoms()[a].args.iter().cloned()).collect()
}

fn check_reduction_input(q_plus: &Query, hp: &HeadPath) -> Result<()> {
    if !q_plus.is_self_join_free() {
        bail!(Structure, "reduction sets need a self-join-free query");
    }
    if !Hypergraph::of_query(q_plus).is_acyclic() || is_free_connex(q_plus) {
        bail!(Structure, "reduction sets need an acyclic query that is not free-connex");
    }
    hp.check(q_plus).map_err(|e| Error::Structure(format!("invalid head-path {hp}: {e}")))
}

/// Builds `V_x`, `V_y`, `V_z` from a join tree of `H(Q⁺)` and a head-path
/// `(x, z1, …, zk, y)`:
///
/// * `P` is the tree path from an atom containing `{x, z1}` to one
///   containing `{zk, y}`; `sep_x` is the first node of `P` without `x` and
///   `sep_y` the last without `y`;
/// * `T_x` (`T_y`) holds the nodes connected to the first (last) node of
///   `P` without passing through `sep_x` (`sep_y`); `T_mid` is the rest;
/// * `V_x` is `{x}` closed under `Implies`, never taking variables that
///   occur in `T_y ∪ T_mid`; `V_y` symmetrically; `V_z` is `{z1..zk}`
///   closed under `Implies`, never taking head variables of `Q⁺`.
///
/// The result is checked with [`ReductionSets::check`].
pub fn compute_reduction_sets(q_plus: &Query, delta_plus: &Schema, hp: &HeadPath) -> Result<ReductionSets> {
    check_reduction_input(q_plus, hp)?;
    let h = Hypergraph::of_query(q_plus);
    let Some(tree) = find_join_tree(&h) else { bail!(Structure, "query is cyclic") };
    let path = hp.vars();
    let (x, y) = (hp.x().clone(), hp.y().clone());
    let (z1, zk) = (&path[1], &path[path.len() - 2]);
    let with = |a: &Var, b: &Var| -> Vec<EdgeId> {
        (0..q_plus.atoms().len()).filter(|&i| q_plus.atoms()[i].contains(a) && q_plus.atoms()[i].contains(b)).collect()
    };
    // Among the candidate end atoms pick the pair with the shortest path.
    let mut best: Option<Vec<EdgeId>> = None;
    for s in with(&x, z1) {
        for t in with(zk, &y) {
            let p = tree.path(s, t).ok_or_else(|| Error::Internal("join tree is disconnected".into()))?;
            if best.as_ref().is_none_or(|b| p.len() < b.len()) {
                best = Some(p);
            }
        }
    }
    let Some(p) = best else { bail!(Structure, "head-path edges are not covered by atoms") };
    let contains = |n: EdgeId, v: &Var| q_plus.atoms()[n].contains(v);
    let Some(&sep_x) = p.iter().find(|&&n| !contains(n, &x)) else {
        bail!(Internal, "every node of the path contains {x}")
    };
    let Some(&sep_y) = p.iter().rev().find(|&&n| !contains(n, &y)) else {
        bail!(Internal, "every node of the path contains {y}")
    };
    let tx = tree.component_avoiding(p[0], sep_x);
    let ty = tree.component_avoiding(p[p.len() - 1], sep_y);
    if !tx.is_disjoint(&ty) {
        bail!(Internal, "T_x and T_y overlap");
    }
    let mut partition = BTreeMap::new();
    for &n in tree.nodes() {
        let part = if tx.contains(&n) {
            Part::Tx
        } else if ty.contains(&n) {
            Part::Ty
        } else {
            Part::Mid
        };
        partition.insert(n, part);
    }
    let nodes_in = |parts: &[Part]| -> Vec<EdgeId> {
        partition.iter().filter(|(_, p)| parts.contains(p)).map(|(n, _)| *n).collect()
    };
    let implies = implies_map(q_plus, delta_plus);
    let vx = close_backwards([x], &implies, &vars_of(q_plus, nodes_in(&[Part::Ty, Part::Mid])));
    let vy = close_backwards([y], &implies, &vars_of(q_plus, nodes_in(&[Part::Tx, Part::Mid])));
    let vz = close_backwards(hp.interior().iter().cloned(), &implies, &q_plus.free());
    let sets = ReductionSets { vx, vy, vz, partition, sep_x, sep_y };
    sets.check(q_plus, delta_plus, hp).map_err(|e| Error::Internal(format!("constructed sets are invalid: {e}")))?;
    Ok(sets)
}

/// The unary-dependency construction: `V_α` is every variable that
/// iteratively implies `α`, and `V_z` the union over the interior. Only
/// the variable sets are meaningful (the partition is left empty).
pub fn unary_reduction_sets(q_plus: &Query, delta_plus: &Schema, hp: &HeadPath) -> Result<ReductionSets> {
    if !delta_plus.all_unary() {
        bail!(Unsupported, "the iterative construction assumes unary dependencies");
    }
    check_reduction_input(q_plus, hp)?;
    let implies = implies_map(q_plus, delta_plus);
    let none = BTreeSet::new();
    Ok(ReductionSets {
        vx: close_backwards([hp.x().clone()], &implies, &none),
        vy: close_backwards([hp.y().clone()], &implies, &none),
        vz: close_backwards(hp.interior().iter().cloned(), &implies, &none),
        partition: BTreeMap::new(),
        sep_x: 0,
        sep_y: 0,
    })
}

impl ReductionSets {
    /// Checks the four properties the encoding relies on, plus (when a
    /// partition is present) that it covers every atom exactly once:
    ///
    /// 1. `x ∈ V_x`, `y ∈ V_y`, `{z1..zk} ⊆ V_z`;
    /// 2. for `α ∈ {x, y, z}`, every dependency `U → v` of `Q⁺` with
    ///    `v ∈ V_α` has `U ∩ V_α ≠ ∅`;
    /// 3. no atom has variables in both `V_x` and `V_y`;
    /// 4. `V_z` contains no head variable of `Q⁺`.
    pub fn check(&self, q_plus: &Query, delta_plus: &Schema, hp: &HeadPath) -> Result<()> {
        if !self.vx.contains(hp.x()) || !self.vy.contains(hp.y()) {
            bail!(Precondition, "x must be in V_x and y in V_y");
        }
        if let Some(z) = hp.interior().iter().find(|z| !self.vz.contains(z)) {
            bail!(Precondition, "{z} is missing from V_z");
        }
        for (lhs, rhs, _) in variable_dependencies(q_plus, delta_plus) {
            for (name, set) in [("V_x", &self.vx), ("V_y", &self.vy), ("V_z", &self.vz)] {
                if set.contains(&rhs) && lhs.is_disjoint(set) {
                    bail!(Precondition, "{rhs} is in {name} but none of the variables implying it are");
                }
            }
        }
        for a in q_plus.atoms() {
            if a.args.iter().any(|v| self.vx.contains(v)) && a.args.iter().any(|v| self.vy.contains(v)) {
                bail!(Precondition, "atom {a} meets both V_x and V_y");
            }
        }
        if let Some(v) = q_plus.head().iter().find(|v| self.vz.contains(v)) {
            bail!(Precondition, "head variable {v} is in V_z");
        }
        if !self.partition.is_empty() {
            let ids: BTreeSet<EdgeId> = (0..q_plus.atoms().len()).collect();
            if self.partition.keys().copied().collect::<BTreeSet<_>>() != ids {
                bail!(Precondition, "the partition does not cover the atoms exactly");
            }
        }
        Ok(())
    }
}

impl fmt::Display for ReductionSets {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |s: &BTreeSet<Var>| s.iter().map(|v| v.name()).collect::<Vec<_>>().join(", ");
        write!(f, "Vx = {{{}}}, Vy = {{{}}}, Vz = {{{}}}", show(&self.vx), show(&self.vy), show(&self.vz))
    }
}

/// Encodes `A` and `B` (lists of non-zero `(row, column)` entries) into an
/// instance of `Q⁺`: atoms without `V_y` variables get one tuple per entry
/// `(a, c)` of `A`, the others one per entry `(c, b)` of `B`, with each
/// variable `v` set to
///
/// | `f_A`                        | `f_B`                        |
/// |------------------------------|------------------------------|
/// | `a` if `v ∈ V_x \ V_z`       | `c` if `v ∈ V_z \ V_y`       |
/// | `c` if `v ∈ V_z \ V_x`       | `b` if `v ∈ V_y \ V_z`       |
/// | `(a, c)` if `v ∈ V_x ∩ V_z`  | `(c, b)` if `v ∈ V_y ∩ V_z`  |
/// | `⊥` otherwise                | `⊥` otherwise                |
///
/// Row values are named `a<i>`, middle values `c<j>`, column values `b<k>`.
/// The answers `(x, y)` of `Q⁺` are then exactly the pairs `(a<i>, b<k>)`
/// with `(A·B)[i][k] = 1`, one answer each. The output is validated
/// against `Δ_Q⁺`.
pub fn gen_matmul_instance(
    q_plus: &Query,
    delta_plus: &Schema,
    hp: &HeadPath,
    sets: &ReductionSets,
    a: &[(usize, usize)],
    b: &[(usize, usize)],
) -> Result<Instance> {
    require_self_join_free(q_plus, "the matrix encoding")?;
    sets.check(q_plus, delta_plus, hp)?;
    let mut out = Instance::new();
    let row = |i: &mut Instance, p: &str, n: usize| i.intern(&format!("{p}{n}"));
    let pick = |v: &Var, first: &Value, mid: &Value, own: &BTreeSet<Var>, a_side: bool| -> Value {
        let (inside, in_z) = (own.contains(v), sets.vz.contains(v));
        match (inside, in_z) {
            (true, false) => first.clone(),
            (false, true) => mid.clone(),
            (true, true) if a_side => Value::pair(first.clone(), mid.clone()),
            (true, true) => Value::pair(mid.clone(), first.clone()),
            (false, false) => Value::Bottom,
        }
    };
    for atom in q_plus.atoms() {
        let a_side = atom.args.iter().all(|v| !sets.vy.contains(v));
        let mut rel = Relation::new(atom.arity());
        let mut seen: HashSet<Tuple> = HashSet::new();
        let entries = if a_side { a } else { b };
        for &(i, j) in entries {
            let (outer, mid) = if a_side {
                (row(&mut out, "a", i), row(&mut out, "c", j))
            } else {
                (row(&mut out, "b", j), row(&mut out, "c", i))
            };
            let own = if a_side { &sets.vx } else { &sets.vy };
            let t: Tuple = atom.args.iter().map(|v| pick(v, &outer, &mid, own, a_side)).collect();
            if seen.insert(t.clone()) {
                rel.push(t)?;
            }
        }
        out.insert_relation(&atom.relation, rel);
    }
    let bad = validate_dependencies(&out, delta_plus);
    if !bad.is_empty() {
        bail!(Internal, "matrix encoding violates the dependencies: {}", describe_violations(&out, &bad));
    }
    Ok(out)
}

/// Boolean matrix product of sparse entry lists (reference for tests and
/// the command line).
pub fn boolean_product(a: &[(usize, usize)], b: &[(usize, usize)]) -> BTreeSet<(usize, usize)> {
    let mut by_row: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(j, k) in b {
        by_row.entry(j).or_default().push(k);
    }
    let mut out = BTreeSet::new();
    for &(i, j) in a {
        for &k in by_row.get(&j).into_iter().flatten() {
            out.insert((i, k));
        }
    }
    out
}

/// A relation attached to a hypergraph edge: named columns and tuples.
#[derive(Clone, Debug)]
struct EdgeRel {
    cols: Vec<Var>,
    tuples: Vec<Tuple>,
}

impl EdgeRel {
    fn col(&self, v: &Var) -> Result<usize> {
        self.cols.iter().position(|c| c == v).ok_or_else(|| Error::Internal(format!("column {v} missing")))
    }
}

/// Every `size`-subset of `items` (in order).
fn subsets<T: Clone>(items: &[T], size: usize, out: &mut Vec<Vec<T>>) {
    fn go<T: Clone>(items: &[T], size: usize, start: usize, cur: &mut Vec<T>, out: &mut Vec<Vec<T>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < size - cur.len() {
                break;
            }
            cur.push(items[i].clone());
            go(items, size, i + 1, cur, out);
            cur.pop();
        }
    }
    go(items, size, 0, &mut Vec::new(), out);
}

/// Builds an instance of `Q⁺` that has an answer iff `g` contains
/// `Tetra(k)` (every `(k−1)`-subset of some `k` vertices inside an edge),
/// where `k` is the order of the trace's result.
///
/// The last hypergraph of the trace gets, per edge of size `s`, all
/// `s`-subsets of edges of `g`, each written in the vertex order of `g`.
/// The operations are then undone from last to first:
///
/// * edge removal: the removed edge gets the projection of its container;
/// * contraction of `v` into `u`: edges holding both get a copy of `u`'s
///   column as `v`; edges holding only `v` get `u`'s column renamed;
/// * vertex removal of `v`: every edge holding `v` gets a `⊥` column (an
///   edge that had vanished starts from the single empty tuple); then `v`
///   is paired with each variable it transitively implies, and every
///   variable transitively implying `v` is paired with the new `v`.
///
/// The result is validated against `Δ_Q⁺`.
pub fn gen_tetra_instance(
    q_plus: &Query,
    delta_plus: &Schema,
    trace: &PseudoMinorTrace,
    g: &Hypergraph,
) -> Result<Instance> {
    if !delta_plus.all_unary() {
        bail!(Unsupported, "the Tetra(k) encoding requires every dependency to be unary (Δ only contains unary FDs)");
    }
    require_self_join_free(q_plus, "the Tetra(k) encoding")?;
    let states = trace.replay(&Hypergraph::of_query(q_plus))?;
    let last = states.last().expect("replay includes the start");
    let mut out = Instance::new();

    let deps = variable_dependencies(q_plus, delta_plus);
    let reach = |start: &Var, forward: bool| -> BTreeSet<Var> {
        let mut seen = BTreeSet::from([start.clone()]);
        let mut todo = alloc::vec![start.clone()];
        while let Some(w) = todo.pop() {
            for (lhs, rhs, _) in &deps {
                let l = lhs.first().expect("unary");
                let (from, to) = if forward { (l, rhs) } else { (rhs, l) };
                if *from == w && seen.insert(to.clone()) {
                    todo.push(to.clone());
                }
            }
        }
        seen.remove(start);
        seen
    };

    let mut rels: BTreeMap<EdgeId, EdgeRel> = BTreeMap::new();
    let g_rank = |v: &Var| g.rank(v).expect("vertex of g");
    for e in last.edges() {
        let mut cols: Vec<Var> = e.vars.iter().cloned().collect();
        cols.sort_by_key(|v| last.rank(v));
        let mut seen: BTreeSet<Vec<Var>> = BTreeSet::new();
        for ge in g.edges() {
            if ge.vars.len() < cols.len() {
                continue;
            }
            let mut sorted: Vec<Var> = ge.vars.iter().cloned().collect();
            sorted.sort_by_key(g_rank);
            let mut subs = Vec::new();
            subsets(&sorted, cols.len(), &mut subs);
            seen.extend(subs);
        }
        let tuples = seen.into_iter().map(|s| s.iter().map(|v| out.intern(v.name())).collect()).collect();
        rels.insert(e.id, EdgeRel { cols, tuples });
    }

    for (i, op) in trace.ops.iter().enumerate().rev() {
        let h = &states[i];
        match op {
            PseudoMinorOp::RemoveEdge { edge, container } => {
                let src = rels.get(container).ok_or_else(|| Error::Internal("container has no relation".into()))?;
                let e = h.edge(*edge).ok_or_else(|| Error::Internal("removed edge is unknown".into()))?;
                let cols: Vec<Var> = src.cols.iter().filter(|c| e.vars.contains(c)).cloned().collect();
                let pos: Vec<usize> = cols.iter().map(|c| src.col(c)).collect::<Result<_>>()?;
                let mut seen: HashSet<Tuple> = HashSet::new();
                let tuples = src
                    .tuples
                    .iter()
                    .map(|t| pos.iter().map(|&p| t[p].clone()).collect::<Tuple>())
                    .filter(|t| seen.insert(t.clone()))
                    .collect();
                rels.insert(*edge, EdgeRel { cols, tuples });
            }
            PseudoMinorOp::Contract { from, into } => {
                for e in h.edges().iter().filter(|e| e.vars.contains(from)) {
                    let r = rels.get_mut(&e.id).ok_or_else(|| Error::Internal("contracted edge has no relation".into()))?;
                    let pu = r.col(into)?;
                    if e.vars.contains(into) {
                        r.cols.push(from.clone());
                        for t in &mut r.tuples {
                            let v = t[pu].clone();
                            t.push(v);
                        }
                    } else {
                        r.cols[pu] = from.clone();
                    }
                }
            }
            PseudoMinorOp::RemoveVertex(v) => {
                let holding: Vec<EdgeId> = h.edges().iter().filter(|e| e.vars.contains(v)).map(|e| e.id).collect();
                for &id in &holding {
                    let r = rels.entry(id).or_insert_with(|| EdgeRel { cols: Vec::new(), tuples: alloc::vec![Vec::new()] });
                    r.cols.push(v.clone());
                    for t in &mut r.tuples {
                        t.push(Value::Bottom);
                    }
                }
                let mut implied: Vec<Var> = reach(v, true).into_iter().filter(|w| h.has_vertex(w)).collect();
                implied.sort_by_key(|w| h.rank(w));
                for &id in &holding {
                    let r = rels.get_mut(&id).expect("just ensured");
                    let pv = r.col(v)?;
                    for w in &implied {
                        let pw = r.col(w)?;
                        for t in &mut r.tuples {
                            t[pv] = Value::pair(t[pv].clone(), t[pw].clone());
                        }
                    }
                }
                let mut implying: Vec<Var> = reach(v, false).into_iter().filter(|u| h.has_vertex(u)).collect();
                implying.sort_by_key(|u| h.rank(u));
                for u in &implying {
                    for e in h.edges().iter().filter(|e| e.vars.contains(u)) {
                        let r = rels.get_mut(&e.id).ok_or_else(|| Error::Internal("edge has no relation".into()))?;
                        let (pu, pv) = (r.col(u)?, r.col(v)?);
                        for t in &mut r.tuples {
                            t[pu] = Value::pair(t[pu].clone(), t[pv].clone());
                        }
                    }
                }
            }
        }
    }

    for (id, atom) in q_plus.atoms().iter().enumerate() {
        let r = rels.get(&id).ok_or_else(|| Error::Internal(format!("atom {atom} has no relation")))?;
        let pos: Vec<usize> = atom.args.iter().map(|v| r.col(v)).collect::<Result<_>>()?;
        let mut rel = Relation::new(atom.arity());
        for t in &r.tuples {
            rel.push(pos.iter().map(|&p| t[p].clone()).collect())?;
        }
        rel.dedup();
        out.insert_relation(&atom.relation, rel);
    }
    let bad = validate_dependencies(&out, delta_plus);
    if !bad.is_empty() {
        bail!(Internal, "Tetra encoding violates the dependencies: {}", describe_violations(&out, &bad));
    }
    Ok(out)
}

/// Renders a matrix entry list as `i,j` lines (used by manifests).
pub fn render_entries(entries: &[(usize, usize)]) -> String {
    entries.iter().map(|(i, j)| format!("{i},{j}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::oracle_evaluate;
    use crate::extension::{classify, extend_query, Witness};
    use crate::hypergraph::find_tetra_pseudo_minor;
    use crate::parse::{parse_query, parse_schema};

    fn set(names: &[&str]) -> BTreeSet<Var> {
        names.iter().map(|n| Var::new(n)).collect()
    }

    fn setup(q: &str, deps: &str) -> (Query, Schema, HeadPath) {
        let q = parse_query(q).unwrap();
        let s = parse_schema(&q, deps).unwrap();
        let v = classify(&q, &s).unwrap();
        let Witness::HeadPath { path, .. } = v.witness else { panic!("expected a head-path") };
        (v.extension.extended, v.extension.schema, path)
    }

    fn extended_example() -> (Query, Schema, HeadPath) {
        let q = parse_query("Q(x, y, v) :- R(u, x, z), S(v, y, z).").unwrap();
        let s = parse_schema(&q, "R : 1 -> 2\nR : 1 -> 3\nS : 2 -> 1").unwrap();
        let hp = HeadPath::new(["x", "z", "y"].iter().map(|n| Var::new(n)).collect());
        (q, s, hp)
    }

    #[test]
    fn example_sets_and_tuples() {
        let (qp, sp, hp) = extended_example();
        let sets = compute_reduction_sets(&qp, &sp, &hp).unwrap();
        assert_eq!(sets.vx, set(&["x", "u"]));
        assert_eq!(sets.vy, set(&["y"]));
        assert_eq!(sets.vz, set(&["z", "u"]));
        let i = gen_matmul_instance(&qp, &sp, &hp, &sets, &[(1, 1)], &[(1, 1)]).unwrap();
        let r = i.rendered();
        let one = |rows: &[&[&str]]| rows.iter().map(|r| r.iter().map(|s| String::from(*s)).collect()).collect();
        assert_eq!(r["R"], one(&[&["(a1,c1)", "a1", "c1"]]));
        assert_eq!(r["S"], one(&[&["⊥", "b1", "c1"]]));
        assert_eq!(oracle_evaluate(&qp, &i).unwrap().len(), 1);
    }

    #[test]
    fn no_dependencies_gives_bases() {
        let (qp, sp, hp) = setup("Q(x, y) :- R(x, z1), S(z1, z2), T(z2, y).", "");
        let sets = compute_reduction_sets(&qp, &sp, &hp).unwrap();
        assert_eq!(sets.vx, set(&["x"]));
        assert_eq!(sets.vy, set(&["y"]));
        assert_eq!(sets.vz, set(&["z1", "z2"]));
        assert_eq!(sets.partition.values().filter(|p| **p == Part::Mid).count(), 1);
    }

    #[test]
    fn product_matches() {
        let (qp, sp, hp) = extended_example();
        let sets = compute_reduction_sets(&qp, &sp, &hp).unwrap();
        let a = [(1, 2), (2, 1), (3, 3), (1, 3)];
        let b = [(2, 2), (3, 1), (1, 4)];
        let i = gen_matmul_instance(&qp, &sp, &hp, &sets, &a, &b).unwrap();
        let got: BTreeSet<(String, String)> = oracle_evaluate(&qp, &i)
            .unwrap()
            .iter()
            .map(|ans| {
                let r = ans.render(&[hp.x().clone(), hp.y().clone()], i.symbols());
                (r[0].clone(), r[1].clone())
            })
            .collect();
        let want: BTreeSet<(String, String)> =
            boolean_product(&a, &b).into_iter().map(|(i, k)| (format!("a{i}"), format!("b{k}"))).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn invalid_sets_are_rejected() {
        let (qp, sp, hp) = extended_example();
        let mut sets = compute_reduction_sets(&qp, &sp, &hp).unwrap();
        // z ∈ V_z is implied only by u; dropping u from V_z breaks that.
        sets.vz.remove(&Var::new("u"));
        assert!(matches!(gen_matmul_instance(&qp, &sp, &hp, &sets, &[], &[]), Err(Error::Precondition(_))));
        let mut sets = compute_reduction_sets(&qp, &sp, &hp).unwrap();
        sets.vy.insert(Var::new("z"));
        assert!(sets.check(&qp, &sp, &hp).is_err());
    }

    #[test]
    fn triangle_and_path() {
        let q = parse_query("Q() :- R(x, y), S(y, z), T(z, x).").unwrap();
        let s = Schema::for_query(&q, &[]).unwrap();
        let ext = extend_query(&q, &s).unwrap();
        let trace = find_tetra_pseudo_minor(&Hypergraph::of_query(&ext.extended)).unwrap();
        assert_eq!(trace.k, 3);
        assert!(trace.ops.is_empty());
        let tri = Hypergraph::from_lists(&["a", "b", "c"], &[&["a", "b"], &["b", "c"], &["a", "c"]]).unwrap();
        let i = gen_tetra_instance(&ext.extended, &ext.schema, &trace, &tri).unwrap();
        assert_eq!(oracle_evaluate(&ext.extended, &i).unwrap().len(), 1);
        let path = Hypergraph::from_lists(&["a", "b", "c", "d"], &[&["a", "b"], &["b", "c"], &["c", "d"]]).unwrap();
        let i = gen_tetra_instance(&ext.extended, &ext.schema, &trace, &path).unwrap();
        assert!(oracle_evaluate(&ext.extended, &i).unwrap().is_empty());
    }

    #[test]
    fn removal_with_dependencies() {
        let q = parse_query("Q() :- A(x, y), B(y, z), C(z, x), D(x, w).").unwrap();
        let s = parse_schema(&q, "D : 1 -> 2").unwrap();
        let ext = extend_query(&q, &s).unwrap();
        let trace = find_tetra_pseudo_minor(&Hypergraph::of_query(&ext.extended)).unwrap();
        let tri = Hypergraph::from_lists(&["a", "b", "c", "d"], &[&["a", "b"], &["b", "c"], &["a", "c"], &["c", "d"]])
            .unwrap();
        let i = gen_tetra_instance(&ext.extended, &ext.schema, &trace, &tri).unwrap();
        assert!(validate_dependencies(&i, &ext.schema).is_empty());
        assert!(!oracle_evaluate(&ext.extended, &i).unwrap().is_empty());
    }

    #[test]
    fn general_dependencies_unsupported() {
        let q = parse_query("Q() :- R(x, y, w), S(y, z, w), T(z, x, w).").unwrap();
        let s = parse_schema(&q, "R : 1, 2 -> 3").unwrap();
        let ext = extend_query(&q, &s).unwrap();
        let h = Hypergraph::of_query(&ext.extended);
        if let Some(trace) = find_tetra_pseudo_minor(&h) {
            let g = Hypergraph::from_lists(&["a"], &[&["a"]]).unwrap();
            assert!(matches!(gen_tetra_instance(&ext.extended, &ext.schema, &trace, &g), Err(Error::Unsupported(_))));
        }
    }
}
