//! The FD-extension `Q⁺` and the tier classifier built on it.
//!
//! An *atom step* appends the variable `y` implied by some dependency
//! `X → y` (read on an atom over the dependency's relation) to another atom
//! that contains `X` but not `y`; every other atom over the same relation
//! symbol receives a fresh variable so arities stay consistent. A *head
//! step* does the same for the head. Steps run to a fixpoint with
//! dependencies in schema order and atoms in query order. Dependencies keep
//! addressing their original positions, so fresh variables never take part
//! in later steps.
//!
//! For cardinality dependencies the extension runs over `Δ^FD` (bounds
//! ignored) while the derived dependencies of `Q⁺` keep the original bounds.

use alloc::format;
use alloc::string::String;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{bail, Error, Result};
use crate::hypergraph::{
    find_head_path, find_join_tree, find_tetra_pseudo_minor, is_free_connex, HeadPath, Hypergraph, JoinTree,
    PseudoMinorTrace,
};
use crate::model::{Atom, Dependency, Query, Schema, Var};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtensionStep {
    /// Atom `atom` gained `added`, implied by `lhs` through dependency
    /// `dep` read on atom `source`; `fresh` lists the fresh variables given
    /// to the other atoms over the same relation.
    Atom { atom: usize, dep: usize, source: usize, lhs: BTreeSet<Var>, added: Var, fresh: Vec<(usize, Var)> },
    /// The head gained `added`, implied by `lhs`.
    Head { dep: usize, source: usize, lhs: BTreeSet<Var>, added: Var },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtensionResult {
    pub original: Query,
    pub original_schema: Schema,
    /// `Q⁺`.
    pub extended: Query,
    /// Extended arities and `Δ_Q⁺`.
    pub schema: Schema,
    pub steps: Vec<ExtensionStep>,
}

impl ExtensionResult {
    /// Head variables added by head steps, in step order.
    pub fn head_additions(&self) -> impl Iterator<Item = (&BTreeSet<Var>, &Var, usize)> {
        self.steps.iter().filter_map(|s| match s {
            ExtensionStep::Head { lhs, added, dep, .. } => Some((lhs, added, *dep)),
            _ => None,
        })
    }
}

fn var_level(dep: &Dependency, atom: &Atom) -> (BTreeSet<Var>, Var) {
    dep.as_variable_map(atom).expect("schema was checked against the query")
}

/// Computes `Q⁺` and `Δ_Q⁺`.
pub fn extend_query(q: &Query, s: &Schema) -> Result<ExtensionResult> {
    s.check_query(q)?;
    let mut head: Vec<Var> = q.head().to_vec();
    let mut atoms: Vec<Atom> = q.atoms().to_vec();
    let mut used: BTreeSet<Var> = q.vars().into_iter().collect();
    let mut next_fresh = 1usize;
    let mut steps = Vec::new();
    let deps = s.deps();
    loop {
        let mut changed = false;
        for (di, dep) in deps.iter().enumerate() {
            let sources: Vec<usize> = q.atoms_over(&dep.relation).collect();
            for &j in &sources {
                let (lhs, y) = var_level(dep, &atoms[j]);
                if lhs.contains(&y) {
                    continue;
                }
                for i in 0..atoms.len() {
                    let vars = atoms[i].var_set();
                    if !lhs.is_subset(&vars) || vars.contains(&y) {
                        continue;
                    }
                    atoms[i].args.push(y.clone());
                    let mut fresh = Vec::new();
                    for (m, other) in atoms.iter_mut().enumerate() {
                        if m != i && other.relation == atoms_relation(q, i) {
                            let t = loop {
                                let t = Var::fresh(next_fresh);
                                next_fresh += 1;
                                if used.insert(t.clone()) {
                                    break t;
                                }
                            };
                            other.args.push(t.clone());
                            fresh.push((m, t));
                        }
                    }
                    steps.push(ExtensionStep::Atom {
                        atom: i,
                        dep: di,
                        source: j,
                        lhs: lhs.clone(),
                        added: y.clone(),
                        fresh,
                    });
                    changed = true;
                }
                if lhs.iter().all(|v| head.contains(v)) && !head.contains(&y) {
                    head.push(y.clone());
                    steps.push(ExtensionStep::Head { dep: di, source: j, lhs: lhs.clone(), added: y.clone() });
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let extended = Query::new(q.name(), head, atoms)?;
    let schema = extended_schema(q, s, &extended)?;
    Ok(ExtensionResult { original: q.clone(), original_schema: s.clone(), extended, schema, steps })
}

fn atoms_relation(q: &Query, i: usize) -> Arc<str> {
    q.atoms()[i].relation.clone()
}

/// `Δ_Q⁺`: every original dependency, read on every source atom, is placed
/// on each atom of `Q⁺` that contains its variables (lhs positions = all
/// positions holding lhs variables, one dependency per position of the
/// rhs variable). Duplicates keep the smallest bound.
fn extended_schema(q: &Query, s: &Schema, plus: &Query) -> Result<Schema> {
    let mut relations = s.relations().clone();
    for a in plus.atoms() {
        relations.insert(a.relation.clone(), a.arity());
    }
    let mut deps: Vec<Dependency> = Vec::new();
    for dep in s.deps() {
        for j in q.atoms_over(&dep.relation) {
            let (lhs, y) = var_level(dep, &q.atoms()[j]);
            if lhs.contains(&y) {
                continue;
            }
            for a in plus.atoms() {
                let vars = a.var_set();
                if !lhs.is_subset(&vars) || !vars.contains(&y) {
                    continue;
                }
                let c: BTreeSet<usize> = lhs.iter().flat_map(|v| a.positions_of(v)).collect();
                for d in a.positions_of(&y) {
                    let new = Dependency { relation: a.relation.clone(), lhs: c.clone(), rhs: d, bound: dep.bound };
                    match deps.iter_mut().find(|e| e.relation == new.relation && e.lhs == new.lhs && e.rhs == d) {
                        Some(e) => e.bound = e.bound.min(new.bound),
                        None => deps.push(new),
                    }
                }
            }
        }
    }
    Schema::new(relations, deps)
}

/// Re-applies recorded steps to `q` (used to check that a result is
/// reproducible from its steps).
pub fn replay_steps(q: &Query, steps: &[ExtensionStep]) -> Result<Query> {
    let mut head = q.head().to_vec();
    let mut atoms = q.atoms().to_vec();
    for st in steps {
        match st {
            ExtensionStep::Atom { atom, added, fresh, .. } => {
                let Some(a) = atoms.get_mut(*atom) else { bail!(Usage, "step names atom {atom} out of range") };
                a.args.push(added.clone());
                for (m, t) in fresh {
                    let Some(a) = atoms.get_mut(*m) else { bail!(Usage, "step names atom {m} out of range") };
                    a.args.push(t.clone());
                }
            }
            ExtensionStep::Head { added, .. } => head.push(added.clone()),
        }
    }
    Query::new(q.name(), head, atoms)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tier {
    FdFreeConnex,
    FdAcyclicNotFreeConnex,
    FdCyclic,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::FdFreeConnex => "FD-free-connex",
            Tier::FdAcyclicNotFreeConnex => "FD-acyclic, not FD-free-connex",
            Tier::FdCyclic => "FD-cyclic",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DelayClass {
    /// Linear preprocessing, constant delay.
    DelayClin,
    /// Linear preprocessing, linear delay.
    DelayLin,
}

impl fmt::Display for DelayClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DelayClass::DelayClin => "DelayClin",
            DelayClass::DelayLin => "DelayLin",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Assumption {
    /// Boolean `n×n` matrix multiplication is not solvable in `O(n²)`.
    MatMul,
    /// Detecting `Tetra(k)` in a `(k−1)`-uniform hypergraph is not
    /// solvable in linear time.
    Tetra(usize),
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assumption::MatMul => f.write_str("boolean matrix multiplication"),
            Assumption::Tetra(k) => write!(f, "Tetra({k}) detection"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Applicability {
    Full,
    UnaryFdsOnly,
    StructuralOnly,
}

impl fmt::Display for Applicability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Applicability::Full => "full",
            Applicability::UnaryFdsOnly => "unaryFDsOnly",
            Applicability::StructuralOnly => "structuralOnly",
        })
    }
}

/// The query is *not* in `excludes` unless `assumption` fails.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LowerBound {
    pub assumption: Assumption,
    pub excludes: DelayClass,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Complexity {
    pub upper: Option<DelayClass>,
    pub lower: Option<LowerBound>,
    pub applicability: Applicability,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Witness {
    /// Join trees of `H(Q⁺)` and of `H(Q⁺)` plus the head edge (whose id
    /// is the number of atoms); the latter is absent for Boolean queries.
    FreeConnex { join_tree: JoinTree, with_head: Option<JoinTree> },
    HeadPath { path: HeadPath, join_tree: JoinTree },
    PseudoMinor(PseudoMinorTrace),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub tier: Tier,
    pub witness: Witness,
    pub complexity: Complexity,
    pub extension: ExtensionResult,
}

impl Verdict {
    /// One line, e.g. `FD-free-connex; Enum ∈ DelayClin`.
    pub fn summary(&self) -> String {
        let mut out = format!("{}", self.tier);
        if let Some(u) = self.complexity.upper {
            out.push_str(&format!("; Enum ∈ {u}"));
        }
        match self.complexity.lower {
            Some(LowerBound { assumption: Assumption::MatMul, excludes }) => out.push_str(&format!(
                "; Enum ∉ {excludes} unless boolean n×n matrix multiplication is in O(n²)"
            )),
            Some(LowerBound { assumption: Assumption::Tetra(k), excludes }) => out.push_str(&format!(
                "; Enum ∉ {excludes} unless Tetra({k}) detection is in linear time"
            )),
            None if self.tier != Tier::FdFreeConnex => {
                out.push_str(&format!("; no lower bound applies ({})", self.complexity.applicability))
            }
            None => {}
        }
        out
    }
}

/// Classifies a query by the structure of its FD-extension.
pub fn classify(q: &Query, s: &Schema) -> Result<Verdict> {
    let ext = extend_query(q, s)?;
    let plus = &ext.extended;
    let h = Hypergraph::of_query(plus);
    let sjf = q.is_self_join_free();
    let (tier, witness, complexity) = match find_join_tree(&h) {
        Some(join_tree) => {
            if is_free_connex(plus) {
                let free = plus.free();
                let with_head = if free.is_empty() {
                    None
                } else {
                    let g = h.with_edge(plus.atoms().len(), free)?;
                    Some(find_join_tree(&g).ok_or_else(|| internal("free-connex without a head join tree"))?)
                };
                let c = Complexity { upper: Some(DelayClass::DelayClin), lower: None, applicability: Applicability::Full };
                (Tier::FdFreeConnex, Witness::FreeConnex { join_tree, with_head }, c)
            } else {
                let path = find_head_path(plus)?.ok_or_else(|| internal("not free-connex but no head-path"))?;
                let c = if sjf {
                    Complexity {
                        upper: Some(DelayClass::DelayLin),
                        lower: Some(LowerBound { assumption: Assumption::MatMul, excludes: DelayClass::DelayClin }),
                        applicability: Applicability::Full,
                    }
                } else {
                    Complexity {
                        upper: Some(DelayClass::DelayLin),
                        lower: None,
                        applicability: Applicability::StructuralOnly,
                    }
                };
                (Tier::FdAcyclicNotFreeConnex, Witness::HeadPath { path, join_tree }, c)
            }
        }
        None => {
            let trace = find_tetra_pseudo_minor(&h).ok_or_else(|| internal("cyclic without a Tetra pseudo-minor"))?;
            let c = if sjf && s.all_unary() {
                Complexity {
                    upper: None,
                    lower: Some(LowerBound { assumption: Assumption::Tetra(trace.k), excludes: DelayClass::DelayLin }),
                    applicability: Applicability::UnaryFdsOnly,
                }
            } else {
                Complexity { upper: None, lower: None, applicability: Applicability::StructuralOnly }
            };
            (Tier::FdCyclic, Witness::PseudoMinor(trace), c)
        }
    };
    Ok(Verdict { tier, witness, complexity, extension: ext })
}

fn internal(m: &str) -> Error {
    Error::Internal(m.into())
}

/// Which structural properties `Q` and `Q⁺` have.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClosureReport {
    pub acyclic: bool,
    pub extended_acyclic: bool,
    pub free_connex: bool,
    pub extended_free_connex: bool,
}

/// Checks that extension preserves acyclicity and free-connexity.
pub fn check_extension_closure(q: &Query, s: &Schema) -> Result<ClosureReport> {
    let ext = extend_query(q, s)?;
    let r = ClosureReport {
        acyclic: Hypergraph::of_query(q).is_acyclic(),
        extended_acyclic: Hypergraph::of_query(&ext.extended).is_acyclic(),
        free_connex: is_free_connex(q),
        extended_free_connex: is_free_connex(&ext.extended),
    };
    if r.acyclic && !r.extended_acyclic {
        bail!(Internal, "extension of acyclic {q} is cyclic");
    }
    if r.free_connex && !r.extended_free_connex {
        bail!(Internal, "extension of free-connex {q} is not free-connex");
    }
    Ok(r)
}

/// Variable-level dependencies of `Q⁺`: `(lhs variables, rhs variable,
/// bound)` for every dependency of `schema` read on every atom of `q` over
/// its relation, skipping ones whose rhs is among its lhs.
pub fn variable_dependencies(q: &Query, schema: &Schema) -> Vec<(BTreeSet<Var>, Var, u32)> {
    let mut out: Vec<(BTreeSet<Var>, Var, u32)> = Vec::new();
    for dep in schema.deps() {
        for j in q.atoms_over(&dep.relation) {
            if let Ok((lhs, y)) = dep.as_variable_map(&q.atoms()[j]) {
                if !lhs.contains(&y) && !out.iter().any(|(l, r, _)| *l == lhs && *r == y) {
                    out.push((lhs, y, dep.bound));
                }
            }
        }
    }
    out
}

/// Groups dependencies per relation (helper for reporting).
pub fn deps_by_relation(s: &Schema) -> BTreeMap<Arc<str>, Vec<&Dependency>> {
    let mut m: BTreeMap<Arc<str>, Vec<&Dependency>> = BTreeMap::new();
    for d in s.deps() {
        m.entry(d.relation.clone()).or_default().push(d);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_query, parse_schema};
    use alloc::string::ToString;

    fn ext(q: &str, d: &str) -> ExtensionResult {
        let q = parse_query(q).unwrap();
        let s = parse_schema(&q, d).unwrap();
        extend_query(&q, &s).unwrap()
    }

    #[test]
    fn movie_example() {
        let e = ext("Q(a, p) :- Cast(m, a), Release(m, p).", "Release : 1 -> 2");
        assert_eq!(e.extended.to_string(), "Q(a, p) :- Cast(m, a, p), Release(m, p).");
        assert_eq!(e.schema.deps_text(), "Cast : 1 -> 3\nRelease : 1 -> 2\n");
    }

    #[test]
    fn paper_extension_example() {
        let e = ext("Q(x) :- R1(x, y), R2(x, z), R2(u, z), R3(w, y, z).", "R1 : 1 -> 2\nR3 : 2, 3 -> 1");
        assert_eq!(e.extended.to_string(), "Q(x, y) :- R1(x, y), R2(x, z, y, w), R2(u, z, _t1, _t2), R3(w, y, z).");
        let got: BTreeSet<Dependency> = e.schema.deps().iter().cloned().collect();
        let want: BTreeSet<Dependency> = [
            Dependency::fd("R1", &[1], 2),
            Dependency::fd("R2", &[1], 3),
            Dependency::fd("R2", &[2, 3], 4),
            Dependency::fd("R3", &[2, 3], 1),
        ]
        .into_iter()
        .collect();
        assert_eq!(got, want);
        assert_eq!(replay_steps(&e.original, &e.steps).unwrap(), e.extended);
        let again = extend_query(&e.extended, &e.schema).unwrap();
        assert!(again.steps.is_empty());
    }

    #[test]
    fn no_dependencies_no_steps() {
        let e = ext("Q(x) :- R(x, y), S(y, z).", "");
        assert!(e.steps.is_empty());
        assert_eq!(e.extended, e.original);
    }

    #[test]
    fn cd_bounds_are_kept() {
        let e = ext("Q(a) :- Cast(m, a), Release(m, p).", "Release : 1 -> 2 @ 3");
        assert_eq!(e.extended.to_string(), "Q(a) :- Cast(m, a, p), Release(m, p).");
        assert!(e.schema.deps().iter().all(|d| d.bound == 3));
    }

    #[test]
    fn fresh_names_avoid_user_names() {
        let e = ext("Q(x) :- R(x, y), R(u, _t1), S(x, z).", "S : 1 -> 2");
        assert!(e.extended.atoms()[1].args.contains(&Var::new("_t2")));
    }

    #[test]
    fn classification_examples() {
        let q = parse_query("Q(a, p) :- Cast(m, a), Release(m, p).").unwrap();
        let v = classify(&q, &parse_schema(&q, "Release : 1 -> 2").unwrap()).unwrap();
        assert_eq!(v.tier, Tier::FdFreeConnex);
        assert_eq!(v.complexity.upper, Some(DelayClass::DelayClin));

        let q = parse_query("Q(x, y) :- R1(z, x), R2(z, y).").unwrap();
        let v = classify(&q, &Schema::for_query(&q, &[]).unwrap()).unwrap();
        assert_eq!(v.tier, Tier::FdAcyclicNotFreeConnex);
        match &v.witness {
            Witness::HeadPath { path, .. } => assert_eq!(path.to_string(), "(x, z, y)"),
            w => panic!("{w:?}"),
        }
        assert_eq!(v.complexity.lower.unwrap().assumption, Assumption::MatMul);

        let q = parse_query("Q() :- R1(x, y, u), R2(x, w, z), R3(y, v, z), R4(u, v, w).").unwrap();
        let deps = "R1 : 1, 2 -> 3\nR1 : 2, 3 -> 1\nR1 : 3, 1 -> 2\n\
                    R3 : 3, 1 -> 2\nR3 : 1, 2 -> 3\nR3 : 2, 3 -> 1\n\
                    R2 : 1, 3 -> 2\nR2 : 3, 2 -> 1\nR2 : 2, 1 -> 3";
        let s = parse_schema(&q, deps).unwrap();
        let v = classify(&q, &s).unwrap();
        assert_eq!(v.extension.extended, q);
        assert_eq!(v.tier, Tier::FdCyclic);
        assert_eq!(v.complexity.applicability, Applicability::StructuralOnly);
        assert!(v.complexity.lower.is_none());
    }

    #[test]
    fn unary_cyclic_gets_tetra_bound() {
        let q = parse_query("Q() :- A(x, y), B(y, z), C(z, x), D(x, w).").unwrap();
        let v = classify(&q, &parse_schema(&q, "D : 1 -> 2").unwrap()).unwrap();
        assert_eq!(v.extension.extended.to_string(), "Q() :- A(x, y, w), B(y, z), C(z, x, w), D(x, w).");
        assert_eq!(v.tier, Tier::FdCyclic);
        assert_eq!(v.complexity.applicability, Applicability::UnaryFdsOnly);
        assert_eq!(v.complexity.lower.unwrap().assumption, Assumption::Tetra(3));
    }

    #[test]
    fn extension_can_break_cycles() {
        // x → z on A makes A(x, y, z) cover the triangle.
        let q = parse_query("Q() :- A(x, y), B(y, z), C(z, x).").unwrap();
        let s = parse_schema(&q, "C : 2 -> 1\nA : 1 -> 2").unwrap();
        let v = classify(&q, &s).unwrap();
        assert_eq!(v.tier, Tier::FdFreeConnex);
    }

    #[test]
    fn closure_report() {
        let q = parse_query("Q(a, p) :- Cast(m, a), Release(m, p).").unwrap();
        let r = check_extension_closure(&q, &parse_schema(&q, "Release : 1 -> 2").unwrap()).unwrap();
        assert!(!r.free_connex && r.extended_free_connex && r.acyclic && r.extended_acyclic);
    }
}
