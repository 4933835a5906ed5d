//! Queries, atoms, dependencies and schemas.
//!
//! Positions are 1-based everywhere a user can see them (text formats,
//! `Display`, error messages); [`Dependency`] stores them 1-based as well so
//! that nothing has to be translated at the boundary.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{bail, Result};

/// Prefix reserved for variables introduced by the FD-extension.
pub const FRESH_PREFIX: &str = "_t";

/// A query variable. Cheap to clone; ordered by name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: &str) -> Self {
        Var(Arc::from(name))
    }

    /// The `k`-th fresh variable `_t<k>`.
    pub fn fresh(k: usize) -> Self {
        Var(Arc::from(alloc::format!("{FRESH_PREFIX}{k}").as_str()))
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    /// Whether the name has the reserved fresh form `_t<digits>`.
    pub fn is_fresh(&self) -> bool {
        is_fresh_name(&self.0)
    }
}

pub(crate) fn is_fresh_name(name: &str) -> bool {
    name.strip_prefix(FRESH_PREFIX)
        .is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Self {
        Var::new(s)
    }
}

/// A relational atom `R(v1, …, vp)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub relation: Arc<str>,
    pub args: Vec<Var>,
}

impl Atom {
    pub fn new(relation: &str, args: &[&str]) -> Self {
        Atom { relation: Arc::from(relation), args: args.iter().map(|a| Var::new(a)).collect() }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    /// The distinct variables of the atom, in order of first occurrence.
    pub fn distinct_vars(&self) -> Vec<Var> {
        let mut out: Vec<Var> = Vec::with_capacity(self.args.len());
        for v in &self.args {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
        out
    }

    pub fn var_set(&self) -> BTreeSet<Var> {
        self.args.iter().cloned().collect()
    }

    pub fn contains(&self, v: &Var) -> bool {
        self.args.contains(v)
    }

    /// 1-based positions holding `v`.
    pub fn positions_of<'a>(&'a self, v: &'a Var) -> impl Iterator<Item = usize> + 'a {
        self.args.iter().enumerate().filter(move |(_, a)| *a == v).map(|(i, _)| i + 1)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        write_list(f, &self.args)?;
        f.write_str(")")
    }
}

fn write_list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T]) -> fmt::Result {
    for (i, v) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{v}")?;
    }
    Ok(())
}

/// A conjunctive query `Q(head) :- atoms`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    name: Arc<str>,
    head: Vec<Var>,
    atoms: Vec<Atom>,
}

impl Query {
    /// Builds a query, checking that it has at least one atom, that the head
    /// has no repeated variable, and that every head variable occurs in some
    /// atom.
    pub fn new(name: &str, head: Vec<Var>, atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            bail!(Schema, "query {name} has no atoms");
        }
        for (i, v) in head.iter().enumerate() {
            if head[..i].contains(v) {
                bail!(Schema, "head variable {v} is repeated");
            }
            if !atoms.iter().any(|a| a.contains(v)) {
                bail!(Schema, "head variable {v} does not occur in any atom");
            }
        }
        for a in &atoms {
            if a.args.is_empty() {
                bail!(Schema, "atom {a} has no arguments");
            }
        }
        Ok(Query { name: Arc::from(name), head, atoms })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn head(&self) -> &[Var] {
        &self.head
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn free(&self) -> BTreeSet<Var> {
        self.head.iter().cloned().collect()
    }

    pub fn is_free(&self, v: &Var) -> bool {
        self.head.contains(v)
    }

    /// All variables, in order of first occurrence in the atoms.
    pub fn vars(&self) -> Vec<Var> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for a in &self.atoms {
            for v in &a.args {
                if seen.insert(v.clone()) {
                    out.push(v.clone());
                }
            }
        }
        out
    }

    /// True iff no relation symbol occurs in two atoms.
    pub fn is_self_join_free(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.atoms.iter().all(|a| seen.insert(a.relation.clone()))
    }

    /// Indices of the atoms over `relation`.
    pub fn atoms_over<'a>(&'a self, relation: &'a str) -> impl Iterator<Item = usize> + 'a {
        self.atoms.iter().enumerate().filter(move |(_, a)| &*a.relation == relation).map(|(i, _)| i)
    }

    /// Relation arities as used by the atoms. Fails if one relation symbol
    /// is used with two different arities.
    pub fn arities(&self) -> Result<BTreeMap<Arc<str>, usize>> {
        let mut out = BTreeMap::new();
        for a in &self.atoms {
            match out.insert(a.relation.clone(), a.arity()) {
                Some(old) if old != a.arity() => {
                    bail!(Schema, "relation {} is used with arities {old} and {}", a.relation, a.arity())
                }
                _ => {}
            }
        }
        Ok(out)
    }

    /// The same query with every variable renamed through `f`.
    pub fn rename(&self, f: impl Fn(&Var) -> Var) -> Query {
        Query {
            name: self.name.clone(),
            head: self.head.iter().map(&f).collect(),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom { relation: a.relation.clone(), args: a.args.iter().map(&f).collect() })
                .collect(),
        }
    }

    /// The same query with a different head (checked like [`Query::new`]).
    pub fn with_head(&self, head: Vec<Var>) -> Result<Query> {
        Query::new(&self.name, head, self.atoms.clone())
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        write_list(f, &self.head)?;
        f.write_str(") :- ")?;
        write_list(f, &self.atoms)?;
        f.write_str(".")
    }
}

/// A dependency `R : A -> b @ c` with 1-based positions. `bound == 1` is a
/// plain functional dependency, larger bounds are cardinality dependencies.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dependency {
    pub relation: Arc<str>,
    pub lhs: BTreeSet<usize>,
    pub rhs: usize,
    pub bound: u32,
}

impl Dependency {
    pub fn fd(relation: &str, lhs: &[usize], rhs: usize) -> Self {
        Dependency::cd(relation, lhs, rhs, 1)
    }

    pub fn cd(relation: &str, lhs: &[usize], rhs: usize, bound: u32) -> Self {
        Dependency { relation: Arc::from(relation), lhs: lhs.iter().copied().collect(), rhs, bound }
    }

    pub fn is_fd(&self) -> bool {
        self.bound == 1
    }

    pub fn is_unary(&self) -> bool {
        self.lhs.len() == 1
    }

    /// Reads the dependency as a mapping between the variables of `atom`:
    /// `({atom[i] : i ∈ lhs}, atom[rhs])`.
    pub fn as_variable_map(&self, atom: &Atom) -> Result<(BTreeSet<Var>, Var)> {
        if atom.relation != self.relation {
            bail!(Usage, "dependency on {} applied to atom {atom}", self.relation);
        }
        let get = |p: usize| -> Result<Var> {
            match atom.args.get(p.wrapping_sub(1)) {
                Some(v) => Ok(v.clone()),
                None => bail!(Schema, "position {p} is out of range for atom {atom}"),
            }
        };
        let lhs = self.lhs.iter().map(|&p| get(p)).collect::<Result<BTreeSet<_>>>()?;
        Ok((lhs, get(self.rhs)?))
    }

    fn check(&self, arities: &BTreeMap<Arc<str>, usize>) -> Result<()> {
        let Some(&arity) = arities.get(&self.relation) else {
            bail!(Schema, "dependency on undeclared relation {}", self.relation);
        };
        if self.lhs.is_empty() {
            bail!(Schema, "dependency {self} has an empty left-hand side");
        }
        if self.bound == 0 {
            bail!(Schema, "dependency {self} has bound 0");
        }
        for &p in self.lhs.iter().chain(core::iter::once(&self.rhs)) {
            if p == 0 || p > arity {
                bail!(Schema, "position {p} is out of range for {} (arity {arity})", self.relation);
            }
        }
        if self.lhs.contains(&self.rhs) {
            bail!(Schema, "dependency {self} is trivial");
        }
        Ok(())
    }
}

impl fmt::Display for Dependency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} : ", self.relation)?;
        let lhs: Vec<usize> = self.lhs.iter().copied().collect();
        write_list(f, &lhs)?;
        write!(f, " -> {}", self.rhs)?;
        if self.bound != 1 {
            write!(f, " @ {}", self.bound)?;
        }
        Ok(())
    }
}

/// A dependency as written, possibly with several right-hand positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawDependency {
    pub relation: Arc<str>,
    pub lhs: BTreeSet<usize>,
    pub rhs: BTreeSet<usize>,
    pub bound: u32,
}

impl RawDependency {
    pub fn new(relation: &str, lhs: &[usize], rhs: &[usize], bound: u32) -> Self {
        RawDependency {
            relation: Arc::from(relation),
            lhs: lhs.iter().copied().collect(),
            rhs: rhs.iter().copied().collect(),
            bound,
        }
    }
}

impl From<&Dependency> for RawDependency {
    fn from(d: &Dependency) -> Self {
        RawDependency {
            relation: d.relation.clone(),
            lhs: d.lhs.clone(),
            rhs: core::iter::once(d.rhs).collect(),
            bound: d.bound,
        }
    }
}

/// Splits `A -> B` into `{A -> b : b ∈ B}`, drops trivial parts (`b ∈ A`)
/// and exact duplicates, and checks positions against `arities`.
pub fn normalize_dependencies(
    raw: &[RawDependency],
    arities: &BTreeMap<Arc<str>, usize>,
) -> Result<Vec<Dependency>> {
    let mut out: Vec<Dependency> = Vec::new();
    for r in raw {
        for &b in &r.rhs {
            let d = Dependency { relation: r.relation.clone(), lhs: r.lhs.clone(), rhs: b, bound: r.bound };
            if r.lhs.contains(&b) {
                // Trivial: dropped, but its positions are still validated so
                // that typos are reported.
                let Some(&arity) = arities.get(&r.relation) else {
                    bail!(Schema, "dependency on undeclared relation {}", r.relation);
                };
                if let Some(p) = r.lhs.iter().find(|&&p| p == 0 || p > arity) {
                    bail!(Schema, "position {p} is out of range for {} (arity {arity})", r.relation);
                }
                continue;
            }
            d.check(arities)?;
            if !out.contains(&d) {
                out.push(d);
            }
        }
        if r.rhs.is_empty() {
            bail!(Schema, "dependency on {} has an empty right-hand side", r.relation);
        }
    }
    Ok(out)
}

/// Relation arities plus a list of single-rhs dependencies.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Schema {
    relations: BTreeMap<Arc<str>, usize>,
    deps: Vec<Dependency>,
}

impl Schema {
    pub fn new(relations: BTreeMap<Arc<str>, usize>, deps: Vec<Dependency>) -> Result<Self> {
        for d in &deps {
            d.check(&relations)?;
        }
        Ok(Schema { relations, deps })
    }

    /// The schema whose relations are exactly those used by `q`, with the
    /// normalized form of `raw` as dependencies.
    pub fn for_query(q: &Query, raw: &[RawDependency]) -> Result<Self> {
        let relations = q.arities()?;
        let deps = normalize_dependencies(raw, &relations)?;
        Ok(Schema { relations, deps })
    }

    pub fn relations(&self) -> &BTreeMap<Arc<str>, usize> {
        &self.relations
    }

    pub fn arity(&self, relation: &str) -> Option<usize> {
        self.relations.get(relation).copied()
    }

    pub fn deps(&self) -> &[Dependency] {
        &self.deps
    }

    /// Dependencies over `relation`.
    pub fn deps_on<'a>(&'a self, relation: &'a str) -> impl Iterator<Item = &'a Dependency> + 'a {
        self.deps.iter().filter(move |d| &*d.relation == relation)
    }

    pub fn all_fds(&self) -> bool {
        self.deps.iter().all(Dependency::is_fd)
    }

    pub fn all_unary(&self) -> bool {
        self.deps.iter().all(Dependency::is_unary)
    }

    /// `Δ^FD`: every bound set to one (duplicates merged).
    pub fn fd_projection(&self) -> Schema {
        let mut deps: Vec<Dependency> = Vec::new();
        for d in &self.deps {
            let fd = Dependency { bound: 1, ..d.clone() };
            if !deps.contains(&fd) {
                deps.push(fd);
            }
        }
        Schema { relations: self.relations.clone(), deps }
    }

    /// Checks that every atom of `q` uses a declared relation with the
    /// declared arity.
    pub fn check_query(&self, q: &Query) -> Result<()> {
        for a in q.atoms() {
            match self.arity(&a.relation) {
                Some(n) if n == a.arity() => {}
                Some(n) => bail!(Schema, "atom {a} has arity {} but {} has arity {n}", a.arity(), a.relation),
                None => bail!(Schema, "atom {a} uses undeclared relation {}", a.relation),
            }
        }
        Ok(())
    }

    /// The dependency file text for this schema (one per line).
    pub fn deps_text(&self) -> String {
        let mut s = String::new();
        for d in &self.deps {
            s.push_str(&d.to_string());
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn arities(pairs: &[(&str, usize)]) -> BTreeMap<Arc<str>, usize> {
        pairs.iter().map(|(r, n)| (Arc::from(*r), *n)).collect()
    }

    #[test]
    fn normalize_splits_and_drops_trivial() {
        let ar = arities(&[("R", 3)]);
        let single = normalize_dependencies(&[RawDependency::new("R", &[2, 3], &[1], 1)], &ar).unwrap();
        assert_eq!(single, vec![Dependency::fd("R", &[2, 3], 1)]);
        let split = normalize_dependencies(&[RawDependency::new("R", &[1], &[2, 3], 1)], &ar).unwrap();
        assert_eq!(split, vec![Dependency::fd("R", &[1], 2), Dependency::fd("R", &[1], 3)]);
        let trivial = normalize_dependencies(&[RawDependency::new("R", &[1, 2], &[2], 1)], &ar).unwrap();
        assert!(trivial.is_empty());
    }

    #[test]
    fn normalize_rejects_bad_positions() {
        let ar = arities(&[("R", 2)]);
        assert!(normalize_dependencies(&[RawDependency::new("R", &[1], &[3], 1)], &ar).is_err());
        assert!(normalize_dependencies(&[RawDependency::new("R", &[0], &[1], 1)], &ar).is_err());
        assert!(normalize_dependencies(&[RawDependency::new("S", &[1], &[2], 1)], &ar).is_err());
        assert!(normalize_dependencies(&[RawDependency::new("R", &[3], &[3], 1)], &ar).is_err());
    }

    #[test]
    fn normalize_is_idempotent() {
        let ar = arities(&[("R", 4)]);
        let raw = [RawDependency::new("R", &[1], &[2, 3, 1], 2), RawDependency::new("R", &[1], &[2], 2)];
        let once = normalize_dependencies(&raw, &ar).unwrap();
        let again: Vec<RawDependency> = once.iter().map(RawDependency::from).collect();
        assert_eq!(normalize_dependencies(&again, &ar).unwrap(), once);
        assert_eq!(once.len(), 2);
    }

    #[test]
    fn variable_map() {
        let d = Dependency::fd("R", &[1], 2);
        let (l, r) = d.as_variable_map(&Atom::new("R", &["z", "y"])).unwrap();
        assert_eq!((l, r), ([Var::new("z")].into_iter().collect(), Var::new("y")));
        let d = Dependency::fd("R", &[2, 3], 1);
        let (l, r) = d.as_variable_map(&Atom::new("R", &["w", "y", "z"])).unwrap();
        assert_eq!(l, ["y", "z"].iter().map(|s| Var::new(s)).collect());
        assert_eq!(r, Var::new("w"));
        let (l, r) = Dependency::fd("R", &[1], 2).as_variable_map(&Atom::new("R", &["x", "x"])).unwrap();
        assert_eq!((l.len(), r), (1, Var::new("x")));
        assert!(d.as_variable_map(&Atom::new("S", &["a", "b", "c"])).is_err());
    }

    #[test]
    fn query_checks() {
        let atoms = vec![Atom::new("R", &["x", "y"])];
        assert!(Query::new("Q", vec![Var::new("z")], atoms.clone()).is_err());
        assert!(Query::new("Q", vec![Var::new("x"), Var::new("x")], atoms.clone()).is_err());
        assert!(Query::new("Q", vec![], vec![]).is_err());
        let q = Query::new("Q", vec![Var::new("x")], atoms).unwrap();
        assert!(q.is_self_join_free());
        let q2 = Query::new("Q", vec![], vec![Atom::new("R", &["x"]), Atom::new("R", &["y"])]).unwrap();
        assert!(!q2.is_self_join_free());
        assert!(Query::new("Q", vec![], vec![Atom::new("R", &["x"]), Atom::new("R", &["x", "y"])])
            .unwrap()
            .arities()
            .is_err());
    }

    #[test]
    fn fresh_names() {
        assert!(Var::fresh(3).is_fresh());
        assert_eq!(Var::fresh(3).name(), "_t3");
        assert!(!Var::new("_t").is_fresh());
        assert!(!Var::new("t1").is_fresh());
    }

    #[test]
    fn display_forms() {
        let q = Query::new("Q", vec![Var::new("x")], vec![Atom::new("R", &["x", "y"])]).unwrap();
        assert_eq!(q.to_string(), "Q(x) :- R(x, y).");
        assert_eq!(Dependency::cd("R", &[2, 1], 3, 5).to_string(), "R : 1, 2 -> 3 @ 5");
        assert_eq!(Dependency::fd("R", &[1], 2).to_string(), "R : 1 -> 2");
    }
}
