//! Values, relations, instances, and dependency validation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt::Write;

use hashbrown::{HashMap, HashSet};

use crate::error::{bail, Result};
use crate::model::{Dependency, Schema};

/// An interned constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sym(u32);

/// A domain value. The derived order puts `⊥` first, then constants in
/// interning order, then pairs lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    /// The distinguished constant `⊥`, never produced by user data.
    Bottom,
    Const(Sym),
    /// A pair of values, used by reductions to encode several values in one.
    Pair(Arc<(Value, Value)>),
}

impl Value {
    pub fn pair(a: Value, b: Value) -> Value {
        Value::Pair(Arc::new((a, b)))
    }
}

/// The symbol table of an instance.
#[derive(Clone, Debug, Default)]
pub struct Symbols {
    names: Vec<Arc<str>>,
    ids: HashMap<Arc<str>, u32>,
}

impl Symbols {
    pub fn intern(&mut self, name: &str) -> Value {
        if let Some(&id) = self.ids.get(name) {
            return Value::Const(Sym(id));
        }
        let id = u32::try_from(self.names.len()).expect("fewer than 2^32 constants");
        let name: Arc<str> = Arc::from(name);
        self.names.push(name.clone());
        self.ids.insert(name, id);
        Value::Const(Sym(id))
    }

    pub fn lookup(&self, name: &str) -> Option<Value> {
        self.ids.get(name).map(|&id| Value::Const(Sym(id)))
    }

    pub fn name(&self, s: Sym) -> &str {
        &self.names[s.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// `⊥`, constant names, and `(a,b)` for pairs.
    pub fn render(&self, v: &Value) -> String {
        let mut s = String::new();
        self.render_into(v, &mut s);
        s
    }

    fn render_into(&self, v: &Value, out: &mut String) {
        match v {
            Value::Bottom => out.push('⊥'),
            Value::Const(c) => out.push_str(self.name(*c)),
            Value::Pair(p) => {
                out.push('(');
                self.render_into(&p.0, out);
                out.push(',');
                self.render_into(&p.1, out);
                out.push(')');
            }
        }
    }

    pub fn render_tuple(&self, t: &[Value]) -> Vec<String> {
        t.iter().map(|v| self.render(v)).collect()
    }
}

pub type Tuple = Vec<Value>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    arity: usize,
    tuples: Vec<Tuple>,
}

impl Relation {
    pub fn new(arity: usize) -> Self {
        Relation { arity, tuples: Vec::new() }
    }

    pub fn from_tuples(arity: usize, tuples: Vec<Tuple>) -> Result<Self> {
        let mut r = Relation::new(arity);
        for t in tuples {
            r.push(t)?;
        }
        Ok(r)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn tuples(&self) -> &[Tuple] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn push(&mut self, t: Tuple) -> Result<()> {
        if t.len() != self.arity {
            bail!(Usage, "tuple of length {} in a relation of arity {}", t.len(), self.arity);
        }
        self.tuples.push(t);
        Ok(())
    }

    /// Removes duplicate tuples, keeping first occurrences; returns how
    /// many were removed.
    pub fn dedup(&mut self) -> usize {
        let before = self.tuples.len();
        let mut seen: HashSet<Tuple> = HashSet::with_capacity(before);
        self.tuples.retain(|t| seen.insert(t.clone()));
        before - self.tuples.len()
    }

    pub fn retain(&mut self, f: impl FnMut(&Tuple) -> bool) {
        self.tuples.retain(f);
    }
}

/// Named relations over one symbol table.
#[derive(Clone, Debug, Default)]
pub struct Instance {
    symbols: Symbols,
    relations: BTreeMap<Arc<str>, Relation>,
}

impl Instance {
    pub fn new() -> Self {
        Instance::default()
    }

    /// An empty instance sharing `symbols` (so values stay meaningful).
    pub fn with_symbols(symbols: Symbols) -> Self {
        Instance { symbols, relations: BTreeMap::new() }
    }

    pub fn symbols_mut(&mut self) -> &mut Symbols {
        &mut self.symbols
    }

    pub fn symbols(&self) -> &Symbols {
        &self.symbols
    }

    pub fn intern(&mut self, name: &str) -> Value {
        self.symbols.intern(name)
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations.get(name)
    }

    pub fn relation_mut(&mut self, name: &str) -> Option<&mut Relation> {
        self.relations.get_mut(name)
    }

    pub fn relations(&self) -> impl Iterator<Item = (&Arc<str>, &Relation)> {
        self.relations.iter()
    }

    pub fn insert_relation(&mut self, name: &str, r: Relation) {
        self.relations.insert(Arc::from(name), r);
    }

    /// Adds a tuple, creating the relation with the tuple's arity if needed.
    pub fn add_tuple(&mut self, name: &str, t: Tuple) -> Result<()> {
        let arity = t.len();
        self.relations.entry(Arc::from(name)).or_insert_with(|| Relation::new(arity)).push(t)
    }

    /// Interns `values` and adds them as a tuple.
    pub fn add_named(&mut self, name: &str, values: &[&str]) -> Result<()> {
        let t = values.iter().map(|v| self.symbols.intern(v)).collect();
        self.add_tuple(name, t)
    }

    /// Adds empty relations for every relation of `s` that is missing and
    /// checks the arities of the present ones.
    pub fn ensure_schema(&mut self, s: &Schema) -> Result<()> {
        for (name, &arity) in s.relations() {
            match self.relations.get(name) {
                Some(r) if r.arity() != arity => {
                    bail!(Schema, "relation {name} has arity {} in the data but {arity} in the query", r.arity())
                }
                Some(_) => {}
                None => {
                    self.relations.insert(name.clone(), Relation::new(arity));
                }
            }
        }
        Ok(())
    }

    /// Removes duplicate tuples everywhere; returns how many were removed.
    pub fn dedup_all(&mut self) -> usize {
        self.relations.values_mut().map(Relation::dedup).sum()
    }

    pub fn total_tuples(&self) -> usize {
        self.relations.values().map(Relation::len).sum()
    }

    /// Relation contents as rendered strings, for comparisons across
    /// instances with different symbol tables.
    pub fn rendered(&self) -> BTreeMap<String, BTreeSet<Vec<String>>> {
        self.relations
            .iter()
            .map(|(n, r)| (String::from(&**n), r.tuples().iter().map(|t| self.symbols.render_tuple(t)).collect()))
            .collect()
    }
}

/// One lhs group breaking a dependency.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// Index into the schema's dependency list.
    pub dep: usize,
    pub dependency: Dependency,
    /// The shared lhs values (in lhs position order).
    pub lhs: Vec<Value>,
    /// The distinct rhs values found (more than the bound allows).
    pub rhs: Vec<Value>,
    /// Indices of the tuples of the group.
    pub tuples: Vec<usize>,
}

impl Violation {
    pub fn describe(&self, symbols: &Symbols) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{}: lhs ({}) has {} distinct values at position {} (bound {}); tuples {:?}",
            self.dependency,
            symbols.render_tuple(&self.lhs).join(", "),
            self.rhs.len(),
            self.dependency.rhs,
            self.dependency.bound,
            self.tuples.iter().map(|i| i + 1).collect::<Vec<_>>()
        );
        s
    }
}

/// Lists every lhs group whose number of distinct rhs values exceeds the
/// dependency's bound. Missing relations count as empty.
pub fn validate_dependencies(i: &Instance, s: &Schema) -> Vec<Violation> {
    let mut out = Vec::new();
    for (di, d) in s.deps().iter().enumerate() {
        let Some(r) = i.relation(&d.relation) else { continue };
        if d.lhs.iter().chain([&d.rhs]).any(|&p| p == 0 || p > r.arity()) {
            continue;
        }
        let mut groups: HashMap<Vec<Value>, (Vec<Value>, Vec<usize>)> = HashMap::new();
        let mut order: Vec<Vec<Value>> = Vec::new();
        for (ti, t) in r.tuples().iter().enumerate() {
            let key: Vec<Value> = d.lhs.iter().map(|&p| t[p - 1].clone()).collect();
            let g = groups.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                (Vec::new(), Vec::new())
            });
            let v = &t[d.rhs - 1];
            if !g.0.contains(v) {
                g.0.push(v.clone());
            }
            g.1.push(ti);
        }
        for key in order {
            let (rhs, tuples) = groups.remove(&key).expect("group was recorded");
            if rhs.len() > d.bound as usize {
                out.push(Violation { dep: di, dependency: d.clone(), lhs: key, rhs, tuples });
            }
        }
    }
    out
}

/// Sorts by the given 1-based positions, then by the remaining positions in
/// increasing order. Stable.
pub fn sort_relation(r: &Relation, positions: &[usize]) -> Result<Relation> {
    if let Some(p) = positions.iter().find(|&&p| p == 0 || p > r.arity()) {
        bail!(Usage, "sort position {p} is out of range for arity {}", r.arity());
    }
    let mut key: Vec<usize> = positions.iter().map(|p| p - 1).collect();
    for p in 0..r.arity() {
        if !key.contains(&p) {
            key.push(p);
        }
    }
    let mut tuples = r.tuples.clone();
    tuples.sort_by(|a, b| key.iter().map(|&k| a[k].cmp(&b[k])).find(|o| o.is_ne()).unwrap_or(core::cmp::Ordering::Equal));
    Ok(Relation { arity: r.arity, tuples })
}
