//! Exact reductions between a query and its FD-extension.
//!
//! * [`sigma_forward`] turns an instance of `Q` into one of `Q⁺` whose
//!   answers project (via [`tau_forward`]) one-to-one onto the answers of
//!   `Q`. With cardinality dependencies the projection is at most
//!   `C`-to-one, `C` being the product of the bounds of head-extending
//!   dependencies.
//! * [`sigma_backward`] turns an instance of `Q⁺` into one of `Q` plus a
//!   lookup table; [`tau_backward`] rebuilds the `Q⁺` answer from a `Q`
//!   answer with one table probe per head-added variable.
//!
//! Both directions keep one tuple set per atom (its *role*) and write the
//! union of the roles of a relation symbol. Columns holding a fresh variable
//! are filled like the column they mirror — with the implied value when one
//! exists, with ⊥ otherwise — so the extended dependencies hold across roles.
//! With self-joins this does not work for every instance: when the atoms
//! over one relation need tuples that jointly break an extended dependency
//! (forward), or are cleaned differently (backward), the reduction reports
//! `Unsupported` instead of returning an instance with the wrong answers.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use hashbrown::{HashMap, HashSet};

use crate::bind::{project, Layout};
use crate::error::{bail, Result};
use crate::extension::{ExtensionResult, ExtensionStep};
use crate::instance::{validate_dependencies, Instance, Relation, Symbols, Tuple, Value};
use crate::model::{Query, Var};

/// A query answer: a value for every head variable.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Answer(BTreeMap<Var, Value>);

impl Answer {
    pub fn new(binding: BTreeMap<Var, Value>) -> Self {
        Answer(binding)
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Var, Value)>) -> Self {
        Answer(pairs.into_iter().collect())
    }

    pub fn get(&self, v: &Var) -> Option<&Value> {
        self.0.get(v)
    }

    pub fn binding(&self) -> &BTreeMap<Var, Value> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The restriction to `vars` (variables missing from the answer are
    /// skipped).
    pub fn restrict(&self, vars: &[Var]) -> Answer {
        Answer(vars.iter().filter_map(|v| self.0.get(v).map(|x| (v.clone(), x.clone()))).collect())
    }

    /// Values in the order of `head`.
    pub fn values_in(&self, head: &[Var]) -> Vec<Value> {
        head.iter().map(|v| self.0.get(v).cloned().unwrap_or(Value::Bottom)).collect()
    }

    pub fn render(&self, head: &[Var], symbols: &Symbols) -> Vec<String> {
        head.iter().map(|v| self.0.get(v).map(|x| symbols.render(x)).unwrap_or_default()).collect()
    }
}

/// `(lhs variables, lhs values, rhs variable) → value`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LookupTable {
    entries: HashMap<(Vec<Var>, Vec<Value>, Var), Value>,
}

impl LookupTable {
    pub fn get(&self, lhs: &[Var], values: &[Value], rhs: &Var) -> Option<&Value> {
        self.entries.get(&(lhs.to_vec(), values.to_vec(), rhs.clone()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn insert(&mut self, key: (Vec<Var>, Vec<Value>, Var), v: Value) -> Result<()> {
        match self.entries.get(&key) {
            Some(old) if *old != v => bail!(Internal, "lookup table would map one key to two values"),
            Some(_) => Ok(()),
            None => {
                self.entries.insert(key, v);
                Ok(())
            }
        }
    }
}

impl fmt::Display for LookupTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lookup table with {} entries", self.entries.len())
    }
}

/// Tuples of one atom under its current argument list.
#[derive(Clone, Debug)]
struct AtomRel {
    args: Vec<Var>,
    tuples: Vec<Tuple>,
}

impl AtomRel {
    fn layout(&self) -> Layout {
        Layout::of(&self.args)
    }
}

pub(crate) fn require_self_join_free(q: &Query, what: &str) -> Result<()> {
    if !q.is_self_join_free() {
        bail!(Unsupported, "{what} needs a self-join-free query; {q} repeats a relation symbol");
    }
    Ok(())
}

pub(crate) fn describe_violations(i: &Instance, v: &[crate::instance::Violation]) -> String {
    let mut s = String::new();
    for (n, x) in v.iter().enumerate().take(5) {
        if n > 0 {
            s.push_str("; ");
        }
        s.push_str(&x.describe(i.symbols()));
    }
    if v.len() > 5 {
        s.push_str(&alloc::format!("; and {} more", v.len() - 5));
    }
    s
}

/// Keeps the tuples of `rels[k]` that agree with some tuple of `rels[j]`
/// on `vars`. Returns whether anything was removed.
fn semijoin(rels: &mut [AtomRel], k: usize, j: usize, vars: &[Var]) -> bool {
    let (lk, lj) = (rels[k].layout(), rels[j].layout());
    let (Some(pk), Some(pj)) = (lk.positions(vars), lj.positions(vars)) else { return false };
    let keys: HashSet<Vec<Value>> = rels[j].tuples.iter().map(|t| project(t, &pj)).collect();
    let before = rels[k].tuples.len();
    rels[k].tuples.retain(|t| keys.contains(&project(t, &pk)));
    rels[k].tuples.len() != before
}

/// Variable-level reading of every original dependency on its source atom:
/// `(dependency index, source atom, sorted lhs variables, rhs variable)`.
fn original_var_deps(ext: &ExtensionResult) -> Vec<(usize, usize, Vec<Var>, Var)> {
    let q = &ext.original;
    let mut out = Vec::new();
    for (di, d) in ext.original_schema.deps().iter().enumerate() {
        for j in q.atoms_over(&d.relation) {
            if let Ok((lhs, y)) = d.as_variable_map(&q.atoms()[j]) {
                if !lhs.contains(&y) {
                    out.push((di, j, lhs.into_iter().collect(), y));
                }
            }
        }
    }
    out
}

/// For every original dependency `X → y` read on its source atom `j`, and
/// every other atom containing `X ∪ {y}`, drop the tuples that agree with
/// no tuple of `j` on `X ∪ {y}`. Repeats until nothing changes.
fn clean(rels: &mut [AtomRel], deps: &[(usize, usize, Vec<Var>, Var)]) {
    loop {
        let mut changed = false;
        for (_, j, lhs, y) in deps {
            let mut vars = lhs.clone();
            vars.push(y.clone());
            for k in 0..rels.len() {
                if k != *j {
                    let have: BTreeSet<&Var> = rels[k].args.iter().collect();
                    if vars.iter().all(|v| have.contains(v)) {
                        changed |= semijoin(rels, k, *j, &vars);
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
}

fn load_atoms(q: &Query, i: &Instance, args_of: impl Fn(usize) -> Vec<Var>) -> Result<Vec<AtomRel>> {
    let mut rels = Vec::with_capacity(q.atoms().len());
    for (k, a) in q.atoms().iter().enumerate() {
        let args = args_of(k);
        let mut tuples: Vec<Tuple> = match i.relation(&a.relation) {
            Some(r) if r.arity() != args.len() => {
                bail!(Schema, "relation {} has arity {} but atom needs {}", a.relation, r.arity(), args.len())
            }
            Some(r) => r.tuples().to_vec(),
            None => Vec::new(),
        };
        let layout = Layout::of(&args);
        let mut seen: HashSet<Tuple> = HashSet::with_capacity(tuples.len());
        tuples.retain(|t| layout.consistent(t) && seen.insert(t.clone()));
        rels.push(AtomRel { args, tuples });
    }
    Ok(rels)
}

fn to_instance(q: &Query, rels: Vec<AtomRel>, symbols: &Symbols, base: &Instance) -> Result<Instance> {
    let mut out = Instance::with_symbols(symbols.clone());
    for (name, r) in base.relations() {
        if q.atoms_over(name).next().is_none() {
            out.insert_relation(name, r.clone());
        }
    }
    let mut merged: BTreeMap<&str, (usize, Vec<Tuple>)> = BTreeMap::new();
    for (a, r) in q.atoms().iter().zip(rels) {
        let e = merged.entry(&*a.relation).or_insert_with(|| (r.args.len(), Vec::new()));
        e.1.extend(r.tuples);
    }
    for (name, (arity, tuples)) in merged {
        let mut rel = Relation::from_tuples(arity, tuples)?;
        rel.dedup();
        out.insert_relation(name, rel);
    }
    Ok(out)
}

/// Maps an instance of `Q` to an instance of `Q⁺`.
///
/// 1. Tuples that cannot agree with the dependency they must honour in
///    `Q⁺` are removed (see `clean`).
/// 2. The extension steps are replayed: when atom `i` gains `y` through
///    `X → y` read on atom `j`, each tuple of `i` is extended by the
///    `y`-values that `j` associates with its `X`-values (exactly one for an
///    FD, at most `c` for a cardinality dependency, one copy each); tuples
///    with no partner are dropped.
///    Atoms over the same relation that receive a fresh variable instead
///    look up the same positions and take the implied values, or ⊥ when
///    there are none; they never lose tuples this way.
/// 3. The cleaning of step 1 runs again on the extended atoms: an atom that
///    gained `y` through one dependency may contain the variables of
///    another dependency into `y`.
///
/// The output is validated against `Δ_Q⁺`.
pub fn sigma_forward(i: &Instance, ext: &ExtensionResult) -> Result<Instance> {
    let q = &ext.original;
    let violations = validate_dependencies(i, &ext.original_schema);
    if !violations.is_empty() {
        bail!(Precondition, "input violates the dependencies: {}", describe_violations(i, &violations));
    }
    let mut rels = load_atoms(q, i, |k| q.atoms()[k].args.clone())?;
    let deps = original_var_deps(ext);
    clean(&mut rels, &deps);
    for st in &ext.steps {
        let ExtensionStep::Atom { atom, source, lhs, added, fresh, .. } = st else { continue };
        let lhs: Vec<Var> = lhs.iter().cloned().collect();
        let ls = rels[*source].layout();
        let (Some(pl), Some(py)) = (ls.positions(&lhs), ls.pos(added)) else {
            bail!(Internal, "extension step refers to variables missing from atom {source}");
        };
        let mut implied: HashMap<Vec<Value>, Vec<Value>> = HashMap::new();
        for t in &rels[*source].tuples {
            let vals = implied.entry(project(t, &pl)).or_default();
            if !vals.contains(&t[py]) {
                vals.push(t[py].clone());
            }
        }
        let li = rels[*atom].layout();
        let Some(pi) = li.positions(&lhs) else {
            bail!(Internal, "extension step target {atom} lacks the implying variables");
        };
        let old = core::mem::take(&mut rels[*atom].tuples);
        let mut extended = Vec::with_capacity(old.len());
        for t in old {
            if let Some(vals) = implied.get(&project(&t, &pi)) {
                for v in vals {
                    let mut u = t.clone();
                    u.push(v.clone());
                    extended.push(u);
                }
            }
        }
        rels[*atom].tuples = extended;
        rels[*atom].args.push(added.clone());
        for (k, t) in fresh {
            let old = core::mem::take(&mut rels[*k].tuples);
            let mut filled = Vec::with_capacity(old.len());
            for u in old {
                match implied.get(&project(&u, &pi)) {
                    Some(vals) => {
                        for v in vals {
                            let mut w = u.clone();
                            w.push(v.clone());
                            filled.push(w);
                        }
                    }
                    None => {
                        let mut w = u;
                        w.push(Value::Bottom);
                        filled.push(w);
                    }
                }
            }
            rels[*k].tuples = filled;
            rels[*k].args.push(t.clone());
        }
    }
    let final_args: Vec<Vec<Var>> = rels.iter().map(|r| r.args.clone()).collect();
    if final_args.iter().zip(ext.extended.atoms()).any(|(a, b)| *a != b.args) {
        bail!(Internal, "replayed steps do not reproduce the extended query");
    }
    clean(&mut rels, &deps);
    let out = to_instance(&ext.extended, rels, i.symbols(), i)?;
    let bad = validate_dependencies(&out, &ext.schema);
    if !bad.is_empty() {
        let why = describe_violations(&out, &bad);
        if q.is_self_join_free() {
            bail!(Internal, "transformed instance violates the extended dependencies: {why}");
        }
        bail!(Unsupported, "the atoms sharing a relation need tuples that break the extended dependencies: {why}");
    }
    Ok(out)
}

/// Restricts an answer of `Q⁺` to the head of `Q`.
pub fn tau_forward(a: &Answer, ext: &ExtensionResult) -> Answer {
    a.restrict(ext.original.head())
}

/// Maps an instance of `Q⁺` back to an instance of `Q` and builds the
/// lookup table for [`tau_backward`].
///
/// Tuples that disagree with the source of an original dependency on its
/// variables are removed first; then relations are projected to their
/// original positions. Only plain FDs are supported. With self-joins the
/// atoms over one relation must keep the same tuples; otherwise one of
/// them would see tuples its `Q⁺` counterpart rejects, and the reduction
/// reports `Unsupported`.
pub fn sigma_backward(i_plus: &Instance, ext: &ExtensionResult) -> Result<(Instance, LookupTable)> {
    let q = &ext.original;
    if !ext.original_schema.all_fds() {
        bail!(Unsupported, "the backward reduction is defined for functional dependencies only");
    }
    let violations = validate_dependencies(i_plus, &ext.schema);
    if !violations.is_empty() {
        bail!(Precondition, "input violates the extended dependencies: {}", describe_violations(i_plus, &violations));
    }
    let plus = &ext.extended;
    let mut rels = load_atoms(plus, i_plus, |k| plus.atoms()[k].args.clone())?;
    let deps = original_var_deps(ext);
    clean(&mut rels, &deps);

    let mut table = LookupTable::default();
    for st in &ext.steps {
        let ExtensionStep::Head { source, lhs, added, .. } = st else { continue };
        let lhs: Vec<Var> = lhs.iter().cloned().collect();
        let l = rels[*source].layout();
        let (Some(pl), Some(py)) = (l.positions(&lhs), l.pos(added)) else {
            bail!(Internal, "head step refers to variables missing from atom {source}");
        };
        for t in &rels[*source].tuples {
            table.insert((lhs.clone(), project(t, &pl), added.clone()), t[py].clone())?;
        }
    }

    for (r, a) in rels.iter_mut().zip(q.atoms()) {
        let n = a.arity();
        r.args.truncate(n);
        let mut seen: HashSet<Tuple> = HashSet::with_capacity(r.tuples.len());
        r.tuples = core::mem::take(&mut r.tuples)
            .into_iter()
            .map(|mut t| {
                t.truncate(n);
                t
            })
            .filter(|t| seen.insert(t.clone()))
            .collect();
    }
    for (k, a) in q.atoms().iter().enumerate() {
        if let Some(m) = q.atoms_over(&a.relation).find(|&m| m > k) {
            let (x, y): (HashSet<&Tuple>, HashSet<&Tuple>) = (rels[k].tuples.iter().collect(), rels[m].tuples.iter().collect());
            if x != y {
                bail!(
                    Unsupported,
                    "atoms {k} and {m} over {} keep different tuples after cleaning; one relation cannot serve both",
                    a.relation
                );
            }
        }
    }
    let out = to_instance(q, rels, i_plus.symbols(), i_plus)?;
    let bad = validate_dependencies(&out, &ext.original_schema);
    if !bad.is_empty() {
        bail!(Internal, "projected instance violates the dependencies: {}", describe_violations(&out, &bad));
    }
    Ok((out, table))
}

/// Extends an answer of `Q` with the head variables added by the
/// extension, in step order (later lookups may use earlier results).
pub fn tau_backward(a: &Answer, table: &LookupTable, ext: &ExtensionResult) -> Result<Answer> {
    let mut binding = a.binding().clone();
    for (lhs, y, _) in ext.head_additions() {
        let lhs: Vec<Var> = lhs.iter().cloned().collect();
        let Some(vals) = lhs.iter().map(|v| binding.get(v).cloned()).collect::<Option<Vec<Value>>>() else {
            bail!(Internal, "answer lacks a variable implying {y}");
        };
        let Some(v) = table.get(&lhs, &vals, y) else {
            bail!(Internal, "lookup table has no entry for {y}");
        };
        binding.insert(y.clone(), v.clone());
    }
    Ok(Answer(binding))
}
