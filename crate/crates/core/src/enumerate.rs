//! Answer enumeration.
//!
//! [`oracle_evaluate`] is a plain backtracking join used as ground truth.
//! The constant-delay engine handles FD-free-connex queries:
//!
//! 1. self-joins are split into per-atom relation copies, and the instance
//!    is mapped to the extended query with [`sigma_forward`];
//! 2. a join tree of `H(Q⁺)` drives a full semi-join reduction (bottom-up,
//!    then top-down), after which every tuple takes part in some answer;
//! 3. each relation is projected onto its free variables; those projections
//!    form an acyclic hypergraph whose join tree is walked in preorder, with
//!    every node's tuples grouped by the variables it shares with its
//!    parent;
//! 4. each answer of `Q⁺` is restricted to the head of `Q`.
//!
//! All work proportional to the instance happens while building the plan;
//! moving from one answer to the next touches each tree node at most once.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use hashbrown::{HashMap, HashSet};

use crate::bind::{project, Layout};
use crate::error::{bail, Result};
use crate::extension::{classify, extend_query, Tier};
use crate::hypergraph::{find_join_tree, Hypergraph};
use crate::instance::{Instance, Relation, Tuple, Value};
use crate::model::{Atom, Dependency, Query, Schema, Var};
use crate::transform::{sigma_forward, Answer};

// ---------------------------------------------------------------------------
// Oracle

/// All answers of `q` over `i` by backtracking over the atoms. Relations
/// missing from `i` are empty.
pub fn oracle_evaluate(q: &Query, i: &Instance) -> Result<BTreeSet<Answer>> {
    let mut out = BTreeSet::new();
    Backtrack::new(q, i)?.run(&mut |a| {
        out.insert(a);
    });
    Ok(out)
}

/// Number of answers of `q` over `i` (same engine as [`oracle_evaluate`]).
pub fn oracle_count(q: &Query, i: &Instance) -> Result<usize> {
    Ok(oracle_evaluate(q, i)?.len())
}

struct Step {
    /// Variables bound before this atom, in the order of the index key.
    bound_vars: Vec<usize>,
    /// (position, variable id) of variables this atom binds.
    new_vars: Vec<(usize, usize)>,
    index: HashMap<Vec<Value>, Vec<usize>>,
    tuples: Vec<Tuple>,
}

struct Backtrack {
    steps: Vec<Step>,
    head: Vec<Var>,
    head_ids: Vec<usize>,
    /// First level at which every head variable is bound.
    head_level: usize,
}

impl Backtrack {
    fn new(q: &Query, i: &Instance) -> Result<Self> {
        let vars = q.vars();
        let id = |v: &Var| vars.iter().position(|u| u == v).expect("variable of the query");
        // Greedy order: start with the first atom, then always the atom with
        // the most already-bound variables (ties: query order).
        let n = q.atoms().len();
        let mut order = Vec::with_capacity(n);
        let mut bound: BTreeSet<usize> = BTreeSet::new();
        let mut used = alloc::vec![false; n];
        for _ in 0..n {
            let next = (0..n)
                .filter(|&k| !used[k])
                .max_by_key(|&k| {
                    let shared = q.atoms()[k].distinct_vars().iter().filter(|v| bound.contains(&id(v))).count();
                    (shared, core::cmp::Reverse(k))
                })
                .expect("an unused atom remains");
            used[next] = true;
            order.push(next);
            bound.extend(q.atoms()[next].args.iter().map(&id));
        }
        let mut steps = Vec::with_capacity(n);
        let mut bound: BTreeSet<usize> = BTreeSet::new();
        let head_ids: Vec<usize> = q.head().iter().map(&id).collect();
        let mut head_level = if head_ids.is_empty() { 0 } else { n };
        for (level, &k) in order.iter().enumerate() {
            let a = &q.atoms()[k];
            let layout = Layout::of(&a.args);
            let mut bound_pos = Vec::new();
            let mut bound_vars = Vec::new();
            let mut new_vars = Vec::new();
            for (v, &p) in layout.vars.iter().zip(&layout.first) {
                if bound.contains(&id(v)) {
                    bound_pos.push(p);
                    bound_vars.push(id(v));
                } else {
                    new_vars.push((p, id(v)));
                }
            }
            let tuples: Vec<Tuple> = match i.relation(&a.relation) {
                Some(r) if r.arity() != a.arity() => {
                    bail!(Schema, "relation {} has arity {} but atom {a} needs {}", a.relation, r.arity(), a.arity())
                }
                Some(r) => r.tuples().iter().filter(|t| layout.consistent(t)).cloned().collect(),
                None => Vec::new(),
            };
            let mut index: HashMap<Vec<Value>, Vec<usize>> = HashMap::new();
            for (ti, t) in tuples.iter().enumerate() {
                index.entry(project(t, &bound_pos)).or_default().push(ti);
            }
            bound.extend(new_vars.iter().map(|(_, v)| *v));
            steps.push(Step { bound_vars, new_vars, index, tuples });
            if level + 1 < head_level && head_ids.iter().all(|h| bound.contains(h)) {
                head_level = level + 1;
            }
        }
        Ok(Backtrack { steps, head: q.head().to_vec(), head_ids, head_level, })
    }

    fn run(&self, emit: &mut dyn FnMut(Answer)) {
        let nvars = self.steps.iter().flat_map(|s| s.new_vars.iter().map(|(_, v)| *v + 1)).max().unwrap_or(0);
        let mut binding: Vec<Option<Value>> = alloc::vec![None; nvars];
        let mut seen: HashSet<Vec<Value>> = HashSet::new();
        self.descend(0, &mut binding, &mut seen, emit);
    }

    fn descend(
        &self,
        level: usize,
        binding: &mut Vec<Option<Value>>,
        seen: &mut HashSet<Vec<Value>>,
        emit: &mut dyn FnMut(Answer),
    ) {
        if level == self.head_level {
            let key: Vec<Value> =
                self.head_ids.iter().map(|&h| binding[h].clone().expect("head variables are bound")).collect();
            if seen.contains(&key) || !self.exists(level, binding) {
                return;
            }
            seen.insert(key.clone());
            emit(Answer::from_pairs(self.head.iter().cloned().zip(key)));
            return;
        }
        self.for_each_match(level, binding, &mut |b| {
            self.descend(level + 1, b, seen, emit);
            false
        });
    }

    fn exists(&self, level: usize, binding: &mut Vec<Option<Value>>) -> bool {
        if level == self.steps.len() {
            return true;
        }
        self.for_each_match(level, binding, &mut |b| self.exists(level + 1, b))
    }

    /// Calls `f` for every tuple of the level's atom matching `binding`
    /// (with the new variables bound); stops when `f` returns true.
    fn for_each_match(
        &self,
        level: usize,
        binding: &mut Vec<Option<Value>>,
        f: &mut dyn FnMut(&mut Vec<Option<Value>>) -> bool,
    ) -> bool {
        let st = &self.steps[level];
        let key: Vec<Value> = st.bound_vars.iter().map(|&v| binding[v].clone().expect("bound")).collect();
        let Some(hits) = st.index.get(&key) else { return false };
        for &ti in hits {
            let t = &st.tuples[ti];
            for &(p, v) in &st.new_vars {
                binding[v] = Some(t[p].clone());
            }
            let stop = f(binding);
            for &(_, v) in &st.new_vars {
                binding[v] = None;
            }
            if stop {
                return true;
            }
        }
        false
    }
}

// ---------------------------------------------------------------------------
// Constant-delay engine

struct Node {
    /// Columns of `groups` tuples.
    vars: Vec<Var>,
    /// Slots (indices into the free variables) forming the parent key.
    key_slots: Vec<usize>,
    /// (column, slot) pairs this node writes.
    writes: Vec<(usize, usize)>,
    groups: Vec<Vec<Tuple>>,
    index: HashMap<Vec<Value>, usize>,
}

/// The preprocessed form of an FD-free-connex query over an instance.
pub struct ConnexPlan {
    head: Vec<Var>,
    free: Vec<Var>,
    nodes: Vec<Node>,
    empty: bool,
    symbols: crate::instance::Symbols,
}

/// Copies of relations used by several atoms get the name `R~k` so that
/// every atom has a relation of its own (the parser never produces `~`).
fn split_self_joins(q: &Query, s: &Schema, i: &Instance) -> Result<(Query, Schema, Instance)> {
    if q.is_self_join_free() {
        return Ok((q.clone(), s.clone(), i.clone()));
    }
    let mut atoms = Vec::new();
    let mut relations: BTreeMap<Arc<str>, usize> = BTreeMap::new();
    let mut deps: Vec<Dependency> = Vec::new();
    let mut out = Instance::with_symbols(i.symbols().clone());
    for (k, a) in q.atoms().iter().enumerate() {
        let name: Arc<str> = Arc::from(format!("{}~{k}", a.relation).as_str());
        atoms.push(Atom { relation: name.clone(), args: a.args.clone() });
        relations.insert(name.clone(), a.arity());
        for d in s.deps_on(&a.relation) {
            deps.push(Dependency { relation: name.clone(), ..d.clone() });
        }
        let rel = match i.relation(&a.relation) {
            Some(r) => r.clone(),
            None => Relation::new(a.arity()),
        };
        out.insert_relation(&name, rel);
    }
    Ok((Query::new(q.name(), q.head().to_vec(), atoms)?, Schema::new(relations, deps)?, out))
}

/// Keeps the tuples of `a` whose projection on the shared variables occurs
/// in `b`.
fn reduce(a: &mut (Vec<Var>, Vec<Tuple>), b: &(Vec<Var>, Vec<Tuple>)) {
    let shared: Vec<Var> = a.0.iter().filter(|v| b.0.contains(v)).cloned().collect();
    let pa: Vec<usize> = shared.iter().map(|v| a.0.iter().position(|u| u == v).expect("shared")).collect();
    let pb: Vec<usize> = shared.iter().map(|v| b.0.iter().position(|u| u == v).expect("shared")).collect();
    let keys: HashSet<Vec<Value>> = b.1.iter().map(|t| project(t, &pb)).collect();
    a.1.retain(|t| keys.contains(&project(t, &pa)));
}

impl ConnexPlan {
    /// Builds the plan. Checks the tier and that `i` satisfies `s`;
    /// cardinality dependencies are allowed (answers may then repeat after
    /// projection — see [`enumerate_with_dedup`]).
    pub fn new(q: &Query, s: &Schema, i: &Instance) -> Result<Self> {
        let verdict = classify(q, s)?;
        if verdict.tier != Tier::FdFreeConnex {
            bail!(
                Usage,
                "the constant-delay engine needs an FD-free-connex query, {q} is {}; use the oracle instead",
                verdict.tier
            );
        }
        let mut data = i.clone();
        data.ensure_schema(s)?;
        let (q1, s1, i1) = split_self_joins(q, s, &data)?;
        let ext = extend_query(&q1, &s1)?;
        let plus_inst = sigma_forward(&i1, &ext)?;
        let plus = &ext.extended;
        let free: Vec<Var> = plus.head().to_vec();

        // Distinct-variable columns per atom.
        let mut rels: Vec<(Vec<Var>, Vec<Tuple>)> = plus
            .atoms()
            .iter()
            .map(|a| {
                let l = Layout::of(&a.args);
                let tuples = plus_inst
                    .relation(&a.relation)
                    .map(|r| r.tuples().iter().filter(|t| l.consistent(t)).map(|t| project(t, &l.first)).collect())
                    .unwrap_or_default();
                (l.vars, tuples)
            })
            .collect();

        // Full reduction along a join tree of H(Q⁺).
        let h = Hypergraph::of_query(plus);
        let Some(tree) = find_join_tree(&h) else { bail!(Internal, "FD-free-connex query with cyclic extension") };
        let order = tree.rooted(tree.nodes()[0]);
        for &(n, p) in order.iter().rev() {
            if let Some(p) = p {
                let child = rels[n].clone();
                reduce(&mut rels[p], &child);
            }
        }
        for &(n, p) in &order {
            if let Some(p) = p {
                let parent = rels[p].clone();
                reduce(&mut rels[n], &parent);
            }
        }
        let empty = rels.iter().any(|r| r.1.is_empty());

        // Projections onto the free variables and their join tree.
        let mut nodes = Vec::new();
        if !empty && !free.is_empty() {
            let mut proj: Vec<(Vec<Var>, Vec<Tuple>)> = Vec::new();
            for (vars, tuples) in &rels {
                let keep: Vec<usize> = (0..vars.len()).filter(|&c| free.contains(&vars[c])).collect();
                let pv: Vec<Var> = keep.iter().map(|&c| vars[c].clone()).collect();
                let mut seen: HashSet<Tuple> = HashSet::new();
                let pt: Vec<Tuple> = tuples.iter().map(|t| project(t, &keep)).filter(|t| seen.insert(t.clone())).collect();
                proj.push((pv, pt));
            }
            let edges: Vec<(usize, BTreeSet<Var>)> = proj
                .iter()
                .enumerate()
                .filter(|(_, p)| !p.0.is_empty())
                .map(|(k, p)| (k, p.0.iter().cloned().collect()))
                .collect();
            let hf = Hypergraph::new(free.clone(), edges)?;
            let Some(tf) = find_join_tree(&hf) else { bail!(Internal, "projection onto the head is cyclic") };
            for (n, parent) in tf.rooted(tf.nodes()[0]) {
                let (vars, mut tuples) = core::mem::take(&mut proj[n]);
                tuples.sort();
                let parent_vars: Vec<Var> = parent.map(|p| nodes_vars(&nodes, p)).unwrap_or_default();
                let key_cols: Vec<usize> = (0..vars.len()).filter(|&c| parent_vars.contains(&vars[c])).collect();
                let slot = |v: &Var| free.iter().position(|u| u == v).expect("free variable");
                let key_slots = key_cols.iter().map(|&c| slot(&vars[c])).collect();
                let writes = (0..vars.len()).filter(|c| !key_cols.contains(c)).map(|c| (c, slot(&vars[c]))).collect();
                let mut groups: Vec<Vec<Tuple>> = Vec::new();
                let mut index: HashMap<Vec<Value>, usize> = HashMap::new();
                for t in tuples {
                    let key = project(&t, &key_cols);
                    let g = *index.entry(key).or_insert_with(|| {
                        groups.push(Vec::new());
                        groups.len() - 1
                    });
                    groups[g].push(t);
                }
                nodes.push((n, Node { vars, key_slots, writes, groups, index }));
            }
        }
        let nodes = nodes.into_iter().map(|(_, node)| node).collect();
        Ok(ConnexPlan { head: q.head().to_vec(), free, nodes, empty, symbols: plus_inst.symbols().clone() })
    }

    /// The head of the original query.
    pub fn head(&self) -> &[Var] {
        &self.head
    }

    /// The head of the extended query.
    pub fn extended_head(&self) -> &[Var] {
        &self.free
    }

    pub fn symbols(&self) -> &crate::instance::Symbols {
        &self.symbols
    }

    /// Answers of the extended query, in enumeration order.
    pub fn extended_answers(&self) -> impl Iterator<Item = Answer> + '_ {
        let mut cursor = Cursor::default();
        core::iter::from_fn(move || {
            cursor.advance(self).then(|| Answer::from_pairs(self.free.iter().cloned().zip(cursor.slots.iter().cloned())))
        })
    }
}

fn nodes_vars(nodes: &[(usize, Node)], id: usize) -> Vec<Var> {
    nodes.iter().find(|(n, _)| *n == id).map(|(_, node)| node.vars.clone()).unwrap_or_default()
}

#[derive(Default)]
struct Cursor {
    started: bool,
    done: bool,
    /// (group, position) per node.
    at: Vec<(usize, usize)>,
    slots: Vec<Value>,
}

impl Cursor {
    /// Moves to the next answer; false when exhausted.
    fn advance(&mut self, plan: &ConnexPlan) -> bool {
        if self.done {
            return false;
        }
        if plan.empty {
            self.done = true;
            return false;
        }
        if !self.started {
            self.started = true;
            self.slots = alloc::vec![Value::Bottom; plan.free.len()];
            self.at = alloc::vec![(0, 0); plan.nodes.len()];
            if plan.nodes.is_empty() {
                // Boolean extended query: exactly one (empty) answer.
                self.done = true;
                return true;
            }
            return self.open_from(plan, 0);
        }
        let mut level = plan.nodes.len();
        while level > 0 {
            level -= 1;
            let (g, p) = self.at[level];
            if p + 1 < plan.nodes[level].groups[g].len() {
                self.at[level].1 = p + 1;
                self.write(plan, level);
                return self.open_from(plan, level + 1);
            }
        }
        self.done = true;
        false
    }

    fn write(&mut self, plan: &ConnexPlan, level: usize) {
        let node = &plan.nodes[level];
        let (g, p) = self.at[level];
        let t = &node.groups[g][p];
        for &(c, s) in &node.writes {
            self.slots[s] = t[c].clone();
        }
    }

    /// Positions every node from `level` on at the first tuple of the group
    /// selected by the current slots.
    fn open_from(&mut self, plan: &ConnexPlan, level: usize) -> bool {
        for l in level..plan.nodes.len() {
            let node = &plan.nodes[l];
            let key: Vec<Value> = node.key_slots.iter().map(|&s| self.slots[s].clone()).collect();
            let Some(&g) = node.index.get(&key) else {
                // Cannot happen after full reduction; stop rather than loop.
                debug_assert!(false, "dangling partial answer");
                self.done = true;
                return false;
            };
            self.at[l] = (g, 0);
            self.write(plan, l);
        }
        true
    }
}

/// A pull-based stream of answers of the original query.
pub struct AnswerStream {
    plan: ConnexPlan,
    cursor: Cursor,
    printed: Option<HashSet<Answer>>,
    emitted: usize,
    suppressed: usize,
}

impl AnswerStream {
    fn new(plan: ConnexPlan, dedup: bool) -> Self {
        AnswerStream { plan, cursor: Cursor::default(), printed: dedup.then(HashSet::new), emitted: 0, suppressed: 0 }
    }

    pub fn plan(&self) -> &ConnexPlan {
        &self.plan
    }

    pub fn head(&self) -> &[Var] {
        &self.plan.head
    }

    /// Answers emitted so far.
    pub fn emitted(&self) -> usize {
        self.emitted
    }

    /// Extended answers whose projection had already been emitted.
    pub fn suppressed(&self) -> usize {
        self.suppressed
    }
}

impl Iterator for AnswerStream {
    type Item = Answer;

    fn next(&mut self) -> Option<Answer> {
        loop {
            if !self.cursor.advance(&self.plan) {
                return None;
            }
            let a = Answer::from_pairs(
                self.plan
                    .free
                    .iter()
                    .zip(&self.cursor.slots)
                    .filter(|(v, _)| self.plan.head.contains(v))
                    .map(|(v, x)| (v.clone(), x.clone())),
            );
            if let Some(printed) = &mut self.printed {
                if !printed.insert(a.clone()) {
                    self.suppressed += 1;
                    continue;
                }
            }
            self.emitted += 1;
            return Some(a);
        }
    }
}

/// Constant-delay enumeration for FD-free-connex queries over FD schemas.
pub fn enumerate_free_connex(q: &Query, s: &Schema, i: &Instance) -> Result<AnswerStream> {
    if !s.all_fds() {
        bail!(Usage, "the schema has cardinality dependencies; use enumerate_with_dedup");
    }
    Ok(AnswerStream::new(ConnexPlan::new(q, s, i)?, false))
}

/// Like [`enumerate_free_connex`], for schemas with cardinality
/// dependencies: every answer is remembered and repeats are suppressed
/// (memory linear in the number of answers).
pub fn enumerate_with_dedup(q: &Query, s: &Schema, i: &Instance) -> Result<AnswerStream> {
    Ok(AnswerStream::new(ConnexPlan::new(q, s, i)?, true))
}

/// Renders answers as rows of strings (head order).
pub fn render_answers<'a>(
    answers: impl IntoIterator<Item = &'a Answer>,
    head: &[Var],
    symbols: &crate::instance::Symbols,
) -> Vec<Vec<String>> {
    answers.into_iter().map(|a| a.render(head, symbols)).collect()
}
