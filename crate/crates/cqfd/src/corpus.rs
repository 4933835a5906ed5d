//! Seeded random queries, dependencies, instances, matrices and
//! hypergraphs, plus the fixed query shapes used by the reduction suites.
//!
//! Every generator takes the random source explicitly; [`rng`] builds it
//! from a seed, so a seed determines a corpus completely.

use std::collections::{BTreeSet, HashMap};
use std::ops::RangeInclusive;

use cqfd_core::hypergraph::Hypergraph;
use cqfd_core::instance::{Instance, Relation, Value};
use cqfd_core::model::RawDependency;
use cqfd_core::parse::{parse_query, parse_schema};
use cqfd_core::{Atom, Query, Schema, Var};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Size limits for random (query, schema, instance) triples.
#[derive(Clone, Debug)]
pub struct CorpusConfig {
    pub max_atoms: usize,
    pub max_vars: usize,
    pub max_arity: usize,
    pub domain: usize,
    pub max_tuples: usize,
    /// Chance that an atom reuses an earlier relation of the same arity.
    pub self_join_rate: f64,
    /// Chance that a query is grown as a tree (and so is likely acyclic).
    pub tree_rate: f64,
    /// Dependency bounds are drawn from `1..=max_bound`.
    pub max_bound: u32,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            max_atoms: 6,
            max_vars: 8,
            max_arity: 4,
            domain: 8,
            max_tuples: 200,
            self_join_rate: 0.15,
            tree_rate: 0.7,
            max_bound: 1,
        }
    }
}

impl CorpusConfig {
    /// The default limits with cardinality bounds up to 3.
    pub fn with_bounds() -> Self {
        CorpusConfig { max_bound: 3, ..Default::default() }
    }
}

#[derive(Clone, Debug)]
pub struct Triple {
    pub query: Query,
    pub schema: Schema,
    pub instance: Instance,
}

const VAR_NAMES: [&str; 12] = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l"];

/// A random query. Tree-grown queries attach every new atom to an earlier
/// one through some of its variables; the others draw variables freely.
pub fn random_query(rng: &mut Rng, cfg: &CorpusConfig) -> Query {
    let vars: Vec<Var> = VAR_NAMES[..cfg.max_vars.min(VAR_NAMES.len())].iter().map(|n| Var::new(n)).collect();
    let n_atoms = rng.random_range(1..=cfg.max_atoms);
    let tree = rng.random_bool(cfg.tree_rate);
    let mut used: Vec<Var> = Vec::new();
    let mut atoms: Vec<Atom> = Vec::new();
    let mut relations: Vec<(String, usize)> = Vec::new();
    for k in 0..n_atoms {
        let mut arity = rng.random_range(1..=cfg.max_arity);
        let mut relation = format!("R{}", k + 1);
        if k > 0 && rng.random_bool(cfg.self_join_rate) {
            let (name, ar) = relations.choose(rng).expect("non-empty").clone();
            relation = name;
            arity = ar;
        } else {
            relations.push((relation.clone(), arity));
        }
        let mut args: Vec<Var> = Vec::with_capacity(arity);
        if tree && k > 0 {
            let parent = atoms.choose(rng).expect("non-empty");
            let mut pv: Vec<Var> = parent.distinct_vars();
            pv.shuffle(rng);
            let shared = rng.random_range(1..=pv.len().min(arity));
            args.extend(pv.into_iter().take(shared));
        }
        while args.len() < arity {
            let fresh: Vec<&Var> = vars.iter().filter(|v| !used.contains(v) && !args.contains(v)).collect();
            let v = if tree && !fresh.is_empty() && rng.random_bool(0.8) {
                (*fresh.choose(rng).expect("non-empty")).clone()
            } else if !tree && rng.random_bool(0.1) && !args.is_empty() {
                args.choose(rng).expect("non-empty").clone()
            } else {
                vars.choose(rng).expect("non-empty").clone()
            };
            args.push(v);
        }
        args.shuffle(rng);
        for v in &args {
            if !used.contains(v) {
                used.push(v.clone());
            }
        }
        atoms.push(Atom { relation: relation.as_str().into(), args });
    }
    let mut head: Vec<Var> = used.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
    head.shuffle(rng);
    Query::new("Q", head, atoms).expect("generated queries are well-formed")
}

/// Up to two random dependencies per relation, each with one or two
/// positions on the left and bounds from `1..=cfg.max_bound`.
pub fn random_schema(rng: &mut Rng, q: &Query, cfg: &CorpusConfig) -> Schema {
    let arities = q.arities().expect("generated queries have consistent arities");
    let mut raw = Vec::new();
    for (rel, &arity) in &arities {
        if arity < 2 {
            continue;
        }
        for _ in 0..rng.random_range(0..=2) {
            let mut pos: Vec<usize> = (1..=arity).collect();
            pos.shuffle(rng);
            let lhs_len = rng.random_range(1..=(arity - 1).min(2));
            let lhs: Vec<usize> = pos[..lhs_len].to_vec();
            let rhs = pos[lhs_len];
            let bound = rng.random_range(1..=cfg.max_bound);
            raw.push(RawDependency::new(rel, &lhs, &[rhs], bound));
        }
    }
    Schema::for_query(q, &raw).expect("generated dependencies are well-formed")
}

fn domain_value(inst: &mut Instance, i: usize) -> Value {
    inst.intern(&format!("d{i}"))
}

/// Random tuples over `d0..d<domain-1>`; a tuple is kept only if the
/// relation still satisfies its dependencies afterwards, so the result
/// always satisfies `s`. Each relation receives a number of candidate
/// tuples drawn from `per_relation`.
pub fn random_instance(
    rng: &mut Rng,
    q: &Query,
    s: &Schema,
    domain: usize,
    per_relation: RangeInclusive<usize>,
) -> Instance {
    let mut inst = Instance::new();
    let domain = domain.max(1);
    let values: Vec<Value> = (0..domain).map(|i| domain_value(&mut inst, i)).collect();
    for (rel, &arity) in s.relations() {
        if !q.atoms().iter().any(|a| a.relation == *rel) {
            continue;
        }
        let deps: Vec<&cqfd_core::Dependency> = s.deps_on(rel).collect();
        let mut groups: Vec<HashMap<Vec<Value>, BTreeSet<Value>>> = vec![HashMap::new(); deps.len()];
        let mut seen: BTreeSet<Vec<Value>> = BTreeSet::new();
        let mut r = Relation::new(arity);
        let target = rng.random_range(per_relation.clone());
        for _ in 0..target {
            let t: Vec<Value> = (0..arity).map(|_| values.choose(rng).expect("non-empty").clone()).collect();
            if seen.contains(&t) {
                continue;
            }
            let ok = deps.iter().zip(&groups).all(|(d, g)| {
                let key: Vec<Value> = d.lhs.iter().map(|&p| t[p - 1].clone()).collect();
                match g.get(&key) {
                    Some(set) => set.contains(&t[d.rhs - 1]) || set.len() < d.bound as usize,
                    None => true,
                }
            });
            if !ok {
                continue;
            }
            for (d, g) in deps.iter().zip(groups.iter_mut()) {
                let key: Vec<Value> = d.lhs.iter().map(|&p| t[p - 1].clone()).collect();
                g.entry(key).or_default().insert(t[d.rhs - 1].clone());
            }
            seen.insert(t.clone());
            r.push(t).expect("arity matches");
        }
        inst.insert_relation(rel, r);
    }
    inst
}

/// A full random triple within `cfg`.
pub fn random_triple(rng: &mut Rng, cfg: &CorpusConfig) -> Triple {
    let query = random_query(rng, cfg);
    let schema = random_schema(rng, &query, cfg);
    let n_rel = schema.relations().len().max(1);
    let per = cfg.max_tuples / n_rel;
    let instance = random_instance(rng, &query, &schema, cfg.domain, 0..=per);
    Triple { query, schema, instance }
}

/// `count` triples from one seed.
pub fn corpus(seed: u64, count: usize, cfg: &CorpusConfig) -> Vec<Triple> {
    let mut rng = rng(seed);
    (0..count).map(|_| random_triple(&mut rng, cfg)).collect()
}

/// Non-zero entries `(row, column)` of a random `n×n` Boolean matrix,
/// 1-based, in row-major order.
pub fn random_matrix(rng: &mut Rng, n: usize, density: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 1..=n {
        for j in 1..=n {
            if rng.random_bool(density) {
                out.push((i, j));
            }
        }
    }
    out
}

/// A random hypergraph on `n` vertices `g1..gn`: every pair is an edge with
/// probability `p2`, every triple with probability `p3`.
pub fn random_hypergraph(rng: &mut Rng, n: usize, p2: f64, p3: f64) -> Hypergraph {
    let names: Vec<String> = (1..=n).map(|i| format!("g{i}")).collect();
    let mut edges: Vec<Vec<&str>> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p2) {
                edges.push(vec![&names[i], &names[j]]);
            }
            for k in j + 1..n {
                if rng.random_bool(p3) {
                    edges.push(vec![&names[i], &names[j], &names[k]]);
                }
            }
        }
    }
    let vs: Vec<&str> = names.iter().map(String::as_str).collect();
    let es: Vec<&[&str]> = edges.iter().map(Vec::as_slice).collect();
    Hypergraph::from_lists(&vs, &es).expect("generated hypergraphs are well-formed")
}

/// A query/dependency pair given as text.
#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub query: &'static str,
    pub deps: &'static str,
}

impl Shape {
    pub fn parse(&self) -> (Query, Schema) {
        let q = parse_query(self.query).expect("shape query parses");
        let s = parse_schema(&q, self.deps).expect("shape dependencies parse");
        (q, s)
    }
}

/// Ten self-join-free shapes that are acyclic but not free-connex after
/// extension.
pub const MATMUL_SHAPES: [Shape; 10] = [
    Shape { query: "Q(x, y) :- R(x, z), S(z, y).", deps: "" },
    Shape { query: "Q(x, y) :- R(x, z1), S(z1, z2), T(z2, y).", deps: "" },
    Shape { query: "Q(x, y, v) :- R(u, x, z), S(v, y, z).", deps: "R : 1 -> 2\nR : 1 -> 3\nS : 2 -> 1" },
    Shape { query: "Q(x, y) :- R(u, x, z), S(u, y, z).", deps: "R : 2 -> 1\nS : 3 -> 1" },
    Shape { query: "Q(a, s) :- Cast(m, a), Release(m, p), Studio(p, s).", deps: "Studio : 1 -> 2" },
    Shape { query: "Q(x, y, w) :- R(x, z), S(z, y), T(y, w).", deps: "T : 1 -> 2" },
    Shape { query: "Q(x, y) :- R(x, z, v), S(z, y), V(v, t).", deps: "V : 1 -> 2" },
    Shape { query: "Q(x, y) :- R(x, z), S(z, y), U(z, w).", deps: "U : 1 -> 2" },
    Shape { query: "Q(x, y) :- R(x, z1, z2), S(z2, z3), T(z3, y).", deps: "R : 2 -> 3" },
    Shape { query: "Q(x, y) :- R(x, z), S(z, y), K(x, k).", deps: "K : 1 -> 2" },
];

/// Self-join-free shapes with unary dependencies that stay cyclic after
/// extension.
pub const TETRA_SHAPES: [Shape; 6] = [
    Shape { query: "Q() :- R(x, y), S(y, z), T(z, x).", deps: "" },
    Shape { query: "Q() :- A(x, y), B(y, z), C(z, x), D(x, w).", deps: "D : 1 -> 2" },
    Shape { query: "Q(x) :- R(x, y), S(y, z), T(z, w), U(w, x).", deps: "R : 1 -> 2" },
    Shape { query: "Q() :- R(x, y, z), S(y, z, w), T(x, z, w), U(x, y, w), V(x, v).", deps: "V : 1 -> 2" },
    Shape { query: "Q(a) :- R(a, b), S(b, c), T(c, d), U(d, e), V(e, a).", deps: "U : 1 -> 2" },
    Shape { query: "Q(x, y) :- R(x, y, p), S(y, z), T(z, x), P(p, q).", deps: "P : 1 -> 2" },
];

/// The movie query: who acted in a movie, together with the movie's
/// production company (each movie has one).
pub const MOVIE_SHAPE: Shape = Shape { query: "Q(a, p) :- Cast(m, a), Release(m, p).", deps: "Release : 1 -> 2" };
