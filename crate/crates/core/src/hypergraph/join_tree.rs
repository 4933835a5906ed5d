//! Join trees via GYO ear removal, and free-connexity.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec::Vec;

use super::{EdgeId, Hypergraph};
use crate::model::{Query, Var};

/// A tree over the edge ids of a hypergraph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JoinTree {
    nodes: Vec<EdgeId>,
    links: Vec<(EdgeId, EdgeId)>,
}

impl JoinTree {
    pub fn new(nodes: Vec<EdgeId>, links: Vec<(EdgeId, EdgeId)>) -> Self {
        JoinTree { nodes, links }
    }

    pub fn nodes(&self) -> &[EdgeId] {
        &self.nodes
    }

    /// Tree edges, each unordered pair listed once.
    pub fn links(&self) -> &[(EdgeId, EdgeId)] {
        &self.links
    }

    /// Neighbours of `n`, in link order.
    pub fn neighbors(&self, n: EdgeId) -> Vec<EdgeId> {
        self.links
            .iter()
            .filter_map(|&(a, b)| if a == n { Some(b) } else if b == n { Some(a) } else { None })
            .collect()
    }

    /// The unique simple path from `a` to `b` (inclusive).
    pub fn path(&self, a: EdgeId, b: EdgeId) -> Option<Vec<EdgeId>> {
        let mut prev: BTreeMap<EdgeId, EdgeId> = BTreeMap::new();
        let mut queue = VecDeque::from([a]);
        prev.insert(a, a);
        while let Some(n) = queue.pop_front() {
            if n == b {
                let mut out = alloc::vec![b];
                let mut cur = b;
                while cur != a {
                    cur = prev[&cur];
                    out.push(cur);
                }
                out.reverse();
                return Some(out);
            }
            for m in self.neighbors(n) {
                if let alloc::collections::btree_map::Entry::Vacant(e) = prev.entry(m) {
                    e.insert(n);
                    queue.push_back(m);
                }
            }
        }
        None
    }

    /// Nodes reachable from `start` without entering `blocked`.
    pub fn component_avoiding(&self, start: EdgeId, blocked: EdgeId) -> BTreeSet<EdgeId> {
        let mut seen = BTreeSet::new();
        if start == blocked {
            return seen;
        }
        let mut stack = alloc::vec![start];
        seen.insert(start);
        while let Some(n) = stack.pop() {
            for m in self.neighbors(n) {
                if m != blocked && seen.insert(m) {
                    stack.push(m);
                }
            }
        }
        seen
    }

    /// Preorder from `root` together with each node's parent.
    pub fn rooted(&self, root: EdgeId) -> Vec<(EdgeId, Option<EdgeId>)> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut seen = BTreeSet::from([root]);
        let mut stack = alloc::vec![(root, None)];
        while let Some((n, p)) = stack.pop() {
            out.push((n, p));
            let mut kids: Vec<EdgeId> = self.neighbors(n).into_iter().filter(|m| seen.insert(*m)).collect();
            kids.reverse();
            stack.extend(kids.into_iter().map(|m| (m, Some(n))));
        }
        out
    }

    /// Independent check: the links form a spanning tree of exactly the
    /// edge ids of `h`, and every vertex induces a connected subtree.
    pub fn is_valid_for(&self, h: &Hypergraph) -> bool {
        let ids: BTreeSet<EdgeId> = h.edges().iter().map(|e| e.id).collect();
        let nodes: BTreeSet<EdgeId> = self.nodes.iter().copied().collect();
        if ids != nodes || nodes.len() != self.nodes.len() {
            return false;
        }
        if self.links.len() + 1 != nodes.len().max(1) {
            return false;
        }
        if self.links.iter().any(|(a, b)| a == b || !nodes.contains(a) || !nodes.contains(b)) {
            return false;
        }
        if let Some(&first) = self.nodes.first() {
            if self.component_avoiding(first, usize::MAX).len() != nodes.len() {
                return false;
            }
        }
        h.vertices().iter().all(|v| {
            let holding: BTreeSet<EdgeId> =
                h.edges().iter().filter(|e| e.vars.contains(v)).map(|e| e.id).collect();
            let Some(&start) = holding.iter().next() else { return true };
            // Connected within the induced subforest.
            let mut seen = BTreeSet::from([start]);
            let mut stack = alloc::vec![start];
            while let Some(n) = stack.pop() {
                for m in self.neighbors(n) {
                    if holding.contains(&m) && seen.insert(m) {
                        stack.push(m);
                    }
                }
            }
            seen == holding
        })
    }
}

/// GYO reduction: repeatedly drop vertices that occur in a single edge and
/// edges contained in another edge (attaching them to it). The hypergraph is
/// acyclic iff at most one edge survives; the attachments form a join tree.
pub fn find_join_tree(h: &Hypergraph) -> Option<JoinTree> {
    let mut work: Vec<(EdgeId, BTreeSet<Var>)> = h.edges().iter().map(|e| (e.id, e.vars.clone())).collect();
    let mut alive = alloc::vec![true; work.len()];
    let mut links = Vec::new();
    loop {
        let mut changed = false;
        let mut count: BTreeMap<&Var, usize> = BTreeMap::new();
        for (i, (_, vars)) in work.iter().enumerate() {
            if alive[i] {
                for v in vars {
                    *count.entry(v).or_default() += 1;
                }
            }
        }
        let lonely: BTreeSet<Var> = count.into_iter().filter(|(_, c)| *c == 1).map(|(v, _)| v.clone()).collect();
        if !lonely.is_empty() {
            for (i, (_, vars)) in work.iter_mut().enumerate() {
                if alive[i] {
                    vars.retain(|v| !lonely.contains(v));
                }
            }
            changed = true;
        }
        'ear: for i in 0..work.len() {
            if !alive[i] {
                continue;
            }
            for j in 0..work.len() {
                if j != i && alive[j] && work[i].1.is_subset(&work[j].1) {
                    links.push((work[i].0, work[j].0));
                    alive[i] = false;
                    changed = true;
                    break 'ear;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (alive.iter().filter(|a| **a).count() <= 1)
        .then(|| JoinTree::new(h.edges().iter().map(|e| e.id).collect(), links))
}

/// Both `H(Q)` and `H(Q)` plus the head as an extra edge are acyclic.
pub fn is_free_connex(q: &Query) -> bool {
    let h = Hypergraph::of_query(q);
    if !h.is_acyclic() {
        return false;
    }
    let free = q.free();
    free.is_empty() || h.with_edge(q.atoms().len(), free).is_ok_and(|g| g.is_acyclic())
}
