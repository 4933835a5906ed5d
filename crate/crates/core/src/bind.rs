//! Matching tuples against atom argument lists.

use alloc::vec::Vec;

use crate::instance::Value;
use crate::model::Var;

/// Where each distinct variable of an argument list sits, plus the
/// equalities that repeated variables impose.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub vars: Vec<Var>,
    pub first: Vec<usize>,
    eq: Vec<(usize, usize)>,
}

impl Layout {
    pub fn of(args: &[Var]) -> Self {
        let mut vars: Vec<Var> = Vec::new();
        let mut first = Vec::new();
        let mut eq = Vec::new();
        for (p, v) in args.iter().enumerate() {
            match vars.iter().position(|u| u == v) {
                Some(i) => eq.push((first[i], p)),
                None => {
                    vars.push(v.clone());
                    first.push(p);
                }
            }
        }
        Layout { vars, first, eq }
    }

    /// Repeated variables carry equal values.
    pub fn consistent(&self, t: &[Value]) -> bool {
        self.eq.iter().all(|&(a, b)| t[a] == t[b])
    }

    /// 0-based position of `v`.
    pub fn pos(&self, v: &Var) -> Option<usize> {
        self.vars.iter().position(|u| u == v).map(|i| self.first[i])
    }

    /// Positions of `vs` (all must be present).
    pub fn positions(&self, vs: &[Var]) -> Option<Vec<usize>> {
        vs.iter().map(|v| self.pos(v)).collect()
    }
}

pub(crate) fn project(t: &[Value], positions: &[usize]) -> Vec<Value> {
    positions.iter().map(|&p| t[p].clone()).collect()
}
