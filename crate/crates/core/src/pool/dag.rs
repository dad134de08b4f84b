//! Dependency graph between questions.
//!
//! An edge `from -> to` means `from` depends on `to` (must be answered after
//! it). Edges that would close a cycle are refused, so the graph is a DAG
//! after every mutation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use crate::error::PoolError;
use crate::question::QuestionId;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DependencyGraph {
    nodes: BTreeSet<QuestionId>,
    out: BTreeMap<QuestionId, BTreeSet<QuestionId>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub from: QuestionId,
    pub to: QuestionId,
}

impl DependencyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: QuestionId) {
        self.nodes.insert(id);
    }

    pub fn contains(&self, id: &QuestionId) -> bool {
        self.nodes.contains(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &QuestionId> {
        self.nodes.iter()
    }

    /// Inserts `from -> to`, creating both nodes if needed.
    ///
    /// Fails without modifying the graph when `to` already reaches `from`.
    pub fn add_edge(&mut self, from: QuestionId, to: QuestionId) -> Result<(), PoolError> {
        if from == to || self.reaches(&to, &from) {
            return Err(PoolError::Cycle { from, to });
        }
        self.nodes.insert(from.clone());
        self.nodes.insert(to.clone());
        self.out.entry(from).or_default().insert(to);
        Ok(())
    }

    pub fn has_edge(&self, from: &QuestionId, to: &QuestionId) -> bool {
        self.out.get(from).is_some_and(|s| s.contains(to))
    }

    pub fn dependencies(&self, id: &QuestionId) -> impl Iterator<Item = &QuestionId> {
        self.out.get(id).into_iter().flatten()
    }

    /// Whether a directed path `from ~> to` exists.
    pub fn reaches(&self, from: &QuestionId, to: &QuestionId) -> bool {
        let mut stack = vec![from];
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if n == to {
                return true;
            }
            if !seen.insert(n) {
                continue;
            }
            stack.extend(self.dependencies(n));
        }
        false
    }

    pub fn edges(&self) -> Vec<Edge> {
        self.out
            .iter()
            .flat_map(|(from, tos)| {
                tos.iter().map(move |to| Edge {
                    from: from.clone(),
                    to: to.clone(),
                })
            })
            .collect()
    }

    /// Kahn's algorithm; `None` if a cycle exists. Dependencies come first.
    pub fn topological_order(&self) -> Option<Vec<QuestionId>> {
        let mut pending: BTreeMap<&QuestionId, usize> =
            self.nodes.iter().map(|n| (n, 0)).collect();
        let mut dependents: BTreeMap<&QuestionId, Vec<&QuestionId>> = BTreeMap::new();
        for (from, tos) in &self.out {
            *pending.entry(from).or_default() += tos.len();
            for to in tos {
                dependents.entry(to).or_default().push(from);
            }
        }
        let mut ready: VecDeque<&QuestionId> = pending
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(n, _)| *n)
            .collect();
        let mut order = Vec::with_capacity(pending.len());
        while let Some(n) = ready.pop_front() {
            order.push(n.clone());
            for d in dependents.get(n).into_iter().flatten() {
                let c = pending.get_mut(d).expect("dependent is a node");
                *c -= 1;
                if *c == 0 {
                    ready.push_back(d);
                }
            }
        }
        (order.len() == pending.len()).then_some(order)
    }
}
