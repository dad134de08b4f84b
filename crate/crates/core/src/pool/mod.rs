//! The question pool: buffered unanswered questions, their dependency DAG
//! and the updater that re-scores every entry on each mutation.
//!
//! The pool is a single-owner state machine. Callers hold it by `&mut` and
//! hand out [`PoolDump`] snapshots to readers.

mod dag;
mod priority;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::PoolError;
use crate::question::{ParsedQuestion, QuestionId};
use crate::scene::Cell;

pub use dag::{DependencyGraph, Edge};
pub use priority::{
    dependency_component, priority, reward_component, scope_component, urgency_component,
    Components, PriorityWeights, Targets,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryStatus {
    Ready,
    Pending,
    Exploring,
    Answered,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoolEntry {
    pub parsed: ParsedQuestion,
    pub status: EntryStatus,
    pub request_time: f64,
    pub start_time: Option<f64>,
    pub targets: Targets,
    pub components: Components,
    pub priority: f64,
    /// Declared prerequisites not yet present in the graph.
    unresolved: BTreeSet<QuestionId>,
}

impl PoolEntry {
    pub fn id(&self) -> &QuestionId {
        self.parsed.id()
    }

    pub fn reward_raw(&self) -> u32 {
        self.components.reward
    }

    pub fn is_unanswered(&self) -> bool {
        self.status != EntryStatus::Answered
    }

    fn selectable(&self, strict_gating: bool) -> bool {
        match self.status {
            EntryStatus::Ready => true,
            EntryStatus::Pending => !strict_gating,
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub weights: PriorityWeights,
    /// Chebyshev radius under which two target instances count as nearby.
    pub reward_radius: i32,
    /// When set, pending entries are never selected.
    pub strict_gating: bool,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            weights: PriorityWeights::default(),
            reward_radius: 8,
            strict_gating: false,
        }
    }
}

/// Result of admitting a question.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Admission {
    /// Dependency edges dropped because they would close a cycle.
    pub rejected: Vec<PoolError>,
}

#[derive(Clone, Debug, Default)]
pub struct QuestionPool {
    config: PoolConfig,
    entries: BTreeMap<QuestionId, PoolEntry>,
    dag: DependencyGraph,
    answered: BTreeSet<QuestionId>,
}

/// Two priorities closer than this relative gap are ties.
const TIE_EPS: f64 = 1e-12;

fn cmp_priority(a: f64, b: f64) -> Ordering {
    let scale = 1f64.max(a.abs()).max(b.abs());
    if (a - b).abs() <= TIE_EPS * scale {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

impl QuestionPool {
    pub fn new(config: PoolConfig) -> Self {
        Self {
            config,
            ..Self::default()
        }
    }

    pub fn config(&self) -> &PoolConfig {
        &self.config
    }

    pub fn entries(&self) -> impl Iterator<Item = &PoolEntry> {
        self.entries.values()
    }

    pub fn entry(&self, id: &QuestionId) -> Option<&PoolEntry> {
        self.entries.get(id)
    }

    pub fn dag(&self) -> &DependencyGraph {
        &self.dag
    }

    pub fn answered(&self) -> &BTreeSet<QuestionId> {
        &self.answered
    }

    /// Entries still waiting to be explored.
    pub fn waiting(&self) -> impl Iterator<Item = &PoolEntry> {
        self.entries
            .values()
            .filter(|e| matches!(e.status, EntryStatus::Ready | EntryStatus::Pending))
    }

    pub fn has_selectable(&self) -> bool {
        self.entries
            .values()
            .any(|e| e.selectable(self.config.strict_gating))
    }

    /// Admits a parsed question at time `now` and re-scores the pool.
    pub fn add_question(
        &mut self,
        parsed: ParsedQuestion,
        deps: &[QuestionId],
        now: f64,
    ) -> Result<Admission, PoolError> {
        let id = parsed.id().clone();
        if self.entries.contains_key(&id) || self.answered.contains(&id) {
            return Err(PoolError::Duplicate(id));
        }
        urgency_component(parsed.urgency_est)?;

        let mut admission = Admission::default();
        let mut unresolved = BTreeSet::new();
        for dep in deps {
            if self.dag.contains(dep) {
                if let Err(e) = self.dag.add_edge(id.clone(), dep.clone()) {
                    admission.rejected.push(e);
                }
            } else {
                unresolved.insert(dep.clone());
            }
        }
        let targets = Targets {
            room: parsed.query().room.clone(),
            anchors: Vec::new(),
        };
        self.entries.insert(
            id.clone(),
            PoolEntry {
                parsed,
                status: EntryStatus::Ready,
                request_time: now,
                start_time: None,
                targets,
                components: Components::default(),
                priority: 0.0,
                unresolved,
            },
        );
        admission.rejected.extend(self.introduce(&id));
        for e in &admission.rejected {
            log::warn!("dropping dependency edge: {e}");
        }
        self.update();
        Ok(admission)
    }

    /// Adds `id` to the graph and links entries that were waiting on it.
    fn introduce(&mut self, id: &QuestionId) -> Vec<PoolError> {
        self.dag.add_node(id.clone());
        let waiting: Vec<QuestionId> = self
            .entries
            .values()
            .filter(|e| e.unresolved.contains(id))
            .map(|e| e.id().clone())
            .collect();
        let mut rejected = Vec::new();
        for w in waiting {
            if let Err(e) = self.dag.add_edge(w.clone(), id.clone()) {
                rejected.push(e);
            }
            if let Some(entry) = self.entries.get_mut(&w) {
                entry.unresolved.remove(id);
            }
        }
        rejected
    }

    /// Records `id` as answered, whether or not it ever entered the pool.
    /// Idempotent.
    pub fn mark_answered(&mut self, id: &QuestionId) -> Vec<PoolError> {
        if !self.answered.insert(id.clone()) {
            return Vec::new();
        }
        let rejected = self.introduce(id);
        if let Some(e) = self.entries.get_mut(id) {
            e.status = EntryStatus::Answered;
        }
        self.update();
        rejected
    }

    /// Replaces the target instance anchors of every unanswered entry.
    pub fn set_anchors(&mut self, mut anchors: impl FnMut(&ParsedQuestion) -> Vec<Cell>) {
        for e in self.entries.values_mut().filter(|e| e.is_unanswered()) {
            e.targets.anchors = anchors(&e.parsed);
        }
    }

    fn dependencies_of(&self, e: &PoolEntry) -> Vec<QuestionId> {
        self.dag
            .dependencies(e.id())
            .chain(e.unresolved.iter())
            .cloned()
            .collect()
    }

    /// The updater: recomputes status, components and priority of every
    /// unanswered entry from the current pool state.
    pub fn update(&mut self) {
        let unanswered: Vec<(QuestionId, Targets)> = self
            .entries
            .values()
            .filter(|e| e.is_unanswered())
            .map(|e| (e.id().clone(), e.targets.clone()))
            .collect();
        let mut fresh = Vec::new();
        for e in self.entries.values().filter(|e| e.is_unanswered()) {
            let deps = self.dependencies_of(e);
            let dependency = dependency_component(&deps, &self.answered);
            let others = unanswered
                .iter()
                .filter(|(id, _)| id != e.id())
                .map(|(_, t)| t);
            let components = Components {
                urgency: urgency_component(e.parsed.urgency_est)
                    .expect("checked on admission"),
                scope: scope_component(e.parsed.scope),
                reward: reward_component(&e.targets, others, self.config.reward_radius),
                dependency,
            };
            fresh.push((e.id().clone(), components));
        }
        for (id, components) in fresh {
            let e = self.entries.get_mut(&id).expect("entry present");
            e.components = components;
            e.priority = priority(&components, &self.config.weights);
            if matches!(e.status, EntryStatus::Ready | EntryStatus::Pending) {
                e.status = if components.dependency == 1.0 {
                    EntryStatus::Ready
                } else {
                    EntryStatus::Pending
                };
            }
        }
    }

    /// Highest-priority selectable entry without changing state.
    ///
    /// Ties go to the earlier request, then the smaller id.
    pub fn peek_next(&self) -> Option<&PoolEntry> {
        self.entries
            .values()
            .filter(|e| e.selectable(self.config.strict_gating))
            .max_by(|a, b| {
                cmp_priority(a.priority, b.priority)
                    .then_with(|| b.request_time.total_cmp(&a.request_time))
                    .then_with(|| b.id().cmp(a.id()))
            })
    }

    /// Picks the next question to explore and marks it as exploring.
    pub fn select_next(&mut self, now: f64) -> Option<QuestionId> {
        let id = self.peek_next()?.id().clone();
        self.start(&id, now).ok()?;
        Some(id)
    }

    /// Marks a specific waiting entry as exploring.
    pub fn start(&mut self, id: &QuestionId, now: f64) -> Result<(), PoolError> {
        let e = self
            .entries
            .get_mut(id)
            .filter(|e| matches!(e.status, EntryStatus::Ready | EntryStatus::Pending))
            .ok_or_else(|| PoolError::Unknown(id.clone()))?;
        e.status = EntryStatus::Exploring;
        e.start_time = Some(now);
        self.update();
        Ok(())
    }

    pub fn dump(&self) -> PoolDump {
        PoolDump {
            entries: self
                .entries
                .values()
                .map(|e| EntryDump {
                    question_id: e.id().clone(),
                    status: e.status,
                    request_time: e.request_time,
                    start_time: e.start_time,
                    urgency: e.components.urgency,
                    scope: e.components.scope,
                    reward: e.components.reward,
                    dependency: e.components.dependency,
                    priority: e.priority,
                })
                .collect(),
            edges: self.dag.edges(),
        }
    }
}

/// Debug snapshot of the pool.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoolDump {
    pub entries: Vec<EntryDump>,
    pub edges: Vec<Edge>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntryDump {
    pub question_id: QuestionId,
    pub status: EntryStatus,
    pub request_time: f64,
    pub start_time: Option<f64>,
    pub urgency: f64,
    pub scope: f64,
    pub reward: u32,
    pub dependency: f64,
    pub priority: f64,
}
