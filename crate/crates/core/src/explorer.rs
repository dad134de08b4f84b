//! Frontier-based targeted exploration.
//!
//! The agent keeps its own map of known free and known wall cells. A
//! frontier is a known free cell with an in-bounds 4-neighbour that is
//! neither. Each step scores the reachable frontiers by relevance
//! discounted by path length, moves one cell along a shortest known-free
//! path toward the best one, observes, and records the observation in group
//! memory.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{MemoryError, SceneError};
use crate::memory::{GroupMemory, MemoryRecord, SceneMeta};
use crate::question::{Query, QuestionId};
use crate::scene::{Cell, GridScene, Heading, Observation, Pose};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepBudget {
    pub max_steps_per_question: u32,
    /// Virtual seconds per step.
    pub step_duration: f64,
}

impl Default for StepBudget {
    fn default() -> Self {
        Self {
            max_steps_per_question: 40,
            step_duration: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExplorerConfig {
    pub view_range: u32,
    pub noise_rate: f64,
    /// Path length at which a frontier's relevance is halved.
    pub distance_scale: f64,
    pub check_interval: u32,
    pub stop_threshold: f64,
    pub budget: StepBudget,
}

impl Default for ExplorerConfig {
    fn default() -> Self {
        Self {
            view_range: 2,
            noise_rate: 0.1,
            distance_scale: 8.0,
            check_interval: 3,
            stop_threshold: 0.75,
            budget: StepBudget::default(),
        }
    }
}

/// Relevance of frontier cells to a query, in `[0, 1]`.
pub trait RelevanceProvider {
    fn relevance(
        &self,
        frontiers: &BTreeSet<Cell>,
        query: &Query,
        meta: &SceneMeta,
    ) -> BTreeMap<Cell, f64>;
}

/// High value for frontiers inside the query's room, or for the frontiers
/// closest to it when none lie inside; base value elsewhere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoomRelevance {
    pub target: f64,
    pub base: f64,
}

impl Default for RoomRelevance {
    fn default() -> Self {
        Self {
            target: 0.9,
            base: 0.2,
        }
    }
}

impl RelevanceProvider for RoomRelevance {
    fn relevance(
        &self,
        frontiers: &BTreeSet<Cell>,
        query: &Query,
        meta: &SceneMeta,
    ) -> BTreeMap<Cell, f64> {
        let mut out: BTreeMap<Cell, f64> = frontiers.iter().map(|&f| (f, self.base)).collect();
        let Some(room) = query.room.as_deref().and_then(|r| meta.room(r)) else {
            return out;
        };
        let dist = |f: Cell| {
            room.cells
                .iter()
                .map(|c| (c.x - f.x).abs() + (c.y - f.y).abs())
                .min()
                .unwrap_or(i32::MAX)
        };
        let Some(best) = frontiers.iter().map(|&f| dist(f)).min() else {
            return out;
        };
        for (f, v) in out.iter_mut() {
            if dist(*f) == best {
                *v = self.target;
            }
        }
        out
    }
}

/// The agent's map and step count for the current question.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplorationState {
    pub pose: Pose,
    pub known_free: BTreeSet<Cell>,
    pub known_wall: BTreeSet<Cell>,
    pub frontier: BTreeSet<Cell>,
    /// Relevance of the current frontiers; absent cells take the base value.
    pub semantic_value: BTreeMap<Cell, f64>,
    pub steps_used: u32,
    pub max_steps: u32,
}

impl ExplorationState {
    pub fn new(pose: Pose, max_steps: u32) -> Self {
        Self {
            pose,
            known_free: BTreeSet::new(),
            known_wall: BTreeSet::new(),
            frontier: BTreeSet::new(),
            semantic_value: BTreeMap::new(),
            steps_used: 0,
            max_steps,
        }
    }

    /// A fresh question's state, starting from everything memory has seen.
    pub fn from_memory(pose: Pose, memory: &GroupMemory, max_steps: u32) -> Self {
        let mut s = Self::new(pose, max_steps);
        s.known_free = memory.seen_cells().clone();
        s.known_wall = memory.seen_walls().clone();
        s.frontier = s.recompute_frontiers(memory.meta());
        s
    }

    fn is_known(&self, c: Cell) -> bool {
        self.known_free.contains(&c) || self.known_wall.contains(&c)
    }

    fn is_frontier(&self, c: Cell, meta: &SceneMeta) -> bool {
        self.known_free.contains(&c)
            && c
                .neighbors4()
                .into_iter()
                .any(|n| meta.in_bounds(n) && !self.is_known(n))
    }

    /// Frontier set from its definition alone.
    pub fn recompute_frontiers(&self, meta: &SceneMeta) -> BTreeSet<Cell> {
        self.known_free
            .iter()
            .copied()
            .filter(|&c| self.is_frontier(c, meta))
            .collect()
    }

    /// Merges an observation into the map, updating frontiers locally.
    pub fn absorb(&mut self, obs: &Observation, meta: &SceneMeta) {
        let mut touched = Vec::new();
        for &c in &obs.visible_cells {
            if self.known_free.insert(c) {
                touched.push(c);
            }
        }
        for &c in &obs.blocked_cells {
            if self.known_wall.insert(c) {
                touched.push(c);
            }
        }
        for c in touched {
            for n in std::iter::once(c).chain(c.neighbors4()) {
                if self.is_frontier(n, meta) {
                    self.frontier.insert(n);
                } else {
                    self.frontier.remove(&n);
                }
            }
        }
    }

    /// Breadth-first path lengths over known free cells from `from`.
    pub fn distances_from(&self, from: Cell) -> BTreeMap<Cell, u32> {
        let mut dist = BTreeMap::new();
        if !self.known_free.contains(&from) {
            return dist;
        }
        dist.insert(from, 0);
        let mut queue = VecDeque::from([from]);
        while let Some(c) = queue.pop_front() {
            let d = dist[&c];
            for n in c.neighbors4() {
                if self.known_free.contains(&n) && !dist.contains_key(&n) {
                    dist.insert(n, d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    pub fn budget_exhausted(&self) -> bool {
        self.steps_used >= self.max_steps
    }
}

/// `relevance / (1 + path_length / distance_scale)` for every reachable
/// frontier.
pub fn score_frontiers(
    state: &ExplorationState,
    relevance: &BTreeMap<Cell, f64>,
    base: f64,
    distance_scale: f64,
) -> BTreeMap<Cell, f64> {
    let dist = state.distances_from(state.pose.cell);
    state
        .frontier
        .iter()
        .filter_map(|f| {
            let d = *dist.get(f)?;
            let sv = relevance.get(f).copied().unwrap_or(base);
            Some((*f, sv / (1.0 + f64::from(d) / distance_scale)))
        })
        .collect()
}

/// Highest score; ties go to the smallest cell.
pub fn best_frontier(scores: &BTreeMap<Cell, f64>) -> Option<Cell> {
    // BTreeMap iterates cells ascending, so keeping the first maximum wins ties.
    scores
        .iter()
        .fold(None, |best: Option<(Cell, f64)>, (&c, &s)| match best {
            Some((_, bs)) if bs >= s => best,
            _ => Some((c, s)),
        })
        .map(|(c, _)| c)
}

/// First cell on a shortest known-free path from the pose to `target`.
/// Among equally short paths the smallest neighbour is taken.
pub fn next_cell(state: &ExplorationState, target: Cell) -> Option<Cell> {
    let from = state.pose.cell;
    if from == target {
        return Some(from);
    }
    let back = state.distances_from(target);
    let d = *back.get(&from)?;
    let mut options: Vec<Cell> = from
        .neighbors4()
        .into_iter()
        .filter(|n| back.get(n) == Some(&(d - 1)))
        .collect();
    options.sort();
    options.first().copied()
}

/// What happened in one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub question_id: QuestionId,
    pub step: u32,
    pub pose: Pose,
    pub chosen_frontier: Option<Cell>,
    /// Confidence for the question after the step's observation.
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepOutcome {
    Stepped(StepRecord),
    BudgetExhausted,
}

/// One question's exploration, advanced a step at a time by its owner.
#[derive(Clone, Debug)]
pub struct ExplorationSession {
    pub question_id: QuestionId,
    pub query: Query,
    pub state: ExplorationState,
}

impl ExplorationSession {
    /// Starts from `start`, merging memory into the map and taking an
    /// initial look around. The look is not a step.
    #[allow(clippy::too_many_arguments)]
    pub fn begin(
        question_id: QuestionId,
        query: Query,
        start: Pose,
        scene: &GridScene,
        memory: &mut GroupMemory,
        config: &ExplorerConfig,
        rng_seed: u64,
        now: f64,
    ) -> Result<Self, SceneError> {
        scene.check_pose(&start)?;
        let mut state =
            ExplorationState::from_memory(start, memory, config.budget.max_steps_per_question);
        let obs = scene.observe(start, config.view_range, config.noise_rate, rng_seed, now)?;
        state.absorb(&obs, memory.meta());
        memory.insert(MemoryRecord {
            observation: obs,
            source_question: Some(question_id.clone()),
        });
        Ok(Self {
            question_id,
            query,
            state,
        })
    }

    /// Moves one cell toward the best frontier (or stays when none is
    /// reachable), observes at `now`, and stores the observation.
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &mut self,
        scene: &GridScene,
        memory: &mut GroupMemory,
        config: &ExplorerConfig,
        relevance: &dyn RelevanceProvider,
        base_relevance: f64,
        rng_seed: u64,
        now: f64,
    ) -> Result<StepOutcome, ExploreError> {
        if self.state.budget_exhausted() {
            return Ok(StepOutcome::BudgetExhausted);
        }
        let values = relevance.relevance(&self.state.frontier, &self.query, memory.meta());
        let scores = score_frontiers(&self.state, &values, base_relevance, config.distance_scale);
        self.state.semantic_value = values;
        let chosen = best_frontier(&scores);
        if let Some(target) = chosen {
            let next = next_cell(&self.state, target).expect("scored frontiers are reachable");
            let heading = Heading::of_move(self.state.pose.cell, next).unwrap_or(self.state.pose.heading);
            self.state.pose = Pose::new(next, heading);
        }
        let obs = scene.observe(
            self.state.pose,
            config.view_range,
            config.noise_rate,
            rng_seed,
            now,
        )?;
        self.state.absorb(&obs, memory.meta());
        memory.insert(MemoryRecord {
            observation: obs,
            source_question: Some(self.question_id.clone()),
        });
        self.state.steps_used += 1;
        Ok(StepOutcome::Stepped(StepRecord {
            question_id: self.question_id.clone(),
            step: self.state.steps_used,
            pose: self.state.pose,
            chosen_frontier: chosen,
            confidence: memory.confidence(&self.query)?,
        }))
    }

    pub fn should_stop(
        &self,
        memory: &GroupMemory,
        config: &ExplorerConfig,
    ) -> Result<bool, MemoryError> {
        should_stop(&self.state, &self.query, memory, config)
    }
}

/// True when the budget is spent, or at a positive multiple of the check
/// interval when confidence reaches the stop threshold.
pub fn should_stop(
    state: &ExplorationState,
    query: &Query,
    memory: &GroupMemory,
    config: &ExplorerConfig,
) -> Result<bool, MemoryError> {
    if state.budget_exhausted() {
        return Ok(true);
    }
    let interval = config.check_interval.max(1);
    if state.steps_used == 0 || !state.steps_used.is_multiple_of(interval) {
        return Ok(false);
    }
    Ok(memory.confidence(query)? >= config.stop_threshold)
}

#[derive(Debug, thiserror::Error)]
pub enum ExploreError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

/// Result of a complete exploration for one question.
#[derive(Clone, Debug, PartialEq)]
pub struct Exploration {
    pub steps_used: u32,
    pub final_pose: Pose,
    pub steps: Vec<StepRecord>,
}

/// Explores for `query` until the stopping rule fires. Observation `k`
/// (0 = the initial look) uses seed `seed_base + k`.
#[allow(clippy::too_many_arguments)]
pub fn explore_for(
    question_id: QuestionId,
    query: &Query,
    start: Pose,
    scene: &GridScene,
    memory: &mut GroupMemory,
    config: &ExplorerConfig,
    seed_base: u64,
    start_time: f64,
) -> Result<Exploration, ExploreError> {
    let relevance = RoomRelevance::default();
    let mut session = ExplorationSession::begin(
        question_id,
        query.clone(),
        start,
        scene,
        memory,
        config,
        seed_base,
        start_time,
    )?;
    let mut steps = Vec::new();
    while !session.should_stop(memory, config)? {
        let k = session.state.steps_used + 1;
        let now = start_time + f64::from(k) * config.budget.step_duration;
        match session.step(
            scene,
            memory,
            config,
            &relevance,
            relevance.base,
            seed_base.wrapping_add(u64::from(k)),
            now,
        )? {
            StepOutcome::Stepped(r) => steps.push(r),
            StepOutcome::BudgetExhausted => break,
        }
    }
    Ok(Exploration {
        steps_used: session.state.steps_used,
        final_pose: session.state.pose,
        steps,
    })
}
