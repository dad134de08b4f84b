//! The question pipeline: arrival, parsing, the finishing gate, the pool,
//! the planner's select-explore loop, stopping and answering.
//!
//! The reference executor is a deterministic event loop over virtual time.
//! Every state change is published on the bus; the episode trace is what a
//! deduplicating consumer of the bus records. Exploration is never
//! preempted: selection happens only between explorations, while arrivals
//! are delivered at their exact arrival time, before the step that crosses
//! it.

mod answering;
mod bus;
mod config;
mod suite;
mod trace;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::RunError;
use crate::explorer::{ExplorationSession, ExploreError, ExplorerConfig, RoomRelevance, StepOutcome};
use crate::memory::{GroupMemory, MemoryRecord, SceneMeta};
use crate::metrics::evaluate;
use crate::pool::QuestionPool;
use crate::question::{
    parse_question, validate_scenario, DeclaredDependencies, DependencyInference, Label,
    Question, QuestionId, Scenario,
};
use crate::scene::Pose;

pub use answering::{answer_question, derive_value};
pub use bus::{
    AttemptOrigin, BusAdapter, BusMessage, Event, InMemoryBus, Publisher, RedeliveringBus,
    StopReason, Topic, TraceRecorder,
};
pub use config::{Ablation, Mode, RunConfig};
pub use suite::{run_suite, BenchReport, BenchRow, ScenarioOutcome};
pub use trace::{verify_trace, EpisodeTrace};

/// Outcome for one question.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub question_id: QuestionId,
    pub predicted: Label,
    pub correct: bool,
    /// Answered without any exploration of its own.
    pub direct: bool,
    pub used_steps: u32,
    pub max_steps: u32,
    pub urgency_true: f64,
    pub request_time: f64,
    pub start_time: Option<f64>,
    pub answer_time: f64,
    /// Answered by force when the scenario ran out of time.
    pub timed_out: bool,
}

/// Trace plus every observation the run produced.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trace: EpisodeTrace,
    pub memory_log: Vec<MemoryRecord>,
}

enum Selector {
    Pool,
    Replay(VecDeque<QuestionId>),
}

struct Engine<'a> {
    scenario: &'a Scenario,
    config: &'a RunConfig,
    explorer: ExplorerConfig,
    relevance: RoomRelevance,
    memory: GroupMemory,
    memory_log: Vec<MemoryRecord>,
    pool: QuestionPool,
    bus: Publisher,
    recorder: TraceRecorder,
    rng: ChaCha8Rng,
    now: f64,
    pose: Pose,
    arrivals: VecDeque<&'a Question>,
    records: Vec<AnswerRecord>,
    answered: BTreeSet<QuestionId>,
    selector: Selector,
}

/// FNV-1a, to mix the scenario id into the run seed.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl From<ExploreError> for RunError {
    fn from(e: ExploreError) -> Self {
        match e {
            ExploreError::Scene(e) => RunError::Scene(e),
            ExploreError::Memory(e) => RunError::Memory(e),
        }
    }
}

impl<'a> Engine<'a> {
    fn new(
        scenario: &'a Scenario,
        config: &'a RunConfig,
        adapter: Box<dyn BusAdapter>,
        selector: Selector,
    ) -> Result<Self, RunError> {
        config.validate()?;
        let violations = validate_scenario(scenario);
        if !violations.is_empty() {
            let msg: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(RunError::InvalidScenario(msg.join("; ")));
        }
        let mut arrivals: Vec<&Question> = scenario.questions().collect();
        arrivals.sort_by(|a, b| a.arrival_time.total_cmp(&b.arrival_time));
        Ok(Self {
            scenario,
            config,
            explorer: config.explorer_config(),
            relevance: RoomRelevance::default(),
            memory: GroupMemory::new(Arc::new(SceneMeta::from_scene(&scenario.scene))),
            memory_log: Vec::new(),
            pool: QuestionPool::new(config.pool_config()),
            bus: Publisher::new(adapter),
            recorder: TraceRecorder::default(),
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ fnv1a(&scenario.scenario_id)),
            now: 0.0,
            pose: scenario.initial_pose,
            arrivals: arrivals.into(),
            records: Vec::new(),
            answered: BTreeSet::new(),
            selector,
        })
    }

    fn publish(&mut self, t: f64, event: Event) {
        self.bus.publish(t, event);
        while let Some(m) = self.bus.poll() {
            self.recorder.consume(m);
        }
    }

    fn next_seed(&mut self) -> u64 {
        self.rng.gen()
    }

    fn record(&mut self, q: &Question, r: AnswerRecord, t: f64) -> Result<(), RunError> {
        self.answered.insert(q.question_id.clone());
        for e in self.pool.mark_answered(&q.question_id) {
            if let crate::error::PoolError::Cycle { from, to } = e {
                self.publish(t, Event::DependencyRejected { from, to });
            }
        }
        self.records.push(r.clone());
        self.publish(t, Event::Answered(r));
        Ok(())
    }

    fn answer_direct(&mut self, q: &Question, t: f64) -> Result<(), RunError> {
        let predicted = answer_question(q, &self.memory);
        let r = AnswerRecord {
            question_id: q.question_id.clone(),
            predicted,
            correct: predicted == q.ground_truth,
            direct: true,
            used_steps: 0,
            max_steps: self.explorer.budget.max_steps_per_question,
            urgency_true: q.urgency_true,
            request_time: q.arrival_time,
            start_time: None,
            answer_time: t,
            timed_out: false,
        };
        self.record(q, r, t)
    }

    fn try_gate(&mut self, q: &Question, origin: AttemptOrigin, t: f64) -> Result<bool, RunError> {
        let confidence = self.memory.confidence(&q.query)?;
        let accepted = confidence >= self.config.finishing_threshold;
        self.publish(
            t,
            Event::DirectAnswerAttempt {
                question_id: q.question_id.clone(),
                confidence,
                accepted,
                origin,
            },
        );
        if accepted {
            self.answer_direct(q, t)?;
        }
        Ok(accepted)
    }

    /// Re-runs the gate for every waiting pool entry.
    fn gate_retry(&mut self, t: f64) -> Result<(), RunError> {
        if !self.config.gate_enabled() {
            return Ok(());
        }
        let waiting: Vec<QuestionId> = self.pool.waiting().map(|e| e.id().clone()).collect();
        for id in waiting {
            let q = self.question(&id);
            self.try_gate(q, AttemptOrigin::Retry, t)?;
        }
        Ok(())
    }

    fn question(&self, id: &QuestionId) -> &'a Question {
        self.scenario
            .question(id)
            .expect("pool holds scenario questions")
    }

    fn deliver(&mut self, q: &'a Question) -> Result<(), RunError> {
        let t = q.arrival_time;
        self.publish(t, Event::QuestionArrived { question: q.clone() });
        let parsed = parse_question(q, &self.config.parser);
        self.publish(
            t,
            Event::Parsed {
                question_id: q.question_id.clone(),
                urgency_est: parsed.urgency_est,
                scope: parsed.scope,
            },
        );
        if self.config.gate_enabled() && self.try_gate(q, AttemptOrigin::Arrival, t)? {
            return Ok(());
        }
        let deps = DeclaredDependencies.dependencies(q);
        let admission = self.pool.add_question(parsed, &deps, t)?;
        for e in admission.rejected {
            if let crate::error::PoolError::Cycle { from, to } = e {
                self.publish(t, Event::DependencyRejected { from, to });
            }
        }
        let priority = self
            .pool
            .entry(&q.question_id)
            .map(|e| e.priority)
            .unwrap_or_default();
        self.publish(
            t,
            Event::Pooled {
                question_id: q.question_id.clone(),
                priority,
            },
        );
        self.gate_retry(t)
    }

    fn deliver_due(&mut self, upto: f64) -> Result<(), RunError> {
        while let Some(q) = self.arrivals.front().copied() {
            if q.arrival_time > upto {
                break;
            }
            self.arrivals.pop_front();
            self.deliver(q)?;
        }
        Ok(())
    }

    fn refresh_anchors(&mut self) {
        let memory = &self.memory;
        self.pool.set_anchors(|p| memory.anchors(p.query()));
        self.pool.update();
    }

    fn select(&mut self) -> Result<Option<(QuestionId, f64)>, RunError> {
        match &mut self.selector {
            Selector::Pool => {
                let Some(top) = self.pool.peek_next() else {
                    return Ok(None);
                };
                let pick = (top.id().clone(), top.priority);
                self.pool.start(&pick.0, self.now)?;
                Ok(Some(pick))
            }
            Selector::Replay(queue) => {
                if !self.pool.has_selectable() {
                    return Ok(None);
                }
                let Some(id) = queue.pop_front() else {
                    return Ok(None);
                };
                let priority = self
                    .pool
                    .entry(&id)
                    .map(|e| e.priority)
                    .ok_or_else(|| RunError::ReplayDiverged(id.clone()))?;
                self.pool
                    .start(&id, self.now)
                    .map_err(|_| RunError::ReplayDiverged(id.clone()))?;
                Ok(Some((id, priority)))
            }
        }
    }

    fn explore(&mut self, id: &QuestionId) -> Result<(), RunError> {
        let q = self.question(id);
        if self.config.clears_memory_per_question() {
            self.memory_log.extend(self.memory.records().iter().cloned());
            self.memory.clear();
        }
        let start = self.now;
        let seed = self.next_seed();
        let mut session = ExplorationSession::begin(
            id.clone(),
            q.query.clone(),
            self.pose,
            &self.scenario.scene,
            &mut self.memory,
            &self.explorer,
            seed,
            self.now,
        )?;
        let dt = self.explorer.budget.step_duration;
        let reason = loop {
            if session.should_stop(&self.memory, &self.explorer)? {
                break if session.state.budget_exhausted() {
                    StopReason::Budget
                } else {
                    StopReason::Confident
                };
            }
            let t_next = self.now + dt;
            if t_next > self.scenario.max_time {
                break StopReason::Timeout;
            }
            self.deliver_due(t_next)?;
            let seed = self.next_seed();
            match session.step(
                &self.scenario.scene,
                &mut self.memory,
                &self.explorer,
                &self.relevance,
                self.relevance.base,
                seed,
                t_next,
            )? {
                StepOutcome::Stepped(rec) => {
                    self.now = t_next;
                    self.publish(t_next, Event::StepTaken(rec));
                }
                StepOutcome::BudgetExhausted => break StopReason::Budget,
            }
        };
        self.pose = session.state.pose;
        let used = session.state.steps_used;
        self.publish(
            self.now,
            Event::StopDecided {
                question_id: id.clone(),
                reason,
                steps_used: used,
            },
        );
        let predicted = answer_question(q, &self.memory);
        let r = AnswerRecord {
            question_id: id.clone(),
            predicted,
            correct: predicted == q.ground_truth,
            direct: false,
            used_steps: used,
            max_steps: self.explorer.budget.max_steps_per_question,
            urgency_true: q.urgency_true,
            request_time: q.arrival_time,
            start_time: Some(start),
            answer_time: self.now,
            timed_out: reason == StopReason::Timeout,
        };
        let now = self.now;
        self.record(q, r, now)?;
        self.gate_retry(now)
    }

    fn force_remaining(&mut self) -> Result<(), RunError> {
        let t = self.now;
        let remaining: Vec<&Question> = self
            .scenario
            .questions()
            .filter(|q| !self.answered.contains(&q.question_id))
            .collect();
        for q in remaining {
            let predicted = answer_question(q, &self.memory);
            let r = AnswerRecord {
                question_id: q.question_id.clone(),
                predicted,
                correct: predicted == q.ground_truth,
                direct: false,
                used_steps: 0,
                max_steps: self.explorer.budget.max_steps_per_question,
                urgency_true: q.urgency_true,
                request_time: q.arrival_time,
                start_time: None,
                answer_time: t.max(q.arrival_time),
                timed_out: true,
            };
            self.record(q, r, t)?;
        }
        Ok(())
    }

    fn run(mut self) -> Result<RunOutput, RunError> {
        self.publish(
            0.0,
            Event::ScenarioStarted {
                scenario_id: self.scenario.scenario_id.clone(),
                config: self.config.label(),
                seed: self.config.seed,
                question_count: self.scenario.question_count(),
            },
        );
        self.deliver_due(0.0)?;
        let total = self.scenario.question_count();
        while self.answered.len() < total && self.now < self.scenario.max_time {
            self.refresh_anchors();
            match self.select()? {
                Some((id, priority)) => {
                    let now = self.now;
                    self.publish(
                        now,
                        Event::Selected {
                            question_id: id.clone(),
                            priority,
                        },
                    );
                    self.gate_retry(now)?;
                    self.explore(&id)?;
                }
                None => match self.arrivals.front() {
                    Some(q) => {
                        self.now = self.now.max(q.arrival_time);
                        let now = self.now;
                        self.deliver_due(now)?;
                    }
                    None => break,
                },
            }
        }
        // Anything still unanswered timed out; late arrivals are delivered
        // first so they get their gate attempt.
        let now = self.now;
        self.deliver_due(now.max(self.scenario.max_time))?;
        self.force_remaining()?;
        let latency_rule = self.config.latency_rule;
        let metrics = evaluate(&self.records, latency_rule)?;
        let now = self.now;
        self.publish(
            now,
            Event::ScenarioFinished {
                latency_rule,
                metrics,
            },
        );
        self.memory_log.extend(self.memory.records().iter().cloned());
        Ok(RunOutput {
            trace: EpisodeTrace {
                messages: self.recorder.into_messages(),
            },
            memory_log: self.memory_log,
        })
    }
}

/// Runs one scenario on the in-memory bus.
pub fn run_scenario(scenario: &Scenario, config: &RunConfig) -> Result<EpisodeTrace, RunError> {
    Ok(run_scenario_with(scenario, config, Box::new(InMemoryBus::default()))?.trace)
}

/// Runs one scenario on a caller-supplied bus adapter.
pub fn run_scenario_with(
    scenario: &Scenario,
    config: &RunConfig,
    adapter: Box<dyn BusAdapter>,
) -> Result<RunOutput, RunError> {
    Engine::new(scenario, config, adapter, Selector::Pool)?.run()
}

/// Re-executes a run, taking each selection from `trace` instead of the
/// pool's ranking, and returns the answer records it produces.
pub fn replay_decisions(
    scenario: &Scenario,
    config: &RunConfig,
    trace: &EpisodeTrace,
) -> Result<Vec<AnswerRecord>, RunError> {
    let queue = trace.selections().into();
    let out = Engine::new(
        scenario,
        config,
        Box::new(InMemoryBus::default()),
        Selector::Replay(queue),
    )?
    .run()?;
    Ok(out.trace.answer_records())
}

/// Per-question records keyed by id.
pub fn records_by_id(records: &[AnswerRecord]) -> BTreeMap<&QuestionId, &AnswerRecord> {
    records.iter().map(|r| (&r.question_id, r)).collect()
}
