//! In-process message bus.
//!
//! Every message carries a topic, a per-topic sequence number and the
//! virtual time it was published at. Delivery is at least once; consumers
//! deduplicate on `(topic, seq)`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::AnswerRecord;
use crate::explorer::StepRecord;
use crate::metrics::{LatencyRule, MetricsResult};
use crate::question::{Question, QuestionId, ScopeType};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topic {
    ScenarioStarted,
    QuestionArrived,
    Parsed,
    DirectAnswerAttempt,
    Pooled,
    DependencyRejected,
    Selected,
    StepTaken,
    StopDecided,
    Answered,
    ScenarioFinished,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttemptOrigin {
    /// On arrival, before pooling.
    Arrival,
    /// Re-run for a pooled question after the pool updater fired.
    Retry,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopReason {
    Confident,
    Budget,
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    ScenarioStarted {
        scenario_id: String,
        config: String,
        seed: u64,
        question_count: usize,
    },
    QuestionArrived {
        question: Question,
    },
    Parsed {
        question_id: QuestionId,
        urgency_est: f64,
        scope: ScopeType,
    },
    DirectAnswerAttempt {
        question_id: QuestionId,
        confidence: f64,
        accepted: bool,
        origin: AttemptOrigin,
    },
    Pooled {
        question_id: QuestionId,
        priority: f64,
    },
    DependencyRejected {
        from: QuestionId,
        to: QuestionId,
    },
    Selected {
        question_id: QuestionId,
        priority: f64,
    },
    StepTaken(StepRecord),
    StopDecided {
        question_id: QuestionId,
        reason: StopReason,
        steps_used: u32,
    },
    Answered(AnswerRecord),
    ScenarioFinished {
        latency_rule: LatencyRule,
        metrics: MetricsResult,
    },
}

impl Event {
    pub fn topic(&self) -> Topic {
        match self {
            Event::ScenarioStarted { .. } => Topic::ScenarioStarted,
            Event::QuestionArrived { .. } => Topic::QuestionArrived,
            Event::Parsed { .. } => Topic::Parsed,
            Event::DirectAnswerAttempt { .. } => Topic::DirectAnswerAttempt,
            Event::Pooled { .. } => Topic::Pooled,
            Event::DependencyRejected { .. } => Topic::DependencyRejected,
            Event::Selected { .. } => Topic::Selected,
            Event::StepTaken(_) => Topic::StepTaken,
            Event::StopDecided { .. } => Topic::StopDecided,
            Event::Answered(_) => Topic::Answered,
            Event::ScenarioFinished { .. } => Topic::ScenarioFinished,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusMessage {
    pub topic: Topic,
    pub seq: u64,
    pub t: f64,
    pub payload: Event,
}

/// Transport between producers and consumers. An external broker can sit
/// behind this trait.
pub trait BusAdapter {
    fn send(&mut self, msg: BusMessage);
    fn poll(&mut self) -> Option<BusMessage>;
}

/// FIFO queue, exactly-once delivery.
#[derive(Debug, Default)]
pub struct InMemoryBus {
    queue: VecDeque<BusMessage>,
}

impl BusAdapter for InMemoryBus {
    fn send(&mut self, msg: BusMessage) {
        self.queue.push_back(msg);
    }

    fn poll(&mut self) -> Option<BusMessage> {
        self.queue.pop_front()
    }
}

/// Delivers every `every`-th message twice. For exercising consumer
/// idempotency.
#[derive(Debug)]
pub struct RedeliveringBus {
    inner: InMemoryBus,
    every: u64,
    sent: u64,
}

impl RedeliveringBus {
    pub fn new(every: u64) -> Self {
        Self {
            inner: InMemoryBus::default(),
            every: every.max(1),
            sent: 0,
        }
    }
}

impl BusAdapter for RedeliveringBus {
    fn send(&mut self, msg: BusMessage) {
        self.sent += 1;
        if self.sent.is_multiple_of(self.every) {
            self.inner.send(msg.clone());
        }
        self.inner.send(msg);
    }

    fn poll(&mut self) -> Option<BusMessage> {
        self.inner.poll()
    }
}

/// Producer side: stamps per-topic sequence numbers.
pub struct Publisher {
    adapter: Box<dyn BusAdapter>,
    next_seq: BTreeMap<Topic, u64>,
}

impl Publisher {
    pub fn new(adapter: Box<dyn BusAdapter>) -> Self {
        Self {
            adapter,
            next_seq: BTreeMap::new(),
        }
    }

    pub fn publish(&mut self, t: f64, payload: Event) {
        let topic = payload.topic();
        let seq = self.next_seq.entry(topic).or_insert(0);
        *seq += 1;
        self.adapter.send(BusMessage {
            topic,
            seq: *seq,
            t,
            payload,
        });
    }

    pub fn poll(&mut self) -> Option<BusMessage> {
        self.adapter.poll()
    }
}

/// Consumer that keeps the first delivery of each `(topic, seq)`.
#[derive(Debug, Default)]
pub struct TraceRecorder {
    seen: BTreeSet<(Topic, u64)>,
    messages: Vec<BusMessage>,
}

impl TraceRecorder {
    /// Returns whether the message was new.
    pub fn consume(&mut self, msg: BusMessage) -> bool {
        if !self.seen.insert((msg.topic, msg.seq)) {
            return false;
        }
        self.messages.push(msg);
        true
    }

    pub fn into_messages(self) -> Vec<BusMessage> {
        self.messages
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parsed(id: &str) -> Event {
        Event::Parsed {
            question_id: id.into(),
            urgency_est: 0.2,
            scope: ScopeType::Local,
        }
    }

    #[test]
    fn sequence_numbers_are_per_topic() {
        let mut p = Publisher::new(Box::new(InMemoryBus::default()));
        p.publish(0.0, parsed("a"));
        p.publish(0.0, Event::Pooled {
            question_id: "a".into(),
            priority: 1.0,
        });
        p.publish(1.0, parsed("b"));
        let seqs: Vec<(Topic, u64)> =
            std::iter::from_fn(|| p.poll()).map(|m| (m.topic, m.seq)).collect();
        assert_eq!(
            seqs,
            vec![(Topic::Parsed, 1), (Topic::Pooled, 1), (Topic::Parsed, 2)]
        );
    }

    #[test]
    fn recorder_drops_redeliveries() {
        let mut p = Publisher::new(Box::new(RedeliveringBus::new(1)));
        p.publish(0.0, parsed("a"));
        p.publish(0.0, parsed("b"));
        let mut rec = TraceRecorder::default();
        let mut delivered = 0;
        while let Some(m) = p.poll() {
            delivered += 1;
            rec.consume(m);
        }
        assert_eq!(delivered, 4);
        assert_eq!(rec.into_messages().len(), 2);
    }

    #[test]
    fn message_json_is_tagged() {
        let m = BusMessage {
            topic: Topic::Parsed,
            seq: 1,
            t: 0.0,
            payload: parsed("a"),
        };
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains(r#""topic":"parsed""#));
        assert!(json.contains(r#""event":"parsed""#));
        let back: BusMessage = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
