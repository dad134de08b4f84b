use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::TraceError;
use crate::metrics::{evaluate, LatencyRule, MetricsResult};
use crate::question::QuestionId;

use super::bus::{BusMessage, Event};
use super::AnswerRecord;

const TOLERANCE: f64 = 1e-9;

/// Every bus message of one run, once each, in publication order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeTrace {
    pub messages: Vec<BusMessage>,
}

impl EpisodeTrace {
    /// One JSON object per line, newline terminated.
    pub fn to_jsonl(&self) -> String {
        let mut out = Vec::new();
        self.write_jsonl(&mut out).expect("writing to a Vec cannot fail");
        String::from_utf8(out).expect("serde_json emits UTF-8")
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        for m in &self.messages {
            serde_json::to_writer(&mut w, m)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TraceError> {
        Self::read_jsonl(text.as_bytes())
    }

    /// Blank lines are skipped.
    pub fn read_jsonl(r: impl BufRead) -> Result<Self, TraceError> {
        let mut messages = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let msg = serde_json::from_str(&line)
                .map_err(|source| TraceError::Parse { line: i + 1, source })?;
            messages.push(msg);
        }
        Ok(Self { messages })
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.messages.iter().map(|m| &m.payload)
    }

    pub fn scenario_id(&self) -> Option<&str> {
        self.events().find_map(|e| match e {
            Event::ScenarioStarted { scenario_id, .. } => Some(scenario_id.as_str()),
            _ => None,
        })
    }

    /// Answer records in answer order.
    pub fn answer_records(&self) -> Vec<AnswerRecord> {
        self.events()
            .filter_map(|e| match e {
                Event::Answered(r) => Some(r.clone()),
                _ => None,
            })
            .collect()
    }

    /// Selected question ids in selection order.
    pub fn selections(&self) -> Vec<QuestionId> {
        self.events()
            .filter_map(|e| match e {
                Event::Selected { question_id, .. } => Some(question_id.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn stored_metrics(&self) -> Option<&MetricsResult> {
        self.events().find_map(|e| match e {
            Event::ScenarioFinished { metrics, .. } => Some(metrics),
            _ => None,
        })
    }

    /// Rule the stored metrics were computed under.
    pub fn latency_rule(&self) -> LatencyRule {
        self.events()
            .find_map(|e| match e {
                Event::ScenarioFinished { latency_rule, .. } => Some(*latency_rule),
                _ => None,
            })
            .unwrap_or_default()
    }
}

/// Recomputes the metrics from the trace's answer records and cross-checks
/// the records against the step and selection events. Returns the
/// recomputed metrics and one message per mismatch.
pub fn verify_trace(trace: &EpisodeTrace) -> (Option<MetricsResult>, Vec<String>) {
    let mut problems = Vec::new();
    let records = trace.answer_records();

    let mut steps: BTreeMap<&QuestionId, u32> = BTreeMap::new();
    let mut starts: BTreeMap<&QuestionId, f64> = BTreeMap::new();
    let mut last_t = f64::NEG_INFINITY;
    for m in &trace.messages {
        if m.t < last_t {
            problems.push(format!("time goes backwards at {:?} seq {}", m.topic, m.seq));
        }
        last_t = last_t.max(m.t);
        match &m.payload {
            Event::StepTaken(s) => *steps.entry(&s.question_id).or_default() += 1,
            Event::Selected { question_id, .. } => {
                starts.insert(question_id, m.t);
            }
            _ => {}
        }
    }
    let mut seen = BTreeMap::new();
    for r in &records {
        if seen.insert(&r.question_id, ()).is_some() {
            problems.push(format!("{} answered twice", r.question_id));
        }
        let counted = steps.get(&r.question_id).copied().unwrap_or(0);
        if counted != r.used_steps {
            problems.push(format!(
                "{}: record says {} steps, trace has {counted}",
                r.question_id, r.used_steps
            ));
        }
        if r.direct != (r.used_steps == 0 && !r.timed_out) {
            problems.push(format!("{}: direct flag disagrees with steps", r.question_id));
        }
        if let Some(start) = r.start_time {
            if starts.get(&r.question_id) != Some(&start) {
                problems.push(format!("{}: start time not a selection time", r.question_id));
            }
        }
    }

    let recomputed = match evaluate(&records, trace.latency_rule()) {
        Ok(m) => Some(m),
        Err(e) => {
            problems.push(format!("metrics cannot be recomputed: {e}"));
            None
        }
    };
    match (trace.stored_metrics(), &recomputed) {
        (None, _) => problems.push("trace has no stored metrics".into()),
        (Some(stored), Some(fresh)) => {
            for (name, a, b) in [
                ("acc", stored.acc, fresh.acc),
                ("dar", stored.dar, fresh.dar),
                ("ns", stored.ns, fresh.ns),
                ("nuwl", stored.nuwl, fresh.nuwl),
            ] {
                if (a - b).abs() > TOLERANCE {
                    problems.push(format!("{name}: stored {a}, recomputed {b}"));
                }
            }
        }
        (Some(_), None) => {}
    }
    (recomputed, problems)
}
