//! Episode metrics: accuracy, direct-answer rate, normalized steps and
//! normalized urgency-weighted latency (NUWL).
//!
//! For question `i` with urgency `u_i` and normalized steps `ns_i`:
//!
//! ```text
//! latency_i = sum(ns_j for j with start_j < req_i) + ns_i
//! NUWL      = (1/|Q|) * sum(u_i * latency_i)
//! ```
//!
//! The inequality is strict. Questions that never started exploring have
//! `ns = 0` and contribute nothing to anyone's latency.

use serde::{Deserialize, Serialize};

use crate::error::MetricsError;
use crate::memory::MemoryRecord;
use crate::orchestrator::AnswerRecord;
use crate::question::QuestionId;

/// Which earlier explorations count toward a question's latency.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyRule {
    /// Explorations started strictly before the question was requested.
    #[default]
    Strict,
    /// Explorations started strictly before the question's own start (its
    /// answer time when it never started). Counts the time spent queued.
    BeforeStart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionMetrics {
    pub question_id: QuestionId,
    pub ns: f64,
    pub latency: f64,
    pub weighted_latency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsResult {
    pub acc: f64,
    pub dar: f64,
    pub ns: f64,
    pub nuwl: f64,
    pub per_question: Vec<QuestionMetrics>,
}

fn non_empty(records: &[AnswerRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        Err(MetricsError::Undefined)
    } else {
        Ok(records.len() as f64)
    }
}

pub fn accuracy(records: &[AnswerRecord]) -> Result<f64, MetricsError> {
    let n = non_empty(records)?;
    Ok(records.iter().filter(|r| r.correct).count() as f64 / n)
}

pub fn direct_answer_rate(records: &[AnswerRecord]) -> Result<f64, MetricsError> {
    let n = non_empty(records)?;
    Ok(records.iter().filter(|r| r.direct).count() as f64 / n)
}

/// `used_steps / max_steps`; 0 for direct answers.
pub fn question_ns(r: &AnswerRecord) -> Result<f64, MetricsError> {
    if r.max_steps == 0 {
        return Err(MetricsError::ZeroBudget(r.question_id.clone()));
    }
    if r.direct {
        return Ok(0.0);
    }
    Ok(f64::from(r.used_steps) / f64::from(r.max_steps))
}

pub fn normalized_steps(records: &[AnswerRecord]) -> Result<f64, MetricsError> {
    let n = non_empty(records)?;
    let mut sum = 0.0;
    for r in records {
        sum += question_ns(r)?;
    }
    Ok(sum / n)
}

/// Per-question latency under `rule`, in record order.
pub fn latencies(records: &[AnswerRecord], rule: LatencyRule) -> Result<Vec<f64>, MetricsError> {
    let ns: Vec<f64> = records.iter().map(question_ns).collect::<Result<_, _>>()?;
    let mut starts: Vec<(f64, f64)> = Vec::new();
    for (r, &n) in records.iter().zip(&ns) {
        match r.start_time {
            Some(s) => starts.push((s, n)),
            None if r.used_steps > 0 => {
                return Err(MetricsError::MissingStart(r.question_id.clone()))
            }
            None => {}
        }
    }
    starts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut prefix = Vec::with_capacity(starts.len() + 1);
    prefix.push(0.0);
    for &(_, n) in &starts {
        prefix.push(prefix.last().copied().unwrap_or(0.0) + n);
    }
    Ok(records
        .iter()
        .zip(&ns)
        .map(|(r, &n)| {
            let cutoff = match rule {
                LatencyRule::Strict => r.request_time,
                LatencyRule::BeforeStart => r.start_time.unwrap_or(r.answer_time),
            };
            let before = starts.partition_point(|&(s, _)| s < cutoff);
            prefix[before] + n
        })
        .collect())
}

pub fn nuwl(records: &[AnswerRecord], rule: LatencyRule) -> Result<f64, MetricsError> {
    let n = non_empty(records)?;
    let lat = latencies(records, rule)?;
    Ok(records
        .iter()
        .zip(lat)
        .map(|(r, l)| r.urgency_true * l)
        .sum::<f64>()
        / n)
}

pub fn evaluate(records: &[AnswerRecord], rule: LatencyRule) -> Result<MetricsResult, MetricsError> {
    let lat = latencies(records, rule)?;
    let per_question = records
        .iter()
        .zip(lat)
        .map(|(r, latency)| {
            Ok(QuestionMetrics {
                question_id: r.question_id.clone(),
                ns: question_ns(r)?,
                latency,
                weighted_latency: r.urgency_true * latency,
            })
        })
        .collect::<Result<Vec<_>, MetricsError>>()?;
    Ok(MetricsResult {
        acc: accuracy(records)?,
        dar: direct_answer_rate(records)?,
        ns: normalized_steps(records)?,
        nuwl: nuwl(records, rule)?,
        per_question,
    })
}

/// Unweighted mean of each metric across scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub acc: f64,
    pub dar: f64,
    pub ns: f64,
    pub nuwl: f64,
    pub scenarios: usize,
}

pub fn aggregate(results: &[MetricsResult]) -> Result<Aggregate, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::Undefined);
    }
    let n = results.len() as f64;
    let mean = |f: fn(&MetricsResult) -> f64| results.iter().map(f).sum::<f64>() / n;
    Ok(Aggregate {
        acc: mean(|r| r.acc),
        dar: mean(|r| r.dar),
        ns: mean(|r| r.ns),
        nuwl: mean(|r| r.nuwl),
        scenarios: results.len(),
    })
}

/// Direct answers whose question nonetheless produced observations.
pub fn audit_direct_answers(
    records: &[AnswerRecord],
    memory: &[MemoryRecord],
) -> Vec<QuestionId> {
    records
        .iter()
        .filter(|r| r.direct)
        .filter(|r| {
            memory
                .iter()
                .any(|m| m.source_question.as_ref() == Some(&r.question_id))
        })
        .map(|r| r.question_id.clone())
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::question::Label;

    pub(crate) fn record(id: &str, u: f64, used: u32, req: f64, start: Option<f64>) -> AnswerRecord {
        AnswerRecord {
            question_id: id.into(),
            predicted: Label::A,
            correct: true,
            direct: used == 0 && start.is_none(),
            used_steps: used,
            max_steps: 40,
            urgency_true: u,
            request_time: req,
            start_time: start,
            answer_time: start.unwrap_or(req) + f64::from(used),
            timed_out: false,
        }
    }

    /// Straight transcription of the definition: a double loop.
    fn nuwl_oracle(records: &[AnswerRecord]) -> f64 {
        let ns = |r: &AnswerRecord| {
            if r.direct {
                0.0
            } else {
                r.used_steps as f64 / r.max_steps as f64
            }
        };
        let mut total = 0.0;
        for i in records {
            let mut inner = 0.0;
            for j in records {
                if let Some(s) = j.start_time {
                    if s < i.request_time {
                        inner += ns(j);
                    }
                }
            }
            total += i.urgency_true * (inner + ns(i));
        }
        total / records.len() as f64
    }

    #[test]
    fn accuracy_and_dar_arithmetic() {
        let mut rs: Vec<AnswerRecord> = (0..5)
            .map(|i| record(&format!("q{i}"), 0.5, 4, 0.0, Some(0.0)))
            .collect();
        assert_eq!(accuracy(&rs).unwrap(), 1.0);
        assert_eq!(direct_answer_rate(&rs).unwrap(), 0.0);
        rs[0].correct = false;
        rs[1].correct = false;
        assert_eq!(accuracy(&rs).unwrap(), 0.6);
        for r in &mut rs[..2] {
            r.direct = true;
            r.used_steps = 0;
            r.start_time = None;
        }
        assert_eq!(direct_answer_rate(&rs).unwrap(), 0.4);
        assert_eq!(accuracy(&[]), Err(MetricsError::Undefined));
        assert_eq!(direct_answer_rate(&[]), Err(MetricsError::Undefined));
    }

    #[test]
    fn normalized_steps_examples() {
        let all_direct: Vec<AnswerRecord> =
            (0..3).map(|i| record(&format!("q{i}"), 0.5, 0, 0.0, None)).collect();
        assert_eq!(normalized_steps(&all_direct).unwrap(), 0.0);
        assert_eq!(question_ns(&record("a", 0.5, 20, 0.0, Some(0.0))).unwrap(), 0.5);
        let mixed = vec![
            record("a", 0.5, 0, 0.0, None),
            record("b", 0.5, 20, 0.0, Some(0.0)),
            record("c", 0.5, 40, 0.0, Some(20.0)),
        ];
        assert_eq!(normalized_steps(&mixed).unwrap(), 0.5);
        let mut zero = record("z", 0.5, 0, 0.0, None);
        zero.max_steps = 0;
        assert_eq!(normalized_steps(&[zero]), Err(MetricsError::ZeroBudget("z".into())));
    }

    #[test]
    fn nuwl_single_question() {
        let r = record("q1", 0.8, 10, 0.0, Some(0.0));
        assert!((nuwl(&[r], LatencyRule::Strict).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn nuwl_two_question_hand_trace() {
        let rs = vec![
            record("q1", 0.8, 10, 0.0, Some(0.0)),
            record("q2", 0.2, 20, 120.0, Some(130.0)),
        ];
        // (0.8 * 0.25 + 0.2 * (0.25 + 0.5)) / 2
        assert!((nuwl(&rs, LatencyRule::Strict).unwrap() - 0.175).abs() < 1e-12);
    }

    #[test]
    fn nuwl_is_zero_without_steps() {
        let rs: Vec<AnswerRecord> =
            (0..4).map(|i| record(&format!("q{i}"), 0.9, 0, 0.0, None)).collect();
        assert_eq!(nuwl(&rs, LatencyRule::Strict).unwrap(), 0.0);
    }

    #[test]
    fn explored_without_start_is_corrupt() {
        let mut r = record("q", 0.5, 5, 0.0, Some(0.0));
        r.start_time = None;
        assert_eq!(
            nuwl(&[r], LatencyRule::Strict),
            Err(MetricsError::MissingStart("q".into()))
        );
    }

    #[test]
    fn before_start_rule_counts_queueing() {
        // q2 arrives with q1 but waits for it; only the queueing rule sees that.
        let rs = vec![
            record("q1", 0.5, 20, 0.0, Some(0.0)),
            record("q2", 0.5, 20, 0.0, Some(20.0)),
        ];
        let strict = latencies(&rs, LatencyRule::Strict).unwrap();
        let queued = latencies(&rs, LatencyRule::BeforeStart).unwrap();
        assert_eq!(strict, vec![0.5, 0.5]);
        assert_eq!(queued, vec![0.5, 1.0]);
    }

    #[test]
    fn aggregate_means() {
        let base = MetricsResult {
            acc: 1.0,
            dar: 0.2,
            ns: 0.2,
            nuwl: 0.1,
            per_question: vec![],
        };
        let other = MetricsResult {
            ns: 0.4,
            ..base.clone()
        };
        let a = aggregate(&[base.clone(), other]).unwrap();
        assert!((a.ns - 0.3).abs() < 1e-12);
        let same = aggregate(&[base.clone(), base.clone()]).unwrap();
        assert_eq!((same.acc, same.dar, same.nuwl), (1.0, 0.2, 0.1));
        assert_eq!(aggregate(&[]), Err(MetricsError::Undefined));
    }

    fn arb_records() -> impl Strategy<Value = Vec<AnswerRecord>> {
        prop::collection::vec(
            (0.01f64..0.99, 0u32..=40, 0u32..4, prop::option::of(0u32..400)),
            1..12,
        )
        .prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (u, used, slot, start))| {
                    let req = f64::from(slot) * 120.0;
                    let start = start.map(|s| req + f64::from(s));
                    let used = if start.is_none() { 0 } else { used };
                    record(&format!("q{i}"), u, used, req, start)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn nuwl_matches_double_loop(rs in arb_records()) {
            let fast = nuwl(&rs, LatencyRule::Strict).unwrap();
            prop_assert!((fast - nuwl_oracle(&rs)).abs() < 1e-9);
        }

        #[test]
        fn nuwl_monotone_in_each_ns(rs in arb_records(), pick in any::<prop::sample::Index>()) {
            let j = pick.index(rs.len());
            prop_assume!(rs[j].start_time.is_some() && rs[j].used_steps < 40);
            let mut more = rs.clone();
            more[j].used_steps += 1;
            let a = nuwl(&rs, LatencyRule::Strict).unwrap();
            let b = nuwl(&more, LatencyRule::Strict).unwrap();
            prop_assert!(b >= a - 1e-12);
        }

        #[test]
        fn zero_urgency_removes_exactly_its_term(rs in arb_records(), pick in any::<prop::sample::Index>()) {
            let i = pick.index(rs.len());
            let before = evaluate(&rs, LatencyRule::Strict).unwrap();
            let mut zeroed = rs.clone();
            zeroed[i].urgency_true = 0.0;
            let after = nuwl(&zeroed, LatencyRule::Strict).unwrap();
            let term = before.per_question[i].weighted_latency / rs.len() as f64;
            prop_assert!((before.nuwl - term - after).abs() < 1e-9);
        }
    }
}
