//! Turns remembered sightings into a multiple-choice answer.

use std::collections::{BTreeMap, BTreeSet};

use crate::memory::GroupMemory;
use crate::question::{Label, QueryKind, Question, DUMMY_OPTION};

/// Value the memory supports for `question`, if it supports one.
pub fn derive_value(question: &Question, memory: &GroupMemory) -> Option<String> {
    let query = &question.query;
    let evidence = memory.evidence(query);
    match query.kind {
        QueryKind::Existence => {
            if !evidence.is_empty() {
                Some("yes".into())
            } else if memory.coverage(query).unwrap_or(0.0) >= 1.0 {
                Some("no".into())
            } else {
                None
            }
        }
        QueryKind::Counting => {
            let ids: BTreeSet<&str> = evidence
                .iter()
                .map(|e| e.sighting.object_id.as_str())
                .collect();
            Some(ids.len().to_string())
        }
        QueryKind::State | QueryKind::Identification => {
            let attr = query.attribute.as_deref()?;
            // Evidence is most recent first; `first_seen` is the recency rank.
            let mut votes: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
            for (rank, e) in evidence.iter().enumerate() {
                let Some(v) = e.sighting.attributes.get(attr) else {
                    continue;
                };
                if question.label_of(v).is_none() || v == DUMMY_OPTION {
                    continue;
                }
                let entry = votes.entry(v.as_str()).or_insert((0, rank));
                entry.0 += 1;
            }
            votes
                .into_iter()
                .max_by(|(_, (na, ra)), (_, (nb, rb))| na.cmp(nb).then(rb.cmp(ra)))
                .map(|(v, _)| v.to_string())
        }
        QueryKind::Location => {
            let latest = evidence.first()?;
            let room = memory.meta().room_of(latest.sighting.cell)?;
            memory.meta().room(room).map(|r| r.label.clone())
        }
    }
}

/// Always yields a label. Without usable evidence the first non-dummy
/// option is chosen.
pub fn answer_question(question: &Question, memory: &GroupMemory) -> Label {
    derive_value(question, memory)
        .and_then(|v| question.label_of(&v))
        .filter(|l| question.option(*l) != DUMMY_OPTION)
        .unwrap_or_else(|| question.first_real_option())
}
