//! Priority score components.
//!
//! `P = w_u * urgency + w_s * scope + w_r * reward + w_d * dependency`, with
//! urgency `-ln(1 - u)`, scope 1 for local questions, reward the number of
//! co-located unanswered questions and dependency 1 when every prerequisite
//! is answered.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::PoolError;
use crate::question::{QuestionId, ScopeType};
use crate::scene::Cell;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorityWeights {
    pub w_u: f64,
    pub w_s: f64,
    pub w_r: f64,
    pub w_d: f64,
}

impl Default for PriorityWeights {
    fn default() -> Self {
        Self {
            w_u: 1.0,
            w_s: 1.0,
            w_r: 1.0,
            w_d: 1.0,
        }
    }
}

impl PriorityWeights {
    pub const ZERO: PriorityWeights = PriorityWeights {
        w_u: 0.0,
        w_s: 0.0,
        w_r: 0.0,
        w_d: 0.0,
    };

    pub fn is_valid(&self) -> bool {
        [self.w_u, self.w_s, self.w_r, self.w_d]
            .iter()
            .all(|w| w.is_finite() && *w >= 0.0)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            w_u: self.w_u * k,
            w_s: self.w_s * k,
            w_r: self.w_r * k,
            w_d: self.w_d * k,
        }
    }
}

/// `-ln(1 - u)`.
pub fn urgency_component(u_est: f64) -> Result<f64, PoolError> {
    if !(0.0..1.0).contains(&u_est) {
        return Err(PoolError::UrgencyDomain(u_est));
    }
    Ok(-(-u_est).ln_1p())
}

pub fn scope_component(scope: ScopeType) -> f64 {
    match scope {
        ScopeType::Local => 1.0,
        ScopeType::Global => 0.0,
    }
}

/// Where a question points: its named room and any sighted target instances.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Targets {
    pub room: Option<String>,
    pub anchors: Vec<Cell>,
}

impl Targets {
    /// Same named room, or some pair of target instances within `radius`.
    pub fn co_located(&self, other: &Targets, radius: i32) -> bool {
        if self.room.is_some() && self.room == other.room {
            return true;
        }
        self.anchors
            .iter()
            .any(|a| other.anchors.iter().any(|b| a.chebyshev(*b) <= radius))
    }
}

/// Number of `others` co-located with `target`. `others` must exclude the
/// question itself.
pub fn reward_component<'a>(
    target: &Targets,
    others: impl IntoIterator<Item = &'a Targets>,
    radius: i32,
) -> u32 {
    others
        .into_iter()
        .filter(|o| target.co_located(o, radius))
        .count() as u32
}

/// 1 when every dependency is answered, else 0.
pub fn dependency_component<'a>(
    deps: impl IntoIterator<Item = &'a QuestionId>,
    answered: &BTreeSet<QuestionId>,
) -> f64 {
    if deps.into_iter().all(|d| answered.contains(d)) {
        1.0
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Components {
    pub urgency: f64,
    pub scope: f64,
    pub reward: u32,
    pub dependency: f64,
}

pub fn priority(c: &Components, w: &PriorityWeights) -> f64 {
    w.w_u * c.urgency + w.w_s * c.scope + w.w_r * f64::from(c.reward) + w.w_d * c.dependency
}
