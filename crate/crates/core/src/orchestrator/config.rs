//! Run configuration: pipeline mode, priority weights, thresholds and
//! ablations. Baselines and ablations are all expressed here so that one
//! engine runs every variant.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::RunError;
use crate::explorer::{ExplorerConfig, StepBudget};
use crate::metrics::LatencyRule;
use crate::pool::{PoolConfig, PriorityWeights};
use crate::question::ParserRules;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Finishing gate, persistent memory, priority scheduling.
    #[default]
    Paraeqsa,
    /// FIFO, no gate, memory cleared before every question.
    SeqNomem,
    /// FIFO, no gate, memory kept for the whole scenario.
    SeqMem,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Paraeqsa, Mode::SeqNomem, Mode::SeqMem];

    pub fn is_sequential(self) -> bool {
        self != Mode::Paraeqsa
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Paraeqsa => "paraeqsa",
            Mode::SeqNomem => "seq_nomem",
            Mode::SeqMem => "seq_mem",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// FIFO selection; memory and gate stay active.
    NoPriority,
    NoUrgency,
    NoScope,
    NoReward,
    NoDependency,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [
        Ablation::NoPriority,
        Ablation::NoUrgency,
        Ablation::NoScope,
        Ablation::NoReward,
        Ablation::NoDependency,
    ];
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ablation::NoPriority => "no_priority",
            Ablation::NoUrgency => "no_urgency",
            Ablation::NoScope => "no_scope",
            Ablation::NoReward => "no_reward",
            Ablation::NoDependency => "no_dependency",
        })
    }
}

impl std::str::FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.to_string() == s)
            .ok_or_else(|| format!("unknown ablation `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub weights: PriorityWeights,
    pub finishing_threshold: f64,
    pub stop_threshold: f64,
    pub budget: StepBudget,
    pub ablations: BTreeSet<Ablation>,
    pub seed: u64,
    /// Chebyshev view radius in cells.
    pub view_range: u32,
    pub noise_rate: f64,
    /// Steps between stopping checks.
    pub check_interval: u32,
    pub reward_radius: i32,
    pub distance_scale: f64,
    /// Never select entries with unanswered dependencies.
    pub strict_gating: bool,
    pub parser: ParserRules,
    /// Latency rule for the stored metrics.
    pub latency_rule: LatencyRule,
}

impl Default for RunConfig {
    fn default() -> Self {
        let explorer = ExplorerConfig::default();
        let pool = PoolConfig::default();
        Self {
            mode: Mode::Paraeqsa,
            weights: PriorityWeights::default(),
            finishing_threshold: 0.8,
            stop_threshold: explorer.stop_threshold,
            budget: StepBudget::default(),
            ablations: BTreeSet::new(),
            seed: 0,
            view_range: explorer.view_range,
            noise_rate: explorer.noise_rate,
            check_interval: explorer.check_interval,
            reward_radius: pool.reward_radius,
            distance_scale: explorer.distance_scale,
            strict_gating: pool.strict_gating,
            parser: ParserRules::default(),
            latency_rule: LatencyRule::Strict,
        }
    }
}

impl RunConfig {
    pub fn with_mode(mode: Mode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn with_ablation(mut self, a: Ablation) -> Self {
        self.ablations.insert(a);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Short name such as `paraeqsa` or `paraeqsa+no_urgency`.
    pub fn label(&self) -> String {
        let mut s = self.mode.to_string();
        for a in &self.ablations {
            s.push('+');
            s.push_str(&a.to_string());
        }
        s
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::InvalidConfig(m));
        if !self.weights.is_valid() {
            return bad(format!("weights must be finite and non-negative: {:?}", self.weights));
        }
        for (name, v) in [
            ("finishing_threshold", self.finishing_threshold),
            ("stop_threshold", self.stop_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} {v} outside [0, 1]"));
            }
        }
        if self.budget.max_steps_per_question == 0 || self.budget.step_duration.is_nan() || self.budget.step_duration <= 0.0 {
            return bad("step budget and step duration must be positive".into());
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return bad(format!("noise_rate {} outside [0, 1)", self.noise_rate));
        }
        if self.view_range == 0 {
            return bad("view_range must be at least 1".into());
        }
        if self.check_interval == 0 {
            return bad("check_interval must be at least 1".into());
        }
        if self.reward_radius < 0 || self.distance_scale.is_nan() || self.distance_scale <= 0.0 {
            return bad("reward_radius must be >= 0 and distance_scale > 0".into());
        }
        for (name, u) in [
            ("safety", self.parser.safety),
            ("functional", self.parser.functional),
            ("general", self.parser.general),
        ] {
            if !(u > 0.0 && u < 1.0) {
                return bad(format!("parser urgency `{name}` {u} outside (0, 1)"));
            }
        }
        Ok(())
    }

    /// Weights after applying mode and ablations. FIFO variants get all
    /// zeros, which reduces selection to request order.
    pub fn effective_weights(&self) -> PriorityWeights {
        if self.mode.is_sequential() || self.ablations.contains(&Ablation::NoPriority) {
            return PriorityWeights::ZERO;
        }
        let mut w = self.weights;
        for a in &self.ablations {
            match a {
                Ablation::NoUrgency => w.w_u = 0.0,
                Ablation::NoScope => w.w_s = 0.0,
                Ablation::NoReward => w.w_r = 0.0,
                Ablation::NoDependency => w.w_d = 0.0,
                Ablation::NoPriority => {}
            }
        }
        w
    }

    pub fn gate_enabled(&self) -> bool {
        !self.mode.is_sequential()
    }

    pub fn clears_memory_per_question(&self) -> bool {
        self.mode == Mode::SeqNomem
    }

    pub fn pool_config(&self) -> PoolConfig {
        PoolConfig {
            weights: self.effective_weights(),
            reward_radius: self.reward_radius,
            strict_gating: self.strict_gating,
        }
    }

    pub fn explorer_config(&self) -> ExplorerConfig {
        ExplorerConfig {
            view_range: self.view_range,
            noise_rate: self.noise_rate,
            distance_scale: self.distance_scale,
            check_interval: self.check_interval,
            stop_threshold: self.stop_threshold,
            budget: self.budget,
        }
    }
}
