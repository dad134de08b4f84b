//! Questions, scenarios and the rule-based parser.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ScenarioError, SceneError};
use crate::scene::{ground_truth_answer, GridScene, Pose};

/// Filler used when a question has fewer than four real options.
pub const DUMMY_OPTION: &str = "(Do not choose this option)";

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuestionId(pub String);

impl QuestionId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for QuestionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for QuestionId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

/// Multiple-choice answer label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    A,
    B,
    C,
    D,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::A, Label::B, Label::C, Label::D];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Existence,
    Counting,
    State,
    Identification,
    Location,
}

impl QueryKind {
    pub const ALL: [QueryKind; 5] = [
        QueryKind::Existence,
        QueryKind::Counting,
        QueryKind::State,
        QueryKind::Identification,
        QueryKind::Location,
    ];
}

/// Machine-readable form of a question.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub kind: QueryKind,
    pub category: String,
    /// Room id; `None` means the whole scene.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub question_id: QuestionId,
    pub text: String,
    pub query: Query,
    pub options: [String; 4],
    pub ground_truth: Label,
    /// Dataset urgency. Evaluation only; the agent never reads it.
    pub urgency_true: f64,
    pub arrival_time: f64,
    #[serde(default)]
    pub safety_flag: bool,
    #[serde(default)]
    pub functional_flag: bool,
    #[serde(default)]
    pub declared_deps: Vec<QuestionId>,
}

impl Question {
    pub fn option(&self, label: Label) -> &str {
        &self.options[label.index()]
    }

    /// Label whose option text equals `value`.
    pub fn label_of(&self, value: &str) -> Option<Label> {
        self.options
            .iter()
            .position(|o| o == value)
            .and_then(Label::from_index)
    }

    /// First option that is not a dummy filler.
    pub fn first_real_option(&self) -> Label {
        self.options
            .iter()
            .position(|o| o != DUMMY_OPTION)
            .and_then(Label::from_index)
            .unwrap_or(Label::A)
    }
}

/// Pads `values` with dummies up to four options.
pub fn pad_options(values: &[String]) -> [String; 4] {
    std::array::from_fn(|i| {
        values
            .get(i)
            .cloned()
            .unwrap_or_else(|| DUMMY_OPTION.to_string())
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub scenario_id: String,
    pub scene: Arc<GridScene>,
    pub max_time: f64,
    pub initial_pose: Pose,
    pub initial_questions: Vec<Question>,
    pub followup_questions: Vec<Question>,
}

impl Scenario {
    pub fn questions(&self) -> impl Iterator<Item = &Question> {
        self.initial_questions
            .iter()
            .chain(self.followup_questions.iter())
    }

    pub fn question(&self, id: &QuestionId) -> Option<&Question> {
        self.questions().find(|q| &q.question_id == id)
    }

    pub fn question_count(&self) -> usize {
        self.initial_questions.len() + self.followup_questions.len()
    }

    /// Parses a scenario. A scene given as a string is a path resolved
    /// against `base_dir`.
    pub fn from_json(json: &str, base_dir: Option<&Path>) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(json)?;
        let scene = match file.scene {
            SceneSource::Inline(scene) => scene,
            SceneSource::File(rel) => {
                let path = base_dir.map(|d| d.join(&rel)).unwrap_or_else(|| rel.into());
                let text = std::fs::read_to_string(&path).map_err(|source| ScenarioError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                serde_json::from_str(&text)?
            }
        };
        let mut initial_questions = Vec::new();
        let mut followup_questions = Vec::new();
        for entry in file.questions {
            match entry.role {
                Role::Initial => initial_questions.push(entry.question),
                Role::Followup => followup_questions.push(entry.question),
            }
        }
        Ok(Scenario {
            scenario_id: file.scenario_id,
            scene: Arc::new(scene),
            max_time: file.max_time,
            initial_pose: file.initial_pose,
            initial_questions,
            followup_questions,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text, path.parent())
    }

    /// Pretty JSON with the scene inlined.
    pub fn to_json(&self) -> String {
        let questions = self
            .initial_questions
            .iter()
            .map(|q| (q, Role::Initial))
            .chain(self.followup_questions.iter().map(|q| (q, Role::Followup)))
            .map(|(q, role)| QuestionEntry {
                question: q.clone(),
                role,
            })
            .collect();
        let file = ScenarioFile {
            scenario_id: self.scenario_id.clone(),
            scene: SceneSource::Inline(self.scene.as_ref().clone()),
            max_time: self.max_time,
            initial_pose: self.initial_pose,
            questions,
        };
        serde_json::to_string_pretty(&file).expect("scenario serializes")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Role {
    Initial,
    Followup,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SceneSource {
    File(String),
    Inline(GridScene),
}

#[derive(Serialize, Deserialize)]
struct QuestionEntry {
    #[serde(flatten)]
    question: Question,
    role: Role,
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    scenario_id: String,
    scene: SceneSource,
    max_time: f64,
    initial_pose: Pose,
    questions: Vec<QuestionEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScopeType {
    Local,
    Global,
}

/// Urgency estimates per question class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParserRules {
    pub safety: f64,
    pub functional: f64,
    pub general: f64,
}

impl Default for ParserRules {
    fn default() -> Self {
        Self {
            safety: 0.8,
            functional: 0.5,
            general: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParsedQuestion {
    pub question: Question,
    pub urgency_est: f64,
    pub scope: ScopeType,
}

impl ParsedQuestion {
    pub fn id(&self) -> &QuestionId {
        &self.question.question_id
    }

    pub fn query(&self) -> &Query {
        &self.question.query
    }
}

/// Annotates a question with its urgency estimate and scope.
///
/// Only content-derived flags are consulted; `urgency_true` is never read.
pub fn parse_question(q: &Question, rules: &ParserRules) -> ParsedQuestion {
    let urgency_est = if q.safety_flag {
        rules.safety
    } else if q.functional_flag {
        rules.functional
    } else {
        rules.general
    };
    let scope = if q.query.room.is_some() {
        ScopeType::Local
    } else {
        ScopeType::Global
    };
    ParsedQuestion {
        question: q.clone(),
        urgency_est,
        scope,
    }
}

/// Source of dependency edges between questions.
pub trait DependencyInference {
    fn dependencies(&self, question: &Question) -> Vec<QuestionId>;
}

/// Uses the dependencies declared in the data.
#[derive(Clone, Copy, Debug, Default)]
pub struct DeclaredDependencies;

impl DependencyInference for DeclaredDependencies {
    fn dependencies(&self, question: &Question) -> Vec<QuestionId> {
        question.declared_deps.clone()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NonPositiveMaxTime(f64),
    InvalidInitialPose(String),
    DuplicateId(QuestionId),
    InitialArrivalNotZero(QuestionId, f64),
    FollowupArrivalNotPositive(QuestionId, f64),
    ArrivalAfterMaxTime(QuestionId, f64),
    UrgencyOutOfRange(QuestionId, f64),
    UnknownDependency(QuestionId, QuestionId),
    SelfDependency(QuestionId),
    GroundTruthIsDummy(QuestionId),
    GroundTruthMismatch {
        question: QuestionId,
        stored: Label,
        oracle: Label,
    },
    OracleFailure(QuestionId, SceneError),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveMaxTime(t) => write!(f, "max_time {t} must be positive"),
            Violation::InvalidInitialPose(e) => write!(f, "initial pose: {e}"),
            Violation::DuplicateId(q) => write!(f, "duplicate question id {q}"),
            Violation::InitialArrivalNotZero(q, t) => {
                write!(f, "initial question {q} arrives at {t}, expected 0")
            }
            Violation::FollowupArrivalNotPositive(q, t) => {
                write!(f, "follow-up {q} arrives at {t}, expected > 0")
            }
            Violation::ArrivalAfterMaxTime(q, t) => {
                write!(f, "question {q} arrives at {t}, after max_time")
            }
            Violation::UrgencyOutOfRange(q, u) => write!(f, "question {q} urgency {u} not in (0, 1)"),
            Violation::UnknownDependency(q, d) => write!(f, "question {q} depends on unknown {d}"),
            Violation::SelfDependency(q) => write!(f, "question {q} depends on itself"),
            Violation::GroundTruthIsDummy(q) => write!(f, "question {q} ground truth is a dummy"),
            Violation::GroundTruthMismatch {
                question,
                stored,
                oracle,
            } => write!(
                f,
                "question {question} stores ground truth {stored}, scene says {oracle}"
            ),
            Violation::OracleFailure(q, e) => write!(f, "question {q}: {e}"),
        }
    }
}

/// Every invariant violation in `s`; empty means valid.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    if s.max_time.is_nan() || s.max_time <= 0.0 {
        out.push(Violation::NonPositiveMaxTime(s.max_time));
    }
    if let Err(e) = s.scene.check_pose(&s.initial_pose) {
        out.push(Violation::InvalidInitialPose(e.to_string()));
    }
    let ids: BTreeSet<&QuestionId> = s.questions().map(|q| &q.question_id).collect();
    let mut seen = BTreeMap::new();
    for q in s.questions() {
        if seen.insert(&q.question_id, ()).is_some() {
            out.push(Violation::DuplicateId(q.question_id.clone()));
        }
    }
    for q in &s.initial_questions {
        if q.arrival_time != 0.0 {
            out.push(Violation::InitialArrivalNotZero(
                q.question_id.clone(),
                q.arrival_time,
            ));
        }
    }
    for q in &s.followup_questions {
        if q.arrival_time.is_nan() || q.arrival_time <= 0.0 {
            out.push(Violation::FollowupArrivalNotPositive(
                q.question_id.clone(),
                q.arrival_time,
            ));
        } else if q.arrival_time >= s.max_time {
            out.push(Violation::ArrivalAfterMaxTime(
                q.question_id.clone(),
                q.arrival_time,
            ));
        }
    }
    for q in s.questions() {
        let id = &q.question_id;
        if !(q.urgency_true > 0.0 && q.urgency_true < 1.0) {
            out.push(Violation::UrgencyOutOfRange(id.clone(), q.urgency_true));
        }
        for d in &q.declared_deps {
            if d == id {
                out.push(Violation::SelfDependency(id.clone()));
            } else if !ids.contains(d) {
                out.push(Violation::UnknownDependency(id.clone(), d.clone()));
            }
        }
        if q.option(q.ground_truth) == DUMMY_OPTION {
            out.push(Violation::GroundTruthIsDummy(id.clone()));
            continue;
        }
        match ground_truth_answer(&s.scene, q) {
            Ok(oracle) if oracle != q.ground_truth => out.push(Violation::GroundTruthMismatch {
                question: id.clone(),
                stored: q.ground_truth,
                oracle,
            }),
            Ok(_) => {}
            Err(e) => out.push(Violation::OracleFailure(id.clone(), e)),
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::scene::{Cell, Heading, ObjectInstance, Room, SceneFile};

    pub(crate) fn kitchen_scene() -> GridScene {
        let kitchen = (0..4)
            .flat_map(|y| (0..4).map(move |x| Cell::new(x, y)))
            .collect();
        let bath = (0..4)
            .flat_map(|y| (5..8).map(move |x| Cell::new(x, y)))
            .collect();
        GridScene::new(SceneFile {
            scene_id: "k".into(),
            width: 8,
            height: 4,
            walls: vec![Cell::new(4, 0), Cell::new(4, 1), Cell::new(4, 3)],
            rooms: vec![
                Room {
                    room_id: "kitchen".into(),
                    label: "kitchen".into(),
                    cells: kitchen,
                },
                Room {
                    room_id: "bath".into(),
                    label: "bathroom".into(),
                    cells: bath,
                },
            ],
            objects: vec![
                ObjectInstance {
                    object_id: "stove1".into(),
                    category: "stove".into(),
                    cell: Cell::new(0, 0),
                    attributes: [("state".to_string(), "on".to_string())].into(),
                },
                ObjectInstance {
                    object_id: "tub1".into(),
                    category: "bathtub".into(),
                    cell: Cell::new(7, 3),
                    attributes: BTreeMap::new(),
                },
            ],
        })
        .unwrap()
    }

    pub(crate) fn question(id: &str, query: Query, options: &[&str], truth: Label) -> Question {
        let opts: Vec<String> = options.iter().map(|s| s.to_string()).collect();
        Question {
            question_id: id.into(),
            text: format!("question {id}"),
            query,
            options: pad_options(&opts),
            ground_truth: truth,
            urgency_true: 0.5,
            arrival_time: 0.0,
            safety_flag: false,
            functional_flag: false,
            declared_deps: vec![],
        }
    }

    pub(crate) fn bathtub_question(id: &str) -> Question {
        question(
            id,
            Query {
                kind: QueryKind::Existence,
                category: "bathtub".into(),
                room: Some("bath".into()),
                attribute: None,
            },
            &["yes", "no"],
            Label::A,
        )
    }

    fn scenario() -> Scenario {
        let mut follow = bathtub_question("q2");
        follow.arrival_time = 120.0;
        Scenario {
            scenario_id: "s".into(),
            scene: Arc::new(kitchen_scene()),
            max_time: 400.0,
            initial_pose: Pose::new(Cell::new(1, 1), Heading::North),
            initial_questions: vec![bathtub_question("q1")],
            followup_questions: vec![follow],
        }
    }

    #[test]
    fn safety_flag_maps_to_high_urgency() {
        let mut q = bathtub_question("q");
        q.safety_flag = true;
        q.functional_flag = true;
        let p = parse_question(&q, &ParserRules::default());
        assert_eq!(p.urgency_est, 0.8);
        q.safety_flag = false;
        assert_eq!(parse_question(&q, &ParserRules::default()).urgency_est, 0.5);
        q.functional_flag = false;
        assert_eq!(parse_question(&q, &ParserRules::default()).urgency_est, 0.2);
    }

    #[test]
    fn parser_ignores_dataset_urgency() {
        let mut a = bathtub_question("q");
        let mut b = a.clone();
        a.urgency_true = 0.01;
        b.urgency_true = 0.99;
        let rules = ParserRules::default();
        assert_eq!(
            parse_question(&a, &rules).urgency_est,
            parse_question(&b, &rules).urgency_est
        );
    }

    #[test]
    fn room_named_question_is_local_location_is_global() {
        let rules = ParserRules::default();
        assert_eq!(parse_question(&bathtub_question("q"), &rules).scope, ScopeType::Local);
        let loc = question(
            "l",
            Query {
                kind: QueryKind::Location,
                category: "stove".into(),
                room: None,
                attribute: None,
            },
            &["kitchen", "bathroom"],
            Label::A,
        );
        assert_eq!(parse_question(&loc, &rules).scope, ScopeType::Global);
    }

    #[test]
    fn parse_is_idempotent() {
        let q = bathtub_question("q");
        let rules = ParserRules::default();
        let once = parse_question(&q, &rules);
        let twice = parse_question(&once.question, &rules);
        assert_eq!(once, twice);
    }

    #[test]
    fn well_formed_scenario_has_no_violations() {
        assert_eq!(validate_scenario(&scenario()), vec![]);
    }

    #[test]
    fn followup_at_time_zero_is_one_violation() {
        let mut s = scenario();
        s.followup_questions[0].arrival_time = 0.0;
        let v = validate_scenario(&s);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::FollowupArrivalNotPositive(..)));
    }

    #[test]
    fn wrong_ground_truth_is_one_violation() {
        let mut s = scenario();
        s.initial_questions[0].ground_truth = Label::B;
        let v = validate_scenario(&s);
        assert_eq!(
            v,
            vec![Violation::GroundTruthMismatch {
                question: "q1".into(),
                stored: Label::B,
                oracle: Label::A,
            }]
        );
    }

    #[test]
    fn scenario_json_round_trip() {
        let s = scenario();
        let json = s.to_json();
        let back = Scenario::from_json(&json, None).unwrap();
        assert_eq!(s, back);
        assert!(json.contains("\"role\": \"followup\""));
    }

    #[test]
    fn scene_can_be_a_file_reference() {
        let dir = std::env::temp_dir().join(format!("eqsa-scene-ref-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let s = scenario();
        std::fs::write(
            dir.join("scene.json"),
            serde_json::to_string(s.scene.as_ref()).unwrap(),
        )
        .unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
        value["scene"] = serde_json::Value::String("scene.json".into());
        let back = Scenario::from_json(&value.to_string(), Some(&dir)).unwrap();
        assert_eq!(back, s);
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn padding_uses_dummy_filler() {
        let opts = pad_options(&["yes".into(), "no".into()]);
        assert_eq!(opts[2], DUMMY_OPTION);
        assert_eq!(opts[3], DUMMY_OPTION);
    }
}
