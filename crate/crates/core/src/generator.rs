//! Seeded procedural scenarios.
//!
//! A scene is a rectangular house split into a grid of rooms by one-cell
//! walls, with one door in every shared wall segment. Questions are built
//! from the placed objects so that the scene oracle always has an answer;
//! the stored ground truth is taken from the oracle itself.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::GenerateError;
use crate::question::{pad_options, Label, Query, QueryKind, Question, QuestionId, Scenario};
use crate::scene::{
    evaluate_query, ground_truth_answer, Cell, GridScene, Heading, ObjectInstance, Pose, Room,
    SceneFile,
};

/// Urgency level of a question.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UrgencyBand {
    Low,
    Medium,
    High,
}

impl UrgencyBand {
    pub const ALL: [UrgencyBand; 3] = [UrgencyBand::Low, UrgencyBand::Medium, UrgencyBand::High];

    /// Band of an urgency value: low `[0, 0.3)`, medium `[0.3, 0.7)`, high `[0.7, 1]`.
    pub fn of(u: f64) -> UrgencyBand {
        if u < 0.3 {
            UrgencyBand::Low
        } else if u < 0.7 {
            UrgencyBand::Medium
        } else {
            UrgencyBand::High
        }
    }

    /// Range `urgency_true` is drawn from. Kept inside `(0, 1)`.
    fn draw_range(self) -> (f64, f64) {
        match self {
            UrgencyBand::Low => (0.02, 0.3),
            UrgencyBand::Medium => (0.3, 0.7),
            UrgencyBand::High => (0.7, 0.98),
        }
    }
}

/// Target share of each urgency band, in [`UrgencyBand::ALL`] order.
pub const BAND_SHARES: [f64; 3] = [0.575, 0.265, 0.16];

/// Target share of each query kind, in [`QueryKind::ALL`] order.
pub const KIND_SHARES: [f64; 5] = [0.345, 0.23, 0.215, 0.145, 0.065];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    pub width: i32,
    pub height: i32,
    pub room_cols: i32,
    pub room_rows: i32,
    pub objects: usize,
    pub initial_questions: usize,
    pub followup_questions: usize,
    /// Delay between consecutive follow-ups, starting from time 0.
    pub followup_spacing: f64,
    pub max_time: f64,
    /// Probability that a question declares a dependency on an earlier one.
    pub dependency_rate: f64,
    /// Probability that a question reuses the room of an earlier question.
    pub room_reuse: f64,
    /// Probability that an existence question names a room.
    pub local_existence: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            width: 16,
            height: 12,
            room_cols: 3,
            room_rows: 2,
            objects: 14,
            initial_questions: 3,
            followup_questions: 2,
            followup_spacing: 120.0,
            max_time: 400.0,
            dependency_rate: 0.2,
            room_reuse: 0.5,
            local_existence: 0.8,
        }
    }
}

impl GeneratorParams {
    pub fn question_count(&self) -> usize {
        self.initial_questions + self.followup_questions
    }

    fn check(&self) -> Result<(), GenerateError> {
        let bad = |m: String| Err(GenerateError::Unsatisfiable(m));
        if self.width < 8 || self.height < 8 {
            return bad(format!("grid {}x{} is smaller than 8x8", self.width, self.height));
        }
        if self.objects < 5 {
            return bad(format!("{} objects, need at least 5", self.objects));
        }
        if self.room_cols < 1 || self.room_rows < 1 {
            return bad("room grid must be at least 1x1".into());
        }
        let rooms = (self.room_cols * self.room_rows) as usize;
        if rooms > ROOM_LABELS.len() {
            return bad(format!("{rooms} rooms but only {} labels", ROOM_LABELS.len()));
        }
        if spans(self.width, self.room_cols).iter().any(|&(_, w)| w < 2)
            || spans(self.height, self.room_rows).iter().any(|&(_, h)| h < 2)
        {
            return bad("rooms would be narrower than 2 cells".into());
        }
        if self.question_count() == 0 {
            return bad("no questions requested".into());
        }
        if self.followup_spacing.is_nan() || self.followup_spacing <= 0.0 {
            return bad("follow-up spacing must be positive".into());
        }
        let last = self.followup_spacing * self.followup_questions as f64;
        if self.max_time.is_nan() || self.max_time <= last {
            return bad(format!("max_time {} ends before the last follow-up at {last}", self.max_time));
        }
        for (name, p) in [
            ("dependency_rate", self.dependency_rate),
            ("room_reuse", self.room_reuse),
            ("local_existence", self.local_existence),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} {p} is not a probability"));
            }
        }
        Ok(())
    }
}

const ROOM_LABELS: &[&str] = &[
    "kitchen",
    "living room",
    "bedroom",
    "bathroom",
    "dining room",
    "office",
    "laundry room",
    "hallway",
    "garage",
    "nursery",
    "study",
    "pantry",
];

/// Object categories and the state pair each one can take, if any.
const CATALOG: &[(&str, Option<[&str; 2]>)] = &[
    ("sofa", None),
    ("chair", None),
    ("table", None),
    ("tv", Some(["on", "off"])),
    ("lamp", Some(["on", "off"])),
    ("stove", Some(["on", "off"])),
    ("faucet", Some(["on", "off"])),
    ("laptop", Some(["on", "off"])),
    ("window", Some(["open", "closed"])),
    ("fridge", Some(["open", "closed"])),
    ("cabinet", Some(["open", "closed"])),
    ("oven", Some(["open", "closed"])),
    ("bed", None),
    ("basket", None),
    ("plant", None),
    ("bathtub", None),
    ("towel", None),
    ("cup", None),
    ("rug", None),
    ("mirror", None),
];

const MATERIALS: &[&str] = &["wood", "metal", "plastic", "fabric", "leather", "glass", "woven"];
const COLORS: &[&str] = &["white", "black", "grey", "blue", "red", "green", "brown"];

/// `(start, length)` of each of `parts` spans filling `total` cells with a
/// one-cell wall between neighbours.
fn spans(total: i32, parts: i32) -> Vec<(i32, i32)> {
    let free = total - (parts - 1);
    let base = free / parts;
    let extra = free % parts;
    let mut out = Vec::with_capacity(parts as usize);
    let mut start = 0;
    for i in 0..parts {
        let len = base + i32::from(i < extra);
        out.push((start, len));
        start += len + 1;
    }
    out
}

fn build_scene(
    id: &str,
    params: &GeneratorParams,
    rng: &mut ChaCha8Rng,
) -> Result<GridScene, GenerateError> {
    let xs = spans(params.width, params.room_cols);
    let ys = spans(params.height, params.room_rows);
    let mut labels: Vec<&str> = ROOM_LABELS.to_vec();
    labels.shuffle(rng);

    let mut rooms = Vec::new();
    for (ry, &(y0, h)) in ys.iter().enumerate() {
        for (rx, &(x0, w)) in xs.iter().enumerate() {
            let i = ry * xs.len() + rx;
            rooms.push(Room {
                room_id: format!("r{i}"),
                label: labels[i].to_string(),
                cells: (y0..y0 + h)
                    .flat_map(|y| (x0..x0 + w).map(move |x| Cell::new(x, y)))
                    .collect(),
            });
        }
    }

    let mut walls = BTreeSet::new();
    for &(x0, w) in &xs[..xs.len() - 1] {
        walls.extend((0..params.height).map(|y| Cell::new(x0 + w, y)));
    }
    for &(y0, h) in &ys[..ys.len() - 1] {
        walls.extend((0..params.width).map(|x| Cell::new(x, y0 + h)));
    }
    // One door per shared wall segment.
    for &(y0, h) in &ys {
        for &(x0, w) in &xs[..xs.len() - 1] {
            walls.remove(&Cell::new(x0 + w, rng.gen_range(y0..y0 + h)));
        }
    }
    for &(y0, h) in &ys[..ys.len() - 1] {
        for &(x0, w) in &xs {
            walls.remove(&Cell::new(rng.gen_range(x0..x0 + w), y0 + h));
        }
    }

    let room_cells: Vec<Cell> = rooms.iter().flat_map(|r| r.cells.iter().copied()).collect();
    if params.objects > room_cells.len() {
        return Err(GenerateError::Unsatisfiable(format!(
            "{} objects do not fit in {} room cells",
            params.objects,
            room_cells.len()
        )));
    }
    let cells: Vec<Cell> = room_cells
        .choose_multiple(rng, params.objects)
        .copied()
        .collect();
    let objects = cells
        .into_iter()
        .enumerate()
        .map(|(i, cell)| {
            let (category, states) = CATALOG[rng.gen_range(0..CATALOG.len())];
            let mut attributes = BTreeMap::new();
            if let Some(pair) = states {
                attributes.insert("state".to_string(), pair[rng.gen_range(0..2)].to_string());
            }
            attributes.insert(
                "material".to_string(),
                MATERIALS.choose(rng).expect("non-empty").to_string(),
            );
            attributes.insert(
                "color".to_string(),
                COLORS.choose(rng).expect("non-empty").to_string(),
            );
            ObjectInstance {
                object_id: format!("o{i:02}"),
                category: category.to_string(),
                cell,
                attributes,
            }
        })
        .collect();

    Ok(GridScene::new(SceneFile {
        scene_id: id.to_string(),
        width: params.width,
        height: params.height,
        walls: walls.into_iter().collect(),
        rooms,
        objects,
    })?)
}

/// Per-question draw: what kind of query, and how urgent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuestionPlan {
    pub kind: QueryKind,
    pub band: UrgencyBand,
}

fn draw_weighted<T: Copy>(rng: &mut ChaCha8Rng, items: &[T], shares: &[f64]) -> T {
    let mut roll: f64 = rng.gen::<f64>() * shares.iter().sum::<f64>();
    for (item, &s) in items.iter().zip(shares) {
        if roll < s {
            return *item;
        }
        roll -= s;
    }
    *items.last().expect("non-empty")
}

/// Largest-remainder apportionment of `total` by `shares`.
pub fn quotas(total: usize, shares: &[f64]) -> Vec<usize> {
    let sum: f64 = shares.iter().sum();
    let exact: Vec<f64> = shares.iter().map(|s| s / sum * total as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let short = total - out.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        out[i] += 1;
    }
    out
}

struct Draft {
    query: Query,
    text: String,
    values: Vec<String>,
    band: UrgencyBand,
}

struct Builder<'a> {
    scene: &'a GridScene,
    params: &'a GeneratorParams,
    used_rooms: Vec<String>,
}

impl Builder<'_> {
    fn room_label<'s>(&'s self, id: &'s str) -> &'s str {
        self.scene.room(id).map(|r| r.label.as_str()).unwrap_or(id)
    }

    fn room_id_of(&self, o: &ObjectInstance) -> String {
        self.scene
            .room_of(o.cell)
            .map(|r| r.room_id.clone())
            .expect("objects lie in rooms")
    }

    fn count_in(&self, category: &str, room: Option<&str>) -> usize {
        self.scene
            .objects()
            .iter()
            .filter(|o| {
                o.category == category
                    && room.is_none_or(|r| self.scene.room_of(o.cell).is_some_and(|x| x.room_id == r))
            })
            .count()
    }

    /// Prefers previously used rooms with probability `room_reuse`.
    fn pick_object<'s>(
        &self,
        rng: &mut ChaCha8Rng,
        candidates: Vec<&'s ObjectInstance>,
    ) -> Option<&'s ObjectInstance> {
        if candidates.is_empty() {
            return None;
        }
        if rng.gen_bool(self.params.room_reuse) {
            let reused: Vec<&ObjectInstance> = candidates
                .iter()
                .copied()
                .filter(|o| self.used_rooms.contains(&self.room_id_of(o)))
                .collect();
            if let Some(o) = reused.choose(rng) {
                return Some(o);
            }
        }
        candidates.choose(rng).copied()
    }

    fn pick_room(&self, rng: &mut ChaCha8Rng) -> String {
        if rng.gen_bool(self.params.room_reuse) {
            if let Some(r) = self.used_rooms.choose(rng) {
                return r.clone();
            }
        }
        self.scene
            .rooms()
            .choose(rng)
            .expect("scene has rooms")
            .room_id
            .clone()
    }

    /// Objects whose category occurs once in their room (or in the scene).
    fn unique_objects(&self, scene_wide: bool) -> Vec<&ObjectInstance> {
        self.scene
            .objects()
            .iter()
            .filter(|o| {
                let room = (!scene_wide).then(|| self.room_id_of(o));
                self.count_in(&o.category, room.as_deref()) == 1
            })
            .collect()
    }

    fn draft(&mut self, rng: &mut ChaCha8Rng, plan: QuestionPlan) -> Draft {
        let kind = plan.kind;
        let built = match kind {
            QueryKind::Existence => None,
            QueryKind::Counting => self.counting(rng),
            QueryKind::State => self.state(rng),
            QueryKind::Identification => self.identification(rng),
            QueryKind::Location => self.location(rng),
        };
        let (query, text, values) = built.unwrap_or_else(|| {
            if kind != QueryKind::Existence {
                log::debug!("no {kind:?} question fits scene {}; asking existence", self.scene.scene_id());
            }
            self.existence(rng)
        });
        if let Some(r) = &query.room {
            if !self.used_rooms.contains(r) {
                self.used_rooms.push(r.clone());
            }
        }
        Draft {
            query,
            text,
            values,
            band: plan.band,
        }
    }

    fn existence(&self, rng: &mut ChaCha8Rng) -> (Query, String, Vec<String>) {
        let room = rng
            .gen_bool(self.params.local_existence)
            .then(|| self.pick_room(rng));
        let present: BTreeSet<&str> = self
            .scene
            .objects()
            .iter()
            .filter(|o| {
                room.as_deref()
                    .is_none_or(|r| self.scene.room_of(o.cell).is_some_and(|x| x.room_id == r))
            })
            .map(|o| o.category.as_str())
            .collect();
        let absent: Vec<&str> = CATALOG
            .iter()
            .map(|(c, _)| *c)
            .filter(|c| !present.contains(c))
            .collect();
        let present: Vec<&str> = present.into_iter().collect();
        let want_yes = rng.gen_bool(0.5);
        // `present` and `absent` partition the catalog, so one is non-empty.
        let pick_from = if (want_yes && !present.is_empty()) || absent.is_empty() {
            &present
        } else {
            &absent
        };
        let category = *pick_from.choose(rng).expect("non-empty side");
        let text = match &room {
            Some(r) => format!("Is there a {category} in the {}?", self.room_label(r)),
            None => format!("Is there a {category} anywhere in the house?"),
        };
        let mut values = vec!["yes".to_string(), "no".to_string()];
        values.shuffle(rng);
        (
            Query {
                kind: QueryKind::Existence,
                category: category.to_string(),
                room,
                attribute: None,
            },
            text,
            values,
        )
    }

    fn counting(&self, rng: &mut ChaCha8Rng) -> Option<(Query, String, Vec<String>)> {
        let o = self.pick_object(rng, self.scene.objects().iter().collect())?;
        let room = self.room_id_of(o);
        let truth = self.count_in(&o.category, Some(&room));
        let lo = truth.saturating_sub(3);
        let mut wrong: Vec<usize> = (lo..=truth + 3).filter(|&n| n != truth).collect();
        wrong.shuffle(rng);
        let mut numbers: Vec<usize> = wrong.into_iter().take(3).chain([truth]).collect();
        numbers.sort_unstable();
        let text = format!("How many {}s are in the {}?", o.category, self.room_label(&room));
        Some((
            Query {
                kind: QueryKind::Counting,
                category: o.category.clone(),
                room: Some(room),
                attribute: None,
            },
            text,
            numbers.iter().map(usize::to_string).collect(),
        ))
    }

    fn state(&self, rng: &mut ChaCha8Rng) -> Option<(Query, String, Vec<String>)> {
        let candidates = self
            .unique_objects(false)
            .into_iter()
            .filter(|o| o.attributes.contains_key("state"))
            .collect();
        let o = self.pick_object(rng, candidates)?;
        let pair = CATALOG
            .iter()
            .find(|(c, _)| *c == o.category)
            .and_then(|(_, p)| *p)?;
        let room = self.room_id_of(o);
        let text = format!(
            "Is the {} in the {} {} or {}?",
            o.category,
            self.room_label(&room),
            pair[0],
            pair[1]
        );
        let mut values: Vec<String> = pair.iter().map(|s| s.to_string()).collect();
        values.shuffle(rng);
        Some((
            Query {
                kind: QueryKind::State,
                category: o.category.clone(),
                room: Some(room),
                attribute: Some("state".into()),
            },
            text,
            values,
        ))
    }

    fn identification(&self, rng: &mut ChaCha8Rng) -> Option<(Query, String, Vec<String>)> {
        let o = self.pick_object(rng, self.unique_objects(false))?;
        let (attr, vocab) = if rng.gen_bool(0.5) {
            ("material", MATERIALS)
        } else {
            ("color", COLORS)
        };
        let truth = o.attributes.get(attr)?.clone();
        let mut wrong: Vec<String> = vocab
            .iter()
            .filter(|v| **v != truth)
            .map(|v| v.to_string())
            .collect();
        wrong.shuffle(rng);
        let mut values: Vec<String> = wrong.into_iter().take(3).chain([truth]).collect();
        values.shuffle(rng);
        let room = self.room_id_of(o);
        let text = format!(
            "What {attr} is the {} in the {}?",
            o.category,
            self.room_label(&room)
        );
        Some((
            Query {
                kind: QueryKind::Identification,
                category: o.category.clone(),
                room: Some(room),
                attribute: Some(attr.into()),
            },
            text,
            values,
        ))
    }

    fn location(&self, rng: &mut ChaCha8Rng) -> Option<(Query, String, Vec<String>)> {
        let o = self.pick_object(rng, self.unique_objects(true))?;
        let truth = self.scene.room_of(o.cell)?.label.clone();
        let mut others: Vec<String> = self
            .scene
            .rooms()
            .iter()
            .map(|r| r.label.clone())
            .filter(|l| *l != truth)
            .collect();
        others.shuffle(rng);
        let mut values: Vec<String> = others.into_iter().take(3).chain([truth]).collect();
        values.shuffle(rng);
        Some((
            Query {
                kind: QueryKind::Location,
                category: o.category.clone(),
                room: None,
                attribute: None,
            },
            format!("Where can you find the {}?", o.category),
            values,
        ))
    }
}

fn build_scenario(
    scenario_id: &str,
    seed: u64,
    params: &GeneratorParams,
    plans: &[QuestionPlan],
) -> Result<Scenario, GenerateError> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = build_scene(scenario_id, params, &mut rng)?;
    let mut builder = Builder {
        scene: &scene,
        params,
        used_rooms: Vec::new(),
    };
    let mut drafts: Vec<Draft> = plans.iter().map(|p| builder.draft(&mut rng, *p)).collect();
    // Roles are assigned uniformly at random.
    drafts.shuffle(&mut rng);

    let mut questions: Vec<Question> = Vec::with_capacity(drafts.len());
    for (i, d) in drafts.into_iter().enumerate() {
        let arrival_time = if i < params.initial_questions {
            0.0
        } else {
            (i - params.initial_questions + 1) as f64 * params.followup_spacing
        };
        let (lo, hi) = d.band.draw_range();
        let urgency_true = rng.gen_range(lo..hi);
        let related: Vec<&Question> = questions
            .iter()
            .filter(|p| {
                (p.query.room.is_some() && p.query.room == d.query.room)
                    || p.query.category == d.query.category
            })
            .collect();
        let declared_deps = match related.choose(&mut rng) {
            Some(p) if rng.gen_bool(params.dependency_rate) => vec![p.question_id.clone()],
            _ => Vec::new(),
        };
        let mut q = Question {
            question_id: QuestionId::new(format!("q{}", i + 1)),
            text: d.text,
            query: d.query,
            options: pad_options(&d.values),
            ground_truth: Label::A,
            urgency_true,
            arrival_time,
            safety_flag: d.band == UrgencyBand::High,
            functional_flag: d.band == UrgencyBand::Medium,
            declared_deps,
        };
        q.ground_truth = ground_truth_answer(&scene, &q).map_err(|e| {
            GenerateError::Unsatisfiable(format!(
                "question {} has no consistent answer ({e}); truth `{}`",
                q.question_id,
                evaluate_query(&scene, &q.query).unwrap_or_default()
            ))
        })?;
        questions.push(q);
    }

    let start_cells: Vec<Cell> = scene
        .rooms()
        .iter()
        .flat_map(|r| r.cells.iter().copied())
        .collect();
    let start = *start_cells.choose(&mut rng).expect("rooms are non-empty");
    let followup_questions = questions.split_off(params.initial_questions.min(questions.len()));
    Ok(Scenario {
        scenario_id: scenario_id.to_string(),
        scene: Arc::new(scene),
        max_time: params.max_time,
        initial_pose: Pose::new(start, Heading::North),
        initial_questions: questions,
        followup_questions,
    })
}

/// One scenario with kinds and bands drawn independently per question.
pub fn generate_scenario(seed: u64, params: &GeneratorParams) -> Result<Scenario, GenerateError> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let plans: Vec<QuestionPlan> = (0..params.question_count())
        .map(|_| QuestionPlan {
            kind: draw_weighted(&mut rng, &QueryKind::ALL, &KIND_SHARES),
            band: draw_weighted(&mut rng, &UrgencyBand::ALL, &BAND_SHARES),
        })
        .collect();
    build_scenario(&format!("gen-{seed}"), seed, params, &plans)
}

/// `count` scenarios whose kinds and urgency bands jointly follow the target
/// shares as closely as integer counts allow.
pub fn generate_suite(
    seed: u64,
    count: usize,
    params: &GeneratorParams,
) -> Result<Vec<Scenario>, GenerateError> {
    params.check()?;
    let per = params.question_count();
    let total = per * count;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kinds: Vec<QueryKind> = quotas(total, &KIND_SHARES)
        .into_iter()
        .zip(QueryKind::ALL)
        .flat_map(|(n, k)| std::iter::repeat_n(k, n))
        .collect();
    let mut bands: Vec<UrgencyBand> = quotas(total, &BAND_SHARES)
        .into_iter()
        .zip(UrgencyBand::ALL)
        .flat_map(|(n, b)| std::iter::repeat_n(b, n))
        .collect();
    kinds.shuffle(&mut rng);
    bands.shuffle(&mut rng);
    let plans: Vec<QuestionPlan> = kinds
        .into_iter()
        .zip(bands)
        .map(|(kind, band)| QuestionPlan { kind, band })
        .collect();
    plans
        .chunks(per)
        .enumerate()
        .map(|(i, chunk)| {
            let scenario_seed: u64 = rng.gen();
            build_scenario(&format!("scene-{i:03}"), scenario_seed, params, chunk)
        })
        .collect()
}
