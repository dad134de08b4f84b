//! Symbolic grid world standing in for a 3D scene.
//!
//! A [`GridScene`] is an occupancy grid (free or wall) with a set of
//! labelled rooms and attributed object instances. It is immutable once
//! built; all queries against it are pure.

mod oracle;
mod visibility;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::SceneError;

pub use oracle::{evaluate_query, ground_truth_answer};
pub use visibility::{line_between, scan, visible_cells, Scan};

/// Zero-based grid coordinate. Serialized as `[x, y]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn chebyshev(self, other: Cell) -> i32 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    /// 4-connected neighbours, in a fixed order (N, E, S, W). May be out of bounds.
    pub fn neighbors4(self) -> [Cell; 4] {
        [
            Cell::new(self.x, self.y - 1),
            Cell::new(self.x + 1, self.y),
            Cell::new(self.x, self.y + 1),
            Cell::new(self.x - 1, self.y),
        ]
    }
}

impl From<[i32; 2]> for Cell {
    fn from([x, y]: [i32; 2]) -> Self {
        Cell::new(x, y)
    }
}

impl From<Cell> for [i32; 2] {
    fn from(c: Cell) -> Self {
        [c.x, c.y]
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Cardinal heading. North is towards decreasing `y`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heading {
    #[default]
    North,
    East,
    South,
    West,
}

impl Heading {
    /// Heading of a unit move from `from` to `to`, if they are 4-adjacent.
    pub fn of_move(from: Cell, to: Cell) -> Option<Heading> {
        match (to.x - from.x, to.y - from.y) {
            (0, -1) => Some(Heading::North),
            (1, 0) => Some(Heading::East),
            (0, 1) => Some(Heading::South),
            (-1, 0) => Some(Heading::West),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pose {
    pub cell: Cell,
    #[serde(default)]
    pub heading: Heading,
}

impl Pose {
    pub fn new(cell: Cell, heading: Heading) -> Self {
        Self { cell, heading }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Room {
    pub room_id: String,
    pub label: String,
    pub cells: BTreeSet<Cell>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub object_id: String,
    pub category: String,
    pub cell: Cell,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

/// One perceived object. Attribute values may be corrupted by sensor noise.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sighting {
    pub object_id: String,
    pub category: String,
    pub cell: Cell,
    pub attributes: BTreeMap<String, String>,
}

/// Symbolic observation taken from one pose.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    pub pose: Pose,
    /// Free cells in line of sight.
    pub visible_cells: BTreeSet<Cell>,
    /// Wall cells in line of sight. The explorer needs these to close frontiers.
    #[serde(default)]
    pub blocked_cells: BTreeSet<Cell>,
    pub sightings: Vec<Sighting>,
}

/// Known vocabulary per attribute name. Sensor noise draws wrong values from
/// the union of this list and every value the scene itself uses.
const ATTRIBUTE_VOCABULARY: &[(&str, &[&str])] = &[
    ("state", &["on", "off", "open", "closed"]),
    (
        "material",
        &["wood", "metal", "plastic", "fabric", "leather", "glass", "woven"],
    ),
    (
        "color",
        &["white", "black", "grey", "blue", "red", "green", "brown"],
    ),
];

/// On-disk layout of a scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub scene_id: String,
    pub width: i32,
    pub height: i32,
    #[serde(default)]
    pub walls: Vec<Cell>,
    #[serde(default)]
    pub rooms: Vec<Room>,
    #[serde(default)]
    pub objects: Vec<ObjectInstance>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SceneFile", into = "SceneFile")]
pub struct GridScene {
    scene_id: String,
    width: i32,
    height: i32,
    walls: Vec<bool>,
    rooms: Vec<Room>,
    objects: Vec<ObjectInstance>,
    room_of: Vec<Option<usize>>,
    domains: BTreeMap<String, Vec<String>>,
}

impl TryFrom<SceneFile> for GridScene {
    type Error = SceneError;

    fn try_from(file: SceneFile) -> Result<Self, SceneError> {
        GridScene::new(file)
    }
}

impl From<GridScene> for SceneFile {
    fn from(scene: GridScene) -> Self {
        scene.to_file()
    }
}

impl GridScene {
    /// Builds a scene and checks every structural invariant.
    pub fn new(file: SceneFile) -> Result<Self, SceneError> {
        let SceneFile {
            scene_id,
            width,
            height,
            walls: wall_list,
            mut rooms,
            mut objects,
        } = file;
        let invalid = |msg: String| Err(SceneError::InvalidScene(msg));
        if width <= 0 || height <= 0 {
            return invalid(format!("grid must be non-empty, got {width}x{height}"));
        }
        let in_bounds = |c: Cell| c.x >= 0 && c.y >= 0 && c.x < width && c.y < height;
        let idx = |c: Cell| (c.y * width + c.x) as usize;
        let n = (width * height) as usize;

        let mut walls = vec![false; n];
        for &w in &wall_list {
            if !in_bounds(w) {
                return invalid(format!("wall {w} outside grid"));
            }
            walls[idx(w)] = true;
        }
        if walls.iter().all(|&w| w) {
            return invalid("scene has no free cell".into());
        }

        let mut room_of = vec![None; n];
        let mut room_ids = BTreeSet::new();
        for (ri, room) in rooms.iter().enumerate() {
            if room.cells.is_empty() {
                return invalid(format!("room {} has no cells", room.room_id));
            }
            if room.label.is_empty() {
                return invalid(format!("room {} has an empty label", room.room_id));
            }
            if !room_ids.insert(room.room_id.clone()) {
                return invalid(format!("duplicate room id {}", room.room_id));
            }
            for &c in &room.cells {
                if !in_bounds(c) || walls[idx(c)] {
                    return invalid(format!("room {} covers non-free cell {c}", room.room_id));
                }
                if room_of[idx(c)].replace(ri).is_some() {
                    return invalid(format!("cell {c} belongs to more than one room"));
                }
            }
        }

        let mut object_ids = BTreeSet::new();
        for obj in &objects {
            if obj.category.is_empty() {
                return invalid(format!("object {} has an empty category", obj.object_id));
            }
            if !object_ids.insert(obj.object_id.clone()) {
                return invalid(format!("duplicate object id {}", obj.object_id));
            }
            if !in_bounds(obj.cell) || walls[idx(obj.cell)] {
                return invalid(format!("object {} is not on a free cell", obj.object_id));
            }
            if room_of[idx(obj.cell)].is_none() {
                return invalid(format!("object {} lies outside every room", obj.object_id));
            }
        }
        rooms.sort_by(|a, b| a.room_id.cmp(&b.room_id));
        // Re-index after sorting so room_of matches the stored order.
        let mut room_of = vec![None; n];
        for (ri, room) in rooms.iter().enumerate() {
            for &c in &room.cells {
                room_of[idx(c)] = Some(ri);
            }
        }
        objects.sort_by(|a, b| a.object_id.cmp(&b.object_id));

        let mut domains: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (name, values) in ATTRIBUTE_VOCABULARY {
            domains
                .entry(name.to_string())
                .or_default()
                .extend(values.iter().map(|v| v.to_string()));
        }
        for obj in &objects {
            for (k, v) in &obj.attributes {
                domains.entry(k.clone()).or_default().insert(v.clone());
            }
        }
        let domains = domains
            .into_iter()
            .map(|(k, v)| (k, v.into_iter().collect()))
            .collect();

        Ok(Self {
            scene_id,
            width,
            height,
            walls,
            rooms,
            objects,
            room_of,
            domains,
        })
    }

    pub fn to_file(&self) -> SceneFile {
        // Row-major wall listing.
        let mut walls = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let c = Cell::new(x, y);
                if self.is_wall(c) {
                    walls.push(c);
                }
            }
        }
        SceneFile {
            scene_id: self.scene_id.clone(),
            width: self.width,
            height: self.height,
            walls,
            rooms: self.rooms.clone(),
            objects: self.objects.clone(),
        }
    }

    pub fn scene_id(&self) -> &str {
        &self.scene_id
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }

    pub fn rooms(&self) -> &[Room] {
        &self.rooms
    }

    /// Objects sorted by id.
    pub fn objects(&self) -> &[ObjectInstance] {
        &self.objects
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    fn index(&self, c: Cell) -> usize {
        (c.y * self.width + c.x) as usize
    }

    pub fn is_wall(&self, c: Cell) -> bool {
        self.walls[self.index(c)]
    }

    /// In bounds and not a wall.
    pub fn is_free(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.is_wall(c)
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height)
            .flat_map(move |y| (0..self.width).map(move |x| Cell::new(x, y)))
            .filter(move |&c| !self.is_wall(c))
    }

    pub fn room(&self, room_id: &str) -> Option<&Room> {
        self.rooms
            .binary_search_by(|r| r.room_id.as_str().cmp(room_id))
            .ok()
            .map(|i| &self.rooms[i])
    }

    pub fn room_of(&self, c: Cell) -> Option<&Room> {
        if !self.in_bounds(c) {
            return None;
        }
        self.room_of[self.index(c)].map(|i| &self.rooms[i])
    }

    pub fn attribute_domain(&self, name: &str) -> &[String] {
        self.domains.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn check_pose(&self, pose: &Pose) -> Result<(), SceneError> {
        if self.is_free(pose.cell) {
            Ok(())
        } else {
            Err(SceneError::InvalidPose(pose.cell))
        }
    }

    /// Perceives every object in line of sight from `pose`.
    ///
    /// Each attribute of each sighted object is independently replaced, with
    /// probability `noise_rate`, by a uniformly drawn wrong value from that
    /// attribute's domain. The draw is fully determined by `rng_seed`.
    pub fn observe(
        &self,
        pose: Pose,
        range: u32,
        noise_rate: f64,
        rng_seed: u64,
        time: f64,
    ) -> Result<Observation, SceneError> {
        if !(0.0..1.0).contains(&noise_rate) {
            return Err(SceneError::InvalidNoiseRate(noise_rate));
        }
        let Scan { free, blocked } = scan(self, pose, range)?;
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut sightings = Vec::new();
        for obj in &self.objects {
            if !free.contains(&obj.cell) {
                continue;
            }
            let mut attributes = obj.attributes.clone();
            for (name, value) in attributes.iter_mut() {
                let roll: f64 = rng.gen();
                if roll >= noise_rate {
                    continue;
                }
                let wrong: Vec<&String> = self
                    .attribute_domain(name)
                    .iter()
                    .filter(|v| *v != value)
                    .collect();
                if !wrong.is_empty() {
                    *value = wrong[rng.gen_range(0..wrong.len())].clone();
                }
            }
            sightings.push(Sighting {
                object_id: obj.object_id.clone(),
                category: obj.category.clone(),
                cell: obj.cell,
                attributes,
            });
        }
        Ok(Observation {
            time,
            pose,
            visible_cells: free,
            blocked_cells: blocked,
            sightings,
        })
    }
}
