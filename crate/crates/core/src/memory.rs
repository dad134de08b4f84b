//! Group memory: the scenario-lifetime store of observations shared by all
//! questions.
//!
//! Confidence for a query is coverage of the relevant area, lifted to 1.0
//! when a matching object has been sighted and the question kind can be
//! settled by one sighting. Counting never gets the lift: it needs the whole
//! room seen. Full coverage with no sighting is how the memory knows an
//! object is absent.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::MemoryError;
use crate::question::{Query, QueryKind, QuestionId};
use crate::scene::{Cell, GridScene, Observation, Sighting};

/// Floor-plan knowledge the agent has up front: room extents and labels.
/// It carries no walls and no objects.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneMeta {
    width: i32,
    height: i32,
    rooms: BTreeMap<String, RoomMeta>,
    room_of: Vec<Option<String>>,
    free_cells: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoomMeta {
    pub label: String,
    pub cells: BTreeSet<Cell>,
}

impl SceneMeta {
    pub fn from_scene(scene: &GridScene) -> Self {
        let n = (scene.width() * scene.height()) as usize;
        let mut room_of = vec![None; n];
        let mut rooms = BTreeMap::new();
        for r in scene.rooms() {
            for c in &r.cells {
                room_of[(c.y * scene.width() + c.x) as usize] = Some(r.room_id.clone());
            }
            rooms.insert(
                r.room_id.clone(),
                RoomMeta {
                    label: r.label.clone(),
                    cells: r.cells.clone(),
                },
            );
        }
        Self {
            width: scene.width(),
            height: scene.height(),
            rooms,
            room_of,
            free_cells: scene.free_cells().count(),
        }
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    pub fn room(&self, id: &str) -> Option<&RoomMeta> {
        self.rooms.get(id)
    }

    pub fn rooms(&self) -> impl Iterator<Item = (&String, &RoomMeta)> {
        self.rooms.iter()
    }

    pub fn room_of(&self, c: Cell) -> Option<&str> {
        if !self.in_bounds(c) {
            return None;
        }
        self.room_of
            .get((c.y * self.width + c.x) as usize)
            .and_then(|r| r.as_deref())
    }

    pub fn free_cell_count(&self) -> usize {
        self.free_cells
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryRecord {
    pub observation: Observation,
    pub source_question: Option<QuestionId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MemoryIndex {
    pub by_category: BTreeMap<String, Vec<usize>>,
    pub by_room: BTreeMap<String, Vec<usize>>,
    pub seen_cells: BTreeSet<Cell>,
    pub seen_walls: BTreeSet<Cell>,
}

impl MemoryIndex {
    fn add(&mut self, idx: usize, record: &MemoryRecord, meta: &SceneMeta) {
        let obs = &record.observation;
        let mut cats = BTreeSet::new();
        let mut rooms = BTreeSet::new();
        for s in &obs.sightings {
            cats.insert(s.category.as_str());
            if let Some(r) = meta.room_of(s.cell) {
                rooms.insert(r);
            }
        }
        for c in cats {
            self.by_category.entry(c.to_string()).or_default().push(idx);
        }
        for r in rooms {
            self.by_room.entry(r.to_string()).or_default().push(idx);
        }
        self.seen_cells.extend(obs.visible_cells.iter().copied());
        self.seen_walls.extend(obs.blocked_cells.iter().copied());
    }
}

#[derive(Clone, Debug)]
pub struct GroupMemory {
    meta: Arc<SceneMeta>,
    records: Vec<MemoryRecord>,
    index: MemoryIndex,
}

/// One matching sighting with the time it was made.
#[derive(Clone, Copy, Debug)]
pub struct Evidence<'a> {
    pub time: f64,
    pub sighting: &'a Sighting,
}

impl GroupMemory {
    pub fn new(meta: Arc<SceneMeta>) -> Self {
        Self {
            meta,
            records: Vec::new(),
            index: MemoryIndex::default(),
        }
    }

    pub fn meta(&self) -> &SceneMeta {
        &self.meta
    }

    pub fn records(&self) -> &[MemoryRecord] {
        &self.records
    }

    pub fn index(&self) -> &MemoryIndex {
        &self.index
    }

    pub fn seen_cells(&self) -> &BTreeSet<Cell> {
        &self.index.seen_cells
    }

    pub fn seen_walls(&self) -> &BTreeSet<Cell> {
        &self.index.seen_walls
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn insert(&mut self, record: MemoryRecord) {
        let idx = self.records.len();
        self.index.add(idx, &record, &self.meta);
        self.records.push(record);
    }

    pub fn clear(&mut self) {
        self.records.clear();
        self.index = MemoryIndex::default();
    }

    /// Index rebuilt from the record list alone.
    pub fn rebuild_index(&self) -> MemoryIndex {
        let mut index = MemoryIndex::default();
        for (i, r) in self.records.iter().enumerate() {
            index.add(i, r, &self.meta);
        }
        index
    }

    fn sighting_matches(&self, s: &Sighting, query: &Query) -> bool {
        s.category == query.category
            && query
                .room
                .as_deref()
                .is_none_or(|room| self.meta.room_of(s.cell) == Some(room))
    }

    /// Records holding a matching sighting, most recent first.
    pub fn retrieve(&self, query: &Query) -> Vec<&MemoryRecord> {
        let Some(candidates) = self.index.by_category.get(&query.category) else {
            return Vec::new();
        };
        let mut hits: Vec<(usize, &MemoryRecord)> = candidates
            .iter()
            .map(|&i| (i, &self.records[i]))
            .filter(|(_, r)| {
                r.observation
                    .sightings
                    .iter()
                    .any(|s| self.sighting_matches(s, query))
            })
            .collect();
        hits.sort_by(|(ia, a), (ib, b)| {
            b.observation
                .time
                .total_cmp(&a.observation.time)
                .then(ib.cmp(ia))
        });
        hits.into_iter().map(|(_, r)| r).collect()
    }

    /// Matching sightings, most recent first.
    pub fn evidence(&self, query: &Query) -> Vec<Evidence<'_>> {
        self.retrieve(query)
            .into_iter()
            .flat_map(|r| {
                r.observation
                    .sightings
                    .iter()
                    .filter(|s| self.sighting_matches(s, query))
                    .map(|s| Evidence {
                        time: r.observation.time,
                        sighting: s,
                    })
            })
            .collect()
    }

    /// Cells of sighted instances matching `query`, deduplicated.
    pub fn anchors(&self, query: &Query) -> Vec<Cell> {
        let cells: BTreeSet<Cell> = self
            .evidence(query)
            .iter()
            .map(|e| e.sighting.cell)
            .collect();
        cells.into_iter().collect()
    }

    /// Fraction of the query's area that has been seen.
    pub fn coverage(&self, query: &Query) -> Result<f64, MemoryError> {
        match &query.room {
            Some(room) => {
                let meta = self
                    .meta
                    .room(room)
                    .ok_or_else(|| MemoryError::UnknownRoom(room.clone()))?;
                let seen = meta
                    .cells
                    .iter()
                    .filter(|c| self.index.seen_cells.contains(c))
                    .count();
                Ok(seen as f64 / meta.cells.len() as f64)
            }
            None => {
                let total = self.meta.free_cell_count();
                if total == 0 {
                    return Ok(0.0);
                }
                Ok(self.index.seen_cells.len() as f64 / total as f64)
            }
        }
    }

    pub fn confidence(&self, query: &Query) -> Result<f64, MemoryError> {
        let coverage = self.coverage(query)?;
        let boostable = match (query.room.is_some(), query.kind) {
            (_, QueryKind::Counting) => false,
            (true, _) => true,
            (false, kind) => matches!(kind, QueryKind::Existence | QueryKind::Location),
        };
        if boostable && !self.evidence(query).is_empty() {
            return Ok(1.0);
        }
        Ok(coverage)
    }

    /// Writes every record as one JSON line.
    pub fn dump_jsonl(records: &[MemoryRecord], mut out: impl Write) -> std::io::Result<()> {
        for r in records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}
