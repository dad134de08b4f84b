//! Fixtures and property checks shared by the acceptance harness and the
//! proptest suites. Each check returns `Err(description)` on a violation.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use eqsa_core::explorer::{ExplorationSession, ExplorationState, RoomRelevance, StepOutcome};
use eqsa_core::orchestrator::Event;
use eqsa_core::question::DUMMY_OPTION;
use eqsa_core::{
    generate_scenario, run_scenario, Cell, ExplorerConfig, GeneratorParams, GroupMemory, Label,
    MemoryRecord, ParsedQuestion, PoolConfig, PriorityWeights, Query, QueryKind, Question,
    QuestionId, QuestionPool, RunConfig, SceneMeta, ScopeType,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn question(id: &str, room: Option<&str>, deps: &[&str]) -> Question {
    Question {
        question_id: id.into(),
        text: format!("question {id}"),
        query: Query {
            kind: QueryKind::Existence,
            category: "chair".into(),
            room: room.map(str::to_string),
            attribute: None,
        },
        options: [
            "yes".into(),
            "no".into(),
            DUMMY_OPTION.into(),
            DUMMY_OPTION.into(),
        ],
        ground_truth: Label::A,
        urgency_true: 0.5,
        arrival_time: 0.0,
        safety_flag: false,
        functional_flag: false,
        declared_deps: deps.iter().map(|d| QuestionId::new(*d)).collect(),
    }
}

pub fn parsed(id: &str, urgency: f64, scope: ScopeType, room: Option<&str>) -> ParsedQuestion {
    ParsedQuestion {
        question: question(id, room, &[]),
        urgency_est: urgency,
        scope,
    }
}

pub fn random_weights(rng: &mut ChaCha8Rng) -> PriorityWeights {
    PriorityWeights {
        w_u: rng.gen_range(0.0..3.0),
        w_s: rng.gen_range(0.0..3.0),
        w_r: rng.gen_range(0.0..3.0),
        w_d: rng.gen_range(0.0..3.0),
    }
}

/// A pool of up to 12 questions over 4 rooms with random backward
/// dependencies and a few answered entries.
pub fn random_pool(rng: &mut ChaCha8Rng, weights: PriorityWeights) -> QuestionPool {
    let mut pool = QuestionPool::new(PoolConfig {
        weights,
        ..PoolConfig::default()
    });
    let n = rng.gen_range(1..=12);
    for i in 0..n {
        let room = ["r0", "r1", "r2", "r3"].choose(rng).copied();
        let scope = if rng.gen_bool(0.5) {
            ScopeType::Local
        } else {
            ScopeType::Global
        };
        let p = parsed(&format!("q{i:02}"), rng.gen_range(0.0..0.99), scope, room);
        let deps: Vec<QuestionId> = (0..i)
            .filter(|_| rng.gen_bool(0.2))
            .map(|j| QuestionId::new(format!("q{j:02}")))
            .collect();
        pool.add_question(p, &deps, f64::from(i)).expect("valid question");
    }
    for i in 0..n {
        if rng.gen_bool(0.2) {
            pool.mark_answered(&QuestionId::new(format!("q{i:02}")));
        }
    }
    pool
}

pub fn check_scaling_invariance(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let w = random_weights(&mut r);
    let k = r.gen_range(0.01..100.0);
    let base = random_pool(&mut rng(seed ^ 0xa5a5), w);
    let scaled = random_pool(&mut rng(seed ^ 0xa5a5), w.scaled(k));
    let a = base.peek_next().map(|e| e.id().clone());
    let b = scaled.peek_next().map(|e| e.id().clone());
    if a == b {
        Ok(())
    } else {
        Err(format!("seed {seed}: argmax {a:?} vs {b:?} at k={k}"))
    }
}

/// A ready and a pending question that agree on every other component.
pub fn check_ready_beats_pending(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let mut w = random_weights(&mut r);
    w.w_d = r.gen_range(0.01..3.0);
    let u = r.gen_range(0.0..0.99);
    let scope = if r.gen_bool(0.5) {
        ScopeType::Local
    } else {
        ScopeType::Global
    };
    let mut pool = QuestionPool::new(PoolConfig {
        weights: w,
        ..PoolConfig::default()
    });
    let blocker = parsed("blocker", r.gen_range(0.0..0.99), scope, Some("r2"));
    pool.add_question(blocker, &[], 0.0).map_err(|e| e.to_string())?;
    pool.add_question(parsed("ready", u, scope, Some("r0")), &[], 0.0)
        .map_err(|e| e.to_string())?;
    pool.add_question(
        parsed("pending", u, scope, Some("r1")),
        &[QuestionId::new("blocker")],
        0.0,
    )
    .map_err(|e| e.to_string())?;
    let p = |id: &str| pool.entry(&QuestionId::new(id)).map(|e| e.priority).unwrap();
    if p("ready") > p("pending") {
        Ok(())
    } else {
        Err(format!("seed {seed}: ready {} <= pending {}", p("ready"), p("pending")))
    }
}

fn random_query(r: &mut ChaCha8Rng, meta: &SceneMeta, categories: &[String]) -> Query {
    let kind = *QueryKind::ALL.choose(r).unwrap();
    let rooms: Vec<&String> = meta.rooms().map(|(id, _)| id).collect();
    let room = match kind {
        QueryKind::Location => None,
        _ if r.gen_bool(0.5) => Some(rooms.choose(r).unwrap().to_string()),
        _ => None,
    };
    Query {
        kind,
        category: categories.choose(r).unwrap().clone(),
        room,
        attribute: matches!(kind, QueryKind::State | QueryKind::Identification)
            .then(|| "state".to_string()),
    }
}

/// Confidence never drops as observations accumulate.
pub fn check_confidence_monotone(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let s = generate_scenario(seed, &GeneratorParams::default()).map_err(|e| e.to_string())?;
    let scene = &s.scene;
    let meta = Arc::new(SceneMeta::from_scene(scene));
    let categories: Vec<String> = scene.objects().iter().map(|o| o.category.clone()).collect();
    let query = random_query(&mut r, &meta, &categories);
    let mut memory = GroupMemory::new(meta);
    let free: Vec<Cell> = scene.free_cells().collect();
    let mut last = memory.confidence(&query).map_err(|e| e.to_string())?;
    for t in 0..30 {
        let cell = *free.choose(&mut r).unwrap();
        let pose = eqsa_core::Pose::new(cell, eqsa_core::Heading::North);
        let obs = scene
            .observe(pose, r.gen_range(1..4), 0.1, r.gen(), f64::from(t))
            .map_err(|e| e.to_string())?;
        memory.insert(MemoryRecord {
            observation: obs,
            source_question: None,
        });
        let c = memory.confidence(&query).map_err(|e| e.to_string())?;
        if c + 1e-12 < last {
            return Err(format!("seed {seed}: confidence {last} -> {c} for {query:?}"));
        }
        last = c;
    }
    Ok(())
}

/// Every move is to a 4-neighbour or stays put, and each exploration starts
/// where the previous one ended.
pub fn check_pose_continuity(seed: u64) -> Result<(), String> {
    let s = generate_scenario(seed, &GeneratorParams::default()).map_err(|e| e.to_string())?;
    let config = RunConfig::default().with_seed(seed);
    let trace = run_scenario(&s, &config).map_err(|e| e.to_string())?;
    let mut at = s.initial_pose.cell;
    for e in trace.events() {
        if let Event::StepTaken(step) = e {
            let next = step.pose.cell;
            if (next.x - at.x).abs() + (next.y - at.y).abs() > 1 {
                return Err(format!(
                    "seed {seed}: {} jumped {at:?} -> {next:?}",
                    step.question_id
                ));
            }
            if !s.scene.is_free(next) {
                return Err(format!("seed {seed}: moved into {next:?}"));
            }
            at = next;
        }
    }
    Ok(())
}

/// The incrementally maintained frontier equals a from-scratch recomputation
/// after every step.
pub fn check_frontier_recomputation(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let s = generate_scenario(seed, &GeneratorParams::default()).map_err(|e| e.to_string())?;
    let scene = &s.scene;
    let meta = Arc::new(SceneMeta::from_scene(scene));
    let categories: Vec<String> = scene.objects().iter().map(|o| o.category.clone()).collect();
    let query = random_query(&mut r, &meta, &categories);
    let mut memory = GroupMemory::new(meta.clone());
    let config = ExplorerConfig::default();
    let relevance = RoomRelevance::default();
    let mut session = ExplorationSession::begin(
        "q".into(),
        query,
        s.initial_pose,
        scene,
        &mut memory,
        &config,
        r.gen(),
        0.0,
    )
    .map_err(|e| e.to_string())?;
    let compare = |state: &ExplorationState| -> Result<(), String> {
        let fresh: BTreeSet<Cell> = state.recompute_frontiers(&meta);
        if fresh == state.frontier {
            Ok(())
        } else {
            Err(format!("seed {seed}: incremental frontier diverged"))
        }
    };
    compare(&session.state)?;
    for t in 1..=r.gen_range(1..40u32) {
        match session
            .step(scene, &mut memory, &config, &relevance, relevance.base, r.gen(), f64::from(t))
            .map_err(|e| e.to_string())?
        {
            StepOutcome::Stepped(_) => compare(&session.state)?,
            StepOutcome::BudgetExhausted => break,
        }
    }
    Ok(())
}
