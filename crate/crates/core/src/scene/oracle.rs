//! Ground-truth evaluation of structured queries against a scene.

use super::{GridScene, ObjectInstance};
use crate::error::SceneError;
use crate::question::{Label, Query, QueryKind, Question};

fn in_scope<'a>(
    scene: &'a GridScene,
    query: &'a Query,
) -> Result<impl Iterator<Item = &'a ObjectInstance> + 'a, SceneError> {
    if let Some(room) = &query.room {
        if scene.room(room).is_none() {
            return Err(SceneError::UnknownRoom(room.clone()));
        }
    }
    Ok(scene.objects().iter().filter(move |o| {
        o.category == query.category
            && query.room.as_ref().is_none_or(|r| {
                scene
                    .room_of(o.cell)
                    .is_some_and(|room| &room.room_id == r)
            })
    }))
}

fn unique<'a>(
    scene: &'a GridScene,
    query: &'a Query,
) -> Result<&'a ObjectInstance, SceneError> {
    let matches: Vec<_> = in_scope(scene, query)?.collect();
    match matches.as_slice() {
        [one] => Ok(one),
        _ => Err(SceneError::AmbiguousQuery {
            category: query.category.clone(),
            found: matches.len(),
        }),
    }
}

/// The true answer value of `query` in `scene`, as option text.
pub fn evaluate_query(scene: &GridScene, query: &Query) -> Result<String, SceneError> {
    match query.kind {
        QueryKind::Existence => {
            let any = in_scope(scene, query)?.next().is_some();
            Ok(if any { "yes" } else { "no" }.to_string())
        }
        QueryKind::Counting => Ok(in_scope(scene, query)?.count().to_string()),
        QueryKind::State | QueryKind::Identification => {
            let attr = query.attribute.as_ref().ok_or(SceneError::MissingAttribute)?;
            let obj = unique(scene, query)?;
            obj.attributes
                .get(attr)
                .cloned()
                .ok_or(SceneError::MissingAttribute)
        }
        QueryKind::Location => {
            let obj = unique(scene, query)?;
            // Scene construction guarantees every object sits in a room.
            Ok(scene
                .room_of(obj.cell)
                .map(|r| r.label.clone())
                .unwrap_or_default())
        }
    }
}

/// Label of the option matching the scene's true answer.
pub fn ground_truth_answer(scene: &GridScene, question: &Question) -> Result<Label, SceneError> {
    let value = evaluate_query(scene, &question.query)?;
    question
        .label_of(&value)
        .ok_or_else(|| SceneError::DatasetInconsistency {
            question: question.question_id.clone(),
            value,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::question::tests::{kitchen_scene, question};
    use crate::scene::{Cell, ObjectInstance, Room, SceneFile};

    #[test]
    fn existence_of_present_object_is_yes() {
        let q = question(
            "q",
            Query {
                kind: QueryKind::Existence,
                category: "stove".into(),
                room: Some("kitchen".into()),
                attribute: None,
            },
            &["yes", "no"],
            Label::A,
        );
        assert_eq!(ground_truth_answer(&kitchen_scene(), &q), Ok(Label::A));
    }

    #[test]
    fn counting_scans_matching_instances() {
        let chairs: Vec<ObjectInstance> = [(0, 0), (1, 0), (2, 1), (3, 3)]
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| ObjectInstance {
                object_id: format!("c{i}"),
                category: "chair".into(),
                cell: Cell::new(x, y),
                attributes: Default::default(),
            })
            .collect();
        let room_a = (0..4).flat_map(|y| (0..3).map(move |x| Cell::new(x, y))).collect();
        let room_b = (0..4).map(|y| Cell::new(3, y)).collect();
        let scene = GridScene::new(SceneFile {
            scene_id: "c".into(),
            width: 4,
            height: 4,
            walls: vec![],
            rooms: vec![
                Room {
                    room_id: "a".into(),
                    label: "dining room".into(),
                    cells: room_a,
                },
                Room {
                    room_id: "b".into(),
                    label: "hall".into(),
                    cells: room_b,
                },
            ],
            objects: chairs,
        })
        .unwrap();
        let q = question(
            "q",
            Query {
                kind: QueryKind::Counting,
                category: "chair".into(),
                room: Some("a".into()),
                attribute: None,
            },
            &["1", "2", "3", "4"],
            Label::C,
        );
        // Brute-force count: three chairs have x < 3.
        let expected = scene
            .objects()
            .iter()
            .filter(|o| o.category == "chair" && o.cell.x < 3)
            .count();
        assert_eq!(expected, 3);
        assert_eq!(ground_truth_answer(&scene, &q), Ok(Label::C));
    }

    #[test]
    fn state_query_on_absent_object_is_ambiguous() {
        let q = question(
            "q",
            Query {
                kind: QueryKind::State,
                category: "tv".into(),
                room: Some("kitchen".into()),
                attribute: Some("state".into()),
            },
            &["on", "off"],
            Label::A,
        );
        assert!(matches!(
            ground_truth_answer(&kitchen_scene(), &q),
            Err(SceneError::AmbiguousQuery { found: 0, .. })
        ));
    }

    #[test]
    fn location_returns_room_label_and_mismatch_is_inconsistent() {
        let mut q = question(
            "q",
            Query {
                kind: QueryKind::Location,
                category: "bathtub".into(),
                room: None,
                attribute: None,
            },
            &["kitchen", "bathroom"],
            Label::B,
        );
        assert_eq!(ground_truth_answer(&kitchen_scene(), &q), Ok(Label::B));
        q.options[1] = "garage".into();
        assert!(matches!(
            ground_truth_answer(&kitchen_scene(), &q),
            Err(SceneError::DatasetInconsistency { .. })
        ));
    }

    #[test]
    fn unknown_room_is_reported() {
        let q = question(
            "q",
            Query {
                kind: QueryKind::Existence,
                category: "stove".into(),
                room: Some("attic".into()),
                attribute: None,
            },
            &["yes", "no"],
            Label::A,
        );
        assert!(matches!(
            ground_truth_answer(&kitchen_scene(), &q),
            Err(SceneError::UnknownRoom(_))
        ));
    }
}
