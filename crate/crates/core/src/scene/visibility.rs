//! Line-of-sight over the occupancy grid.
//!
//! Visibility is a Chebyshev radius plus an integer raster line test: a cell
//! is seen when every cell strictly between it and the viewer is free. The
//! line is always traced from the smaller endpoint to the larger one, so the
//! test is symmetric.

use std::collections::BTreeSet;

use super::{Cell, GridScene, Pose};
use crate::error::SceneError;

/// Free and wall cells in line of sight from one pose.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Scan {
    pub free: BTreeSet<Cell>,
    pub blocked: BTreeSet<Cell>,
}

/// Cells strictly between `a` and `b` on the canonical raster line.
pub fn line_between(a: Cell, b: Cell) -> Vec<Cell> {
    let (start, end) = if a <= b { (a, b) } else { (b, a) };
    let (dx, dy) = (end.x - start.x, end.y - start.y);
    let (adx, ady) = (dx.abs(), dy.abs());
    let (sx, sy) = (dx.signum(), dy.signum());
    let mut out = Vec::new();
    if adx >= ady {
        // Minor offset after i major steps is round_half_up(i * ady / adx).
        let mut err = adx;
        let mut y = start.y;
        for i in 1..adx {
            err += 2 * ady;
            if err >= 2 * adx {
                y += sy;
                err -= 2 * adx;
            }
            out.push(Cell::new(start.x + sx * i, y));
        }
    } else {
        let mut err = ady;
        let mut x = start.x;
        for i in 1..ady {
            err += 2 * adx;
            if err >= 2 * ady {
                x += sx;
                err -= 2 * ady;
            }
            out.push(Cell::new(x, start.y + sy * i));
        }
    }
    out
}

pub fn scan(scene: &GridScene, pose: Pose, range: u32) -> Result<Scan, SceneError> {
    scene.check_pose(&pose)?;
    let r = range as i32;
    let origin = pose.cell;
    let mut out = Scan::default();
    for y in (origin.y - r).max(0)..=(origin.y + r).min(scene.height() - 1) {
        for x in (origin.x - r).max(0)..=(origin.x + r).min(scene.width() - 1) {
            let c = Cell::new(x, y);
            let clear = line_between(origin, c)
                .into_iter()
                .all(|between| !scene.is_wall(between));
            if !clear {
                continue;
            }
            if scene.is_wall(c) {
                out.blocked.insert(c);
            } else {
                out.free.insert(c);
            }
        }
    }
    Ok(out)
}

/// Free cells within Chebyshev distance `range` that have clear line of sight.
pub fn visible_cells(
    scene: &GridScene,
    pose: Pose,
    range: u32,
) -> Result<BTreeSet<Cell>, SceneError> {
    scan(scene, pose, range).map(|s| s.free)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::tests::open_scene;
    use crate::scene::{Heading, Room, SceneFile};
    use proptest::prelude::*;

    /// Brute-force reference: scan every grid cell, rebuild each line from the
    /// closed-form rounding rule.
    fn oracle_visible(scene: &GridScene, origin: Cell, range: i32) -> BTreeSet<Cell> {
        let closed_form_line = |a: Cell, b: Cell| -> Vec<Cell> {
            let (s, e) = if a <= b { (a, b) } else { (b, a) };
            let (dx, dy) = (e.x - s.x, e.y - s.y);
            let n = dx.abs().max(dy.abs());
            (1..n)
                .map(|i| {
                    let off = |d: i32| d.signum() * (2 * i * d.abs() + n).div_euclid(2 * n);
                    if dx.abs() >= dy.abs() {
                        Cell::new(s.x + dx.signum() * i, s.y + off(dy))
                    } else {
                        Cell::new(s.x + off(dx), s.y + dy.signum() * i)
                    }
                })
                .collect()
        };
        let mut out = BTreeSet::new();
        for y in 0..scene.height() {
            for x in 0..scene.width() {
                let c = Cell::new(x, y);
                if scene.is_wall(c) || origin.chebyshev(c) > range {
                    continue;
                }
                if closed_form_line(origin, c).iter().all(|b| !scene.is_wall(*b)) {
                    out.insert(c);
                }
            }
        }
        out
    }

    fn walled_scene(w: i32, h: i32, walls: Vec<Cell>) -> GridScene {
        GridScene::new(SceneFile {
            scene_id: "w".into(),
            width: w,
            height: h,
            walls,
            rooms: vec![],
            objects: vec![],
        })
        .unwrap()
    }

    #[test]
    fn zero_range_sees_only_own_cell() {
        let scene = open_scene(5, 5);
        let pose = Pose::new(Cell::new(2, 3), Heading::South);
        assert_eq!(
            visible_cells(&scene, pose, 0).unwrap(),
            BTreeSet::from([Cell::new(2, 3)])
        );
    }

    #[test]
    fn open_room_center_sees_everything() {
        let scene = open_scene(5, 5);
        let pose = Pose::new(Cell::new(2, 2), Heading::North);
        let seen = visible_cells(&scene, pose, 2).unwrap();
        assert_eq!(seen.len(), 25);
        assert_eq!(seen, oracle_visible(&scene, Cell::new(2, 2), 2));
    }

    #[test]
    fn wall_column_hides_cells_behind_it() {
        // Wall column at x = 3 on a 7x7 grid, viewer right next to it.
        let walls = (0..7).map(|y| Cell::new(3, y)).collect();
        let scene = walled_scene(7, 7, walls);
        let origin = Cell::new(2, 3);
        let seen = visible_cells(&scene, Pose::new(origin, Heading::East), 3).unwrap();
        assert!(seen.iter().all(|c| c.x < 3));
        assert_eq!(seen, oracle_visible(&scene, origin, 3));
        let blocked = scan(&scene, Pose::new(origin, Heading::East), 3).unwrap().blocked;
        assert!(blocked.contains(&Cell::new(3, 3)));
    }

    #[test]
    fn pose_on_wall_is_rejected() {
        let scene = walled_scene(3, 3, vec![Cell::new(1, 1)]);
        let err = visible_cells(&scene, Pose::new(Cell::new(1, 1), Heading::North), 1);
        assert!(matches!(err, Err(SceneError::InvalidPose(_))));
        let err = visible_cells(&scene, Pose::new(Cell::new(5, 1), Heading::North), 1);
        assert!(matches!(err, Err(SceneError::InvalidPose(_))));
    }

    #[test]
    fn line_is_endpoint_order_independent() {
        let a = Cell::new(0, 0);
        let b = Cell::new(5, 2);
        assert_eq!(line_between(a, b), line_between(b, a));
        assert_eq!(line_between(a, Cell::new(1, 1)), vec![]);
    }

    fn arb_scene() -> impl Strategy<Value = (GridScene, Cell, u32)> {
        (4i32..10, 4i32..10)
            .prop_flat_map(|(w, h)| {
                (
                    Just((w, h)),
                    proptest::collection::vec(proptest::bool::weighted(0.25), (w * h) as usize),
                    0..w,
                    0..h,
                    0u32..5,
                )
            })
            .prop_map(|((w, h), wall_bits, ox, oy, r)| {
                let origin = Cell::new(ox, oy);
                let walls = wall_bits
                    .iter()
                    .enumerate()
                    .filter(|(_, &b)| b)
                    .map(|(i, _)| Cell::new(i as i32 % w, i as i32 / w))
                    .filter(|&c| c != origin)
                    .collect();
                let scene = GridScene::new(SceneFile {
                    scene_id: "p".into(),
                    width: w,
                    height: h,
                    walls,
                    rooms: Vec::<Room>::new(),
                    objects: vec![],
                })
                .unwrap();
                (scene, origin, r)
            })
    }

    proptest! {
        #[test]
        fn matches_brute_force_oracle((scene, origin, r) in arb_scene()) {
            let seen = visible_cells(&scene, Pose::new(origin, Heading::North), r).unwrap();
            prop_assert!(seen.contains(&origin));
            prop_assert_eq!(seen, oracle_visible(&scene, origin, r as i32));
        }

        #[test]
        fn visibility_is_symmetric((scene, origin, r) in arb_scene()) {
            let seen = visible_cells(&scene, Pose::new(origin, Heading::North), r).unwrap();
            for b in seen {
                let back = visible_cells(&scene, Pose::new(b, Heading::North), r).unwrap();
                prop_assert!(back.contains(&origin));
            }
        }
    }
}
