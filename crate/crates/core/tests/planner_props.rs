mod common;

use common::*;
use proptest::prelude::*;
use rssinav::planner::{
    astar, extract_checkpoints, first_heading, manhattan, CheckpointAction, Cell, GridMap, Heading, PlanError,
};

fn walkable_pair(map: &GridMap, a: usize, b: usize) -> Option<(Cell, Cell)> {
    let cells = map.walkable_cells();
    if cells.is_empty() {
        return None;
    }
    Some((cells[a % cells.len()], cells[b % cells.len()]))
}

fn turn_count(path: &[Cell]) -> usize {
    path.windows(3)
        .filter(|w| (w[1].x - w[0].x, w[1].y - w[0].y) != (w[2].x - w[1].x, w[2].y - w[1].y))
        .count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn astar_cost_equals_bfs(seed in any::<u64>(), density in 0.0f64..0.4, a in any::<usize>(), b in any::<usize>()) {
        let mut r = rng(seed);
        let map = random_grid(&mut r, 20, 20, density);
        let Some((start, goal)) = walkable_pair(&map, a, b) else { return Ok(()) };
        match (astar(&map, start, goal), bfs_cost(&map, start, goal)) {
            (Ok(path), Some(best)) => {
                prop_assert_eq!(path.cost(), best);
                prop_assert!(path.cells.len() - 1 >= manhattan(start, goal) as usize);
                prop_assert!(path.validate(&map).is_ok());
                prop_assert_eq!(path.cells[0], start);
                prop_assert_eq!(*path.cells.last().unwrap(), goal);
            }
            (Err(PlanError::NoPath), None) => {}
            (got, want) => prop_assert!(false, "astar {:?} vs bfs {:?}", got, want),
        }
    }

    #[test]
    fn open_grid_paths_are_manhattan(w in 1usize..15, h in 1usize..15, a in any::<usize>(), b in any::<usize>()) {
        let map = GridMap::open(w, h);
        let (start, goal) = walkable_pair(&map, a, b).unwrap();
        let path = astar(&map, start, goal).unwrap();
        prop_assert_eq!(path.cost(), manhattan(start, goal) as usize);
    }

    #[test]
    fn checkpoints_follow_turns(seed in any::<u64>(), a in any::<usize>(), b in any::<usize>()) {
        let mut r = rng(seed);
        let map = random_grid(&mut r, 12, 12, 0.25);
        let Some((start, goal)) = walkable_pair(&map, a, b) else { return Ok(()) };
        let Ok(path) = astar(&map, start, goal) else { return Ok(()) };
        let heading = first_heading(&path).unwrap_or(Heading::East);
        let cps = extract_checkpoints(&path, heading).unwrap();
        prop_assert_eq!(cps.last().unwrap().action, CheckpointAction::Stop);
        prop_assert_eq!(cps.last().unwrap().cell, goal);
        prop_assert_eq!(cps.len() - 1, turn_count(&path.cells));
        for cp in &cps {
            prop_assert!(path.cells.contains(&cp.cell));
        }
    }

    #[test]
    fn inflation_only_removes_cells(seed in any::<u64>(), clearance in 0u32..3) {
        let mut r = rng(seed);
        let map = random_grid(&mut r, 10, 10, 0.1);
        let inflated = map.inflated(clearance);
        for c in inflated.walkable_cells() {
            prop_assert!(map.is_walkable(c));
        }
    }
}

#[test]
fn reference_corner_route_has_one_right_turn() {
    use rssinav::rfsim::{reference_world, REFERENCE_CORNER_CLEARANCE, REFERENCE_CORNER_GOAL, REFERENCE_CORNER_START};
    let world = reference_world::<f64>();
    let map = world.map.inflated(REFERENCE_CORNER_CLEARANCE);
    let path = astar(&map, REFERENCE_CORNER_START, REFERENCE_CORNER_GOAL).unwrap();
    let cps = extract_checkpoints(&path, first_heading(&path).unwrap()).unwrap();
    let actions: Vec<_> = cps.iter().map(|c| (c.cell, c.action)).collect();
    assert_eq!(
        actions,
        vec![
            (Cell::new(2, 2), CheckpointAction::TurnRight90),
            (Cell::new(2, 8), CheckpointAction::Stop),
        ]
    );
}
