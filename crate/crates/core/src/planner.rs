//! Occupancy grid, A* search with the Manhattan heuristic, and turn-checkpoint extraction.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::geometry::Point;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("cell ({0}, {1}) is outside the map")]
    OutOfBounds(i32, i32),
    #[error("cell ({0}, {1}) is blocked")]
    BlockedEndpoint(i32, i32),
    #[error("no path between the endpoints")]
    NoPath,
    #[error("path is empty")]
    EmptyPath,
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("map file line {line}: {reason}")]
    MapFormat { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn step(self, h: Heading) -> Cell {
        let (dx, dy) = h.delta();
        Cell::new(self.x + dx, self.y + dy)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

pub fn manhattan(a: Cell, b: Cell) -> u32 {
    a.x.abs_diff(b.x) + a.y.abs_diff(b.y)
}

/// Compass heading on the grid; north is +y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Heading {
    East,
    North,
    West,
    South,
}

impl Heading {
    /// Neighbor expansion order used by A*.
    pub const ALL: [Heading; 4] = [Heading::East, Heading::North, Heading::West, Heading::South];

    pub fn delta(self) -> (i32, i32) {
        match self {
            Heading::East => (1, 0),
            Heading::North => (0, 1),
            Heading::West => (-1, 0),
            Heading::South => (0, -1),
        }
    }

    pub fn from_delta(dx: i32, dy: i32) -> Option<Self> {
        Heading::ALL.into_iter().find(|h| h.delta() == (dx, dy))
    }

    /// Radians, counter-clockwise from +x.
    pub fn angle(self) -> f64 {
        use std::f64::consts::{FRAC_PI_2, PI};
        match self {
            Heading::East => 0.0,
            Heading::North => FRAC_PI_2,
            Heading::West => PI,
            Heading::South => -FRAC_PI_2,
        }
    }

    pub fn left(self) -> Self {
        match self {
            Heading::East => Heading::North,
            Heading::North => Heading::West,
            Heading::West => Heading::South,
            Heading::South => Heading::East,
        }
    }

    pub fn right(self) -> Self {
        self.left().left().left()
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "E" | "EAST" => Some(Heading::East),
            "N" | "NORTH" => Some(Heading::North),
            "W" | "WEST" => Some(Heading::West),
            "S" | "SOUTH" => Some(Heading::South),
            _ => None,
        }
    }
}

/// Occupancy grid. Cell (x, y) covers [x, x+1) x [y, y+1) in cell units; y = 0 is the south edge.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    width: usize,
    height: usize,
    cell_size: f64,
    walkable: Vec<bool>,
}

impl GridMap {
    pub fn new(width: usize, height: usize, cell_size: f64, walkable: Vec<bool>) -> Result<Self, PlanError> {
        let fail = |reason: String| PlanError::MapFormat { line: 0, reason };
        if width == 0 || height == 0 {
            return Err(fail("width and height must be >= 1".into()));
        }
        if walkable.len() != width * height {
            return Err(fail(format!("mask has {} cells, expected {}", walkable.len(), width * height)));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(fail("cell size must be positive".into()));
        }
        Ok(Self {
            width,
            height,
            cell_size,
            walkable,
        })
    }

    pub fn open(width: usize, height: usize) -> Self {
        Self::new(width, height, 1.0, vec![true; width * height]).expect("valid dimensions")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    fn index(&self, c: Cell) -> usize {
        c.y as usize * self.width + c.x as usize
    }

    pub fn is_walkable(&self, c: Cell) -> bool {
        self.in_bounds(c) && self.walkable[self.index(c)]
    }

    pub fn set_walkable(&mut self, c: Cell, open: bool) {
        if self.in_bounds(c) {
            let i = self.index(c);
            self.walkable[i] = open;
        }
    }

    /// Walkable cells in row-major order (y outer, x inner).
    pub fn walkable_cells(&self) -> Vec<Cell> {
        (0..self.height as i32)
            .flat_map(|y| (0..self.width as i32).map(move |x| Cell::new(x, y)))
            .filter(|&c| self.is_walkable(c))
            .collect()
    }

    /// Center of a cell in feet.
    pub fn cell_center<T: Scalar>(&self, c: Cell) -> Point<T> {
        let s = self.cell_size;
        Point::new(T::lit((f64::from(c.x) + 0.5) * s), T::lit((f64::from(c.y) + 0.5) * s))
    }

    /// Cell containing a point given in feet (may be out of bounds).
    pub fn cell_at<T: Scalar>(&self, p: Point<T>) -> Cell {
        let s = self.cell_size;
        Cell::new(
            (p.x.to_f64_lossy() / s).floor() as i32,
            (p.y.to_f64_lossy() / s).floor() as i32,
        )
    }

    pub fn is_walkable_point<T: Scalar>(&self, p: Point<T>) -> bool {
        p.x.is_finite() && p.y.is_finite() && self.is_walkable(self.cell_at(p))
    }

    /// Parses the text format: a `width height cell_size_ft` line, then
    /// `height` rows of `.` (walkable) / `#` (blocked). The first grid row is y = 0.
    pub fn parse(text: &str) -> Result<Self, PlanError> {
        let mut lines = text.lines().enumerate();
        let (map, _) = Self::parse_lines(&mut lines)?;
        for (i, l) in lines {
            if !l.trim().is_empty() {
                return Err(PlanError::MapFormat {
                    line: i + 1,
                    reason: "unexpected content after grid".into(),
                });
            }
        }
        Ok(map)
    }

    /// Reads the header and grid rows from `lines`, leaving the iterator after the grid.
    pub(crate) fn parse_lines<'a>(
        lines: &mut impl Iterator<Item = (usize, &'a str)>,
    ) -> Result<(Self, usize), PlanError> {
        let (hline, header) = lines
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or(PlanError::MapFormat {
                line: 1,
                reason: "missing header".into(),
            })?;
        let bad = |line: usize, reason: &str| PlanError::MapFormat {
            line: line + 1,
            reason: reason.to_string(),
        };
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(bad(hline, "header must be `width height cell_size_ft`"));
        }
        let width: usize = parts[0].parse().map_err(|_| bad(hline, "bad width"))?;
        let height: usize = parts[1].parse().map_err(|_| bad(hline, "bad height"))?;
        let cell_size: f64 = parts[2].parse().map_err(|_| bad(hline, "bad cell size"))?;
        if width == 0 || height == 0 {
            return Err(bad(hline, "width and height must be >= 1"));
        }
        let mut walkable = Vec::with_capacity(width * height);
        let mut last = hline;
        for row in 0..height {
            let (i, l) = lines
                .next()
                .ok_or_else(|| bad(last + 1, &format!("missing grid row {row}")))?;
            last = i;
            let l = l.trim_end_matches('\r');
            if l.chars().count() != width {
                return Err(bad(i, &format!("grid row {row} must have {width} characters")));
            }
            for ch in l.chars() {
                walkable.push(match ch {
                    '.' => true,
                    '#' => false,
                    _ => return Err(bad(i, &format!("unexpected character {ch:?}"))),
                });
            }
        }
        let map = Self::new(width, height, cell_size, walkable).map_err(|e| match e {
            PlanError::MapFormat { reason, .. } => bad(hline, &reason),
            other => other,
        })?;
        Ok((map, last + 1))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.width, self.height, self.cell_size);
        for y in 0..self.height as i32 {
            for x in 0..self.width as i32 {
                out.push(if self.is_walkable(Cell::new(x, y)) { '.' } else { '#' });
            }
            out.push('\n');
        }
        out
    }

    /// Copy where every cell within `clearance` cells (Chebyshev distance) of a
    /// blocked cell or of the map border is blocked too.
    pub fn inflated(&self, clearance: u32) -> GridMap {
        if clearance == 0 {
            return self.clone();
        }
        let r = clearance as i32;
        let mut out = self.clone();
        for c in self.walkable_cells() {
            let near_obstacle = (-r..=r).any(|dy| (-r..=r).any(|dx| !self.is_walkable(Cell::new(c.x + dx, c.y + dy))));
            if near_obstacle {
                out.set_walkable(c, false);
            }
        }
        out
    }

    fn check_endpoint(&self, c: Cell) -> Result<(), PlanError> {
        if !self.in_bounds(c) {
            return Err(PlanError::OutOfBounds(c.x, c.y));
        }
        if !self.is_walkable(c) {
            return Err(PlanError::BlockedEndpoint(c.x, c.y));
        }
        Ok(())
    }
}

/// A 4-connected sequence of walkable cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedPath {
    pub cells: Vec<Cell>,
}

impl PlannedPath {
    /// Number of moves.
    pub fn cost(&self) -> usize {
        self.cells.len().saturating_sub(1)
    }

    /// Checks adjacency, walkability and that no cell repeats.
    pub fn validate(&self, map: &GridMap) -> Result<(), PlanError> {
        let mut seen = std::collections::HashSet::new();
        for (i, &c) in self.cells.iter().enumerate() {
            if !map.is_walkable(c) {
                return Err(PlanError::InvalidPath(format!("cell {c} not walkable")));
            }
            if !seen.insert(c) {
                return Err(PlanError::InvalidPath(format!("cell {c} repeated")));
            }
            if i > 0 && manhattan(self.cells[i - 1], c) != 1 {
                return Err(PlanError::InvalidPath(format!("cells {} and {c} not adjacent", self.cells[i - 1])));
            }
        }
        Ok(())
    }
}

/// Minimum-length 4-connected path.
///
/// Open nodes are ordered by lower f = g + h, then lower h, then discovery
/// order; neighbors are discovered East, North, West, South. The result is
/// therefore fully deterministic.
pub fn astar(map: &GridMap, start: Cell, goal: Cell) -> Result<PlannedPath, PlanError> {
    map.check_endpoint(start)?;
    map.check_endpoint(goal)?;
    let n = map.width * map.height;
    let mut g = vec![u32::MAX; n];
    let mut parent: Vec<Option<Cell>> = vec![None; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let mut seq: u64 = 0;

    g[map.index(start)] = 0;
    open.push(Reverse((manhattan(start, goal), manhattan(start, goal), seq, start)));

    while let Some(Reverse((_, _, _, cur))) = open.pop() {
        let ci = map.index(cur);
        if closed[ci] {
            continue;
        }
        closed[ci] = true;
        if cur == goal {
            let mut cells = vec![cur];
            let mut at = cur;
            while let Some(p) = parent[map.index(at)] {
                cells.push(p);
                at = p;
            }
            cells.reverse();
            return Ok(PlannedPath { cells });
        }
        for h in Heading::ALL {
            let nb = cur.step(h);
            if !map.is_walkable(nb) {
                continue;
            }
            let ni = map.index(nb);
            if closed[ni] {
                continue;
            }
            let tentative = g[ci] + 1;
            if tentative < g[ni] {
                g[ni] = tentative;
                parent[ni] = Some(cur);
                let hn = manhattan(nb, goal);
                seq += 1;
                open.push(Reverse((tentative + hn, hn, seq, nb)));
            }
        }
    }
    Err(PlanError::NoPath)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckpointAction {
    TurnLeft90,
    TurnRight90,
    Stop,
}

impl CheckpointAction {
    pub fn label(self) -> &'static str {
        match self {
            CheckpointAction::TurnLeft90 => "turn_left_90",
            CheckpointAction::TurnRight90 => "turn_right_90",
            CheckpointAction::Stop => "stop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Checkpoint {
    pub cell: Cell,
    pub action: CheckpointAction,
}

fn turn_between(incoming: Heading, outgoing: Heading) -> Result<Option<CheckpointAction>, PlanError> {
    let (ax, ay) = incoming.delta();
    let (bx, by) = outgoing.delta();
    let cross = ax * by - ay * bx;
    match cross.signum() {
        1 => Ok(Some(CheckpointAction::TurnLeft90)),
        -1 => Ok(Some(CheckpointAction::TurnRight90)),
        _ if incoming == outgoing => Ok(None),
        _ => Err(PlanError::InvalidPath("path reverses direction".into())),
    }
}

fn direction(a: Cell, b: Cell) -> Result<Heading, PlanError> {
    Heading::from_delta(b.x - a.x, b.y - a.y)
        .ok_or_else(|| PlanError::InvalidPath(format!("cells {a} and {b} not adjacent")))
}

/// Turn checkpoints at every direction change plus a final Stop at the goal.
///
/// If the first move does not match `initial_heading`, turn checkpoints at the
/// start cell come first: one for a 90 degree difference, two right turns for
/// a reversal.
pub fn extract_checkpoints(path: &PlannedPath, initial_heading: Heading) -> Result<Vec<Checkpoint>, PlanError> {
    let cells = &path.cells;
    let last = *cells.last().ok_or(PlanError::EmptyPath)?;
    let mut out = Vec::new();
    if cells.len() >= 2 {
        let first = direction(cells[0], cells[1])?;
        if first != initial_heading {
            match turn_between(initial_heading, first) {
                Ok(Some(action)) => out.push(Checkpoint { cell: cells[0], action }),
                Ok(None) => {}
                Err(_) => {
                    for _ in 0..2 {
                        out.push(Checkpoint {
                            cell: cells[0],
                            action: CheckpointAction::TurnRight90,
                        });
                    }
                }
            }
        }
        for w in cells.windows(3) {
            let incoming = direction(w[0], w[1])?;
            let outgoing = direction(w[1], w[2])?;
            if let Some(action) = turn_between(incoming, outgoing)? {
                out.push(Checkpoint { cell: w[1], action });
            }
        }
    }
    out.push(Checkpoint {
        cell: last,
        action: CheckpointAction::Stop,
    });
    Ok(out)
}

/// Initial heading that needs no leading turn: the first move's direction.
pub fn first_heading(path: &PlannedPath) -> Option<Heading> {
    match path.cells.as_slice() {
        [a, b, ..] => direction(*a, *b).ok(),
        _ => None,
    }
}

/// `ix,iy,action` CSV of a plan.
pub fn checkpoints_to_csv(checkpoints: &[Checkpoint]) -> String {
    let mut out = String::from("ix,iy,action\n");
    for c in checkpoints {
        let _ = writeln!(out, "{},{},{}", c.cell.x, c.cell.y, c.action.label());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(cells: &[(i32, i32)]) -> PlannedPath {
        PlannedPath {
            cells: cells.iter().map(|&(x, y)| Cell::new(x, y)).collect(),
        }
    }

    #[test]
    fn manhattan_values() {
        assert_eq!(manhattan(Cell::new(0, 0), Cell::new(0, 0)), 0);
        assert_eq!(manhattan(Cell::new(1, 2), Cell::new(4, 6)), 7);
        assert_eq!(manhattan(Cell::new(4, 6), Cell::new(1, 2)), 7);
    }

    #[test]
    fn trivial_and_open_grid_paths() {
        let map = GridMap::open(3, 3);
        let p = astar(&map, Cell::new(1, 1), Cell::new(1, 1)).unwrap();
        assert_eq!(p.cells, vec![Cell::new(1, 1)]);
        let p = astar(&map, Cell::new(0, 0), Cell::new(2, 2)).unwrap();
        assert_eq!(p.cells.len(), 5);
        p.validate(&map).unwrap();
    }

    #[test]
    fn astar_errors() {
        let mut map = GridMap::open(3, 3);
        assert_eq!(astar(&map, Cell::new(-1, 0), Cell::new(1, 1)), Err(PlanError::OutOfBounds(-1, 0)));
        map.set_walkable(Cell::new(2, 2), false);
        assert_eq!(astar(&map, Cell::new(0, 0), Cell::new(2, 2)), Err(PlanError::BlockedEndpoint(2, 2)));
        for y in 0..3 {
            map.set_walkable(Cell::new(1, y), false);
        }
        assert_eq!(astar(&map, Cell::new(0, 0), Cell::new(2, 0)), Err(PlanError::NoPath));
    }

    #[test]
    fn astar_is_deterministic_on_open_grid() {
        let map = GridMap::open(4, 4);
        let p = astar(&map, Cell::new(0, 0), Cell::new(3, 3)).unwrap();
        assert_eq!(p, astar(&map, Cell::new(0, 0), Cell::new(3, 3)).unwrap());
    }

    #[test]
    fn straight_path_only_stops() {
        let cps = extract_checkpoints(&path(&[(0, 0), (1, 0), (2, 0), (3, 0), (4, 0)]), Heading::East).unwrap();
        assert_eq!(cps, vec![Checkpoint { cell: Cell::new(4, 0), action: CheckpointAction::Stop }]);
    }

    #[test]
    fn one_corner() {
        let cps = extract_checkpoints(&path(&[(0, 0), (1, 0), (2, 0), (2, 1), (2, 2)]), Heading::East).unwrap();
        assert_eq!(
            cps,
            vec![
                Checkpoint { cell: Cell::new(2, 0), action: CheckpointAction::TurnLeft90 },
                Checkpoint { cell: Cell::new(2, 2), action: CheckpointAction::Stop },
            ]
        );
        let cps = extract_checkpoints(&path(&[(0, 2), (1, 2), (1, 1), (1, 0)]), Heading::East).unwrap();
        assert_eq!(cps[0].action, CheckpointAction::TurnRight90);
    }

    #[test]
    fn zigzag_two_corners() {
        let cps = extract_checkpoints(&path(&[(0, 0), (1, 0), (1, 1), (2, 1), (3, 1)]), Heading::East).unwrap();
        let actions: Vec<_> = cps.iter().map(|c| c.action).collect();
        assert_eq!(
            actions,
            vec![CheckpointAction::TurnLeft90, CheckpointAction::TurnRight90, CheckpointAction::Stop]
        );
    }

    #[test]
    fn leading_turn_when_heading_differs() {
        let p = path(&[(0, 0), (0, 1)]);
        let cps = extract_checkpoints(&p, Heading::East).unwrap();
        assert_eq!(cps[0], Checkpoint { cell: Cell::new(0, 0), action: CheckpointAction::TurnLeft90 });
        let cps = extract_checkpoints(&p, Heading::South).unwrap();
        assert_eq!(cps.len(), 3);
        assert!(cps[..2].iter().all(|c| c.action == CheckpointAction::TurnRight90));
    }

    #[test]
    fn checkpoint_errors() {
        assert_eq!(extract_checkpoints(&path(&[]), Heading::East), Err(PlanError::EmptyPath));
        assert!(matches!(
            extract_checkpoints(&path(&[(0, 0), (1, 0), (0, 0)]), Heading::East),
            Err(PlanError::InvalidPath(_))
        ));
        assert!(matches!(
            extract_checkpoints(&path(&[(0, 0), (2, 0)]), Heading::East),
            Err(PlanError::InvalidPath(_))
        ));
    }

    #[test]
    fn map_text_round_trip() {
        let text = "4 2 1\n..#.\n....\n";
        let map = GridMap::parse(text).unwrap();
        assert!(!map.is_walkable(Cell::new(2, 0)));
        assert!(map.is_walkable(Cell::new(2, 1)));
        assert_eq!(GridMap::parse(&map.to_text()).unwrap(), map);
        assert!(GridMap::parse("4 2 1\n....\n").is_err());
        assert!(GridMap::parse("4 1 1\n..x.\n").is_err());
    }

    #[test]
    fn inflation_keeps_centerline() {
        let map = GridMap::open(7, 5).inflated(2);
        assert_eq!(map.walkable_cells(), vec![Cell::new(2, 2), Cell::new(3, 2), Cell::new(4, 2)]);
        assert_eq!(GridMap::open(3, 3).inflated(0), GridMap::open(3, 3));
    }

    #[test]
    fn plan_csv_layout() {
        let cps = [Checkpoint { cell: Cell::new(2, 0), action: CheckpointAction::TurnLeft90 }];
        assert_eq!(checkpoints_to_csv(&cps), "ix,iy,action\n2,0,turn_left_90\n");
    }
}
