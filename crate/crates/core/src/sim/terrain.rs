use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{Pos, SimError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    Open,
    Impassable,
    Crossing,
}

impl Cell {
    #[inline]
    pub fn traversable(self) -> bool {
        !matches!(self, Cell::Impassable)
    }

    pub fn symbol(self) -> char {
        match self {
            Cell::Open => '.',
            Cell::Impassable => '#',
            Cell::Crossing => '=',
        }
    }

    pub fn from_symbol(c: char) -> Option<Cell> {
        match c {
            '.' => Some(Cell::Open),
            '#' => Some(Cell::Impassable),
            '=' => Some(Cell::Crossing),
            _ => None,
        }
    }
}

/// Integer cell coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellPos {
    pub x: i32,
    pub y: i32,
}

impl CellPos {
    pub fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn of(p: Pos) -> Self {
        Self { x: p.x.floor() as i32, y: p.y.floor() as i32 }
    }

    pub fn center(self) -> Pos {
        Pos::new(self.x as f64 + 0.5, self.y as f64 + 0.5)
    }
}

pub const MIN_GRID_SIDE: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerrainGrid {
    width: usize,
    height: usize,
    cell_km: f64,
    cells: Vec<Cell>,
}

impl TerrainGrid {
    pub fn new(width: usize, height: usize, cell_km: f64, cells: Vec<Cell>) -> Result<Self, SimError> {
        if width < MIN_GRID_SIDE || height < MIN_GRID_SIDE {
            return Err(SimError::InvalidTerrain(format!(
                "grid {width}x{height} is smaller than {MIN_GRID_SIDE}x{MIN_GRID_SIDE}"
            )));
        }
        if !(cell_km > 0.0 && cell_km.is_finite()) {
            return Err(SimError::InvalidTerrain(format!("cell_km must be positive, got {cell_km}")));
        }
        if cells.len() != width * height {
            return Err(SimError::InvalidTerrain(format!("expected {} cells, got {}", width * height, cells.len())));
        }
        Ok(Self { width, height, cell_km, cells })
    }

    pub fn open(width: usize, height: usize, cell_km: f64) -> Result<Self, SimError> {
        Self::new(width, height, cell_km, vec![Cell::Open; width * height])
    }

    /// Parse rows of `.`, `#`, `=` (open, impassable, crossing). Row 0 is y = 0.
    pub fn from_rows<S: AsRef<str>>(rows: &[S], cell_km: f64) -> Result<Self, SimError> {
        let height = rows.len();
        let width = rows.first().map(|r| r.as_ref().chars().count()).unwrap_or(0);
        let mut cells = Vec::with_capacity(width * height);
        for (y, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.chars().count() != width {
                return Err(SimError::InvalidTerrain(format!("row {y} has a different width")));
            }
            for (x, c) in row.chars().enumerate() {
                cells.push(
                    Cell::from_symbol(c).ok_or_else(|| {
                        SimError::InvalidTerrain(format!("unknown terrain symbol {c:?} at ({x}, {y})"))
                    })?,
                );
            }
        }
        Self::new(width, height, cell_km, cells)
    }

    pub fn to_rows(&self) -> Vec<String> {
        (0..self.height).map(|y| (0..self.width).map(|x| self.cells[y * self.width + x].symbol()).collect()).collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_km(&self) -> f64 {
        self.cell_km
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Map diagonal in kilometers.
    pub fn diagonal_km(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64) * self.cell_km
    }

    #[inline]
    pub fn in_bounds_cell(&self, c: CellPos) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    #[inline]
    pub fn in_bounds(&self, p: Pos) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x < self.width as f64 && p.y < self.height as f64
    }

    #[inline]
    pub fn cell(&self, c: CellPos) -> Option<Cell> {
        if self.in_bounds_cell(c) {
            Some(self.cells[c.y as usize * self.width + c.x as usize])
        } else {
            None
        }
    }

    #[inline]
    pub fn cell_at(&self, p: Pos) -> Option<Cell> {
        if self.in_bounds(p) {
            self.cell(CellPos::of(p))
        } else {
            None
        }
    }

    pub fn set(&mut self, c: CellPos, cell: Cell) {
        assert!(self.in_bounds_cell(c), "cell {c:?} out of bounds");
        self.cells[c.y as usize * self.width + c.x as usize] = cell;
    }

    /// In bounds and not impassable.
    #[inline]
    pub fn traversable(&self, p: Pos) -> bool {
        self.cell_at(p).is_some_and(Cell::traversable)
    }

    /// Sample the straight segment `from -> to` at intervals of at most half
    /// a cell (both endpoints included). Every sample must be traversable.
    pub fn segment_clear(&self, from: Pos, to: Pos) -> bool {
        let len = from.dist(to);
        let steps = (len / 0.5).ceil().max(1.0) as usize;
        (0..=steps).all(|i| {
            let t = i as f64 / steps as f64;
            self.traversable(Pos::new(from.x + (to.x - from.x) * t, from.y + (to.y - from.y) * t))
        })
    }
}

/// Inclusive cell rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[i32; 4]", into = "[i32; 4]")]
pub struct CellRect {
    pub x0: i32,
    pub y0: i32,
    pub x1: i32,
    pub y1: i32,
}

impl From<[i32; 4]> for CellRect {
    fn from(v: [i32; 4]) -> Self {
        Self { x0: v[0], y0: v[1], x1: v[2], y1: v[3] }
    }
}

impl From<CellRect> for [i32; 4] {
    fn from(r: CellRect) -> Self {
        [r.x0, r.y0, r.x1, r.y1]
    }
}

impl CellRect {
    pub fn new(x0: i32, y0: i32, x1: i32, y1: i32) -> Self {
        Self { x0, y0, x1, y1 }
    }

    #[inline]
    pub fn contains_cell(&self, c: CellPos) -> bool {
        c.x >= self.x0 && c.x <= self.x1 && c.y >= self.y0 && c.y <= self.y1
    }

    pub fn is_well_formed(&self) -> bool {
        self.x0 <= self.x1 && self.y0 <= self.y1
    }
}

/// Named union of inclusive cell rectangles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub name: String,
    pub rects: Vec<CellRect>,
    /// Blue must hold every objective region to win early.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub objective: bool,
}

impl Region {
    pub fn new(name: impl Into<String>, rects: Vec<CellRect>) -> Self {
        Self { name: name.into(), rects, objective: false }
    }

    #[inline]
    pub fn contains(&self, p: Pos) -> bool {
        let c = CellPos::of(p);
        self.rects.iter().any(|r| r.contains_cell(c))
    }
}

const STRAIGHT: u32 = 10;
const DIAGONAL: u32 = 14;

/// Shortest-path cost field toward one target cell, 8-connected without
/// corner cutting. Used for route-aware steering around impassable terrain.
#[derive(Clone, Debug)]
pub struct DistanceField {
    width: usize,
    height: usize,
    target: CellPos,
    cost: Vec<u32>,
}

impl DistanceField {
    pub fn toward(terrain: &TerrainGrid, target: CellPos) -> Self {
        let (w, h) = (terrain.width, terrain.height);
        let mut cost = vec![u32::MAX; w * h];
        let mut heap = BinaryHeap::new();
        if terrain.cell(target).is_some_and(Cell::traversable) {
            cost[target.y as usize * w + target.x as usize] = 0;
            heap.push(Reverse((0u32, target.y, target.x)));
        }
        while let Some(Reverse((d, y, x))) = heap.pop() {
            let here = CellPos::new(x, y);
            if d > cost[y as usize * w + x as usize] {
                continue;
            }
            for (dx, dy) in NEIGHBORS {
                let n = CellPos::new(x + dx, y + dy);
                if !Self::step_ok(terrain, here, n) {
                    continue;
                }
                let nd = d + if dx != 0 && dy != 0 { DIAGONAL } else { STRAIGHT };
                let slot = &mut cost[n.y as usize * w + n.x as usize];
                if nd < *slot {
                    *slot = nd;
                    heap.push(Reverse((nd, n.y, n.x)));
                }
            }
        }
        Self { width: w, height: h, target, cost }
    }

    fn step_ok(terrain: &TerrainGrid, from: CellPos, to: CellPos) -> bool {
        let pass = |c: CellPos| terrain.cell(c).is_some_and(Cell::traversable);
        if !pass(to) {
            return false;
        }
        if from.x != to.x && from.y != to.y {
            pass(CellPos::new(to.x, from.y)) && pass(CellPos::new(from.x, to.y))
        } else {
            true
        }
    }

    pub fn target(&self) -> CellPos {
        self.target
    }

    pub fn cost(&self, c: CellPos) -> Option<u32> {
        if c.x < 0 || c.y < 0 || c.x as usize >= self.width || c.y as usize >= self.height {
            return None;
        }
        let v = self.cost[c.y as usize * self.width + c.x as usize];
        (v != u32::MAX).then_some(v)
    }

    /// Point to steer toward from `p`: the center of the cheapest neighbor,
    /// or the target point itself once in the target cell. `None` if the
    /// target is unreachable from `p`.
    pub fn next_waypoint(&self, p: Pos, goal: Pos) -> Option<Pos> {
        let here = CellPos::of(p);
        let here_cost = self.cost(here)?;
        if here_cost == 0 {
            return Some(goal);
        }
        let mut best: Option<(u32, CellPos)> = None;
        for (dx, dy) in NEIGHBORS {
            let n = CellPos::new(here.x + dx, here.y + dy);
            if let Some(c) = self.cost(n) {
                let diag = dx != 0 && dy != 0;
                let step = if diag { DIAGONAL } else { STRAIGHT };
                // Only follow edges that are actually on a shortest path.
                if c + step == here_cost && best.is_none_or(|(bc, _)| c < bc) {
                    best = Some((c, n));
                }
            }
        }
        best.map(|(_, n)| if n == self.target { goal } else { n.center() })
    }
}

const NEIGHBORS: [(i32, i32); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
