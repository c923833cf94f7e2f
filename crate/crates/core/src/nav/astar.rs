//! A* over the 8-connected cell graph.
//!
//! Axis moves cost one resolution and diagonal moves √2 resolutions. A
//! diagonal move is only allowed when both axis cells it squeezes between are
//! free, so paths never cut an obstacle's corner. The octile distance is an
//! admissible and consistent heuristic for this graph.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use super::grid::{Cell, OccupancyGrid};
use crate::pose::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("start outside the map")]
    StartOutOfBounds,
    #[error("goal outside the map")]
    GoalOutOfBounds,
    #[error("start occupied")]
    StartOccupied,
    #[error("goal occupied")]
    GoalOccupied,
    #[error("goal unreachable")]
    Unreachable,
}

/// Optimal chain of cells from start to goal, both inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    pub cells: Vec<Cell>,
    /// Meters.
    pub cost: f64,
}

/// Neighbor offsets with their step length in cells.
pub const MOVES: [(isize, isize, f64); 8] = [
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, SQRT_2),
    (1, -1, SQRT_2),
    (-1, 1, SQRT_2),
    (-1, -1, SQRT_2),
];

/// Free neighbors of `cell` reachable in one move, with their step cost in cells.
pub fn neighbors(grid: &OccupancyGrid, cell: Cell) -> impl Iterator<Item = (Cell, f64)> + '_ {
    let offset = move |di: isize, dj: isize| -> Option<Cell> {
        let i = cell.i.checked_add_signed(di)?;
        let j = cell.j.checked_add_signed(dj)?;
        let c = Cell::new(i, j);
        grid.is_free(c).then_some(c)
    };
    MOVES.iter().filter_map(move |&(di, dj, step)| {
        let next = offset(di, dj)?;
        if di != 0 && dj != 0 && (offset(di, 0).is_none() || offset(0, dj).is_none()) {
            return None;
        }
        Some((next, step))
    })
}

fn octile(a: Cell, b: Cell) -> f64 {
    let dx = a.i.abs_diff(b.i) as f64;
    let dy = a.j.abs_diff(b.j) as f64;
    dx.max(dy) + (SQRT_2 - 1.0) * dx.min(dy)
}

#[derive(Debug, Clone, Copy)]
struct Open {
    f: f64,
    order: u64,
    idx: usize,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Open {
    // min-heap on f, FIFO among equal f
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.order.cmp(&self.order))
    }
}

/// Plans between two cells of `grid` (already inflated).
pub fn plan_cells(grid: &OccupancyGrid, start: Cell, goal: Cell) -> Result<GridPath, PlanError> {
    if !grid.contains(start) {
        return Err(PlanError::StartOutOfBounds);
    }
    if !grid.contains(goal) {
        return Err(PlanError::GoalOutOfBounds);
    }
    if grid.is_occupied(start) {
        return Err(PlanError::StartOccupied);
    }
    if grid.is_occupied(goal) {
        return Err(PlanError::GoalOccupied);
    }

    let n = grid.len();
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut order = 0u64;

    let start_idx = grid.index(start);
    let goal_idx = grid.index(goal);
    g[start_idx] = 0.0;
    heap.push(Open { f: octile(start, goal), order, idx: start_idx });

    while let Some(Open { idx, .. }) = heap.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        if idx == goal_idx {
            break;
        }
        let cell = grid.cell_at(idx);
        for (next, step) in neighbors(grid, cell) {
            let nidx = grid.index(next);
            if closed[nidx] {
                continue;
            }
            let tentative = g[idx] + step;
            if tentative < g[nidx] {
                g[nidx] = tentative;
                parent[nidx] = idx;
                order += 1;
                heap.push(Open { f: tentative + octile(next, goal), order, idx: nidx });
            }
        }
    }

    if !closed[goal_idx] {
        return Err(PlanError::Unreachable);
    }
    let mut cells = vec![goal];
    let mut cur = goal_idx;
    while cur != start_idx {
        cur = parent[cur];
        cells.push(grid.cell_at(cur));
    }
    cells.reverse();
    Ok(GridPath { cells, cost: g[goal_idx] * grid.resolution() })
}

/// Plans from the cell nearest `start` to the cell nearest the goal point.
pub fn plan(grid: &OccupancyGrid, start: &Pose, goal_x: f64, goal_y: f64) -> Result<GridPath, PlanError> {
    let start_cell = grid.world_to_cell(start.x, start.y).ok_or(PlanError::StartOutOfBounds)?;
    let goal_cell = grid.world_to_cell(goal_x, goal_y).ok_or(PlanError::GoalOutOfBounds)?;
    plan_cells(grid, start_cell, goal_cell)
}
