//! Auto-mode navigation: occupancy grid, obstacle inflation, A* planning,
//! line-of-sight smoothing and discretization into low-level commands.

pub mod astar;
pub mod discretize;
pub mod grid;
pub mod inflate;
pub mod smooth;

use serde::{Deserialize, Serialize};

pub use astar::{plan, plan_cells, GridPath, PlanError};
pub use discretize::{discretize, DiscretizeError};
pub use grid::{Cell, MapError, OccupancyGrid};
pub use inflate::inflate;
pub use smooth::{segment_clear, smooth, smooth_points, PlannedPath};

use crate::pose::Pose;
use crate::proto::Command;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavParams {
    pub inflation_radius_m: f64,
    pub max_drive_m: f64,
    pub turn_quantum_deg: f64,
}

impl Default for NavParams {
    fn default() -> Self {
        Self { inflation_radius_m: 0.30, max_drive_m: 0.5, turn_quantum_deg: 15.0 }
    }
}

impl NavParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.inflation_radius_m >= 0.0 && self.inflation_radius_m.is_finite()) {
            return Err(format!("inflation_radius_m must be >= 0, got {}", self.inflation_radius_m));
        }
        if !(self.max_drive_m > 0.0 && self.max_drive_m <= crate::proto::command::MAX_DRIVE_M) {
            return Err(format!("max_drive_m must be in (0, 5], got {}", self.max_drive_m));
        }
        if !(self.turn_quantum_deg > 0.0 && self.turn_quantum_deg <= 180.0) {
            return Err(format!("turn_quantum_deg must be in (0, 180], got {}", self.turn_quantum_deg));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum RouteError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
}

/// Full auto-mode result for one goal.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub cells: GridPath,
    pub path: PlannedPath,
    pub commands: Vec<Command>,
}

impl Route {
    /// Heading the robot ends with after executing `commands`.
    pub fn final_heading(&self, start: &Pose) -> f64 {
        let mut heading = start.theta;
        let mut at = (start.x, start.y);
        for &(x, y) in &self.path.waypoints {
            if (x - at.0).hypot(y - at.1) > 1e-9 {
                heading = (y - at.1).atan2(x - at.0);
            }
            at = (x, y);
        }
        heading
    }
}

/// Plans on an already-inflated grid from the exact start position to the
/// exact goal point, smooths, and discretizes.
///
/// The cell chain is bracketed by the exact start and goal points; each lies
/// inside its own (free) end cell, so the bracketed polyline stays
/// collision-free and the robot ends on the clicked point rather than on the
/// nearest cell center.
pub fn plan_route(
    inflated: &OccupancyGrid,
    start: &Pose,
    goal_x: f64,
    goal_y: f64,
    params: &NavParams,
) -> Result<Route, RouteError> {
    let cells = plan(inflated, start, goal_x, goal_y)?;
    let mut points = Vec::with_capacity(cells.cells.len() + 2);
    let mut push = |p: (f64, f64)| {
        if points.last().is_none_or(|&(lx, ly): &(f64, f64)| (p.0 - lx).hypot(p.1 - ly) > 1e-9) {
            points.push(p);
        }
    };
    push((start.x, start.y));
    for &c in &cells.cells {
        push(inflated.cell_center(c));
    }
    push((goal_x, goal_y));
    let path = smooth_points(inflated, &points);
    let commands = discretize(&path, start, params.max_drive_m, params.turn_quantum_deg)?;
    Ok(Route { cells, path, commands })
}

/// ASCII picture of the grid, row `j = 0` first: `#` occupied, `+` inflation
/// margin, `*` path cell, `S`/`G` endpoints.
pub fn render_ascii(raw: &OccupancyGrid, inflated: &OccupancyGrid, route: Option<&Route>) -> String {
    let mut canvas: Vec<Vec<char>> = (0..raw.height())
        .map(|j| {
            (0..raw.width())
                .map(|i| {
                    let c = Cell::new(i, j);
                    if raw.is_occupied(c) {
                        '#'
                    } else if inflated.is_occupied(c) {
                        '+'
                    } else {
                        '.'
                    }
                })
                .collect()
        })
        .collect();
    if let Some(route) = route {
        // mark every cell the smoothed segments pass through
        for w in route.path.waypoints.windows(2) {
            for (x, y) in smooth::segment_samples(raw, w[0], w[1]) {
                if let Some(c) = raw.world_to_cell(x, y) {
                    canvas[c.j][c.i] = '*';
                }
            }
        }
        if let (Some(first), Some(last)) = (route.cells.cells.first(), route.cells.cells.last()) {
            canvas[first.j][first.i] = 'S';
            canvas[last.j][last.i] = 'G';
        }
    }
    let mut out = String::new();
    for row in canvas {
        out.extend(row);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_room_goal_is_one_segment() {
        let grid = OccupancyGrid::empty(20, 20, 0.25);
        let route = plan_route(&grid, &Pose::new(0.5, 0.5, 0.0), 2.5, 0.5, &NavParams::default()).unwrap();
        assert_eq!(route.path.waypoints, vec![(0.5, 0.5), (2.5, 0.5)]);
        assert_eq!(route.commands.len(), 5);
        assert_eq!(route.commands.last(), Some(&Command::Park));
    }

    #[test]
    fn off_center_goal_is_hit_exactly() {
        let grid = OccupancyGrid::empty(20, 20, 0.25);
        let route = plan_route(&grid, &Pose::new(0.5, 0.5, 0.0), 3.1, 2.07, &NavParams::default()).unwrap();
        assert_eq!(*route.path.waypoints.last().unwrap(), (3.1, 2.07));
    }

    #[test]
    fn render_marks_endpoints() {
        let mut raw = OccupancyGrid::empty(6, 3, 1.0);
        raw.set_occupied(Cell::new(3, 2), true);
        let inflated = inflate(&raw, 1.0);
        let route = plan_route(&inflated, &Pose::new(0.0, 0.0, 0.0), 5.0, 0.0, &NavParams::default()).unwrap();
        let text = render_ascii(&raw, &inflated, Some(&route));
        assert_eq!(text, "S****G\n...+..\n..+#+.\n");
    }
}
