use serde::{Deserialize, Serialize};

use super::grid::{Cell, OccupancyGrid};

/// World-frame polyline the robot should follow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPath {
    pub waypoints: Vec<(f64, f64)>,
    /// Polyline length, meters.
    pub cost: f64,
}

impl PlannedPath {
    pub fn from_points(waypoints: Vec<(f64, f64)>) -> Self {
        let cost = polyline_length(&waypoints);
        Self { waypoints, cost }
    }
}

pub fn polyline_length(points: &[(f64, f64)]) -> f64 {
    points.windows(2).map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1)).sum()
}

/// Sample points along segment `a`-`b`, both ends included, spaced at most
/// a quarter cell apart.
pub fn segment_samples(grid: &OccupancyGrid, a: (f64, f64), b: (f64, f64)) -> impl Iterator<Item = (f64, f64)> {
    let step = grid.resolution() / 4.0;
    let len = (b.0 - a.0).hypot(b.1 - a.1);
    let n = ((len / step).ceil() as usize).max(1);
    (0..=n).map(move |k| {
        let t = k as f64 / n as f64;
        (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
    })
}

/// Every supersampled point of the segment falls in a free cell.
pub fn segment_clear(grid: &OccupancyGrid, a: (f64, f64), b: (f64, f64)) -> bool {
    segment_samples(grid, a, b).all(|(x, y)| grid.is_free_at(x, y))
}

/// Greedy line-of-sight shortcutting over an arbitrary collision-free
/// polyline: from each kept point, jump to the farthest later point that is
/// directly visible.
pub fn smooth_points(grid: &OccupancyGrid, points: &[(f64, f64)]) -> PlannedPath {
    if points.len() <= 2 {
        return PlannedPath::from_points(points.to_vec());
    }
    let mut kept = vec![points[0]];
    let mut anchor = 0;
    let last = points.len() - 1;
    while anchor < last {
        let next = (anchor + 1..=last)
            .rev()
            .find(|&k| k == anchor + 1 || segment_clear(grid, points[anchor], points[k]))
            .expect("range is non-empty");
        kept.push(points[next]);
        anchor = next;
    }
    PlannedPath::from_points(kept)
}

/// Shortcuts a cell chain into waypoints at the kept cells' centers.
pub fn smooth(grid: &OccupancyGrid, cells: &[Cell]) -> PlannedPath {
    let points: Vec<_> = cells.iter().map(|&c| grid.cell_center(c)).collect();
    smooth_points(grid, &points)
}
