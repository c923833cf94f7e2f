//! Planner, smoother and discretizer against brute-force oracles.

use std::collections::VecDeque;
use std::f64::consts::PI;

use proptest::prelude::*;
use telavatar_core::avatar::{rotate, straight};
use telavatar_core::nav::{
    discretize, plan_cells, plan_route, smooth, Cell, NavParams, OccupancyGrid, PlanError, PlannedPath,
};
use telavatar_core::pose::{normalize_angle, Pose};
use telavatar_core::proto::Command;

/// Moves allowed by the no-corner-cutting rule, written out independently.
fn moves(grid: &OccupancyGrid, i: usize, j: usize) -> Vec<(usize, usize, f64)> {
    let free = |i: i64, j: i64| {
        i >= 0 && j >= 0 && (i as usize) < grid.width() && (j as usize) < grid.height() && grid.is_free(Cell::new(i as usize, j as usize))
    };
    let mut out = Vec::new();
    for di in -1i64..=1 {
        for dj in -1i64..=1 {
            if di == 0 && dj == 0 {
                continue;
            }
            let (ni, nj) = (i as i64 + di, j as i64 + dj);
            if !free(ni, nj) {
                continue;
            }
            if di != 0 && dj != 0 && !(free(i as i64 + di, j as i64) && free(i as i64, j as i64 + dj)) {
                continue;
            }
            let w = if di != 0 && dj != 0 { 2f64.sqrt() } else { 1.0 };
            out.push((ni as usize, nj as usize, w));
        }
    }
    out
}

/// O(V^2) Dijkstra; returns the cost in cells or None.
fn dijkstra(grid: &OccupancyGrid, s: Cell, g: Cell) -> Option<f64> {
    let n = grid.width() * grid.height();
    let idx = |i: usize, j: usize| j * grid.width() + i;
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[idx(s.i, s.j)] = 0.0;
    loop {
        let mut best = None;
        for k in 0..n {
            if !done[k] && dist[k].is_finite() && best.is_none_or(|b: usize| dist[k] < dist[b]) {
                best = Some(k);
            }
        }
        let k = best?;
        done[k] = true;
        let (i, j) = (k % grid.width(), k / grid.width());
        if (i, j) == (g.i, g.j) {
            return Some(dist[k]);
        }
        for (ni, nj, w) in moves(grid, i, j) {
            let nk = idx(ni, nj);
            if dist[k] + w < dist[nk] {
                dist[nk] = dist[k] + w;
            }
        }
    }
}

fn flood_fill(grid: &OccupancyGrid, s: Cell, g: Cell) -> bool {
    let mut seen = vec![false; grid.width() * grid.height()];
    let mut queue = VecDeque::from([(s.i, s.j)]);
    seen[s.j * grid.width() + s.i] = true;
    while let Some((i, j)) = queue.pop_front() {
        if (i, j) == (g.i, g.j) {
            return true;
        }
        for (ni, nj, _) in moves(grid, i, j) {
            let k = nj * grid.width() + ni;
            if !seen[k] {
                seen[k] = true;
                queue.push_back((ni, nj));
            }
        }
    }
    false
}

fn grid_strategy(max: usize) -> impl Strategy<Value = OccupancyGrid> {
    (1..=max, 1..=max, 0.0..0.45f64).prop_flat_map(|(w, h, density)| {
        proptest::collection::vec(proptest::bool::weighted(density), w * h)
            .prop_map(move |cells| OccupancyGrid::new(w, h, 0.25, -1.0, 2.0, cells).unwrap())
    })
}

fn cell_in(grid: &OccupancyGrid) -> impl Strategy<Value = Cell> {
    (0..grid.width(), 0..grid.height()).prop_map(|(i, j)| Cell::new(i, j))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn astar_matches_dijkstra_and_flood_fill((grid, s, g) in grid_strategy(20).prop_flat_map(|grid| {
        let a = cell_in(&grid);
        let b = cell_in(&grid);
        (Just(grid), a, b)
    })) {
        let result = plan_cells(&grid, s, g);
        if grid.is_occupied(s) {
            prop_assert_eq!(result, Err(PlanError::StartOccupied));
        } else if grid.is_occupied(g) {
            prop_assert_eq!(result, Err(PlanError::GoalOccupied));
        } else {
            let reachable = flood_fill(&grid, s, g);
            match (result, dijkstra(&grid, s, g)) {
                (Ok(path), Some(cost)) => {
                    prop_assert!(reachable);
                    let tol = 1e-9 * grid.resolution();
                    prop_assert!((path.cost - cost * grid.resolution()).abs() <= tol, "{} vs {}", path.cost, cost);
                    // the returned chain is itself legal and costs what it claims
                    let mut walked = 0.0;
                    for w in path.cells.windows(2) {
                        let step = moves(&grid, w[0].i, w[0].j).into_iter().find(|m| (m.0, m.1) == (w[1].i, w[1].j));
                        prop_assert!(step.is_some(), "illegal move {:?} -> {:?}", w[0], w[1]);
                        walked += step.unwrap().2;
                    }
                    prop_assert!((walked * grid.resolution() - path.cost).abs() <= tol);
                    prop_assert_eq!(path.cells.first(), Some(&s));
                    prop_assert_eq!(path.cells.last(), Some(&g));
                }
                (Err(PlanError::Unreachable), None) => prop_assert!(!reachable),
                (r, d) => prop_assert!(false, "planner {:?} vs oracle {:?}", r, d),
            }
        }
    }

    #[test]
    fn smoothing_is_safe_and_no_longer((grid, s, g) in grid_strategy(16).prop_flat_map(|grid| {
        let a = cell_in(&grid);
        let b = cell_in(&grid);
        (Just(grid), a, b)
    })) {
        let Ok(cells) = plan_cells(&grid, s, g) else { return Ok(()) };
        let path = smooth(&grid, &cells.cells);
        prop_assert!(path.cost <= cells.cost + 1e-9);
        prop_assert_eq!(path.waypoints.first().copied(), Some(grid.cell_center(s)));
        prop_assert_eq!(path.waypoints.last().copied(), Some(grid.cell_center(g)));
        for w in path.waypoints.windows(2) {
            prop_assert!(w[0] != w[1]);
            // quarter-cell supersampling, computed independently
            let len = (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1);
            let n = ((len / (grid.resolution() / 4.0)).ceil() as usize).max(1);
            for k in 0..=n {
                let t = k as f64 / n as f64;
                let (x, y) = (w[0].0 + t * (w[1].0 - w[0].0), w[0].1 + t * (w[1].1 - w[0].1));
                let c = grid.world_to_cell(x, y);
                prop_assert!(c.is_some_and(|c| grid.is_free(c)), "({}, {}) not free", x, y);
            }
        }
    }
}

/// Executes commands with exact closed forms.
fn replay(start: Pose, commands: &[Command]) -> Vec<Pose> {
    let mut pose = start;
    let mut trail = vec![pose];
    for c in commands {
        pose = match *c {
            Command::TurnLeft { deg } => rotate(&pose, deg.to_radians()),
            Command::TurnRight { deg } => rotate(&pose, -deg.to_radians()),
            Command::DriveForward { m } => straight(&pose, m),
            Command::Park => pose,
            other => panic!("discretizer emitted {other:?}"),
        };
        trail.push(pose);
    }
    trail
}

fn waypoints() -> impl Strategy<Value = (Pose, Vec<(f64, f64)>)> {
    let start = (-5.0..5.0f64, -5.0..5.0f64, -PI..PI).prop_map(|(x, y, t)| Pose::new(x, y, t));
    let pts = proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..8);
    (start, pts).prop_map(|(s, mut pts)| {
        pts.insert(0, (s.x, s.y));
        (s, pts)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn discretizer_replays_to_goal((start, pts) in waypoints(), max_drive in 0.05..1.0f64, quantum in 1.0..90.0f64) {
        let path = PlannedPath::from_points(pts.clone());
        let cmds = discretize(&path, &start, max_drive, quantum).unwrap();
        prop_assert_eq!(cmds.last(), Some(&Command::Park));
        for c in &cmds {
            match *c {
                Command::DriveForward { m } => prop_assert!(m > 0.0 && m <= max_drive + 1e-12),
                Command::TurnLeft { deg } | Command::TurnRight { deg } => prop_assert!(deg > 0.0 && deg <= quantum + 1e-12),
                _ => {}
            }
        }
        let trail = replay(start, &cmds);
        let end = trail.last().unwrap();
        let goal = *pts.last().unwrap();
        prop_assert!(end.distance_to(goal.0, goal.1) < 1e-6, "ended {:?}, goal {:?}", end, goal);
        // the final heading faces along the last non-degenerate segment
        let mut heading = start.theta;
        for w in pts.windows(2) {
            if (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1) > 1e-9 {
                heading = (w[1].1 - w[0].1).atan2(w[1].0 - w[0].0);
            }
        }
        prop_assert!(normalize_angle(end.theta - heading).abs() < 1e-6);
        // every waypoint is visited
        for &(wx, wy) in &pts {
            prop_assert!(trail.iter().any(|p| p.distance_to(wx, wy) < 1e-6));
        }
    }

    #[test]
    fn routes_on_random_maps_replay_within_half_cell((grid, s, g, theta) in grid_strategy(20).prop_flat_map(|grid| {
        let a = cell_in(&grid);
        let b = cell_in(&grid);
        (Just(grid), a, b, -3.1..3.1f64)
    })) {
        let (sx, sy) = grid.cell_center(s);
        let (gx, gy) = grid.cell_center(g);
        let params = NavParams { inflation_radius_m: 0.0, ..NavParams::default() };
        let Ok(route) = plan_route(&grid, &Pose::new(sx, sy, theta), gx, gy, &params) else { return Ok(()) };
        let trail = replay(Pose::new(sx, sy, theta), &route.commands);
        for &(wx, wy) in &route.path.waypoints {
            prop_assert!(trail.iter().any(|p| p.distance_to(wx, wy) <= grid.resolution() / 2.0));
        }
        prop_assert!(trail.last().unwrap().distance_to(gx, gy) < 1e-6);
    }
}

#[test]
fn worked_examples() {
    let grid = OccupancyGrid::empty(3, 3, 1.0);
    let p = plan_cells(&grid, Cell::new(0, 0), Cell::new(2, 2)).unwrap();
    assert!((p.cost - 2.0 * 2f64.sqrt()).abs() < 1e-12);

    let mut blocked = OccupancyGrid::empty(3, 3, 1.0);
    blocked.set_occupied(Cell::new(1, 1), true);
    let p = plan_cells(&blocked, Cell::new(0, 0), Cell::new(2, 2)).unwrap();
    assert_eq!(Some(p.cost), dijkstra(&blocked, Cell::new(0, 0), Cell::new(2, 2)));

    // an L-shaped detour keeps exactly one corner
    let mut l = OccupancyGrid::empty(5, 5, 1.0);
    for i in 0..4 {
        for j in 1..5 {
            l.set_occupied(Cell::new(i, j), true);
        }
    }
    let cells = plan_cells(&l, Cell::new(0, 0), Cell::new(4, 4)).unwrap();
    let path = smooth(&l, &cells.cells);
    assert_eq!(path.waypoints, vec![(0.0, 0.0), (4.0, 0.0), (4.0, 4.0)]);

    let single = smooth(&l, &[Cell::new(0, 0)]);
    assert_eq!(single.waypoints.len(), 1);
    assert_eq!(single.cost, 0.0);
}
