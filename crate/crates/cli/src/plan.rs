//! Offline planning report.

use std::path::Path;

use serde_json::json;
use telavatar_core::avatar::{rotate, straight};
use telavatar_core::config::SystemConfig;
use telavatar_core::nav::{inflate, plan_route, render_ascii, OccupancyGrid, Route};
use telavatar_core::proto::Command;
use telavatar_core::Pose;

use crate::Failure;

/// Replay tolerance for the final pose.
const REPLAY_TOL: f64 = 1e-6;

pub fn run(
    map: &Path,
    start: Pose,
    goal: (f64, f64),
    config: Option<&Path>,
    verify: bool,
    as_json: bool,
) -> Result<(), Failure> {
    let nav = match config {
        Some(path) => SystemConfig::load(path)?.nav,
        None => Default::default(),
    };
    let text = std::fs::read_to_string(map).map_err(|e| Failure::config(format!("cannot read {}: {e}", map.display())))?;
    let raw = OccupancyGrid::from_map_json(&text).map_err(|e| Failure::config(format!("{}: {e}", map.display())))?;
    let inflated = inflate(&raw, nav.inflation_radius_m);
    let route = plan_route(&inflated, &start, goal.0, goal.1, &nav).map_err(Failure::run)?;
    let check = verify.then(|| replay_check(&raw, &start, &route));

    if as_json {
        let report = json!({
            "waypoints": route.path.waypoints.iter().map(|&(x, y)| [x, y]).collect::<Vec<_>>(),
            "cost": route.path.cost,
            "grid_cost": route.cells.cost,
            "commands": route.commands,
            "verified": check.as_ref().map(|c| c.is_ok()),
        });
        println!("{report}");
    } else {
        println!("cost: {:.6} m ({} cells, grid cost {:.6} m)", route.path.cost, route.cells.cells.len(), route.cells.cost);
        println!("waypoints:");
        for (x, y) in &route.path.waypoints {
            println!("  ({x:.4}, {y:.4})");
        }
        println!("commands:");
        for c in &route.commands {
            println!("  {}", serde_json::to_string(c).expect("command serializes"));
        }
        println!();
        print!("{}", render_ascii(&raw, &inflated, Some(&route)));
        if let Some(Ok(end)) = &check {
            println!("verify: ok, replay ends at ({:.6}, {:.6}, {:.6})", end.x, end.y, end.theta);
        }
    }
    match check {
        Some(Err(reason)) => Err(Failure::run(format!("verify failed: {reason}"))),
        _ => Ok(()),
    }
}

/// Executes the commands with exact kinematics and checks the route is
/// followed: every waypoint is passed within half a cell and the replay ends
/// on the last waypoint.
fn replay_check(grid: &OccupancyGrid, start: &Pose, route: &Route) -> Result<Pose, String> {
    let mut pose = *start;
    let mut trail = vec![pose];
    for c in &route.commands {
        pose = match *c {
            Command::TurnLeft { deg } => rotate(&pose, deg.to_radians()),
            Command::TurnRight { deg } => rotate(&pose, -deg.to_radians()),
            Command::DriveForward { m } => straight(&pose, m),
            Command::Park => pose,
            other => return Err(format!("unexpected command {other}")),
        };
        trail.push(pose);
    }
    for &(x, y) in &route.path.waypoints {
        if !trail.iter().any(|p| p.distance_to(x, y) <= grid.resolution() / 2.0) {
            return Err(format!("waypoint ({x:.4}, {y:.4}) never reached"));
        }
    }
    let &(gx, gy) = route.path.waypoints.last().ok_or("empty path")?;
    let miss = pose.distance_to(gx, gy);
    if miss > REPLAY_TOL {
        return Err(format!("replay ends {miss:.3e} m from the goal"));
    }
    let heading_err = telavatar_core::pose::angle_diff(route.final_heading(start), pose.theta).abs();
    if heading_err > REPLAY_TOL {
        return Err(format!("replay heading off by {heading_err:.3e} rad"));
    }
    Ok(pose)
}
