//! Breaks a waypoint polyline into in-place turns and short straight drives.

use super::smooth::PlannedPath;
use crate::pose::{angle_diff, Pose};
use crate::proto::command::{Command, MAX_DRIVE_M, MAX_TURN_DEG};

/// Turns below this many degrees are float residue, not motion.
const MIN_TURN_DEG: f64 = 1e-9;
/// Segments shorter than this many meters are skipped.
const MIN_DRIVE_M: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum DiscretizeError {
    #[error("path has no waypoints")]
    EmptyPath,
    #[error("max_drive must be in (0, {MAX_DRIVE_M}] m, got {0}")]
    BadMaxDrive(f64),
    #[error("turn_quantum must be in (0, {MAX_TURN_DEG}] deg, got {0}")]
    BadTurnQuantum(f64),
}

/// Rotate-then-translate decomposition from `start` through every waypoint.
///
/// For each segment the heading error is taken in (-180°, 180°] and turned
/// off in whole `turn_quantum_deg` steps plus one residual turn, then the
/// segment is covered by `ceil(len / max_drive)` drives, all full-length
/// except the last. The sequence always ends with `park`.
pub fn discretize(
    path: &PlannedPath,
    start: &Pose,
    max_drive: f64,
    turn_quantum_deg: f64,
) -> Result<Vec<Command>, DiscretizeError> {
    if path.waypoints.is_empty() {
        return Err(DiscretizeError::EmptyPath);
    }
    if !(max_drive > 0.0 && max_drive <= MAX_DRIVE_M) {
        return Err(DiscretizeError::BadMaxDrive(max_drive));
    }
    if !(turn_quantum_deg > 0.0 && turn_quantum_deg <= MAX_TURN_DEG) {
        return Err(DiscretizeError::BadTurnQuantum(turn_quantum_deg));
    }

    let mut commands = Vec::new();
    let (mut x, mut y, mut theta) = (start.x, start.y, start.theta);
    for &(wx, wy) in &path.waypoints {
        let (dx, dy) = (wx - x, wy - y);
        let dist = dx.hypot(dy);
        if dist < MIN_DRIVE_M {
            continue;
        }
        let heading = dy.atan2(dx);
        let error_deg = angle_diff(heading, theta).to_degrees();
        push_turns(&mut commands, error_deg, turn_quantum_deg);
        push_drives(&mut commands, dist, max_drive);
        x = wx;
        y = wy;
        theta = heading;
    }
    commands.push(Command::Park);
    Ok(commands)
}

fn push_turns(out: &mut Vec<Command>, error_deg: f64, quantum: f64) {
    let magnitude = error_deg.abs();
    let turn = |deg: f64| {
        if error_deg > 0.0 {
            Command::TurnLeft { deg }
        } else {
            Command::TurnRight { deg }
        }
    };
    let whole = (magnitude / quantum).floor();
    for _ in 0..whole as usize {
        out.push(turn(quantum));
    }
    let residual = magnitude - whole * quantum;
    if residual > MIN_TURN_DEG {
        out.push(turn(residual.min(quantum)));
    }
}

fn push_drives(out: &mut Vec<Command>, dist: f64, max_drive: f64) {
    // the epsilon keeps an exact multiple of max_drive from growing a crumb drive
    let count = ((dist / max_drive - 1e-9).ceil() as usize).max(1);
    for _ in 1..count {
        out.push(Command::DriveForward { m: max_drive });
    }
    let last = (dist - (count - 1) as f64 * max_drive).min(max_drive);
    out.push(Command::DriveForward { m: last });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_aligned_drive() {
        let path = PlannedPath::from_points(vec![(0.0, 0.0), (1.0, 0.0)]);
        let cmds = discretize(&path, &Pose::new(0.0, 0.0, 0.0), 0.5, 15.0).unwrap();
        assert_eq!(
            cmds,
            vec![Command::DriveForward { m: 0.5 }, Command::DriveForward { m: 0.5 }, Command::Park]
        );
    }

    #[test]
    fn quarter_turn_is_six_quanta() {
        let path = PlannedPath::from_points(vec![(0.0, 0.0), (0.0, 1.0)]);
        let cmds = discretize(&path, &Pose::new(0.0, 0.0, 0.0), 0.5, 15.0).unwrap();
        let mut expected = vec![Command::TurnLeft { deg: 15.0 }; 6];
        expected.extend([Command::DriveForward { m: 0.5 }, Command::DriveForward { m: 0.5 }, Command::Park]);
        assert_eq!(cmds, expected);
    }

    #[test]
    fn residual_turn_and_remainder_drive() {
        let path = PlannedPath::from_points(vec![(0.0, 0.0), (-1.2, -0.0001)]);
        let cmds = discretize(&path, &Pose::new(0.0, 0.0, 0.0), 0.5, 15.0).unwrap();
        // just under 180 to the right is taken as a right turn
        let turns: f64 = cmds
            .iter()
            .map(|c| match c {
                Command::TurnRight { deg } => *deg,
                Command::TurnLeft { .. } => panic!("expected right turns"),
                _ => 0.0,
            })
            .sum();
        assert!((turns - (180.0 - (0.0001f64 / 1.2).atan().to_degrees())).abs() < 1e-9);
        let drives: Vec<f64> = cmds
            .iter()
            .filter_map(|c| match c {
                Command::DriveForward { m } => Some(*m),
                _ => None,
            })
            .collect();
        assert_eq!(drives.len(), 3);
        assert!(drives.iter().all(|&m| m <= 0.5));
        assert!((drives.iter().sum::<f64>() - 1.2f64.hypot(0.0001)).abs() < 1e-12);
    }

    #[test]
    fn heading_error_of_exactly_180_turns_left() {
        let path = PlannedPath::from_points(vec![(0.0, 0.0), (-1.0, 0.0)]);
        let cmds = discretize(&path, &Pose::new(0.0, 0.0, 0.0), 0.5, 15.0).unwrap();
        assert_eq!(cmds.iter().filter(|c| matches!(c, Command::TurnLeft { deg } if *deg == 15.0)).count(), 12);
    }

    #[test]
    fn single_waypoint_at_start_just_parks() {
        let path = PlannedPath::from_points(vec![(1.0, 1.0)]);
        assert_eq!(discretize(&path, &Pose::new(1.0, 1.0, 0.3), 0.5, 15.0).unwrap(), vec![Command::Park]);
    }

    #[test]
    fn errors() {
        let empty = PlannedPath::from_points(vec![]);
        assert_eq!(discretize(&empty, &Pose::default(), 0.5, 15.0), Err(DiscretizeError::EmptyPath));
        let path = PlannedPath::from_points(vec![(1.0, 0.0)]);
        assert!(discretize(&path, &Pose::default(), 0.0, 15.0).is_err());
        assert!(discretize(&path, &Pose::default(), 0.5, 0.0).is_err());
    }
}
