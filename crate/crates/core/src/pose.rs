use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

/// Planar pose in the world frame. `theta` is counterclockwise from +x, in [-π, π).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: normalize_angle(theta) }
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (x - self.x).hypot(y - self.y)
    }

    pub fn heading_deg(&self) -> f64 {
        self.theta.to_degrees()
    }
}

/// Wraps an angle in radians into [-π, π).
pub fn normalize_angle(theta: f64) -> f64 {
    let wrapped = (theta + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to exactly TAU for inputs a hair below a multiple of 2π
    if wrapped >= PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

/// Wraps an angle in degrees into [-180, 180).
pub fn normalize_deg(deg: f64) -> f64 {
    let wrapped = (deg + 180.0).rem_euclid(360.0) - 180.0;
    if wrapped >= 180.0 {
        wrapped - 360.0
    } else {
        wrapped
    }
}

/// Signed angular difference `to - from` in (-π, π].
pub fn angle_diff(to: f64, from: f64) -> f64 {
    let d = normalize_angle(to - from);
    if d == -PI {
        PI
    } else {
        d
    }
}
