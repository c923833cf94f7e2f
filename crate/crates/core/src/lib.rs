//! Edge-centric telepresence avatar.
//!
//! The edge node plans and sequences commands for a remote avatar robot and
//! talks to it over a small reliable datagram protocol; a remote master
//! drives the edge over HTTP (see the `telavatar-server` crate).
//!
//! Everything in this crate is sans-IO and driven by explicit millisecond
//! timestamps, so whole edge+avatar systems can run on a virtual clock.

pub mod avatar;
pub mod config;
pub mod edge;
pub mod nav;
pub mod pose;
pub mod proto;
pub mod scenario;
pub mod transport;

/// Milliseconds on a monotonic clock (virtual or wall).
pub type Millis = u64;

pub use pose::Pose;
