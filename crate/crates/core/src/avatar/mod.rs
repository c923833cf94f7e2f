//! Simulated avatar robot: unicycle kinematics, scripted speaker bearings,
//! and the protocol endpoint that ties them to the edge.

pub mod kinematics;
pub mod node;
pub mod script;

pub use kinematics::{arc, rotate, straight, AvatarEvent, AvatarState, KinematicParams, Motion, Side};
pub use node::{AvatarConfig, AvatarLog, AvatarNode, OdomNoise, StartPose};
pub use script::{relative_angle_deg, ScriptError, SpeakerEntry, SpeakerScript};
