//! Edge/avatar datagram protocol: wire format, message bodies and the
//! sans-IO reliability engine.

pub mod arq;
pub mod command;
pub mod wire;

pub use arq::{Arq, ArqAction, ArqConfig, ArqError, ArqStats, Liveness, ProtocolEvent, Role};
pub use command::{AckBody, Command, CommandError, OdomBody, SpeakerBody, StatusBody, StatusPhase};
pub use wire::{decode_frame, encode_frame, Frame, MsgType, WireError, MAX_FRAME_LEN};
