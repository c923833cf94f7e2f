//! Datagram transports: a deterministic impaired in-process network for
//! tests and demos, and a UDP socket for real deployments. Both sit behind
//! the same [`Transport`] trait.

mod sim;
mod udp;

use std::fmt;
use std::net::SocketAddr;

pub use sim::{Impairment, SimNetwork, SimSocket, SimStats};
pub use udp::UdpTransport;

use crate::proto::MAX_FRAME_LEN;
use crate::Millis;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    /// In-process mailbox id.
    Mailbox(u32),
    Udp(SocketAddr),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Mailbox(id) => write!(f, "mailbox:{id}"),
            Endpoint::Udp(addr) => write!(f, "udp:{addr}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("datagram of {0} bytes exceeds the {MAX_FRAME_LEN}-byte limit")]
    OversizeDatagram(usize),
    #[error("unknown endpoint {0}")]
    UnknownEndpoint(Endpoint),
    #[error("endpoint {0} cannot be reached over this transport")]
    IncompatibleEndpoint(Endpoint),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Best-effort datagram delivery. Sending never blocks; a successful send
/// says nothing about whether the datagram arrives.
pub trait Transport {
    fn local(&self) -> Endpoint;

    fn send(&mut self, to: &Endpoint, bytes: &[u8], now: Millis) -> Result<(), TransportError>;

    /// Returns every datagram due by `now`, oldest first, with its sender.
    fn poll_receive(&mut self, now: Millis) -> Vec<(Vec<u8>, Endpoint)>;
}

pub(crate) fn check_size(bytes: &[u8]) -> Result<(), TransportError> {
    if bytes.len() > MAX_FRAME_LEN {
        Err(TransportError::OversizeDatagram(bytes.len()))
    } else {
        Ok(())
    }
}
