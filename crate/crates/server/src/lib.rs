//! Wall-clock runtimes around the sans-IO cores in `telavatar-core`.
//!
//! [`EdgeServer`] owns the edge on a single event loop, speaks the datagram
//! protocol over UDP and serves the HTTP API with its event stream.
//! [`AvatarRuntime`] runs a simulated avatar against a remote edge.

mod avatar;
mod clock;
mod edge;
mod http;

use std::net::SocketAddr;

pub use avatar::AvatarRuntime;
pub use clock::WallClock;
pub use edge::{EdgeHandle, EdgeServer, LoopClosed};
pub use http::router;

/// Loop period of both runtimes.
pub const TICK_MS: u64 = 10;

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("cannot bind {what} address {addr}: {source}")]
    Bind {
        what: &'static str,
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot resolve {0}")]
    Resolve(String),
    #[error(transparent)]
    Map(#[from] telavatar_core::nav::MapError),
}

/// Resolves `addr` to its first socket address.
pub fn resolve(addr: &str) -> Result<SocketAddr, ServerError> {
    use std::net::ToSocketAddrs;
    addr.to_socket_addrs()
        .ok()
        .and_then(|mut it| it.next())
        .ok_or_else(|| ServerError::Resolve(addr.to_string()))
}
