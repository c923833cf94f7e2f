use std::io::ErrorKind;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};

use super::{check_size, Endpoint, Transport, TransportError};
use crate::proto::MAX_FRAME_LEN;
use crate::Millis;

/// Non-blocking UDP socket, one frame per datagram.
#[derive(Debug)]
pub struct UdpTransport {
    socket: UdpSocket,
    local: SocketAddr,
}

impl UdpTransport {
    pub fn bind<A: ToSocketAddrs>(addr: A) -> std::io::Result<Self> {
        let socket = UdpSocket::bind(addr)?;
        socket.set_nonblocking(true)?;
        let local = socket.local_addr()?;
        Ok(Self { socket, local })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local
    }
}

impl Transport for UdpTransport {
    fn local(&self) -> Endpoint {
        Endpoint::Udp(self.local)
    }

    fn send(&mut self, to: &Endpoint, bytes: &[u8], _now: Millis) -> Result<(), TransportError> {
        check_size(bytes)?;
        let Endpoint::Udp(addr) = to else {
            return Err(TransportError::IncompatibleEndpoint(to.clone()));
        };
        match self.socket.send_to(bytes, addr) {
            Ok(_) => Ok(()),
            // best effort: a full buffer or an ICMP-refused peer is loss, not failure
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::ConnectionRefused) => Ok(()),
            Err(e) => Err(e.into()),
        }
    }

    fn poll_receive(&mut self, _now: Millis) -> Vec<(Vec<u8>, Endpoint)> {
        let mut out = Vec::new();
        let mut buf = [0u8; MAX_FRAME_LEN + 1];
        loop {
            match self.socket.recv_from(&mut buf) {
                Ok((n, from)) => out.push((buf[..n].to_vec(), Endpoint::Udp(from))),
                Err(e) if e.kind() == ErrorKind::WouldBlock => break,
                Err(e) if e.kind() == ErrorKind::ConnectionRefused || e.kind() == ErrorKind::ConnectionReset => {
                    continue
                }
                Err(e) => {
                    log::warn!("udp receive failed: {e}");
                    break;
                }
            }
        }
        out
    }
}
