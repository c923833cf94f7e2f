//! Frame layout of the edge/avatar datagram protocol.
//!
//! Every datagram carries exactly one frame: a fixed 14-byte big-endian
//! header followed by a UTF-8 JSON payload.
//!
//! ```text
//!  0      2     3        4          8             12           14
//!  +------+-----+--------+----------+-------------+------------+---------
//!  | 'ET' | ver | type   | seq (BE) | session (BE)| len (BE)   | payload
//!  +------+-----+--------+----------+-------------+------------+---------
//! ```

use serde::de::DeserializeOwned;
use serde::Serialize;

pub const MAGIC: [u8; 2] = [0x45, 0x54];
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 14;
pub const MAX_FRAME_LEN: usize = 1400;
pub const MAX_PAYLOAD_LEN: usize = MAX_FRAME_LEN - HEADER_LEN;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("payload too large: frame would be {0} bytes (max {MAX_FRAME_LEN})")]
    PayloadTooLarge(usize),
    #[error("bad magic {0:02x} {1:02x}")]
    BadMagic(u8, u8),
    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u8),
    #[error("truncated frame: header declares {declared} payload bytes, {available} present")]
    TruncatedFrame { declared: usize, available: usize },
    #[error("malformed {msg_type:?} payload: {reason}")]
    MalformedPayload { msg_type: MsgType, reason: String },
}

/// Message type code carried in header byte 3.
///
/// Codes this version does not know are kept as `Unknown` so newer peers can
/// extend the protocol without older ones rejecting the datagram outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MsgType {
    Hello,
    HelloAck,
    Ping,
    Pong,
    Cmd,
    CmdAck,
    CmdStatus,
    StatusAck,
    Odom,
    SpeakerAngle,
    Unknown(u8),
}

impl MsgType {
    pub fn code(self) -> u8 {
        match self {
            MsgType::Hello => 0x01,
            MsgType::HelloAck => 0x02,
            MsgType::Ping => 0x03,
            MsgType::Pong => 0x04,
            MsgType::Cmd => 0x10,
            MsgType::CmdAck => 0x11,
            MsgType::CmdStatus => 0x12,
            MsgType::StatusAck => 0x13,
            MsgType::Odom => 0x20,
            MsgType::SpeakerAngle => 0x21,
            MsgType::Unknown(code) => code,
        }
    }

    pub fn from_code(code: u8) -> Self {
        match code {
            0x01 => MsgType::Hello,
            0x02 => MsgType::HelloAck,
            0x03 => MsgType::Ping,
            0x04 => MsgType::Pong,
            0x10 => MsgType::Cmd,
            0x11 => MsgType::CmdAck,
            0x12 => MsgType::CmdStatus,
            0x13 => MsgType::StatusAck,
            0x20 => MsgType::Odom,
            0x21 => MsgType::SpeakerAngle,
            other => MsgType::Unknown(other),
        }
    }

    pub fn is_known(self) -> bool {
        !matches!(self, MsgType::Unknown(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MsgType,
    pub seq: u32,
    pub session_id: u32,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MsgType, seq: u32, session_id: u32, payload: Vec<u8>) -> Self {
        Self { msg_type, seq, session_id, payload }
    }

    /// Builds a frame whose payload is `body` serialized as compact JSON.
    pub fn with_json<T: Serialize>(msg_type: MsgType, seq: u32, session_id: u32, body: &T) -> Self {
        let payload = serde_json::to_vec(body).expect("protocol payloads always serialize");
        Self::new(msg_type, seq, session_id, payload)
    }

    /// Frame with an empty payload, used for PING/PONG/HELLO/HELLO_ACK.
    pub fn empty(msg_type: MsgType, seq: u32, session_id: u32) -> Self {
        Self::new(msg_type, seq, session_id, Vec::new())
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    /// Parses the payload as a typed body. An empty payload is read as `{}`.
    pub fn json<T: DeserializeOwned>(&self) -> Result<T, WireError> {
        let text: &[u8] = if self.payload.is_empty() { b"{}" } else { &self.payload };
        serde_json::from_slice(text).map_err(|e| WireError::MalformedPayload {
            msg_type: self.msg_type,
            reason: e.to_string(),
        })
    }
}

pub fn encode_frame(frame: &Frame) -> Result<Vec<u8>, WireError> {
    let total = frame.encoded_len();
    if total > MAX_FRAME_LEN {
        return Err(WireError::PayloadTooLarge(total));
    }
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(frame.msg_type.code());
    out.extend_from_slice(&frame.seq.to_be_bytes());
    out.extend_from_slice(&frame.session_id.to_be_bytes());
    out.extend_from_slice(&(frame.payload.len() as u16).to_be_bytes());
    out.extend_from_slice(&frame.payload);
    Ok(out)
}

pub fn decode_frame(bytes: &[u8]) -> Result<Frame, WireError> {
    if bytes.len() >= 2 && bytes[..2] != MAGIC {
        return Err(WireError::BadMagic(bytes[0], bytes[1]));
    }
    if bytes.len() < HEADER_LEN {
        return Err(WireError::TruncatedFrame { declared: HEADER_LEN, available: bytes.len() });
    }
    if bytes[2] != VERSION {
        return Err(WireError::UnsupportedVersion(bytes[2]));
    }
    let msg_type = MsgType::from_code(bytes[3]);
    let seq = u32::from_be_bytes(bytes[4..8].try_into().unwrap());
    let session_id = u32::from_be_bytes(bytes[8..12].try_into().unwrap());
    let declared = u16::from_be_bytes(bytes[12..14].try_into().unwrap()) as usize;
    let available = bytes.len() - HEADER_LEN;
    if declared != available {
        return Err(WireError::TruncatedFrame { declared, available });
    }
    let payload = bytes[HEADER_LEN..].to_vec();

    if msg_type.is_known() && !payload.is_empty() {
        let malformed = |reason: String| WireError::MalformedPayload { msg_type, reason };
        let text = std::str::from_utf8(&payload).map_err(|e| malformed(e.to_string()))?;
        serde_json::from_str::<serde::de::IgnoredAny>(text).map_err(|e| malformed(e.to_string()))?;
    }

    Ok(Frame { msg_type, seq, session_id, payload })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ping_golden_bytes() {
        let bytes = encode_frame(&Frame::empty(MsgType::Ping, 1, 7)).unwrap();
        assert_eq!(
            bytes,
            [0x45, 0x54, 0x01, 0x03, 0, 0, 0, 1, 0, 0, 0, 7, 0, 0]
        );
        let back = decode_frame(&bytes).unwrap();
        assert_eq!(back.msg_type, MsgType::Ping);
        assert_eq!((back.seq, back.session_id), (1, 7));
    }

    #[test]
    fn cmd_park_layout() {
        let frame = Frame::new(MsgType::Cmd, 2, 7, br#"{"op":"park"}"#.to_vec());
        let bytes = encode_frame(&frame).unwrap();
        assert_eq!(bytes.len(), 14 + 13);
        assert_eq!(bytes[3], 0x10);
        assert_eq!(&bytes[12..14], &[0, 13]);
        assert_eq!(&bytes[14..], br#"{"op":"park"}"#);
    }

    #[test]
    fn oversize_payload_rejected() {
        let frame = Frame::new(MsgType::Odom, 1, 1, vec![b' '; 1500]);
        assert_eq!(encode_frame(&frame), Err(WireError::PayloadTooLarge(1514)));
        let at_limit = Frame::new(MsgType::Unknown(0x7f), 1, 1, vec![0; MAX_PAYLOAD_LEN]);
        assert_eq!(encode_frame(&at_limit).unwrap().len(), MAX_FRAME_LEN);
    }

    #[test]
    fn corrupt_magic() {
        let mut bytes = encode_frame(&Frame::empty(MsgType::Ping, 1, 7)).unwrap();
        bytes[0] = 0x00;
        assert!(matches!(decode_frame(&bytes), Err(WireError::BadMagic(0x00, 0x54))));
    }

    #[test]
    fn bad_version() {
        let mut bytes = encode_frame(&Frame::empty(MsgType::Ping, 1, 7)).unwrap();
        bytes[2] = 2;
        assert_eq!(decode_frame(&bytes), Err(WireError::UnsupportedVersion(2)));
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = encode_frame(&Frame::new(MsgType::Unknown(0x30), 3, 7, vec![1; 5])).unwrap();
        bytes[12..14].copy_from_slice(&20u16.to_be_bytes());
        assert_eq!(
            decode_frame(&bytes),
            Err(WireError::TruncatedFrame { declared: 20, available: 5 })
        );
        assert!(matches!(decode_frame(&bytes[..9]), Err(WireError::TruncatedFrame { .. })));
        assert!(matches!(decode_frame(&[]), Err(WireError::TruncatedFrame { .. })));
    }

    #[test]
    fn malformed_json_for_known_type() {
        let bytes = encode_frame(&Frame::new(MsgType::Cmd, 1, 1, b"{not json".to_vec())).unwrap();
        assert!(matches!(decode_frame(&bytes), Err(WireError::MalformedPayload { .. })));
        let bytes = encode_frame(&Frame::new(MsgType::Odom, 1, 1, vec![0xff, 0xfe])).unwrap();
        assert!(matches!(decode_frame(&bytes), Err(WireError::MalformedPayload { .. })));
    }

    #[test]
    fn unknown_type_is_opaque() {
        let frame = Frame::new(MsgType::Unknown(0x42), 9, 3, vec![0xff, 0x00, 0x13]);
        let back = decode_frame(&encode_frame(&frame).unwrap()).unwrap();
        assert_eq!(back, frame);
        assert_eq!(back.msg_type.code(), 0x42);
    }

    #[test]
    fn codes_roundtrip() {
        for code in 0..=255u8 {
            assert_eq!(MsgType::from_code(code).code(), code);
        }
    }
}
