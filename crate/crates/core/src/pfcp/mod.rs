//! PFCP (N4) codec and the session controller that compiles sessions into
//! steering rules.

pub mod controller;
pub mod ie;
pub mod message;
pub mod session;

pub use controller::*;
pub use ie::{Ie, IePayload, NodeId};
pub use message::{decode_pfcp, encode_pfcp, msg, PfcpMessage};
pub use session::{Far, Pdi, Pdr, PfcpSession};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PfcpError {
    #[error("message too short: needed {needed} octets, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("unsupported PFCP version {0}")]
    BadVersion(u8),
    #[error("declared length {declared} does not match {actual} octets")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("IE runs past the end of its container (type {ie_type:?})")]
    TlvOverrun { ie_type: Option<u16> },
    #[error("malformed IE {ie_type}: {reason}")]
    BadIe { ie_type: u16, reason: &'static str },
    #[error("message exceeds 65535 octets")]
    Oversize,
    #[error("mandatory IE {0} missing")]
    MissingIe(u16),
    #[error("unknown {0} id")]
    UnknownRule(&'static str),
}
