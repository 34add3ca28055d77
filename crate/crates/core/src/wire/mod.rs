//! Byte-exact codecs for every header the data plane touches.
//!
//! All multi-octet fields are big-endian. Parsers borrow from the input and
//! hand back the remaining payload; serializers recompute every length field
//! from the data they are given.

mod gtpu;
mod inner;
mod ipv6;
mod srh;
mod udp;

pub use gtpu::{
    parse_gtpu, serialize_gtpu, GtpuExtension, GtpuHeader, PduSessionContainer, EXT_PDU_SESSION_CONTAINER,
    GTPU_ECHO_REQUEST, GTPU_ECHO_RESPONSE, GTPU_G_PDU, PDU_TYPE_DOWNLINK, PDU_TYPE_UPLINK,
};
pub use inner::{classifier_addr, InnerPdu};
pub use ipv6::{parse_ipv6, serialize_ipv6, Ipv6Header, IPV6_HEADER_LEN};
pub use srh::{parse_srh, serialize_srh, SegmentRoutingHeader, ROUTING_TYPE_SRH};
pub use udp::{
    compute_udp_checksum, parse_udp, serialize_udp, verify_udp_checksum, UdpHeader, GTPU_PORT, PFCP_PORT,
    UDP_HEADER_LEN,
};

use thiserror::Error;

/// IP protocol numbers used across the data plane.
pub mod proto {
    pub const IPV4: u8 = 4;
    pub const UDP: u8 = 17;
    pub const IPV6: u8 = 41;
    pub const ROUTING: u8 = 43;
    pub const NO_NEXT_HEADER: u8 = 59;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("buffer too short: need {needed} octets, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("bad version {0}")]
    BadVersion(u8),
    #[error("length field says {declared} octets, {actual} present")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("payload of {0} octets does not fit a 16-bit length field")]
    Oversize(usize),
    #[error("routing type {0} is not a segment routing header")]
    WrongRoutingType(u8),
    #[error("hdr_ext_len {hdr_ext_len} inconsistent with {segments} segments")]
    LengthInconsistent { hdr_ext_len: u8, segments: usize },
    #[error("segments_left {segments_left} beyond last_entry {last_entry}")]
    SegmentsLeftOutOfRange { segments_left: u8, last_entry: u8 },
    #[error("segment list is empty")]
    EmptySegmentList,
    #[error("{0} segments do not fit one routing header")]
    TooManySegments(usize),
    #[error("unsupported GTP-U message type {0}")]
    UnsupportedMessageType(u8),
    #[error("bad GTP-U extension chain: {0}")]
    BadExtensionChain(&'static str),
    #[error("qfi {0} exceeds 6 bits")]
    InvalidQfi(u8),
    #[error("zero UDP checksum is not allowed over IPv6")]
    ZeroChecksum,
    #[error("UDP checksum mismatch: carried {carried:#06x}, computed {computed:#06x}")]
    BadChecksum { carried: u16, computed: u16 },
    #[error("inner PDU is neither IPv4 nor IPv6")]
    BadInnerPdu,
}

pub type Result<T> = std::result::Result<T, WireError>;

pub(crate) fn need(bytes: &[u8], needed: usize) -> Result<()> {
    if bytes.len() < needed {
        Err(WireError::TooShort { needed, got: bytes.len() })
    } else {
        Ok(())
    }
}

pub(crate) fn read_addr(bytes: &[u8]) -> std::net::Ipv6Addr {
    let mut a = [0u8; 16];
    a.copy_from_slice(&bytes[..16]);
    std::net::Ipv6Addr::from(a)
}
