use std::net::Ipv6Addr;

use super::{need, read_addr, Result, WireError};

pub const IPV6_HEADER_LEN: usize = 40;

/// Fixed IPv6 header. The version nibble is implied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ipv6Header {
    pub traffic_class: u8,
    /// Only the low 20 bits are carried.
    pub flow_label: u32,
    pub payload_length: u16,
    pub next_header: u8,
    pub hop_limit: u8,
    pub src: Ipv6Addr,
    pub dst: Ipv6Addr,
}

impl Ipv6Header {
    pub fn new(next_header: u8, src: Ipv6Addr, dst: Ipv6Addr) -> Self {
        Self {
            traffic_class: 0,
            flow_label: 0,
            payload_length: 0,
            next_header,
            hop_limit: 64,
            src,
            dst,
        }
    }

    pub(crate) fn write(&self, out: &mut Vec<u8>) {
        let first = (6u32 << 28) | (u32::from(self.traffic_class) << 20) | (self.flow_label & 0x000f_ffff);
        out.extend_from_slice(&first.to_be_bytes());
        out.extend_from_slice(&self.payload_length.to_be_bytes());
        out.push(self.next_header);
        out.push(self.hop_limit);
        out.extend_from_slice(&self.src.octets());
        out.extend_from_slice(&self.dst.octets());
    }
}

pub fn parse_ipv6(bytes: &[u8]) -> Result<(Ipv6Header, &[u8])> {
    need(bytes, IPV6_HEADER_LEN)?;
    let first = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let version = (first >> 28) as u8;
    if version != 6 {
        return Err(WireError::BadVersion(version));
    }
    let payload_length = u16::from_be_bytes([bytes[4], bytes[5]]);
    let rest = &bytes[IPV6_HEADER_LEN..];
    if rest.len() != usize::from(payload_length) {
        return Err(WireError::LengthMismatch { declared: payload_length.into(), actual: rest.len() });
    }
    let header = Ipv6Header {
        traffic_class: (first >> 20) as u8,
        flow_label: first & 0x000f_ffff,
        payload_length,
        next_header: bytes[6],
        hop_limit: bytes[7],
        src: read_addr(&bytes[8..]),
        dst: read_addr(&bytes[24..]),
    };
    Ok((header, rest))
}

/// Emits `header` followed by `payload`. The payload length field is taken
/// from `payload`, not from `header`.
pub fn serialize_ipv6(header: &Ipv6Header, payload: &[u8]) -> Result<Vec<u8>> {
    let payload_length = u16::try_from(payload.len()).map_err(|_| WireError::Oversize(payload.len()))?;
    let mut out = Vec::with_capacity(IPV6_HEADER_LEN + payload.len());
    Ipv6Header { payload_length, ..*header }.write(&mut out);
    out.extend_from_slice(payload);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::proto;

    #[test]
    fn empty_payload_no_next_header() {
        let h = Ipv6Header::new(proto::NO_NEXT_HEADER, Ipv6Addr::UNSPECIFIED, Ipv6Addr::UNSPECIFIED);
        let bytes = serialize_ipv6(&h, &[]).unwrap();
        assert_eq!(bytes.len(), 40);
        assert_eq!(bytes[0], 0x60);
        let (parsed, rest) = parse_ipv6(&bytes).unwrap();
        assert_eq!(parsed.payload_length, 0);
        assert_eq!(parsed.next_header, 59);
        assert!(rest.is_empty());
    }

    #[test]
    fn payload_length_is_recomputed() {
        let h = Ipv6Header { payload_length: 999, ..Ipv6Header::new(17, Ipv6Addr::LOCALHOST, Ipv6Addr::LOCALHOST) };
        let bytes = serialize_ipv6(&h, &[1, 2, 3]).unwrap();
        assert_eq!(u16::from_be_bytes([bytes[4], bytes[5]]), 3);
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_ipv6(&[0x60; 39]), Err(WireError::TooShort { needed: 40, got: 39 })));
        let mut bytes = serialize_ipv6(&Ipv6Header::new(59, Ipv6Addr::LOCALHOST, Ipv6Addr::LOCALHOST), &[0; 4]).unwrap();
        bytes.pop();
        assert!(matches!(parse_ipv6(&bytes), Err(WireError::LengthMismatch { declared: 4, actual: 3 })));
        bytes[0] = 0x45;
        assert_eq!(parse_ipv6(&bytes).unwrap_err(), WireError::BadVersion(4));
        let big = vec![0u8; 65536];
        assert_eq!(
            serialize_ipv6(&Ipv6Header::new(59, Ipv6Addr::LOCALHOST, Ipv6Addr::LOCALHOST), &big).unwrap_err(),
            WireError::Oversize(65536)
        );
    }
}
