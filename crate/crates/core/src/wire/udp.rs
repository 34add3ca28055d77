use std::net::Ipv6Addr;

use super::{need, proto, Result, WireError};

pub const UDP_HEADER_LEN: usize = 8;
pub const GTPU_PORT: u16 = 2152;
pub const PFCP_PORT: u16 = 8805;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UdpHeader {
    pub src_port: u16,
    pub dst_port: u16,
    pub length: u16,
    pub checksum: u16,
}

fn sum_words(mut acc: u32, bytes: &[u8]) -> u32 {
    let mut chunks = bytes.chunks_exact(2);
    for c in &mut chunks {
        acc += u32::from(u16::from_be_bytes([c[0], c[1]]));
    }
    if let [last] = chunks.remainder() {
        acc += u32::from(*last) << 8;
    }
    acc
}

/// One's-complement checksum over the IPv6 pseudo-header and `segment`.
///
/// The checksum field of `segment` (octets 6..8) is treated as zero, so the
/// function can be applied to a segment that already carries a checksum.
/// A computed value of zero is emitted as `0xffff`.
pub fn compute_udp_checksum(src: Ipv6Addr, dst: Ipv6Addr, segment: &[u8]) -> Result<u16> {
    need(segment, UDP_HEADER_LEN)?;
    let len = segment.len() as u32;
    let mut acc = sum_words(0, &src.octets());
    acc = sum_words(acc, &dst.octets());
    acc += len >> 16;
    acc += len & 0xffff;
    acc += u32::from(proto::UDP);
    acc = sum_words(acc, &segment[..6]);
    acc = sum_words(acc, &segment[8..]);
    while acc > 0xffff {
        acc = (acc & 0xffff) + (acc >> 16);
    }
    let sum = !(acc as u16);
    Ok(if sum == 0 { 0xffff } else { sum })
}

pub fn verify_udp_checksum(src: Ipv6Addr, dst: Ipv6Addr, segment: &[u8]) -> bool {
    match compute_udp_checksum(src, dst, segment) {
        Ok(sum) => u16::from_be_bytes([segment[6], segment[7]]) == sum,
        Err(_) => false,
    }
}

/// Parses a UDP segment carried between `src` and `dst`, validating the
/// length field and the checksum.
pub fn parse_udp(src: Ipv6Addr, dst: Ipv6Addr, bytes: &[u8]) -> Result<(UdpHeader, &[u8])> {
    need(bytes, UDP_HEADER_LEN)?;
    let header = UdpHeader {
        src_port: u16::from_be_bytes([bytes[0], bytes[1]]),
        dst_port: u16::from_be_bytes([bytes[2], bytes[3]]),
        length: u16::from_be_bytes([bytes[4], bytes[5]]),
        checksum: u16::from_be_bytes([bytes[6], bytes[7]]),
    };
    if usize::from(header.length) != bytes.len() {
        return Err(WireError::LengthMismatch { declared: header.length.into(), actual: bytes.len() });
    }
    if header.checksum == 0 {
        return Err(WireError::ZeroChecksum);
    }
    let computed = compute_udp_checksum(src, dst, bytes)?;
    if computed != header.checksum {
        return Err(WireError::BadChecksum { carried: header.checksum, computed });
    }
    Ok((header, &bytes[UDP_HEADER_LEN..]))
}

pub fn serialize_udp(src: Ipv6Addr, dst: Ipv6Addr, src_port: u16, dst_port: u16, payload: &[u8]) -> Result<Vec<u8>> {
    let total = UDP_HEADER_LEN + payload.len();
    let length = u16::try_from(total).map_err(|_| WireError::Oversize(total))?;
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&src_port.to_be_bytes());
    out.extend_from_slice(&dst_port.to_be_bytes());
    out.extend_from_slice(&length.to_be_bytes());
    out.extend_from_slice(&[0, 0]);
    out.extend_from_slice(payload);
    let sum = compute_udp_checksum(src, dst, &out)?;
    out[6..8].copy_from_slice(&sum.to_be_bytes());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(s: &str) -> Ipv6Addr {
        s.parse().unwrap()
    }

    #[test]
    fn flipping_a_payload_bit_changes_checksum() {
        let seg = serialize_udp(a("2001:db8::1"), a("2001:db8::2"), 1, 2, b"payload").unwrap();
        let before = compute_udp_checksum(a("2001:db8::1"), a("2001:db8::2"), &seg).unwrap();
        for i in 8..seg.len() {
            for bit in 0..8 {
                let mut s = seg.clone();
                s[i] ^= 1 << bit;
                assert_ne!(compute_udp_checksum(a("2001:db8::1"), a("2001:db8::2"), &s).unwrap(), before);
            }
        }
    }

    #[test]
    fn parse_rejects_zero_and_bad_checksum() {
        let (s, d) = (a("2001:db8::1"), a("2001:db8::2"));
        let mut seg = serialize_udp(s, d, GTPU_PORT, GTPU_PORT, b"x").unwrap();
        assert!(parse_udp(s, d, &seg).is_ok());
        assert!(verify_udp_checksum(s, d, &seg));
        seg[8] ^= 0xff;
        assert!(matches!(parse_udp(s, d, &seg), Err(WireError::BadChecksum { .. })));
        seg[6] = 0;
        seg[7] = 0;
        assert_eq!(parse_udp(s, d, &seg).unwrap_err(), WireError::ZeroChecksum);
        assert!(matches!(parse_udp(s, d, &seg[..7]), Err(WireError::TooShort { .. })));
        assert!(matches!(parse_udp(s, d, &seg[..8]), Err(WireError::LengthMismatch { .. })));
    }

    #[test]
    fn odd_length_payload() {
        let (s, d) = (a("::1"), a("::2"));
        let seg = serialize_udp(s, d, 7, 7, b"abc").unwrap();
        assert!(verify_udp_checksum(s, d, &seg));
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            compute_udp_checksum(Ipv6Addr::UNSPECIFIED, Ipv6Addr::UNSPECIFIED, &[0; 7]),
            Err(WireError::TooShort { needed: 8, got: 7 })
        ));
    }
}
