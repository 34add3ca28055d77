use std::net::Ipv6Addr;

use super::{need, read_addr, Result, WireError};

pub const ROUTING_TYPE_SRH: u8 = 4;
const MAX_SEGMENTS: usize = 127;

/// Segment Routing Header (routing type 4) without TLVs.
///
/// `segments` is in wire order: index 0 is the final destination and
/// `segments[segments_left]` is the active segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentRoutingHeader {
    pub next_header: u8,
    pub segments_left: u8,
    pub flags: u8,
    pub tag: u16,
    pub segments: Vec<Ipv6Addr>,
}

impl SegmentRoutingHeader {
    pub fn hdr_ext_len(&self) -> u8 {
        (self.segments.len() * 2) as u8
    }

    pub fn last_entry(&self) -> u8 {
        self.segments.len().saturating_sub(1) as u8
    }

    /// Encoded size in octets.
    pub fn wire_len(&self) -> usize {
        8 + 16 * self.segments.len()
    }

    pub fn active_segment(&self) -> Option<Ipv6Addr> {
        self.segments.get(usize::from(self.segments_left)).copied()
    }
}

pub fn parse_srh(bytes: &[u8]) -> Result<(SegmentRoutingHeader, &[u8])> {
    need(bytes, 8)?;
    let routing_type = bytes[2];
    if routing_type != ROUTING_TYPE_SRH {
        return Err(WireError::WrongRoutingType(routing_type));
    }
    let hdr_ext_len = bytes[1];
    let last_entry = bytes[4];
    let count = usize::from(last_entry) + 1;
    if usize::from(hdr_ext_len) != 2 * count {
        return Err(WireError::LengthInconsistent { hdr_ext_len, segments: count });
    }
    let total = 8 + 8 * usize::from(hdr_ext_len);
    need(bytes, total)?;
    let segments_left = bytes[3];
    if segments_left > last_entry.saturating_add(1) {
        return Err(WireError::SegmentsLeftOutOfRange { segments_left, last_entry });
    }
    let segments = bytes[8..total].chunks_exact(16).map(read_addr).collect();
    let srh = SegmentRoutingHeader {
        next_header: bytes[0],
        segments_left,
        flags: bytes[5],
        tag: u16::from_be_bytes([bytes[6], bytes[7]]),
        segments,
    };
    Ok((srh, &bytes[total..]))
}

pub fn serialize_srh(srh: &SegmentRoutingHeader) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(srh.wire_len());
    write_srh(srh, &mut out)?;
    Ok(out)
}

pub(crate) fn write_srh(srh: &SegmentRoutingHeader, out: &mut Vec<u8>) -> Result<()> {
    if srh.segments.is_empty() {
        return Err(WireError::EmptySegmentList);
    }
    if srh.segments.len() > MAX_SEGMENTS {
        return Err(WireError::TooManySegments(srh.segments.len()));
    }
    out.extend_from_slice(&[
        srh.next_header,
        srh.hdr_ext_len(),
        ROUTING_TYPE_SRH,
        srh.segments_left,
        srh.last_entry(),
        srh.flags,
    ]);
    out.extend_from_slice(&srh.tag.to_be_bytes());
    for s in &srh.segments {
        out.extend_from_slice(&s.octets());
    }
    Ok(())
}
