//! Per-hop audit trail.

use std::fmt::{self, Write as _};
use std::net::{IpAddr, Ipv6Addr};

use sha2::{Digest, Sha256};

use crate::pfcp::{decode_pfcp, msg};
use crate::srv6::DropReason;
use crate::wire::{parse_gtpu, parse_ipv6, parse_srh, proto, GTPU_G_PDU, GTPU_PORT, IPV6_HEADER_LEN, PFCP_PORT, UDP_HEADER_LEN};

pub type PacketId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceAction {
    Recv,
    Xmit,
    Drop,
    Deliver,
    RuleUpdate,
}

impl TraceAction {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceAction::Recv => "recv",
            TraceAction::Xmit => "xmit",
            TraceAction::Drop => "drop",
            TraceAction::Deliver => "deliver",
            TraceAction::RuleUpdate => "rule-update",
        }
    }
}

impl fmt::Display for TraceAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Header fields pulled out of a packet for the trace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PacketSummary {
    pub outer_src: Option<Ipv6Addr>,
    pub outer_dst: Option<Ipv6Addr>,
    pub segments_left: Option<u8>,
    pub teid: Option<u32>,
    pub qfi: Option<u8>,
    pub inner_src: Option<IpAddr>,
    pub inner_dst: Option<IpAddr>,
    pub payload_hash: Option<String>,
    /// PFCP message name for control traffic.
    pub control: Option<&'static str>,
}

/// First 8 octets of SHA-256, hex.
pub fn payload_hash(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

/// Application payload of an IP PDU: the UDP payload for UDP, otherwise
/// everything after the IP header.
pub fn pdu_payload(pdu: &[u8]) -> &[u8] {
    let (hdr, proto_nr) = match pdu.first().map(|b| b >> 4) {
        Some(6) if pdu.len() >= IPV6_HEADER_LEN => (IPV6_HEADER_LEN, pdu[6]),
        Some(4) if pdu.len() >= 20 => (usize::from(pdu[0] & 0x0f) * 4, pdu[9]),
        _ => return pdu,
    };
    let body = pdu.get(hdr..).unwrap_or(&[]);
    if proto_nr == proto::UDP && body.len() >= UDP_HEADER_LEN {
        &body[UDP_HEADER_LEN..]
    } else {
        body
    }
}

fn fill_inner(s: &mut PacketSummary, pdu: &[u8]) {
    match pdu.first().map(|b| b >> 4) {
        Some(6) if pdu.len() >= IPV6_HEADER_LEN => {
            s.inner_src = Some(IpAddr::V6(crate::wire::read_addr(&pdu[8..])));
            s.inner_dst = Some(IpAddr::V6(crate::wire::read_addr(&pdu[24..])));
        }
        Some(4) if pdu.len() >= 20 => {
            s.inner_src = Some(IpAddr::from([pdu[12], pdu[13], pdu[14], pdu[15]]));
            s.inner_dst = Some(IpAddr::from([pdu[16], pdu[17], pdu[18], pdu[19]]));
        }
        _ => return,
    }
    s.payload_hash = Some(payload_hash(pdu_payload(pdu)));
}

/// Summarizes an outer packet. Unencapsulated user PDUs report their own
/// addresses as both outer and inner.
pub fn summarize(bytes: &[u8]) -> PacketSummary {
    let mut s = PacketSummary::default();
    let Ok((ip, mut rest)) = parse_ipv6(bytes) else {
        fill_inner(&mut s, bytes);
        return s;
    };
    s.outer_src = Some(ip.src);
    s.outer_dst = Some(ip.dst);
    let mut nh = ip.next_header;
    if nh == proto::ROUTING {
        let Ok((srh, payload)) = parse_srh(rest) else { return s };
        s.segments_left = Some(srh.segments_left);
        nh = srh.next_header;
        rest = payload;
    }
    match nh {
        proto::IPV6 | proto::IPV4 => fill_inner(&mut s, rest),
        proto::UDP if rest.len() >= UDP_HEADER_LEN => {
            let sport = u16::from_be_bytes([rest[0], rest[1]]);
            let dport = u16::from_be_bytes([rest[2], rest[3]]);
            let body = &rest[UDP_HEADER_LEN..];
            if dport == GTPU_PORT || sport == GTPU_PORT {
                if let Ok((gtp, inner)) = parse_gtpu(body) {
                    s.teid = Some(gtp.teid);
                    s.qfi = gtp.qfi();
                    if gtp.message_type == GTPU_G_PDU {
                        fill_inner(&mut s, inner);
                    }
                }
            } else if dport == PFCP_PORT || sport == PFCP_PORT {
                s.control = decode_pfcp(body).ok().map(|m| msg::name(m.message_type));
            } else {
                fill_inner(&mut s, bytes);
            }
        }
        _ => fill_inner(&mut s, bytes),
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: u64,
    pub node: String,
    pub action: TraceAction,
    pub packet: Option<PacketId>,
    pub summary: PacketSummary,
    pub reason: Option<DropReason>,
    pub detail: String,
    /// Packet octets as seen at this event (empty for rule updates).
    pub bytes: Vec<u8>,
}

fn opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".to_string(), |x| x.to_string())
}

impl TraceEvent {
    /// One tab-separated line: time, node, action, packet, outer src, outer
    /// dst, SL, teid, qfi, inner src, inner dst, payload hash, reason,
    /// detail and, with `hex`, the packet octets.
    pub fn to_tsv(&self, hex: bool) -> String {
        let s = &self.summary;
        let detail = match (s.control, self.detail.is_empty()) {
            (Some(c), true) => c.to_string(),
            (Some(c), false) => format!("{c} {}", self.detail),
            (None, true) => "-".to_string(),
            (None, false) => self.detail.clone(),
        };
        let mut line = String::new();
        let _ = write!(
            line,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.time,
            self.node,
            self.action,
            opt(&self.packet),
            opt(&s.outer_src),
            opt(&s.outer_dst),
            opt(&s.segments_left),
            opt(&s.teid),
            opt(&s.qfi),
            opt(&s.inner_src),
            opt(&s.inner_dst),
            opt(&s.payload_hash),
            opt(&self.reason),
            detail.replace(['\t', '\n'], " "),
        );
        if hex {
            line.push('\t');
            if self.bytes.is_empty() {
                line.push('-');
            } else {
                line.push_str(&hex::encode(&self.bytes));
            }
        }
        line
    }
}

/// Renders a whole trace, one line per event.
pub fn render_trace(events: &[TraceEvent], hex: bool) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_tsv(hex));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn udp_payload_is_hashed() {
        let mut pdu = vec![0u8; 48];
        pdu[0] = 0x60;
        pdu[6] = proto::UDP;
        pdu.extend_from_slice(b"ping");
        assert_eq!(pdu_payload(&pdu), b"ping");
        let s = summarize(&pdu);
        assert_eq!(s.payload_hash.as_deref(), Some(payload_hash(b"ping").as_str()));
        assert_eq!(payload_hash(b"ping").len(), 16);
    }

    #[test]
    fn tsv_has_fixed_columns() {
        let e = TraceEvent {
            time: 3,
            node: "t1".into(),
            action: TraceAction::Drop,
            packet: Some(9),
            summary: PacketSummary::default(),
            reason: Some(DropReason::NoRoute),
            detail: String::new(),
            bytes: vec![0xab],
        };
        assert_eq!(e.to_tsv(false).split('\t').count(), 14);
        assert!(e.to_tsv(true).ends_with("\tab"));
    }
}
