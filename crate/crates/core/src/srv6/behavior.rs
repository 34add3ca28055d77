use std::fmt;
use std::net::{IpAddr, Ipv6Addr};

use super::{decode_gtp6e_sid, Srv6Error};
use crate::addr::Ipv6Prefix;
use crate::rules::RuleSnapshot;
use crate::wire::{
    self, classifier_addr, parse_gtpu, parse_ipv6, parse_srh, parse_udp, proto, serialize_gtpu, serialize_udp, GtpuHeader,
    InnerPdu, Ipv6Header, PduSessionContainer, SegmentRoutingHeader, GTPU_ECHO_REQUEST, GTPU_ECHO_RESPONSE, GTPU_G_PDU,
    GTPU_PORT, IPV6_HEADER_LEN,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BehaviorKind {
    End,
    /// GTP-U to SRv6 at the gNB-side gateway. `sr_source` is the outer
    /// source address of the SR packets it emits.
    EndMGtp6D { sr_source: Ipv6Addr },
    /// SRv6 back to GTP-U toward the gNB. `gtpu_source` is the outer source
    /// address of the GTP-U packets it emits.
    EndMGtp6E { gtpu_source: Ipv6Addr },
    EndDt4 { table: u32 },
    EndDt6 { table: u32 },
}

impl BehaviorKind {
    pub fn name(&self) -> &'static str {
        match self {
            BehaviorKind::End => "End",
            BehaviorKind::EndMGtp6D { .. } => "End.M.GTP6.D",
            BehaviorKind::EndMGtp6E { .. } => "End.M.GTP6.E",
            BehaviorKind::EndDt4 { .. } => "End.DT4",
            BehaviorKind::EndDt6 { .. } => "End.DT6",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BehaviorBinding {
    pub prefix: Ipv6Prefix,
    pub kind: BehaviorKind,
}

impl BehaviorBinding {
    pub fn new(prefix: Ipv6Prefix, kind: BehaviorKind) -> Self {
        Self { prefix, kind }
    }

    /// The SID addressing this binding with no argument bits set.
    pub fn sid(&self) -> Ipv6Addr {
        self.prefix.addr()
    }
}

/// A host reachable behind a decapsulating gateway, in lookup table `table`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttachedHost {
    pub id: String,
    pub table: u32,
    pub addr: IpAddr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DropReason {
    NoSrh,
    SegmentsLeftZero,
    BadSegmentsLeft,
    NoMatchingRule,
    NotGtpu,
    NoAttachedHost,
    Malformed,
    HopLimitExceeded,
    NoRoute,
    NoBinding,
    UnknownTeid,
    NoSessionContext,
}

impl DropReason {
    pub const ALL: [DropReason; 12] = [
        DropReason::NoSrh,
        DropReason::SegmentsLeftZero,
        DropReason::BadSegmentsLeft,
        DropReason::NoMatchingRule,
        DropReason::NotGtpu,
        DropReason::NoAttachedHost,
        DropReason::Malformed,
        DropReason::HopLimitExceeded,
        DropReason::NoRoute,
        DropReason::NoBinding,
        DropReason::UnknownTeid,
        DropReason::NoSessionContext,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DropReason::NoSrh => "no-srh",
            DropReason::SegmentsLeftZero => "segments-left-zero",
            DropReason::BadSegmentsLeft => "bad-segments-left",
            DropReason::NoMatchingRule => "no-matching-rule",
            DropReason::NotGtpu => "not-gtpu",
            DropReason::NoAttachedHost => "no-attached-host",
            DropReason::Malformed => "malformed",
            DropReason::HopLimitExceeded => "hop-limit-exceeded",
            DropReason::NoRoute => "no-route",
            DropReason::NoBinding => "no-binding",
            DropReason::UnknownTeid => "unknown-teid",
            DropReason::NoSessionContext => "no-session-context",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ForwardDecision {
    Forward { packet: Vec<u8>, next_hop_dst: Ipv6Addr },
    Drop(DropReason),
    LocalDeliver { host: String, pdu: Vec<u8> },
}

impl ForwardDecision {
    fn forward(packet: Vec<u8>) -> Self {
        let next_hop_dst = wire::read_addr(&packet[24..]);
        ForwardDecision::Forward { packet, next_hop_dst }
    }
}

/// What a behavior may consult besides the packet itself.
#[derive(Debug, Default, Clone, Copy)]
pub struct BehaviorContext<'a> {
    pub uplink_rules: Option<&'a RuleSnapshot>,
    pub hosts: &'a [AttachedHost],
}

/// Dispatches on the binding's behavior.
pub fn execute(packet: &[u8], binding: &BehaviorBinding, ctx: &BehaviorContext<'_>) -> ForwardDecision {
    match binding.kind {
        BehaviorKind::End => behavior_end(packet, binding),
        BehaviorKind::EndMGtp6D { .. } => match ctx.uplink_rules {
            Some(rules) => behavior_gtp6_d(packet, binding, rules),
            None => ForwardDecision::Drop(DropReason::NoMatchingRule),
        },
        BehaviorKind::EndMGtp6E { .. } => behavior_gtp6_e(packet, binding),
        BehaviorKind::EndDt4 { .. } | BehaviorKind::EndDt6 { .. } => behavior_dt(packet, binding, ctx.hosts),
    }
}

struct SrPacket<'a> {
    ip: Ipv6Header,
    srh: Option<SegmentRoutingHeader>,
    /// Octet offset of the SRH inside the packet.
    srh_offset: usize,
    payload: &'a [u8],
}

fn parse_sr(packet: &[u8]) -> Result<SrPacket<'_>, DropReason> {
    let (ip, rest) = parse_ipv6(packet).map_err(|_| DropReason::Malformed)?;
    if ip.next_header == proto::ROUTING {
        let (srh, payload) = parse_srh(rest).map_err(|_| DropReason::Malformed)?;
        Ok(SrPacket { ip, srh: Some(srh), srh_offset: IPV6_HEADER_LEN, payload })
    } else {
        Ok(SrPacket { ip, srh: None, srh_offset: IPV6_HEADER_LEN, payload: rest })
    }
}

/// Plain segment advance. Only the destination address and Segments Left
/// change; the output is a pure function of the input packet.
pub fn behavior_end(packet: &[u8], _binding: &BehaviorBinding) -> ForwardDecision {
    let sr = match parse_sr(packet) {
        Ok(sr) => sr,
        Err(r) => return ForwardDecision::Drop(r),
    };
    let Some(srh) = sr.srh else {
        return ForwardDecision::Drop(DropReason::NoSrh);
    };
    if srh.segments_left == 0 {
        return ForwardDecision::Drop(DropReason::SegmentsLeftZero);
    }
    let sl = srh.segments_left - 1;
    let Some(next) = srh.segments.get(usize::from(sl)).copied() else {
        return ForwardDecision::Drop(DropReason::BadSegmentsLeft);
    };
    let mut out = packet.to_vec();
    out[24..40].copy_from_slice(&next.octets());
    out[sr.srh_offset + 3] = sl;
    ForwardDecision::Forward { packet: out, next_hop_dst: next }
}

/// Wraps `inner` for `path` (first waypoint first) with outer source `src`.
/// A one-element path is carried as plain IPv6-in-IPv6 without an SRH.
pub fn h_encaps(inner: &InnerPdu, path: &[Ipv6Addr], src: Ipv6Addr) -> Result<Vec<u8>, Srv6Error> {
    let first = *path.first().ok_or(Srv6Error::EmptyPath)?;
    let mut out = Vec::with_capacity(IPV6_HEADER_LEN + 8 + 16 * path.len() + inner.as_bytes().len());
    let mut ip = Ipv6Header::new(inner.protocol(), src, first);
    let mut srh_bytes = Vec::new();
    if path.len() > 1 {
        let srh = SegmentRoutingHeader {
            next_header: inner.protocol(),
            segments_left: (path.len() - 1) as u8,
            flags: 0,
            tag: 0,
            segments: path.iter().rev().copied().collect(),
        };
        srh_bytes = wire::serialize_srh(&srh)?;
        ip.next_header = proto::ROUTING;
    }
    let payload_len = srh_bytes.len() + inner.as_bytes().len();
    ip.payload_length = u16::try_from(payload_len).map_err(|_| wire::WireError::Oversize(payload_len))?;
    ip.write(&mut out);
    out.extend_from_slice(&srh_bytes);
    out.extend_from_slice(inner.as_bytes());
    Ok(out)
}

/// Strips the outer IPv6 header and any SRH, returning the carried PDU.
pub fn decapsulate(packet: &[u8]) -> Result<InnerPdu, Srv6Error> {
    let (ip, rest) = parse_ipv6(packet)?;
    let body = if ip.next_header == proto::ROUTING { parse_srh(rest)?.1 } else { rest };
    Ok(InnerPdu::new(body.to_vec())?)
}

fn gtpu_echo_reply(ip: &Ipv6Header, udp_src_port: u16, req: &GtpuHeader, body: &[u8]) -> Option<Vec<u8>> {
    let reply = GtpuHeader { message_type: GTPU_ECHO_RESPONSE, extensions: vec![], ..req.clone() };
    let gtp = serialize_gtpu(&reply, body).ok()?;
    let udp = serialize_udp(ip.dst, ip.src, GTPU_PORT, udp_src_port, &gtp).ok()?;
    wire::serialize_ipv6(&Ipv6Header::new(proto::UDP, ip.dst, ip.src), &udp).ok()
}

/// GTP-U to SRv6. Removes outer IPv6/UDP/GTP-U, classifies on
/// (teid, qfi, inner source) and re-encapsulates toward the matched path.
/// Echo requests are answered locally.
pub fn behavior_gtp6_d(packet: &[u8], binding: &BehaviorBinding, rules: &RuleSnapshot) -> ForwardDecision {
    let BehaviorKind::EndMGtp6D { sr_source } = binding.kind else {
        return ForwardDecision::Drop(DropReason::NoBinding);
    };
    let Ok((ip, rest)) = parse_ipv6(packet) else {
        return ForwardDecision::Drop(DropReason::Malformed);
    };
    if ip.next_header != proto::UDP {
        return ForwardDecision::Drop(DropReason::NotGtpu);
    }
    let (udp, body) = match parse_udp(ip.src, ip.dst, rest) {
        Ok(v) => v,
        Err(wire::WireError::TooShort { .. }) => return ForwardDecision::Drop(DropReason::NotGtpu),
        Err(_) => return ForwardDecision::Drop(DropReason::Malformed),
    };
    if udp.dst_port != GTPU_PORT {
        return ForwardDecision::Drop(DropReason::NotGtpu);
    }
    let Ok((gtp, inner)) = parse_gtpu(body) else {
        return ForwardDecision::Drop(DropReason::NotGtpu);
    };
    match gtp.message_type {
        GTPU_G_PDU => {}
        GTPU_ECHO_REQUEST => {
            return match gtpu_echo_reply(&ip, udp.src_port, &gtp, inner) {
                Some(p) => ForwardDecision::forward(p),
                None => ForwardDecision::Drop(DropReason::Malformed),
            }
        }
        _ => return ForwardDecision::Drop(DropReason::NotGtpu),
    }
    let Ok(pdu) = InnerPdu::new(inner.to_vec()) else {
        return ForwardDecision::Drop(DropReason::Malformed);
    };
    let src = classifier_addr(pdu.src());
    let Ok(path) = rules.classify_uplink(gtp.teid, gtp.qfi(), src) else {
        return ForwardDecision::Drop(DropReason::NoMatchingRule);
    };
    match h_encaps(&pdu, path, sr_source) {
        Ok(p) => ForwardDecision::forward(p),
        Err(_) => ForwardDecision::Drop(DropReason::Malformed),
    }
}

/// SRv6 to GTP-U. The active SID carries teid and qfi in its argument;
/// `segments[0]` is the gNB's GTP-U address.
pub fn behavior_gtp6_e(packet: &[u8], binding: &BehaviorBinding) -> ForwardDecision {
    let BehaviorKind::EndMGtp6E { gtpu_source } = binding.kind else {
        return ForwardDecision::Drop(DropReason::NoBinding);
    };
    let sr = match parse_sr(packet) {
        Ok(sr) => sr,
        Err(r) => return ForwardDecision::Drop(r),
    };
    let Some(srh) = sr.srh else {
        return ForwardDecision::Drop(DropReason::NoSrh);
    };
    if srh.segments_left != 1 {
        return ForwardDecision::Drop(DropReason::BadSegmentsLeft);
    }
    let (teid, qfi) = decode_gtp6e_sid(sr.ip.dst);
    let gnb = srh.segments[0];
    let gtp = GtpuHeader::g_pdu(teid).with_pdu_session(PduSessionContainer::downlink(qfi));
    let built = serialize_gtpu(&gtp, sr.payload)
        .and_then(|g| serialize_udp(gtpu_source, gnb, GTPU_PORT, GTPU_PORT, &g))
        .and_then(|u| wire::serialize_ipv6(&Ipv6Header::new(proto::UDP, gtpu_source, gnb), &u));
    match built {
        Ok(p) => ForwardDecision::Forward { packet: p, next_hop_dst: gnb },
        Err(_) => ForwardDecision::Drop(DropReason::Malformed),
    }
}

/// Decapsulation with table lookup toward an attached data-network host.
pub fn behavior_dt(packet: &[u8], binding: &BehaviorBinding, hosts: &[AttachedHost]) -> ForwardDecision {
    let (table, version) = match binding.kind {
        BehaviorKind::EndDt4 { table } => (table, 4),
        BehaviorKind::EndDt6 { table } => (table, 6),
        _ => return ForwardDecision::Drop(DropReason::NoBinding),
    };
    let sr = match parse_sr(packet) {
        Ok(sr) => sr,
        Err(r) => return ForwardDecision::Drop(r),
    };
    let next_header = match &sr.srh {
        Some(srh) if srh.segments_left != 0 => return ForwardDecision::Drop(DropReason::BadSegmentsLeft),
        Some(srh) => srh.next_header,
        None => sr.ip.next_header,
    };
    let expected = if version == 4 { proto::IPV4 } else { proto::IPV6 };
    if next_header != expected {
        return ForwardDecision::Drop(DropReason::Malformed);
    }
    let Ok(pdu) = InnerPdu::new(sr.payload.to_vec()) else {
        return ForwardDecision::Drop(DropReason::Malformed);
    };
    if pdu.ip_version() != version {
        return ForwardDecision::Drop(DropReason::Malformed);
    }
    let dst = pdu.dst();
    match hosts.iter().find(|h| h.table == table && h.addr == dst) {
        Some(h) => ForwardDecision::LocalDeliver { host: h.id.clone(), pdu: pdu.into_bytes() },
        None => ForwardDecision::Drop(DropReason::NoAttachedHost),
    }
}
