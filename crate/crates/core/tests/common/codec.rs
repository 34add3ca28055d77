//! Random packet stacks and the round-trip properties they must satisfy.

use std::net::Ipv6Addr;

use edgesr_core::pfcp::ie::types;
use edgesr_core::pfcp::{decode_pfcp, encode_pfcp, Ie, IePayload, PfcpMessage};
use edgesr_core::wire::{
    parse_gtpu, parse_ipv6, parse_srh, parse_udp, proto, serialize_gtpu, serialize_ipv6, serialize_srh, serialize_udp,
    GtpuExtension, GtpuHeader, Ipv6Header, PduSessionContainer, SegmentRoutingHeader, GTPU_ECHO_REQUEST,
    GTPU_ECHO_RESPONSE, GTPU_G_PDU, GTPU_PORT, EXT_PDU_SESSION_CONTAINER,
};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub fn addr() -> impl Strategy<Value = Ipv6Addr> {
    any::<u128>().prop_map(Ipv6Addr::from)
}

pub fn ipv6_header(next_header: u8) -> impl Strategy<Value = Ipv6Header> {
    (any::<u8>(), 0u32..1 << 20, any::<u8>(), addr(), addr()).prop_map(move |(tc, fl, hl, src, dst)| Ipv6Header {
        traffic_class: tc,
        flow_label: fl,
        payload_length: 0,
        next_header,
        hop_limit: hl,
        src,
        dst,
    })
}

fn extension() -> impl Strategy<Value = GtpuExtension> {
    prop_oneof![
        (0u8..=1, 0u8..64).prop_map(|(pdu_type, qfi)| GtpuExtension::PduSession(PduSessionContainer { pdu_type, qfi })),
        (1u8..=255, 0usize..6, any::<u8>()).prop_filter_map("reserved type", |(ext_type, units, fill)| {
            (ext_type != EXT_PDU_SESSION_CONTAINER)
                .then(|| GtpuExtension::Other { ext_type, content: vec![fill; 4 * units + 2] })
        }),
    ]
}

pub fn gtpu_header() -> impl Strategy<Value = GtpuHeader> {
    (
        prop_oneof![Just(GTPU_G_PDU), Just(GTPU_ECHO_REQUEST), Just(GTPU_ECHO_RESPONSE)],
        any::<u32>(),
        any::<bool>(),
        any::<bool>(),
        any::<u16>(),
        any::<u8>(),
        prop::collection::vec(extension(), 0..4),
    )
        .prop_map(|(message_type, teid, s_flag, pn_flag, sequence, n_pdu, extensions)| {
            let optional = s_flag || pn_flag || !extensions.is_empty();
            GtpuHeader {
                message_type,
                teid,
                s_flag,
                pn_flag,
                sequence: if optional { sequence } else { 0 },
                n_pdu: if optional { n_pdu } else { 0 },
                extensions,
            }
        })
}

/// IPv6 / UDP / GTP-U / payload.
#[derive(Debug, Clone)]
pub struct GtpuStack {
    pub ip: Ipv6Header,
    pub sport: u16,
    pub gtp: GtpuHeader,
    pub payload: Vec<u8>,
}

pub fn gtpu_stack() -> impl Strategy<Value = GtpuStack> {
    (ipv6_header(proto::UDP), any::<u16>(), gtpu_header(), prop::collection::vec(any::<u8>(), 0..256))
        .prop_map(|(ip, sport, gtp, payload)| GtpuStack { ip, sport, gtp, payload })
}

/// IPv6 / SRH / inner bytes.
#[derive(Debug, Clone)]
pub struct SrhStack {
    pub ip: Ipv6Header,
    pub srh: SegmentRoutingHeader,
    pub inner: Vec<u8>,
}

pub fn srh_stack() -> impl Strategy<Value = SrhStack> {
    (
        ipv6_header(proto::ROUTING),
        prop::collection::vec(addr(), 1..12),
        any::<u8>(),
        any::<u16>(),
        prop_oneof![Just(proto::IPV6), Just(proto::IPV4), Just(proto::NO_NEXT_HEADER), Just(proto::UDP)],
        prop::collection::vec(any::<u8>(), 0..128),
    )
        .prop_flat_map(|(ip, segments, flags, tag, nh, inner)| {
            let n = segments.len() as u8;
            (0..n).prop_map(move |sl| SrhStack {
                ip,
                srh: SegmentRoutingHeader { next_header: nh, segments_left: sl, flags, tag, segments: segments.clone() },
                inner: inner.clone(),
            })
        })
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn fail<E: std::fmt::Display>(e: E) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

fn prefixes_rejected<T>(bytes: &[u8], keep: usize, parse: impl Fn(&[u8]) -> Result<T, String>, what: &str) -> Result<(), TestCaseError> {
    for cut in keep..bytes.len() {
        check(parse(&bytes[..cut]).is_err(), || format!("{what}: {cut}-octet prefix of {} parsed", bytes.len()))?;
    }
    Ok(())
}

pub fn gtpu_roundtrip(s: &GtpuStack) -> Result<(), TestCaseError> {
    let gtp = serialize_gtpu(&s.gtp, &s.payload).map_err(fail)?;
    let udp = serialize_udp(s.ip.src, s.ip.dst, s.sport, GTPU_PORT, &gtp).map_err(fail)?;
    let pkt = serialize_ipv6(&s.ip, &udp).map_err(fail)?;

    let (ip, rest) = parse_ipv6(&pkt).map_err(fail)?;
    check(ip == Ipv6Header { payload_length: ip.payload_length, ..s.ip }, || format!("ipv6 {ip:?}"))?;
    check(usize::from(ip.payload_length) == pkt.len() - 40, || "payload length".into())?;
    let (uh, body) = parse_udp(ip.src, ip.dst, rest).map_err(fail)?;
    check(uh.src_port == s.sport && uh.dst_port == GTPU_PORT, || "ports".into())?;
    check(usize::from(uh.length) == rest.len() && uh.checksum != 0, || "udp length or checksum".into())?;
    let (gh, inner) = parse_gtpu(body).map_err(fail)?;
    check(gh == s.gtp, || format!("gtp decoded {gh:?}"))?;
    check(inner == s.payload.as_slice(), || "payload".into())?;
    let declared = usize::from(u16::from_be_bytes([body[2], body[3]]));
    check(declared == body.len() - 8, || "gtp length".into())?;

    let again = serialize_ipv6(&ip, &serialize_udp(ip.src, ip.dst, uh.src_port, uh.dst_port, &serialize_gtpu(&gh, inner).map_err(fail)?).map_err(fail)?)
        .map_err(fail)?;
    check(again == pkt, || "re-encode differs".into())?;

    prefixes_rejected(&pkt, 0, |b| parse_ipv6(b).map(drop).map_err(|e| e.to_string()), "ipv6")?;
    prefixes_rejected(rest, 0, |b| parse_udp(ip.src, ip.dst, b).map(drop).map_err(|e| e.to_string()), "udp")?;
    prefixes_rejected(body, 0, |b| parse_gtpu(b).map(drop).map_err(|e| e.to_string()), "gtpu")
}

pub fn srh_roundtrip(s: &SrhStack) -> Result<(), TestCaseError> {
    let mut ext = serialize_srh(&s.srh).map_err(fail)?;
    check(ext.len() == s.srh.wire_len() && ext[1] as usize * 8 + 8 == ext.len(), || "hdr ext len".into())?;
    ext.extend_from_slice(&s.inner);
    let pkt = serialize_ipv6(&s.ip, &ext).map_err(fail)?;

    let (ip, rest) = parse_ipv6(&pkt).map_err(fail)?;
    check(ip.next_header == proto::ROUTING && usize::from(ip.payload_length) == rest.len(), || "ipv6".into())?;
    let (srh, inner) = parse_srh(rest).map_err(fail)?;
    check(srh == s.srh, || format!("srh decoded {srh:?}"))?;
    check(inner == s.inner.as_slice(), || "inner".into())?;
    check(srh.active_segment() == Some(s.srh.segments[usize::from(s.srh.segments_left)]), || "active segment".into())?;

    let mut again = serialize_srh(&srh).map_err(fail)?;
    again.extend_from_slice(inner);
    check(serialize_ipv6(&ip, &again).map_err(fail)? == pkt, || "re-encode differs".into())?;

    prefixes_rejected(&pkt, 0, |b| parse_ipv6(b).map(drop).map_err(|e| e.to_string()), "ipv6")?;
    let srh_len = s.srh.wire_len();
    prefixes_rejected(&rest[..srh_len], 0, |b| parse_srh(b).map(drop).map_err(|e| e.to_string()), "srh")
}

const RAW_TYPES: &[u16] = &[
    types::CAUSE,
    types::SOURCE_INTERFACE,
    types::F_TEID,
    types::NETWORK_INSTANCE,
    types::PRECEDENCE,
    types::APPLY_ACTION,
    types::PDR_ID,
    types::F_SEID,
    types::NODE_ID,
    types::RECOVERY_TIME_STAMP,
    types::FAR_ID,
    types::QFI,
];
const GROUPED_TYPES: &[u16] = &[1, 2, 3, 4, 9, 10, 11, 15, 16];

fn raw_type() -> impl Strategy<Value = u16> {
    prop_oneof![
        3 => prop::sample::select(RAW_TYPES),
        1 => any::<u16>().prop_filter("grouped", |t| !types::is_grouped(*t)),
    ]
}

pub fn ie() -> impl Strategy<Value = Ie> {
    let leaf = (raw_type(), prop::collection::vec(any::<u8>(), 0..24)).prop_map(|(t, v)| Ie::raw(t, v));
    leaf.prop_recursive(4, 48, 6, |inner| {
        (prop::sample::select(GROUPED_TYPES), prop::collection::vec(inner, 0..6)).prop_map(|(t, c)| Ie::grouped(t, c))
    })
}

pub fn pfcp_message() -> impl Strategy<Value = PfcpMessage> {
    (
        any::<u8>(),
        prop::option::of(any::<u64>()),
        0u32..1 << 24,
        prop::option::of(0u8..16),
        any::<bool>(),
        prop::collection::vec(ie(), 0..6),
    )
        .prop_map(|(message_type, seid, sequence, priority, follow_on, ies)| PfcpMessage {
            message_type,
            seid,
            sequence,
            priority,
            follow_on,
            ies,
        })
}

fn ie_lengths_coherent(bytes: &[u8], ies: &[Ie]) -> bool {
    let mut pos = 0;
    for ie in ies {
        let t = u16::from_be_bytes([bytes[pos], bytes[pos + 1]]);
        let len = usize::from(u16::from_be_bytes([bytes[pos + 2], bytes[pos + 3]]));
        if t != ie.ie_type || len + 4 != ie.encoded_len() {
            return false;
        }
        if let IePayload::Grouped(children) = &ie.payload {
            if !ie_lengths_coherent(&bytes[pos + 4..pos + 4 + len], children) {
                return false;
            }
        }
        pos += 4 + len;
    }
    pos == bytes.len()
}

pub fn pfcp_roundtrip(m: &PfcpMessage) -> Result<(), TestCaseError> {
    let bytes = encode_pfcp(m).map_err(fail)?;
    let decoded = decode_pfcp(&bytes).map_err(fail)?;
    check(&decoded == m, || format!("decoded {decoded:?}"))?;
    check(encode_pfcp(&decoded).map_err(fail)? == bytes, || "re-encode differs".into())?;
    let header = if m.seid.is_some() { 16 } else { 8 };
    check(usize::from(u16::from_be_bytes([bytes[2], bytes[3]])) + 4 == bytes.len(), || "message length".into())?;
    check(ie_lengths_coherent(&bytes[header..], &m.ies), || "ie lengths".into())?;
    prefixes_rejected(&bytes, 0, |b| decode_pfcp(b).map(drop).map_err(|e| e.to_string()), "pfcp")
}
