//! Fixtures shared by the benchmarks.

use std::net::Ipv6Addr;

use edgesr_core::sim::build_pdu;
use edgesr_core::srv6::{encode_gtp6e_sid, h_encaps};
use edgesr_core::wire::{proto, serialize_gtpu, serialize_ipv6, serialize_udp, GtpuHeader, InnerPdu, Ipv6Header, PduSessionContainer, GTPU_PORT};
use edgesr_core::{DownlinkRule, Ipv6Prefix, Rule, RuleOrigin, RuleTable, SegmentList, UplinkRule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GNB: Ipv6Addr = Ipv6Addr::new(0x2001, 0xdb8, 1, 0, 0, 0, 0, 1);
pub const N3: Ipv6Addr = Ipv6Addr::new(0x2001, 0xdb8, 0xa, 0, 0, 0, 0, 1);
pub const SR_SOURCE: Ipv6Addr = Ipv6Addr::new(0x2001, 0xdb8, 0x10, 0, 0, 0, 0, 1);
pub const UE: Ipv6Addr = Ipv6Addr::new(0x2001, 0xdb8, 0xcafe, 0, 0, 0, 0, 1);
pub const SERVICE: Ipv6Addr = Ipv6Addr::new(0x2001, 0xdb8, 0x5e, 0, 0, 0, 0, 7);

pub fn gtp6e_prefix() -> Ipv6Prefix {
    Ipv6Prefix::new(Ipv6Addr::new(0x2001, 0xdb8, 0x10, 0xe, 0, 0, 0, 0), 80).expect("valid prefix")
}

pub fn inner(payload_len: usize) -> InnerPdu {
    InnerPdu::new(build_pdu(UE, SERVICE, 40000, 7, &vec![0xa5; payload_len])).expect("valid PDU")
}

/// Uplink G-PDU from the gNB with a PDU Session Container.
pub fn uplink_gtpu(teid: u32, qfi: u8, payload_len: usize) -> Vec<u8> {
    let gtp = GtpuHeader::g_pdu(teid).with_pdu_session(PduSessionContainer::uplink(qfi));
    let g = serialize_gtpu(&gtp, inner(payload_len).as_bytes()).expect("gtpu");
    let u = serialize_udp(GNB, N3, GTPU_PORT, GTPU_PORT, &g).expect("udp");
    serialize_ipv6(&Ipv6Header::new(proto::UDP, GNB, N3), &u).expect("ipv6")
}

/// `k` End waypoints followed by a GTP6.E SID and the gNB.
pub fn downlink_path(k: usize, teid: u32, qfi: u8) -> Vec<Ipv6Addr> {
    let mut path: Vec<Ipv6Addr> = (0..k).map(|i| Ipv6Addr::new(0x2001, 0xdb8, 0x31 + i as u16, 0, 0, 0, 0, 0xe)).collect();
    path.push(encode_gtp6e_sid(gtp6e_prefix(), teid, qfi).expect("sid").value);
    path.push(GNB);
    path
}

pub fn sr_packet(path: &[Ipv6Addr], payload_len: usize) -> Vec<u8> {
    h_encaps(&inner(payload_len), path, SR_SOURCE).expect("encap")
}

/// A table with `n` uplink rules over `n / 4` TEIDs and `n` downlink
/// prefixes of mixed length.
pub fn rule_table(n: usize, seed: u64) -> RuleTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rules = Vec::with_capacity(2 * n);
    let teids = (n / 4).max(1) as u32;
    for i in 0..n {
        let action = SegmentList::new(downlink_path(1, i as u32, 9)).expect("non-empty");
        rules.push(Rule::Uplink(UplinkRule {
            teid: rng.gen_range(0..teids),
            qfi: rng.gen_bool(0.5).then(|| rng.gen_range(0..64)),
            inner_src: rng.gen_bool(0.5).then(|| Ipv6Prefix::new(UE, rng.gen_range(48..=128)).expect("valid")),
            priority: rng.gen_range(0..8),
            action: action.clone(),
            origin: RuleOrigin::Static,
        }));
        let ue = Ipv6Addr::from(u128::from(UE) + ((i as u128) << 16));
        rules.push(Rule::Downlink(DownlinkRule {
            ue_prefix: Ipv6Prefix::new(ue, rng.gen_range(64..=128)).expect("valid"),
            action,
            origin: RuleOrigin::Static,
        }));
    }
    let table = RuleTable::new();
    table.apply_update(rules, &[]).expect("valid rules");
    table
}
