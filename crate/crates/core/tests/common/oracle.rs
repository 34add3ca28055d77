//! Randomised rule sets checked against a linear-scan reference classifier.

use std::net::Ipv6Addr;

use edgesr_core::{DownlinkRule, Ipv6Prefix, Rule, RuleId, RuleOrigin, RuleTable, SegmentList, UplinkRule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Base addresses the random prefixes and queries cluster around, so that
/// overlaps and ties are frequent.
const BASES: [u128; 4] = [
    0x2001_0db8_0000_0000_0000_0000_0000_0000,
    0x2001_0db8_0000_0000_0000_0000_0000_0100,
    0x2001_0db8_cafe_0000_0000_0000_0000_0000,
    0xfd00_0000_0000_0000_0000_0000_0000_0001,
];

fn near(rng: &mut impl Rng) -> Ipv6Addr {
    let base = BASES[rng.gen_range(0..BASES.len())];
    let noise_bits = rng.gen_range(0..=128u32);
    let noise = if noise_bits == 0 { 0 } else { rng.gen::<u128>() >> (128 - noise_bits) };
    Ipv6Addr::from(base ^ noise)
}

fn prefix(rng: &mut impl Rng) -> Ipv6Prefix {
    Ipv6Prefix::new(near(rng), rng.gen_range(0..=128)).expect("length in range")
}

/// Unique action per rule index so a classification names its rule.
fn action(kind: u128, i: usize) -> SegmentList {
    let tag = 0xfc00_u128 << 112 | kind << 64 | i as u128;
    SegmentList::new(vec![Ipv6Addr::from(tag), Ipv6Addr::from(tag | 1 << 32)]).expect("non-empty")
}

pub struct RuleSet {
    pub table: RuleTable,
    pub uplink: Vec<(RuleId, UplinkRule)>,
    pub downlink: Vec<(RuleId, DownlinkRule)>,
}

pub fn random_rules(n: usize, seed: u64) -> RuleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut make = |i: usize, kind: u128| {
        [
            Rule::Uplink(UplinkRule {
                teid: rng.gen_range(0..40),
                qfi: rng.gen_bool(0.5).then(|| rng.gen_range(0..4)),
                inner_src: rng.gen_bool(0.7).then(|| prefix(&mut rng)),
                priority: rng.gen_range(-3..=3),
                action: action(kind, i),
                origin: RuleOrigin::Static,
            }),
            Rule::Downlink(DownlinkRule { ue_prefix: prefix(&mut rng), action: action(kind + 1, i), origin: RuleOrigin::Static }),
        ]
    };
    let rules: Vec<Rule> = (0..n).flat_map(|i| make(i, 1)).collect();
    // Decoys go in with the first batch and come out with the second, so
    // surviving ids are not contiguous.
    let decoys: Vec<Rule> = (0..n / 5).flat_map(|i| make(i, 3)).collect();
    let table = RuleTable::new();
    let (first, second) = rules.split_at(rules.len() / 2);
    let mut batch = decoys;
    let n_decoys = batch.len();
    batch.extend_from_slice(first);
    let out = table.apply_update(batch, &[]).expect("valid batch");
    table.apply_update(second.to_vec(), &out.added[..n_decoys]).expect("valid batch");
    let snap = table.snapshot();
    let uplink = snap.uplink_rules().map(|(id, r)| (id, r.clone())).collect();
    let downlink = snap.downlink_rules().map(|(id, r)| (id, r.clone())).collect();
    RuleSet { table, uplink, downlink }
}

pub fn oracle_uplink(rules: &[(RuleId, UplinkRule)], teid: u32, qfi: Option<u8>, src: Ipv6Addr) -> Option<SegmentList> {
    let mut best: Option<&(RuleId, UplinkRule)> = None;
    for entry in rules {
        let (id, r) = entry;
        if !r.matches(teid, qfi, src) {
            continue;
        }
        best = match best {
            Some((bid, b)) if b.priority > r.priority || (b.priority == r.priority && bid < id) => best,
            _ => Some(entry),
        };
    }
    best.map(|(_, r)| r.action.clone())
}

pub fn oracle_downlink(rules: &[(RuleId, DownlinkRule)], dst: Ipv6Addr) -> Option<SegmentList> {
    let mut best: Option<&(RuleId, DownlinkRule)> = None;
    for entry in rules {
        let (id, r) = entry;
        if !r.ue_prefix.contains(dst) {
            continue;
        }
        best = match best {
            Some((bid, b)) if b.ue_prefix.len() > r.ue_prefix.len() || (b.ue_prefix.len() == r.ue_prefix.len() && bid < id) => best,
            _ => Some(entry),
        };
    }
    best.map(|(_, r)| r.action.clone())
}

#[derive(Debug, Default)]
pub struct OracleReport {
    pub queries: usize,
    pub matched: usize,
    pub mismatches: Vec<String>,
}

/// Compares `queries` random uplink and downlink lookups with the oracle.
pub fn compare(set: &RuleSet, queries: usize, seed: u64) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let snap = set.table.snapshot();
    let mut report = OracleReport::default();
    for _ in 0..queries {
        let teid = rng.gen_range(0..44);
        let qfi = rng.gen_bool(0.8).then(|| rng.gen_range(0..5));
        let src = near(&mut rng);
        let got = snap.classify_uplink(teid, qfi, src).ok().cloned();
        let want = oracle_uplink(&set.uplink, teid, qfi, src);
        report.matched += usize::from(want.is_some());
        if got != want {
            report.mismatches.push(format!("uplink teid={teid} qfi={qfi:?} src={src}: got {got:?}, want {want:?}"));
        }
        let dst = near(&mut rng);
        let got = snap.classify_downlink(dst).ok().cloned();
        let want = oracle_downlink(&set.downlink, dst);
        report.matched += usize::from(want.is_some());
        if got != want {
            report.mismatches.push(format!("downlink dst={dst}: got {got:?}, want {want:?}"));
        }
        report.queries += 2;
    }
    report
}
