use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::net::Ipv6Addr;
use std::sync::{Arc, Mutex, RwLock};

use super::{DownlinkRule, PrefixMap, Rule, RuleError, RuleId, RuleOrigin, UplinkRule};
use crate::addr::Ipv6Prefix;
use crate::srv6::SegmentList;

/// One immutable version of a gateway's rules.
#[derive(Debug, Clone, Default)]
pub struct RuleSnapshot {
    version: u64,
    next_id: u64,
    uplink: BTreeMap<RuleId, UplinkRule>,
    downlink: BTreeMap<RuleId, DownlinkRule>,
    // teid -> ids ordered by (priority desc, id asc)
    by_teid: HashMap<u32, Vec<RuleId>>,
    // ue prefix -> ids, lowest id first
    by_prefix: PrefixMap<BTreeSet<RuleId>>,
}

impl RuleSnapshot {
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn uplink_rules(&self) -> impl Iterator<Item = (RuleId, &UplinkRule)> {
        self.uplink.iter().map(|(id, r)| (*id, r))
    }

    pub fn downlink_rules(&self) -> impl Iterator<Item = (RuleId, &DownlinkRule)> {
        self.downlink.iter().map(|(id, r)| (*id, r))
    }

    pub fn rule(&self, id: RuleId) -> Option<Rule> {
        self.uplink
            .get(&id)
            .cloned()
            .map(Rule::Uplink)
            .or_else(|| self.downlink.get(&id).cloned().map(Rule::Downlink))
    }

    pub fn len(&self) -> usize {
        self.uplink.len() + self.downlink.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of rules whose origin satisfies `pred`.
    pub fn count_where(&self, pred: impl Fn(RuleOrigin) -> bool) -> (usize, usize) {
        let up = self.uplink.values().filter(|r| pred(r.origin)).count();
        let down = self.downlink.values().filter(|r| pred(r.origin)).count();
        (up, down)
    }

    pub fn classify_uplink(&self, teid: u32, qfi: Option<u8>, inner_src: Ipv6Addr) -> Result<&SegmentList, RuleError> {
        let ids = self.by_teid.get(&teid).ok_or(RuleError::NoMatch)?;
        ids.iter()
            .map(|id| &self.uplink[id])
            .find(|r| r.matches(teid, qfi, inner_src))
            .map(|r| &r.action)
            .ok_or(RuleError::NoMatch)
    }

    pub fn classify_downlink(&self, inner_dst: Ipv6Addr) -> Result<&SegmentList, RuleError> {
        let (_, ids) = self.by_prefix.lookup(inner_dst).ok_or(RuleError::NoMatch)?;
        let id = ids.iter().next().ok_or(RuleError::NoMatch)?;
        Ok(&self.downlink[id].action)
    }

    fn rebuild_indexes(&mut self) {
        let mut by_teid: HashMap<u32, Vec<RuleId>> = HashMap::new();
        for (id, r) in &self.uplink {
            by_teid.entry(r.teid).or_default().push(*id);
        }
        for ids in by_teid.values_mut() {
            ids.sort_by_key(|id| (std::cmp::Reverse(self.uplink[id].priority), *id));
        }
        let mut by_prefix: PrefixMap<BTreeSet<RuleId>> = PrefixMap::new();
        for (id, r) in &self.downlink {
            by_prefix.entry_or_insert_with(r.ue_prefix, BTreeSet::new).insert(*id);
        }
        self.by_teid = by_teid;
        self.by_prefix = by_prefix;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateOutcome {
    pub version: u64,
    pub added: Vec<RuleId>,
}

/// Versioned rule table owned by one gateway.
#[derive(Debug, Default)]
pub struct RuleTable {
    current: RwLock<Arc<RuleSnapshot>>,
    writer: Mutex<()>,
    gtp6e_prefixes: Vec<Ipv6Prefix>,
}

impl RuleTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// A table that also checks downlink actions against the GTP6.E SID
    /// prefixes of the domain: the penultimate segment must fall inside one
    /// of them and the last one must not.
    pub fn with_gtp6e_prefixes(prefixes: Vec<Ipv6Prefix>) -> Self {
        Self { gtp6e_prefixes: prefixes, ..Self::default() }
    }

    pub fn snapshot(&self) -> Arc<RuleSnapshot> {
        Arc::clone(&self.current.read().expect("rule table lock poisoned"))
    }

    pub fn version(&self) -> u64 {
        self.snapshot().version
    }

    /// Checks a batch without applying it.
    pub fn validate(&self, add: &[Rule], remove: &[RuleId]) -> Result<(), RuleError> {
        self.validate_against(&self.snapshot(), add, remove)
    }

    fn validate_against(&self, snap: &RuleSnapshot, add: &[Rule], remove: &[RuleId]) -> Result<(), RuleError> {
        let mut seen = BTreeSet::new();
        for id in remove {
            if !(snap.uplink.contains_key(id) || snap.downlink.contains_key(id)) || !seen.insert(*id) {
                return Err(RuleError::UnknownRuleId(*id));
            }
        }
        for rule in add {
            if let Rule::Downlink(r) = rule {
                self.check_shape(&r.action)?;
            }
        }
        Ok(())
    }

    fn check_shape(&self, action: &SegmentList) -> Result<(), RuleError> {
        let bad = || RuleError::ShapeViolation(action.to_string());
        if action.len() < 2 {
            return Err(bad());
        }
        if !self.gtp6e_prefixes.is_empty() {
            let sid = action[action.len() - 2];
            let gnb = action[action.len() - 1];
            if !self.gtp6e_prefixes.iter().any(|p| p.contains(sid)) || self.gtp6e_prefixes.iter().any(|p| p.contains(gnb)) {
                return Err(bad());
            }
        }
        Ok(())
    }

    /// Applies `remove` then `add` as one new version. Either the whole
    /// batch lands or nothing changes.
    pub fn apply_update(&self, add: Vec<Rule>, remove: &[RuleId]) -> Result<UpdateOutcome, RuleError> {
        let _w = self.writer.lock().expect("rule table writer poisoned");
        let old = self.snapshot();
        self.validate_against(&old, &add, remove)?;
        let mut next = RuleSnapshot::clone(&old);
        for id in remove {
            if next.uplink.remove(id).is_none() {
                next.downlink.remove(id);
            }
        }
        let mut added = Vec::with_capacity(add.len());
        for rule in add {
            let id = RuleId(next.next_id);
            next.next_id += 1;
            match rule {
                Rule::Uplink(r) => next.uplink.insert(id, r).map(|_| ()),
                Rule::Downlink(r) => next.downlink.insert(id, r).map(|_| ()),
            };
            added.push(id);
        }
        next.version += 1;
        next.rebuild_indexes();
        let version = next.version;
        *self.current.write().expect("rule table lock poisoned") = Arc::new(next);
        Ok(UpdateOutcome { version, added })
    }
}

pub fn classify_uplink(table: &RuleTable, teid: u32, qfi: Option<u8>, inner_src: Ipv6Addr) -> Result<SegmentList, RuleError> {
    table.snapshot().classify_uplink(teid, qfi, inner_src).cloned()
}

pub fn classify_downlink(table: &RuleTable, inner_dst: Ipv6Addr) -> Result<SegmentList, RuleError> {
    table.snapshot().classify_downlink(inner_dst).cloned()
}

pub fn apply_update(table: &RuleTable, add: Vec<Rule>, remove: &[RuleId]) -> Result<UpdateOutcome, RuleError> {
    table.apply_update(add, remove)
}
