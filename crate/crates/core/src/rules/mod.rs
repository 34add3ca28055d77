//! Per-gateway steering state: uplink classification of decapsulated GTP-U
//! traffic and downlink longest-prefix match on the UE address.
//!
//! A [`RuleTable`] is a single-writer, multi-reader cell of immutable
//! [`RuleSnapshot`]s. Readers take an `Arc` to the current snapshot and never
//! observe a partially applied batch.

mod lpm;
mod table;

pub use lpm::PrefixMap;
pub use table::{classify_downlink, classify_uplink, apply_update, RuleSnapshot, RuleTable, UpdateOutcome};

use std::fmt;

use thiserror::Error;

use crate::addr::Ipv6Prefix;
use crate::srv6::SegmentList;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleId(pub u64);

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Who installed a rule. Session-derived rules are the ones the controller
/// compiled from PFCP state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleOrigin {
    Static,
    Session(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UplinkRule {
    pub teid: u32,
    pub qfi: Option<u8>,
    pub inner_src: Option<Ipv6Prefix>,
    /// Larger wins.
    pub priority: i64,
    pub action: SegmentList,
    pub origin: RuleOrigin,
}

impl UplinkRule {
    pub fn matches(&self, teid: u32, qfi: Option<u8>, inner_src: std::net::Ipv6Addr) -> bool {
        self.teid == teid
            && self.qfi.is_none_or(|q| qfi == Some(q))
            && self.inner_src.is_none_or(|p| p.contains(inner_src))
    }
}

/// Downlink match on the UE prefix. The action ends with a GTP6.E SID
/// followed by the gNB address.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DownlinkRule {
    pub ue_prefix: Ipv6Prefix,
    pub action: SegmentList,
    pub origin: RuleOrigin,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Rule {
    Uplink(UplinkRule),
    Downlink(DownlinkRule),
}

impl Rule {
    pub fn origin(&self) -> RuleOrigin {
        match self {
            Rule::Uplink(r) => r.origin,
            Rule::Downlink(r) => r.origin,
        }
    }

    pub fn action(&self) -> &SegmentList {
        match self {
            Rule::Uplink(r) => &r.action,
            Rule::Downlink(r) => &r.action,
        }
    }
}

impl From<UplinkRule> for Rule {
    fn from(r: UplinkRule) -> Self {
        Rule::Uplink(r)
    }
}

impl From<DownlinkRule> for Rule {
    fn from(r: DownlinkRule) -> Self {
        Rule::Downlink(r)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("no rule matches")]
    NoMatch,
    #[error("unknown rule id {0}")]
    UnknownRuleId(RuleId),
    #[error("downlink action `{0}` is not GTP6.E-shaped")]
    ShapeViolation(String),
}
