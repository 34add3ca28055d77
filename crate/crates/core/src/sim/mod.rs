//! Deterministic discrete-event network: gNB and SMF emulators, SR gateways
//! and transit routers, edge hosts and the controller, joined by fixed-delay
//! lossless links.

mod engine;
mod smf;
mod topology;
mod trace;

pub use engine::{
    build_pdu, Census, Direction, Event, EventKind, NodeCensus, Outcome, Simulator, UserPacket, DEFAULT_HOP_LIMIT,
    SERVICE_PORT, UE_PORT,
};
pub use smf::SessionChange;
pub use topology::{
    ControllerSpec, GnbSpec, HostSpec, LinkSpec, NodeKind, SessionSpec, SmfSpec, SrNodeSpec, TopologySpec, UeSpec,
};
pub use trace::{payload_hash, pdu_payload, render_trace, summarize, PacketId, PacketSummary, TraceAction, TraceEvent};

use std::net::Ipv6Addr;

use thiserror::Error;

use crate::pfcp::CompileError;
use crate::rules::RuleError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("link {a} -- {b} references an unknown node")]
    DanglingLink { a: String, b: String },
    #[error("address {addr} used by both {} and {}", nodes.0, nodes.1)]
    DuplicateAddress { addr: Ipv6Addr, nodes: (String, String) },
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown gNB `{0}`")]
    UnknownGnb(String),
    #[error("unknown UE `{0}`")]
    UnknownUe(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session `{session}`: {reason}")]
    InvalidSession { session: String, reason: &'static str },
    #[error("node `{node}`: {reason}")]
    InvalidBinding { node: String, reason: &'static str },
    #[error("static rules for `{gateway}` rejected: {source}")]
    Rules { gateway: String, source: RuleError },
    #[error("controller: {0}")]
    Controller(CompileError),
    #[error("events still pending after tick {limit}")]
    LimitExceeded { limit: u64 },
}
