//! SRv6 mobile user plane for slice-dependent access to edge application
//! instances.
//!
//! The crate is layered bottom-up:
//!
//! * [`wire`]: byte-exact IPv6, SRH, UDP and GTP-U codecs.
//! * [`srv6`]: End, End.M.GTP6.D/E, End.DT4/6 and H.Encaps.
//! * [`rules`]: per-gateway uplink/downlink steering tables.
//! * [`pfcp`]: PFCP codec and the controller that looks like one UPF.
//! * [`sim`]: deterministic discrete-event network and trace.
//! * [`config`]: configuration/scenario files and the batch runner.

pub mod addr;
pub mod config;
pub mod pfcp;
pub mod rules;
pub mod sim;
pub mod srv6;
pub mod wire;

pub use addr::Ipv6Prefix;
pub use rules::{DownlinkRule, Rule, RuleId, RuleOrigin, RuleSnapshot, RuleTable, UplinkRule};
pub use srv6::{BehaviorBinding, BehaviorKind, DropReason, ForwardDecision, SegmentList, Sid};
