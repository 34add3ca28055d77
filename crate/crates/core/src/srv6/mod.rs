//! SRv6 endpoint and source-node behaviors of the SR domain.

mod behavior;
mod sid;

pub use behavior::{
    behavior_dt, behavior_end, behavior_gtp6_d, behavior_gtp6_e, decapsulate, execute, h_encaps, AttachedHost,
    BehaviorBinding, BehaviorContext, BehaviorKind, DropReason, ForwardDecision,
};
pub use sid::{decode_gtp6e_sid, encode_gtp6e_sid, SegmentList, Sid, GTP6E_ARGUMENT_BITS};

use thiserror::Error;

use crate::wire::WireError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Srv6Error {
    #[error("prefix /{0} leaves fewer than 40 argument bits")]
    PrefixTooLong(u8),
    #[error("qfi {0} exceeds 6 bits")]
    InvalidQfi(u8),
    #[error("segment path is empty")]
    EmptyPath,
    #[error(transparent)]
    Wire(#[from] WireError),
}
