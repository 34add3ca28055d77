use super::ie::{types, Ie, IePayload};
use super::PfcpError;

pub const PFCP_VERSION: u8 = 1;

pub mod msg {
    pub const HEARTBEAT_REQUEST: u8 = 1;
    pub const HEARTBEAT_RESPONSE: u8 = 2;
    pub const ASSOCIATION_SETUP_REQUEST: u8 = 5;
    pub const ASSOCIATION_SETUP_RESPONSE: u8 = 6;
    pub const SESSION_ESTABLISHMENT_REQUEST: u8 = 50;
    pub const SESSION_ESTABLISHMENT_RESPONSE: u8 = 51;
    pub const SESSION_MODIFICATION_REQUEST: u8 = 52;
    pub const SESSION_MODIFICATION_RESPONSE: u8 = 53;
    pub const SESSION_DELETION_REQUEST: u8 = 54;
    pub const SESSION_DELETION_RESPONSE: u8 = 55;

    pub fn name(t: u8) -> &'static str {
        match t {
            HEARTBEAT_REQUEST => "HeartbeatRequest",
            HEARTBEAT_RESPONSE => "HeartbeatResponse",
            ASSOCIATION_SETUP_REQUEST => "AssociationSetupRequest",
            ASSOCIATION_SETUP_RESPONSE => "AssociationSetupResponse",
            SESSION_ESTABLISHMENT_REQUEST => "SessionEstablishmentRequest",
            SESSION_ESTABLISHMENT_RESPONSE => "SessionEstablishmentResponse",
            SESSION_MODIFICATION_REQUEST => "SessionModificationRequest",
            SESSION_MODIFICATION_RESPONSE => "SessionModificationResponse",
            SESSION_DELETION_REQUEST => "SessionDeletionRequest",
            SESSION_DELETION_RESPONSE => "SessionDeletionResponse",
            _ => "Unknown",
        }
    }
}

const FLAG_S: u8 = 0x01;
const FLAG_MP: u8 = 0x02;
const FLAG_FO: u8 = 0x04;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PfcpMessage {
    pub message_type: u8,
    /// Present on session messages (S flag).
    pub seid: Option<u64>,
    /// 24-bit sequence number.
    pub sequence: u32,
    /// Message priority (MP flag), 4 bits.
    pub priority: Option<u8>,
    pub follow_on: bool,
    pub ies: Vec<Ie>,
}

impl PfcpMessage {
    pub fn node(message_type: u8, sequence: u32, ies: Vec<Ie>) -> Self {
        Self { message_type, seid: None, sequence, priority: None, follow_on: false, ies }
    }

    pub fn session(message_type: u8, seid: u64, sequence: u32, ies: Vec<Ie>) -> Self {
        Self { message_type, seid: Some(seid), sequence, priority: None, follow_on: false, ies }
    }

    pub fn ie(&self, ie_type: u16) -> Option<&Ie> {
        super::ie::find(&self.ies, ie_type)
    }

    pub fn cause(&self) -> Option<u8> {
        self.ie(types::CAUSE).and_then(|ie| ie.as_u8().ok())
    }

    pub fn is_request(&self) -> bool {
        self.message_type % 2 == 1
    }
}

fn decode_ies(mut bytes: &[u8]) -> Result<Vec<Ie>, PfcpError> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        if bytes.len() < 4 {
            return Err(PfcpError::TlvOverrun { ie_type: None });
        }
        let ie_type = u16::from_be_bytes([bytes[0], bytes[1]]);
        let len = usize::from(u16::from_be_bytes([bytes[2], bytes[3]]));
        let value = bytes.get(4..4 + len).ok_or(PfcpError::TlvOverrun { ie_type: Some(ie_type) })?;
        let payload = if types::is_grouped(ie_type) {
            IePayload::Grouped(decode_ies(value)?)
        } else {
            IePayload::Raw(value.to_vec())
        };
        out.push(Ie { ie_type, payload });
        bytes = &bytes[4 + len..];
    }
    Ok(out)
}

pub fn decode_pfcp(bytes: &[u8]) -> Result<PfcpMessage, PfcpError> {
    if bytes.len() < 8 {
        return Err(PfcpError::TooShort { needed: 8, got: bytes.len() });
    }
    let flags = bytes[0];
    let version = flags >> 5;
    if version != PFCP_VERSION {
        return Err(PfcpError::BadVersion(version));
    }
    let message_type = bytes[1];
    let length = usize::from(u16::from_be_bytes([bytes[2], bytes[3]]));
    let total = 4 + length;
    if bytes.len() < total {
        return Err(PfcpError::TooShort { needed: total, got: bytes.len() });
    }
    if bytes.len() > total {
        return Err(PfcpError::LengthMismatch { declared: total, actual: bytes.len() });
    }
    let mut pos = 4;
    let seid = if flags & FLAG_S != 0 {
        if total < 16 {
            return Err(PfcpError::TooShort { needed: 16, got: total });
        }
        pos = 12;
        Some(u64::from_be_bytes(bytes[4..12].try_into().expect("8 octets")))
    } else {
        None
    };
    let sequence = u32::from_be_bytes([0, bytes[pos], bytes[pos + 1], bytes[pos + 2]]);
    let priority = (flags & FLAG_MP != 0).then_some(bytes[pos + 3] >> 4);
    let ies = decode_ies(&bytes[pos + 4..total])?;
    Ok(PfcpMessage { message_type, seid, sequence, priority, follow_on: flags & FLAG_FO != 0, ies })
}

pub fn encode_pfcp(msg: &PfcpMessage) -> Result<Vec<u8>, PfcpError> {
    let body: usize = msg.ies.iter().map(Ie::encoded_len).sum();
    let header = if msg.seid.is_some() { 16 } else { 8 };
    let length = u16::try_from(header - 4 + body).map_err(|_| PfcpError::Oversize)?;
    let mut out = Vec::with_capacity(header + body);
    let mut flags = PFCP_VERSION << 5;
    if msg.seid.is_some() {
        flags |= FLAG_S;
    }
    if msg.priority.is_some() {
        flags |= FLAG_MP;
    }
    if msg.follow_on {
        flags |= FLAG_FO;
    }
    out.push(flags);
    out.push(msg.message_type);
    out.extend_from_slice(&length.to_be_bytes());
    if let Some(seid) = msg.seid {
        out.extend_from_slice(&seid.to_be_bytes());
    }
    out.extend_from_slice(&(msg.sequence & 0x00ff_ffff).to_be_bytes()[1..]);
    out.push(msg.priority.map_or(0, |p| (p & 0x0f) << 4));
    for ie in &msg.ies {
        ie.encode(&mut out)?;
    }
    Ok(out)
}
