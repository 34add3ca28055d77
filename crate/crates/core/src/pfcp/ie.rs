//! Information elements: generic TLV plus typed views of the subset the
//! controller interprets.

use std::net::{Ipv4Addr, Ipv6Addr};

use super::PfcpError;

pub mod types {
    pub const CREATE_PDR: u16 = 1;
    pub const PDI: u16 = 2;
    pub const CREATE_FAR: u16 = 3;
    pub const FORWARDING_PARAMETERS: u16 = 4;
    pub const UPDATE_PDR: u16 = 9;
    pub const UPDATE_FAR: u16 = 10;
    pub const UPDATE_FORWARDING_PARAMETERS: u16 = 11;
    pub const REMOVE_PDR: u16 = 15;
    pub const REMOVE_FAR: u16 = 16;
    pub const CAUSE: u16 = 19;
    pub const SOURCE_INTERFACE: u16 = 20;
    pub const F_TEID: u16 = 21;
    pub const NETWORK_INSTANCE: u16 = 22;
    pub const PRECEDENCE: u16 = 29;
    pub const DESTINATION_INTERFACE: u16 = 42;
    pub const APPLY_ACTION: u16 = 44;
    pub const PDR_ID: u16 = 56;
    pub const F_SEID: u16 = 57;
    pub const NODE_ID: u16 = 60;
    pub const OUTER_HEADER_CREATION: u16 = 84;
    pub const UE_IP_ADDRESS: u16 = 93;
    pub const OUTER_HEADER_REMOVAL: u16 = 95;
    pub const RECOVERY_TIME_STAMP: u16 = 96;
    pub const FAR_ID: u16 = 108;
    pub const QFI: u16 = 124;

    /// IE types whose value is a list of child IEs.
    pub fn is_grouped(t: u16) -> bool {
        matches!(
            t,
            CREATE_PDR | PDI | CREATE_FAR | FORWARDING_PARAMETERS | UPDATE_PDR | UPDATE_FAR
                | UPDATE_FORWARDING_PARAMETERS | REMOVE_PDR | REMOVE_FAR
        )
    }
}

pub mod cause {
    pub const REQUEST_ACCEPTED: u8 = 1;
    pub const REQUEST_REJECTED: u8 = 64;
    pub const SESSION_CONTEXT_NOT_FOUND: u8 = 65;
    pub const MANDATORY_IE_MISSING: u8 = 66;
    pub const MANDATORY_IE_INCORRECT: u8 = 69;
    pub const NO_ESTABLISHED_ASSOCIATION: u8 = 72;
    pub const RULE_CREATION_FAILURE: u8 = 73;
}

pub mod interface {
    pub const ACCESS: u8 = 0;
    pub const CORE: u8 = 1;
}

pub mod apply_action {
    pub const DROP: u8 = 0x01;
    pub const FORW: u8 = 0x02;
}

/// Outer Header Removal description for GTP-U/UDP/IPv6.
pub const OHR_GTPU_UDP_IPV6: u8 = 1;
/// Outer Header Creation description bit for GTP-U/UDP/IPv6.
pub const OHC_GTPU_UDP_IPV6: u16 = 0x0200;
pub const OHC_GTPU_UDP_IPV4: u16 = 0x0100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IePayload {
    Raw(Vec<u8>),
    Grouped(Vec<Ie>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ie {
    pub ie_type: u16,
    pub payload: IePayload,
}

impl Ie {
    pub fn raw(ie_type: u16, value: Vec<u8>) -> Self {
        Self { ie_type, payload: IePayload::Raw(value) }
    }

    pub fn grouped(ie_type: u16, children: Vec<Ie>) -> Self {
        Self { ie_type, payload: IePayload::Grouped(children) }
    }

    pub fn value(&self) -> &[u8] {
        match &self.payload {
            IePayload::Raw(v) => v,
            IePayload::Grouped(_) => &[],
        }
    }

    pub fn children(&self) -> &[Ie] {
        match &self.payload {
            IePayload::Grouped(c) => c,
            IePayload::Raw(_) => &[],
        }
    }

    pub fn child(&self, ie_type: u16) -> Option<&Ie> {
        find(self.children(), ie_type)
    }

    pub fn encoded_len(&self) -> usize {
        4 + self.value_len()
    }

    fn value_len(&self) -> usize {
        match &self.payload {
            IePayload::Raw(v) => v.len(),
            IePayload::Grouped(c) => c.iter().map(Ie::encoded_len).sum(),
        }
    }

    pub(crate) fn encode(&self, out: &mut Vec<u8>) -> Result<(), PfcpError> {
        let len = u16::try_from(self.value_len()).map_err(|_| PfcpError::Oversize)?;
        out.extend_from_slice(&self.ie_type.to_be_bytes());
        out.extend_from_slice(&len.to_be_bytes());
        match &self.payload {
            IePayload::Raw(v) => out.extend_from_slice(v),
            IePayload::Grouped(c) => {
                for ie in c {
                    ie.encode(out)?;
                }
            }
        }
        Ok(())
    }

    // Scalar constructors.

    pub fn cause(c: u8) -> Self {
        Self::raw(types::CAUSE, vec![c])
    }

    pub fn recovery_time_stamp(ts: u32) -> Self {
        Self::raw(types::RECOVERY_TIME_STAMP, ts.to_be_bytes().to_vec())
    }

    pub fn node_id(id: &NodeId) -> Self {
        let mut v = Vec::new();
        match id {
            NodeId::Ipv4(a) => {
                v.push(0);
                v.extend_from_slice(&a.octets());
            }
            NodeId::Ipv6(a) => {
                v.push(1);
                v.extend_from_slice(&a.octets());
            }
            NodeId::Fqdn(name) => {
                v.push(2);
                v.extend_from_slice(&encode_labels(name));
            }
        }
        Self::raw(types::NODE_ID, v)
    }

    pub fn f_seid(seid: u64, addr: Ipv6Addr) -> Self {
        let mut v = vec![0x01];
        v.extend_from_slice(&seid.to_be_bytes());
        v.extend_from_slice(&addr.octets());
        Self::raw(types::F_SEID, v)
    }

    pub fn f_teid(teid: u32, addr: Ipv6Addr) -> Self {
        let mut v = vec![0x02];
        v.extend_from_slice(&teid.to_be_bytes());
        v.extend_from_slice(&addr.octets());
        Self::raw(types::F_TEID, v)
    }

    pub fn source_interface(i: u8) -> Self {
        Self::raw(types::SOURCE_INTERFACE, vec![i & 0x0f])
    }

    pub fn destination_interface(i: u8) -> Self {
        Self::raw(types::DESTINATION_INTERFACE, vec![i & 0x0f])
    }

    pub fn network_instance(name: &str) -> Self {
        Self::raw(types::NETWORK_INSTANCE, encode_labels(name))
    }

    pub fn precedence(p: u32) -> Self {
        Self::raw(types::PRECEDENCE, p.to_be_bytes().to_vec())
    }

    pub fn apply_action(flags: u8) -> Self {
        Self::raw(types::APPLY_ACTION, vec![flags])
    }

    pub fn pdr_id(id: u16) -> Self {
        Self::raw(types::PDR_ID, id.to_be_bytes().to_vec())
    }

    pub fn far_id(id: u32) -> Self {
        Self::raw(types::FAR_ID, id.to_be_bytes().to_vec())
    }

    pub fn qfi(q: u8) -> Self {
        Self::raw(types::QFI, vec![q & 0x3f])
    }

    pub fn outer_header_creation(teid: u32, addr: Ipv6Addr) -> Self {
        let mut v = OHC_GTPU_UDP_IPV6.to_be_bytes().to_vec();
        v.extend_from_slice(&teid.to_be_bytes());
        v.extend_from_slice(&addr.octets());
        Self::raw(types::OUTER_HEADER_CREATION, v)
    }

    pub fn outer_header_removal(desc: u8) -> Self {
        Self::raw(types::OUTER_HEADER_REMOVAL, vec![desc])
    }

    /// UE IP Address with the V6 flag; `destination` sets S/D.
    pub fn ue_ip_address(addr: Ipv6Addr, destination: bool) -> Self {
        let mut v = vec![0x01 | if destination { 0x04 } else { 0 }];
        v.extend_from_slice(&addr.octets());
        Self::raw(types::UE_IP_ADDRESS, v)
    }

    // Scalar decoders.

    fn fixed<const N: usize>(&self) -> Result<[u8; N], PfcpError> {
        let v = self.value();
        if v.len() < N {
            return Err(PfcpError::BadIe { ie_type: self.ie_type, reason: "value too short" });
        }
        let mut out = [0u8; N];
        out.copy_from_slice(&v[..N]);
        Ok(out)
    }

    pub fn as_u8(&self) -> Result<u8, PfcpError> {
        Ok(self.fixed::<1>()?[0])
    }

    pub fn as_u16(&self) -> Result<u16, PfcpError> {
        Ok(u16::from_be_bytes(self.fixed()?))
    }

    pub fn as_u32(&self) -> Result<u32, PfcpError> {
        Ok(u32::from_be_bytes(self.fixed()?))
    }

    pub fn as_interface(&self) -> Result<u8, PfcpError> {
        Ok(self.as_u8()? & 0x0f)
    }

    pub fn as_network_instance(&self) -> String {
        decode_labels(self.value())
    }

    pub fn as_node_id(&self) -> Result<NodeId, PfcpError> {
        let v = self.value();
        let bad = |reason| PfcpError::BadIe { ie_type: self.ie_type, reason };
        match v.first().map(|b| b & 0x0f) {
            Some(0) if v.len() >= 5 => Ok(NodeId::Ipv4(Ipv4Addr::new(v[1], v[2], v[3], v[4]))),
            Some(1) if v.len() >= 17 => Ok(NodeId::Ipv6(read_v6(&v[1..]))),
            Some(2) => Ok(NodeId::Fqdn(decode_labels(&v[1..]))),
            Some(_) => Err(bad("unknown node id type or short value")),
            None => Err(bad("empty node id")),
        }
    }

    pub fn as_f_seid(&self) -> Result<FSeid, PfcpError> {
        let v = self.value();
        let bad = PfcpError::BadIe { ie_type: self.ie_type, reason: "malformed F-SEID" };
        if v.len() < 9 {
            return Err(bad);
        }
        let (v6, v4) = (v[0] & 0x01 != 0, v[0] & 0x02 != 0);
        let seid = u64::from_be_bytes(v[1..9].try_into().expect("8 octets"));
        let mut pos = 9;
        let ipv4 = take_v4(v, &mut pos, v4).ok_or(bad.clone())?;
        let ipv6 = take_v6(v, &mut pos, v6).ok_or(bad)?;
        Ok(FSeid { seid, ipv4, ipv6 })
    }

    pub fn as_f_teid(&self) -> Result<FTeid, PfcpError> {
        let v = self.value();
        let bad = PfcpError::BadIe { ie_type: self.ie_type, reason: "malformed F-TEID" };
        let flags = *v.first().ok_or(bad.clone())?;
        let (v4, v6, ch) = (flags & 0x01 != 0, flags & 0x02 != 0, flags & 0x04 != 0);
        if ch {
            return Ok(FTeid { teid: None, ipv4: None, ipv6: None });
        }
        if v.len() < 5 {
            return Err(bad);
        }
        let teid = u32::from_be_bytes(v[1..5].try_into().expect("4 octets"));
        let mut pos = 5;
        let ipv4 = take_v4(v, &mut pos, v4).ok_or(bad.clone())?;
        let ipv6 = take_v6(v, &mut pos, v6).ok_or(bad)?;
        Ok(FTeid { teid: Some(teid), ipv4, ipv6 })
    }

    pub fn as_ue_ip_address(&self) -> Result<UeIpAddress, PfcpError> {
        let v = self.value();
        let bad = PfcpError::BadIe { ie_type: self.ie_type, reason: "malformed UE IP Address" };
        let flags = *v.first().ok_or(bad.clone())?;
        let (v6, v4, dst) = (flags & 0x01 != 0, flags & 0x02 != 0, flags & 0x04 != 0);
        let mut pos = 1;
        let ipv4 = take_v4(v, &mut pos, v4).ok_or(bad.clone())?;
        let ipv6 = take_v6(v, &mut pos, v6).ok_or(bad)?;
        Ok(UeIpAddress { ipv4, ipv6, destination: dst })
    }

    pub fn as_outer_header_creation(&self) -> Result<OuterHeaderCreation, PfcpError> {
        let v = self.value();
        let bad = PfcpError::BadIe { ie_type: self.ie_type, reason: "malformed Outer Header Creation" };
        if v.len() < 2 {
            return Err(bad);
        }
        let description = u16::from_be_bytes([v[0], v[1]]);
        let gtp = description & (OHC_GTPU_UDP_IPV4 | OHC_GTPU_UDP_IPV6) != 0;
        let mut pos = 2;
        let teid = if gtp {
            let t = v.get(2..6).ok_or(bad.clone())?;
            pos = 6;
            Some(u32::from_be_bytes(t.try_into().expect("4 octets")))
        } else {
            None
        };
        // IPv4 present for GTP-U/UDP/IPv4, UDP/IPv4 and IPv4; likewise IPv6.
        let ipv4 = take_v4(v, &mut pos, description & 0x1500 != 0).ok_or(bad.clone())?;
        let ipv6 = take_v6(v, &mut pos, description & 0x2a00 != 0).ok_or(bad)?;
        Ok(OuterHeaderCreation { description, teid, ipv4, ipv6 })
    }
}

fn read_v6(v: &[u8]) -> Ipv6Addr {
    let mut a = [0u8; 16];
    a.copy_from_slice(&v[..16]);
    Ipv6Addr::from(a)
}

fn take_v4(v: &[u8], pos: &mut usize, present: bool) -> Option<Option<Ipv4Addr>> {
    if !present {
        return Some(None);
    }
    let b = v.get(*pos..*pos + 4)?;
    *pos += 4;
    Some(Some(Ipv4Addr::new(b[0], b[1], b[2], b[3])))
}

fn take_v6(v: &[u8], pos: &mut usize, present: bool) -> Option<Option<Ipv6Addr>> {
    if !present {
        return Some(None);
    }
    let b = v.get(*pos..*pos + 16)?;
    *pos += 16;
    Some(Some(read_v6(b)))
}

/// Encodes a dotted name as length-prefixed labels.
pub fn encode_labels(name: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(name.len() + 1);
    for label in name.split('.') {
        out.push(label.len() as u8);
        out.extend_from_slice(label.as_bytes());
    }
    out
}

/// Decodes length-prefixed labels; falls back to the raw text when the
/// value is not a well-formed label sequence.
pub fn decode_labels(v: &[u8]) -> String {
    let mut labels = Vec::new();
    let mut pos = 0;
    while pos < v.len() {
        let n = usize::from(v[pos]);
        if n == 0 || pos + 1 + n > v.len() {
            return String::from_utf8_lossy(v).into_owned();
        }
        labels.push(String::from_utf8_lossy(&v[pos + 1..pos + 1 + n]).into_owned());
        pos += 1 + n;
    }
    labels.join(".")
}

pub fn find(ies: &[Ie], ie_type: u16) -> Option<&Ie> {
    ies.iter().find(|ie| ie.ie_type == ie_type)
}

pub fn find_all(ies: &[Ie], ie_type: u16) -> impl Iterator<Item = &Ie> {
    ies.iter().filter(move |ie| ie.ie_type == ie_type)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeId {
    Ipv4(Ipv4Addr),
    Ipv6(Ipv6Addr),
    Fqdn(String),
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NodeId::Ipv4(a) => a.fmt(f),
            NodeId::Ipv6(a) => a.fmt(f),
            NodeId::Fqdn(n) => f.write_str(n),
        }
    }
}

impl std::str::FromStr for NodeId {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(if let Ok(a) = s.parse::<Ipv6Addr>() {
            NodeId::Ipv6(a)
        } else if let Ok(a) = s.parse::<Ipv4Addr>() {
            NodeId::Ipv4(a)
        } else {
            NodeId::Fqdn(s.to_string())
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FSeid {
    pub seid: u64,
    pub ipv4: Option<Ipv4Addr>,
    pub ipv6: Option<Ipv6Addr>,
}

/// `teid` is `None` when the CH flag asks the UP function to choose.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FTeid {
    pub teid: Option<u32>,
    pub ipv4: Option<Ipv4Addr>,
    pub ipv6: Option<Ipv6Addr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UeIpAddress {
    pub ipv4: Option<Ipv4Addr>,
    pub ipv6: Option<Ipv6Addr>,
    pub destination: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OuterHeaderCreation {
    pub description: u16,
    pub teid: Option<u32>,
    pub ipv4: Option<Ipv4Addr>,
    pub ipv6: Option<Ipv6Addr>,
}
