//! SMF emulator: drives the controller over PFCP exactly as it would drive
//! a UPF.

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv6Addr;

use super::topology::SessionSpec;
use crate::pfcp::ie::{apply_action, interface, OHR_GTPU_UDP_IPV6};
use crate::pfcp::session::{update_far_ie, Far, Pdi, Pdr};
use crate::pfcp::{msg, Ie, NodeId, PfcpMessage};

pub(crate) const UL_PDR: u16 = 1;
pub(crate) const DL_PDR: u16 = 2;
pub(crate) const UL_FAR: u32 = 1;
pub(crate) const DL_FAR: u32 = 2;

/// What a session modification changes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionChange {
    /// Move the downlink tunnel to another gNB endpoint.
    Tunnel { gnb: String, gnb_addr: Ipv6Addr, teid_dl: u32 },
    Qfi(u8),
    NetworkInstance(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Pending {
    Association,
    Heartbeat,
    Establish { session: String },
    Modify { session: String, change: SessionChange },
    Delete { session: String },
}

/// SMF-side view of one PDU session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct SmfSession {
    pub spec: SessionSpec,
    pub cp_seid: u64,
    pub teid_ul: u32,
    pub teid_dl: u32,
    pub gnb: String,
    pub gnb_addr: Ipv6Addr,
    pub up_seid: Option<u64>,
}

#[derive(Debug, Clone)]
pub(crate) struct SmfState {
    pub node_id: NodeId,
    pub addr: Ipv6Addr,
    pub n3: Ipv6Addr,
    next_sequence: u32,
    next_cp_seid: u64,
    next_teid_ul: u32,
    pub pending: BTreeMap<u32, Pending>,
    /// Node IDs seen in responses.
    pub peers: BTreeSet<NodeId>,
    pub associations: usize,
    pub sessions: BTreeMap<String, SmfSession>,
}

impl SmfState {
    pub fn new(node_id: NodeId, addr: Ipv6Addr, n3: Ipv6Addr) -> Self {
        Self {
            node_id,
            addr,
            n3,
            next_sequence: 1,
            next_cp_seid: 1,
            next_teid_ul: 100,
            pending: BTreeMap::new(),
            peers: BTreeSet::new(),
            associations: 0,
            sessions: BTreeMap::new(),
        }
    }

    fn sequence(&mut self, p: Pending) -> u32 {
        let s = self.next_sequence;
        self.next_sequence = (self.next_sequence + 1) & 0x00ff_ffff;
        self.pending.insert(s, p);
        s
    }

    pub fn association_request(&mut self) -> PfcpMessage {
        let seq = self.sequence(Pending::Association);
        PfcpMessage::node(msg::ASSOCIATION_SETUP_REQUEST, seq, vec![Ie::node_id(&self.node_id), Ie::recovery_time_stamp(1)])
    }

    pub fn heartbeat_request(&mut self) -> PfcpMessage {
        let seq = self.sequence(Pending::Heartbeat);
        PfcpMessage::node(msg::HEARTBEAT_REQUEST, seq, vec![Ie::recovery_time_stamp(1)])
    }

    pub fn allocate_teid_ul(&mut self, fixed: Option<u32>) -> u32 {
        fixed.unwrap_or_else(|| {
            let t = self.next_teid_ul;
            self.next_teid_ul += 1;
            t
        })
    }

    /// Registers a session and builds its establishment request.
    pub fn establishment_request(&mut self, s: SmfSession) -> PfcpMessage {
        let name = s.spec.name.clone();
        let seq = self.sequence(Pending::Establish { session: name.clone() });
        let mut s = s;
        s.cp_seid = self.next_cp_seid;
        self.next_cp_seid += 1;
        let mut ies = vec![Ie::node_id(&self.node_id), Ie::f_seid(s.cp_seid, self.addr)];
        ies.extend(self.pdrs(&s, &s.spec.network_instance, s.spec.qfi));
        ies.extend(fars(&s));
        self.sessions.insert(name, s);
        PfcpMessage::session(msg::SESSION_ESTABLISHMENT_REQUEST, 0, seq, ies)
    }

    fn pdrs(&self, s: &SmfSession, ni: &str, qfi: u8) -> [Ie; 2] {
        let ul = Pdr {
            pdr_id: UL_PDR,
            precedence: s.spec.precedence,
            pdi: Pdi {
                source_interface: interface::ACCESS,
                f_teid: Ie::f_teid(s.teid_ul, self.n3).as_f_teid().ok(),
                ue_ip: Ie::ue_ip_address(s.spec.ue_addr, false).as_ue_ip_address().ok(),
                network_instance: Some(ni.to_string()),
                qfi: Some(qfi),
            },
            outer_header_removal: Some(OHR_GTPU_UDP_IPV6),
            far_id: UL_FAR,
        };
        let dl = Pdr {
            pdr_id: DL_PDR,
            precedence: s.spec.precedence,
            pdi: Pdi {
                source_interface: interface::CORE,
                ue_ip: Ie::ue_ip_address(s.spec.ue_addr, true).as_ue_ip_address().ok(),
                network_instance: Some(ni.to_string()),
                qfi: Some(qfi),
                ..Pdi::default()
            },
            outer_header_removal: None,
            far_id: DL_FAR,
        };
        [ul.to_ie(), dl.to_ie()]
    }

    pub fn modification_request(&mut self, name: &str, change: SessionChange) -> Option<PfcpMessage> {
        let s = self.sessions.get(name)?.clone();
        let seid = s.up_seid?;
        let ies: Vec<Ie> = match &change {
            SessionChange::Tunnel { gnb_addr, teid_dl, .. } => vec![update_far_ie(DL_FAR, *teid_dl, *gnb_addr)],
            SessionChange::Qfi(q) => self.pdrs(&s, &s.spec.network_instance, *q).into(),
            SessionChange::NetworkInstance(ni) => self.pdrs(&s, ni, s.spec.qfi).into(),
        };
        let seq = self.sequence(Pending::Modify { session: name.to_string(), change });
        Some(PfcpMessage::session(msg::SESSION_MODIFICATION_REQUEST, seid, seq, ies))
    }

    pub fn deletion_request(&mut self, name: &str) -> Option<PfcpMessage> {
        let seid = self.sessions.get(name)?.up_seid?;
        let seq = self.sequence(Pending::Delete { session: name.to_string() });
        Some(PfcpMessage::session(msg::SESSION_DELETION_REQUEST, seid, seq, vec![]))
    }
}

fn fars(s: &SmfSession) -> [Ie; 2] {
    let ul = Far {
        far_id: UL_FAR,
        apply_action: apply_action::FORW,
        destination_interface: Some(interface::CORE),
        network_instance: Some(s.spec.network_instance.clone()),
        outer_header_creation: None,
    };
    let dl = Far {
        far_id: DL_FAR,
        apply_action: apply_action::FORW,
        destination_interface: Some(interface::ACCESS),
        network_instance: None,
        outer_header_creation: Ie::outer_header_creation(s.teid_dl, s.gnb_addr).as_outer_header_creation().ok(),
    };
    [ul.to_ie(), dl.to_ie()]
}
