//! The discrete-event loop and per-node packet handling.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};
use std::net::{IpAddr, Ipv6Addr};
use std::sync::Arc;

use super::smf::{Pending, SessionChange, SmfSession, SmfState};
use super::topology::{compute_routes, Hop, NodeKind, SessionSpec, TopologySpec};
use super::trace::{summarize, PacketId, TraceAction, TraceEvent};
use super::SimError;
use crate::addr::Ipv6Prefix;
use crate::pfcp::ie::{cause, types};
use crate::pfcp::{
    decode_pfcp, encode_pfcp, msg, Controller, ControllerConfig, DomainMap, GatewayRole, InstancePolicy, NodeId,
    PfcpMessage, PushRecord,
};
use crate::rules::{PrefixMap, RuleOrigin, RuleTable};
use crate::srv6::{execute, h_encaps, AttachedHost, BehaviorBinding, BehaviorContext, BehaviorKind, DropReason, ForwardDecision};
use crate::wire::{
    parse_gtpu, parse_ipv6, parse_udp, proto, serialize_gtpu, serialize_ipv6, serialize_udp, GtpuHeader, InnerPdu,
    Ipv6Header, PduSessionContainer, GTPU_G_PDU, GTPU_PORT, PFCP_PORT,
};

pub const DEFAULT_HOP_LIMIT: u8 = 64;
/// UDP ports of the synthetic user traffic.
pub const UE_PORT: u16 = 40000;
pub const SERVICE_PORT: u16 = 7;

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    PacketArrival { node: String, packet: Vec<u8>, id: PacketId },
    /// A host hands a PDU to its gateway (echo replies, downlink injection).
    HostEmit { host: String, pdu: Vec<u8>, id: PacketId },
    Associate,
    Heartbeat,
    SessionEstablish { session: String },
    SessionModify { session: String, change: SessionChange },
    SessionDelete { session: String },
    PolicyUpdate { policy: InstancePolicy },
    Handover { ue: String, to_gnb: String },
    InjectPdu { session: String, payload: Vec<u8>, id: PacketId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: u64,
    pub seq: u64,
    pub kind: EventKind,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Uplink,
    Downlink,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Delivered { node: String, time: u64, pdu: Vec<u8> },
    Dropped { node: String, time: u64, reason: DropReason },
}

/// A user PDU entering the network and where it ended up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserPacket {
    pub direction: Direction,
    pub session: Option<String>,
    pub injected_at: u64,
    pub pdu: Vec<u8>,
    pub outcome: Option<Outcome>,
    /// Terminal events recorded for this packet; 1 when conserved.
    pub terminal_events: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeCensus {
    pub node: String,
    pub kind: NodeKind,
    pub session_rules: usize,
    pub static_rules: usize,
    pub sessions: usize,
}

impl NodeCensus {
    /// Entries that exist only because of PDU sessions.
    pub fn session_entries(&self) -> usize {
        self.session_rules + self.sessions
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Census {
    pub nodes: Vec<NodeCensus>,
}

impl Census {
    pub fn session_entries(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).map(NodeCensus::session_entries).sum()
    }

    pub fn node(&self, id: &str) -> Option<&NodeCensus> {
        self.nodes.iter().find(|n| n.node == id)
    }
}

#[derive(Debug, Clone)]
struct UplinkContext {
    teid: u32,
    qfi: u8,
}

#[derive(Debug)]
struct GnbState {
    n3: Ipv6Addr,
    next_teid: u32,
    /// Downlink TEID to session.
    downlink: BTreeMap<u32, String>,
    uplink: BTreeMap<String, UplinkContext>,
}

#[derive(Debug)]
struct SrState {
    bindings: Vec<BehaviorBinding>,
    table: Option<Arc<RuleTable>>,
    hosts: Vec<AttachedHost>,
    sr_source: Ipv6Addr,
}

#[derive(Debug)]
enum Role {
    Gnb(GnbState),
    Sr(SrState),
    Smf(Box<SmfState>),
    Controller(Box<Controller>),
}

#[derive(Debug)]
struct Node {
    id: String,
    kind: NodeKind,
    addr: Ipv6Addr,
    routes: PrefixMap<Hop>,
    links: BTreeMap<usize, u64>,
    role: Role,
}

#[derive(Debug, Clone)]
struct HostState {
    id: String,
    gateway: usize,
    addr: IpAddr,
    echo: bool,
}

/// Deterministic discrete-event simulator.
#[derive(Debug)]
pub struct Simulator {
    nodes: Vec<Node>,
    index: BTreeMap<String, usize>,
    hosts: BTreeMap<String, HostState>,
    ues: BTreeMap<String, usize>,
    sessions: BTreeMap<String, SessionSpec>,
    smf: Option<usize>,
    controller: Option<usize>,
    queue: BinaryHeap<Reverse<Event>>,
    next_seq: u64,
    now: u64,
    next_packet: PacketId,
    trace: Vec<TraceEvent>,
    packets: BTreeMap<PacketId, UserPacket>,
}

impl Simulator {
    /// Builds the network. The SMF emulator, if present, associates with
    /// the controller at tick 0.
    pub fn build(spec: TopologySpec) -> Result<Self, SimError> {
        let routed = spec.check()?;
        let index: BTreeMap<String, usize> = routed.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();
        let mut adj = vec![BTreeMap::new(); routed.len()];
        for l in &spec.links {
            let (a, b) = (index[&l.a], index[&l.b]);
            adj[a].insert(b, l.delay);
            adj[b].insert(a, l.delay);
        }
        let routes = compute_routes(&routed, &adj);

        let gtp6e: Vec<Ipv6Prefix> = spec
            .sr_nodes
            .iter()
            .flat_map(|n| n.bindings.iter())
            .filter(|b| matches!(b.kind, BehaviorKind::EndMGtp6E { .. }))
            .map(|b| b.prefix)
            .collect();
        let mut tables = BTreeMap::new();
        let mut domain = DomainMap::default();
        for n in spec.sr_nodes.iter().filter(|n| n.kind == NodeKind::Gateway) {
            tables.insert(n.id.clone(), Arc::new(RuleTable::with_gtp6e_prefixes(gtp6e.clone())));
            let role = GatewayRole {
                dt_sid: n
                    .bindings
                    .iter()
                    .find(|b| matches!(b.kind, BehaviorKind::EndDt6 { .. } | BehaviorKind::EndDt4 { .. }))
                    .map(BehaviorBinding::sid),
                gtp6e_prefix: n.bindings.iter().find(|b| matches!(b.kind, BehaviorKind::EndMGtp6E { .. })).map(|b| b.prefix),
            };
            domain.gateways.insert(n.id.clone(), role);
        }
        for g in &spec.gnbs {
            domain.gnbs.insert(g.addr, g.gateway.clone());
        }
        let mut by_gw: BTreeMap<&str, Vec<crate::rules::Rule>> = BTreeMap::new();
        for (gw, rule) in &spec.static_rules {
            by_gw.entry(gw.as_str()).or_default().push(rule.clone());
        }
        for (gw, rules) in by_gw {
            tables[gw].apply_update(rules, &[]).map_err(|e| SimError::Rules { gateway: gw.to_string(), source: e })?;
        }

        let n3 = spec.controller.as_ref().map_or(Ipv6Addr::UNSPECIFIED, |c| c.n3);
        let mut nodes = Vec::with_capacity(routed.len());
        for ((r, routes), links) in routed.into_iter().zip(routes).zip(adj) {
            let role = match r.kind {
                NodeKind::Controller => {
                    let c = spec.controller.as_ref().expect("controller spec");
                    let cfg = ControllerConfig { node_id: c.node_id.clone(), address: c.addr, recovery_time_stamp: c.recovery_time_stamp };
                    let ctl = Controller::new(cfg, domain.clone(), tables.clone(), spec.policy.clone()).map_err(SimError::Controller)?;
                    Role::Controller(Box::new(ctl))
                }
                NodeKind::Smf => {
                    let s = spec.smf.as_ref().expect("smf spec");
                    Role::Smf(Box::new(SmfState::new(s.node_id.clone(), s.addr, n3)))
                }
                NodeKind::Gnb => Role::Gnb(GnbState { n3, next_teid: 1, downlink: BTreeMap::new(), uplink: BTreeMap::new() }),
                _ => {
                    let s = spec.sr_nodes.iter().find(|n| n.id == r.id).expect("sr spec");
                    let hosts = spec
                        .hosts
                        .iter()
                        .filter(|h| h.gateway == r.id)
                        .map(|h| AttachedHost { id: h.id.clone(), table: h.table, addr: h.addr })
                        .collect();
                    Role::Sr(SrState { bindings: s.bindings.clone(), table: tables.get(&r.id).cloned(), hosts, sr_source: s.sr_source })
                }
            };
            nodes.push(Node { id: r.id, kind: r.kind, addr: r.addr, routes, links, role });
        }
        let smf = nodes.iter().position(|n| n.kind == NodeKind::Smf);
        let controller = nodes.iter().position(|n| n.kind == NodeKind::Controller);
        let hosts = spec
            .hosts
            .iter()
            .map(|h| (h.id.clone(), HostState { id: h.id.clone(), gateway: index[&h.gateway], addr: h.addr, echo: h.echo }))
            .collect();
        let ues = spec.ues.iter().map(|u| (u.id.clone(), index[&u.gnb])).collect();
        let mut sim = Simulator {
            nodes,
            index,
            hosts,
            ues,
            sessions: BTreeMap::new(),
            smf,
            controller,
            queue: BinaryHeap::new(),
            next_seq: 0,
            now: 0,
            next_packet: 1,
            trace: Vec::new(),
            packets: BTreeMap::new(),
        };
        if smf.is_some() && controller.is_some() {
            sim.schedule(0, EventKind::Associate);
        }
        Ok(sim)
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn packets(&self) -> &BTreeMap<PacketId, UserPacket> {
        &self.packets
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn node_kind(&self, id: &str) -> Option<NodeKind> {
        if self.hosts.contains_key(id) {
            return Some(NodeKind::Host);
        }
        self.index.get(id).map(|&i| self.nodes[i].kind)
    }

    pub fn has_ue(&self, id: &str) -> bool {
        self.ues.contains_key(id)
    }

    pub fn has_session(&self, name: &str) -> bool {
        self.sessions.contains_key(name)
    }

    /// Current gNB of a UE.
    pub fn ue_gnb(&self, ue: &str) -> Option<&str> {
        self.ues.get(ue).map(|&i| self.nodes[i].id.as_str())
    }

    pub fn controller(&self) -> Option<&Controller> {
        match &self.nodes[self.controller?].role {
            Role::Controller(c) => Some(c),
            _ => None,
        }
    }

    fn smf_state(&self) -> Option<&SmfState> {
        match &self.nodes[self.smf?].role {
            Role::Smf(s) => Some(s),
            _ => None,
        }
    }

    /// PFCP peer Node IDs the SMF emulator has seen.
    pub fn smf_peers(&self) -> Vec<NodeId> {
        self.smf_state().map_or(Vec::new(), |s| s.peers.iter().cloned().collect())
    }

    /// Accepted associations recorded by the SMF emulator.
    pub fn smf_associations(&self) -> usize {
        self.smf_state().map_or(0, |s| s.associations)
    }

    /// Sessions the SMF emulator holds as established.
    pub fn active_sessions(&self) -> Vec<String> {
        self.smf_state().map_or(Vec::new(), |s| s.sessions.values().filter(|x| x.up_seid.is_some()).map(|x| x.spec.name.clone()).collect())
    }

    /// Downlink TEID currently assigned to a session.
    pub fn session_teid_dl(&self, name: &str) -> Option<u32> {
        self.smf_state()?.sessions.get(name).map(|s| s.teid_dl)
    }

    pub fn rule_table(&self, gateway: &str) -> Option<Arc<RuleTable>> {
        match &self.nodes[*self.index.get(gateway)?].role {
            Role::Sr(s) => s.table.clone(),
            _ => None,
        }
    }

    /// Registers a session so that events may refer to it.
    pub fn declare_session(&mut self, spec: SessionSpec) -> Result<(), SimError> {
        if !self.ues.contains_key(&spec.ue) {
            return Err(SimError::UnknownUe(spec.ue));
        }
        if spec.qfi > 63 {
            return Err(SimError::InvalidSession { session: spec.name, reason: "qfi must be below 64" });
        }
        self.sessions.insert(spec.name.clone(), spec);
        Ok(())
    }

    pub fn schedule(&mut self, time: u64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Event { time, seq, kind }));
    }

    fn session_known(&self, name: &str) -> Result<(), SimError> {
        if self.sessions.contains_key(name) {
            Ok(())
        } else {
            Err(SimError::UnknownSession(name.to_string()))
        }
    }

    pub fn establish(&mut self, at: u64, session: &str) -> Result<(), SimError> {
        self.session_known(session)?;
        self.schedule(at, EventKind::SessionEstablish { session: session.to_string() });
        Ok(())
    }

    pub fn modify(&mut self, at: u64, session: &str, change: SessionChange) -> Result<(), SimError> {
        self.session_known(session)?;
        self.schedule(at, EventKind::SessionModify { session: session.to_string(), change });
        Ok(())
    }

    pub fn delete(&mut self, at: u64, session: &str) -> Result<(), SimError> {
        self.session_known(session)?;
        self.schedule(at, EventKind::SessionDelete { session: session.to_string() });
        Ok(())
    }

    pub fn update_policy(&mut self, at: u64, policy: InstancePolicy) {
        self.schedule(at, EventKind::PolicyUpdate { policy });
    }

    pub fn heartbeat(&mut self, at: u64) {
        self.schedule(at, EventKind::Heartbeat);
    }

    /// Queues an uplink PDU from the session's UE.
    pub fn inject_pdu(&mut self, at: u64, session: &str, payload: &[u8]) -> Result<PacketId, SimError> {
        self.session_known(session)?;
        let id = self.alloc_packet();
        self.schedule(at, EventKind::InjectPdu { session: session.to_string(), payload: payload.to_vec(), id });
        Ok(id)
    }

    /// Queues a downlink PDU from `host` to the session's UE.
    pub fn inject_downlink(&mut self, at: u64, host: &str, session: &str, payload: &[u8]) -> Result<PacketId, SimError> {
        self.session_known(session)?;
        let h = self.hosts.get(host).ok_or_else(|| SimError::UnknownNode(host.to_string()))?;
        let IpAddr::V6(src) = h.addr else {
            return Err(SimError::InvalidSession { session: session.to_string(), reason: "downlink needs an IPv6 host" });
        };
        let s = &self.sessions[session];
        let pdu = build_pdu(src, s.ue_addr, SERVICE_PORT, UE_PORT, payload);
        let id = self.alloc_packet();
        self.packets.insert(id, UserPacket::new(Direction::Downlink, Some(session.to_string()), at, pdu.clone()));
        self.schedule(at, EventKind::HostEmit { host: host.to_string(), pdu, id });
        Ok(id)
    }

    pub fn trigger_handover(&mut self, at: u64, ue: &str, to_gnb: &str) -> Result<(), SimError> {
        if !self.ues.contains_key(ue) {
            return Err(SimError::UnknownUe(ue.to_string()));
        }
        if self.node_kind(to_gnb) != Some(NodeKind::Gnb) {
            return Err(SimError::UnknownGnb(to_gnb.to_string()));
        }
        self.schedule(at, EventKind::Handover { ue: ue.to_string(), to_gnb: to_gnb.to_string() });
        Ok(())
    }

    fn alloc_packet(&mut self) -> PacketId {
        let id = self.next_packet;
        self.next_packet += 1;
        id
    }

    /// Processes the earliest event. Returns false when idle.
    pub fn step(&mut self) -> bool {
        let Some(Reverse(ev)) = self.queue.pop() else { return false };
        self.now = ev.time;
        self.dispatch(ev.kind);
        true
    }

    /// Runs until the queue drains. Fails if events remain beyond `limit`.
    pub fn run_until_idle(&mut self, limit: u64) -> Result<&[TraceEvent], SimError> {
        while let Some(Reverse(next)) = self.queue.peek() {
            if next.time > limit {
                return Err(SimError::LimitExceeded { limit });
            }
            self.step();
        }
        Ok(&self.trace)
    }

    /// Per-node count of rules and session entries.
    pub fn snapshot_state(&self) -> Census {
        let mut nodes = Vec::new();
        for n in &self.nodes {
            let mut c = NodeCensus { node: n.id.clone(), kind: n.kind, session_rules: 0, static_rules: 0, sessions: 0 };
            match &n.role {
                Role::Sr(s) => {
                    if let Some(t) = &s.table {
                        let snap = t.snapshot();
                        let (u, d) = snap.count_where(|o| matches!(o, RuleOrigin::Session(_)));
                        c.session_rules = u + d;
                        c.static_rules = snap.len() - c.session_rules;
                    }
                }
                Role::Gnb(g) => c.sessions = g.uplink.len(),
                Role::Smf(s) => c.sessions = s.sessions.values().filter(|x| x.up_seid.is_some()).count(),
                Role::Controller(ctl) => c.sessions = ctl.session_count(),
            }
            nodes.push(c);
        }
        for h in self.hosts.values() {
            nodes.push(NodeCensus { node: h.id.clone(), kind: NodeKind::Host, session_rules: 0, static_rules: 0, sessions: 0 });
        }
        Census { nodes }
    }

    // Event handling.

    fn dispatch(&mut self, kind: EventKind) {
        match kind {
            EventKind::PacketArrival { node, packet, id } => {
                let i = self.index[&node];
                self.on_packet(i, packet, id);
            }
            EventKind::HostEmit { host, pdu, id } => self.on_host_emit(&host, pdu, id),
            EventKind::Associate => self.smf_send(|s| Some(s.association_request())),
            EventKind::Heartbeat => self.smf_send(|s| Some(s.heartbeat_request())),
            EventKind::SessionEstablish { session } => self.on_establish(&session),
            EventKind::SessionModify { session, change } => self.smf_send(|s| s.modification_request(&session, change)),
            EventKind::SessionDelete { session } => self.smf_send(|s| s.deletion_request(&session)),
            EventKind::PolicyUpdate { policy } => self.on_policy(policy),
            EventKind::Handover { ue, to_gnb } => self.on_handover(&ue, &to_gnb),
            EventKind::InjectPdu { session, payload, id } => self.on_inject(&session, &payload, id),
        }
    }

    fn record(&mut self, node: &str, action: TraceAction, id: Option<PacketId>, bytes: &[u8], reason: Option<DropReason>, detail: String) {
        let summary = if bytes.is_empty() { Default::default() } else { summarize(bytes) };
        self.trace.push(TraceEvent {
            time: self.now,
            node: node.to_string(),
            action,
            packet: id,
            summary,
            reason,
            detail,
            bytes: bytes.to_vec(),
        });
    }

    fn drop_packet(&mut self, node: usize, id: PacketId, bytes: &[u8], reason: DropReason) {
        let name = self.nodes[node].id.clone();
        self.record(&name, TraceAction::Drop, Some(id), bytes, Some(reason), String::new());
        let now = self.now;
        if let Some(p) = self.packets.get_mut(&id) {
            p.terminal_events += 1;
            p.outcome.get_or_insert(Outcome::Dropped { node: name, time: now, reason });
        }
    }

    fn deliver(&mut self, node: &str, id: PacketId, pdu: &[u8], detail: String) {
        self.record(node, TraceAction::Deliver, Some(id), pdu, None, detail);
        let now = self.now;
        if let Some(p) = self.packets.get_mut(&id) {
            p.terminal_events += 1;
            p.outcome.get_or_insert(Outcome::Delivered { node: node.to_string(), time: now, pdu: pdu.to_vec() });
        }
    }

    /// Sends a packet out of `node`. Transit forwarding decrements the hop
    /// limit; locally originated packets leave as built.
    fn forward(&mut self, node: usize, mut packet: Vec<u8>, id: PacketId, transit: bool) {
        if packet.len() < 40 {
            return self.drop_packet(node, id, &packet, DropReason::Malformed);
        }
        if transit {
            if packet[7] <= 1 {
                return self.drop_packet(node, id, &packet, DropReason::HopLimitExceeded);
            }
            packet[7] -= 1;
        }
        let dst = crate::wire::read_addr(&packet[24..]);
        match self.nodes[node].routes.lookup(dst).map(|(_, h)| *h) {
            None => self.drop_packet(node, id, &packet, DropReason::NoRoute),
            Some(Hop::Local) => {
                // Another SID on this same node.
                let name = self.nodes[node].id.clone();
                self.schedule(self.now, EventKind::PacketArrival { node: name, packet, id });
            }
            Some(Hop::Via(next)) => {
                let delay = self.nodes[node].links[&next];
                let (from, to) = (self.nodes[node].id.clone(), self.nodes[next].id.clone());
                self.record(&from, TraceAction::Xmit, Some(id), &packet, None, format!("to {to}"));
                self.schedule(self.now + delay, EventKind::PacketArrival { node: to, packet, id });
            }
        }
    }

    fn on_packet(&mut self, node: usize, packet: Vec<u8>, id: PacketId) {
        let name = self.nodes[node].id.clone();
        self.record(&name, TraceAction::Recv, Some(id), &packet, None, String::new());
        let Ok((ip, _)) = parse_ipv6(&packet) else {
            return self.drop_packet(node, id, &packet, DropReason::Malformed);
        };
        if let Role::Sr(sr) = &self.nodes[node].role {
            if let Some(binding) = sr.bindings.iter().find(|b| b.prefix.contains(ip.dst)).copied() {
                let snap = sr.table.as_ref().map(|t| t.snapshot());
                let ctx = BehaviorContext { uplink_rules: snap.as_deref(), hosts: &sr.hosts };
                let decision = execute(&packet, &binding, &ctx);
                return self.apply_decision(node, id, &packet, &binding, decision);
            }
        }
        if ip.dst == self.nodes[node].addr {
            return match self.nodes[node].kind {
                NodeKind::Gnb => self.gnb_receive(node, &packet, id),
                NodeKind::Smf => self.smf_receive(node, &packet, id),
                NodeKind::Controller => self.controller_receive(node, &packet, id),
                _ => self.drop_packet(node, id, &packet, DropReason::NoBinding),
            };
        }
        if matches!(self.nodes[node].routes.lookup(ip.dst), Some((_, Hop::Local))) {
            return self.drop_packet(node, id, &packet, DropReason::NoBinding);
        }
        self.forward(node, packet, id, true);
    }

    fn apply_decision(&mut self, node: usize, id: PacketId, packet: &[u8], binding: &BehaviorBinding, d: ForwardDecision) {
        match d {
            ForwardDecision::Drop(reason) => self.drop_packet(node, id, packet, reason),
            ForwardDecision::Forward { packet: out, .. } => {
                let transit = binding.kind == BehaviorKind::End;
                self.forward(node, out, id, transit);
            }
            ForwardDecision::LocalDeliver { host, pdu } => {
                let detail = format!("via {} {}", self.nodes[node].id, binding.kind.name());
                self.deliver(&host, id, &pdu, detail);
                let h = self.hosts[&host].clone();
                if h.echo {
                    if let Some(reply) = echo_reply(&pdu) {
                        let rid = self.alloc_packet();
                        let session = self.packets.get(&id).and_then(|p| p.session.clone());
                        self.packets.insert(rid, UserPacket::new(Direction::Downlink, session, self.now, reply.clone()));
                        self.schedule(self.now, EventKind::HostEmit { host: h.id, pdu: reply, id: rid });
                    }
                }
            }
        }
    }

    fn on_host_emit(&mut self, host: &str, pdu: Vec<u8>, id: PacketId) {
        let h = self.hosts[host].clone();
        self.record(host, TraceAction::Xmit, Some(id), &pdu, None, format!("to {}", self.nodes[h.gateway].id));
        let gw = h.gateway;
        let gw_name = self.nodes[gw].id.clone();
        self.record(&gw_name, TraceAction::Recv, Some(id), &pdu, None, format!("from {host}"));
        let Role::Sr(sr) = &self.nodes[gw].role else { return };
        let Ok(inner) = InnerPdu::new(pdu.clone()) else {
            return self.drop_packet(gw, id, &pdu, DropReason::Malformed);
        };
        let Some(table) = &sr.table else {
            return self.drop_packet(gw, id, &pdu, DropReason::NoMatchingRule);
        };
        let dst = crate::wire::classifier_addr(inner.dst());
        let snap = table.snapshot();
        let Ok(path) = snap.classify_downlink(dst) else {
            return self.drop_packet(gw, id, &pdu, DropReason::NoMatchingRule);
        };
        match h_encaps(&inner, path, sr.sr_source) {
            Ok(out) => self.forward(gw, out, id, false),
            Err(_) => self.drop_packet(gw, id, &pdu, DropReason::Malformed),
        }
    }

    fn on_inject(&mut self, session: &str, payload: &[u8], id: PacketId) {
        let spec = self.sessions[session].clone();
        let gnb = self.ues[&spec.ue];
        let pdu = build_pdu(spec.ue_addr, spec.service, UE_PORT, SERVICE_PORT, payload);
        self.packets.insert(id, UserPacket::new(Direction::Uplink, Some(session.to_string()), self.now, pdu.clone()));
        let name = self.nodes[gnb].id.clone();
        self.record(&name, TraceAction::Recv, Some(id), &pdu, None, format!("from {}", spec.ue));
        let (ctx, src) = match &self.nodes[gnb].role {
            Role::Gnb(g) => (g.uplink.get(session).cloned().map(|c| (c, g.n3)), self.nodes[gnb].addr),
            _ => (None, self.nodes[gnb].addr),
        };
        let Some((ctx, n3)) = ctx else {
            return self.drop_packet(gnb, id, &pdu, DropReason::NoSessionContext);
        };
        let gtp = GtpuHeader::g_pdu(ctx.teid).with_pdu_session(PduSessionContainer::uplink(ctx.qfi));
        let built = serialize_gtpu(&gtp, &pdu)
            .and_then(|g| serialize_udp(src, n3, GTPU_PORT, GTPU_PORT, &g))
            .and_then(|u| serialize_ipv6(&Ipv6Header::new(proto::UDP, src, n3), &u));
        match built {
            Ok(p) => self.forward(gnb, p, id, false),
            Err(_) => self.drop_packet(gnb, id, &pdu, DropReason::Malformed),
        }
    }

    fn gnb_receive(&mut self, node: usize, packet: &[u8], id: PacketId) {
        let parsed = parse_ipv6(packet)
            .ok()
            .filter(|(ip, _)| ip.next_header == proto::UDP)
            .and_then(|(ip, rest)| parse_udp(ip.src, ip.dst, rest).ok())
            .filter(|(udp, _)| udp.dst_port == GTPU_PORT)
            .and_then(|(_, body)| parse_gtpu(body).ok());
        let Some((gtp, inner)) = parsed else {
            return self.drop_packet(node, id, packet, DropReason::NotGtpu);
        };
        let name = self.nodes[node].id.clone();
        if gtp.message_type != GTPU_G_PDU {
            return self.deliver(&name, id, packet, "gtp-u echo".to_string());
        }
        let session = match &self.nodes[node].role {
            Role::Gnb(g) => g.downlink.get(&gtp.teid).cloned(),
            _ => None,
        };
        let Some(session) = session else {
            return self.drop_packet(node, id, packet, DropReason::UnknownTeid);
        };
        let ue = self.sessions.get(&session).map_or_else(String::new, |s| s.ue.clone());
        let inner = inner.to_vec();
        let detail = format!("ue={ue} session={session} teid={} qfi={}", gtp.teid, gtp.qfi().map_or("-".into(), |q| q.to_string()));
        // The trace keeps the GTP-U packet so teid/qfi stay visible.
        self.record(&name, TraceAction::Deliver, Some(id), packet, None, detail.clone());
        let now = self.now;
        if let Some(p) = self.packets.get_mut(&id) {
            p.terminal_events += 1;
            p.outcome.get_or_insert(Outcome::Delivered { node: name, time: now, pdu: inner });
        }
    }

    // Control plane.

    fn send_udp(&mut self, node: usize, dst: Ipv6Addr, sport: u16, dport: u16, payload: &[u8]) {
        let src = self.nodes[node].addr;
        let id = self.alloc_packet();
        let built = serialize_udp(src, dst, sport, dport, payload).and_then(|u| serialize_ipv6(&Ipv6Header::new(proto::UDP, src, dst), &u));
        if let Ok(p) = built {
            self.forward(node, p, id, false);
        }
    }

    fn smf_send(&mut self, f: impl FnOnce(&mut SmfState) -> Option<PfcpMessage>) {
        let (Some(smf), Some(ctl)) = (self.smf, self.controller) else { return };
        let ctl_addr = self.nodes[ctl].addr;
        let Role::Smf(state) = &mut self.nodes[smf].role else { return };
        let Some(m) = f(state) else { return };
        if let Ok(bytes) = encode_pfcp(&m) {
            self.send_udp(smf, ctl_addr, PFCP_PORT, PFCP_PORT, &bytes);
        }
    }

    fn on_establish(&mut self, session: &str) {
        let spec = self.sessions[session].clone();
        let gnb = self.ues[&spec.ue];
        let gnb_addr = self.nodes[gnb].addr;
        let gnb_name = self.nodes[gnb].id.clone();
        let teid_dl = spec.teid_dl.unwrap_or_else(|| self.alloc_gnb_teid(gnb));
        self.smf_send(move |s| {
            let teid_ul = s.allocate_teid_ul(spec.teid_ul);
            let sess = SmfSession { spec, cp_seid: 0, teid_ul, teid_dl, gnb: gnb_name, gnb_addr, up_seid: None };
            Some(s.establishment_request(sess))
        });
    }

    fn alloc_gnb_teid(&mut self, gnb: usize) -> u32 {
        match &mut self.nodes[gnb].role {
            Role::Gnb(g) => {
                let t = g.next_teid;
                g.next_teid += 1;
                t
            }
            _ => 0,
        }
    }

    fn on_handover(&mut self, ue: &str, to_gnb: &str) {
        let to = self.index[to_gnb];
        self.ues.insert(ue.to_string(), to);
        let Some(smf) = self.smf else { return };
        let names: Vec<String> = match &self.nodes[smf].role {
            Role::Smf(s) => s.sessions.values().filter(|x| x.spec.ue == ue && x.up_seid.is_some()).map(|x| x.spec.name.clone()).collect(),
            _ => Vec::new(),
        };
        for name in names {
            let teid_dl = self.alloc_gnb_teid(to);
            let change = SessionChange::Tunnel { gnb: to_gnb.to_string(), gnb_addr: self.nodes[to].addr, teid_dl };
            // The UE is now radio-attached to the target gNB.
            let s = self.smf_session(&name).expect("session");
            self.remove_gnb_context(&s);
            let mut moved = s.clone();
            moved.gnb = to_gnb.to_string();
            moved.gnb_addr = self.nodes[to].addr;
            moved.teid_dl = teid_dl;
            self.install_gnb_context(&moved);
            self.smf_send(|st| st.modification_request(&name, change));
        }
    }

    fn on_policy(&mut self, policy: InstancePolicy) {
        let Some(ci) = self.controller else { return };
        let Role::Controller(ctl) = &mut self.nodes[ci].role else { return };
        match ctl.update_policy(policy) {
            Ok(pushes) => self.record_pushes(&pushes),
            Err(e) => {
                let name = self.nodes[ci].id.clone();
                self.record(&name, TraceAction::RuleUpdate, None, &[], None, format!("policy rejected: {e}"));
            }
        }
    }

    fn record_pushes(&mut self, pushes: &[PushRecord]) {
        for p in pushes {
            let detail = format!("version={} added={} removed={}", p.version, p.added, p.removed);
            self.record(&p.gateway, TraceAction::RuleUpdate, None, &[], None, detail);
        }
    }

    fn controller_receive(&mut self, node: usize, packet: &[u8], id: PacketId) {
        let Some((src, sport, body)) = udp_body(packet, PFCP_PORT) else {
            return self.drop_packet(node, id, packet, DropReason::Malformed);
        };
        let name = self.nodes[node].id.clone();
        self.record(&name, TraceAction::Deliver, Some(id), packet, None, String::new());
        let Role::Controller(ctl) = &mut self.nodes[node].role else { return };
        let handled = ctl.handle(&body);
        self.record_pushes(&handled.pushes);
        if let Some(resp) = handled.response {
            self.send_udp(node, src, PFCP_PORT, sport, &resp);
        }
    }

    fn smf_receive(&mut self, node: usize, packet: &[u8], id: PacketId) {
        let Some((_, _, body)) = udp_body(packet, PFCP_PORT) else {
            return self.drop_packet(node, id, packet, DropReason::Malformed);
        };
        let Ok(m) = decode_pfcp(&body) else {
            return self.drop_packet(node, id, packet, DropReason::Malformed);
        };
        let accepted = m.cause() == Some(cause::REQUEST_ACCEPTED) || m.message_type == msg::HEARTBEAT_RESPONSE;
        let name = self.nodes[node].id.clone();
        let detail = match m.cause() {
            Some(c) => format!("cause={c}"),
            None => String::new(),
        };
        self.record(&name, TraceAction::Deliver, Some(id), packet, None, detail);
        let Role::Smf(s) = &mut self.nodes[node].role else { return };
        if let Some(peer) = m.ie(types::NODE_ID).and_then(|ie| ie.as_node_id().ok()) {
            s.peers.insert(peer);
        }
        let Some(pending) = s.pending.remove(&m.sequence) else { return };
        if !accepted {
            return;
        }
        let (session, install) = match pending {
            Pending::Association => {
                s.associations += 1;
                return;
            }
            Pending::Heartbeat => return,
            Pending::Establish { session } => {
                let up = m.ie(types::F_SEID).and_then(|ie| ie.as_f_seid().ok()).map(|f| f.seid);
                let Some(x) = s.sessions.get_mut(&session) else { return };
                x.up_seid = up;
                (x.clone(), true)
            }
            Pending::Modify { session, change } => {
                let Some(x) = s.sessions.get_mut(&session) else { return };
                match change {
                    SessionChange::Tunnel { gnb, gnb_addr, teid_dl } => {
                        x.gnb = gnb;
                        x.gnb_addr = gnb_addr;
                        x.teid_dl = teid_dl;
                    }
                    SessionChange::Qfi(q) => x.spec.qfi = q,
                    SessionChange::NetworkInstance(ni) => x.spec.network_instance = ni,
                }
                (x.clone(), true)
            }
            Pending::Delete { session } => {
                let Some(x) = s.sessions.get_mut(&session) else { return };
                x.up_seid = None;
                (x.clone(), false)
            }
        };
        if install {
            self.install_gnb_context(&session);
        } else {
            self.remove_gnb_context(&session);
        }
    }

    fn smf_session(&self, name: &str) -> Option<SmfSession> {
        self.smf_state()?.sessions.get(name).cloned()
    }

    fn install_gnb_context(&mut self, s: &SmfSession) {
        let Some(&gi) = self.index.get(&s.gnb) else { return };
        if let Role::Gnb(g) = &mut self.nodes[gi].role {
            g.downlink.retain(|_, v| v != &s.spec.name);
            g.downlink.insert(s.teid_dl, s.spec.name.clone());
            g.uplink.insert(
                s.spec.name.clone(),
                UplinkContext { teid: s.teid_ul, qfi: s.spec.qfi },
            );
        }
    }

    fn remove_gnb_context(&mut self, s: &SmfSession) {
        let Some(&gi) = self.index.get(&s.gnb) else { return };
        if let Role::Gnb(g) = &mut self.nodes[gi].role {
            g.downlink.retain(|_, v| v != &s.spec.name);
            g.uplink.remove(&s.spec.name);
        }
    }
}

impl UserPacket {
    fn new(direction: Direction, session: Option<String>, injected_at: u64, pdu: Vec<u8>) -> Self {
        Self { direction, session, injected_at, pdu, outcome: None, terminal_events: 0 }
    }
}

fn udp_body(packet: &[u8], port: u16) -> Option<(Ipv6Addr, u16, Vec<u8>)> {
    let (ip, rest) = parse_ipv6(packet).ok()?;
    if ip.next_header != proto::UDP {
        return None;
    }
    let (udp, body) = parse_udp(ip.src, ip.dst, rest).ok()?;
    (udp.dst_port == port).then(|| (ip.src, udp.src_port, body.to_vec()))
}

/// IPv6/UDP user PDU.
pub fn build_pdu(src: Ipv6Addr, dst: Ipv6Addr, sport: u16, dport: u16, payload: &[u8]) -> Vec<u8> {
    let udp = serialize_udp(src, dst, sport, dport, payload).expect("payload fits in a UDP datagram");
    let mut ip = Ipv6Header::new(proto::UDP, src, dst);
    ip.hop_limit = DEFAULT_HOP_LIMIT;
    serialize_ipv6(&ip, &udp).expect("payload fits in an IPv6 packet")
}

/// Swaps addresses and UDP ports. Both checksums are sums over the swapped
/// fields, so they stay valid.
fn echo_reply(pdu: &[u8]) -> Option<Vec<u8>> {
    let mut out = pdu.to_vec();
    let (l4, proto_nr) = match out.first()? >> 4 {
        6 if out.len() >= 40 => {
            let (a, b) = out[8..40].split_at_mut(16);
            a.swap_with_slice(b);
            out[7] = DEFAULT_HOP_LIMIT;
            (40, out[6])
        }
        4 if out.len() >= 20 => {
            let (a, b) = out[12..20].split_at_mut(4);
            a.swap_with_slice(b);
            (usize::from(out[0] & 0x0f) * 4, out[9])
        }
        _ => return None,
    };
    if proto_nr == proto::UDP && out.len() >= l4 + 4 {
        let (a, b) = out[l4..l4 + 4].split_at_mut(2);
        a.swap_with_slice(b);
    }
    Some(out)
}
