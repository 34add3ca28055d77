//! The SR-domain controller: one PFCP node towards the SMF, many gateways
//! behind it.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::net::Ipv6Addr;
use std::sync::Arc;

use thiserror::Error;

use super::ie::{cause, find, types, FSeid, Ie, NodeId};
use super::message::{decode_pfcp, encode_pfcp, msg, PfcpMessage};
use super::session::PfcpSession;
use super::PfcpError;
use crate::addr::Ipv6Prefix;
use crate::rules::{DownlinkRule, Rule, RuleError, RuleId, RuleOrigin, RuleTable, UplinkRule};
use crate::srv6::{encode_gtp6e_sid, SegmentList, Srv6Error};

/// Retransmission cache depth.
pub const RESPONSE_CACHE_DEPTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("no policy for network instance `{0}`")]
    UnknownNetworkInstance(String),
    #[error("unknown gateway `{0}`")]
    UnknownGateway(String),
    #[error("gateway `{0}` has no End.DT SID")]
    NotDnGateway(String),
    #[error("gateway `{0}` has no End.M.GTP6.E prefix")]
    NotAccessGateway(String),
    #[error("gNB {0} is not attached to any access gateway")]
    UnknownGnb(Ipv6Addr),
    #[error("downlink FAR {0} has no GTP-U outer header creation")]
    NoTunnel(u32),
    #[error(transparent)]
    Sid(#[from] Srv6Error),
    #[error("rule table of `{gateway}` rejected the update: {source}")]
    Rules { gateway: String, source: RuleError },
}

/// Where a slice's traffic goes: the DN gateway hosting the instance and the
/// waypoints (End SIDs) between the access side and that gateway.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlicePolicy {
    pub gateway: String,
    pub waypoints: Vec<Ipv6Addr>,
}

/// Network instance (slice key) to instance placement.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InstancePolicy {
    slices: BTreeMap<String, SlicePolicy>,
}

impl InstancePolicy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, network_instance: impl Into<String>, policy: SlicePolicy) -> Option<SlicePolicy> {
        self.slices.insert(network_instance.into(), policy)
    }

    pub fn get(&self, network_instance: &str) -> Option<&SlicePolicy> {
        self.slices.get(network_instance)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &SlicePolicy)> {
        self.slices.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }
}

/// SR-relevant role of one gateway.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GatewayRole {
    /// End.DT SID terminating uplink paths (DN-side gateways).
    pub dt_sid: Option<Ipv6Addr>,
    /// End.M.GTP6.E locator+function (access-side gateways).
    pub gtp6e_prefix: Option<Ipv6Prefix>,
}

/// What the controller knows about the SR domain.
#[derive(Debug, Clone, Default)]
pub struct DomainMap {
    pub gateways: BTreeMap<String, GatewayRole>,
    /// gNB N3 address to the access gateway it hangs off.
    pub gnbs: BTreeMap<Ipv6Addr, String>,
}

impl DomainMap {
    fn role(&self, gw: &str) -> Result<&GatewayRole, CompileError> {
        self.gateways.get(gw).ok_or_else(|| CompileError::UnknownGateway(gw.to_string()))
    }

    pub fn check_policy(&self, policy: &InstancePolicy) -> Result<(), CompileError> {
        for (_, p) in policy.iter() {
            if self.role(&p.gateway)?.dt_sid.is_none() {
                return Err(CompileError::NotDnGateway(p.gateway.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControllerConfig {
    pub node_id: NodeId,
    /// Address placed in UP F-SEIDs.
    pub address: Ipv6Addr,
    pub recovery_time_stamp: u32,
}

/// One atomic table update on one gateway.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PushRecord {
    pub gateway: String,
    pub version: u64,
    pub added: usize,
    pub removed: usize,
}

/// Result of feeding one datagram to the controller.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Handled {
    pub response: Option<Vec<u8>>,
    pub pushes: Vec<PushRecord>,
    /// True when the response came from the retransmission cache.
    pub replayed: bool,
}

/// Rules compiled for one session, keyed by gateway.
pub type CompiledRules = BTreeMap<String, Vec<Rule>>;
type Installed = BTreeMap<String, Vec<(RuleId, Rule)>>;

#[derive(Debug, Clone)]
struct SessionState {
    session: PfcpSession,
    installed: Installed,
}

#[derive(Debug, Clone)]
struct CachedResponse {
    sequence: u32,
    request: Vec<u8>,
    response: Vec<u8>,
}

/// Compiles one session into per-gateway rules.
///
/// Uplink: every forwarding access-side PDR becomes a `(teid, qfi, UE src)`
/// rule at the access gateway serving the session's gNB, steering onto the
/// slice waypoints and the DN gateway's DT SID. Downlink: every forwarding
/// core-side PDR becomes a UE /128 rule at the DN gateway, steering back
/// through the waypoints to the GTP6.E SID carrying the gNB tunnel and the
/// gNB itself.
pub fn compile_session(
    seid: u64,
    session: &PfcpSession,
    policy: &InstancePolicy,
    domain: &DomainMap,
) -> Result<CompiledRules, CompileError> {
    let origin = RuleOrigin::Session(seid);
    let mut out = CompiledRules::new();
    let default_ni = session.pdrs.iter().find_map(|p| p.pdi.network_instance.clone()).unwrap_or_default();
    let default_qfi = session.pdrs.iter().find_map(|p| p.pdi.qfi);
    let ue_addr = session.pdrs.iter().find_map(|p| p.pdi.ue_ip.and_then(|u| u.ipv6));

    let tunnels: Vec<(u32, Ipv6Addr)> = session
        .pdrs
        .iter()
        .filter(|p| p.is_core())
        .filter_map(|p| session.far(p.far_id))
        .filter(|f| f.forwards())
        .filter_map(|f| f.gnb_tunnel())
        .collect();
    let access_gw = match tunnels.first() {
        Some((_, gnb)) => Some(domain.gnbs.get(gnb).ok_or(CompileError::UnknownGnb(*gnb))?.clone()),
        None => None,
    };

    for pdr in &session.pdrs {
        let Some(far) = session.far(pdr.far_id) else { continue };
        if !far.forwards() {
            continue;
        }
        let ni = pdr.pdi.network_instance.clone().unwrap_or_else(|| default_ni.clone());
        let slice = policy.get(&ni).ok_or_else(|| CompileError::UnknownNetworkInstance(ni.clone()))?;
        let dn = domain.role(&slice.gateway)?;
        let qfi = pdr.pdi.qfi.or(default_qfi);
        if pdr.is_access() {
            let Some(teid) = pdr.pdi.f_teid.and_then(|t| t.teid) else { continue };
            let Some(gw) = &access_gw else { continue };
            let dt = dn.dt_sid.ok_or_else(|| CompileError::NotDnGateway(slice.gateway.clone()))?;
            let mut path = slice.waypoints.clone();
            path.push(dt);
            let src = pdr.pdi.ue_ip.and_then(|u| u.ipv6).or(ue_addr);
            out.entry(gw.clone()).or_default().push(Rule::Uplink(UplinkRule {
                teid,
                qfi,
                inner_src: src.map(Ipv6Prefix::host),
                priority: -i64::from(pdr.precedence),
                action: SegmentList::new(path)?,
                origin,
            }));
        } else if pdr.is_core() {
            let Some(ue) = pdr.pdi.ue_ip.and_then(|u| u.ipv6) else { continue };
            let (teid, gnb) = far.gnb_tunnel().ok_or(CompileError::NoTunnel(far.far_id))?;
            let gw = domain.gnbs.get(&gnb).ok_or(CompileError::UnknownGnb(gnb))?;
            let prefix = domain.role(gw)?.gtp6e_prefix.ok_or_else(|| CompileError::NotAccessGateway(gw.clone()))?;
            let sid = encode_gtp6e_sid(prefix, teid, qfi.unwrap_or(0))?;
            let mut path: Vec<Ipv6Addr> = slice.waypoints.iter().rev().copied().collect();
            path.push(sid.value);
            path.push(gnb);
            out.entry(slice.gateway.clone()).or_default().push(Rule::Downlink(DownlinkRule {
                ue_prefix: Ipv6Prefix::host(ue),
                action: SegmentList::new(path)?,
                origin,
            }));
        }
    }
    Ok(out)
}

#[derive(Default)]
struct GatewayPlan {
    remove: Vec<RuleId>,
    add: Vec<(u64, Rule)>,
}

/// The controller state machine. Messages are handled strictly one at a
/// time; every rule push completes before the call returns.
#[derive(Debug)]
pub struct Controller {
    config: ControllerConfig,
    domain: DomainMap,
    tables: BTreeMap<String, Arc<RuleTable>>,
    policy: InstancePolicy,
    associations: BTreeSet<NodeId>,
    sessions: BTreeMap<u64, SessionState>,
    next_seid: u64,
    cache: VecDeque<CachedResponse>,
}

impl Controller {
    pub fn new(
        config: ControllerConfig,
        domain: DomainMap,
        tables: BTreeMap<String, Arc<RuleTable>>,
        policy: InstancePolicy,
    ) -> Result<Self, CompileError> {
        domain.check_policy(&policy)?;
        for gw in domain.gateways.keys() {
            if !tables.contains_key(gw) {
                return Err(CompileError::UnknownGateway(gw.clone()));
            }
        }
        Ok(Self {
            config,
            domain,
            tables,
            policy,
            associations: BTreeSet::new(),
            sessions: BTreeMap::new(),
            next_seid: 1,
            cache: VecDeque::new(),
        })
    }

    pub fn node_id(&self) -> &NodeId {
        &self.config.node_id
    }

    pub fn policy(&self) -> &InstancePolicy {
        &self.policy
    }

    pub fn associations(&self) -> impl Iterator<Item = &NodeId> {
        self.associations.iter()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    pub fn session(&self, up_seid: u64) -> Option<&PfcpSession> {
        self.sessions.get(&up_seid).map(|s| &s.session)
    }

    pub fn session_seids(&self) -> impl Iterator<Item = u64> + '_ {
        self.sessions.keys().copied()
    }

    /// Handles one PFCP datagram. Undecodable input and responses addressed
    /// to us yield no reply.
    pub fn handle(&mut self, bytes: &[u8]) -> Handled {
        let Ok(req) = decode_pfcp(bytes) else { return Handled::default() };
        if let Some(c) = self.cache.iter().find(|c| c.sequence == req.sequence && c.request == bytes) {
            return Handled { response: Some(c.response.clone()), pushes: Vec::new(), replayed: true };
        }
        let Some((resp, pushes)) = self.handle_message(&req) else { return Handled::default() };
        let Ok(response) = encode_pfcp(&resp) else { return Handled::default() };
        if self.cache.len() == RESPONSE_CACHE_DEPTH {
            self.cache.pop_front();
        }
        self.cache.push_back(CachedResponse { sequence: req.sequence, request: bytes.to_vec(), response: response.clone() });
        Handled { response: Some(response), pushes, replayed: false }
    }

    /// Typed entry point; `None` for messages that get no response.
    pub fn handle_message(&mut self, req: &PfcpMessage) -> Option<(PfcpMessage, Vec<PushRecord>)> {
        let r = match req.message_type {
            msg::HEARTBEAT_REQUEST => (self.handle_heartbeat(req), Vec::new()),
            msg::ASSOCIATION_SETUP_REQUEST => (self.handle_association_setup(req), Vec::new()),
            msg::SESSION_ESTABLISHMENT_REQUEST => self.handle_session_establishment(req),
            msg::SESSION_MODIFICATION_REQUEST => self.handle_session_modification(req),
            msg::SESSION_DELETION_REQUEST => self.handle_session_deletion(req),
            _ => return None,
        };
        Some(r)
    }

    pub fn handle_heartbeat(&self, req: &PfcpMessage) -> PfcpMessage {
        PfcpMessage::node(msg::HEARTBEAT_RESPONSE, req.sequence, vec![Ie::recovery_time_stamp(self.config.recovery_time_stamp)])
    }

    pub fn handle_association_setup(&mut self, req: &PfcpMessage) -> PfcpMessage {
        let c = match req.ie(types::NODE_ID).map(Ie::as_node_id) {
            Some(Ok(peer)) => {
                self.associations.insert(peer);
                cause::REQUEST_ACCEPTED
            }
            Some(Err(_)) => cause::MANDATORY_IE_INCORRECT,
            None => cause::MANDATORY_IE_MISSING,
        };
        PfcpMessage::node(
            msg::ASSOCIATION_SETUP_RESPONSE,
            req.sequence,
            vec![
                Ie::node_id(&self.config.node_id),
                Ie::cause(c),
                Ie::recovery_time_stamp(self.config.recovery_time_stamp),
            ],
        )
    }

    fn associated(&self, req: &PfcpMessage) -> bool {
        match req.ie(types::NODE_ID).map(Ie::as_node_id) {
            Some(Ok(peer)) => self.associations.contains(&peer),
            _ => !self.associations.is_empty(),
        }
    }

    pub fn handle_session_establishment(&mut self, req: &PfcpMessage) -> (PfcpMessage, Vec<PushRecord>) {
        let cp_seid = find(&req.ies, types::F_SEID).and_then(|ie| ie.as_f_seid().ok()).map_or(0, |f| f.seid);
        let reply = |c: u8, extra: Vec<Ie>| {
            let mut ies = vec![Ie::node_id(&self.config.node_id), Ie::cause(c)];
            ies.extend(extra);
            PfcpMessage::session(msg::SESSION_ESTABLISHMENT_RESPONSE, cp_seid, req.sequence, ies)
        };
        if !self.associated(req) {
            return (reply(cause::NO_ESTABLISHED_ASSOCIATION, vec![]), vec![]);
        }
        let seid = self.next_seid;
        let up = FSeid { seid, ipv4: None, ipv6: Some(self.config.address) };
        let session = match PfcpSession::from_establishment(&req.ies, up) {
            Ok(s) => s,
            Err(e) => return (reply(error_cause(&e), vec![]), vec![]),
        };
        let compiled = match compile_session(seid, &session, &self.policy, &self.domain) {
            Ok(c) => c,
            Err(_) => return (reply(cause::RULE_CREATION_FAILURE, vec![]), vec![]),
        };
        match self.commit(vec![(seid, Installed::new(), compiled)]) {
            Ok((mut installed, pushes)) => {
                self.next_seid += 1;
                let installed = installed.remove(&seid).unwrap_or_default();
                self.sessions.insert(seid, SessionState { session, installed });
                (reply(cause::REQUEST_ACCEPTED, vec![Ie::f_seid(seid, self.config.address)]), pushes)
            }
            Err(_) => (reply(cause::RULE_CREATION_FAILURE, vec![]), vec![]),
        }
    }

    pub fn handle_session_modification(&mut self, req: &PfcpMessage) -> (PfcpMessage, Vec<PushRecord>) {
        let seid = req.seid.unwrap_or(0);
        let Some(state) = self.sessions.get(&seid) else {
            return (
                PfcpMessage::session(msg::SESSION_MODIFICATION_RESPONSE, 0, req.sequence, vec![Ie::cause(cause::SESSION_CONTEXT_NOT_FOUND)]),
                vec![],
            );
        };
        let cp = state.session.cp_fseid.seid;
        let reply = |c: u8| PfcpMessage::session(msg::SESSION_MODIFICATION_RESPONSE, cp, req.sequence, vec![Ie::cause(c)]);
        let next = match state.session.modified(&req.ies) {
            Ok(s) => s,
            Err(e) => return (reply(error_cause(&e)), vec![]),
        };
        let compiled = match compile_session(seid, &next, &self.policy, &self.domain) {
            Ok(c) => c,
            Err(_) => return (reply(cause::RULE_CREATION_FAILURE), vec![]),
        };
        match self.commit(vec![(seid, state.installed.clone(), compiled)]) {
            Ok((mut installed, pushes)) => {
                let st = self.sessions.get_mut(&seid).expect("session present");
                st.session = next;
                st.installed = installed.remove(&seid).unwrap_or_default();
                (reply(cause::REQUEST_ACCEPTED), pushes)
            }
            Err(_) => (reply(cause::RULE_CREATION_FAILURE), vec![]),
        }
    }

    pub fn handle_session_deletion(&mut self, req: &PfcpMessage) -> (PfcpMessage, Vec<PushRecord>) {
        let seid = req.seid.unwrap_or(0);
        let Some(state) = self.sessions.get(&seid) else {
            return (
                PfcpMessage::session(msg::SESSION_DELETION_RESPONSE, 0, req.sequence, vec![Ie::cause(cause::SESSION_CONTEXT_NOT_FOUND)]),
                vec![],
            );
        };
        let cp = state.session.cp_fseid.seid;
        let reply = |c: u8| PfcpMessage::session(msg::SESSION_DELETION_RESPONSE, cp, req.sequence, vec![Ie::cause(c)]);
        match self.commit(vec![(seid, state.installed.clone(), CompiledRules::new())]) {
            Ok((_, pushes)) => {
                self.sessions.remove(&seid);
                (reply(cause::REQUEST_ACCEPTED), pushes)
            }
            Err(_) => (reply(cause::REQUEST_REJECTED), vec![]),
        }
    }

    /// Replaces the instance policy and recompiles every session. Nothing
    /// changes if any session fails to compile under the new policy.
    pub fn update_policy(&mut self, policy: InstancePolicy) -> Result<Vec<PushRecord>, CompileError> {
        self.domain.check_policy(&policy)?;
        let mut items = Vec::with_capacity(self.sessions.len());
        for (seid, st) in &self.sessions {
            let compiled = compile_session(*seid, &st.session, &policy, &self.domain)?;
            items.push((*seid, st.installed.clone(), compiled));
        }
        let (installed, pushes) = self.commit(items)?;
        for (seid, inst) in installed {
            if let Some(st) = self.sessions.get_mut(&seid) {
                st.installed = inst;
            }
        }
        self.policy = policy;
        Ok(pushes)
    }

    /// Diffs each session's installed rules against its new compilation,
    /// validates every touched gateway, then applies one batch per gateway.
    fn commit(
        &self,
        items: Vec<(u64, Installed, CompiledRules)>,
    ) -> Result<(BTreeMap<u64, Installed>, Vec<PushRecord>), CompileError> {
        let mut plans: BTreeMap<String, GatewayPlan> = BTreeMap::new();
        let mut result: BTreeMap<u64, Installed> = BTreeMap::new();
        for (seid, old, new) in items {
            let gateways: BTreeSet<&String> = old.keys().chain(new.keys()).collect();
            let mut inst = Installed::new();
            for gw in gateways {
                let mut remaining: Vec<Option<&(RuleId, Rule)>> = old.get(gw).map_or(Vec::new(), |v| v.iter().map(Some).collect());
                let plan = plans.entry(gw.clone()).or_default();
                let kept = inst.entry(gw.clone()).or_default();
                for rule in new.get(gw).into_iter().flatten() {
                    match remaining.iter_mut().find(|slot| slot.is_some_and(|(_, r)| r == rule)) {
                        Some(slot) => kept.push(slot.take().expect("slot filled").clone()),
                        None => plan.add.push((seid, rule.clone())),
                    }
                }
                plan.remove.extend(remaining.into_iter().flatten().map(|(id, _)| *id));
            }
            result.insert(seid, inst);
        }
        plans.retain(|_, p| !p.add.is_empty() || !p.remove.is_empty());

        for (gw, plan) in &plans {
            let table = self.tables.get(gw).ok_or_else(|| CompileError::UnknownGateway(gw.clone()))?;
            let add: Vec<Rule> = plan.add.iter().map(|(_, r)| r.clone()).collect();
            table.validate(&add, &plan.remove).map_err(|source| CompileError::Rules { gateway: gw.clone(), source })?;
        }

        let mut pushes = Vec::with_capacity(plans.len());
        for (gw, plan) in plans {
            let table = &self.tables[&gw];
            let add: Vec<Rule> = plan.add.iter().map(|(_, r)| r.clone()).collect();
            let outcome = table
                .apply_update(add, &plan.remove)
                .map_err(|source| CompileError::Rules { gateway: gw.clone(), source })?;
            let added = outcome.added.len();
            for ((seid, rule), id) in plan.add.into_iter().zip(outcome.added) {
                result.entry(seid).or_default().entry(gw.clone()).or_default().push((id, rule));
            }
            pushes.push(PushRecord { gateway: gw, version: outcome.version, added, removed: plan.remove.len() });
        }
        for inst in result.values_mut() {
            inst.retain(|_, v| !v.is_empty());
        }
        Ok((result, pushes))
    }
}

fn error_cause(e: &PfcpError) -> u8 {
    match e {
        PfcpError::MissingIe(_) => cause::MANDATORY_IE_MISSING,
        PfcpError::UnknownRule(_) => cause::RULE_CREATION_FAILURE,
        _ => cause::MANDATORY_IE_INCORRECT,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pfcp::ie::{apply_action, interface};
    use crate::pfcp::session::{remove_far_ie, update_far_ie, Far, Pdi, Pdr};
    use crate::srv6::decode_gtp6e_sid;

    fn a(s: &str) -> Ipv6Addr {
        s.parse().unwrap()
    }

    fn p(s: &str) -> Ipv6Prefix {
        s.parse().unwrap()
    }

    struct Fixture {
        ctl: Controller,
        gw_a: Arc<RuleTable>,
        gw_b: Arc<RuleTable>,
        gw_e: Arc<RuleTable>,
        gw_c: Arc<RuleTable>,
    }

    fn policy(a_gw: &str) -> InstancePolicy {
        let mut pol = InstancePolicy::new();
        pol.insert("sliceA", SlicePolicy { gateway: a_gw.into(), waypoints: vec![a("2001:db8:f1::")] });
        pol.insert("sliceB", SlicePolicy { gateway: "gw-c".into(), waypoints: vec![] });
        pol
    }

    fn fixture() -> Fixture {
        let mut domain = DomainMap::default();
        domain.gateways.insert("gw-a".into(), GatewayRole { dt_sid: None, gtp6e_prefix: Some(p("2001:db8:a:e::/64")) });
        domain.gateways.insert("gw-b".into(), GatewayRole { dt_sid: None, gtp6e_prefix: Some(p("2001:db8:b:e::/64")) });
        domain.gateways.insert("gw-e".into(), GatewayRole { dt_sid: Some(a("2001:db8:e1:6::")), gtp6e_prefix: None });
        domain.gateways.insert("gw-c".into(), GatewayRole { dt_sid: Some(a("2001:db8:c0:6::")), gtp6e_prefix: None });
        domain.gnbs.insert(a("2001:db8:100::1"), "gw-a".into());
        domain.gnbs.insert(a("2001:db8:200::1"), "gw-b".into());
        let gtp6e = vec![p("2001:db8:a:e::/64"), p("2001:db8:b:e::/64")];
        let tables: BTreeMap<String, Arc<RuleTable>> = ["gw-a", "gw-b", "gw-e", "gw-c"]
            .iter()
            .map(|g| (g.to_string(), Arc::new(RuleTable::with_gtp6e_prefixes(gtp6e.clone()))))
            .collect();
        let cfg = ControllerConfig { node_id: NodeId::Ipv6(a("2001:db8:c::1")), address: a("2001:db8:c::1"), recovery_time_stamp: 42 };
        let ctl = Controller::new(cfg, domain, tables.clone(), policy("gw-e")).unwrap();
        Fixture {
            ctl,
            gw_a: tables["gw-a"].clone(),
            gw_b: tables["gw-b"].clone(),
            gw_e: tables["gw-e"].clone(),
            gw_c: tables["gw-c"].clone(),
        }
    }

    fn smf() -> NodeId {
        NodeId::Ipv6(a("2001:db8:c::2"))
    }

    fn associate(ctl: &mut Controller, seq: u32) -> PfcpMessage {
        let req = PfcpMessage::node(msg::ASSOCIATION_SETUP_REQUEST, seq, vec![Ie::node_id(&smf())]);
        decode_pfcp(&ctl.handle(&encode_pfcp(&req).unwrap()).response.unwrap()).unwrap()
    }

    fn establishment(seq: u32, cp_seid: u64, teid: u32, ue: &str, ni: &str, qfi: u8) -> PfcpMessage {
        let ul = Pdr {
            pdr_id: 1,
            precedence: 100,
            pdi: Pdi {
                source_interface: interface::ACCESS,
                f_teid: Ie::f_teid(teid, a("2001:db8:ff::1")).as_f_teid().ok(),
                network_instance: Some(ni.into()),
                qfi: Some(qfi),
                ..Pdi::default()
            },
            outer_header_removal: Some(1),
            far_id: 1,
        };
        let dl = Pdr {
            pdr_id: 2,
            precedence: 100,
            pdi: Pdi {
                source_interface: interface::CORE,
                ue_ip: Ie::ue_ip_address(a(ue), true).as_ue_ip_address().ok(),
                network_instance: Some(ni.into()),
                qfi: Some(qfi),
                ..Pdi::default()
            },
            outer_header_removal: None,
            far_id: 2,
        };
        let f1 = Far { far_id: 1, apply_action: apply_action::FORW, destination_interface: Some(interface::CORE), network_instance: None, outer_header_creation: None };
        let f2 = Far {
            far_id: 2,
            apply_action: apply_action::FORW,
            destination_interface: Some(interface::ACCESS),
            network_instance: None,
            outer_header_creation: Ie::outer_header_creation(teid + 1000, a("2001:db8:100::1")).as_outer_header_creation().ok(),
        };
        PfcpMessage::session(
            msg::SESSION_ESTABLISHMENT_REQUEST,
            0,
            seq,
            vec![Ie::node_id(&smf()), Ie::f_seid(cp_seid, a("2001:db8:c::2")), ul.to_ie(), dl.to_ie(), f1.to_ie(), f2.to_ie()],
        )
    }

    fn send(ctl: &mut Controller, m: &PfcpMessage) -> (PfcpMessage, Vec<PushRecord>) {
        let h = ctl.handle(&encode_pfcp(m).unwrap());
        (decode_pfcp(&h.response.unwrap()).unwrap(), h.pushes)
    }

    fn up_seid(resp: &PfcpMessage) -> u64 {
        resp.ie(types::F_SEID).unwrap().as_f_seid().unwrap().seid
    }

    #[test]
    fn association_is_idempotent_and_single_node() {
        let mut f = fixture();
        let r1 = associate(&mut f.ctl, 1);
        let r2 = associate(&mut f.ctl, 2);
        assert_eq!(r1.cause(), Some(cause::REQUEST_ACCEPTED));
        assert_eq!(r1.ie(types::NODE_ID), r2.ie(types::NODE_ID));
        assert_eq!(f.ctl.associations().count(), 1);
    }

    #[test]
    fn heartbeat_echoes_sequence_and_timestamp() {
        let mut f = fixture();
        for seq in [5, 6] {
            let (r, _) = send(&mut f.ctl, &PfcpMessage::node(msg::HEARTBEAT_REQUEST, seq, vec![Ie::recovery_time_stamp(1)]));
            assert_eq!((r.message_type, r.sequence), (msg::HEARTBEAT_RESPONSE, seq));
            assert_eq!(r.ie(types::RECOVERY_TIME_STAMP).unwrap().as_u32().unwrap(), 42);
        }
    }

    #[test]
    fn session_before_association_is_rejected() {
        let mut f = fixture();
        let (r, pushes) = send(&mut f.ctl, &establishment(1, 7, 100, "2001:db8:1::2", "sliceA", 9));
        assert_eq!(r.cause(), Some(cause::NO_ESTABLISHED_ASSOCIATION));
        assert!(pushes.is_empty());
    }

    #[test]
    fn establishment_installs_uplink_and_downlink() {
        let mut f = fixture();
        associate(&mut f.ctl, 1);
        let (r, pushes) = send(&mut f.ctl, &establishment(2, 7, 100, "2001:db8:1::2", "sliceA", 9));
        assert_eq!(r.cause(), Some(cause::REQUEST_ACCEPTED));
        assert_eq!(r.seid, Some(7));
        assert_eq!(pushes.len(), 2);
        let ue = a("2001:db8:1::2");
        let up = f.gw_a.snapshot();
        assert_eq!(&**up.classify_uplink(100, Some(9), ue).unwrap(), &[a("2001:db8:f1::"), a("2001:db8:e1:6::")]);
        let down = f.gw_e.snapshot();
        let path = down.classify_downlink(ue).unwrap();
        assert_eq!(path.len(), 3);
        assert_eq!(decode_gtp6e_sid(path[1]), (1100, 9));
        assert_eq!(path[2], a("2001:db8:100::1"));
        assert!(f.gw_c.snapshot().is_empty());
        assert_eq!(f.ctl.session_count(), 1);
    }

    #[test]
    fn two_slices_get_distinct_paths() {
        let mut f = fixture();
        associate(&mut f.ctl, 1);
        send(&mut f.ctl, &establishment(2, 7, 100, "2001:db8:1::2", "sliceA", 9));
        send(&mut f.ctl, &establishment(3, 8, 101, "2001:db8:1::3", "sliceB", 9));
        let up = f.gw_a.snapshot();
        let pa = up.classify_uplink(100, Some(9), a("2001:db8:1::2")).unwrap();
        let pb = up.classify_uplink(101, Some(9), a("2001:db8:1::3")).unwrap();
        assert_ne!(pa, pb);
        assert_eq!(pb.first(), a("2001:db8:c0:6::"));
        assert_eq!(f.gw_c.snapshot().len(), 1);
    }

    #[test]
    fn failures_change_nothing() {
        let mut f = fixture();
        associate(&mut f.ctl, 1);
        let mut m = establishment(2, 7, 100, "2001:db8:1::2", "sliceA", 9);
        m.ies.retain(|ie| ie.ie_type != types::CREATE_FAR || ie.child(types::FAR_ID).unwrap().as_u32().unwrap() != 2);
        let (r, pushes) = send(&mut f.ctl, &m);
        assert_eq!(r.cause(), Some(cause::MANDATORY_IE_MISSING));
        assert!(pushes.is_empty());
        let (r, _) = send(&mut f.ctl, &establishment(3, 7, 100, "2001:db8:1::2", "sliceZ", 9));
        assert_eq!(r.cause(), Some(cause::RULE_CREATION_FAILURE));
        for t in [&f.gw_a, &f.gw_b, &f.gw_e, &f.gw_c] {
            assert_eq!(t.version(), 0);
        }
        assert_eq!(f.ctl.session_count(), 0);
    }

    #[test]
    fn handover_moves_both_directions() {
        let mut f = fixture();
        associate(&mut f.ctl, 1);
        let (r, _) = send(&mut f.ctl, &establishment(2, 7, 100, "2001:db8:1::2", "sliceA", 9));
        let seid = up_seid(&r);
        let m = PfcpMessage::session(msg::SESSION_MODIFICATION_REQUEST, seid, 3, vec![update_far_ie(2, 555, a("2001:db8:200::1"))]);
        let (r, pushes) = send(&mut f.ctl, &m);
        assert_eq!(r.cause(), Some(cause::REQUEST_ACCEPTED));
        assert_eq!(pushes.len(), 3);
        assert!(f.gw_a.snapshot().is_empty());
        assert_eq!(f.gw_b.snapshot().len(), 1);
        let path = f.gw_e.snapshot().classify_downlink(a("2001:db8:1::2")).unwrap().clone();
        assert!(p("2001:db8:b:e::/64").contains(path[1]));
        assert_eq!(decode_gtp6e_sid(path[1]), (555, 9));
        assert_eq!(path[2], a("2001:db8:200::1"));
    }

    #[test]
    fn noop_modification_keeps_versions() {
        let mut f = fixture();
        associate(&mut f.ctl, 1);
        let (r, _) = send(&mut f.ctl, &establishment(2, 7, 100, "2001:db8:1::2", "sliceA", 9));
        let v = (f.gw_a.version(), f.gw_e.version());
        let m = PfcpMessage::session(msg::SESSION_MODIFICATION_REQUEST, up_seid(&r), 3, vec![]);
        let (r, pushes) = send(&mut f.ctl, &m);
        assert_eq!(r.cause(), Some(cause::REQUEST_ACCEPTED));
        assert!(pushes.is_empty());
        assert_eq!((f.gw_a.version(), f.gw_e.version()), v);
        let bad = PfcpMessage::session(msg::SESSION_MODIFICATION_REQUEST, 999, 4, vec![]);
        assert_eq!(send(&mut f.ctl, &bad).0.cause(), Some(cause::SESSION_CONTEXT_NOT_FOUND));
        let broken = PfcpMessage::session(msg::SESSION_MODIFICATION_REQUEST, 1, 5, vec![remove_far_ie(2)]);
        assert_ne!(send(&mut f.ctl, &broken).0.cause(), Some(cause::REQUEST_ACCEPTED));
        assert_eq!((f.gw_a.version(), f.gw_e.version()), v);
    }

    #[test]
    fn deletion_restores_tables() {
        let mut f = fixture();
        associate(&mut f.ctl, 1);
        let (r, _) = send(&mut f.ctl, &establishment(2, 7, 100, "2001:db8:1::2", "sliceA", 9));
        let m = PfcpMessage::session(msg::SESSION_DELETION_REQUEST, up_seid(&r), 3, vec![]);
        let (r, pushes) = send(&mut f.ctl, &m);
        assert_eq!(r.cause(), Some(cause::REQUEST_ACCEPTED));
        assert_eq!(pushes.iter().map(|p| p.removed).sum::<usize>(), 2);
        assert!(f.gw_a.snapshot().is_empty() && f.gw_e.snapshot().is_empty());
        assert_eq!(f.ctl.session_count(), 0);
        assert_eq!(send(&mut f.ctl, &m.clone()).0.cause(), Some(cause::REQUEST_ACCEPTED), "retransmission replays");
        let m2 = PfcpMessage { sequence: 4, ..m };
        assert_eq!(send(&mut f.ctl, &m2).0.cause(), Some(cause::SESSION_CONTEXT_NOT_FOUND));
    }

    #[test]
    fn retransmission_is_answered_from_cache() {
        let mut f = fixture();
        associate(&mut f.ctl, 1);
        let bytes = encode_pfcp(&establishment(2, 7, 100, "2001:db8:1::2", "sliceA", 9)).unwrap();
        let first = f.ctl.handle(&bytes);
        let again = f.ctl.handle(&bytes);
        assert!(again.replayed && again.pushes.is_empty());
        assert_eq!(first.response, again.response);
        assert_eq!(f.ctl.session_count(), 1);
    }

    #[test]
    fn policy_update_moves_slice() {
        let mut f = fixture();
        associate(&mut f.ctl, 1);
        send(&mut f.ctl, &establishment(2, 7, 100, "2001:db8:1::2", "sliceA", 9));
        send(&mut f.ctl, &establishment(3, 8, 101, "2001:db8:1::3", "sliceB", 9));
        let before_c = f.gw_c.version();
        let pushes = f.ctl.update_policy(policy("gw-c")).unwrap();
        assert_eq!(pushes.len(), 3);
        assert!(f.gw_e.snapshot().is_empty());
        assert_eq!(f.gw_c.snapshot().len(), 2);
        assert_eq!(f.gw_c.version(), before_c + 1);
        let path = f.gw_a.snapshot().classify_uplink(100, Some(9), a("2001:db8:1::2")).unwrap().clone();
        assert_eq!(path.last(), Some(&a("2001:db8:c0:6::")));
        assert_eq!(f.ctl.update_policy(policy("gw-a")).unwrap_err(), CompileError::NotDnGateway("gw-a".into()));
    }
}
