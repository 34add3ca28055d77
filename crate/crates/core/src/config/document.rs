//! Topology, policy, sessions and static rules in one file.

use std::collections::BTreeMap;
use std::net::{IpAddr, Ipv6Addr};

use super::parse::{list, parse_sections, Fields, Section};
use super::Diagnostic;
use crate::addr::Ipv6Prefix;
use crate::pfcp::{NodeId, SlicePolicy};
use crate::rules::{DownlinkRule, Rule, RuleOrigin, UplinkRule};
use crate::sim::{
    ControllerSpec, GnbSpec, HostSpec, LinkSpec, NodeKind, SessionSpec, SimError, Simulator, SmfSpec, SrNodeSpec, TopologySpec,
    UeSpec,
};
use crate::srv6::{BehaviorBinding, BehaviorKind, SegmentList};

/// A session from the configuration, optionally established at a tick.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfiguredSession {
    pub spec: SessionSpec,
    /// `None` when only a scenario event establishes it.
    pub establish: Option<u64>,
    pub line: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ConfigDocument {
    pub topology: TopologySpec,
    pub sessions: Vec<ConfiguredSession>,
    /// Line of the section that declared each named object.
    lines: BTreeMap<String, usize>,
    slice_lines: BTreeMap<String, usize>,
}

struct Pending<'a> {
    section: &'a Section,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self, Vec<Diagnostic>> {
        let sections = parse_sections(text)?;
        let mut errors = Vec::new();
        let mut doc = ConfigDocument::default();
        let mut later: Vec<Pending<'_>> = Vec::new();

        for s in &sections {
            match s.kind.as_str() {
                "controller" => doc.controller(s, &mut errors),
                "smf" => doc.smf(s, &mut errors),
                "gnb" => doc.gnb(s, &mut errors),
                "gateway" => doc.sr_node(s, NodeKind::Gateway, &mut errors),
                "transit" => doc.sr_node(s, NodeKind::Transit, &mut errors),
                "host" => doc.host(s, &mut errors),
                "ue" => doc.ue(s, &mut errors),
                "links" => doc.links(s, &mut errors),
                "slice" | "session" | "uplink-rule" | "downlink-rule" => later.push(Pending { section: s }),
                other => errors.push(Diagnostic::new(s.line, format!("unknown section kind `{other}`"))),
            }
        }
        // Sections that may name nodes declared anywhere in the file.
        for p in &later {
            let s = p.section;
            match s.kind.as_str() {
                "slice" => doc.slice(s, &mut errors),
                "session" => doc.session(s, &mut errors),
                "uplink-rule" => doc.uplink_rule(s, &mut errors),
                _ => doc.downlink_rule(s, &mut errors),
            }
        }
        doc.check_references(&sections, &mut errors);
        if errors.is_empty() {
            Ok(doc)
        } else {
            errors.sort_by_key(|d| d.line);
            Err(errors)
        }
    }

    /// Parses and fully checks a configuration, including building the
    /// simulated network once.
    pub fn validate(text: &str) -> Result<Self, Vec<Diagnostic>> {
        let doc = Self::parse(text)?;
        doc.build()?;
        Ok(doc)
    }

    pub fn line_of(&self, name: &str) -> usize {
        self.lines.get(name).copied().unwrap_or(0)
    }

    /// Builds the simulator with configured sessions declared and their
    /// establishment scheduled.
    pub fn build(&self) -> Result<Simulator, Vec<Diagnostic>> {
        let mut sim = Simulator::build(self.topology.clone()).map_err(|e| vec![self.sim_diagnostic(&e)])?;
        for s in &self.sessions {
            sim.declare_session(s.spec.clone()).map_err(|e| vec![Diagnostic::new(s.line, e.to_string())])?;
            if let Some(t) = s.establish {
                sim.establish(t, &s.spec.name).map_err(|e| vec![Diagnostic::new(s.line, e.to_string())])?;
            }
        }
        Ok(sim)
    }

    fn sim_diagnostic(&self, e: &SimError) -> Diagnostic {
        let line = match e {
            SimError::DanglingLink { a, b } => self.lines.get(&format!("link {a} {b}")).copied().unwrap_or(0),
            SimError::DuplicateAddress { nodes, .. } => self.line_of(&nodes.1),
            SimError::DuplicateNode(n) | SimError::UnknownNode(n) | SimError::UnknownGnb(n) | SimError::UnknownUe(n) => {
                self.line_of(n)
            }
            SimError::InvalidBinding { node, .. } => self.line_of(node),
            SimError::Rules { gateway, .. } => self.line_of(gateway),
            SimError::Controller(crate::pfcp::CompileError::NotDnGateway(g) | crate::pfcp::CompileError::UnknownGateway(g)) => {
                self.slice_lines.values().next().copied().unwrap_or_else(|| self.line_of(g))
            }
            _ => 0,
        };
        Diagnostic::new(line, e.to_string())
    }

    fn declare(&mut self, f: &mut Fields<'_>, name: &str) {
        if name.is_empty() {
            return;
        }
        if let Some(prev) = self.lines.insert(name.to_string(), f.line()) {
            f.error(f.line(), format!("`{name}` already declared on line {prev}"));
        }
    }

    fn controller(&mut self, s: &Section, errors: &mut Vec<Diagnostic>) {
        let mut f = Fields::new(s, errors);
        let id = f.name();
        self.declare(&mut f, &id);
        let addr: Option<Ipv6Addr> = f.req("addr");
        let node_id: Option<NodeId> = f.opt("node-id");
        let n3: Option<Ipv6Addr> = f.req("n3");
        let recovery = f.opt("recovery").unwrap_or(1);
        if self.topology.controller.is_some() {
            f.error(s.line, "only one [controller] is allowed");
        }
        if let (Some(addr), Some(n3)) = (addr, n3) {
            let node_id = node_id.unwrap_or(NodeId::Ipv6(addr));
            self.topology.controller = Some(ControllerSpec { id, addr, node_id, n3, recovery_time_stamp: recovery });
        }
        f.finish();
    }

    fn smf(&mut self, s: &Section, errors: &mut Vec<Diagnostic>) {
        let mut f = Fields::new(s, errors);
        let id = f.name();
        self.declare(&mut f, &id);
        let addr: Option<Ipv6Addr> = f.req("addr");
        let node_id: Option<NodeId> = f.opt("node-id");
        if self.topology.smf.is_some() {
            f.error(s.line, "only one [smf] is allowed");
        }
        if let Some(addr) = addr {
            self.topology.smf = Some(SmfSpec { id, addr, node_id: node_id.unwrap_or(NodeId::Ipv6(addr)) });
        }
        f.finish();
    }

    fn gnb(&mut self, s: &Section, errors: &mut Vec<Diagnostic>) {
        let mut f = Fields::new(s, errors);
        let id = f.name();
        self.declare(&mut f, &id);
        let addr = f.req("addr");
        let gateway = f.req("gateway");
        if let (Some(addr), Some(gateway)) = (addr, gateway) {
            self.topology.gnbs.push(GnbSpec { id, addr, gateway });
        }
        f.finish();
    }

    fn sr_node(&mut self, s: &Section, kind: NodeKind, errors: &mut Vec<Diagnostic>) {
        let mut f = Fields::new(s, errors);
        let id = f.name();
        self.declare(&mut f, &id);
        let addr: Option<Ipv6Addr> = f.req("addr");
        let sr_source: Option<Ipv6Addr> = f.opt("sr-source");
        let gtpu_source: Option<Ipv6Addr> = f.opt("gtpu-source");
        let mut locators = Vec::new();
        for (v, line) in f.all("locator") {
            match v.parse() {
                Ok(p) => locators.push(p),
                Err(e) => f.error(line, format!("invalid locator `{v}`: {e}")),
            }
        }
        let Some(addr) = addr else {
            f.finish();
            return;
        };
        let sr_source = sr_source.unwrap_or(addr);
        let mut bindings = Vec::new();
        let mut bind = |f: &mut Fields<'_>, key: &str, make: &dyn Fn(&[&str]) -> Result<BehaviorKind, String>| {
            for (v, line) in f.all(key) {
                let parts = list(&v);
                let Some(first) = parts.first() else {
                    f.error(line, format!("`{key}` needs a prefix"));
                    continue;
                };
                let prefix: Ipv6Prefix = match first.parse() {
                    Ok(p) => p,
                    Err(e) => {
                        f.error(line, format!("invalid `{key}` prefix `{first}`: {e}"));
                        continue;
                    }
                };
                match make(&parts[1..]) {
                    Ok(kind) => bindings.push(BehaviorBinding::new(prefix, kind)),
                    Err(e) => f.error(line, format!("`{key}`: {e}")),
                }
            }
        };
        let no_args = |k: BehaviorKind| move |rest: &[&str]| if rest.is_empty() { Ok(k) } else { Err("takes only a prefix".to_string()) };
        let table = |rest: &[&str]| -> Result<u32, String> {
            match rest {
                [] => Ok(0),
                [t] => t.parse().map_err(|_| format!("invalid table `{t}`")),
                _ => Err("expects a prefix and an optional table".to_string()),
            }
        };
        bind(&mut f, "end", &no_args(BehaviorKind::End));
        bind(&mut f, "gtp6d", &no_args(BehaviorKind::EndMGtp6D { sr_source }));
        bind(&mut f, "gtp6e", &no_args(BehaviorKind::EndMGtp6E { gtpu_source: gtpu_source.unwrap_or(addr) }));
        bind(&mut f, "dt6", &|rest| table(rest).map(|table| BehaviorKind::EndDt6 { table }));
        bind(&mut f, "dt4", &|rest| table(rest).map(|table| BehaviorKind::EndDt4 { table }));
        if kind == NodeKind::Transit && bindings.iter().any(|b| b.kind != BehaviorKind::End) {
            f.error(s.line, "transit nodes may only bind `end` SIDs");
        }
        self.topology.sr_nodes.push(SrNodeSpec { id, kind, addr, sr_source, locators, bindings });
        f.finish();
    }

    fn host(&mut self, s: &Section, errors: &mut Vec<Diagnostic>) {
        let mut f = Fields::new(s, errors);
        let id = f.name();
        self.declare(&mut f, &id);
        let gateway = f.req("gateway");
        let addr: Option<IpAddr> = f.req("addr");
        let table = f.opt("table").unwrap_or(0);
        let echo = f.flag("echo", true);
        if let (Some(gateway), Some(addr)) = (gateway, addr) {
            self.topology.hosts.push(HostSpec { id, gateway, table, addr, echo });
        }
        f.finish();
    }

    fn ue(&mut self, s: &Section, errors: &mut Vec<Diagnostic>) {
        let mut f = Fields::new(s, errors);
        let id = f.name();
        self.declare(&mut f, &id);
        if let Some(gnb) = f.req("gnb") {
            self.topology.ues.push(UeSpec { id, gnb });
        }
        f.finish();
    }

    fn links(&mut self, s: &Section, errors: &mut Vec<Diagnostic>) {
        let mut f = Fields::new(s, errors);
        for e in f.entries() {
            let ends: Vec<&str> = e.key.split_whitespace().collect();
            let [a, b] = ends[..] else {
                f.error(e.line, "a link is written `node-a node-b = delay`");
                continue;
            };
            match e.value.parse::<u64>() {
                Ok(delay) if delay >= 1 => {
                    self.lines.insert(format!("link {a} {b}"), e.line);
                    self.topology.links.push(LinkSpec { a: a.to_string(), b: b.to_string(), delay });
                }
                _ => f.error(e.line, format!("link delay must be a positive integer, got `{}`", e.value)),
            }
        }
    }

    /// A path element: an address, or a node id standing for its first End
    /// SID (or its DT SID when it has no End SID).
    pub fn resolve_sid(&self, token: &str) -> Result<Ipv6Addr, String> {
        if let Ok(a) = token.parse::<Ipv6Addr>() {
            return Ok(a);
        }
        let node = self.topology.sr_nodes.iter().find(|n| n.id == token).ok_or_else(|| format!("unknown SR node `{token}`"))?;
        node.bindings
            .iter()
            .find(|b| b.kind == BehaviorKind::End)
            .or_else(|| node.bindings.iter().find(|b| matches!(b.kind, BehaviorKind::EndDt6 { .. } | BehaviorKind::EndDt4 { .. })))
            .map(BehaviorBinding::sid)
            .ok_or_else(|| format!("node `{token}` has no End or DT SID"))
    }

    fn path(&self, f: &mut Fields<'_>, v: &str, line: usize) -> Option<Vec<Ipv6Addr>> {
        let mut out = Vec::new();
        for t in list(v) {
            match self.resolve_sid(t) {
                Ok(a) => out.push(a),
                Err(e) => {
                    f.error(line, e);
                    return None;
                }
            }
        }
        Some(out)
    }

    fn slice(&mut self, s: &Section, errors: &mut Vec<Diagnostic>) {
        let mut f = Fields::new(s, errors);
        let name = f.name();
        let gw = f.raw("gateway");
        let waypoints = match f.raw("waypoints") {
            Some((v, line)) => self.path(&mut f, &v, line),
            None => Some(Vec::new()),
        };
        match gw {
            None => f.error(s.line, "[slice] is missing `gateway`"),
            Some((gw, line)) => {
                if let Some(e) = self.dn_gateway_error(&gw) {
                    f.error(line, e);
                } else if let Some(waypoints) = waypoints {
                    if self.topology.policy.insert(name.clone(), SlicePolicy { gateway: gw, waypoints }).is_some() {
                        f.error(s.line, format!("slice `{name}` declared twice"));
                    }
                    self.slice_lines.insert(name, s.line);
                }
            }
        }
        f.finish();
    }

    /// Why `gw` cannot terminate a slice, if it cannot.
    pub fn dn_gateway_error(&self, gw: &str) -> Option<String> {
        match self.topology.sr_nodes.iter().find(|n| n.id == gw) {
            None => Some(format!("unknown gateway `{gw}`")),
            Some(n) if n.kind != NodeKind::Gateway => Some(format!("`{gw}` is not a gateway")),
            Some(n) if !n.bindings.iter().any(|b| matches!(b.kind, BehaviorKind::EndDt6 { .. } | BehaviorKind::EndDt4 { .. })) => {
                Some(format!("gateway `{gw}` has no dt6/dt4 SID"))
            }
            Some(_) => None,
        }
    }

    fn session(&mut self, s: &Section, errors: &mut Vec<Diagnostic>) {
        let mut f = Fields::new(s, errors);
        let name = f.name();
        let ue: Option<String> = f.req("ue");
        let ue_addr = f.req("ue-addr");
        let slice: Option<String> = f.req("slice");
        let qfi: u8 = f.opt("qfi").unwrap_or(9);
        let precedence = f.opt("precedence").unwrap_or(100);
        let service = f.req("service");
        let teid_ul = f.opt("teid-ul");
        let teid_dl = f.opt("teid-dl");
        let establish = match f.raw("establish") {
            None => Some(0),
            Some((v, _)) if v == "manual" => None,
            Some((v, line)) => match v.parse() {
                Ok(t) => Some(t),
                Err(_) => {
                    f.error(line, "`establish` is a tick or `manual`");
                    None
                }
            },
        };
        if qfi > 63 {
            f.error(s.line, "qfi must be below 64");
        }
        if let Some(sl) = &slice {
            if self.topology.policy.get(sl).is_none() {
                f.error(s.line, format!("unknown slice `{sl}`"));
            }
        }
        if let (Some(ue), Some(ue_addr), Some(network_instance), Some(service)) = (ue, ue_addr, slice, service) {
            let spec = SessionSpec { name, ue, ue_addr, network_instance, qfi, precedence, service, teid_ul, teid_dl };
            self.sessions.push(ConfiguredSession { spec, establish, line: s.line });
        }
        f.finish();
    }

    fn rule_gateway(&self, f: &mut Fields<'_>) -> Option<String> {
        let (gw, line) = f.raw("gateway").or_else(|| {
            f.error(f.line(), "rule is missing `gateway`");
            None
        })?;
        if !self.topology.sr_nodes.iter().any(|n| n.id == gw && n.kind == NodeKind::Gateway) {
            f.error(line, format!("unknown gateway `{gw}`"));
            return None;
        }
        Some(gw)
    }

    fn rule_path(&self, f: &mut Fields<'_>) -> Option<SegmentList> {
        let (v, line) = f.raw("path").or_else(|| {
            f.error(f.line(), "rule is missing `path`");
            None
        })?;
        let p = self.path(f, &v, line)?;
        match SegmentList::new(p) {
            Ok(p) => Some(p),
            Err(e) => {
                f.error(line, e.to_string());
                None
            }
        }
    }

    fn uplink_rule(&mut self, s: &Section, errors: &mut Vec<Diagnostic>) {
        let mut f = Fields::new(s, errors);
        let _ = f.name();
        let gw = self.rule_gateway(&mut f);
        let teid = f.req("teid");
        let qfi = f.opt("qfi");
        let inner_src = f.opt("inner-src");
        let priority = f.opt("priority").unwrap_or(0);
        let action = self.rule_path(&mut f);
        if let (Some(gw), Some(teid), Some(action)) = (gw, teid, action) {
            let r = UplinkRule { teid, qfi, inner_src, priority, action, origin: RuleOrigin::Static };
            self.topology.static_rules.push((gw, Rule::Uplink(r)));
        }
        f.finish();
    }

    fn downlink_rule(&mut self, s: &Section, errors: &mut Vec<Diagnostic>) {
        let mut f = Fields::new(s, errors);
        let _ = f.name();
        let gw = self.rule_gateway(&mut f);
        let ue_prefix = f.req("ue-prefix");
        let action = self.rule_path(&mut f);
        if let (Some(gw), Some(ue_prefix), Some(action)) = (gw, ue_prefix, action) {
            let r = DownlinkRule { ue_prefix, action, origin: RuleOrigin::Static };
            self.topology.static_rules.push((gw, Rule::Downlink(r)));
        }
        f.finish();
    }

    fn check_references(&self, sections: &[Section], errors: &mut Vec<Diagnostic>) {
        for kind in ["controller", "smf"] {
            if !sections.iter().any(|s| s.kind == kind) {
                errors.push(Diagnostic::new(0, format!("exactly one [{kind}] required, found none")));
            }
        }
        let is_gateway = |id: &str| self.topology.sr_nodes.iter().any(|n| n.id == id && n.kind == NodeKind::Gateway);
        for g in &self.topology.gnbs {
            if !is_gateway(&g.gateway) {
                errors.push(Diagnostic::new(self.line_of(&g.id), format!("gnb `{}`: unknown gateway `{}`", g.id, g.gateway)));
            }
        }
        for h in &self.topology.hosts {
            if !is_gateway(&h.gateway) {
                errors.push(Diagnostic::new(self.line_of(&h.id), format!("host `{}`: unknown gateway `{}`", h.id, h.gateway)));
            }
        }
        for u in &self.topology.ues {
            if !self.topology.gnbs.iter().any(|g| g.id == u.gnb) {
                errors.push(Diagnostic::new(self.line_of(&u.id), format!("ue `{}`: unknown gnb `{}`", u.id, u.gnb)));
            }
        }
        for s in &self.sessions {
            if !self.topology.ues.iter().any(|u| u.id == s.spec.ue) {
                errors.push(Diagnostic::new(s.line, format!("session `{}`: unknown ue `{}`", s.spec.name, s.spec.ue)));
            }
        }
        let names: Vec<&String> = self.sessions.iter().map(|s| &s.spec.name).collect();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                errors.push(Diagnostic::new(self.sessions[i].line, format!("session `{n}` declared twice")));
            }
        }
        for l in &self.topology.links {
            for end in [&l.a, &l.b] {
                if !self.lines.contains_key(end.as_str()) || self.topology.hosts.iter().any(|h| &h.id == end) {
                    let line = self.lines.get(&format!("link {} {}", l.a, l.b)).copied().unwrap_or(0);
                    errors.push(Diagnostic::new(line, format!("link endpoint `{end}` is not a network node")));
                }
            }
        }
    }
}
