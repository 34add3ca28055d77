//! Static description of a simulated network and the underlay routing
//! derived from it.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::net::{IpAddr, Ipv6Addr};

use super::SimError;
use crate::addr::Ipv6Prefix;
use crate::pfcp::{InstancePolicy, NodeId};
use crate::rules::{PrefixMap, Rule};
use crate::srv6::{BehaviorBinding, BehaviorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Gnb,
    Gateway,
    Transit,
    Host,
    Smf,
    Controller,
}

impl NodeKind {
    pub const ALL: [NodeKind; 6] =
        [NodeKind::Gnb, NodeKind::Gateway, NodeKind::Transit, NodeKind::Host, NodeKind::Smf, NodeKind::Controller];

    pub fn as_str(&self) -> &'static str {
        match self {
            NodeKind::Gnb => "gnb",
            NodeKind::Gateway => "gateway",
            NodeKind::Transit => "transit",
            NodeKind::Host => "host",
            NodeKind::Smf => "smf",
            NodeKind::Controller => "controller",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl std::fmt::Display for NodeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControllerSpec {
    pub id: String,
    pub addr: Ipv6Addr,
    pub node_id: NodeId,
    /// Anycast N3 address advertised to the SMF as the UPF's F-TEID address.
    pub n3: Ipv6Addr,
    pub recovery_time_stamp: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmfSpec {
    pub id: String,
    pub addr: Ipv6Addr,
    pub node_id: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GnbSpec {
    pub id: String,
    pub addr: Ipv6Addr,
    /// Access gateway serving this gNB.
    pub gateway: String,
}

/// A gateway or transit router.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrNodeSpec {
    pub id: String,
    pub kind: NodeKind,
    pub addr: Ipv6Addr,
    /// Source address of packets this node encapsulates.
    pub sr_source: Ipv6Addr,
    /// Extra prefixes routed to this node.
    pub locators: Vec<Ipv6Prefix>,
    pub bindings: Vec<BehaviorBinding>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostSpec {
    pub id: String,
    pub gateway: String,
    pub table: u32,
    pub addr: IpAddr,
    /// Reflect every received PDU back to its sender.
    pub echo: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UeSpec {
    pub id: String,
    pub gnb: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
    pub delay: u64,
}

/// A PDU session the SMF emulator can establish.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionSpec {
    pub name: String,
    pub ue: String,
    pub ue_addr: Ipv6Addr,
    pub network_instance: String,
    pub qfi: u8,
    pub precedence: u32,
    /// Destination of uplink PDUs.
    pub service: Ipv6Addr,
    pub teid_ul: Option<u32>,
    pub teid_dl: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TopologySpec {
    pub controller: Option<ControllerSpec>,
    pub smf: Option<SmfSpec>,
    pub gnbs: Vec<GnbSpec>,
    pub sr_nodes: Vec<SrNodeSpec>,
    pub hosts: Vec<HostSpec>,
    pub ues: Vec<UeSpec>,
    pub links: Vec<LinkSpec>,
    pub policy: InstancePolicy,
    /// Rules installed before the run, keyed by gateway id.
    pub static_rules: Vec<(String, Rule)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hop {
    Local,
    Via(usize),
}

/// Underlay node as seen by routing.
#[derive(Debug, Clone)]
pub(crate) struct RoutedNode {
    pub id: String,
    pub kind: NodeKind,
    pub addr: Ipv6Addr,
    pub owned: Vec<Ipv6Prefix>,
}

impl TopologySpec {
    /// Underlay nodes in a fixed order: controller, SMF, gNBs, SR nodes.
    pub(crate) fn routed_nodes(&self) -> Vec<RoutedNode> {
        let mut out = Vec::new();
        if let Some(c) = &self.controller {
            out.push(RoutedNode { id: c.id.clone(), kind: NodeKind::Controller, addr: c.addr, owned: vec![Ipv6Prefix::host(c.addr)] });
        }
        if let Some(s) = &self.smf {
            out.push(RoutedNode { id: s.id.clone(), kind: NodeKind::Smf, addr: s.addr, owned: vec![Ipv6Prefix::host(s.addr)] });
        }
        for g in &self.gnbs {
            out.push(RoutedNode { id: g.id.clone(), kind: NodeKind::Gnb, addr: g.addr, owned: vec![Ipv6Prefix::host(g.addr)] });
        }
        for n in &self.sr_nodes {
            let mut owned = vec![Ipv6Prefix::host(n.addr)];
            owned.extend(n.locators.iter().copied());
            owned.extend(n.bindings.iter().map(|b| b.prefix));
            if n.sr_source != n.addr {
                owned.push(Ipv6Prefix::host(n.sr_source));
            }
            out.push(RoutedNode { id: n.id.clone(), kind: n.kind, addr: n.addr, owned });
        }
        out
    }

    /// Structural checks; returns the routed node list on success.
    pub(crate) fn check(&self) -> Result<Vec<RoutedNode>, SimError> {
        let nodes = self.routed_nodes();
        let mut ids = BTreeSet::new();
        for id in nodes.iter().map(|n| &n.id).chain(self.hosts.iter().map(|h| &h.id)).chain(self.ues.iter().map(|u| &u.id)) {
            if !ids.insert(id.as_str()) {
                return Err(SimError::DuplicateNode(id.clone()));
            }
        }
        let mut addrs = BTreeMap::new();
        for n in &nodes {
            if let Some(other) = addrs.insert(n.addr, n.id.clone()) {
                return Err(SimError::DuplicateAddress { addr: n.addr, nodes: (other, n.id.clone()) });
            }
        }
        self.check_bindings()?;
        let by_id: BTreeMap<&str, &RoutedNode> = nodes.iter().map(|n| (n.id.as_str(), n)).collect();
        for l in &self.links {
            for end in [&l.a, &l.b] {
                if !by_id.contains_key(end.as_str()) {
                    return Err(SimError::DanglingLink { a: l.a.clone(), b: l.b.clone() });
                }
            }
            if l.a == l.b {
                return Err(SimError::DanglingLink { a: l.a.clone(), b: l.b.clone() });
            }
        }
        let gateway = |id: &str| by_id.get(id).is_some_and(|n| n.kind == NodeKind::Gateway);
        for g in &self.gnbs {
            if !gateway(&g.gateway) {
                return Err(SimError::UnknownNode(g.gateway.clone()));
            }
        }
        for h in &self.hosts {
            if !gateway(&h.gateway) {
                return Err(SimError::UnknownNode(h.gateway.clone()));
            }
        }
        for u in &self.ues {
            if !self.gnbs.iter().any(|g| g.id == u.gnb) {
                return Err(SimError::UnknownGnb(u.gnb.clone()));
            }
        }
        for (gw, _) in &self.static_rules {
            if !gateway(gw) {
                return Err(SimError::UnknownNode(gw.clone()));
            }
        }
        Ok(nodes)
    }

    fn check_bindings(&self) -> Result<(), SimError> {
        let mut all: Vec<(&str, &BehaviorBinding)> = Vec::new();
        for n in &self.sr_nodes {
            for b in &n.bindings {
                if n.kind == NodeKind::Transit && b.kind != BehaviorKind::End {
                    return Err(SimError::InvalidBinding { node: n.id.clone(), reason: "transit nodes only bind End" });
                }
                all.push((&n.id, b));
            }
        }
        for (i, (na, a)) in all.iter().enumerate() {
            for (nb, b) in &all[i + 1..] {
                if !a.prefix.overlaps(&b.prefix) {
                    continue;
                }
                // Anycast: access gateways may share one GTP6.D prefix.
                let anycast = na != nb
                    && a.prefix == b.prefix
                    && matches!(a.kind, BehaviorKind::EndMGtp6D { .. })
                    && matches!(b.kind, BehaviorKind::EndMGtp6D { .. });
                if !anycast {
                    return Err(SimError::InvalidBinding { node: nb.to_string(), reason: "overlapping SID prefixes" });
                }
            }
        }
        Ok(())
    }
}

/// Per-node forwarding tables: for every owned prefix in the domain, the
/// neighbor on a shortest path to the nearest owner. Ties break on node
/// order.
pub(crate) fn compute_routes(nodes: &[RoutedNode], adj: &[BTreeMap<usize, u64>]) -> Vec<PrefixMap<Hop>> {
    let mut owners: BTreeMap<Ipv6Prefix, Vec<usize>> = BTreeMap::new();
    for (i, n) in nodes.iter().enumerate() {
        for p in &n.owned {
            let v = owners.entry(*p).or_default();
            if !v.contains(&i) {
                v.push(i);
            }
        }
    }
    let mut tables: Vec<PrefixMap<Hop>> = (0..nodes.len()).map(|_| PrefixMap::new()).collect();
    for (prefix, srcs) in owners {
        // Multi-source Dijkstra from the owners; next[v] is v's first hop.
        let mut dist = vec![u64::MAX; nodes.len()];
        let mut next: Vec<Option<Hop>> = vec![None; nodes.len()];
        let mut heap = BinaryHeap::new();
        for &s in &srcs {
            dist[s] = 0;
            next[s] = Some(Hop::Local);
            heap.push(Reverse((0u64, s)));
        }
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for (&v, &w) in &adj[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    next[v] = Some(Hop::Via(u));
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        for (v, hop) in next.into_iter().enumerate() {
            if let Some(h) = hop {
                tables[v].insert(prefix, h);
            }
        }
    }
    tables
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(s: &str) -> Ipv6Addr {
        s.parse().unwrap()
    }

    fn sr(id: &str, addr: &str, bindings: Vec<BehaviorBinding>) -> SrNodeSpec {
        SrNodeSpec { id: id.into(), kind: NodeKind::Transit, addr: a(addr), sr_source: a(addr), locators: vec![], bindings }
    }

    fn end(p: &str) -> BehaviorBinding {
        BehaviorBinding::new(p.parse().unwrap(), BehaviorKind::End)
    }

    #[test]
    fn empty_is_valid() {
        assert!(TopologySpec::default().check().unwrap().is_empty());
    }

    #[test]
    fn structural_errors() {
        let mut t = TopologySpec { sr_nodes: vec![sr("t1", "2001:db8::1", vec![]), sr("t1", "2001:db8::2", vec![])], ..Default::default() };
        assert_eq!(t.check().unwrap_err(), SimError::DuplicateNode("t1".into()));
        t.sr_nodes[1].id = "t2".into();
        t.sr_nodes[1].addr = a("2001:db8::1");
        assert!(matches!(t.check().unwrap_err(), SimError::DuplicateAddress { .. }));
        t.sr_nodes[1].addr = a("2001:db8::2");
        t.links.push(LinkSpec { a: "t1".into(), b: "t9".into(), delay: 1 });
        assert!(matches!(t.check().unwrap_err(), SimError::DanglingLink { .. }));
        t.links.clear();
        t.sr_nodes[0].bindings.push(end("2001:db8:f::/48"));
        t.sr_nodes[1].bindings.push(end("2001:db8:f:1::/64"));
        assert!(matches!(t.check().unwrap_err(), SimError::InvalidBinding { .. }));
    }

    #[test]
    fn routes_follow_shortest_delay() {
        // 0 - 1 - 2 and a slow direct 0 - 2
        let nodes: Vec<RoutedNode> = (0..3)
            .map(|i| {
                let addr: Ipv6Addr = format!("2001:db8::{}", i + 1).parse().unwrap();
                RoutedNode { id: format!("n{i}"), kind: NodeKind::Transit, addr, owned: vec![Ipv6Prefix::host(addr)] }
            })
            .collect();
        let mut adj = vec![BTreeMap::new(); 3];
        for (x, y, w) in [(0, 1, 1), (1, 2, 1), (0, 2, 5)] {
            adj[x].insert(y, w);
            adj[y].insert(x, w);
        }
        let t = compute_routes(&nodes, &adj);
        assert_eq!(t[0].lookup(a("2001:db8::3")).map(|(_, h)| *h), Some(Hop::Via(1)));
        assert_eq!(t[1].lookup(a("2001:db8::3")).map(|(_, h)| *h), Some(Hop::Via(2)));
        assert_eq!(t[2].lookup(a("2001:db8::3")).map(|(_, h)| *h), Some(Hop::Local));
        assert_eq!(t[0].lookup(a("2001:db8::9")), None);
    }
}
