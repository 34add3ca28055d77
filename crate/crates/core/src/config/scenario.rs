//! Timed events and assertions evaluated against one run.

use std::collections::BTreeSet;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::document::ConfigDocument;
use super::parse::{list, parse_sections, Fields};
use super::Diagnostic;
use crate::pfcp::SlicePolicy;
use crate::sim::{Direction, NodeKind};
use crate::srv6::DropReason;

/// Ticks a run may use unless the scenario or caller says otherwise.
pub const DEFAULT_MAX_TICKS: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Bytes(Vec<u8>),
    /// `len` bytes from a ChaCha8 stream seeded with `seed`.
    Random { len: usize, seed: u64 },
}

impl Payload {
    /// Payload of the `i`-th copy of a repeated injection.
    pub fn bytes(&self, i: u64) -> Vec<u8> {
        match self {
            Payload::Bytes(b) => b.clone(),
            Payload::Random { len, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i));
                let mut out = vec![0; *len];
                rng.fill_bytes(&mut out);
                out
            }
        }
    }

    fn parse(tok: &str) -> Result<Self, String> {
        if let Some(h) = tok.strip_prefix("hex:") {
            return hex::decode(h).map(Payload::Bytes).map_err(|e| format!("bad hex payload: {e}"));
        }
        if let Some(r) = tok.strip_prefix("random:") {
            let (len, seed) = r.split_once(':').unwrap_or((r, "0"));
            let len = len.parse().map_err(|_| format!("bad random length `{len}`"))?;
            let seed = seed.parse().map_err(|_| format!("bad random seed `{seed}`"))?;
            return Ok(Payload::Random { len, seed });
        }
        Ok(Payload::Bytes(tok.strip_prefix("text:").unwrap_or(tok).as_bytes().to_vec()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioEventKind {
    Inject { session: String, payload: Payload, count: u64, every: u64 },
    Downlink { host: String, session: String, payload: Payload, count: u64, every: u64 },
    Establish { session: String },
    ModifyQfi { session: String, qfi: u8 },
    ModifyNetworkInstance { session: String, slice: String },
    Delete { session: String },
    Handover { ue: String, gnb: String },
    /// One slice's new policy; earlier policy events stay in effect.
    Policy { slice: String, policy: SlicePolicy },
    Heartbeat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioEvent {
    pub tick: u64,
    pub kind: ScenarioEventKind,
    pub line: usize,
}

/// How many selected packets must satisfy the check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    /// At least one packet selected, and all satisfy it.
    All,
    None,
    Exactly(usize),
    AtLeast(usize),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PacketFilter {
    pub session: Option<String>,
    pub direction: Option<Direction>,
    /// Injected at or after this tick.
    pub after: Option<u64>,
    /// Injected strictly before this tick.
    pub before: Option<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Bound {
    pub eq: Option<usize>,
    pub min: Option<usize>,
    pub max: Option<usize>,
}

impl Bound {
    pub fn holds(&self, v: usize) -> bool {
        self.eq.is_none_or(|e| v == e) && self.min.is_none_or(|m| v >= m) && self.max.is_none_or(|m| v <= m)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Check {
    DeliveredAt { node: String, teid: Option<u32>, qfi: Option<u8> },
    DroppedWithReason { reason: DropReason, at: Option<String> },
    TraceVisits { node: String },
    /// Session-derived entries on one node or summed over a node kind.
    CensusNode { node: String, bound: Bound },
    CensusKind { kind: NodeKind, bound: Bound },
    SmfPeers(Bound),
    SmfAssociations(Bound),
    Conservation,
    Transparent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assertion {
    pub label: String,
    pub line: usize,
    pub check: Check,
    pub filter: PacketFilter,
    pub quantifier: Quantifier,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Scenario {
    pub max_ticks: Option<u64>,
    pub events: Vec<ScenarioEvent>,
    pub assertions: Vec<Assertion>,
}

struct Args<'a> {
    positional: Vec<&'a str>,
    named: Vec<(&'a str, &'a str)>,
}

fn split_args(v: &str) -> Args<'_> {
    let mut a = Args { positional: Vec::new(), named: Vec::new() };
    for t in v.split_whitespace() {
        match t.split_once('=') {
            Some((k, val)) => a.named.push((k, val)),
            None => a.positional.push(t),
        }
    }
    a
}

impl<'a> Args<'a> {
    fn take(&mut self, key: &str) -> Option<&'a str> {
        let i = self.named.iter().position(|(k, _)| *k == key)?;
        Some(self.named.remove(i).1)
    }

    fn num<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, String> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| format!("invalid `{key}` value `{v}`")),
        }
    }

    fn done(&self) -> Result<(), String> {
        match self.named.first() {
            Some((k, _)) => Err(format!("unexpected option `{k}`")),
            None => Ok(()),
        }
    }
}

struct Ctx<'a> {
    doc: &'a ConfigDocument,
    sessions: BTreeSet<&'a str>,
    nodes: BTreeSet<&'a str>,
}

impl<'a> Ctx<'a> {
    fn new(doc: &'a ConfigDocument) -> Self {
        let t = &doc.topology;
        let mut nodes: BTreeSet<&str> = BTreeSet::new();
        nodes.extend(t.controller.iter().map(|c| c.id.as_str()));
        nodes.extend(t.smf.iter().map(|c| c.id.as_str()));
        nodes.extend(t.gnbs.iter().map(|c| c.id.as_str()));
        nodes.extend(t.sr_nodes.iter().map(|c| c.id.as_str()));
        nodes.extend(t.hosts.iter().map(|c| c.id.as_str()));
        Self { doc, sessions: doc.sessions.iter().map(|s| s.spec.name.as_str()).collect(), nodes }
    }

    fn session(&self, s: &str) -> Result<String, String> {
        if self.sessions.contains(s) {
            Ok(s.to_string())
        } else {
            Err(format!("unknown session `{s}`"))
        }
    }

    fn node(&self, n: &str) -> Result<String, String> {
        if self.nodes.contains(n) {
            Ok(n.to_string())
        } else {
            Err(format!("unknown node `{n}`"))
        }
    }

    fn kind_of(&self, id: &str, kind: NodeKind) -> bool {
        let t = &self.doc.topology;
        match kind {
            NodeKind::Host => t.hosts.iter().any(|h| h.id == id),
            NodeKind::Gnb => t.gnbs.iter().any(|g| g.id == id),
            _ => t.sr_nodes.iter().any(|n| n.id == id && n.kind == kind),
        }
    }
}

impl Scenario {
    /// Parses a scenario against the configuration whose objects it names.
    pub fn parse(text: &str, doc: &ConfigDocument) -> Result<Self, Vec<Diagnostic>> {
        let sections = parse_sections(text)?;
        let ctx = Ctx::new(doc);
        let mut errors = Vec::new();
        let mut sc = Scenario::default();
        for s in &sections {
            let mut f = Fields::new(s, &mut errors);
            if s.name.is_some() {
                f.error(s.line, format!("[{}] takes no name", s.kind));
            }
            match s.kind.as_str() {
                "run" => {
                    sc.max_ticks = f.opt("max-ticks");
                    f.finish();
                }
                "events" => {
                    for e in f.entries() {
                        let Ok(tick) = e.key.parse::<u64>() else {
                            f.error(e.line, format!("event key must be a tick, got `{}`", e.key));
                            continue;
                        };
                        match parse_event(&ctx, &e.value) {
                            Ok(kind) => sc.events.push(ScenarioEvent { tick, kind, line: e.line }),
                            Err(m) => f.error(e.line, m),
                        }
                    }
                }
                "assertions" => {
                    for e in f.entries() {
                        match parse_assertion(&ctx, &e.value) {
                            Ok((check, filter, quantifier)) => {
                                sc.assertions.push(Assertion { label: e.key.clone(), line: e.line, check, filter, quantifier })
                            }
                            Err(m) => f.error(e.line, m),
                        }
                    }
                }
                other => f.error(s.line, format!("unknown scenario section `{other}`")),
            }
        }
        let mut labels = BTreeSet::new();
        for a in &sc.assertions {
            if !labels.insert(&a.label) {
                errors.push(Diagnostic::new(a.line, format!("duplicate assertion label `{}`", a.label)));
            }
        }
        if errors.is_empty() {
            sc.events.sort_by_key(|e| e.tick);
            Ok(sc)
        } else {
            errors.sort_by_key(|d| d.line);
            Err(errors)
        }
    }
}

fn repeat(a: &mut Args<'_>) -> Result<(u64, u64), String> {
    let count = a.num("count")?.unwrap_or(1);
    let every = a.num("every")?.unwrap_or(1);
    if count == 0 {
        return Err("`count` must be positive".into());
    }
    Ok((count, every))
}

fn parse_event(ctx: &Ctx<'_>, v: &str) -> Result<ScenarioEventKind, String> {
    let mut a = split_args(v);
    let Some((&verb, rest)) = a.positional.split_first() else {
        return Err("empty event".into());
    };
    let rest: Vec<&str> = rest.to_vec();
    let arity = |n: usize, usage: &str| if rest.len() == n { Ok(()) } else { Err(format!("usage: {usage}")) };
    let kind = match verb {
        "inject" => {
            arity(2, "inject <session> <payload> [count=N every=T]")?;
            let (count, every) = repeat(&mut a)?;
            ScenarioEventKind::Inject { session: ctx.session(rest[0])?, payload: Payload::parse(rest[1])?, count, every }
        }
        "downlink" => {
            arity(3, "downlink <host> <session> <payload> [count=N every=T]")?;
            if !ctx.kind_of(rest[0], NodeKind::Host) {
                return Err(format!("unknown host `{}`", rest[0]));
            }
            let (count, every) = repeat(&mut a)?;
            ScenarioEventKind::Downlink {
                host: rest[0].to_string(),
                session: ctx.session(rest[1])?,
                payload: Payload::parse(rest[2])?,
                count,
                every,
            }
        }
        "establish" => {
            arity(1, "establish <session>")?;
            ScenarioEventKind::Establish { session: ctx.session(rest[0])? }
        }
        "delete" => {
            arity(1, "delete <session>")?;
            ScenarioEventKind::Delete { session: ctx.session(rest[0])? }
        }
        "modify" => {
            arity(1, "modify <session> qfi=Q | slice=NAME")?;
            let session = ctx.session(rest[0])?;
            match (a.num::<u8>("qfi")?, a.take("slice")) {
                (Some(qfi), None) if qfi < 64 => ScenarioEventKind::ModifyQfi { session, qfi },
                (Some(_), None) => return Err("qfi must be below 64".into()),
                (None, Some(slice)) => ScenarioEventKind::ModifyNetworkInstance { session, slice: slice.to_string() },
                _ => return Err("modify takes exactly one of qfi= or slice=".into()),
            }
        }
        "handover" => {
            arity(2, "handover <ue> <gnb>")?;
            if !ctx.doc.topology.ues.iter().any(|u| u.id == rest[0]) {
                return Err(format!("unknown ue `{}`", rest[0]));
            }
            if !ctx.kind_of(rest[1], NodeKind::Gnb) {
                return Err(format!("unknown gnb `{}`", rest[1]));
            }
            ScenarioEventKind::Handover { ue: rest[0].to_string(), gnb: rest[1].to_string() }
        }
        "policy" => {
            arity(1, "policy <slice> gateway=GW [waypoints=a,b]")?;
            let gateway = a.take("gateway").ok_or("policy needs gateway=")?.to_string();
            if let Some(e) = ctx.doc.dn_gateway_error(&gateway) {
                return Err(e);
            }
            let waypoints = list(a.take("waypoints").unwrap_or(""))
                .into_iter()
                .map(|t| ctx.doc.resolve_sid(t))
                .collect::<Result<Vec<_>, _>>()?;
            ScenarioEventKind::Policy { slice: rest[0].to_string(), policy: SlicePolicy { gateway, waypoints } }
        }
        "heartbeat" => {
            arity(0, "heartbeat")?;
            ScenarioEventKind::Heartbeat
        }
        other => return Err(format!("unknown event `{other}`")),
    };
    a.done()?;
    Ok(kind)
}

fn bound(a: &mut Args<'_>) -> Result<Bound, String> {
    let b = Bound { eq: a.num("eq")?, min: a.num("min")?, max: a.num("max")? };
    if b == Bound::default() {
        return Err("needs eq=, min= or max=".into());
    }
    Ok(b)
}

fn parse_assertion(ctx: &Ctx<'_>, v: &str) -> Result<(Check, PacketFilter, Quantifier), String> {
    let mut a = split_args(v);
    let Some((&verb, rest)) = a.positional.split_first() else {
        return Err("empty assertion".into());
    };
    let rest: Vec<&str> = rest.to_vec();
    let one = |usage: &str| rest.first().copied().filter(|_| rest.len() == 1).ok_or_else(|| format!("usage: {usage}"));
    let none = |usage: &str| if rest.is_empty() { Ok(()) } else { Err(format!("usage: {usage}")) };
    let mut packet_level = true;
    let check = match verb {
        "delivered-at" => {
            let node = ctx.node(one("delivered-at <node> [filters] [teid= qfi=] [all|none|count=|min=]")?)?;
            Check::DeliveredAt { node, teid: a.num("teid")?, qfi: a.num("qfi")? }
        }
        "dropped-with-reason" => {
            let r = one("dropped-with-reason <reason> [at=node] [filters]")?;
            let reason = DropReason::parse(r).ok_or_else(|| format!("unknown drop reason `{r}`"))?;
            let at = a.take("at").map(|n| ctx.node(n)).transpose()?;
            Check::DroppedWithReason { reason, at }
        }
        "trace-visits" => Check::TraceVisits { node: ctx.node(one("trace-visits <node> [filters]")?)? },
        "census" => {
            packet_level = false;
            let target = one("census <node|kind> eq=|min=|max=")?;
            let b = bound(&mut a)?;
            if ctx.nodes.contains(target) {
                Check::CensusNode { node: target.to_string(), bound: b }
            } else if let Some(kind) = NodeKind::parse(target) {
                Check::CensusKind { kind, bound: b }
            } else {
                return Err(format!("unknown node or kind `{target}`"));
            }
        }
        "smf-peers" | "smf-associations" => {
            packet_level = false;
            none(verb)?;
            let b = bound(&mut a)?;
            if verb == "smf-peers" {
                Check::SmfPeers(b)
            } else {
                Check::SmfAssociations(b)
            }
        }
        "conservation" | "transparent" => {
            none(verb)?;
            if verb == "conservation" {
                Check::Conservation
            } else {
                Check::Transparent
            }
        }
        other => return Err(format!("unknown assertion `{other}`")),
    };
    let mut filter = PacketFilter::default();
    let mut quantifier = Quantifier::All;
    if packet_level {
        filter.session = a.take("session").map(|s| ctx.session(s)).transpose()?;
        filter.direction = match a.take("direction") {
            None => None,
            Some("uplink") => Some(Direction::Uplink),
            Some("downlink") => Some(Direction::Downlink),
            Some(d) => return Err(format!("direction is uplink or downlink, got `{d}`")),
        };
        filter.after = a.num("after")?;
        filter.before = a.num("before")?;
        let mut qs = Vec::new();
        if let Some(n) = a.num("count")? {
            qs.push(Quantifier::Exactly(n));
        }
        if let Some(n) = a.num("min")? {
            qs.push(Quantifier::AtLeast(n));
        }
        if let Some(q) = a.take("expect") {
            qs.push(match q {
                "all" => Quantifier::All,
                "none" => Quantifier::None,
                _ => return Err(format!("expect is all or none, got `{q}`")),
            });
        }
        if qs.len() > 1 {
            return Err("give at most one of count=, min=, expect=".into());
        }
        quantifier = qs.pop().unwrap_or(Quantifier::All);
    }
    a.done()?;
    Ok((check, filter, quantifier))
}
