//! Batch runs: schedule a scenario, simulate, judge the assertions.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use super::document::ConfigDocument;
use super::scenario::{Assertion, Check, PacketFilter, Quantifier, Scenario, ScenarioEventKind, DEFAULT_MAX_TICKS};
use super::Diagnostic;
use crate::sim::{render_trace, Outcome, PacketId, SessionChange, SimError, Simulator, TraceAction, TraceEvent, UserPacket};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssertionResult {
    pub label: String,
    pub line: usize,
    pub passed: bool,
    pub evidence: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub results: Vec<AssertionResult>,
    /// Set when events were still queued past the tick limit.
    pub limit_exceeded: Option<u64>,
    pub final_tick: u64,
    pub trace_events: usize,
    pub packets: usize,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.limit_exceeded.is_none() && self.results.iter().all(|r| r.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.results {
            let _ = writeln!(out, "{} {} (line {}): {}", if r.passed { "PASS" } else { "FAIL" }, r.label, r.line, r.evidence);
        }
        if let Some(limit) = self.limit_exceeded {
            let _ = writeln!(out, "FAIL run: events still queued after tick {limit}");
        }
        let failed = self.results.iter().filter(|r| !r.passed).count();
        let _ = writeln!(
            out,
            "{} assertions, {} failed; {} packets, {} trace events, final tick {}",
            self.results.len(),
            failed,
            self.packets,
            self.trace_events,
            self.final_tick
        );
        out
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub sim: Simulator,
    pub report: Report,
}

impl RunOutput {
    pub fn trace(&self) -> &[TraceEvent] {
        self.sim.trace()
    }
}

/// Runs `scenario` on a fresh network built from `doc`. `max_ticks`
/// overrides the scenario's limit.
pub fn run(doc: &ConfigDocument, scenario: &Scenario, max_ticks: Option<u64>) -> Result<RunOutput, Vec<Diagnostic>> {
    let mut sim = doc.build()?;
    let mut policy = doc.topology.policy.clone();
    for e in &scenario.events {
        let at = e.tick;
        let res: Result<(), SimError> = match &e.kind {
            ScenarioEventKind::Inject { session, payload, count, every } => (0..*count).try_for_each(|i| {
                sim.inject_pdu(at + i * every, session, &payload.bytes(i)).map(drop)
            }),
            ScenarioEventKind::Downlink { host, session, payload, count, every } => (0..*count).try_for_each(|i| {
                sim.inject_downlink(at + i * every, host, session, &payload.bytes(i)).map(drop)
            }),
            ScenarioEventKind::Establish { session } => sim.establish(at, session),
            ScenarioEventKind::ModifyQfi { session, qfi } => sim.modify(at, session, SessionChange::Qfi(*qfi)),
            ScenarioEventKind::ModifyNetworkInstance { session, slice } => {
                sim.modify(at, session, SessionChange::NetworkInstance(slice.clone()))
            }
            ScenarioEventKind::Delete { session } => sim.delete(at, session),
            ScenarioEventKind::Handover { ue, gnb } => sim.trigger_handover(at, ue, gnb),
            ScenarioEventKind::Policy { slice, policy: p } => {
                policy.insert(slice.clone(), p.clone());
                sim.update_policy(at, policy.clone());
                Ok(())
            }
            ScenarioEventKind::Heartbeat => {
                sim.heartbeat(at);
                Ok(())
            }
        };
        res.map_err(|err| vec![Diagnostic::new(e.line, err.to_string())])?;
    }
    let limit = max_ticks.or(scenario.max_ticks).unwrap_or(DEFAULT_MAX_TICKS);
    let limit_exceeded = match sim.run_until_idle(limit) {
        Ok(_) => None,
        Err(SimError::LimitExceeded { limit }) => Some(limit),
        Err(e) => return Err(vec![Diagnostic::new(0, e.to_string())]),
    };
    let judge = Judge::new(&sim);
    let results = scenario.assertions.iter().map(|a| judge.evaluate(a)).collect();
    let report = Report {
        results,
        limit_exceeded,
        final_tick: sim.now(),
        trace_events: sim.trace().len(),
        packets: sim.packets().len(),
    };
    Ok(RunOutput { sim, report })
}

/// Writes the trace, one tab-separated line per event.
pub fn export_trace(trace: &[TraceEvent], path: &Path, hex: bool) -> io::Result<()> {
    std::fs::write(path, render_trace(trace, hex))
}

struct Judge<'a> {
    sim: &'a Simulator,
    by_packet: BTreeMap<PacketId, Vec<&'a TraceEvent>>,
}

impl<'a> Judge<'a> {
    fn new(sim: &'a Simulator) -> Self {
        let mut by_packet: BTreeMap<PacketId, Vec<&TraceEvent>> = BTreeMap::new();
        for e in sim.trace() {
            if let Some(id) = e.packet {
                by_packet.entry(id).or_default().push(e);
            }
        }
        Self { sim, by_packet }
    }

    fn selected(&self, f: &PacketFilter) -> Vec<(PacketId, &'a UserPacket)> {
        self.sim
            .packets()
            .iter()
            .filter(|(_, p)| {
                f.session.as_ref().is_none_or(|s| p.session.as_ref() == Some(s))
                    && f.direction.is_none_or(|d| p.direction == d)
                    && f.after.is_none_or(|t| p.injected_at >= t)
                    && f.before.is_none_or(|t| p.injected_at < t)
            })
            .map(|(id, p)| (*id, p))
            .collect()
    }

    fn evaluate(&self, a: &Assertion) -> AssertionResult {
        let (passed, evidence) = match &a.check {
            Check::CensusNode { node, bound } => {
                let n = self.sim.snapshot_state().node(node).map_or(0, |c| c.session_entries());
                (bound.holds(n), format!("{node} holds {n} session-derived entries"))
            }
            Check::CensusKind { kind, bound } => {
                let n = self.sim.snapshot_state().session_entries(*kind);
                (bound.holds(n), format!("{kind} nodes hold {n} session-derived entries"))
            }
            Check::SmfPeers(b) => {
                let peers = self.sim.smf_peers();
                let names: Vec<String> = peers.iter().map(ToString::to_string).collect();
                (b.holds(peers.len()), format!("{} peer node id(s): [{}]", peers.len(), names.join(", ")))
            }
            Check::SmfAssociations(b) => {
                let n = self.sim.smf_associations();
                (b.holds(n), format!("{n} association(s)"))
            }
            _ => self.packet_check(a),
        };
        AssertionResult { label: a.label.clone(), line: a.line, passed, evidence }
    }

    fn packet_check(&self, a: &Assertion) -> (bool, String) {
        let mut sel = self.selected(&a.filter);
        if a.check == Check::Transparent {
            // Only delivered packets carry bytes to compare.
            sel.retain(|(_, p)| matches!(p.outcome, Some(Outcome::Delivered { .. })));
        }
        let mut hits = Vec::new();
        let mut misses = Vec::new();
        for (id, p) in &sel {
            if self.satisfies(&a.check, *id, p) {
                hits.push(*id);
            } else {
                misses.push((*id, *p));
            }
        }
        let passed = match a.quantifier {
            Quantifier::All => !sel.is_empty() && misses.is_empty(),
            Quantifier::None => hits.is_empty(),
            Quantifier::Exactly(n) => hits.len() == n,
            Quantifier::AtLeast(n) => hits.len() >= n,
        };
        let mut ev = format!("{}/{} selected packets match", hits.len(), sel.len());
        let example = match a.quantifier {
            Quantifier::All => misses.first().map(|(id, p)| format!("; packet {id} {}", describe(p))),
            Quantifier::None => hits.first().map(|id| format!("; packet {id} {}", describe(&self.sim.packets()[id]))),
            _ => None,
        };
        if let Some(x) = example {
            ev.push_str(&x);
        } else if !hits.is_empty() {
            let shown: Vec<String> = hits.iter().take(8).map(ToString::to_string).collect();
            let more = if hits.len() > 8 { ", ..." } else { "" };
            let _ = write!(ev, "; packets [{}{more}]", shown.join(", "));
        }
        (passed, ev)
    }

    fn satisfies(&self, check: &Check, id: PacketId, p: &UserPacket) -> bool {
        match check {
            Check::DeliveredAt { node, teid, qfi } => {
                let Some(Outcome::Delivered { node: at, .. }) = &p.outcome else { return false };
                if at != node {
                    return false;
                }
                if teid.is_none() && qfi.is_none() {
                    return true;
                }
                self.terminal(id).is_some_and(|e| {
                    teid.is_none_or(|t| e.summary.teid == Some(t)) && qfi.is_none_or(|q| e.summary.qfi == Some(q))
                })
            }
            Check::DroppedWithReason { reason, at } => matches!(
                &p.outcome,
                Some(Outcome::Dropped { node, reason: r, .. }) if r == reason && at.as_ref().is_none_or(|a| a == node)
            ),
            Check::TraceVisits { node } => self.by_packet.get(&id).is_some_and(|evs| evs.iter().any(|e| &e.node == node)),
            Check::Conservation => p.terminal_events == 1 && p.outcome.is_some(),
            Check::Transparent => match &p.outcome {
                Some(Outcome::Delivered { pdu, .. }) => pdu == &p.pdu,
                _ => false,
            },
            _ => false,
        }
    }

    fn terminal(&self, id: PacketId) -> Option<&'a TraceEvent> {
        self.by_packet.get(&id)?.iter().rev().find(|e| matches!(e.action, TraceAction::Deliver | TraceAction::Drop)).copied()
    }
}

fn describe(p: &UserPacket) -> String {
    match &p.outcome {
        Some(Outcome::Delivered { node, time, .. }) => format!("delivered at {node} t={time}"),
        Some(Outcome::Dropped { node, time, reason }) => format!("dropped at {node} t={time} ({reason})"),
        None => "never terminated".to_string(),
    }
}
