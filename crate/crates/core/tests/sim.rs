mod common;

use common::net;
use edgesr_core::sim::{render_trace, NodeKind, Outcome, SimError, Simulator, TopologySpec, TraceAction};
use edgesr_core::DropReason;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn shipped_runs_are_deterministic() {
    for name in net::shipped_scenarios() {
        let a = net::run_shipped(&name);
        let b = net::run_shipped(&name);
        assert_eq!(render_trace(a.trace(), true), render_trace(b.trace(), true), "{name}");
        assert_eq!(a.report, b.report, "{name}");
    }
}

#[test]
fn delivery_time_is_the_sum_of_link_delays() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for links in 2..12 {
        let delays: Vec<u64> = (0..links).map(|_| rng.gen_range(1..20)).collect();
        let doc = net::doc(&net::line_network(&delays));
        let out = net::run_text(&doc, "[events]\n100 = inject x hello\n");
        let total: u64 = delays.iter().sum();
        let up = out.sim.packets().values().find(|p| p.session.is_some() && p.injected_at == 100).unwrap();
        match &up.outcome {
            Some(Outcome::Delivered { node, time, .. }) => {
                assert_eq!(node, "h");
                assert_eq!(*time, 100 + total, "delays {delays:?}");
            }
            other => panic!("{other:?}"),
        }
        // The echo reply retraces the path back to the gNB.
        let replies: Vec<_> = out.sim.packets().values().filter(|p| p.injected_at == 100 + total).collect();
        assert!(replies.iter().any(|p| matches!(&p.outcome, Some(Outcome::Delivered { node, time, .. }) if node == "g" && *time == 100 + 2 * total)));
    }
}

#[test]
fn forwarding_loop_ends_on_hop_limit() {
    let mut text = net::edge_text();
    let path: Vec<&str> = (0..100).map(|i| if i % 2 == 0 { "t1" } else { "t2" }).collect();
    text.push_str(&format!(
        "\n[uplink-rule loop]\ngateway = gw-a\nteid = 100\npriority = 100000\npath = {}\n",
        path.join(",")
    ));
    let doc = net::doc(&text);
    let out = net::run_text(&doc, "[events]\n20 = inject sa looping\n");
    let p = out.sim.packets().values().find(|p| p.injected_at == 20).unwrap();
    match &p.outcome {
        Some(Outcome::Dropped { node, reason, .. }) => {
            assert_eq!(*reason, DropReason::HopLimitExceeded);
            assert!(node == "t1" || node == "t2", "{node}");
        }
        other => panic!("{other:?}"),
    }
    let transits = out.trace().iter().filter(|e| e.packet == Some(1) && e.action == TraceAction::Xmit && e.node.starts_with('t')).count();
    assert!(transits < 100, "hop limit never fired ({transits} transit hops)");
}

#[test]
fn tick_limit_is_reported() {
    let doc = net::edge();
    let mut sim = doc.build().unwrap();
    sim.inject_pdu(500, "sa", b"late").unwrap();
    assert_eq!(sim.run_until_idle(100).unwrap_err(), SimError::LimitExceeded { limit: 100 });
    assert!(!sim.is_idle());
    sim.run_until_idle(10_000).unwrap();
    assert!(sim.is_idle());
}

#[test]
fn session_state_stays_off_transit_nodes() {
    for n in [1usize, 10, 100] {
        let doc = net::doc(&net::edge_with_sessions(n));
        let out = net::run_text(&doc, "[events]\n");
        let census = out.sim.snapshot_state();
        assert_eq!(census.session_entries(NodeKind::Transit), 0, "n={n}");
        assert_eq!(census.session_entries(NodeKind::Gateway), 2 * n, "n={n}");
        assert_eq!(out.sim.active_sessions().len(), n);
        assert_eq!(out.sim.smf_associations(), 1);
    }
}

#[test]
fn empty_network_is_idle() {
    let mut sim = Simulator::build(TopologySpec::default()).unwrap();
    assert!(sim.is_idle());
    assert!(sim.run_until_idle(10).unwrap().is_empty());
    assert!(!sim.step());
}

#[test]
fn build_and_event_errors() {
    let doc = net::edge();
    let mut dup = doc.topology.clone();
    dup.gnbs.push(dup.gnbs[0].clone());
    assert!(matches!(Simulator::build(dup), Err(SimError::DuplicateNode(_))));

    let mut sim = doc.build().unwrap();
    assert_eq!(sim.inject_pdu(0, "nope", b"x").unwrap_err(), SimError::UnknownSession("nope".into()));
    assert_eq!(sim.trigger_handover(0, "ue1", "gnb9").unwrap_err(), SimError::UnknownGnb("gnb9".into()));
    assert_eq!(sim.trigger_handover(0, "ue9", "gnb2").unwrap_err(), SimError::UnknownUe("ue9".into()));
}
