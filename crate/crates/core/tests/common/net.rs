//! Shipped and generated network configurations.

use std::fmt::Write as _;
use std::path::PathBuf;

use edgesr_core::config::{run, ConfigDocument, RunOutput, Scenario};

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn read(name: &str) -> String {
    let path = scenario_dir().join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn edge_text() -> String {
    read("edge_network.conf")
}

pub fn doc(text: &str) -> ConfigDocument {
    ConfigDocument::validate(text).unwrap_or_else(|e| panic!("config rejected: {e:?}"))
}

pub fn edge() -> ConfigDocument {
    doc(&edge_text())
}

pub fn scenario(text: &str, doc: &ConfigDocument) -> Scenario {
    Scenario::parse(text, doc).unwrap_or_else(|e| panic!("scenario rejected: {e:?}"))
}

pub fn run_text(doc: &ConfigDocument, scn: &str) -> RunOutput {
    run(doc, &scenario(scn, doc), None).unwrap_or_else(|e| panic!("run failed: {e:?}"))
}

/// Runs a shipped scenario against the shipped edge network.
pub fn run_shipped(name: &str) -> RunOutput {
    run_text(&edge(), &read(name))
}

/// Names of every shipped `.scn` file.
pub fn shipped_scenarios() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(scenario_dir())
        .expect("scenario dir")
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| n.ends_with(".scn"))
        .collect();
    names.sort();
    names
}

/// The shipped edge network with `n` extra sessions on ue1 and ue2, all established at tick 1.
pub fn edge_with_sessions(n: usize) -> String {
    let mut text = edge_text();
    // Drop the three shipped sessions so the count is exactly `n`.
    if let Some(cut) = text.find("[session sa]") {
        text.truncate(cut);
    }
    for i in 0..n {
        let ue = if i % 2 == 0 { "ue1" } else { "ue2" };
        let slice = if i % 3 == 0 { "sliceA" } else { "sliceB" };
        let _ = write!(
            text,
            "\n[session x{i}]\nue = {ue}\nue-addr = 2001:db8:cafe:1::{:x}\nslice = {slice}\nqfi = {}\nservice = 2001:db8:5e::7\nestablish = 1\n",
            i + 1,
            1 + i % 60,
        );
    }
    text
}

/// gNB, access gateway, `transits` End nodes and a DT6 gateway in a line,
/// joined by links with the given delays (`transits + 2` of them).
pub fn line_network(delays: &[u64]) -> String {
    let transits = delays.len() - 2;
    let mut t = String::from(
        "[controller ctl]\naddr = 2001:db8:ff::1\nn3 = 2001:db8:a::1\n\n[smf smf]\naddr = 2001:db8:ff::2\n\n\
         [gateway acc]\naddr = 2001:db8:10::1\ngtp6d = 2001:db8:a::/64\ngtp6e = 2001:db8:10:e::/80\n\n\
         [gateway edge]\naddr = 2001:db8:40::1\ndt6 = 2001:db8:40::d6/128\n\n\
         [gnb g]\naddr = 2001:db8:1::1\ngateway = acc\n\n[host h]\ngateway = edge\naddr = 2001:db8:5e::7\n\n[ue u]\ngnb = g\n",
    );
    let mut hops = vec!["g".to_string(), "acc".to_string()];
    for i in 0..transits {
        let _ = write!(t, "\n[transit t{i}]\naddr = 2001:db8:{:x}::1\nend = 2001:db8:{:x}::e/128\n", 0x100 + i, 0x100 + i);
        hops.push(format!("t{i}"));
    }
    hops.push("edge".into());
    t.push_str("\n[links]\nsmf ctl = 1\n");
    for (w, d) in hops.windows(2).zip(delays) {
        let _ = writeln!(t, "{} {} = {d}", w[0], w[1]);
    }
    let waypoints: Vec<&str> = hops[2..hops.len() - 1].iter().map(String::as_str).collect();
    let _ = write!(t, "\n[slice s]\ngateway = edge\n");
    if !waypoints.is_empty() {
        let _ = writeln!(t, "waypoints = {}", waypoints.join(","));
    }
    t.push_str("\n[session x]\nue = u\nue-addr = 2001:db8:cafe::1\nslice = s\nservice = 2001:db8:5e::7\nestablish = 1\n");
    t
}
