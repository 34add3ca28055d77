//! Frozen scapy decodes of reference packets.

use std::net::Ipv6Addr;

use edgesr_core::pfcp::{decode_pfcp, encode_pfcp, ie::types};
use edgesr_core::wire::{compute_udp_checksum, parse_gtpu, parse_ipv6, parse_srh, parse_udp, serialize_gtpu, serialize_srh};
use serde::Deserialize;
use serde_json::Value;

#[derive(Debug, Deserialize)]
pub struct Vector {
    pub name: String,
    #[serde(flatten)]
    pub fields: serde_json::Map<String, Value>,
}

pub fn load() -> Vec<Vector> {
    serde_json::from_str(include_str!("../data/dissector_vectors.json")).expect("vector file")
}

fn hex_field(v: &Vector, k: &str) -> Vec<u8> {
    hex::decode(v.fields[k].as_str().expect("hex string")).expect("hex")
}

fn num(o: &Value, k: &str) -> u64 {
    o[k].as_u64().unwrap_or_else(|| panic!("field {k}"))
}

fn addr(o: &Value, k: &str) -> Ipv6Addr {
    o[k].as_str().expect("address").parse().expect("address")
}

fn eq<T: PartialEq + std::fmt::Debug>(what: &str, ours: T, theirs: T) -> Result<(), String> {
    if ours == theirs {
        Ok(())
    } else {
        Err(format!("{what}: decoded {ours:?}, reference {theirs:?}"))
    }
}

/// Decodes one vector and compares every frozen field.
pub fn check(v: &Vector) -> Result<(), String> {
    let f = &v.fields;
    if v.name.starts_with("udp_checksum") {
        let seg = hex_field(v, "segment_hex");
        let sum = compute_udp_checksum(f["src"].as_str().unwrap().parse().unwrap(), f["dst"].as_str().unwrap().parse().unwrap(), &seg)
            .map_err(|e| e.to_string())?;
        return eq("checksum", u64::from(sum), num(&Value::Object(f.clone()), "checksum"));
    }
    let bytes = hex_field(v, "hex");
    let mut rest: &[u8] = &bytes;
    if let Some(ip) = f.get("ipv6") {
        let (h, r) = parse_ipv6(&bytes).map_err(|e| e.to_string())?;
        eq("version", 6, num(ip, "version"))?;
        eq("traffic_class", u64::from(h.traffic_class), num(ip, "traffic_class"))?;
        eq("flow_label", u64::from(h.flow_label), num(ip, "flow_label"))?;
        eq("payload_length", u64::from(h.payload_length), num(ip, "payload_length"))?;
        eq("next_header", u64::from(h.next_header), num(ip, "next_header"))?;
        eq("hop_limit", u64::from(h.hop_limit), num(ip, "hop_limit"))?;
        eq("src", h.src, addr(ip, "src"))?;
        eq("dst", h.dst, addr(ip, "dst"))?;
        rest = r;
        if let Some(u) = f.get("udp") {
            let (uh, body) = parse_udp(h.src, h.dst, rest).map_err(|e| e.to_string())?;
            eq("sport", u64::from(uh.src_port), num(u, "sport"))?;
            eq("dport", u64::from(uh.dst_port), num(u, "dport"))?;
            eq("udp len", u64::from(uh.length), num(u, "len"))?;
            eq("udp chksum", u64::from(uh.checksum), num(u, "chksum"))?;
            rest = body;
        }
    }
    if let Some(s) = f.get("srh") {
        let (srh, _) = parse_srh(rest).map_err(|e| e.to_string())?;
        eq("srh next_header", u64::from(srh.next_header), num(s, "next_header"))?;
        eq("hdr_ext_len", u64::from(srh.hdr_ext_len()), num(s, "hdr_ext_len"))?;
        eq("routing_type", 4, num(s, "routing_type"))?;
        eq("segments_left", u64::from(srh.segments_left), num(s, "segments_left"))?;
        eq("last_entry", u64::from(srh.last_entry()), num(s, "last_entry"))?;
        eq("tag", u64::from(srh.tag), num(s, "tag"))?;
        let segs: Vec<Ipv6Addr> = s["segments"].as_array().unwrap().iter().map(|x| x.as_str().unwrap().parse().unwrap()).collect();
        eq("segments", srh.segments.clone(), segs)?;
        eq("re-encode", serialize_srh(&srh).map_err(|e| e.to_string())?, rest.to_vec())?;
    }
    if let Some(g) = f.get("gtpu") {
        let (h, inner) = parse_gtpu(rest).map_err(|e| e.to_string())?;
        eq("gtp version", 1, num(g, "version"))?;
        eq("pt", 1, num(g, "pt"))?;
        eq("e", u64::from(h.e_flag()), num(g, "e"))?;
        eq("s", u64::from(h.s_flag), num(g, "s"))?;
        eq("pn", u64::from(h.pn_flag), num(g, "pn"))?;
        eq("message_type", u64::from(h.message_type), num(g, "message_type"))?;
        eq("gtp length", (rest.len() - 8) as u64, num(g, "length"))?;
        eq("teid", u64::from(h.teid), num(g, "teid"))?;
        if g.get("qfi").is_some() {
            let psc = h.pdu_session().ok_or("no PDU session container")?;
            eq("pdu_type", u64::from(psc.pdu_type), num(g, "pdu_type"))?;
            eq("qfi", u64::from(psc.qfi), num(g, "qfi"))?;
        }
        let key = if f.contains_key("inner_hex") { "inner_hex" } else { "payload_hex" };
        eq("inner", inner.to_vec(), hex_field(v, key))?;
        eq("gtp re-encode", serialize_gtpu(&h, inner).map_err(|e| e.to_string())?, rest.to_vec())?;
    }
    if let Some(p) = f.get("pfcp") {
        let m = decode_pfcp(&bytes).map_err(|e| e.to_string())?;
        eq("pfcp version", 1, num(p, "version"))?;
        eq("s flag", u64::from(m.seid.is_some()), num(p, "s"))?;
        eq("message_type", u64::from(m.message_type), num(p, "message_type"))?;
        eq("length", (bytes.len() - 4) as u64, num(p, "length"))?;
        eq("seq", u64::from(m.sequence), num(p, "seq"))?;
        if let Some(seid) = p.get("seid") {
            eq("seid", m.seid, seid.as_u64())?;
        }
        let types_ref: Vec<u64> = p["ie_types"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
        eq("ie types", m.ies.iter().map(|i| u64::from(i.ie_type)).collect::<Vec<_>>(), types_ref)?;
        if let Some(ts) = p.get("recovery") {
            let ie = m.ie(types::RECOVERY_TIME_STAMP).ok_or("no recovery IE")?;
            eq("recovery", ie.as_u32().ok().map(u64::from), ts.as_u64())?;
        }
        if let Some(n) = p.get("node_id") {
            let ie = m.ie(types::NODE_ID).ok_or("no node id")?;
            eq("node id", ie.as_node_id().map_err(|e| e.to_string())?.to_string(), n.as_str().unwrap().to_string())?;
        }
        if let Some(cp) = p.get("cp_seid") {
            let ie = m.ie(types::F_SEID).ok_or("no F-SEID")?;
            eq("cp seid", ie.as_f_seid().ok().map(|s| s.seid), cp.as_u64())?;
        }
        let children = |parent: u16, key: &str| -> Result<(), String> {
            let Some(list) = p.get(key) else { return Ok(()) };
            let reference: Vec<u64> = list.as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
            let ie = m.ie(parent).ok_or(format!("missing IE {parent}"))?;
            let ours = if key == "pdi_child_types" {
                ie.child(types::PDI).ok_or("no PDI")?.children().iter().map(|c| u64::from(c.ie_type)).collect::<Vec<_>>()
            } else {
                ie.children().iter().map(|c| u64::from(c.ie_type)).collect()
            };
            eq(key, ours, reference)
        };
        children(types::CREATE_PDR, "pdr_child_types")?;
        children(types::CREATE_PDR, "pdi_child_types")?;
        children(types::CREATE_FAR, "far_child_types")?;
        if let Some(t) = p.get("teid") {
            let pdi = m.ie(types::CREATE_PDR).and_then(|i| i.child(types::PDI)).ok_or("no PDI")?;
            let ft = pdi.child(types::F_TEID).ok_or("no F-TEID")?.as_f_teid().map_err(|e| e.to_string())?;
            eq("teid", ft.teid.map(u64::from), t.as_u64())?;
        }
        if let Some(ni) = p.get("network_instance") {
            let pdi = m.ie(types::CREATE_PDR).and_then(|i| i.child(types::PDI)).ok_or("no PDI")?;
            let ours = pdi.child(types::NETWORK_INSTANCE).ok_or("no network instance")?.as_network_instance();
            eq("network instance", ours, ni.as_str().unwrap().to_string())?;
        }
        eq("pfcp re-encode", encode_pfcp(&m).map_err(|e| e.to_string())?, bytes.clone())?;
    }
    Ok(())
}
