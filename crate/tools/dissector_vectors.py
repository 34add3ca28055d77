#!/usr/bin/env python3
"""Generate reference wire vectors with scapy.

The output is frozen into crates/core/tests/data/dissector_vectors.json and
consumed by the codec tests. Every expected field in that file comes from
scapy's own decode of the bytes, never from the Rust implementation.

    pip install scapy
    python3 tools/dissector_vectors.py > crates/core/tests/data/dissector_vectors.json
"""

import json

from scapy.all import IPv6, UDP, Raw, IPv6ExtHdrSegmentRouting, in6_chksum
from scapy.contrib.gtp import GTP_U_Header, GTPPDUSessionContainer
from scapy.contrib.pfcp import (
    PFCP,
    PFCPHeartbeatRequest,
    PFCPAssociationSetupRequest,
    PFCPSessionEstablishmentRequest,
    IE_RecoveryTimeStamp,
    IE_NodeId,
    IE_FSEID,
    IE_CreatePDR,
    IE_PDR_Id,
    IE_Precedence,
    IE_PDI,
    IE_SourceInterface,
    IE_FTEID,
    IE_NetworkInstance,
    IE_FAR_Id,
    IE_CreateFAR,
    IE_ApplyAction,
    IE_ForwardingParameters,
    IE_DestinationInterface,
    IE_OuterHeaderRemoval,
)

GNB = "2001:db8:100::1"
N3 = "2001:db8:ff::1"
UE = "2001:db8:1::2"
SVC = "2001:db8:5::1"


def ipv6_fields(p):
    return {
        "version": p.version,
        "traffic_class": p.tc,
        "flow_label": p.fl,
        "payload_length": p.plen,
        "next_header": p.nh,
        "hop_limit": p.hlim,
        "src": p.src,
        "dst": p.dst,
    }


def srh_fields(s):
    return {
        "next_header": s.nh,
        "hdr_ext_len": s.len,
        "routing_type": s.type,
        "segments_left": s.segleft,
        "last_entry": s.lastentry,
        "tag": s.tag,
        "segments": list(s.addresses),
    }


def gtpu_fields(g):
    out = {
        "version": g.version,
        "pt": g.PT,
        "e": g.E,
        "s": g.S,
        "pn": g.PN,
        "message_type": g.gtp_type,
        "length": g.length,
        "teid": g.teid,
    }
    if g.haslayer(GTPPDUSessionContainer):
        c = g[GTPPDUSessionContainer]
        out["pdu_type"] = c.type
        out["qfi"] = c.QFI
    return out


def vectors():
    v = []

    # Complete uplink packet as emitted by a gNB.
    inner = IPv6(src=UE, dst=SVC, hlim=64) / UDP(sport=40000, dport=7) / Raw(b"ping")
    pkt = (
        IPv6(src=GNB, dst=N3, tc=0x12, fl=0xABCDE, hlim=64)
        / UDP(sport=2152, dport=2152)
        / GTP_U_Header(teid=100, E=1, next_ex=0x85)
        / GTPPDUSessionContainer(type=1, QFI=9)
        / inner
    )
    raw = bytes(pkt)
    dec = IPv6(raw)
    v.append({
        "name": "uplink_gtpu_packet",
        "hex": raw.hex(),
        "ipv6": ipv6_fields(dec),
        "udp": {"sport": dec[UDP].sport, "dport": dec[UDP].dport,
                "len": dec[UDP].len, "chksum": dec[UDP].chksum},
        "gtpu": gtpu_fields(dec[GTP_U_Header]),
        "inner_hex": bytes(inner).hex(),
    })

    # Bare IPv6 header, no next header.
    h = IPv6(src="2001:db8::a", dst="2001:db8::b", tc=0xA5, fl=0x12345, hlim=17, nh=59)
    raw = bytes(h)
    v.append({"name": "ipv6_no_next_header", "hex": raw.hex(), "ipv6": ipv6_fields(IPv6(raw))})

    # SRH vectors.
    s1 = IPv6ExtHdrSegmentRouting(nh=41, addresses=["2001:db8:e1:6::"], segleft=1)
    raw = bytes(s1)
    v.append({"name": "srh_single_segment", "hex": raw.hex(),
              "srh": srh_fields(IPv6ExtHdrSegmentRouting(raw))})
    s3 = IPv6ExtHdrSegmentRouting(
        nh=41,
        addresses=["2001:db8:100::1", "2001:db8:a:e::28:0:1", "2001:db8:11::1"],
        segleft=2,
        tag=0x0102,
    )
    raw = bytes(s3)
    v.append({"name": "srh_three_segments", "hex": raw.hex(),
              "srh": srh_fields(IPv6ExtHdrSegmentRouting(raw))})

    # GTP-U vectors.
    g = GTP_U_Header(teid=1, gtp_type=255) / Raw(b"\x01\x02\x03\x04")
    raw = bytes(g)
    v.append({"name": "gtpu_minimal", "hex": raw.hex(), "gtpu": gtpu_fields(GTP_U_Header(raw)),
              "payload_hex": "01020304"})
    g = GTP_U_Header(teid=0x11223344, E=1, next_ex=0x85) / GTPPDUSessionContainer(type=1, QFI=9) / Raw(b"abcd")
    raw = bytes(g)
    v.append({"name": "gtpu_pdu_session_uplink", "hex": raw.hex(), "gtpu": gtpu_fields(GTP_U_Header(raw)),
              "payload_hex": b"abcd".hex()})
    g = GTP_U_Header(teid=1, E=1, next_ex=0x85) / GTPPDUSessionContainer(type=0, QFI=10) / Raw(b"abcd")
    raw = bytes(g)
    v.append({"name": "gtpu_pdu_session_downlink", "hex": raw.hex(), "gtpu": gtpu_fields(GTP_U_Header(raw)),
              "payload_hex": b"abcd".hex()})

    # UDP checksum references.
    v.append({"name": "udp_checksum_zero", "src": "::", "dst": "::", "segment_hex": "00" * 8,
              "checksum": in6_chksum(17, IPv6(src="::", dst="::"), b"\x00" * 8)})
    seg = bytes(UDP(sport=2152, dport=2152, chksum=0) / Raw(b"hello world"))
    v.append({"name": "udp_checksum_payload", "src": GNB, "dst": N3, "segment_hex": seg.hex(),
              "checksum": in6_chksum(17, IPv6(src=GNB, dst=N3), seg)})

    # PFCP vectors.
    hb = PFCP(version=1, S=0, message_type=1, seq=7) / PFCPHeartbeatRequest(
        IE_list=[IE_RecoveryTimeStamp(timestamp=3900000000)])
    raw = bytes(hb)
    d = PFCP(raw)
    v.append({"name": "pfcp_heartbeat_request", "hex": raw.hex(),
              "pfcp": {"version": d.version, "s": d.S, "message_type": d.message_type,
                       "length": d.length, "seq": d.seq, "ie_types": [96], "recovery": 3900000000}})

    asr = PFCP(version=1, S=0, message_type=5, seq=1) / PFCPAssociationSetupRequest(
        IE_list=[IE_NodeId(id_type=1, ipv6="2001:db8:c::2"),
                 IE_RecoveryTimeStamp(timestamp=3900000001)])
    raw = bytes(asr)
    d = PFCP(raw)
    v.append({"name": "pfcp_association_setup_request", "hex": raw.hex(),
              "pfcp": {"version": d.version, "s": d.S, "message_type": d.message_type,
                       "length": d.length, "seq": d.seq, "ie_types": [60, 96],
                       "node_id": "2001:db8:c::2"}})

    pdr = IE_CreatePDR(IE_list=[
        IE_PDR_Id(id=1),
        IE_Precedence(precedence=255),
        IE_PDI(IE_list=[
            IE_SourceInterface(interface=0),
            IE_FTEID(V6=1, TEID=100, ipv6=N3),
            IE_NetworkInstance(instance="sliceA"),
        ]),
        IE_OuterHeaderRemoval(header=1),
        IE_FAR_Id(id=1),
    ])
    far = IE_CreateFAR(IE_list=[
        IE_FAR_Id(id=1),
        IE_ApplyAction(FORW=1),
        IE_ForwardingParameters(IE_list=[IE_DestinationInterface(interface=1)]),
    ])
    est = PFCP(version=1, S=1, seid=0, message_type=50, seq=3) / PFCPSessionEstablishmentRequest(
        IE_list=[IE_NodeId(id_type=1, ipv6="2001:db8:c::2"),
                 IE_FSEID(v6=1, seid=0x1122334455667788, ipv6="2001:db8:c::2"),
                 pdr, far])
    raw = bytes(est)
    d = PFCP(raw)
    v.append({"name": "pfcp_session_establishment_request", "hex": raw.hex(),
              "pfcp": {"version": d.version, "s": d.S, "message_type": d.message_type,
                       "length": d.length, "seq": d.seq, "seid": d.seid,
                       "ie_types": [60, 57, 1, 3],
                       "cp_seid": 0x1122334455667788,
                       "pdr_child_types": [56, 29, 2, 95, 108],
                       "pdi_child_types": [20, 21, 22],
                       "far_child_types": [108, 44, 4],
                       "teid": 100, "network_instance": "sliceA"}})
    return v


if __name__ == "__main__":
    print(json.dumps(vectors(), indent=2))
