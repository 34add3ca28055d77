#!/usr/bin/env python3
"""Decode every packet of a `--hex` trace with scapy and cross-check the
trace columns.

    edgesr run scenarios/edge_network.conf scenarios/slices.scn --trace t.tsv --hex
    python3 tools/check_trace.py t.tsv

Checks per packet: scapy rebuilds identical bytes, UDP checksums verify,
and the outer addresses, segments left, TEID, QFI and inner addresses
agree with the trace line. PFCP payloads must decode as PFCP.
"""

import sys

from scapy.all import IPv6, UDP, IPv6ExtHdrSegmentRouting, raw
from scapy.contrib.gtp import GTP_U_Header, GTPPDUSessionContainer
from scapy.contrib.pfcp import PFCP


def col(v):
    return None if v == "-" else v


def check(fields):
    (_, node, action, _, osrc, odst, sl, teid, qfi, isrc, idst, _, _, _, hx) = fields
    data = bytes.fromhex(hx)
    p = IPv6(data)
    errors = []
    if raw(p) != data:
        errors.append("scapy re-encode differs")
    outer_is_inner = col(teid) is None and col(sl) is None and osrc == isrc and odst == idst
    if p.src != osrc or p.dst != odst:
        errors.append(f"outer {p.src}->{p.dst} vs trace {osrc}->{odst}")
    srh = p.getlayer(IPv6ExtHdrSegmentRouting)
    if (srh is None) != (col(sl) is None) or (srh is not None and str(srh.segleft) != sl):
        errors.append(f"segments left mismatch: {srh.segleft if srh else None} vs {sl}")
    udp = p.getlayer(UDP)
    if udp is not None:
        rebuilt = IPv6(data)
        del rebuilt[UDP].chksum
        if raw(rebuilt) != data:
            errors.append(f"udp checksum {udp.chksum:#x} does not verify")
    gtp = p.getlayer(GTP_U_Header)
    if gtp is not None:
        if str(gtp.teid) != teid:
            errors.append(f"teid {gtp.teid} vs {teid}")
        psc = p.getlayer(GTPPDUSessionContainer)
        if psc is not None and str(psc.QFI) != qfi:
            errors.append(f"qfi {psc.QFI} vs {qfi}")
    if udp is not None and 8805 in (udp.sport, udp.dport):
        if not isinstance(PFCP(bytes(udp.payload)), PFCP):
            errors.append("not PFCP")
    elif col(isrc) is not None and not outer_is_inner:
        inner = p.getlayer(IPv6, 2)
        if inner is None or inner.src != isrc or inner.dst != idst:
            errors.append(f"inner {inner.src if inner else None} vs trace {isrc}")
    return errors


def main(path):
    bad = 0
    total = 0
    with open(path) as f:
        for n, line in enumerate(f, 1):
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 15 or fields[14] == "-":
                continue
            total += 1
            errs = check(fields)
            if errs:
                bad += 1
                print(f"{path}:{n}: {fields[1]} {fields[2]}: {'; '.join(errs)}")
    print(f"{total} packets checked, {bad} mismatches")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1]))
