#!/usr/bin/env python3
"""Regenerates pcap_fixtures.hpp. Requires scapy.

Capture contents (registry: 02:00:00:00:00:01 echo_dot, 02:00:00:00:00:02 smart_tv):
  1. DNS response to echo_dot: api.amazon.com A 52.1.2.3 (AAAA 2600:1f18::5)
  2. echo_dot -> 52.1.2.3 TCP 50001 -> 443, 100-byte payload
  3. 52.1.2.3 -> echo_dot TCP 443 -> 50001, 400-byte payload
  4. unregistered 02:00:00:00:00:99 -> router TCP
  5. smart_tv -> 8.8.8.8 ICMP echo request (VLAN tagged)
"""
import os
import sys
from decimal import Decimal

from scapy.all import DNS, DNSQR, DNSRR, ICMP, IP, TCP, UDP, Dot1Q, Ether, Raw
from scapy.utils import PcapWriter

ROUTER = "aa:bb:cc:dd:ee:ff"
ECHO = "02:00:00:00:00:01"
TV = "02:00:00:00:00:02"
STRANGER = "02:00:00:00:00:99"
T0 = 1614592800


def packets():
    dns = (
        Ether(src=ROUTER, dst=ECHO)
        / IP(src="192.168.1.1", dst="192.168.1.10")
        / UDP(sport=53, dport=50000)
        / DNS(
            id=7,
            qr=1,
            rd=1,
            ra=1,
            qd=DNSQR(qname="api.amazon.com"),
            an=[
                DNSRR(rrname="api.amazon.com", type="A", ttl=60, rdata="52.1.2.3"),
                DNSRR(rrname="api.amazon.com", type="AAAA", ttl=60, rdata="2600:1f18::5"),
            ],
        )
    )
    out = Ether(src=ECHO, dst=ROUTER) / IP(src="192.168.1.10", dst="52.1.2.3") / TCP(sport=50001, dport=443, flags="PA") / Raw(b"x" * 100)
    back = Ether(src=ROUTER, dst=ECHO) / IP(src="52.1.2.3", dst="192.168.1.10") / TCP(sport=443, dport=50001, flags="PA") / Raw(b"y" * 400)
    stray = Ether(src=STRANGER, dst=ROUTER) / IP(src="192.168.1.99", dst="1.1.1.1") / TCP(sport=40000, dport=80)
    ping = Ether(src=TV, dst=ROUTER) / Dot1Q(vlan=10) / IP(src="192.168.1.20", dst="8.8.8.8") / ICMP()
    times = [(0, 1), (0, 500000), (0, 750000), (1, 0), (1, 250000)]
    pkts = [dns, out, back, stray, ping]
    for p, (s, us) in zip(pkts, times):
        p.time = Decimal(T0 + s) + Decimal(us) / Decimal(10**6)
    return pkts


def capture(endianness, nano):
    path = f"/tmp/fixture_{'be' if endianness == '>' else 'le'}{'_ns' if nano else ''}.pcap"
    w = PcapWriter(path, linktype=1, endianness=endianness, nano=nano, sync=True)
    for p in packets():
        w.write(p)
    w.close()
    with open(path, "rb") as f:
        data = f.read()
    os.remove(path)
    return data


def array(name, data):
    items = [f"0x{b:02x}," for b in data]
    lines = ["    " + "".join(items[i : i + 16]) for i in range(0, len(items), 16)]
    return f"inline constexpr unsigned char {name}[] = {{\n" + "\n".join(lines) + "\n};\n"


def main():
    out = os.path.join(os.path.dirname(os.path.abspath(__file__)), "pcap_fixtures.hpp")
    parts = [
        "// Generated by make_pcaps.py; do not edit.\n#pragma once\n\nnamespace fixtures {\n\n",
        array("kLittleEndianMicro", capture("<", False)),
        "\n",
        array("kBigEndianMicro", capture(">", False)),
        "\n",
        array("kLittleEndianNano", capture("<", True)),
        "\n}  // namespace fixtures\n",
    ]
    with open(out, "w") as f:
        f.write("".join(parts))
    print(out, file=sys.stderr)


if __name__ == "__main__":
    main()
