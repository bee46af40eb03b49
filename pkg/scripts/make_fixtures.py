#!/usr/bin/env python3
"""Regenerate the capture fixtures under tests/data/captures and the stack profiles.

Real ClientHellos are produced offline by pointing clients at a loopback
listener that records the first flight and closes:

* curl-impersonate (via curl_cffi) for browser-like stacks,
* CPython's ssl module (OpenSSL) for scripted-client stacks.

The hellos are wrapped into pcaps with scapy, and the expected JA4 values are
computed by the independent ``ja4plus`` implementation reading those pcaps.
Requires the ``fixtures`` and ``oracle`` extras. Output is committed, so this
only needs re-running when fixtures change.
"""

from __future__ import annotations

import json
import socket
import ssl
import threading
from pathlib import Path

from scapy.all import DNS, DNSQR, IP, IPv6, TCP, UDP, CookedLinux, Ether, Raw, wrpcap

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "tests" / "data" / "captures"
PROFILES = ROOT / "src" / "ja4ml" / "data" / "profiles.json"
MSS = 1460
BASE_TIME = 1_700_000_000


def _serve(sock: socket.socket, out: list) -> None:
    conn, _ = sock.accept()
    conn.settimeout(3)
    buf = b""
    try:
        while len(buf) < 5 or len(buf) < 5 + int.from_bytes(buf[3:5], "big"):
            chunk = conn.recv(65536)
            if not chunk:
                break
            buf += chunk
    except OSError:
        pass
    out.append(buf)
    conn.close()


def grab(client) -> bytes:
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    sock.listen(1)
    out: list = []
    t = threading.Thread(target=_serve, args=(sock, out))
    t.start()
    try:
        client(sock.getsockname()[1])
    except Exception:
        pass
    t.join()
    sock.close()
    return out[0]


def curl_client(impersonate: str | None, host: str = "localhost"):
    from curl_cffi import requests as creq

    def run(port: int) -> None:
        kwargs = {"impersonate": impersonate} if impersonate else {}
        creq.get(f"https://{host}:{port}/", timeout=2, verify=False, **kwargs)

    return run


def python_client(sni: str | None, alpn: list[str] | None = None, max_tls12: bool = False):
    def run(port: int) -> None:
        ctx = ssl.create_default_context()
        ctx.check_hostname = False
        ctx.verify_mode = ssl.CERT_NONE
        if alpn:
            ctx.set_alpn_protocols(alpn)
        if max_tls12:
            ctx.maximum_version = ssl.TLSVersion.TLSv1_2
        s = socket.create_connection(("127.0.0.1", port))
        ctx.wrap_socket(s, server_hostname=sni)

    return run


def tcp_flow(record: bytes, src: str, dst: str, sport: int, t0: float, v6: bool = False, mss: int = MSS):
    ip = (lambda: IPv6(src=src, dst=dst)) if v6 else (lambda: IP(src=src, dst=dst))
    ip_back = (lambda: IPv6(src=dst, dst=src)) if v6 else (lambda: IP(src=dst, dst=src))
    cseq, sseq = 1000, 5000
    pkts = [
        ip() / TCP(sport=sport, dport=443, flags="S", seq=cseq - 1),
        ip_back() / TCP(sport=443, dport=sport, flags="SA", seq=sseq - 1, ack=cseq),
        ip() / TCP(sport=sport, dport=443, flags="A", seq=cseq, ack=sseq),
    ]
    for off in range(0, len(record), mss):
        chunk = record[off : off + mss]
        pkts.append(ip() / TCP(sport=sport, dport=443, flags="PA", seq=cseq + off, ack=sseq) / Raw(chunk))
    # Fake ServerHello so the reverse direction carries a handshake record too.
    server_hello = bytes.fromhex("160303002a0200002603030000000000000000000000000000000000000000000000000000000000000000130100")
    pkts.append(ip_back() / TCP(sport=443, dport=sport, flags="PA", seq=sseq, ack=cseq + len(record)) / Raw(server_hello))
    for i, p in enumerate(pkts):
        p.time = t0 + i * 0.001
    return pkts


def ether(pkts):
    out = []
    for p in pkts:
        e = Ether(src="02:00:00:00:00:01", dst="02:00:00:00:00:02") / p
        e.time = p.time
        out.append(e)
    return out


def dns_packets(t0: float):
    pkts = []
    for i, name in enumerate(["example.com", "example.org"]):
        p = Ether() / IP(src="10.0.0.5", dst="10.0.0.53") / UDP(sport=53000 + i, dport=53) / DNS(rd=1, qd=DNSQR(qname=name))
        p.time = t0 + i
        pkts.append(p)
    return pkts


def http_flow(t0: float):
    pkts = [
        IP(src="10.0.0.7", dst="10.0.0.80") / TCP(sport=41000, dport=80, flags="S", seq=99),
        IP(src="10.0.0.80", dst="10.0.0.7") / TCP(sport=80, dport=41000, flags="SA", seq=199, ack=100),
        IP(src="10.0.0.7", dst="10.0.0.80") / TCP(sport=41000, dport=80, flags="PA", seq=100, ack=200)
        / Raw(b"GET / HTTP/1.1\r\nHost: example.com\r\n\r\n"),
    ]
    for i, p in enumerate(pkts):
        p.time = t0 + i * 0.001
    return ether(pkts)


def imperfect_mimic(record: bytes) -> bytes:
    """Chrome's hello with the extended_master_secret extension dropped."""
    from ja4ml.clienthello import parse_clienthello
    from ja4ml.pcap import HandshakeCandidate, extract_clienthello_bytes
    from ja4ml.wire import reparse, serialize_clienthello, wrap_records

    hello = parse_clienthello(extract_clienthello_bytes(HandshakeCandidate("", record)))
    exts = tuple((t, b) for t, b in hello.extensions if t != 0x0017)
    return wrap_records(serialize_clienthello(reparse(hello, extensions=exts)))


def oracle_ja4(path: Path) -> list[str]:
    from scapy.all import rdpcap

    from ja4plus import JA4Fingerprinter

    fp = JA4Fingerprinter()
    out = []
    for pkt in rdpcap(str(path)):
        r = fp.process_packet(pkt)
        if r:
            out.append(r)
    return out


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    clients = {
        "chrome": curl_client("chrome"),
        "firefox": curl_client("firefox"),
        "safari": curl_client("safari"),
        "edge": curl_client("edge"),
        "curl_default": curl_client(None),
        "curl_ip_nosni": curl_client("chrome", host="127.0.0.1"),
        "python_sni_alpn": python_client("api.example.com", ["http/1.1"]),
        "python_nosni_noalpn": python_client(None),
        "python_tls12": python_client("example.com", max_tls12=True),
        "python_h2": python_client("example.net", ["h2", "http/1.1"]),
    }
    records = {name: grab(client) for name, client in clients.items()}

    expected: dict[str, dict] = {}
    for i, (name, record) in enumerate(sorted(records.items())):
        path = OUT / f"{name}.pcap"
        wrpcap(str(path), ether(tcp_flow(record, "10.0.0.2", "10.0.0.1", 50000 + i, BASE_TIME + i)))
        expected[name] = {"file": path.name, "record_hex": record.hex(), "ja4": oracle_ja4(path)}

    # Several flows plus non-TLS noise in one file; IPv6 for one of them.
    multi = dns_packets(BASE_TIME) + http_flow(BASE_TIME + 5)
    multi += ether(tcp_flow(records["chrome"], "10.0.1.2", "10.0.1.1", 51001, BASE_TIME + 10))
    multi += ether(tcp_flow(records["python_sni_alpn"], "fd00::2", "fd00::1", 51002, BASE_TIME + 20, v6=True))
    multi += ether(tcp_flow(records["curl_default"], "10.0.1.3", "10.0.1.1", 51003, BASE_TIME + 30))
    wrpcap(str(OUT / "multi_flow.pcap"), multi)
    expected["multi_flow"] = {"file": "multi_flow.pcap", "ja4": oracle_ja4(OUT / "multi_flow.pcap")}

    wrpcap(str(OUT / "dns_only.pcap"), dns_packets(BASE_TIME))
    expected["dns_only"] = {"file": "dns_only.pcap", "ja4": oracle_ja4(OUT / "dns_only.pcap")}

    # Other link types and the nanosecond pcap variant.
    flow = tcp_flow(records["python_h2"], "10.0.2.2", "10.0.2.1", 52000, BASE_TIME)
    wrpcap(str(OUT / "python_h2_rawip.pcap"), flow, linktype=101)
    sll = []
    for p in flow:
        c = CookedLinux(pkttype=4, lladdrtype=1, lladdrlen=6, src=b"\x02\x00\x00\x00\x00\x01\x00\x00", proto=0x0800) / p
        c.time = p.time
        sll.append(c)
    wrpcap(str(OUT / "python_h2_sll.pcap"), sll)
    wrpcap(str(OUT / "python_h2_nsec.pcap"), ether(flow), nano=True)
    for name in ("python_h2_rawip", "python_h2_sll", "python_h2_nsec"):
        expected[name] = {"file": f"{name}.pcap", "ja4": oracle_ja4(OUT / f"{name}.pcap")}

    (OUT / "expected_ja4.json").write_text(json.dumps(expected, indent=2, sort_keys=True) + "\n")

    profiles = {
        "version": 1,
        "profiles": {
            "browser_chrome": {"kind": "browser", "record_hex": records["chrome"].hex()},
            "browser_firefox": {"kind": "browser", "record_hex": records["firefox"].hex()},
            "scripted_python": {"kind": "scripted", "record_hex": records["python_sni_alpn"].hex()},
            "scripted_curl": {"kind": "scripted", "record_hex": records["curl_default"].hex()},
            "imperfect_chrome_mimic": {"kind": "spoofer", "record_hex": imperfect_mimic(records["chrome"]).hex()},
        },
    }
    PROFILES.write_text(json.dumps(profiles, indent=2) + "\n")
    for name, entry in sorted(expected.items()):
        print(f"{name:24s} {entry['ja4']}")


if __name__ == "__main__":
    main()
