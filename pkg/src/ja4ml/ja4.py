"""JA4 TLS client fingerprints.

A fingerprint has three underscore-separated parts::

    t13d1516h2_8daaf6152771_e5627efa2ab1
    |  | | | |  |             +- sha256 of sorted extensions + signature algorithms
    |  | | | |  +- sha256 of sorted cipher suites
    |  | | | +- first/last character of the first ALPN value
    |  | | +- extension count
    |  | +- cipher count
    |  +- SNI flag (d = domain, i = IP / absent)
    +- transport and TLS version

GREASE values are ignored everywhere so the fingerprint is stable across
connections of the same client.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

from .clienthello import EXT_ALPN, EXT_SERVER_NAME, ClientHello, is_grease

ZERO_HASH = "000000000000"

VERSION_CODES = {
    0x0304: "13",
    0x0303: "12",
    0x0302: "11",
    0x0301: "10",
    0x0300: "s3",
    0x0002: "s2",
}

JA4_RE = re.compile(r"^[tq][0-9a-z]{2}[di]\d{2}\d{2}[0-9A-Za-z]{2}_[0-9a-f]{12}_[0-9a-f]{12}$")


@dataclass(frozen=True)
class Ja4Fingerprint:
    ja4_a: str
    ja4_b: str
    ja4_c: str

    @property
    def full(self) -> str:
        return f"{self.ja4_a}_{self.ja4_b}_{self.ja4_c}"

    def __str__(self) -> str:
        return self.full


def _hash12(text: str) -> str:
    return hashlib.sha256(text.encode("ascii")).hexdigest()[:12]


def _is_alnum(b: int) -> bool:
    return 0x30 <= b <= 0x39 or 0x41 <= b <= 0x5A or 0x61 <= b <= 0x7A


def tls_version_code(hello: ClientHello) -> str:
    versions = [v for v in hello.supported_versions if not is_grease(v)]
    version = max(versions) if versions else hello.legacy_version
    return VERSION_CODES.get(version, "00")


def alpn_code(hello: ClientHello) -> str:
    if not hello.alpn_protocols or not hello.alpn_protocols[0]:
        return "00"
    first = hello.alpn_protocols[0]
    if _is_alnum(first[0]) and _is_alnum(first[-1]):
        return chr(first[0]) + chr(first[-1])
    hexed = first.hex()
    return hexed[0] + hexed[-1]


def ja4_a_component(hello: ClientHello) -> str:
    protocol = "q" if hello.transport == "udp-quic" else "t"
    sni = "d" if hello.has_extension(EXT_SERVER_NAME) else "i"
    ciphers = sum(1 for c in hello.cipher_suites if not is_grease(c))
    exts = sum(1 for t in hello.extension_types if not is_grease(t))
    return f"{protocol}{tls_version_code(hello)}{sni}{min(ciphers, 99):02d}{min(exts, 99):02d}{alpn_code(hello)}"


def cipher_string(hello: ClientHello) -> str:
    """Comma-joined sorted cipher list that ``ja4_b`` hashes."""
    return ",".join(sorted(f"{c:04x}" for c in hello.cipher_suites if not is_grease(c)))


def extension_string(hello: ClientHello) -> str:
    """Sorted extensions (minus SNI/ALPN), then ``_`` and wire-order signature algorithms."""
    exts = sorted(
        f"{t:04x}"
        for t in hello.extension_types
        if not is_grease(t) and t not in (EXT_SERVER_NAME, EXT_ALPN)
    )
    text = ",".join(exts)
    sig_algs = [f"{s:04x}" for s in hello.signature_algorithms if not is_grease(s)]
    if sig_algs:
        text += "_" + ",".join(sig_algs)
    return text


def ja4_b_component(hello: ClientHello) -> str:
    text = cipher_string(hello)
    return _hash12(text) if text else ZERO_HASH


def ja4_c_component(hello: ClientHello) -> str:
    has_exts = any(
        not is_grease(t) and t not in (EXT_SERVER_NAME, EXT_ALPN) for t in hello.extension_types
    )
    return _hash12(extension_string(hello)) if has_exts else ZERO_HASH


def compute_ja4(hello: ClientHello) -> Ja4Fingerprint:
    return Ja4Fingerprint(ja4_a_component(hello), ja4_b_component(hello), ja4_c_component(hello))


def fingerprint_bytes(data: bytes, transport: str = "tcp") -> Ja4Fingerprint:
    """Fingerprint a handshake message or a TLS record stream carrying one."""
    from .pcap import extract_clienthello_bytes, HandshakeCandidate
    from .clienthello import parse_clienthello

    data = bytes(data)
    if data[:1] == b"\x16":
        data = extract_clienthello_bytes(HandshakeCandidate("", data, transport))
    return compute_ja4(parse_clienthello(data, transport))
