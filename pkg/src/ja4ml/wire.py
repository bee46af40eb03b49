"""ClientHello serialization, used by the adversarial harness and the tests.

Extension bodies are written back verbatim, so ``serialize(parse(b)) == b``.
Interpreted fields (``sni_hostname``, ``alpn_protocols`` ...) are *not* re-encoded;
use the ``*_body`` helpers and ``replace_extension`` to change them.
"""

from __future__ import annotations

import struct
from dataclasses import replace

from .clienthello import ClientHello, parse_clienthello


def serialize_clienthello(hello: ClientHello) -> bytes:
    body = struct.pack("!H", hello.legacy_version) + hello.random
    body += bytes([len(hello.session_id)]) + hello.session_id
    ciphers = b"".join(struct.pack("!H", c) for c in hello.cipher_suites)
    body += struct.pack("!H", len(ciphers)) + ciphers
    body += bytes([len(hello.compression_methods)]) + hello.compression_methods
    if hello.extensions or hello.has_extension_block:
        exts = b"".join(struct.pack("!HH", t, len(b)) + b for t, b in hello.extensions)
        body += struct.pack("!H", len(exts)) + exts
    return b"\x01" + len(body).to_bytes(3, "big") + body


def wrap_records(handshake: bytes, record_version: int = 0x0301, max_fragment: int = 16384) -> bytes:
    out = b""
    for off in range(0, len(handshake), max_fragment):
        chunk = handshake[off : off + max_fragment]
        out += struct.pack("!BHH", 0x16, record_version, len(chunk)) + chunk
    return out


def sni_body(hostname: str) -> bytes:
    name = hostname.encode("ascii")
    entry = b"\x00" + struct.pack("!H", len(name)) + name
    return struct.pack("!H", len(entry)) + entry


def alpn_body(protocols: list[bytes]) -> bytes:
    entries = b"".join(bytes([len(p)]) + p for p in protocols)
    return struct.pack("!H", len(entries)) + entries


def u16_list_body(values, length_size: int = 2) -> bytes:
    data = b"".join(struct.pack("!H", v) for v in values)
    prefix = bytes([len(data)]) if length_size == 1 else struct.pack("!H", len(data))
    return prefix + data


def build_clienthello(
    ciphers,
    extensions=(),
    legacy_version: int = 0x0303,
    transport: str = "tcp",
    session_id: bytes = b"",
) -> ClientHello:
    """Encode then decode, so every interpreted field is consistent with the wire."""
    draft = ClientHello(
        legacy_version=legacy_version,
        cipher_suites=tuple(ciphers),
        extensions=tuple((t, bytes(b)) for t, b in extensions),
        transport=transport,
        session_id=session_id,
    )
    return parse_clienthello(serialize_clienthello(draft), transport)


def reparse(hello: ClientHello, **changes) -> ClientHello:
    """Apply field changes to the wire form and decode again."""
    return parse_clienthello(serialize_clienthello(replace(hello, **changes)), hello.transport)
