"""Decoding of TLS ClientHello handshake messages.

Only the fields that matter for client fingerprinting are interpreted; every
other extension is kept as an opaque ``(type, body)`` pair in wire order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

TRANSPORTS = ("tcp", "udp-quic")

EXT_SERVER_NAME = 0x0000
EXT_SIGNATURE_ALGORITHMS = 0x000D
EXT_ALPN = 0x0010
EXT_SUPPORTED_VERSIONS = 0x002B

# RFC 8701 reserved values: 0x0a0a, 0x1a1a, ... 0xfafa.
GREASE_VALUES = frozenset(((n << 4) | 0xA) * 0x0101 for n in range(16))


def is_grease(code: int) -> bool:
    return code in GREASE_VALUES


class ClientHelloError(ValueError):
    """Malformed ClientHello. ``field`` and ``offset`` locate the problem."""

    def __init__(self, message: str, field: str, offset: int):
        super().__init__(f"{message} (field={field}, offset={offset})")
        self.reason = message
        self.field = field
        self.offset = offset


@dataclass(frozen=True)
class ClientHello:
    legacy_version: int
    cipher_suites: tuple[int, ...]
    extensions: tuple[tuple[int, bytes], ...]
    sni_hostname: str | None = None
    alpn_protocols: tuple[bytes, ...] = ()
    signature_algorithms: tuple[int, ...] = ()
    supported_versions: tuple[int, ...] = ()
    transport: str = "tcp"
    random: bytes = bytes(32)
    session_id: bytes = b""
    compression_methods: bytes = b"\x00"
    # False when the message ends right after compression_methods (no extension block at all).
    has_extension_block: bool = field(default=True, compare=False)

    @property
    def extension_types(self) -> list[int]:
        return [ext_type for ext_type, _ in self.extensions]

    def has_extension(self, ext_type: int) -> bool:
        return any(t == ext_type for t, _ in self.extensions)


class _Reader:
    def __init__(self, data: bytes, base: int, end: int):
        self.data = data
        self.pos = base
        self.end = end

    def need(self, n: int, name: str) -> None:
        if self.pos + n > self.end:
            raise ClientHelloError(
                f"{name} needs {n} bytes but only {self.end - self.pos} remain",
                name,
                self.pos,
            )

    def u8(self, name: str) -> int:
        self.need(1, name)
        value = self.data[self.pos]
        self.pos += 1
        return value

    def u16(self, name: str) -> int:
        self.need(2, name)
        (value,) = struct.unpack_from("!H", self.data, self.pos)
        self.pos += 2
        return value

    def u24(self, name: str) -> int:
        self.need(3, name)
        hi, lo = struct.unpack_from("!BH", self.data, self.pos)
        self.pos += 3
        return (hi << 16) | lo

    def take(self, n: int, name: str) -> bytes:
        self.need(n, name)
        chunk = bytes(self.data[self.pos : self.pos + n])
        self.pos += n
        return chunk

    def sub(self, n: int, name: str) -> _Reader:
        self.need(n, name)
        reader = _Reader(self.data, self.pos, self.pos + n)
        self.pos += n
        return reader

    def done(self, name: str) -> None:
        if self.pos != self.end:
            raise ClientHelloError(
                f"{self.end - self.pos} unparsed trailing bytes", name, self.pos
            )


def _parse_u16_list(body: bytes, offset: int, name: str, length_size: int) -> list[int]:
    r = _Reader(body, 0, len(body))
    n = r.u8(name) if length_size == 1 else r.u16(name)
    if n % 2:
        raise ClientHelloError(f"odd list length {n}", name, offset)
    items = r.sub(n, name)
    r.done(name)
    return [items.u16(name) for _ in range(n // 2)]


def _parse_sni(body: bytes) -> str | None:
    if not body:
        return None
    r = _Reader(body, 0, len(body))
    entries = r.sub(r.u16("server_name_list"), "server_name_list")
    r.done("server_name")
    hostname = None
    while entries.pos < entries.end:
        name_type = entries.u8("server_name.type")
        name = entries.take(entries.u16("server_name.length"), "server_name.host_name")
        if name_type == 0 and hostname is None:
            hostname = name.decode("ascii", errors="replace")
    return hostname


def _parse_alpn(body: bytes) -> list[bytes]:
    r = _Reader(body, 0, len(body))
    entries = r.sub(r.u16("alpn.list_length"), "alpn.list")
    r.done("alpn")
    protocols = []
    while entries.pos < entries.end:
        protocols.append(entries.take(entries.u8("alpn.protocol_length"), "alpn.protocol"))
    return protocols


def parse_clienthello(data: bytes, transport: str = "tcp") -> ClientHello:
    """Decode one handshake message starting at the ``0x01`` type byte.

    The buffer must hold exactly the declared handshake length; shortfalls and
    surplus bytes both raise :class:`ClientHelloError`.
    """
    if transport not in TRANSPORTS:
        raise ValueError(f"unknown transport {transport!r}")
    data = bytes(data)
    top = _Reader(data, 0, len(data))
    msg_type = top.u8("handshake.type")
    if msg_type != 0x01:
        raise ClientHelloError(f"handshake type {msg_type:#04x} is not a ClientHello", "handshake.type", 0)
    length = top.u24("handshake.length")
    r = top.sub(length, "handshake.body")
    top.done("handshake")

    legacy_version = r.u16("legacy_version")
    random = r.take(32, "random")
    sid_len = r.u8("session_id.length")
    if sid_len > 32:
        raise ClientHelloError(f"session id length {sid_len} exceeds 32", "session_id.length", r.pos - 1)
    session_id = r.take(sid_len, "session_id")
    cs_len = r.u16("cipher_suites.length")
    if cs_len % 2:
        raise ClientHelloError(f"odd cipher suite length {cs_len}", "cipher_suites.length", r.pos - 2)
    cs = r.sub(cs_len, "cipher_suites")
    ciphers = tuple(cs.u16("cipher_suites") for _ in range(cs_len // 2))
    comp_len = r.u8("compression_methods.length")
    if comp_len < 1:
        raise ClientHelloError("empty compression method list", "compression_methods.length", r.pos - 1)
    compression = r.take(comp_len, "compression_methods")

    extensions: list[tuple[int, bytes]] = []
    sni = None
    alpn: list[bytes] = []
    sig_algs: list[int] = []
    versions: list[int] = []
    has_block = r.pos < r.end
    if has_block:
        ext_block = r.sub(r.u16("extensions.length"), "extensions")
        while ext_block.pos < ext_block.end:
            ext_type = ext_block.u16("extension.type")
            ext_len = ext_block.u16("extension.length")
            body_offset = ext_block.pos
            body = ext_block.take(ext_len, f"extension[{ext_type:#06x}].body")
            extensions.append((ext_type, body))
            try:
                if ext_type == EXT_SERVER_NAME and sni is None:
                    sni = _parse_sni(body)
                elif ext_type == EXT_ALPN and not alpn:
                    alpn = _parse_alpn(body)
                elif ext_type == EXT_SIGNATURE_ALGORITHMS and not sig_algs:
                    sig_algs = _parse_u16_list(body, 0, "signature_algorithms", 2)
                elif ext_type == EXT_SUPPORTED_VERSIONS and not versions:
                    versions = _parse_u16_list(body, 0, "supported_versions", 1)
            except ClientHelloError as exc:
                raise ClientHelloError(
                    f"malformed extension {ext_type:#06x}: {exc.reason}", exc.field, body_offset + exc.offset
                ) from None
    r.done("clienthello")

    return ClientHello(
        legacy_version=legacy_version,
        cipher_suites=ciphers,
        extensions=tuple(extensions),
        sni_hostname=sni,
        alpn_protocols=tuple(alpn),
        signature_algorithms=tuple(sig_algs),
        supported_versions=tuple(versions),
        transport=transport,
        random=random,
        session_id=session_id,
        compression_methods=compression,
        has_extension_block=has_block,
    )
