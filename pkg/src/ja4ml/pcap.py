"""Classic libpcap reading and ClientHello candidate extraction.

Only the first client-to-server TLS handshake record of each TCP connection is
kept. Segments that directly follow it in sequence space are appended until the
handshake message is complete, which covers ClientHellos larger than one MSS.
Out-of-order delivery, retransmissions and pcapng are not handled.
"""

from __future__ import annotations

import hashlib
import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterator

PCAP_MAGICS = {
    0xA1B2C3D4: ("<", False),
    0xA1B23C4D: ("<", True),
    0xD4C3B2A1: (">", False),
    0x4D3CB2A1: (">", True),
}
PCAPNG_MAGIC = 0x0A0D0D0A

LINKTYPE_ETHERNET = 1
LINKTYPE_RAW = 101
LINKTYPE_LINUX_SLL = 113
SUPPORTED_LINKTYPES = (LINKTYPE_ETHERNET, LINKTYPE_RAW, LINKTYPE_LINUX_SLL)

ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_IPV6 = 0x86DD
ETHERTYPE_VLAN = (0x8100, 0x88A8)

TLS_HANDSHAKE = 0x16
HANDSHAKE_CLIENT_HELLO = 0x01


class CaptureError(ValueError):
    """Unreadable or unsupported capture input."""


class HandshakeError(ValueError):
    """A candidate does not carry a complete ClientHello."""


@dataclass(frozen=True)
class CaptureSource:
    kind: str  # "pcap-file" | "hex-string" | "raw-bytes"
    origin: str | bytes
    link_type: int | None = None
    transport: str = "tcp"

    @classmethod
    def from_path(cls, path: str | Path) -> CaptureSource:
        return cls("pcap-file", str(path))

    @classmethod
    def from_hex(cls, text: str, transport: str = "tcp") -> CaptureSource:
        return cls("hex-string", text, transport=transport)

    @classmethod
    def from_bytes(cls, data: bytes, transport: str = "tcp") -> CaptureSource:
        return cls("raw-bytes", bytes(data), transport=transport)


@dataclass(frozen=True)
class HandshakeCandidate:
    flow_id: str
    payload: bytes
    transport: str = "tcp"
    flow: tuple = ()


def decode_hex(text: str) -> bytes:
    cleaned = re.sub(r"\s+", "", text)
    if cleaned[:2].lower() == "0x":
        cleaned = cleaned[2:]
    if len(cleaned) % 2:
        raise CaptureError(f"hex input has odd length {len(cleaned)}")
    try:
        return bytes.fromhex(cleaned)
    except ValueError as exc:
        raise CaptureError(f"invalid hex input: {exc}") from None


def flow_digest(src: str, dst: str, sport: int, dport: int, transport: str) -> str:
    key = f"{src}|{dst}|{sport}|{dport}|{transport}".encode()
    return hashlib.sha256(key).hexdigest()[:16]


# -- pcap records --------------------------------------------------------------


@dataclass(frozen=True)
class PcapRecord:
    offset: int
    ts_sec: int
    ts_frac: int
    orig_len: int
    data: bytes


def read_pcap_header(fh: BinaryIO) -> tuple[str, bool, int, int]:
    """Return ``(endian, nanosecond, snaplen, link_type)``."""
    header = fh.read(24)
    if len(header) < 4:
        raise CaptureError("file too short for a pcap global header")
    (magic,) = struct.unpack("<I", header[:4])
    if magic == PCAPNG_MAGIC:
        raise CaptureError("pcapng files are not supported; convert with `editcap -F pcap`")
    if magic not in PCAP_MAGICS:
        raise CaptureError(f"bad pcap magic {magic:#010x}")
    if len(header) < 24:
        raise CaptureError("truncated pcap global header (offset 0)")
    endian, nano = PCAP_MAGICS[magic]
    _, major, minor, _, _, snaplen, network = struct.unpack(endian + "IHHiIII", header)
    return endian, nano, snaplen, network & 0x0FFFFFFF


def iter_pcap_records(fh: BinaryIO, endian: str) -> Iterator[PcapRecord]:
    offset = 24
    fmt = endian + "IIII"
    while True:
        head = fh.read(16)
        if not head:
            return
        if len(head) < 16:
            raise CaptureError(f"truncated pcap record header at byte offset {offset}")
        ts_sec, ts_frac, incl_len, orig_len = struct.unpack(fmt, head)
        data = fh.read(incl_len)
        if len(data) < incl_len:
            raise CaptureError(
                f"truncated pcap record at byte offset {offset}: "
                f"expected {incl_len} bytes, got {len(data)}"
            )
        yield PcapRecord(offset, ts_sec, ts_frac, orig_len, data)
        offset += 16 + incl_len


# -- link / network / transport decoding --------------------------------------


@dataclass(frozen=True)
class Segment:
    src: str
    dst: str
    sport: int
    dport: int
    proto: str  # "tcp" | "udp"
    seq: int
    flags: int
    payload: bytes


def _ip_payload(frame: bytes, link_type: int) -> tuple[int, bytes] | None:
    """Strip the link layer; return ``(ethertype, ip_packet)``."""
    if link_type == LINKTYPE_ETHERNET:
        if len(frame) < 14:
            return None
        pos = 12
        (ethertype,) = struct.unpack_from("!H", frame, pos)
        pos += 2
        while ethertype in ETHERTYPE_VLAN and len(frame) >= pos + 4:
            (ethertype,) = struct.unpack_from("!H", frame, pos + 2)
            pos += 4
        return ethertype, frame[pos:]
    if link_type == LINKTYPE_LINUX_SLL:
        if len(frame) < 16:
            return None
        (ethertype,) = struct.unpack_from("!H", frame, 14)
        return ethertype, frame[16:]
    if link_type == LINKTYPE_RAW:
        if not frame:
            return None
        version = frame[0] >> 4
        return (ETHERTYPE_IPV4 if version == 4 else ETHERTYPE_IPV6 if version == 6 else 0), frame
    raise CaptureError(f"unsupported link type {link_type}")


_IPV6_EXT_HEADERS = {0, 43, 60}


def decode_segment(frame: bytes, link_type: int) -> Segment | None:
    """Decode a frame down to TCP/UDP; ``None`` for anything else."""
    stripped = _ip_payload(frame, link_type)
    if stripped is None:
        return None
    ethertype, ip = stripped
    if ethertype == ETHERTYPE_IPV4:
        if len(ip) < 20 or ip[0] >> 4 != 4:
            return None
        ihl = (ip[0] & 0x0F) * 4
        (total_len,) = struct.unpack_from("!H", ip, 2)
        (frag,) = struct.unpack_from("!H", ip, 6)
        if frag & 0x1FFF:
            return None  # non-first fragment
        proto = ip[9]
        src = ".".join(str(b) for b in ip[12:16])
        dst = ".".join(str(b) for b in ip[16:20])
        body = ip[ihl : total_len if total_len >= ihl else len(ip)]
    elif ethertype == ETHERTYPE_IPV6:
        if len(ip) < 40:
            return None
        (plen,) = struct.unpack_from("!H", ip, 4)
        proto = ip[6]
        src = _ipv6_text(ip[8:24])
        dst = _ipv6_text(ip[24:40])
        body = ip[40 : 40 + plen]
        while proto in _IPV6_EXT_HEADERS and len(body) >= 8:
            proto, ext_len = body[0], (body[1] + 1) * 8
            body = body[ext_len:]
    else:
        return None

    if proto == 6:
        if len(body) < 20:
            return None
        sport, dport, seq, _, off_flags = struct.unpack_from("!HHIIH", body, 0)
        data_off = (off_flags >> 12) * 4
        if data_off < 20 or data_off > len(body):
            return None
        return Segment(src, dst, sport, dport, "tcp", seq, off_flags & 0x1FF, body[data_off:])
    if proto == 17:
        if len(body) < 8:
            return None
        sport, dport = struct.unpack_from("!HH", body, 0)
        return Segment(src, dst, sport, dport, "udp", 0, 0, body[8:])
    return None


def _ipv6_text(raw: bytes) -> str:
    import ipaddress

    return str(ipaddress.IPv6Address(raw))


def _looks_like_tls_handshake(payload: bytes) -> bool:
    return len(payload) >= 3 and payload[0] == TLS_HANDSHAKE and payload[1] == 0x03 and payload[2] <= 0x04


def _needed_length(buf: bytes) -> int | None:
    """Bytes of record stream required to carry the whole first handshake message."""
    records = bytearray()
    pos = 0
    while pos + 5 <= len(buf) and buf[pos] == TLS_HANDSHAKE:
        (rec_len,) = struct.unpack_from("!H", buf, pos + 3)
        end = pos + 5 + rec_len
        records += buf[pos + 5 : min(end, len(buf))]
        if len(records) >= 4:
            hs_len = int.from_bytes(records[1:4], "big")
            if len(records) >= 4 + hs_len:
                return end
        if end > len(buf):
            return None
        pos = end
    return None


# -- candidate streams ---------------------------------------------------------


class _Pending:
    __slots__ = ("flow", "buf", "next_seq")

    def __init__(self, flow: tuple, buf: bytes, next_seq: int):
        self.flow = flow
        self.buf = buf
        self.next_seq = next_seq


def _candidates_from_pcap(path: str) -> Iterator[HandshakeCandidate]:
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise CaptureError(f"cannot read capture {path}: {exc}") from None
    with fh:
        endian, _, _, link_type = read_pcap_header(fh)
        if link_type not in SUPPORTED_LINKTYPES:
            raise CaptureError(f"unsupported link type {link_type}")
        done: set[frozenset] = set()
        pending: dict[tuple, _Pending] = {}
        for record in iter_pcap_records(fh, endian):
            seg = decode_segment(record.data, link_type)
            if seg is None or seg.proto != "tcp":
                continue
            flow = (seg.src, seg.dst, seg.sport, seg.dport)
            conn = frozenset([(seg.src, seg.sport), (seg.dst, seg.dport)])
            if flow in pending:
                p = pending[flow]
                if seg.payload and seg.seq == p.next_seq:
                    p.buf += seg.payload
                    p.next_seq = (p.next_seq + len(seg.payload)) & 0xFFFFFFFF
                    need = _needed_length(p.buf)
                    if need is not None:
                        del pending[flow]
                        yield _make_candidate(flow, p.buf)
                continue
            if conn in done or not seg.payload:
                continue
            if not _looks_like_tls_handshake(seg.payload):
                # First data segment of this direction is not TLS: give up on the flow.
                if seg.flags & 0x02 == 0:
                    done.add(conn)
                continue
            done.add(conn)
            need = _needed_length(seg.payload)
            if need is not None:
                yield _make_candidate(flow, seg.payload)
            else:
                next_seq = (seg.seq + len(seg.payload)) & 0xFFFFFFFF
                pending[flow] = _Pending(flow, seg.payload, next_seq)
        # Incomplete hellos are still reported; extraction will flag the truncation.
        for p in pending.values():
            yield _make_candidate(p.flow, p.buf)


def _make_candidate(flow: tuple, payload: bytes) -> HandshakeCandidate:
    src, dst, sport, dport = flow
    return HandshakeCandidate(
        flow_id=flow_digest(src, dst, sport, dport, "tcp"),
        payload=bytes(payload),
        transport="tcp",
        flow=(src, dst, sport, dport, "tcp"),
    )


def open_capture(source: CaptureSource) -> Iterator[HandshakeCandidate]:
    """Yield one handshake candidate per flow found in ``source``."""
    if source.kind == "pcap-file":
        yield from _candidates_from_pcap(str(source.origin))
        return
    if source.kind == "hex-string":
        data = decode_hex(str(source.origin))
    elif source.kind == "raw-bytes":
        data = bytes(source.origin)  # type: ignore[arg-type]
    else:
        raise CaptureError(f"unknown source kind {source.kind!r}")
    if not data:
        return
    flow_id = "inline-" + hashlib.sha256(data).hexdigest()[:10]
    yield HandshakeCandidate(flow_id, data, source.transport, ("inline", "", 0, 0, source.transport))


def extract_clienthello_bytes(candidate: HandshakeCandidate) -> bytes:
    """Return the complete handshake message (type byte onwards) of a candidate.

    TLS record framing is removed and consecutive handshake records are joined.
    Payloads that already start with the handshake type byte (QUIC CRYPTO data,
    inline hex) are accepted as-is after a length check.
    """
    buf = candidate.payload
    if not buf:
        raise HandshakeError("empty payload")
    if buf[0] == TLS_HANDSHAKE:
        if len(buf) > 5 and buf[5] != HANDSHAKE_CLIENT_HELLO:
            raise HandshakeError(f"not a ClientHello: handshake type {buf[5]:#04x}")
        message = bytearray()
        pos = 0
        while True:
            if pos + 5 > len(buf):
                raise HandshakeError(
                    f"truncated: record header at offset {pos} needs 5 bytes, {len(buf) - pos} available"
                )
            if buf[pos] != TLS_HANDSHAKE:
                raise HandshakeError(f"record at offset {pos} has content type {buf[pos]:#04x}, expected 0x16")
            (rec_len,) = struct.unpack_from("!H", buf, pos + 3)
            if pos + 5 + rec_len > len(buf):
                raise HandshakeError(
                    f"truncated: record at offset {pos} declares {rec_len} bytes, "
                    f"{len(buf) - pos - 5} available"
                )
            message += buf[pos + 5 : pos + 5 + rec_len]
            pos += 5 + rec_len
            if message and message[0] != HANDSHAKE_CLIENT_HELLO:
                raise HandshakeError(f"not a ClientHello: handshake type {message[0]:#04x}")
            if len(message) >= 4:
                total = 4 + int.from_bytes(message[1:4], "big")
                if len(message) >= total:
                    return bytes(message[:total])
    if buf[0] != HANDSHAKE_CLIENT_HELLO:
        raise HandshakeError(f"not a ClientHello: handshake type {buf[0]:#04x}")
    if len(buf) < 4:
        raise HandshakeError("truncated: handshake header needs 4 bytes")
    total = 4 + int.from_bytes(buf[1:4], "big")
    if len(buf) < total:
        raise HandshakeError(f"truncated: handshake declares {total} bytes, {len(buf)} available")
    return bytes(buf[:total])
