from __future__ import annotations

import json
from pathlib import Path

import pytest

from ja4ml.wire import alpn_body, build_clienthello, sni_body, u16_list_body

CAPTURES = Path(__file__).parent / "data" / "captures"


@pytest.fixture(scope="session")
def expected_ja4() -> dict:
    return json.loads((CAPTURES / "expected_ja4.json").read_text())


def published_chrome_hello(sni: str | None = "example.com", extra_exts=(), ciphers=None):
    """Hello whose cipher/extension/sig-alg lists equal the widely published JA4 example."""
    ciphers = ciphers or [0x1301, 0x1302, 0x1303, 0xC02B, 0xC02F, 0xC02C, 0xC030, 0xCCA9, 0xCCA8,
                          0xC013, 0xC014, 0x009C, 0x009D, 0x002F, 0x0035]
    sigs = [0x0403, 0x0804, 0x0401, 0x0503, 0x0805, 0x0501, 0x0806, 0x0601]
    exts = []
    if sni is not None:
        exts.append((0x0000, sni_body(sni)))
    exts += [
        (0x0017, b""), (0xFF01, b"\x00"), (0x000A, u16_list_body([0x001D, 0x0017, 0x0018])),
        (0x000B, b"\x01\x00"), (0x0023, b""), (0x0010, alpn_body([b"h2", b"http/1.1"])),
        (0x0005, b"\x01\x00\x00\x00\x00"), (0x000D, u16_list_body(sigs)), (0x0012, b""),
        (0x0033, b"\x00\x00"), (0x002D, b"\x01\x01"), (0x002B, u16_list_body([0x0304, 0x0303], 1)),
        (0x001B, b"\x02\x00\x02"), (0x4469, b"\x00\x03\x02h2"), (0x0015, b"\x00\x00"),
    ]
    exts += list(extra_exts)
    return build_clienthello(ciphers, exts)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
