from __future__ import annotations

import hashlib
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ja4ml.clienthello import GREASE_VALUES, is_grease
from ja4ml.ja4 import (
    JA4_RE,
    ZERO_HASH,
    cipher_string,
    compute_ja4,
    extension_string,
    fingerprint_bytes,
    ja4_a_component,
)
from ja4ml.wire import alpn_body, build_clienthello, reparse, serialize_clienthello, u16_list_body, wrap_records

from .conftest import published_chrome_hello

PUBLISHED = "t13d1516h2_8daaf6152771_e5627efa2ab1"
PUBLISHED_CIPHERS = "002f,0035,009c,009d,1301,1302,1303,c013,c014,c02b,c02c,c02f,c030,cca8,cca9"
PUBLISHED_EXTS = "0005,000a,000b,000d,0012,0015,0017,001b,0023,002b,002d,0033,4469,ff01_0403,0804,0401,0503,0805,0501,0806,0601"


def test_published_vector_intermediate_strings():
    h = published_chrome_hello()
    assert cipher_string(h) == PUBLISHED_CIPHERS
    assert extension_string(h) == PUBLISHED_EXTS
    assert hashlib.sha256(PUBLISHED_CIPHERS.encode()).hexdigest()[:12] == "8daaf6152771"
    assert hashlib.sha256(PUBLISHED_EXTS.encode()).hexdigest()[:12] == "e5627efa2ab1"


def test_published_vector():
    assert compute_ja4(published_chrome_hello()).full == PUBLISHED


def test_published_vector_from_record_bytes():
    record = wrap_records(serialize_clienthello(published_chrome_hello()))
    assert fingerprint_bytes(record).full == PUBLISHED


def test_minimal_hello_zero_fill():
    h = build_clienthello([0x1301])
    fp = compute_ja4(h)
    assert fp.ja4_a == "t12i010000"
    assert fp.ja4_c == ZERO_HASH
    assert fp.ja4_b == hashlib.sha256(b"1301").hexdigest()[:12]


def test_no_ciphers_zero_hash():
    assert compute_ja4(build_clienthello([])).ja4_b == ZERO_HASH


def test_quic_minimal():
    h = build_clienthello([0x1301], [(0x002B, u16_list_body([0x0304], 1))], transport="udp-quic")
    assert ja4_a_component(h) == "q13i010100"


def test_counts_cap_at_99():
    ciphers = list(range(0x0100, 0x0100 + 120))
    exts = [(0x5000 + i, b"") for i in range(105)]
    assert ja4_a_component(build_clienthello(ciphers, exts))[4:8] == "9999"


@pytest.mark.parametrize(
    "protocols,code",
    [
        ([b"h2"], "h2"),
        ([b"http/1.1", b"h2"], "h1"),
        ([b"h3"], "h3"),
        ([b"x"], "xx"),
        ([b"\xabcd"], "a4"),  # non-alphanumeric first byte: hex digits
        ([b"ab\x01"], "61"),
    ],
)
def test_alpn_code(protocols, code):
    h = build_clienthello([0x1301], [(0x0010, alpn_body(protocols))])
    assert ja4_a_component(h)[8:] == code


def test_tls_version_from_supported_versions_ignores_grease():
    h = build_clienthello([0x1301], [(0x002B, u16_list_body([0xFAFA, 0x0303, 0x0304], 1))], legacy_version=0x0303)
    assert ja4_a_component(h)[1:3] == "13"


def test_sni_flag_tracks_extension_presence():
    with_sni = published_chrome_hello()
    without = published_chrome_hello(sni=None)
    a1, a2 = compute_ja4(with_sni).ja4_a, compute_ja4(without).ja4_a
    assert a1[3] == "d" and a2[3] == "i"
    assert int(a2[6:8]) == int(a1[6:8]) - 1
    # ja4_b and ja4_c ignore SNI entirely.
    assert compute_ja4(with_sni).ja4_b == compute_ja4(without).ja4_b
    assert compute_ja4(with_sni).ja4_c == compute_ja4(without).ja4_c


def test_sni_text_change_is_invisible():
    assert compute_ja4(published_chrome_hello(sni="a.example")) == compute_ja4(published_chrome_hello(sni="zzz.test"))


def test_signature_algorithm_order_matters():
    h = published_chrome_hello()
    exts = [(t, u16_list_body(list(reversed(h.signature_algorithms))) if t == 0x000D else b) for t, b in h.extensions]
    swapped = reparse(h, extensions=tuple(exts))
    assert compute_ja4(swapped).ja4_c != compute_ja4(h).ja4_c
    assert compute_ja4(swapped).ja4_a == compute_ja4(h).ja4_a


def test_extension_order_is_invisible():
    h = published_chrome_hello()
    rng = random.Random(5)
    exts = list(h.extensions)
    rng.shuffle(exts)
    assert compute_ja4(reparse(h, extensions=tuple(exts))) == compute_ja4(h)


def test_output_matches_documented_shape():
    assert JA4_RE.match(compute_ja4(published_chrome_hello()).full)


# -- property-based invariances ------------------------------------------------------------

grease = st.sampled_from(sorted(GREASE_VALUES))


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_grease_insertion_invariance(data):
    h = published_chrome_hello()
    ciphers = list(h.cipher_suites)
    exts = list(h.extensions)
    for _ in range(data.draw(st.integers(1, 4))):
        ciphers.insert(data.draw(st.integers(0, len(ciphers))), data.draw(grease))
    for _ in range(data.draw(st.integers(0, 3))):
        exts.insert(data.draw(st.integers(0, len(exts))), (data.draw(grease), data.draw(st.binary(max_size=2))))
    sigs = [data.draw(grease)] + list(h.signature_algorithms)
    exts = [(t, u16_list_body(sigs)) if t == 0x000D else (t, b) for t, b in exts]
    mutated = reparse(h, cipher_suites=tuple(ciphers), extensions=tuple(exts))
    assert compute_ja4(mutated) == compute_ja4(h)


@settings(max_examples=200, deadline=None)
@given(st.permutations(list(range(15))))
def test_cipher_permutation_invariance(order):
    h = published_chrome_hello()
    permuted = reparse(h, cipher_suites=tuple(h.cipher_suites[i] for i in order))
    assert compute_ja4(permuted) == compute_ja4(h)


@settings(max_examples=200, deadline=None)
@given(st.from_regex(r"[a-z0-9-]{1,20}(\.[a-z0-9-]{1,20}){0,3}", fullmatch=True))
def test_sni_text_invariance(host):
    assert compute_ja4(published_chrome_hello(sni=host)).full == PUBLISHED


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 0xFFFF), max_size=30), st.lists(st.integers(0, 0xFFFF), max_size=20))
def test_counts_exclude_grease(ciphers, ext_types):
    exts = [(t, b"") for t in ext_types if t not in (0x0000, 0x000D, 0x0010, 0x002B)]
    a = ja4_a_component(build_clienthello(ciphers, exts))
    assert int(a[4:6]) == min(99, sum(not is_grease(c) for c in ciphers))
    assert int(a[6:8]) == min(99, sum(not is_grease(t) for t, _ in exts))
