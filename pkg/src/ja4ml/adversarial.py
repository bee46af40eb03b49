"""Executable threat model: which evasion attempts change a JA4 fingerprint.

Each scenario applies one mutation to a stack profile and states whether the
fingerprint must stay the same, change, or equal a target profile. Blind spots
(bit-exact mimicry) are asserted, so a change that starts "detecting" them is
caught as a fingerprint bug rather than celebrated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources

from .clienthello import EXT_SUPPORTED_VERSIONS, GREASE_VALUES, ClientHello, is_grease, parse_clienthello
from .ja4 import compute_ja4
from .pcap import HandshakeCandidate, extract_clienthello_bytes
from .prng import SplitMix64
from .wire import reparse, u16_list_body

MUTATIONS = (
    "rotate_user_agent_metadata",
    "rotate_ip_metadata",
    "permute_grease",
    "reorder_ciphers",
    "swap_tls_stack",
    "bitwise_mimic",
)
EXPECTATIONS = ("fingerprint_unchanged", "fingerprint_changed", "fingerprint_equals_target")


class MutationNotApplicable(Exception):
    pass


@dataclass(frozen=True)
class Observation:
    """A connection as a defender sees it: handshake bytes plus spoofable metadata."""

    hello: ClientHello
    user_agent: str = ""
    src_ip: str = "192.0.2.10"


@dataclass(frozen=True)
class EvasionScenario:
    name: str
    base: str
    mutation: str
    expected: str
    target: str | None = None
    capability_row: str = ""


@dataclass(frozen=True)
class Verdict:
    scenario: EvasionScenario
    status: str  # "pass" | "fail" | "skip"
    before: str = ""
    after: str = ""
    reason: str = ""


def load_profiles() -> dict[str, ClientHello]:
    doc = json.loads(resources.files("ja4ml.data").joinpath("profiles.json").read_text())
    out = {}
    for name, entry in doc["profiles"].items():
        record = bytes.fromhex(entry["record_hex"])
        hs = extract_clienthello_bytes(HandshakeCandidate(name, record))
        out[name] = parse_clienthello(hs)
    return out


def load_scenarios() -> list[EvasionScenario]:
    doc = json.loads(resources.files("ja4ml.data").joinpath("scenarios.json").read_text())
    return [EvasionScenario(**s) for s in doc["scenarios"]]


def _regrease(hello: ClientHello, rng: SplitMix64) -> ClientHello:
    grease = sorted(GREASE_VALUES)

    def swap(code: int) -> int:
        if not is_grease(code):
            return code
        choices = [g for g in grease if g != code]
        return choices[rng.next_below(len(choices))]

    if not any(is_grease(c) for c in hello.cipher_suites + tuple(hello.extension_types) + hello.supported_versions):
        raise MutationNotApplicable("profile carries no GREASE values")
    exts = []
    for t, body in hello.extensions:
        if t == EXT_SUPPORTED_VERSIONS:
            body = u16_list_body([swap(v) for v in hello.supported_versions], length_size=1)
        exts.append((swap(t), body))
    return reparse(hello, cipher_suites=tuple(swap(c) for c in hello.cipher_suites), extensions=tuple(exts))


def _reorder_ciphers(hello: ClientHello, rng: SplitMix64) -> ClientHello:
    ciphers = list(hello.cipher_suites)
    if len(set(ciphers)) < 2:
        raise MutationNotApplicable("fewer than two distinct cipher suites")
    original = list(ciphers)
    while ciphers == original:
        for i in range(len(ciphers) - 1, 0, -1):
            j = rng.next_below(i + 1)
            ciphers[i], ciphers[j] = ciphers[j], ciphers[i]
    return reparse(hello, cipher_suites=tuple(ciphers))


def apply_mutation(obs: Observation, scenario: EvasionScenario, profiles: dict[str, ClientHello], seed: int = 7) -> Observation:
    rng = SplitMix64(seed)
    m = scenario.mutation
    if m == "rotate_user_agent_metadata":
        return replace(obs, user_agent="Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 Chrome/124.0 Safari/537.36")
    if m == "rotate_ip_metadata":
        return replace(obs, src_ip="198.51.100.77")
    if m == "permute_grease":
        return replace(obs, hello=_regrease(obs.hello, rng))
    if m == "reorder_ciphers":
        return replace(obs, hello=_reorder_ciphers(obs.hello, rng))
    if m in ("swap_tls_stack", "bitwise_mimic"):
        if scenario.target is None:
            raise MutationNotApplicable(f"{m} needs a target profile")
        target = profiles[scenario.target]
        if m == "bitwise_mimic":
            return replace(obs, hello=parse_clienthello(_wire(target), target.transport))
        return replace(obs, hello=target)
    raise ValueError(f"unknown mutation {m!r}")


def _wire(hello: ClientHello) -> bytes:
    from .wire import serialize_clienthello

    return serialize_clienthello(hello)


def run_scenario(scenario: EvasionScenario, profiles: dict[str, ClientHello] | None = None) -> Verdict:
    profiles = profiles if profiles is not None else load_profiles()
    base = Observation(profiles[scenario.base], user_agent="python-requests/2.31")
    before = compute_ja4(base.hello).full
    try:
        after_obs = apply_mutation(base, scenario, profiles)
    except MutationNotApplicable as exc:
        return Verdict(scenario, "skip", before, "", str(exc))
    after = compute_ja4(after_obs.hello).full
    if scenario.expected == "fingerprint_unchanged":
        ok = after == before
    elif scenario.expected == "fingerprint_changed":
        ok = after != before
    elif scenario.expected == "fingerprint_equals_target":
        ok = after == compute_ja4(profiles[scenario.target]).full
    else:
        raise ValueError(f"unknown expectation {scenario.expected!r}")
    return Verdict(scenario, "pass" if ok else "fail", before, after)


def run_all(scenarios: list[EvasionScenario] | None = None) -> list[Verdict]:
    profiles = load_profiles()
    return [run_scenario(s, profiles) for s in (scenarios or load_scenarios())]


def tap_lines(verdicts: list[Verdict]) -> list[str]:
    lines = [f"1..{len(verdicts)}"]
    for i, v in enumerate(verdicts, 1):
        s = v.scenario
        detail = f"{s.mutation} on {s.base}: {s.expected} [{s.capability_row}] before={v.before} after={v.after}"
        if v.status == "skip":
            lines.append(f"ok {i} - {s.name} # SKIP {v.reason}")
        elif v.status == "pass":
            lines.append(f"ok {i} - {s.name} # {detail}")
        else:
            lines.append(f"not ok {i} - {s.name} # {detail}")
    return lines
