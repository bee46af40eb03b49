"""Synthetic JA4DB-shaped exports for tests, demos and timing runs.

Records are drawn from a fixed set of client "stacks". Each stack owns a JA4
fingerprint and a bot propensity, so the labels carry the same kind of signal
as the real database: the fingerprint identifies the TLS library, and bots
favour scripted libraries. Nothing here is meant to reproduce real counts.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .prng import SplitMix64, derive_seed

_OSES = ("Windows", "Mac OS X", "Linux", "Android", "iOS", "")
_DEVICES = ("Desktop", "Mobile", "Server", "")


@dataclass(frozen=True)
class Stack:
    ja4: str
    bot_rate: float
    library: str


def _hash12(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def make_stacks(n_stacks: int = 60, seed: int = 1) -> list[Stack]:
    rng = SplitMix64(derive_seed(seed, 0xA11))
    stacks = []
    for i in range(n_stacks):
        scripted = rng.next_float() < 0.35
        proto = "q" if rng.next_float() < 0.05 else "t"
        version = "12" if scripted and rng.next_float() < 0.4 else "13"
        sni = "i" if rng.next_float() < (0.3 if scripted else 0.02) else "d"
        ciphers = 5 + rng.next_below(30) if scripted else 15 + rng.next_below(4)
        exts = 6 + rng.next_below(8) if scripted else 15 + rng.next_below(3)
        alpn = ("00", "h1", "h2")[rng.next_below(3)] if scripted else "h2"
        ja4 = f"{proto}{version}{sni}{ciphers:02d}{exts:02d}{alpn}_{_hash12(f'b{i % (n_stacks // 2 or 1)}')}_{_hash12(f'c{i}')}"
        bot_rate = 0.8 + 0.19 * rng.next_float() if scripted else 0.02 * rng.next_float()
        stacks.append(Stack(ja4, bot_rate, "python-requests" if scripted else "browser"))
    return stacks


def generate(n: int, seed: int = 1, n_stacks: int = 60, good_bot_rate: float = 0.14) -> list[dict]:
    """``n`` JA4DB-style records; a few have no fingerprint, as in real exports."""
    stacks = make_stacks(n_stacks, seed)
    rng = SplitMix64(derive_seed(seed, 0xDA7A))
    out = []
    for i in range(n):
        st = stacks[rng.next_below(len(stacks))]
        u = rng.next_float()
        if u < good_bot_rate:
            app = ("Googlebot", "bingbot", "LinkedInBot")[rng.next_below(3)]
        elif rng.next_float() < st.bot_rate:
            app = f"ScraperBot {rng.next_below(40)}"
        else:
            app = ("Chrome", "Firefox", "Safari", "Edge", "Slack", "")[rng.next_below(6)]
        rec = {
            "application": app or None,
            "library": st.library,
            "device": _DEVICES[rng.next_below(len(_DEVICES))] or None,
            "os": _OSES[rng.next_below(len(_OSES))] or None,
            "user_agent_string": None,
            "certificate_authority": None,
            "observation_count": 1 + rng.next_below(500),
            "verified": rng.next_float() < 0.3,
            "ja4_fingerprint": None if rng.next_float() < 0.01 else st.ja4,
            "notes": f"synthetic {i}",
        }
        out.append(rec)
    return out


def write(path: str | Path, n: int, seed: int = 1) -> None:
    Path(path).write_text(json.dumps(generate(n, seed)) + "\n")


if __name__ == "__main__":
    import argparse

    ap = argparse.ArgumentParser(description="write a synthetic JA4DB-style JSON export")
    ap.add_argument("path")
    ap.add_argument("-n", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=1)
    a = ap.parse_args()
    write(a.path, a.n, a.seed)
