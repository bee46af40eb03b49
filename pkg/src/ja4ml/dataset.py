"""JA4DB ingestion, bot labeling and the seeded 80/20 split."""

from __future__ import annotations

import csv
import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .features import CSV_HEADER, FeatureVector, MalformedJa4, record_to_row, row_to_record
from .prng import permutation

DEFAULT_GOOD_BOTS = ("googlebot", "bingbot", "linkedinbot")
DEFAULT_SEED = 42

GOOD_BOT = "good_bot_excluded"
BAD_BOT = "bad_bot"
BENIGN = "benign"

KNOWN_FIELDS = (
    "application",
    "library",
    "device",
    "os",
    "user_agent_string",
    "certificate_authority",
    "observation_count",
    "verified",
    "ja4_fingerprint",
)

# Composition of the snapshot used in the original study.
REFERENCE_COUNTS = {"total": 227_404, BAD_BOT: 50_212, BENIGN: 148_610, GOOD_BOT: 32_007}


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Ja4dbRecord:
    application: str | None = None
    library: str | None = None
    device: str | None = None
    os: str | None = None
    user_agent_string: str | None = None
    certificate_authority: str | None = None
    observation_count: int | None = None
    verified: bool | None = None
    ja4_fingerprint: str | None = None
    extra: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_json(cls, obj: dict) -> Ja4dbRecord:
        known = {k: obj.get(k) for k in KNOWN_FIELDS}
        extra = {k: v for k, v in obj.items() if k not in KNOWN_FIELDS}
        known["observation_count"] = _as_int(known["observation_count"])
        known["verified"] = _as_bool(known["verified"])
        return cls(**known, extra=extra)


def _as_int(v) -> int | None:
    if v is None or v == "":
        return None
    try:
        return max(0, int(v))
    except (TypeError, ValueError):
        return None


def _as_bool(v) -> bool | None:
    if v is None:
        return None
    if isinstance(v, str):
        return v.strip().lower() in ("1", "true", "yes")
    return bool(v)


def label_record(rec: Ja4dbRecord, good_bots: Sequence[str] = DEFAULT_GOOD_BOTS) -> str:
    app = (rec.application or "").lower()
    ua = (rec.user_agent_string or "").lower()
    for ident in good_bots:
        ident = ident.lower()
        if ident in app or ident in ua:
            return GOOD_BOT
    if "bot" in app:
        return BAD_BOT
    return BENIGN


@dataclass(frozen=True)
class LabeledRecord:
    features: FeatureVector
    label: str
    source_index: int

    @property
    def y(self) -> int:
        return 1 if self.label == BAD_BOT else 0


def ingest_records(
    objs: Iterable[dict], good_bots: Sequence[str] = DEFAULT_GOOD_BOTS
) -> tuple[list[LabeledRecord], dict]:
    labeled: list[LabeledRecord] = []
    by_label: Counter = Counter()
    modeled: Counter = Counter()
    missing = malformed = 0
    total = 0
    for idx, obj in enumerate(objs):
        total += 1
        if not isinstance(obj, dict):
            malformed += 1
            continue
        rec = Ja4dbRecord.from_json(obj)
        label = label_record(rec, good_bots)
        by_label[label] += 1
        if label == GOOD_BOT:
            continue
        if not rec.ja4_fingerprint:
            missing += 1
            continue
        try:
            fv = FeatureVector.from_ja4(
                rec.ja4_fingerprint,
                application=rec.application,
                os=rec.os,
                device=rec.device,
                verified=bool(rec.verified),
                observation_count=rec.observation_count or 0,
            )
        except MalformedJa4:
            malformed += 1
            continue
        labeled.append(LabeledRecord(fv, label, idx))
        modeled[label] += 1

    def pct(n: int) -> float:
        return round(100.0 * n / total, 2) if total else 0.0

    stats = {
        "total_records": total,
        GOOD_BOT: by_label[GOOD_BOT],
        BAD_BOT: by_label[BAD_BOT],
        BENIGN: by_label[BENIGN],
        "percent": {GOOD_BOT: pct(by_label[GOOD_BOT]), BAD_BOT: pct(by_label[BAD_BOT]), BENIGN: pct(by_label[BENIGN])},
        "missing_fingerprint": missing,
        "malformed_fingerprint": malformed,
        "modeled": {"total": len(labeled), BAD_BOT: modeled[BAD_BOT], BENIGN: modeled[BENIGN]},
        "good_bot_identifiers": [g.lower() for g in good_bots],
    }
    return labeled, stats


def ingest(path: str | Path, good_bots: Sequence[str] = DEFAULT_GOOD_BOTS) -> tuple[list[LabeledRecord], dict]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path} is not valid JSON: {exc}") from None
    if not isinstance(doc, list):
        raise DatasetError(f"{path}: expected a JSON array at the root, got {type(doc).__name__}")
    return ingest_records(doc, good_bots)


def reference_comparison(stats: dict) -> list[dict]:
    ours = {"total": stats["total_records"], BAD_BOT: stats[BAD_BOT], BENIGN: stats[BENIGN], GOOD_BOT: stats[GOOD_BOT]}
    return [
        {"quantity": k, "observed": ours[k], "reference": REFERENCE_COUNTS[k], "delta": ours[k] - REFERENCE_COUNTS[k]}
        for k in ("total", BAD_BOT, BENIGN, GOOD_BOT)
    ]


# -- split ----------------------------------------------------------------------


@dataclass(frozen=True)
class SplitManifest:
    seed: int
    n: int
    ratio: float
    train_indices: list[int]
    test_indices: list[int]

    def digest(self) -> str:
        body = json.dumps([self.seed, self.n, self.ratio, self.train_indices, self.test_indices], separators=(",", ":"))
        return hashlib.sha256(body.encode()).hexdigest()

    def to_json(self) -> dict:
        return {
            "version": 1,
            "prng": "splitmix64/fisher-yates",
            "seed": self.seed,
            "n": self.n,
            "ratio": self.ratio,
            "digest": self.digest(),
            "train_indices": self.train_indices,
            "test_indices": self.test_indices,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), separators=(",", ":")) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> SplitManifest:
        doc = json.loads(Path(path).read_text())
        m = cls(doc["seed"], doc["n"], doc["ratio"], doc["train_indices"], doc["test_indices"])
        if doc.get("digest") and doc["digest"] != m.digest():
            raise DatasetError(f"{path}: manifest digest mismatch")
        return m


def n_test_rows(n: int, ratio: float) -> int:
    """``round((1 - ratio) * n)`` with halves rounded up, computed exactly."""
    frac = (1 - Fraction(str(ratio))) * n
    return int(frac + Fraction(1, 2))


def split(n_or_records, seed: int = DEFAULT_SEED, ratio: float = 0.8) -> SplitManifest:
    n = n_or_records if isinstance(n_or_records, int) else len(n_or_records)
    if n < 2:
        raise DatasetError(f"need at least 2 records to split, got {n}")
    if not 0 < ratio < 1:
        raise DatasetError(f"ratio must be in (0, 1), got {ratio}")
    perm = permutation(n, seed)
    n_test = n_test_rows(n, ratio)
    n_train = n - n_test
    return SplitManifest(seed, n, ratio, sorted(perm[:n_train]), sorted(perm[n_train:]))


def class_balance(labeled: Sequence[LabeledRecord], manifest: SplitManifest) -> dict:
    out = {}
    for name, idx in (("train", manifest.train_indices), ("test", manifest.test_indices)):
        bad = sum(labeled[i].y for i in idx)
        out[name] = {"rows": len(idx), BAD_BOT: bad, BENIGN: len(idx) - bad, "bad_bot_fraction": bad / len(idx) if idx else 0.0}
    return out


# -- persistence ------------------------------------------------------------------


def write_dataset_csv(labeled: Sequence[LabeledRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in labeled:
            w.writerow(record_to_row(r.source_index, r.label, r.features))


def read_dataset_csv(path: str | Path) -> list[LabeledRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise DatasetError(f"{path}: unexpected header {reader.fieldnames}")
        out = []
        for row in reader:
            idx, label, fv = row_to_record(row)
            out.append(LabeledRecord(fv, label, idx))
    return out


class DatasetView:
    """Row access wrapper that records which positions have been read."""

    def __init__(self, records: Sequence[LabeledRecord]):
        self._records = records
        self.accessed: set[int] = set()

    def __len__(self) -> int:
        return len(self._records)

    def take(self, indices: Iterable[int]) -> list[LabeledRecord]:
        out = []
        for i in indices:
            self.accessed.add(i)
            out.append(self._records[i])
        return out
