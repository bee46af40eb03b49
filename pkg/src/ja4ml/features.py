"""Model features derived from JA4 strings and JA4DB metadata.

Encoded column order (``feature_columns()``)::

    protocol, tls_version, sni_flag, cipher_count, ext_count, alpn_code,
    ja4_b, ja4_c, [application], os, device, verified, observation_count

``application`` is only present with ``include_application=True``.
Categorical columns hold integer codes: 1..K for values seen during fitting,
0 for unseen or missing values.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, fields
from pathlib import Path

MISSING = ""

_JA4_A_RE = re.compile(r"^([tqd])([0-9a-z]{2})([di])(\d{2})(\d{2})(.{2})$")
_HASH_RE = re.compile(r"^[0-9a-f]{12}$")

CATEGORICAL = ["protocol", "tls_version", "sni_flag", "alpn_code", "ja4_b", "ja4_c", "application", "os", "device"]
NUMERIC = ["cipher_count", "ext_count", "verified", "observation_count"]


def feature_columns(include_application: bool = False) -> list[str]:
    cols = ["protocol", "tls_version", "sni_flag", "cipher_count", "ext_count", "alpn_code", "ja4_b", "ja4_c"]
    if include_application:
        cols.append("application")
    return cols + ["os", "device", "verified", "observation_count"]


def categorical_columns(include_application: bool = False) -> list[str]:
    return [c for c in feature_columns(include_application) if c in CATEGORICAL]


class MalformedJa4(ValueError):
    pass


@dataclass(frozen=True)
class Ja4Parts:
    protocol: str
    tls_version: str
    sni_flag: str
    cipher_count: int
    ext_count: int
    alpn_code: str
    ja4_b: str
    ja4_c: str


def parse_ja4_string(text: str) -> Ja4Parts:
    parts = text.strip().split("_")
    if len(parts) != 3:
        raise MalformedJa4(f"expected 3 underscore-separated parts, got {len(parts)}: {text!r}")
    a, b, c = parts
    if len(a) != 10:
        raise MalformedJa4(f"malformed ja4_a length {len(a)} (expected 10): {text!r}")
    m = _JA4_A_RE.match(a)
    if not m:
        raise MalformedJa4(f"malformed ja4_a {a!r}")
    for name, h in (("ja4_b", b), ("ja4_c", c)):
        if not _HASH_RE.match(h):
            raise MalformedJa4(f"malformed {name} {h!r}")
    proto, version, sni, ciphers, exts, alpn = m.groups()
    return Ja4Parts(proto, version, sni, int(ciphers), int(exts), alpn, b, c)


@dataclass(frozen=True)
class FeatureVector:
    protocol: str
    tls_version: str
    sni_flag: str
    cipher_count: int
    ext_count: int
    alpn_code: str
    ja4_b: str
    ja4_c: str
    application: str = MISSING
    os: str = MISSING
    device: str = MISSING
    verified: bool = False
    observation_count: int = 0

    @classmethod
    def from_ja4(cls, ja4: str, **meta) -> FeatureVector:
        parts = parse_ja4_string(ja4)
        clean = {k: _clean_text(v) if k in ("application", "os", "device") else v for k, v in meta.items()}
        return cls(**asdict(parts), **clean)


def _clean_text(value) -> str:
    if value is None:
        return MISSING
    return str(value).strip()


class CategoryEncoder:
    """Per-feature ``category -> code`` maps with codes 1..K in lexicographic order."""

    def __init__(self, mapping: dict[str, dict[str, int]], include_application: bool = False):
        self.mapping = mapping
        self.include_application = include_application

    @property
    def columns(self) -> list[str]:
        return feature_columns(self.include_application)

    def code(self, feature: str, value: str) -> int:
        return self.mapping[feature].get(value, 0)

    def encode(self, record: FeatureVector) -> list[float]:
        row = []
        for col in self.columns:
            value = getattr(record, col)
            if col in self.mapping:
                row.append(float(self.code(col, value)))
            else:
                row.append(float(int(value)))
        return row

    def encode_many(self, records) -> "np.ndarray":
        import numpy as np

        rows = [self.encode(r) for r in records]
        return np.asarray(rows, dtype=np.float64).reshape(len(rows), len(self.columns))

    def to_json(self) -> dict:
        return {"version": 1, "include_application": self.include_application, "columns": self.columns, "mapping": self.mapping}

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> CategoryEncoder:
        doc = json.loads(Path(path).read_text())
        return cls({k: dict(v) for k, v in doc["mapping"].items()}, doc["include_application"])

    def __eq__(self, other) -> bool:
        return isinstance(other, CategoryEncoder) and self.to_json() == other.to_json()


def fit_encoder(records, categorical_features: list[str] | None = None, include_application: bool = False) -> CategoryEncoder:
    records = list(records)
    if not records:
        raise ValueError("cannot fit an encoder on zero records")
    if categorical_features is None:
        categorical_features = categorical_columns(include_application)
    mapping = {}
    for feat in categorical_features:
        values = sorted({getattr(r, feat) for r in records} - {MISSING})
        mapping[feat] = {v: i + 1 for i, v in enumerate(values)}
    return CategoryEncoder(mapping, include_application)


def encode(record: FeatureVector, encoder: CategoryEncoder) -> list[float]:
    return encoder.encode(record)


# -- CSV persistence -------------------------------------------------------------

CSV_HEADER = ["source_index", "label"] + [f.name for f in fields(FeatureVector)]


def record_to_row(source_index: int, label: str, fv: FeatureVector) -> list[str]:
    vals = asdict(fv)
    vals["verified"] = "1" if fv.verified else "0"
    return [str(source_index), label] + [str(vals[f.name]) for f in fields(FeatureVector)]


def row_to_record(row: dict[str, str]) -> tuple[int, str, FeatureVector]:
    fv = FeatureVector(
        protocol=row["protocol"],
        tls_version=row["tls_version"],
        sni_flag=row["sni_flag"],
        cipher_count=int(row["cipher_count"]),
        ext_count=int(row["ext_count"]),
        alpn_code=row["alpn_code"],
        ja4_b=row["ja4_b"],
        ja4_c=row["ja4_c"],
        application=row["application"],
        os=row["os"],
        device=row["device"],
        verified=row["verified"] == "1",
        observation_count=int(row["observation_count"]),
    )
    return int(row["source_index"]), row["label"], fv
