"""Second-order gradient boosting with logistic loss and exact greedy splits."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .. import prng
from . import _kernels

logger = logging.getLogger(__name__)

MODEL_FORMAT = "ja4ml-gbdt"
MODEL_VERSION = 1


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    n_trees: int = 500
    max_depth: int = 8
    learning_rate: float = 0.05
    subsample: float = 0.8
    colsample: float = 0.8
    l2_leaf_reg: float = 1.0
    min_split_gain: float = 0.0
    seed: int = 42

    def __post_init__(self):
        if self.n_trees < 0:
            raise ValueError("n_trees must be >= 0")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        for name in ("subsample", "colsample"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must be in (0, 1], got {v}")
        if self.l2_leaf_reg < 0 or self.min_split_gain < 0:
            raise ValueError("l2_leaf_reg and min_split_gain must be >= 0")


@dataclass
class Tree:
    """Flat array tree; node 0 is the root, ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    grad_sum: np.ndarray
    hess_sum: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def depth(self) -> int:
        def walk(node: int) -> int:
            if self.feature[node] < 0:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))

        return walk(0)

    def internal_nodes(self) -> list[int]:
        return [i for i in range(self.n_nodes) if self.feature[i] >= 0]

    def to_nested(self, node: int = 0) -> dict:
        if self.feature[node] < 0:
            return {"leaf": float(self.value[node]), "grad_sum": float(self.grad_sum[node]), "hess_sum": float(self.hess_sum[node])}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "gain": float(self.gain[node]),
            "grad_sum": float(self.grad_sum[node]),
            "hess_sum": float(self.hess_sum[node]),
            "left": self.to_nested(int(self.left[node])),
            "right": self.to_nested(int(self.right[node])),
        }

    @classmethod
    def from_nested(cls, doc: dict) -> Tree:
        # Breadth-first numbering, the same layout the trainer produces.
        builder = _TreeBuilder()
        queue = [(doc, builder.add())]
        while queue:
            nxt = []
            for node_doc, nid in queue:
                builder.grad_sum[nid] = node_doc["grad_sum"]
                builder.hess_sum[nid] = node_doc["hess_sum"]
                if "leaf" in node_doc:
                    builder.value[nid] = node_doc["leaf"]
                    continue
                l, r = builder.add(), builder.add()
                builder.set_split(nid, node_doc["feature"], node_doc["threshold"], node_doc["gain"], l, r)
                nxt += [(node_doc["left"], l), (node_doc["right"], r)]
            queue = nxt
        return builder.build()

    def predict(self, X: np.ndarray, backend: str | None = None) -> np.ndarray:
        k = _kernels.get(backend)
        return k.predict_tree(X, self.feature, self.threshold, self.left, self.right, self.value)


class _TreeBuilder:
    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.gain: list[float] = []
        self.grad_sum: list[float] = []
        self.hess_sum: list[float] = []

    def add(self) -> int:
        for arr, v in ((self.feature, -1), (self.threshold, 0.0), (self.left, -1), (self.right, -1),
                       (self.value, 0.0), (self.gain, 0.0), (self.grad_sum, 0.0), (self.hess_sum, 0.0)):
            arr.append(v)
        return len(self.feature) - 1

    def set_split(self, nid, feature, threshold, gain, left, right):
        self.feature[nid] = feature
        self.threshold[nid] = threshold
        self.gain[nid] = gain
        self.left[nid] = left
        self.right[nid] = right

    def build(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            value=np.asarray(self.value, dtype=np.float64),
            gain=np.asarray(self.gain, dtype=np.float64),
            grad_sum=np.asarray(self.grad_sum, dtype=np.float64),
            hess_sum=np.asarray(self.hess_sum, dtype=np.float64),
        )


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def logloss(y: np.ndarray, margin: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


@dataclass
class GbdtModel:
    trees: list[Tree]
    base_score: float
    config: TrainConfig
    feature_names: list[str]
    gain_importance: np.ndarray
    train_log: list[float] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def _check(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            got = X.shape[1] if X.ndim == 2 else X.shape
            raise ModelError(f"expected {self.n_features} feature columns, got {got}")
        return X

    def decision_function(self, X, backend: str | None = None) -> np.ndarray:
        X = self._check(X)
        k = _kernels.get(backend)
        margin = np.full(X.shape[0], self.base_score)
        lr = self.config.learning_rate
        for t in self.trees:
            k.add_tree(margin, X, t.feature, t.threshold, t.left, t.right, t.value, lr)
        return margin

    def predict_proba(self, X, backend: str | None = None) -> np.ndarray:
        return sigmoid(self.decision_function(X, backend))

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X) >= threshold).astype(np.int64)

    def feature_importance(self) -> list[tuple[str, float]]:
        order = sorted(range(self.n_features), key=lambda i: (-self.gain_importance[i], i))
        return [(self.feature_names[i], float(self.gain_importance[i])) for i in order]

    # -- persistence --

    def to_json(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "config": asdict(self.config),
            "base_score": float(self.base_score),
            "feature_names": list(self.feature_names),
            "importances": {n: float(g) for n, g in zip(self.feature_names, self.gain_importance)},
            "train_logloss": [float(v) for v in self.train_log],
            "trees": [t.to_nested() for t in self.trees],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def from_json(cls, doc: dict) -> GbdtModel:
        if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
            raise ModelError("not a ja4ml GBDT model file")
        if doc.get("version") != MODEL_VERSION:
            raise ModelError(f"unsupported model version {doc.get('version')} (expected {MODEL_VERSION})")
        try:
            names = list(doc["feature_names"])
            return cls(
                trees=[Tree.from_nested(t) for t in doc["trees"]],
                base_score=float(doc["base_score"]),
                config=TrainConfig(**doc["config"]),
                feature_names=names,
                gain_importance=np.asarray([doc["importances"][n] for n in names], dtype=np.float64),
                train_log=list(doc.get("train_logloss", [])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"corrupt model document: {exc!r}") from None

    @classmethod
    def load(cls, path: str | Path) -> GbdtModel:
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ModelError(f"cannot read model {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ModelError(f"corrupt model file {path}: {exc}") from None
        return cls.from_json(doc)


def save_model(model: GbdtModel, path: str | Path) -> None:
    model.save(path)


def load_model(path: str | Path) -> GbdtModel:
    return GbdtModel.load(path)


def predict_proba(model: GbdtModel, X) -> np.ndarray:
    return model.predict_proba(X)


def feature_importance(model: GbdtModel) -> list[tuple[str, float]]:
    return model.feature_importance()


# -- training -----------------------------------------------------------------------


class _PresortedMatrix:
    """Per-feature stable sort of the training matrix, computed once."""

    def __init__(self, X: np.ndarray):
        self.X = X
        order = np.argsort(X, axis=0, kind="stable").T
        self.order = np.ascontiguousarray(order, dtype=np.int32)
        self.sorted_vals = np.ascontiguousarray(np.take_along_axis(X, order.T, axis=0).T)


def _sample_columns(rng: prng.SplitMix64, d: int, rate: float) -> np.ndarray:
    if rate >= 1.0:
        return np.arange(d, dtype=np.int32)
    k = max(1, int(math.floor(rate * d)))
    keys = rng.floats(d)
    return np.sort(np.argsort(keys, kind="stable")[:k]).astype(np.int32)


def _sample_rows(rng: prng.SplitMix64, n: int, rate: float) -> np.ndarray:
    if rate >= 1.0:
        return np.ones(n, dtype=bool)
    return rng.floats(n) < rate


def build_tree(
    pre: _PresortedMatrix,
    g: np.ndarray,
    h: np.ndarray,
    active: np.ndarray,
    features: np.ndarray,
    config: TrainConfig,
    backend: str | None = None,
) -> Tree:
    """Grow one tree level by level on the rows flagged in ``active``."""
    k = _kernels.get(backend)
    lam = config.l2_leaf_reg
    X = pre.X
    b = _TreeBuilder()
    root = b.add()
    node_of = np.where(active, 0, -1).astype(np.int32)
    level = [root]
    depth = 0
    while level:
        n_level = len(level)
        if depth < config.max_depth:
            gain, feat, thr, G, H = k.best_splits(pre.sorted_vals, pre.order, g, h, node_of, n_level, features, lam)
        else:
            G, H = k.node_totals(g, h, node_of, n_level)
            feat = np.full(n_level, -1, dtype=np.int32)
        child_of_left = np.full(n_level, -1, dtype=np.int32)
        split_feat = np.zeros(n_level, dtype=np.int64)
        split_thr = np.zeros(n_level)
        next_level = []
        for j, nid in enumerate(level):
            b.grad_sum[nid] = float(G[j])
            b.hess_sum[nid] = float(H[j])
            if feat[j] >= 0 and gain[j] > config.min_split_gain:
                l, r = b.add(), b.add()
                b.set_split(nid, int(feat[j]), float(thr[j]), float(gain[j]), l, r)
                child_of_left[j] = len(next_level)
                split_feat[j] = feat[j]
                split_thr[j] = thr[j]
                next_level += [l, r]
            else:
                b.value[nid] = float(-G[j] / (H[j] + lam))
        if not next_level:
            break
        # Route rows of split nodes to the level-local index of their child.
        live = node_of >= 0
        rows = np.flatnonzero(live)
        cur = node_of[rows]
        left_idx = child_of_left[cur]
        go_left = X[rows, split_feat[cur]] < split_thr[cur]
        new_node = np.where(left_idx < 0, -1, np.where(go_left, left_idx, left_idx + 1))
        node_of = np.full_like(node_of, -1)
        node_of[rows] = new_node
        level = next_level
        depth += 1
    return b.build()


def _validate(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2:
        raise ModelError("X must be 2-dimensional")
    if X.shape[0] != y.shape[0]:
        raise ModelError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    if X.shape[0] < 2:
        raise ModelError("need at least 2 training rows")
    if not np.all(np.isfinite(X)):
        raise ModelError("X contains non-finite values")
    if not np.all((y == 0) | (y == 1)):
        raise ModelError("labels must be 0/1")
    if y.min() == y.max():
        raise ModelError("training labels contain a single class")
    return X, y


def train(
    X,
    y,
    config: TrainConfig = TrainConfig(),
    feature_names: Sequence[str] | None = None,
    backend: str | None = None,
    log: Callable[[int, float], None] | None = None,
) -> GbdtModel:
    X, y = _validate(X, y)
    n, d = X.shape
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(d)]
    if len(names) != d:
        raise ModelError(f"{len(names)} feature names for {d} columns")
    k = _kernels.get(backend)
    pos = y.mean()
    base = math.log(pos / (1.0 - pos))
    margin = np.full(n, base)
    pre = _PresortedMatrix(X)
    trees: list[Tree] = []
    importance = np.zeros(d)
    history: list[float] = []
    for rnd in range(config.n_trees):
        p = sigmoid(margin)
        g = p - y
        h = p * (1.0 - p)
        rng = prng.SplitMix64(prng.derive_seed(config.seed, rnd))
        features = _sample_columns(rng, d, config.colsample)
        active = _sample_rows(rng, n, config.subsample)
        tree = build_tree(pre, g, h, active, features, config, backend)
        for nid in tree.internal_nodes():
            importance[tree.feature[nid]] += tree.gain[nid]
        k.add_tree(margin, X, tree.feature, tree.threshold, tree.left, tree.right, tree.value, config.learning_rate)
        trees.append(tree)
        loss = logloss(y, margin)
        history.append(loss)
        if log is not None:
            log(rnd, loss)
    return GbdtModel(trees, base, config, names, importance, history)
