"""Pure numpy versions of the ``_core`` kernels.

Each function matches its compiled counterpart bit for bit, so models trained
with either backend serialize identically. That rules out pairwise summation
(``ndarray.sum``): all sums here are sequential ``cumsum`` runs.
"""

from __future__ import annotations

import numpy as np


def node_totals(g, h, node_of, n_nodes):
    G = np.zeros(n_nodes)
    H = np.zeros(n_nodes)
    active = np.flatnonzero(node_of >= 0)
    if active.size == 0:
        return G, H
    nodes = node_of[active]
    grouped = active[np.argsort(nodes, kind="stable")]
    counts = np.bincount(nodes, minlength=n_nodes)
    start = 0
    for p in range(n_nodes):
        c = counts[p]
        if c:
            rows = grouped[start : start + c]
            G[p] = np.cumsum(g[rows])[-1]
            H[p] = np.cumsum(h[rows])[-1]
        start += c
    return G, H


def best_splits(sorted_vals, order, g, h, node_of, n_nodes, features, lam):
    G, H = node_totals(g, h, node_of, n_nodes)
    best_gain = np.full(n_nodes, -np.inf)
    best_feat = np.full(n_nodes, -1, dtype=np.int32)
    best_thr = np.zeros(n_nodes)
    parent = G * G / (H + lam)

    for f in features:
        ordf = order[f]
        keep = node_of[ordf] >= 0
        rows = ordf[keep]
        vals = sorted_vals[f][keep]
        nodes = node_of[rows]
        # Group by node while keeping (value, row) order inside each group.
        grp = np.argsort(nodes, kind="stable")
        rows, vals, nodes = rows[grp], vals[grp], nodes[grp]
        counts = np.bincount(nodes, minlength=n_nodes)
        start = 0
        for p in range(n_nodes):
            c = counts[p]
            if c < 2:
                start += c
                continue
            v = vals[start : start + c]
            r = rows[start : start + c]
            start += c
            cand = np.flatnonzero(v[:-1] != v[1:])
            if cand.size == 0:
                continue
            GL = np.cumsum(g[r])[cand]
            HL = np.cumsum(h[r])[cand]
            GR = G[p] - GL
            HR = H[p] - HL
            with np.errstate(divide="ignore", invalid="ignore"):
                gain = 0.5 * ((GL * GL / (HL + lam) + GR * GR / (HR + lam)) - parent[p])
            i = int(np.argmax(gain))
            if gain[i] > best_gain[p]:
                lo, hi = v[cand[i]], v[cand[i] + 1]
                thr = 0.5 * (lo + hi)
                if thr <= lo:
                    thr = hi
                best_gain[p] = gain[i]
                best_feat[p] = f
                best_thr[p] = thr
    return best_gain, best_feat, best_thr, G, H


def _leaf_index(X, feature, threshold, left, right):
    idx = np.zeros(X.shape[0], dtype=np.int64)
    rows = np.arange(X.shape[0])
    while True:
        feat = feature[idx]
        internal = feat >= 0
        if not internal.any():
            return idx
        r = rows[internal]
        cur = idx[internal]
        go_left = X[r, feat[internal]] < threshold[cur]
        idx[internal] = np.where(go_left, left[cur], right[cur])


def predict_tree(X, feature, threshold, left, right, value):
    return value[_leaf_index(X, feature, threshold, left, right)]


def add_tree(margin, X, feature, threshold, left, right, value, scale):
    margin += scale * predict_tree(X, feature, threshold, left, right, value)
