# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for exact greedy split search and tree prediction.

Results are bit-identical to ``_fallback``: sums are accumulated in the same
order (ascending value, then ascending row id) and the gain expression is
evaluated with the same operation order.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.float64_t f64
ctypedef cnp.int32_t i32


def node_totals(const f64[::1] g, const f64[::1] h, const i32[::1] node_of, Py_ssize_t n_nodes):
    cdef Py_ssize_t n = g.shape[0], r
    cdef i32 p
    G_arr = np.zeros(n_nodes, dtype=np.float64)
    H_arr = np.zeros(n_nodes, dtype=np.float64)
    cdef f64[::1] G = G_arr
    cdef f64[::1] H = H_arr
    with nogil:
        for r in range(n):
            p = node_of[r]
            if p >= 0:
                G[p] += g[r]
                H[p] += h[r]
    return G_arr, H_arr


def best_splits(
    const f64[:, ::1] sorted_vals,
    const i32[:, ::1] order,
    const f64[::1] g,
    const f64[::1] h,
    const i32[::1] node_of,
    Py_ssize_t n_nodes,
    const i32[::1] features,
    double lam,
):
    """Best split per node over ``features``.

    ``order[f]`` lists row ids sorted by (value, row id) for feature ``f`` and
    ``sorted_vals[f]`` holds the matching values. Rows with ``node_of < 0`` are
    ignored. Returns ``(gain, feature, threshold, G, H)``; ``feature == -1``
    marks nodes with no candidate split.
    """
    cdef Py_ssize_t n = g.shape[0], k, fi, p
    cdef i32 f, r, node
    cdef double v, GL, HL, GR, HR, gain, thr

    G_arr, H_arr = node_totals(g, h, node_of, n_nodes)
    cdef f64[::1] G = G_arr
    cdef f64[::1] H = H_arr

    best_gain_arr = np.full(n_nodes, -np.inf, dtype=np.float64)
    best_feat_arr = np.full(n_nodes, -1, dtype=np.int32)
    best_thr_arr = np.zeros(n_nodes, dtype=np.float64)
    cdef f64[::1] best_gain = best_gain_arr
    cdef i32[::1] best_feat = best_feat_arr
    cdef f64[::1] best_thr = best_thr_arr

    parent_arr = np.empty(n_nodes, dtype=np.float64)
    cdef f64[::1] parent = parent_arr
    for p in range(n_nodes):
        parent[p] = G[p] * G[p] / (H[p] + lam)

    cdef f64[::1] gl = np.zeros(n_nodes, dtype=np.float64)
    cdef f64[::1] hl = np.zeros(n_nodes, dtype=np.float64)
    cdef f64[::1] last = np.zeros(n_nodes, dtype=np.float64)
    cdef cnp.uint8_t[::1] seen = np.zeros(n_nodes, dtype=np.uint8)

    with nogil:
        for fi in range(features.shape[0]):
            f = features[fi]
            for p in range(n_nodes):
                gl[p] = 0.0
                hl[p] = 0.0
                seen[p] = 0
            for k in range(n):
                r = order[f, k]
                node = node_of[r]
                if node < 0:
                    continue
                v = sorted_vals[f, k]
                if seen[node] and v != last[node]:
                    GL = gl[node]
                    HL = hl[node]
                    GR = G[node] - GL
                    HR = H[node] - HL
                    gain = 0.5 * ((GL * GL / (HL + lam) + GR * GR / (HR + lam)) - parent[node])
                    if gain > best_gain[node]:
                        thr = 0.5 * (last[node] + v)
                        if thr <= last[node]:
                            thr = v
                        best_gain[node] = gain
                        best_feat[node] = f
                        best_thr[node] = thr
                gl[node] = gl[node] + g[r]
                hl[node] = hl[node] + h[r]
                last[node] = v
                seen[node] = 1
    return best_gain_arr, best_feat_arr, best_thr_arr, G_arr, H_arr


def predict_tree(
    const f64[:, ::1] X,
    const i32[::1] feature,
    const f64[::1] threshold,
    const i32[::1] left,
    const i32[::1] right,
    const f64[::1] value,
):
    cdef Py_ssize_t n = X.shape[0], r
    cdef i32 node
    out_arr = np.empty(n, dtype=np.float64)
    cdef f64[::1] out = out_arr
    with nogil:
        for r in range(n):
            node = 0
            while feature[node] >= 0:
                if X[r, feature[node]] < threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[r] = value[node]
    return out_arr


def add_tree(
    f64[::1] margin,
    const f64[:, ::1] X,
    const i32[::1] feature,
    const f64[::1] threshold,
    const i32[::1] left,
    const i32[::1] right,
    const f64[::1] value,
    double scale,
):
    """``margin += scale * tree(X)`` in place."""
    cdef Py_ssize_t n = X.shape[0], r
    cdef i32 node
    with nogil:
        for r in range(n):
            node = 0
            while feature[node] >= 0:
                if X[r, feature[node]] < threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            margin[r] = margin[r] + scale * value[node]
