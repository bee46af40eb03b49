from __future__ import annotations

import csv
import io
import json

import numpy as np
import pytest

from ja4ml.metrics import (
    REPORT_KEYS,
    ConfusionMatrix,
    confusion,
    evaluate,
    prf1,
    render_report,
    roc_auc,
    trapezoid_auc,
)

from .oracles import pairwise_auc, random_auc_case

TABLE2 = ConfusionMatrix(tn=28699, fp=338, fn=203, tp=9840)
TABLE4 = ConfusionMatrix(tn=28701, fp=336, fn=201, tp=9842)


def r4(x: float) -> float:
    return round(x, 4)


def test_table2_counts():
    assert TABLE2.tn + TABLE2.fp == 29037 and TABLE2.fn + TABLE2.tp == 10043 and TABLE2.total == 39080


def test_xgboost_table_metrics():
    m = prf1(TABLE2)
    assert (r4(m.positive.precision), r4(m.positive.recall), r4(m.positive.f1), r4(m.accuracy)) == (0.9668, 0.9798, 0.9732, 0.9862)
    assert (r4(m.negative.precision), r4(m.negative.recall), r4(m.negative.f1)) == (0.9930, 0.9884, 0.9907)
    assert not m.zero_division


def test_catboost_table_metrics():
    m = prf1(TABLE4)
    assert (r4(m.positive.precision), r4(m.positive.recall), r4(m.positive.f1), r4(m.accuracy)) == (0.9670, 0.9800, 0.9734, 0.9863)


def test_perfect_matrix():
    m = prf1(ConfusionMatrix(5, 0, 0, 5))
    assert m.accuracy == m.positive.precision == m.positive.recall == m.positive.f1 == m.negative.f1 == 1.0


def test_zero_division_flagged_not_raised():
    m = prf1(ConfusionMatrix(tn=4, fp=0, fn=0, tp=0))
    assert m.zero_division and m.positive.precision == 0.0 and m.positive.f1 == 0.0
    assert prf1(ConfusionMatrix(0, 0, 0, 0)).accuracy == 0.0


def test_accuracy_identity():
    rng = np.random.default_rng(1)
    for _ in range(50):
        cm = ConfusionMatrix(*map(int, rng.integers(0, 100, 4)))
        if cm.total:
            assert prf1(cm).accuracy == pytest.approx(1 - (cm.fp + cm.fn) / cm.total, abs=1e-15)


def test_confusion_counts_and_symmetry():
    y = np.array([0, 0, 1, 1, 1, 0])
    p = np.array([0, 1, 1, 0, 1, 0])
    cm = confusion(y, p)
    assert cm == ConfusionMatrix(tn=2, fp=1, fn=1, tp=2)
    assert confusion(y, y) == ConfusionMatrix(3, 0, 0, 3)
    flipped = confusion(y, 1 - y)
    assert (flipped.fn, flipped.fp) == (3, 3)


def test_confusion_errors():
    with pytest.raises(ValueError, match="length"):
        confusion([0, 1], [0])
    with pytest.raises(ValueError, match="binary"):
        confusion([0, 2], [0, 1])


def test_auc_perfect_and_ties():
    assert roc_auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9])[0] == 1.0
    assert roc_auc([0, 1, 0, 1], [0.3] * 4)[0] == 0.5
    assert roc_auc([0, 0, 1, 1], [0.9, 0.8, 0.2, 0.1])[0] == 0.0


def test_auc_single_class():
    with pytest.raises(ValueError):
        roc_auc([1, 1], [0.2, 0.3])


@pytest.mark.parametrize("seed", range(100))
def test_auc_matches_pairwise_oracle(seed):
    y, s = random_auc_case(np.random.default_rng(seed))
    auc, points = roc_auc(y, s)
    assert auc == pairwise_auc(y, s)
    assert abs(trapezoid_auc(points) - auc) <= 1e-12


def test_auc_monotone_invariance():
    rng = np.random.default_rng(7)
    y = rng.integers(0, 2, 200)
    s = rng.normal(size=200)
    base = roc_auc(y, s)[0]
    for f in (np.exp, lambda v: 3 * v + 1, lambda v: np.arctan(v), lambda v: v ** 3):
        assert roc_auc(y, f(s))[0] == base


def test_roc_points_monotone():
    rng = np.random.default_rng(3)
    y = rng.integers(0, 2, 300)
    _, pts = roc_auc(y, np.round(rng.random(300), 2))
    fpr = [p[1] for p in pts]
    tpr = [p[2] for p in pts]
    assert fpr[0] == tpr[0] == 0 and fpr[-1] == tpr[-1] == 1
    assert all(a <= b for a, b in zip(fpr, fpr[1:])) and all(a <= b for a, b in zip(tpr, tpr[1:]))


def report_from_table2(importances=()):
    y = np.array([0] * (TABLE2.tn + TABLE2.fp) + [1] * (TABLE2.fn + TABLE2.tp))
    s = np.array([0.1] * TABLE2.tn + [0.9] * TABLE2.fp + [0.2] * TABLE2.fn + [0.8] * TABLE2.tp)
    return evaluate(y, s, 0.5, importances)


def test_report_renders_table_accuracy():
    rep = report_from_table2()
    assert rep.confusion == TABLE2
    assert "accuracy 0.9862" in render_report(rep, "text")


def test_report_json_schema_and_text_agree():
    rep = report_from_table2([("ja4_b", 10.0), ("cipher_count", 5.0)])
    doc = json.loads(render_report(rep, "json"))
    assert list(doc) == REPORT_KEYS
    text = render_report(rep, "text")
    assert f"{doc['precision']['bad_bot']:.4f}" in text and f"{doc['auc']:.4f}" in text
    assert "ja4_b" in text and doc["importances"][0] == ["ja4_b", 10.0]


def test_empty_importances():
    rep = report_from_table2()
    assert "importance" not in render_report(rep, "text").lower()
    assert json.loads(render_report(rep, "json"))["importances"] == []


def test_roc_csv():
    rows = list(csv.reader(io.StringIO(render_report(report_from_table2(), "csv"))))
    assert rows[0] == ["threshold", "fpr", "tpr"]
    assert rows[1] == ["inf", "0.0", "0.0"] and rows[-1][1:] == ["1.0", "1.0"]


def test_unknown_format():
    with pytest.raises(ValueError, match="format"):
        render_report(report_from_table2(), "xml")
