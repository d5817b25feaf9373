import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfextract.evaluation import (EvalReport, binary_prf, exact_match, f1_from_pr, normalize,
                                  subtask2_report, token_f1)
from cfextract.corpus import SpanAnnotated
from oracles import EM_F1_CASES, NORMALIZE_CASES, squad_f1


@pytest.mark.parametrize("text,expected", NORMALIZE_CASES)
def test_normalize_golden(text, expected):
    assert normalize(text) == expected


@pytest.mark.parametrize("pred,gold,em,same,npred,ngold", EM_F1_CASES)
def test_em_f1_golden(pred, gold, em, same, npred, ngold):
    assert exact_match(pred, gold) == em
    f1 = token_f1(pred, gold)
    if npred == 0 and ngold == 0:
        assert f1 == 1.0
    else:
        assert f1 == squad_f1(same, npred, ngold)
        exact = 2 * Fraction(same, npred + ngold)
        assert abs(f1 - float(exact)) <= 2 * math.ulp(float(exact) or 1.0)


def test_empty_conventions():
    assert token_f1("", "") == 1.0
    assert token_f1("", "cat") == 0.0
    assert token_f1("cat", "") == 0.0
    assert token_f1("the", "") == 1.0  # "the" normalizes to empty
    assert exact_match("", "") == 1


def test_golden_table_size():
    assert len(NORMALIZE_CASES) + len(EM_F1_CASES) >= 20


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet=st.characters(codec="utf-8"), max_size=40))
def test_normalize_idempotent_and_short(s):
    n = normalize(s)
    assert normalize(n) == n
    assert len(n) <= len(s)


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="ab the,.!", max_size=30), st.text(alphabet="ab the,.!", max_size=30))
def test_em_implies_f1_one(a, b):
    if exact_match(a, b):
        assert token_f1(a, b) == 1.0
    assert 0.0 <= token_f1(a, b) <= 1.0


def test_binary_prf_published_svm_row():
    assert abs(f1_from_pr(80.55, 8.19) - 14.87) <= 0.01


def test_binary_prf_counts():
    m = binary_prf([1, 0, 1, 1], [1, 0, 0, 1])
    assert (m.tp, m.fp, m.fn, m.tn) == (2, 1, 0, 1)
    assert m.precision == pytest.approx(200 / 3)
    assert m.recall == 100.0
    assert m.f1 == pytest.approx(80.0)


def test_binary_prf_perfect_and_degenerate():
    m = binary_prf([1, 0, 1], [1, 0, 1])
    assert (m.precision, m.recall, m.f1) == (100.0, 100.0, 100.0)
    m = binary_prf([0, 0], [0, 0])
    assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)
    assert m.accuracy == 100.0


def test_binary_prf_errors():
    with pytest.raises(ValueError):
        binary_prf([1, 0], [1])
    with pytest.raises(ValueError):
        binary_prf([2], [1])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=50))
def test_binary_prf_harmonic_identity(pairs):
    preds, golds = zip(*pairs)
    m = binary_prf(preds, golds)
    if m.precision + m.recall > 0:
        expected = 2 * m.precision * m.recall / (m.precision + m.recall)
        assert abs(m.f1 - expected) <= 1e-10
    tp = sum(p and g for p, g in pairs)
    assert m.tp == tp
    assert m.tp + m.fp + m.fn + m.tn == len(pairs)


def _ex(i, text, a, c):
    return SpanAnnotated(str(i), text, a, c)


def test_report_all_correct():
    golds = [_ex(0, "If I had gone, I would know.", (0, 13), (15, 27)),
             _ex(1, "If only we had.", (0, 14), None)]
    r = subtask2_report(golds, golds)
    for key in EvalReport.ROWS:
        assert getattr(r, key) == 100.0
    assert r.n_examples == 2


def test_report_hand_aggregation():
    text = "If I had gone, I would know."
    golds = [_ex(0, text, (0, 13), (15, 27)), _ex(1, text, (0, 13), (15, 27))]
    preds = [_ex(0, text, (0, 13), (15, 27)), _ex(1, text, (0, 13), (15, 22))]
    r = subtask2_report(preds, golds)
    assert r.EM == 50.0
    assert r.A_EM == 100.0
    assert r.ACC_no_c == 100.0
    assert r.C_EM == 50.0
    # second consequent: "I would" vs "I would know" -> P=1, R=2/3, F1=0.8
    assert r.C_F1 == pytest.approx(100 * (1 + 0.8) / 2)
    assert r.F1 >= r.EM


def test_report_missing_consequent_scores_zero():
    text = "If I had gone, I would know."
    golds = [_ex(0, text, (0, 13), (15, 27))]
    preds = [_ex(0, text, (0, 13), None)]
    r = subtask2_report(preds, golds)
    assert (r.C_EM, r.C_F1, r.ACC_no_c, r.EM) == (0.0, 0.0, 0.0, 0.0)
    assert r.A_EM == 100.0
    assert r.F1 == 50.0


def test_report_id_mismatch():
    a = _ex(0, "If I had.", (0, 8), None)
    b = _ex(1, "If I had.", (0, 8), None)
    with pytest.raises(ValueError):
        subtask2_report([a], [b])


def test_report_serializations():
    g = [_ex(0, "If I had.", (0, 8), None)]
    r = subtask2_report(g, g)
    assert "ACC_no-c" in r.to_table()
    assert '"EM": 100.0' in r.to_json()
