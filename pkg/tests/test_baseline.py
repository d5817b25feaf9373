import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from cfextract import baseline
from cfextract.baseline import (FitError, GaussianNb, MlpClassifier, TfidfModel, fit_tfidf,
                                load_classifier, predict, predict_proba, save_classifier,
                                train_classifier, train_linear)


def test_idf_hand_values():
    m = fit_tfidf(["a b", "a"])
    idf = dict(zip(sorted(m.vocabulary, key=m.vocabulary.get), m.idf))
    assert idf["a"] == pytest.approx(1.0, abs=1e-12)
    assert idf["b"] == pytest.approx(math.log(3 / 2) + 1, abs=1e-12)
    assert idf["b"] == pytest.approx(1.4055, abs=1e-4)


def test_transform_matches_hand_oracle():
    corpus = ["the cat sat on the mat", "the dog", "cat dog cat"]
    m = fit_tfidf(corpus)
    X = m.transform(corpus).toarray()
    terms = sorted(m.vocabulary, key=m.vocabulary.get)
    N = len(corpus)
    for r, doc in enumerate(corpus):
        toks = doc.split()
        v = np.array([toks.count(t) * (math.log((1 + N) / (1 + sum(t in d.split() for d in corpus))) + 1)
                      for t in terms])
        np.testing.assert_allclose(X[r], v / np.linalg.norm(v), atol=1e-12)


def test_oov_ignored_and_single_doc():
    m = fit_tfidf(["x y y"])
    assert np.all(m.idf == m.idf[0])
    X = m.transform(["zzz", "x"]).toarray()
    assert np.all(X[0] == 0)
    np.testing.assert_allclose(X[1], [1.0, 0.0])


def test_fit_errors():
    with pytest.raises(FitError):
        fit_tfidf([])
    with pytest.raises(FitError):
        fit_tfidf(["a", "b"], min_df=2)


def test_tfidf_save_load_bit_identical(tmp_path):
    corpus = ["If I had known, I would have left.", "I left early."]
    m = fit_tfidf(corpus)
    m.save(tmp_path / "t.json")
    m2 = TfidfModel.load(tmp_path / "t.json")
    a, b = m.transform(corpus), m2.transform(corpus)
    assert (a != b).nnz == 0


def _toy():
    rng = np.random.default_rng(0)
    pos = rng.normal([2, 2], 0.3, size=(40, 2))
    neg = rng.normal([-2, -2], 0.3, size=(40, 2))
    return sp.csr_matrix(np.vstack([pos, neg])), np.array([1] * 40 + [0] * 40)


@pytest.mark.parametrize("kind", ["svm", "logistic", "nb", "mlp"])
def test_separable_training_accuracy(kind):
    X, y = _toy()
    hp = {"epochs": 50} if kind == "mlp" else None
    clf = train_classifier(kind, X, y, hp)
    assert np.mean(predict(clf, X) == y) == 1.0
    p = predict_proba(clf, X)
    assert np.all((p >= 0) & (p <= 1))


def test_hinge_objective_non_increasing():
    X, y = _toy()
    y = y.copy()
    y[:5] = 0  # make it non-separable
    clf = train_linear(X, y, "hinge-svm", epochs=200)
    h = np.array(clf.objective_history)
    assert np.all(np.diff(h) <= 1e-6)
    assert h[-1] < h[0]


def test_single_class_rejected():
    X, _ = _toy()
    with pytest.raises(FitError):
        train_classifier("svm", X, np.ones(80, dtype=int))


def test_nb_identical_distributions_follow_priors():
    X = sp.csr_matrix(np.tile([[1.0, 2.0], [3.0, 4.0]], (10, 1)))
    y = np.array([1, 1] * 3 + [0, 0] * 7)
    clf = train_classifier("nb", X, y)
    np.testing.assert_allclose(predict_proba(clf, X), 0.3, atol=1e-9)
    assert clf.priors.sum() == pytest.approx(1.0)
    assert np.all(clf.variances > 0)


def test_nb_probabilities_sum_to_one():
    X, y = _toy()
    clf = train_classifier("nb", X, y)
    jll = clf.joint_log_likelihood(X)
    post = np.exp(jll - np.logaddexp.reduce(jll, axis=1, keepdims=True))
    np.testing.assert_allclose(post.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(post[:, 1], clf.predict_proba(X), atol=1e-12)


def test_mlp_architecture_and_zero_head():
    X, y = _toy()
    clf = train_classifier("mlp", X, y, {"epochs": 1})
    assert clf.hidden == [64] * 6
    zeroed = MlpClassifier([w.copy() for w in clf.weights], [b.copy() for b in clf.biases])
    zeroed.weights[-1][:] = 0
    zeroed.biases[-1][:] = 0
    np.testing.assert_allclose(zeroed.predict_proba(X), 0.5)


def test_threshold_matches_argmax():
    X, y = _toy()
    clf = train_classifier("mlp", X, y, {"epochs": 2})
    _, logits = clf._forward(X)
    np.testing.assert_array_equal(predict(clf, X), np.argmax(logits, axis=1))


def test_dimension_mismatch():
    X, y = _toy()
    clf = train_classifier("svm", X, y)
    with pytest.raises(ValueError):
        predict_proba(clf, sp.csr_matrix(np.ones((2, 3))))


@pytest.mark.parametrize("kind", ["svm", "logistic", "nb", "mlp"])
def test_checkpoint_roundtrip(tmp_path, kind):
    X, y = _toy()
    clf = train_classifier(kind, X, y, {"epochs": 1} if kind == "mlp" else None)
    save_classifier(clf, tmp_path / "c.npz")
    back = load_classifier(tmp_path / "c.npz")
    np.testing.assert_array_equal(predict_proba(clf, X), predict_proba(back, X))


def test_training_is_deterministic():
    X, y = _toy()
    a = train_classifier("mlp", X, y, {"epochs": 2, "seed": 3})
    b = train_classifier("mlp", X, y, {"epochs": 2, "seed": 3})
    np.testing.assert_array_equal(predict_proba(a, X), predict_proba(b, X))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=2), min_size=1, max_size=10))
def test_predict_proba_in_unit_interval(rows):
    X, y = _toy()
    clf = train_classifier("logistic", X, y)
    p = predict_proba(clf, sp.csr_matrix(np.array(rows)))
    assert np.all((p >= 0) & (p <= 1))


def test_analyzer_keeps_single_characters():
    assert baseline.analyze("A b, C!") == ["a", "b", "c"]
    assert isinstance(train_classifier("nb", *_toy()), GaussianNb)
