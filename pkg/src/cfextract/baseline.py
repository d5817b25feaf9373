"""TF-IDF features with linear SVM, Gaussian Naive Bayes and a 6x64 MLP."""

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import kernels
from .optim import AdamWState, adamw_step

_TERM = re.compile(r"(?u)\b\w+\b")


class FitError(ValueError):
    pass


def analyze(text):
    return _TERM.findall(text.lower())


@dataclass
class TfidfModel:
    vocabulary: dict
    idf: np.ndarray
    norm: str = "l2"

    def transform(self, corpus):
        rows, cols, vals = [], [], []
        for r, text in enumerate(corpus):
            counts = {}
            for term in analyze(text):
                j = self.vocabulary.get(term)
                if j is not None:
                    counts[j] = counts.get(j, 0) + 1
            for j in sorted(counts):
                rows.append(r)
                cols.append(j)
                vals.append(counts[j] * self.idf[j])
        X = sp.csr_matrix((np.asarray(vals, dtype=np.float64), (rows, cols)),
                          shape=(len(corpus), len(self.vocabulary)))
        if self.norm == "l2":
            norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
            norms[norms == 0] = 1.0
            X = sp.csr_matrix(sp.diags(1.0 / norms) @ X)
        return X

    def save(self, path):
        terms = sorted(self.vocabulary, key=self.vocabulary.get)
        payload = {"norm": self.norm, "terms": terms, "idf": [float(x) for x in self.idf]}
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def load(cls, path):
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        vocab = {t: i for i, t in enumerate(payload["terms"])}
        return cls(vocab, np.asarray(payload["idf"], dtype=np.float64), payload["norm"])


def fit_tfidf(corpus, min_df=1, norm="l2"):
    """Raw-count tf, smoothed idf ``ln((1+N)/(1+df)) + 1``, unigram terms."""
    corpus = list(corpus)
    if not corpus:
        raise FitError("empty corpus")
    df = {}
    for text in corpus:
        for term in set(analyze(text)):
            df[term] = df.get(term, 0) + 1
    terms = sorted(t for t, c in df.items() if c >= min_df)
    if not terms:
        raise FitError(f"no term reaches min_df={min_df}")
    n = len(corpus)
    idf = np.array([np.log((1 + n) / (1 + df[t])) + 1.0 for t in terms])
    return TfidfModel({t: i for i, t in enumerate(terms)}, idf, norm)


def _as_csr(X):
    return sp.csr_matrix(X, dtype=np.float64)


def _check_dim(X, n_features):
    if X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} features, got {X.shape[1]}")


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


@dataclass
class LinearClassifier:
    weights: np.ndarray
    bias: float
    kind: str = "hinge-svm"
    seed: int = 0
    objective_history: list = field(default_factory=list)

    def decision_function(self, X):
        X = _as_csr(X)
        _check_dim(X, self.weights.shape[0])
        return X @ self.weights + self.bias

    def predict_proba(self, X):
        return _sigmoid(self.decision_function(X))


def train_linear(X, y, kind="hinge-svm", lam=1e-4, epochs=300, lr=1.0, seed=0):
    """Full-batch (sub)gradient descent with step halving.

    A step is only accepted if it does not raise the objective, so the
    recorded objective is non-increasing.
    """
    X = _as_csr(X)
    ys = np.where(np.asarray(y) == 1, 1.0, -1.0)
    code = kernels.HINGE if kind == "hinge-svm" else kernels.LOGISTIC
    w = np.zeros(X.shape[1])
    b = 0.0
    obj, gw, gb = kernels.linear_objective(X, ys, w, b, lam, code)
    history = [obj]
    step = lr
    for _ in range(epochs):
        while step > 1e-12:
            w2, b2 = w - step * gw, b - step * gb
            obj2, gw2, gb2 = kernels.linear_objective(X, ys, w2, b2, lam, code)
            if obj2 <= obj:
                w, b, obj, gw, gb = w2, b2, obj2, gw2, gb2
                step *= 1.5
                break
            step *= 0.5
        else:
            break
        history.append(obj)
    return LinearClassifier(w, float(b), kind, seed, history)


@dataclass
class GaussianNb:
    means: np.ndarray
    variances: np.ndarray
    priors: np.ndarray
    seed: int = 0

    def joint_log_likelihood(self, X):
        X = _as_csr(X)
        _check_dim(X, self.means.shape[1])
        inv = 1.0 / self.variances
        sq = X.multiply(X) @ inv.T
        cross = X @ (self.means * inv).T
        const = (np.sum(self.means ** 2 * inv, axis=1)
                 + np.sum(np.log(2 * np.pi * self.variances), axis=1))
        return np.log(self.priors) - 0.5 * (sq - 2 * cross + const)

    def predict_proba(self, X):
        jll = self.joint_log_likelihood(X)
        return np.exp(jll[:, 1] - np.logaddexp(jll[:, 0], jll[:, 1]))


def train_nb(X, y, var_smoothing=1e-9, seed=0):
    X = _as_csr(X)
    y = np.asarray(y)
    means, variances, priors = [], [], []
    for c in (0, 1):
        Xc = X[y == c]
        mu = np.asarray(Xc.mean(axis=0)).ravel()
        var = np.asarray(Xc.multiply(Xc).mean(axis=0)).ravel() - mu ** 2
        means.append(mu)
        variances.append(np.maximum(var, 0.0))
        priors.append(Xc.shape[0] / X.shape[0])
    variances = np.array(variances)
    total_var = np.asarray(X.multiply(X).mean(axis=0)).ravel() - np.asarray(X.mean(axis=0)).ravel() ** 2
    floor = max(var_smoothing * float(total_var.max(initial=0.0)), 1e-12)
    return GaussianNb(np.array(means), variances + floor, np.array(priors), seed)


@dataclass
class MlpClassifier:
    weights: list
    biases: list
    seed: int = 0

    @property
    def hidden(self):
        return [w.shape[1] for w in self.weights[:-1]]

    def _forward(self, X):
        acts = [X]
        h = X
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ W + b, 0.0)
            acts.append(h)
        logits = np.asarray(h @ self.weights[-1] + self.biases[-1])
        return acts, logits

    def predict_proba(self, X):
        X = _as_csr(X)
        _check_dim(X, self.weights[0].shape[0])
        _, logits = self._forward(X)
        return _sigmoid(logits[:, 1] - logits[:, 0])


def train_mlp(X, y, hidden=(64,) * 6, epochs=20, batch_size=32, lr=1e-3, seed=0):
    X = _as_csr(X)
    y = np.asarray(y, dtype=np.int64)
    rng = np.random.default_rng(seed)
    sizes = [X.shape[1], *hidden, 2]
    weights = [rng.normal(0, np.sqrt(2.0 / a), size=(a, b)) for a, b in zip(sizes, sizes[1:])]
    biases = [np.zeros(b) for b in sizes[1:]]
    model = MlpClassifier(weights, biases, seed)
    params = {f"w{i}": w for i, w in enumerate(weights)}
    params.update({f"b{i}": b for i, b in enumerate(biases)})
    opt = AdamWState(lr=lr)
    n = X.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        for lo in range(0, n, batch_size):
            idx = order[lo:lo + batch_size]
            acts, logits = model._forward(X[idx])
            z = logits - logits.max(axis=1, keepdims=True)
            p = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
            delta = p
            delta[np.arange(len(idx)), y[idx]] -= 1.0
            delta /= len(idx)
            grads = {}
            for i in range(len(weights) - 1, -1, -1):
                grads[f"w{i}"] = np.asarray(acts[i].T @ delta)
                grads[f"b{i}"] = delta.sum(axis=0)
                if i:
                    delta = (delta @ weights[i].T) * (acts[i] > 0)
            adamw_step(params, grads, opt)
    return model


def train_classifier(kind, features, labels, hp=None):
    """Fit ``svm`` / ``logistic`` / ``nb`` / ``mlp`` on (features, 0/1 labels)."""
    hp = dict(hp or {})
    labels = np.asarray(labels)
    if features.shape[0] != labels.shape[0]:
        raise ValueError("features and labels are not aligned")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    if len(np.unique(labels)) < 2:
        raise FitError("training set contains a single class")
    if kind == "svm":
        return train_linear(features, labels, "hinge-svm", **hp)
    if kind == "logistic":
        return train_linear(features, labels, "logistic", **hp)
    if kind == "nb":
        return train_nb(features, labels, **hp)
    if kind == "mlp":
        return train_mlp(features, labels, **hp)
    raise ValueError(f"unknown classifier kind {kind!r}")


def predict_proba(classifier, features):
    """P(label = 1) per row, in [0, 1]; threshold 0.5 for hard labels."""
    return np.clip(classifier.predict_proba(features), 0.0, 1.0)


def predict(classifier, features):
    return (predict_proba(classifier, features) >= 0.5).astype(np.int64)


def save_classifier(clf, path):
    if isinstance(clf, LinearClassifier):
        kind, arrays = clf.kind, {"weights": clf.weights, "bias": np.array([clf.bias])}
    elif isinstance(clf, GaussianNb):
        kind, arrays = "nb", {"means": clf.means, "variances": clf.variances, "priors": clf.priors}
    elif isinstance(clf, MlpClassifier):
        kind = "mlp"
        arrays = {f"w{i}": w for i, w in enumerate(clf.weights)}
        arrays.update({f"b{i}": b for i, b in enumerate(clf.biases)})
    else:
        raise TypeError(f"cannot save {type(clf).__name__}")
    header = {"kind": kind, "seed": clf.seed,
              "shapes": {k: list(v.shape) for k, v in arrays.items()}}
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header)), **arrays)


def load_classifier(path):
    with np.load(path) as z:
        header = json.loads(str(z["header"]))
        arrays = {k: z[k] for k in header["shapes"]}
    kind, seed = header["kind"], header["seed"]
    if kind in ("hinge-svm", "logistic"):
        return LinearClassifier(arrays["weights"], float(arrays["bias"][0]), kind, seed)
    if kind == "nb":
        return GaussianNb(arrays["means"], arrays["variances"], arrays["priors"], seed)
    n = sum(1 for k in arrays if k.startswith("w"))
    return MlpClassifier([arrays[f"w{i}"] for i in range(n)],
                         [arrays[f"b{i}"] for i in range(n)], seed)
