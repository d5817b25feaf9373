"""Hot inner loops, each with a numba kernel and a numpy twin.

The public names (``best_pair``, ``linear_objective``) dispatch on
``_accel.USE_NUMBA``. The ``*_numba`` / ``*_numpy`` variants are exported so
the test-suite and ``benchmarks/bench_kernels.py`` can pit them against each
other.
"""

import numpy as np

from . import _accel

HINGE = 0
LOGISTIC = 1


@_accel.njit
def _best_pair_loop(start, end, lo, hi, max_len):
    best = -np.inf
    bs = -1
    be = -1
    for s in range(lo, hi):
        a = start[s]
        stop = min(hi, s + max_len)
        for e in range(s, stop):
            v = a + end[e]
            if v > best:
                best = v
                bs = s
                be = e
    return bs, be, best


def best_pair_numba(start, end, lo, hi, max_len):
    start = np.ascontiguousarray(start, dtype=np.float64)
    end = np.ascontiguousarray(end, dtype=np.float64)
    s, e, v = _best_pair_loop(start, end, int(lo), int(hi), int(max_len))
    return int(s), int(e), float(v)


def best_pair_numpy(start, end, lo, hi, max_len):
    start = np.asarray(start, dtype=np.float64)
    end = np.asarray(end, dtype=np.float64)
    n = hi - lo
    if n <= 0 or max_len <= 0:
        return -1, -1, -np.inf
    scores = start[lo:hi, None] + end[None, lo:hi]
    gap = np.arange(n)[None, :] - np.arange(n)[:, None]
    scores = np.where((gap >= 0) & (gap < max_len), scores, -np.inf)
    flat = int(np.argmax(scores))
    best = float(scores.flat[flat])
    if not best > -np.inf:
        return -1, -1, -np.inf
    s, e = divmod(flat, n)
    return s + lo, e + lo, best


def best_pair(start, end, lo, hi, max_len):
    """Highest ``start[s] + end[e]`` over ``lo <= s <= e < hi``, ``e - s < max_len``.

    Ties go to the smaller start, then the smaller end. Returns
    ``(-1, -1, -inf)`` when no pair has a finite score.
    """
    if _accel.USE_NUMBA:
        return best_pair_numba(start, end, lo, hi, max_len)
    return best_pair_numpy(start, end, lo, hi, max_len)


@_accel.njit
def _linear_objective_loop(indptr, indices, data, y, w, b, lam, kind):
    n = y.shape[0]
    grad = lam * w
    gb = 0.0
    total = 0.0
    for i in range(n):
        m = b
        for p in range(indptr[i], indptr[i + 1]):
            m += data[p] * w[indices[p]]
        ym = y[i] * m
        if kind == 0:
            if ym < 1.0:
                total += 1.0 - ym
                coef = -y[i] / n
            else:
                coef = 0.0
        else:
            if ym > 0:
                total += np.log1p(np.exp(-ym))
                coef = -y[i] * np.exp(-ym) / (1.0 + np.exp(-ym)) / n
            else:
                total += -ym + np.log1p(np.exp(ym))
                coef = -y[i] / (1.0 + np.exp(ym)) / n
        if coef != 0.0:
            for p in range(indptr[i], indptr[i + 1]):
                grad[indices[p]] += coef * data[p]
            gb += coef
    obj = total / n + 0.5 * lam * np.dot(w, w)
    return obj, grad, gb


def linear_objective_numba(X, y, w, b, lam, kind):
    return _linear_objective_loop(
        X.indptr.astype(np.int64), X.indices.astype(np.int64),
        X.data.astype(np.float64), y.astype(np.float64),
        w.astype(np.float64), float(b), float(lam), int(kind))


def linear_objective_numpy(X, y, w, b, lam, kind):
    n = y.shape[0]
    ym = y * (X @ w + b)
    if kind == HINGE:
        active = ym < 1.0
        total = np.sum(1.0 - ym[active])
        coef = np.where(active, -y / n, 0.0)
    else:
        total = np.sum(np.logaddexp(0.0, -ym))
        coef = -y * np.exp(-np.logaddexp(0.0, ym)) / n
    grad = lam * w + X.T @ coef
    return total / n + 0.5 * lam * float(w @ w), np.asarray(grad).ravel(), float(coef.sum())


def linear_objective(X, y, w, b, lam, kind):
    """L2-regularised hinge/logistic objective and its (sub)gradient.

    ``X`` is CSR, ``y`` in {-1, +1}. Returns ``(objective, grad_w, grad_b)``.
    """
    if _accel.USE_NUMBA:
        return linear_objective_numba(X, y, w, b, lam, kind)
    return linear_objective_numpy(X, y, w, b, lam, kind)
