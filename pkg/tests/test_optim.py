import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfextract.optim import (AdamWState, LookaheadState, NumericError, TrainConfig, adamw_step,
                             clip_global_norm, global_norm, lookahead_sync, lookahead_tick,
                             train_loop)


def adam_reference(theta, g, m, v, t, lr, b1=0.9, b2=0.999, eps=1e-8):
    m = b1 * m + (1 - b1) * g
    v = b2 * v + (1 - b2) * g * g
    mh = m / (1 - b1 ** t)
    vh = v / (1 - b2 ** t)
    return theta - lr * mh / (math.sqrt(vh) + eps), m, v


def test_adamw_scalar_value():
    # step 1: m_hat = g, v_hat = g^2, so the adaptive step is lr * g/|g| = 0.1;
    # decay adds lr * wd * theta = 0.002.
    p = {"w": np.array([1.0])}
    adamw_step(p, {"w": np.array([0.5])}, AdamWState(lr=0.1, weight_decay=0.02))
    assert abs(p["w"][0] - 0.8980) <= 1e-4
    assert p["w"][0] == pytest.approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8) - 0.002, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=6), st.floats(-3, 3), st.floats(1e-4, 0.5))
def test_adamw_without_decay_matches_adam(grads, theta0, lr):
    p = {"w": np.array([theta0])}
    state = AdamWState(lr=lr)
    theta, m, v = theta0, 0.0, 0.0
    for t, g in enumerate(grads, 1):
        adamw_step(p, {"w": np.array([g])}, state)
        theta, m, v = adam_reference(theta, g, m, v, t, lr)
        assert abs(p["w"][0] - theta) <= 1e-12
    assert np.all(state.v["w"] >= 0) and state.step == len(grads)


def test_zero_gradient_only_decays():
    p = {"w": np.array([2.0, -1.0])}
    adamw_step(p, {"w": np.zeros(2)}, AdamWState(lr=0.1, weight_decay=0.02))
    np.testing.assert_allclose(p["w"], np.array([2.0, -1.0]) * (1 - 0.1 * 0.02), atol=1e-15)


def test_adamw_rejects_nonfinite():
    p = {"w": np.array([1.0])}
    with pytest.raises(NumericError):
        adamw_step(p, {"w": np.array([np.nan])}, AdamWState())
    assert p["w"][0] == 1.0


def test_clip_examples():
    g = {"a": np.array([3.0, 4.0])}
    clip_global_norm(g, 1.0)
    assert g["a"].tolist() == [0.6, 0.8]
    g = {"a": np.array([0.3, 0.4])}
    clip_global_norm(g, 1.0)
    assert g["a"].tolist() == [0.3, 0.4]
    with pytest.raises(ValueError):
        clip_global_norm(g, 0.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=8), st.floats(1e-3, 1e3))
def test_clip_never_increases_norm(vals, max_norm):
    g = {"a": np.array(vals[: len(vals) // 2 + 1]), "b": np.array(vals)}
    before = global_norm(g)
    clip_global_norm(g, max_norm)
    after = global_norm(g)
    assert after <= before + 1e-12
    assert after <= max_norm * (1 + 1e-12) + 1e-12


def test_lookahead_sync_examples():
    fast = {"w": np.array([2.0])}
    state = LookaheadState({"w": np.array([0.0])}, k=5, alpha=0.5)
    lookahead_sync(fast, state)
    assert (state.slow["w"][0], fast["w"][0]) == (1.0, 1.0)
    fast = {"w": np.array([2.0])}
    state = LookaheadState({"w": np.array([0.0])}, alpha=1.0)
    lookahead_sync(fast, state)
    assert state.slow["w"][0] == 2.0


def test_lookahead_geometric_convergence():
    # fast held at 2 before each sync: slow goes 0 -> 1 -> 1.5 (gap halves)
    state = LookaheadState({"w": np.array([0.0])}, alpha=0.5)
    for expected in (1.0, 1.5):
        fast = {"w": np.array([2.0])}
        lookahead_sync(fast, state)
        assert state.slow["w"][0] == expected


def test_lookahead_alpha_one_is_transparent():
    rng = np.random.default_rng(0)
    grads = [rng.normal(size=3) for _ in range(10)]
    a = {"w": np.ones(3)}
    b = {"w": np.ones(3)}
    sa, sb = AdamWState(lr=0.05), AdamWState(lr=0.05)
    la = LookaheadState.wrap(b, k=3, alpha=1.0)
    for t, g in enumerate(grads, 1):
        adamw_step(a, {"w": g}, sa)
        adamw_step(b, {"w": g}, sb)
        lookahead_tick(b, la)
        if t % 3 == 0:
            np.testing.assert_array_equal(a["w"], b["w"])


class _Scalar:
    """One-parameter model whose train_step pulls w toward 3."""

    def __init__(self):
        self.params = {"w": np.array([0.0])}
        self.grads = {"w": np.zeros(1)}

    def train_step(self, batch, rng):
        self.grads["w"][:] = 2 * (self.params["w"] - 3.0) * len(batch) / 4
        return float((self.params["w"][0] - 3.0) ** 2)


class _Data:
    def __init__(self, n):
        self.n = n

    def __len__(self):
        return self.n

    def batch(self, idx):
        return list(idx)


def _scripted(values):
    it = iter(values)
    return lambda model, data: {"EM": next(it)}


def test_train_loop_runs_all_epochs_when_improving():
    cfg = TrainConfig(batch_size=2, lr=0.1, epochs=8, patience=5)
    res = train_loop(_Scalar(), _Data(4), _Data(1), cfg, _scripted(range(1, 20)))
    assert len(res.log) == 8 and res.best_epoch == 8
    assert res.best_metric == max(r["val"]["EM"] for r in res.log)


def test_train_loop_patience():
    cfg = TrainConfig(batch_size=2, lr=0.1, epochs=100, patience=5)
    res = train_loop(_Scalar(), _Data(4), _Data(1), cfg, _scripted([7.0] * 50))
    assert len(res.log) == 6 and res.best_epoch == 1


def test_train_loop_fixed_updates():
    cfg = TrainConfig(batch_size=2, lr=0.1, max_updates=5, patience=1)
    res = train_loop(_Scalar(), _Data(4), _Data(1), cfg, _scripted([1.0] * 10))
    assert res.best_updates == 5 and res.log[-1]["updates"] == 5 and len(res.log) == 3


def test_train_loop_nan_aborts():
    cfg = TrainConfig(batch_size=2)
    with pytest.raises(NumericError):
        train_loop(_Scalar(), _Data(4), _Data(1), cfg, _scripted([float("nan")]))


def test_train_loop_deterministic_log(tmp_path):
    cfg = TrainConfig(batch_size=3, lr=0.05, epochs=4, seed=9)
    logs = []
    for run in range(2):
        path = tmp_path / f"log{run}.jsonl"
        m = _Scalar()
        evaluate = lambda model, data: {"EM": -abs(model.params["w"][0] - 3.0)}  # noqa: E731
        train_loop(m, _Data(7), _Data(1), cfg, evaluate, log_path=path)
        logs.append(path.read_text())
    assert logs[0] == logs[1]
    first = json.loads(logs[0].splitlines()[0])
    assert set(first) == {"epoch", "updates", "train_loss", "val"}


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(patience=0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
