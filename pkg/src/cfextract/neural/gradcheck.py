"""Central finite differences against the hand-written backward pass."""

import dataclasses

import numpy as np

from .model import Batch, Model, ModelConfig, param_names


def _random_params(model, rng, scale):
    # Larger-than-init weights so every path carries a visible gradient.
    for name, p in model.params.items():
        leaf = name.split(".")[-1]
        if leaf.endswith("_g"):
            p[...] = 1.0 + 0.1 * rng.standard_normal(p.shape)
        else:
            p[...] = scale * rng.standard_normal(p.shape)


def random_batch(config, rng, batch_size=3):
    T = config.max_len
    lengths = rng.integers(max(3, T // 2), T + 1, size=batch_size)
    lengths[0] = T
    ids = rng.integers(3, config.vocab_size, size=(batch_size, T))
    ids[:, 0] = 0
    ids[np.arange(T)[None, :] >= lengths[:, None]] = 2
    targets, labels = [], rng.integers(0, 2, size=batch_size)
    for n in lengths:
        a = np.sort(rng.integers(1, n, size=2))
        c = np.sort(rng.integers(1, n, size=2)) if rng.random() < 0.6 else (0, 0)
        targets.append([a[0], a[1], c[0], c[1]])
    return Batch(ids, lengths, targets=np.array(targets), labels=labels)


def _loss(model, batch):
    return model.loss(batch, model.forward(batch, train=False))


def relative_error(analytic, numeric, floor=1e-4):
    """||a - n|| / max(||a|| + ||n||, floor).

    The floor keeps groups whose true gradient is zero (key biases, the
    output bias under the shift-invariant span softmax) from dividing
    rounding noise by rounding noise.
    """
    denom = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), floor)
    return float(np.linalg.norm(analytic - numeric) / denom)


def check_model(model, batch, rng, step=1e-5, max_entries=40):
    """Per-parameter-group relative error on a sample of entries."""
    _loss(model, batch)
    grads = {n: g.copy() for n, g in model.backward().items()}
    errors = {}
    for name in param_names(model.config):
        p = model.params[name]
        flat = p.reshape(-1)
        idx = np.arange(flat.size)
        if flat.size > max_entries:
            idx = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        numeric = np.empty(len(idx))
        for j, i in enumerate(idx):
            old = flat[i]
            flat[i] = old + step
            up = _loss(model, batch)
            flat[i] = old - step
            down = _loss(model, batch)
            flat[i] = old
            numeric[j] = (up - down) / (2 * step)
        errors[name] = relative_error(grads[name].reshape(-1)[idx], numeric)
    return errors


def grad_check(config, trials=1, seed=0, scale=0.3, max_entries=40):
    """Max relative error of backward vs central differences over ``trials`` random draws.

    Dropout is forced off. Returns ``(max_error, per_group_errors_of_worst_trial)``.
    """
    config = dataclasses.replace(config, dropout=0.0)
    rng = np.random.default_rng(seed)
    worst, worst_groups = 0.0, {}
    for _ in range(trials):
        model = Model(config)
        _random_params(model, rng, scale)
        errors = check_model(model, random_batch(config, rng), rng, max_entries=max_entries)
        top = max(errors.values())
        if top >= worst:
            worst, worst_groups = top, errors
    return worst, worst_groups


def tiny_configs(n, seed=0):
    """``n`` small random configs spanning 1 layer x d=8 to 2 layers x d=32.

    The first and last configs pin those two corners; the rest are drawn
    at random, alternating between the span and classification heads.
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        if i == 0:
            layers, d = 1, 8
        elif i == n - 1:
            layers, d = 2, 32
        else:
            layers, d = int(rng.integers(1, 3)), int(rng.choice([8, 16, 32]))
        heads = int(rng.choice([h for h in (1, 2, 4) if d % h == 0]))
        out.append(ModelConfig(
            vocab_size=int(rng.integers(8, 30)), max_len=int(rng.integers(4, 9)), d_in=d,
            d_out=int(rng.choice([d, 8])), n_layers=layers, n_heads=heads,
            d_ff=int(rng.choice([d, 2 * d])), dropout=0.0, task=("span", "cls")[i % 2],
            seed=seed + i))
    return out
