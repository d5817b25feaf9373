"""AdamW, Lookahead, gradient clipping and the epoch loop with early stopping.

Parameters and gradients are dicts of name -> ndarray; updates are in place.
"""

import copy
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


class NumericError(FloatingPointError):
    pass


@dataclass
class AdamWState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adamw_step(params, grads, state):
    """One decoupled-weight-decay Adam update.

    The decay term ``lr * wd * theta`` uses the pre-update parameters and
    bypasses the adaptive scaling.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name!r}")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, g in grads.items():
        p = params[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        if state.weight_decay:
            update = update + state.lr * state.weight_decay * p
        p -= update
    return params, state


@dataclass
class LookaheadState:
    slow: dict
    k: int = 5
    alpha: float = 0.47
    counter: int = 0

    @classmethod
    def wrap(cls, params, k=5, alpha=0.47):
        if k < 1 or not 0.0 < alpha <= 1.0:
            raise ValueError("lookahead needs k >= 1 and alpha in (0, 1]")
        return cls({n: p.copy() for n, p in params.items()}, k, alpha)


def lookahead_sync(fast, state):
    """slow += alpha * (fast - slow); fast = slow."""
    for name, p in fast.items():
        slow = state.slow[name]
        slow += state.alpha * (p - slow)
        p[...] = slow
    return fast, state


def lookahead_tick(fast, state):
    """Count one inner step and sync every ``k`` of them."""
    state.counter += 1
    if state.counter % state.k == 0:
        lookahead_sync(fast, state)
    return fast, state


def global_norm(grads):
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def clip_global_norm(grads, max_norm):
    """Rescale all gradients together so their joint L2 norm is at most ``max_norm``."""
    if max_norm <= 0:
        raise ValueError("max_norm must be > 0")
    norm = global_norm(grads)
    if norm > max_norm:
        # divide by norm/max_norm so (3, 4) -> (0.6, 0.8) rounds exactly
        ratio = norm / max_norm
        for g in grads.values():
            g /= ratio
    return grads


@dataclass
class TrainConfig:
    batch_size: int = 64
    lr: float = 1.263e-5
    epochs: int = 8
    max_updates: int = 0
    max_grad_norm: float = 7.739
    weight_decay: float = 0.02
    adam_eps: float = 1e-8
    patience: int = 5
    eval_metric: str = "EM"
    lookahead_k: int = 5
    lookahead_alpha: float = 0.47
    use_lookahead: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.patience < 1 or self.batch_size < 1:
            raise ValueError("patience and batch_size must be >= 1")


@dataclass
class TrainResult:
    best_params: dict
    best_metric: float
    best_epoch: int
    best_updates: int
    log: list


def train_loop(model, train_data, val_data, config, evaluate, log_path=None):
    """Epoch loop with per-epoch validation and patience-based stopping.

    ``model`` exposes ``params``, ``grads`` and ``train_step(batch, rng)``
    returning the batch loss after filling ``grads``; ``train_data`` supports
    ``len`` and ``batch(indices)``. ``evaluate(model, val_data)`` returns a
    metric dict containing ``config.eval_metric``. With ``max_updates > 0``
    training stops after exactly that many updates, ignoring epochs and
    patience, and the final parameters are returned.
    """
    if len(train_data) == 0 or len(val_data) == 0:
        raise ValueError("train and validation data must be non-empty")
    rng = np.random.default_rng(config.seed)
    opt = AdamWState(lr=config.lr, eps=config.adam_eps, weight_decay=config.weight_decay)
    la = LookaheadState.wrap(model.params, config.lookahead_k, config.lookahead_alpha) \
        if config.use_lookahead else None
    fixed = config.max_updates > 0
    best, best_epoch, best_updates, best_params = -math.inf, 0, 0, None
    updates, stale, records = 0, 0, []
    epoch = 0
    out = open(log_path, "a", encoding="utf-8") if log_path else None
    try:
        while True:
            epoch += 1
            order = rng.permutation(len(train_data))
            total, n_batches = 0.0, 0
            for lo in range(0, len(order), config.batch_size):
                batch = train_data.batch(order[lo:lo + config.batch_size])
                total += model.train_step(batch, rng)
                n_batches += 1
                clip_global_norm(model.grads, config.max_grad_norm)
                adamw_step(model.params, model.grads, opt)
                if la is not None:
                    lookahead_tick(model.params, la)
                updates += 1
                if fixed and updates >= config.max_updates:
                    break
            metrics = evaluate(model, val_data)
            score = metrics[config.eval_metric]
            if score is None or math.isnan(score):
                raise NumericError(f"validation {config.eval_metric} is NaN after epoch {epoch}")
            rec = {"epoch": epoch, "updates": updates, "train_loss": total / max(n_batches, 1),
                   "val": metrics}
            records.append(rec)
            if out:
                out.write(json.dumps(rec, sort_keys=True) + "\n")
            log.info("epoch %d updates %d loss %.4f %s %.3f", epoch, updates,
                     rec["train_loss"], config.eval_metric, score)
            if fixed:
                if updates >= config.max_updates:
                    return TrainResult(copy.deepcopy(model.params), score, epoch, updates, records)
                continue
            if score > best:
                best, best_epoch, best_updates, stale = score, epoch, updates, 0
                best_params = copy.deepcopy(model.params)
            else:
                stale += 1
            if stale >= config.patience or epoch >= config.epochs:
                break
    finally:
        if out:
            out.close()
    return TrainResult(best_params, best, best_epoch, best_updates, records)
