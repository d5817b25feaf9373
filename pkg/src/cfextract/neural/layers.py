"""Forward/backward pairs for the encoder building blocks.

Each ``*_forward`` returns ``(out, cache)``; the matching ``*_backward``
takes the upstream gradient and the cache.
"""

import numpy as np

LN_EPS = 1e-5
_GELU_C = np.sqrt(2.0 / np.pi)


def softmax(x, axis=-1):
    z = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(x, axis=-1):
    m = np.max(x, axis=axis, keepdims=True)
    z = x - m
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def layer_norm_forward(x, gamma, beta):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * rstd
    return xhat * gamma + beta, (xhat, rstd, gamma)


def layer_norm_backward(dout, cache):
    xhat, rstd, gamma = cache
    axes = tuple(range(dout.ndim - 1))
    dgamma = (dout * xhat).sum(axis=axes)
    dbeta = dout.sum(axis=axes)
    dxhat = dout * gamma
    dx = rstd * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                 - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    return dx, dgamma, dbeta


def gelu_forward(x):
    u = _GELU_C * (x + 0.044715 * x ** 3)
    t = np.tanh(u)
    return 0.5 * x * (1.0 + t), (x, t)


def gelu_backward(dout, cache):
    x, t = cache
    du = _GELU_C * (1.0 + 3 * 0.044715 * x * x)
    return dout * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


def linear_forward(x, w, b=None):
    out = x @ w
    if b is not None:
        out = out + b
    return out, x


def linear_backward(dout, x, w):
    d = x.shape[-1]
    dw = x.reshape(-1, d).T @ dout.reshape(-1, dout.shape[-1])
    db = dout.reshape(-1, dout.shape[-1]).sum(axis=0)
    return dout @ w.T, dw, db


def attention_forward(x, p, prefix, n_heads, key_mask):
    """Multi-head self-attention over ``x`` (B, T, d); masked keys get zero weight."""
    B, T, d = x.shape
    dh = d // n_heads

    def heads(t):
        return t.reshape(B, T, n_heads, dh).transpose(0, 2, 1, 3)

    q = heads(x @ p[prefix + "wq"] + p[prefix + "bq"])
    k = heads(x @ p[prefix + "wk"] + p[prefix + "bk"])
    v = heads(x @ p[prefix + "wv"] + p[prefix + "bv"])
    scale = 1.0 / np.sqrt(dh)
    scores = (q @ k.transpose(0, 1, 3, 2)) * scale
    scores = np.where(key_mask[:, None, None, :], scores, -np.inf)
    probs = softmax(scores)
    ctx = (probs @ v).transpose(0, 2, 1, 3).reshape(B, T, d)
    out = ctx @ p[prefix + "wo"] + p[prefix + "bo"]
    return out, (x, q, k, v, probs, ctx, scale)


def attention_backward(dout, cache, p, prefix, grads):
    x, q, k, v, probs, ctx, scale = cache
    B, T, d = x.shape
    n_heads, dh = q.shape[1], q.shape[3]
    dctx, grads[prefix + "wo"], grads[prefix + "bo"] = linear_backward(dout, ctx, p[prefix + "wo"])
    dctx = dctx.reshape(B, T, n_heads, dh).transpose(0, 2, 1, 3)
    dprobs = dctx @ v.transpose(0, 1, 3, 2)
    dv = probs.transpose(0, 1, 3, 2) @ dctx
    dscores = probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True)) * scale
    dq = dscores @ k
    dk = dscores.transpose(0, 1, 3, 2) @ q

    def merge(t):
        return t.transpose(0, 2, 1, 3).reshape(B, T, d)

    dx = np.zeros_like(x)
    for name, dt in (("q", dq), ("k", dk), ("v", dv)):
        dxi, grads[prefix + "w" + name], grads[prefix + "b" + name] = linear_backward(
            merge(dt), x, p[prefix + "w" + name])
        dx += dxi
    return dx
