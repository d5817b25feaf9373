"""Mini pre-norm transformer encoder with a CLS classifier and a four-row span head.

Everything runs in float64 numpy with hand-written reverse mode so the
gradients can be checked against finite differences.
"""

import json
from dataclasses import asdict, dataclass

import numpy as np

from . import layers as L

SPAN_ROWS = ("a_s", "a_e", "c_s", "c_e")


class StateError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int = 1000
    max_len: int = 64
    d_in: int = 64
    d_out: int = 64
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 128
    dropout: float = 0.0415
    task: str = "span"
    seed: int = 0

    def __post_init__(self):
        if self.d_in % self.n_heads:
            raise ValueError("d_in must be divisible by n_heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.max_len < 2:
            raise ValueError("max_len must be >= 2")
        if self.task not in ("span", "cls"):
            raise ValueError(f"unknown task {self.task!r}")


@dataclass
class Batch:
    ids: np.ndarray
    lengths: np.ndarray
    segments: np.ndarray = None
    targets: np.ndarray = None  # (B, 4) span targets
    labels: np.ndarray = None  # (B,) class labels

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        if self.ids.ndim == 1:
            self.ids = self.ids[None, :]
        self.lengths = np.asarray(self.lengths, dtype=np.int64).reshape(-1)
        if self.segments is None:
            self.segments = np.zeros_like(self.ids)

    @property
    def key_mask(self):
        return np.arange(self.ids.shape[1])[None, :] < self.lengths[:, None]


def param_names(config):
    names = ["tok_emb", "seg_emb", "pos_emb"]
    for i in range(config.n_layers):
        p = f"l{i}."
        names += [p + n for n in ("ln1_g", "ln1_b", "wq", "bq", "wk", "bk", "wv", "bv",
                                   "wo", "bo", "ln2_g", "ln2_b", "w1", "b1", "w2", "b2")]
    names += ["lnf_g", "lnf_b", "out_w", "out_b", "cls_w", "cls_b", "span_w"]
    return names


def init_params(config):
    """normal(0, 0.02) weights and tables, unit LayerNorm gains, zero biases."""
    rng = np.random.default_rng(config.seed)
    d, f, do = config.d_in, config.d_ff, config.d_out
    shapes = {"tok_emb": (config.vocab_size, d), "seg_emb": (2, d), "pos_emb": (config.max_len, d),
              "lnf_g": (d,), "lnf_b": (d,), "out_w": (d, do), "out_b": (do,),
              "cls_w": (do, 2), "cls_b": (2,), "span_w": (do, 4)}
    for i in range(config.n_layers):
        p = f"l{i}."
        shapes.update({p + "ln1_g": (d,), p + "ln1_b": (d,), p + "ln2_g": (d,), p + "ln2_b": (d,),
                       p + "w1": (d, f), p + "b1": (f,), p + "w2": (f, d), p + "b2": (d,)})
        for n in "qkvo":
            shapes.update({p + "w" + n: (d, d), p + "b" + n: (d,)})
    params = {}
    for name in param_names(config):
        shape = shapes[name]
        leaf = name.split(".")[-1]
        if leaf.endswith("_g"):
            params[name] = np.ones(shape)
        elif leaf.startswith("b") or leaf.endswith("_b"):
            params[name] = np.zeros(shape)
        else:
            params[name] = rng.normal(0.0, 0.02, size=shape)
    return params


def masked_span_logits(raw, lengths):
    """Mask CLS on the antecedent rows and padding on every row. raw: (B, 4, T)."""
    T = raw.shape[-1]
    valid = np.arange(T)[None, :] < lengths[:, None]
    out = np.where(valid[:, None, :], raw, -np.inf)
    out[:, :2, 0] = -np.inf
    return out


class Model:
    def __init__(self, config, params=None):
        self.config = config
        self.params = params if params is not None else init_params(config)
        self.grads = {n: np.zeros_like(p) for n, p in self.params.items()}
        self._cache = None
        self._dlogits = None

    # forward

    def forward_embed(self, ids, segments=None):
        ids = np.asarray(ids, dtype=np.int64)
        if ids.shape[-1] > self.config.max_len:
            raise ValueError(f"sequence length {ids.shape[-1]} exceeds max_len {self.config.max_len}")
        if ids.size and (ids.min() < 0 or ids.max() >= self.config.vocab_size):
            raise ValueError("token id outside the vocabulary")
        segments = np.zeros_like(ids) if segments is None else np.asarray(segments, dtype=np.int64)
        p = self.params
        return p["tok_emb"][ids] + p["seg_emb"][segments] + p["pos_emb"][:ids.shape[-1]]

    def encode_seq(self, E, key_mask, train=False, rng=None):
        """Encoder stack plus final LayerNorm, output projection and dropout."""
        p, cfg = self.params, self.config
        caches = []
        x = E
        for i in range(cfg.n_layers):
            pre = f"l{i}."
            a, c_ln1 = L.layer_norm_forward(x, p[pre + "ln1_g"], p[pre + "ln1_b"])
            att, c_att = L.attention_forward(a, p, pre, cfg.n_heads, key_mask)
            x = x + att
            h, c_ln2 = L.layer_norm_forward(x, p[pre + "ln2_g"], p[pre + "ln2_b"])
            u, _ = L.linear_forward(h, p[pre + "w1"], p[pre + "b1"])
            g, c_gelu = L.gelu_forward(u)
            f, _ = L.linear_forward(g, p[pre + "w2"], p[pre + "b2"])
            x = x + f
            if not np.all(np.isfinite(x)):
                raise FloatingPointError(f"non-finite activations in encoder layer {i}")
            caches.append((c_ln1, c_att, c_ln2, h, c_gelu, g))
        z, c_lnf = L.layer_norm_forward(x, p["lnf_g"], p["lnf_b"])
        H, _ = L.linear_forward(z, p["out_w"], p["out_b"])
        mask = None
        if train and cfg.dropout > 0:
            rng = rng if rng is not None else np.random.default_rng(cfg.seed)
            mask = (rng.random(H.shape) >= cfg.dropout) / (1.0 - cfg.dropout)
            H = H * mask
        return H, (caches, c_lnf, z, mask)

    def classify_logits(self, H):
        return H[:, 0] @ self.params["cls_w"] + self.params["cls_b"]

    def classify(self, H):
        """Two-way class probabilities from the CLS row."""
        return L.softmax(self.classify_logits(H))

    def span_scores(self, H, lengths):
        """(B, 4, T) masked logits for a_s, a_e, c_s, c_e."""
        raw = np.einsum("btd,dj->bjt", H, self.params["span_w"])
        return masked_span_logits(raw, lengths)

    def forward(self, batch, train=False, rng=None):
        E = self.forward_embed(batch.ids, batch.segments)
        H, enc_cache = self.encode_seq(E, batch.key_mask, train, rng)
        if self.config.task == "span":
            out = self.span_scores(H, batch.lengths)
        else:
            out = self.classify_logits(H)
        self._cache = (batch, H, enc_cache)
        self._dlogits = None
        return out

    # losses

    def loss(self, batch, out):
        """Mean over the batch of the summed per-row NLL (span) or 2-way CE (cls)."""
        if self.config.task == "span":
            value, self._dlogits = span_loss(out, batch.targets, batch.lengths)
        else:
            value, self._dlogits = classification_loss(out, batch.labels)
        return value

    # backward

    def backward(self, scale=1.0):
        if self._cache is None or self._dlogits is None:
            raise StateError("backward called before forward and loss")
        batch, H, (caches, c_lnf, z, mask) = self._cache
        p, cfg, g = self.params, self.config, {}
        dlog = self._dlogits * scale
        g["cls_w"] = np.zeros_like(p["cls_w"])
        g["cls_b"] = np.zeros_like(p["cls_b"])
        g["span_w"] = np.zeros_like(p["span_w"])
        if cfg.task == "span":
            dlog = np.where(np.isfinite(dlog), dlog, 0.0)
            dH = np.einsum("bjt,dj->btd", dlog, p["span_w"])
            g["span_w"] = np.einsum("btd,bjt->dj", H, dlog)
        else:
            dH = np.zeros_like(H)
            dH[:, 0] = dlog @ p["cls_w"].T
            g["cls_w"] = H[:, 0].T @ dlog
            g["cls_b"] = dlog.sum(axis=0)
        if mask is not None:
            dH = dH * mask
        dz, g["out_w"], g["out_b"] = L.linear_backward(dH, z, p["out_w"])
        dx, g["lnf_g"], g["lnf_b"] = L.layer_norm_backward(dz, c_lnf)
        for i in reversed(range(cfg.n_layers)):
            pre = f"l{i}."
            c_ln1, c_att, c_ln2, h, c_gelu, gl = caches[i]
            dg, g[pre + "w2"], g[pre + "b2"] = L.linear_backward(dx, gl, p[pre + "w2"])
            du = L.gelu_backward(dg, c_gelu)
            dh, g[pre + "w1"], g[pre + "b1"] = L.linear_backward(du, h, p[pre + "w1"])
            dxi, g[pre + "ln2_g"], g[pre + "ln2_b"] = L.layer_norm_backward(dh, c_ln2)
            dx = dx + dxi
            da = L.attention_backward(dx, c_att, p, pre, g)
            dxi, g[pre + "ln1_g"], g[pre + "ln1_b"] = L.layer_norm_backward(da, c_ln1)
            dx = dx + dxi
        ids, segs = batch.ids, batch.segments
        g["tok_emb"] = np.zeros_like(p["tok_emb"])
        np.add.at(g["tok_emb"], ids, dx)
        g["seg_emb"] = np.zeros_like(p["seg_emb"])
        np.add.at(g["seg_emb"], segs, dx)
        g["pos_emb"] = np.zeros_like(p["pos_emb"])
        g["pos_emb"][:ids.shape[1]] = dx.sum(axis=0)
        for name in self.params:
            self.grads[name][...] = g[name]
        return self.grads

    def train_step(self, batch, rng=None):
        out = self.forward(batch, train=True, rng=rng)
        value = self.loss(batch, out)
        self.backward()
        return value

    # inference helpers

    def predict(self, batch):
        """Eval-mode probabilities: (B, 2) for cls, (B, 4, T) for span."""
        E = self.forward_embed(batch.ids, batch.segments)
        H, _ = self.encode_seq(E, batch.key_mask, train=False)
        if self.config.task == "span":
            return L.softmax(self.span_scores(H, batch.lengths))
        return self.classify(H)

    # checkpoints

    def save(self, path, updates=0, extra=None):
        names = param_names(self.config)
        header = {"config": asdict(self.config), "seed": self.config.seed, "updates": int(updates),
                  "order": names, "extra": extra or {}}
        with open(path, "wb") as fh:
            np.savez(fh, header=np.array(json.dumps(header)),
                     **{f"p{i:03d}": self.params[n] for i, n in enumerate(names)})

    @classmethod
    def load(cls, path):
        with np.load(path) as zf:
            header = json.loads(str(zf["header"]))
            params = {n: zf[f"p{i:03d}"].copy() for i, n in enumerate(header["order"])}
        model = cls(ModelConfig(**header["config"]), params)
        model.header = header
        return model


def check_span_targets(t, lengths):
    t = np.asarray(t)
    lengths = np.asarray(lengths)
    for b, (a_s, a_e, c_s, c_e) in enumerate(t):
        n = lengths[b]
        if not 1 <= a_s <= a_e < n:
            raise ValueError(f"example {b}: antecedent target ({a_s}, {a_e}) invalid or masked")
        if (c_s, c_e) != (0, 0) and not 1 <= c_s <= c_e < n:
            raise ValueError(f"example {b}: consequent target ({c_s}, {c_e}) invalid")


def span_loss(logits, targets, lengths=None):
    """Sum over the four rows of -log P_j(t_j), averaged over the batch.

    ``logits`` is (B, 4, T) with masked positions at -inf. Returns the loss
    and its gradient with respect to ``logits``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim == 2:
        logits = logits[None]
    B, _, T = logits.shape
    t = np.asarray(targets, dtype=np.int64).reshape(B, 4)
    check_span_targets(t, np.full(B, T) if lengths is None else lengths)
    logp = L.log_softmax(logits)
    picked = np.take_along_axis(logp, t[:, :, None], axis=2)[:, :, 0]
    if not np.all(np.isfinite(picked)):
        raise ValueError("a target index points at a masked position")
    d = np.exp(logp)
    rows = np.arange(B)[:, None], np.arange(4)[None, :]
    d[rows[0], rows[1], t] -= 1.0
    return float(-picked.sum() / B), d / B


def classification_loss(logits, labels):
    """Two-way cross-entropy averaged over the batch, with its logit gradient."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if not np.isin(y, (0, 1)).all():
        raise ValueError("class labels must be 0/1")
    B = logits.shape[0]
    logp = L.log_softmax(logits)
    d = np.exp(logp)
    d[np.arange(B), y] -= 1.0
    return float(-logp[np.arange(B), y].sum() / B), d / B
