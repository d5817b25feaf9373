"""Span logits -> antecedent/consequent predictions, CLS pair meaning "no consequent"."""

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernels import best_pair
from .neural.layers import log_softmax


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class DecodeConstraints:
    max_antecedent_len: int = 116
    max_consequent_len: int = 56

    def __post_init__(self):
        if self.max_antecedent_len < 1 or self.max_consequent_len < 1:
            raise ValueError("length caps must be >= 1")


@dataclass(frozen=True)
class SpanPrediction:
    id: str
    antecedent: tuple
    antecedent_text: str
    antecedent_chars: tuple
    consequent: tuple = None
    consequent_text: str = None
    consequent_chars: tuple = None
    scores: tuple = ()


def span_to_text(seq, span):
    """Source substring from the first token's start to the last token's end."""
    s, e = span
    if s < seq.first or e < s or e >= len(seq):
        raise ValueError(f"token span {span} invalid for a {len(seq)}-token sequence")
    return seq.text[seq.offsets[s][0]:seq.offsets[e][1]]


def char_span(seq, span):
    return seq.offsets[span[0]][0], seq.offsets[span[1]][1]


def _independent(start, end, lo, n):
    s = lo + int(np.argmax(start[lo:n]))
    e = lo + int(np.argmax(end[lo:n]))
    return s, max(e, s)


def decode_spans(logits, seq, constraints=DecodeConstraints(), joint=True, example_id=None):
    """Pick the antecedent and (optional) consequent spans.

    ``logits`` is (4, T) with rows a_s, a_e, c_s, c_e and ``T >= len(seq)``;
    positions past ``len(seq)`` are ignored. In joint mode both spans
    maximise ``start[s] + end[e]`` over ``1 <= s <= e`` within the length
    cap, ties to the smaller start then the smaller end; the consequent
    also competes against the CLS pair ``(0, 0)``, which wins ties. In
    independent mode each row is argmaxed on its own, an end before the
    start is pulled up to the start, and a consequent with either index
    at CLS is dropped.
    """
    logits = np.asarray(logits, dtype=np.float64)
    n = len(seq)
    if logits.shape[0] != 4 or logits.shape[1] < n:
        raise ValueError(f"logits of shape {logits.shape} do not cover {n} tokens")
    first = seq.first
    if n <= first:
        raise DecodeError("sequence has no token after CLS")
    rows = logits[:, :n]
    if joint:
        a_s, a_e, _ = best_pair(rows[0], rows[1], first, n, constraints.max_antecedent_len)
        if a_s < 0:
            raise DecodeError("no finite-scoring antecedent span")
        c_s, c_e, c_best = best_pair(rows[2], rows[3], first, n, constraints.max_consequent_len)
        if seq.has_cls and rows[2, 0] + rows[3, 0] >= c_best:
            c_s = c_e = 0
    else:
        a_s, a_e = _independent(rows[0], rows[1], first, n)
        c_s, c_e = _independent(rows[2], rows[3], 0, n)
        if c_s == 0 or c_e == 0:
            c_s = c_e = 0
    logp = log_softmax(rows)
    scores = (logp[0, a_s], logp[1, a_e], logp[2, c_s], logp[3, c_e])
    cons = None if (c_s, c_e) == (0, 0) or c_s < first else (c_s, c_e)
    return SpanPrediction(
        example_id, (a_s, a_e), span_to_text(seq, (a_s, a_e)), char_span(seq, (a_s, a_e)),
        cons, None if cons is None else span_to_text(seq, cons),
        None if cons is None else char_span(seq, cons), tuple(float(x) for x in scores))


PREDICTION_HEADER = ["id", "text", "antecedent_start", "antecedent_end",
                     "consequent_start", "consequent_end", "antecedent", "consequent"]


def write_predictions(preds, seqs, path, delimiter=","):
    """Corpus-format rows (char spans, -1/-1 for no consequent) plus the span strings."""
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(PREDICTION_HEADER)
    for p, seq in zip(preds, seqs):
        cs, ce = p.consequent_chars or (-1, -1)
        w.writerow([p.id, seq.text, *p.antecedent_chars, cs, ce, p.antecedent_text,
                    p.consequent_text or ""])
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")
