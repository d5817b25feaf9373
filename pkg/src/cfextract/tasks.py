"""Encode corpora for the neural model and score it during training."""

import logging
from dataclasses import dataclass

import numpy as np

from .decode import DecodeConstraints, decode_spans
from .evaluation import binary_prf, subtask2_report
from .neural.model import Batch
from .tokenizer import (PAD_ID, AlignmentError, Vocab, align_char_span, encode, tokenize,
                        truncate)

log = logging.getLogger(__name__)


def build_vocab(texts, mode="whitespace", bpe=None, min_count=1):
    return Vocab.build(([t for t, _, _ in tokenize(x, mode, bpe)] for x in texts), min_count)


def _pad(seqs):
    T = max(len(s) for s in seqs)
    ids = np.full((len(seqs), T), PAD_ID, dtype=np.int64)
    for i, s in enumerate(seqs):
        ids[i, :len(s)] = s.ids
    return ids, np.array([len(s) for s in seqs])


@dataclass
class SpanDataset:
    examples: list
    seqs: list
    targets: np.ndarray
    lost: np.ndarray

    @classmethod
    def build(cls, examples, vocab, max_len, mode="whitespace", bpe=None):
        seqs, targets, lost = [], [], []
        for ex in examples:
            full = encode(ex.text, vocab, mode, True, bpe)
            seq = truncate(full, max_len)
            a = _align(full, ex.antecedent, ex.id)
            c = (0, 0) if ex.consequent is None else _align(full, ex.consequent, ex.id)
            gone = max(a[1], c[1]) >= len(seq)
            if gone:
                log.warning("example %s: gold span lies beyond the %d-token limit", ex.id, max_len)
            seqs.append(seq)
            targets.append((*a, *c))
            lost.append(gone)
        return cls(list(examples), seqs, np.array(targets, dtype=np.int64).reshape(-1, 4),
                   np.array(lost, dtype=bool))

    def __len__(self):
        return len(self.examples)

    def trainable(self):
        """Copy without the examples whose gold span was truncated away."""
        keep = np.flatnonzero(~self.lost)
        return SpanDataset([self.examples[i] for i in keep], [self.seqs[i] for i in keep],
                           self.targets[keep], self.lost[keep])

    def batch(self, indices):
        seqs = [self.seqs[i] for i in indices]
        ids, lengths = _pad(seqs)
        return Batch(ids, lengths, targets=self.targets[np.asarray(indices)])


def _align(seq, span, ex_id):
    try:
        return align_char_span(seq, span)
    except AlignmentError as exc:
        raise AlignmentError(f"example {ex_id}: {exc}") from None


@dataclass
class ClsDataset:
    examples: list
    seqs: list
    labels: np.ndarray

    @classmethod
    def build(cls, examples, vocab, max_len, mode="whitespace", bpe=None):
        seqs = [truncate(encode(ex.text, vocab, mode, True, bpe), max_len) for ex in examples]
        return cls(list(examples), seqs, np.array([ex.label for ex in examples], dtype=np.int64))

    def __len__(self):
        return len(self.examples)

    def batch(self, indices):
        ids, lengths = _pad([self.seqs[i] for i in indices])
        return Batch(ids, lengths, labels=self.labels[np.asarray(indices)])


def predict_probs(model, dataset, batch_size=128):
    """Eval-mode probabilities, padded to ``model.config.max_len`` for spans."""
    out = []
    for lo in range(0, len(dataset), batch_size):
        idx = np.arange(lo, min(lo + batch_size, len(dataset)))
        probs = model.predict(dataset.batch(idx))
        if probs.ndim == 3:
            pad = model.config.max_len - probs.shape[2]
            probs = np.pad(probs, ((0, 0), (0, 0), (0, pad)))
        out.append(probs)
    return np.concatenate(out, axis=0)


def decode_dataset(probs, dataset, constraints=DecodeConstraints(), joint=True):
    with np.errstate(divide="ignore"):
        logits = np.log(probs)
    return [decode_spans(logits[i], seq, constraints, joint, ex.id)
            for i, (seq, ex) in enumerate(zip(dataset.seqs, dataset.examples))]


def span_evaluator(constraints=DecodeConstraints()):
    def evaluate(model, dataset):
        preds = decode_dataset(predict_probs(model, dataset), dataset, constraints)
        report = subtask2_report(preds, dataset.examples)
        return {k: getattr(report, k) for k in report.ROWS}
    return evaluate


def cls_evaluate(model, dataset):
    probs = predict_probs(model, dataset)
    m = binary_prf(np.argmax(probs, axis=1), dataset.labels)
    return {"F1": m.f1, "precision": m.precision, "recall": m.recall, "accuracy": m.accuracy}
