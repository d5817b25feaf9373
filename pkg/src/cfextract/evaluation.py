"""SQuAD1.1-style answer normalisation, EM/F1, binary P/R/F1 and the span report."""

import collections
import json
import re
import string
import unicodedata
from dataclasses import asdict, dataclass

_ARTICLES = re.compile(r"\b(a|an|the)\b", re.UNICODE)
_ASCII_PUNCT = frozenset(string.punctuation)
# U+0130 is the only code point whose str.lower() is two characters long.
_LOWER_FIX = {0x130: "i"}


def _is_punct(ch):
    return ch in _ASCII_PUNCT or unicodedata.category(ch).startswith("P")


def normalize(text):
    """Lowercase, drop punctuation and articles, collapse whitespace."""
    text = text.translate(_LOWER_FIX).lower()
    text = "".join(ch for ch in text if not _is_punct(ch))
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def exact_match(pred, gold):
    return int(normalize(pred) == normalize(gold))


def token_f1(pred, gold):
    pred_toks = normalize(pred).split()
    gold_toks = normalize(gold).split()
    if not pred_toks or not gold_toks:
        return float(pred_toks == gold_toks)
    same = sum((collections.Counter(pred_toks) & collections.Counter(gold_toks)).values())
    if same == 0:
        return 0.0
    precision = same / len(pred_toks)
    recall = same / len(gold_toks)
    return 2 * precision * recall / (precision + recall)


def f1_from_pr(precision, recall):
    """Harmonic mean; 0 when both inputs are 0."""
    if precision + recall <= 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class BinaryMetrics:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def accuracy(self):
        n = self.tp + self.fp + self.fn + self.tn
        return 100.0 * (self.tp + self.tn) / n if n else 0.0


def binary_prf(preds, golds):
    """Precision/recall/F1 (percent) with label 1 as the positive class."""
    preds = list(preds)
    golds = list(golds)
    if len(preds) != len(golds):
        raise ValueError(f"length mismatch: {len(preds)} predictions vs {len(golds)} golds")
    tp = fp = fn = tn = 0
    for p, g in zip(preds, golds):
        p, g = int(p), int(g)
        if p not in (0, 1) or g not in (0, 1):
            raise ValueError(f"labels must be 0/1, got pred={p} gold={g}")
        if p and g:
            tp += 1
        elif p:
            fp += 1
        elif g:
            fn += 1
        else:
            tn += 1
    precision = 100.0 * tp / (tp + fp) if tp + fp else 0.0
    recall = 100.0 * tp / (tp + fn) if tp + fn else 0.0
    return BinaryMetrics(precision, recall, f1_from_pr(precision, recall), tp, fp, fn, tn)


@dataclass(frozen=True)
class EvalReport:
    EM: float
    F1: float
    A_EM: float
    A_F1: float
    C_EM: float
    C_F1: float
    ACC_no_c: float
    n_examples: int

    ROWS = ("EM", "F1", "A_EM", "A_F1", "C_EM", "C_F1", "ACC_no_c")

    def to_table(self):
        labels = {"ACC_no_c": "ACC_no-c"}
        lines = [f"{'metric':<10}{'value':>8}"]
        for key in self.ROWS:
            lines.append(f"{labels.get(key, key):<10}{getattr(self, key):>8.2f}")
        lines.append(f"{'n':<10}{self.n_examples:>8d}")
        return "\n".join(lines) + "\n"

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def _consequent_scores(pred, gold):
    if pred is None and gold is None:
        return 1, 1.0
    if pred is None or gold is None:
        return 0, 0.0
    return exact_match(pred, gold), token_f1(pred, gold)


def subtask2_report(preds, golds):
    """Aggregate the span panel.

    ``preds`` and ``golds`` are sequences of objects with ``id``,
    ``antecedent_text`` and ``consequent_text`` (None for no consequent),
    aligned by position. Per example, overall EM is antecedent EM AND
    consequent EM, overall F1 is the mean of the two F1s.
    """
    preds = list(preds)
    golds = list(golds)
    if len(preds) != len(golds):
        raise ValueError(f"{len(preds)} predictions for {len(golds)} gold examples")
    sums = dict.fromkeys(EvalReport.ROWS, 0.0)
    for p, g in zip(preds, golds):
        if str(p.id) != str(g.id):
            raise ValueError(f"id mismatch: prediction {p.id!r} vs gold {g.id!r}")
        a_em = exact_match(p.antecedent_text, g.antecedent_text)
        a_f1 = token_f1(p.antecedent_text, g.antecedent_text)
        c_em, c_f1 = _consequent_scores(p.consequent_text, g.consequent_text)
        sums["A_EM"] += a_em
        sums["A_F1"] += a_f1
        sums["C_EM"] += c_em
        sums["C_F1"] += c_f1
        sums["EM"] += a_em and c_em
        sums["F1"] += (a_f1 + c_f1) / 2
        sums["ACC_no_c"] += (p.consequent_text is None) == (g.consequent_text is None)
    n = len(golds)
    vals = {k: (100.0 * v / n if n else 0.0) for k, v in sums.items()}
    return EvalReport(n_examples=n, **vals)
