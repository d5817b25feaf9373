"""Probability-mean fusion with exhaustive and greedy member selection."""

import itertools
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .decode import DecodeConstraints, decode_spans
from .evaluation import binary_prf, subtask2_report

MAX_EXHAUSTIVE = 20


@dataclass
class Member:
    id: str
    probs: np.ndarray  # (N, 2) or (N, 4, T)
    metrics: dict = field(default_factory=dict)


@dataclass
class CandidatePool:
    example_ids: list
    members: list

    def __post_init__(self):
        ids = {m.id for m in self.members}
        if len(ids) != len(self.members):
            raise ValueError("duplicate member ids in pool")
        shapes = {m.probs.shape for m in self.members}
        if len(shapes) > 1:
            raise ValueError(f"members disagree on output shape: {sorted(shapes)}")
        for m in self.members:
            if m.probs.shape[0] != len(self.example_ids):
                raise ValueError(f"member {m.id} covers {m.probs.shape[0]} examples, "
                                 f"pool has {len(self.example_ids)}")

    def get(self, member_id):
        for m in self.members:
            if m.id == member_id:
                return m
        raise KeyError(member_id)

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for m in self.members:
            with open(directory / f"{m.id}.npz", "wb") as fh:
                np.savez(fh, ids=np.array(self.example_ids), probs=m.probs,
                         metrics=np.array(json.dumps(m.metrics)))

    @classmethod
    def load(cls, directory):
        """Read ``directory/*.npz``, or ``directory/*/pool/*.npz`` for a runs root."""
        members, example_ids = [], None
        paths = sorted(Path(directory).glob("*.npz")) or sorted(Path(directory).glob("*/pool/*.npz"))
        for path in paths:
            with np.load(path) as z:
                ids = [str(x) for x in z["ids"]]
                if example_ids is None:
                    example_ids = ids
                elif ids != example_ids:
                    raise ValueError(f"{path.name}: example ids differ from the rest of the pool")
                members.append(Member(path.stem, z["probs"].copy(), json.loads(str(z["metrics"]))))
        if not members:
            raise ValueError(f"no member files in {directory}")
        return cls(example_ids, members)


@dataclass
class EnsembleSpec:
    members: list
    metric: float
    fusion: str = "mean"
    n_evaluated: int = 0

    def to_json(self):
        return json.dumps(asdict(self), indent=2) + "\n"


def fuse(members):
    """Element-wise arithmetic mean of aligned probability arrays."""
    members = [np.asarray(m, dtype=np.float64) for m in members]
    if not members:
        raise ValueError("need at least one member")
    shape = members[0].shape
    for m in members[1:]:
        if m.shape != shape:
            raise ValueError(f"shape mismatch: {m.shape} vs {shape}")
    return np.mean(members, axis=0)


def classification_f1(golds):
    """Scorer: F1 (percent) of argmax over fused (N, 2) probabilities."""
    golds = np.asarray(golds)

    def score(fused):
        return binary_prf(np.argmax(fused, axis=1), golds).f1
    return score


def span_em(seqs, golds, constraints=DecodeConstraints(), field_name="EM"):
    """Scorer: decode fused (N, 4, T) probabilities, return the report's ``field_name``."""
    def score(fused):
        with np.errstate(divide="ignore"):
            logits = np.log(fused)
        preds = [decode_spans(logits[i], seq, constraints, example_id=g.id)
                 for i, (seq, g) in enumerate(zip(seqs, golds))]
        return getattr(subtask2_report(preds, golds), field_name)
    return score


def _member_score(pool, scorer, member_id):
    return scorer(pool.get(member_id).probs)


def best_combination(pool, scorer, top_k=10):
    """Exhaustive search over all non-empty subsets of the ``top_k`` best singles.

    Ties prefer the smaller subset, then the lexicographically first id list.
    """
    if top_k > MAX_EXHAUSTIVE:
        raise ValueError(f"top_k={top_k} needs {2 ** top_k - 1} fused evaluations; "
                         f"the limit is top_k <= {MAX_EXHAUSTIVE}")
    if top_k > len(pool.members) or top_k < 1:
        raise ValueError(f"top_k={top_k} outside 1..{len(pool.members)}")
    singles = {m.id: scorer(m.probs) for m in pool.members}
    ranked = sorted(singles, key=lambda i: (-singles[i], i))[:top_k]
    ranked.sort()
    best, best_ids, count = -np.inf, None, 0
    for size in range(1, top_k + 1):
        for ids in itertools.combinations(ranked, size):
            count += 1
            value = scorer(fuse([pool.get(i).probs for i in ids]))
            if value > best:
                best, best_ids = value, list(ids)
    return EnsembleSpec(best_ids, float(best), "mean", count)


def greedy_smallest_subset(pool, scorer):
    """Forward greedy: start from the best single member and keep adding the
    member with the largest strict improvement until none improves.

    Ties among candidates go to the smallest member id.
    """
    ids = sorted(m.id for m in pool.members)
    singles = {i: _member_score(pool, scorer, i) for i in ids}
    first = min(ids, key=lambda i: (-singles[i], i))
    chosen = [first]
    best = singles[first]
    count = len(ids)
    while True:
        cand_best, cand_id = best, None
        for i in ids:
            if i in chosen:
                continue
            value = scorer(fuse([pool.get(j).probs for j in chosen + [i]]))
            count += 1
            if value > cand_best:
                cand_best, cand_id = value, i
        if cand_id is None:
            break
        chosen.append(cand_id)
        best = cand_best
    return EnsembleSpec(chosen, float(best), "mean", count)
