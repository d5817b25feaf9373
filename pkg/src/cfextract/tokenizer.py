"""Whitespace/punctuation and BPE tokenisation with character offsets."""

import collections
import re
import string
import unicodedata
from dataclasses import dataclass, field, replace
from pathlib import Path

CLS, UNK, PAD = "[CLS]", "[UNK]", "[PAD]"
CLS_ID, UNK_ID, PAD_ID = 0, 1, 2
EOW = "</w>"

_WORD = re.compile(r"\S+")


class AlignmentError(ValueError):
    pass


def is_punct(ch):
    return ch in string.punctuation or unicodedata.category(ch).startswith("P")


@dataclass(frozen=True)
class TokenSequence:
    text: str
    tokens: tuple
    offsets: tuple
    has_cls: bool = False
    ids: tuple = None
    truncated: bool = False

    def __len__(self):
        return len(self.tokens)

    @property
    def first(self):
        """Index of the first real (non-CLS) token."""
        return 1 if self.has_cls else 0


def _split_word(word, start):
    i, j = 0, len(word)
    while i < j and is_punct(word[i]):
        i += 1
    while j > i and is_punct(word[j - 1]):
        j -= 1
    out = [(word[k], start + k, start + k + 1) for k in range(i)]
    if i < j:
        out.append((word[i:j], start + i, start + j))
    out.extend((word[k], start + k, start + k + 1) for k in range(j, len(word)))
    return out


def pretokenize(text):
    """Split on whitespace, then peel leading/trailing punctuation one char at a time.

    Returns a list of ``(token, start, end)``.
    """
    out = []
    for m in _WORD.finditer(text):
        out.extend(_split_word(m.group(), m.start()))
    return out


@dataclass(frozen=True)
class BpeModel:
    merges: tuple = ()

    def segment(self, word):
        return bpe_segment(self, word)

    def save(self, path):
        lines = [f"{a} {b}\n" for a, b in self.merges]
        Path(path).write_text("".join(lines), encoding="utf-8")

    @classmethod
    def load(cls, path):
        merges = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line:
                a, b = line.split(" ")
                merges.append((a, b))
        return cls(tuple(merges))


def _strip(sym):
    return sym[:-len(EOW)] if sym.endswith(EOW) else sym


def _symbols(word):
    return tuple(word) + (EOW,)


def train_bpe(corpus, num_merges):
    """Learn merges by repeatedly joining the most frequent adjacent pair.

    Words carry a separate end-of-word symbol. Ties go to the
    lexicographically smallest pair; training stops early once no pair
    occurs at least twice.
    """
    if num_merges < 0:
        raise ValueError("num_merges must be >= 0")
    words = collections.Counter(tok for text in corpus for tok, _, _ in pretokenize(text))
    vocab = {_symbols(w): c for w, c in words.items()}
    merges = []
    for _ in range(num_merges):
        pairs = collections.Counter()
        for syms, c in vocab.items():
            for pair in zip(syms, syms[1:]):
                pairs[pair] += c
        if not pairs:
            break
        top = max(pairs.values())
        if top < 2:
            break
        best = min(p for p, c in pairs.items() if c == top)
        merges.append(best)
        vocab = {_merge(syms, best): c for syms, c in vocab.items()}
    return BpeModel(tuple(merges))


def _merge(syms, pair):
    out = []
    i = 0
    while i < len(syms):
        if i + 1 < len(syms) and (syms[i], syms[i + 1]) == pair:
            out.append(syms[i] + syms[i + 1])
            i += 2
        else:
            out.append(syms[i])
            i += 1
    return tuple(out)


def bpe_segment(model, word):
    """Segment ``word`` into subword strings; the final piece ends in EOW."""
    syms = list(_symbols(word))
    ranks = {pair: i for i, pair in enumerate(model.merges)}
    while len(syms) > 1:
        cands = [(ranks[p], i) for i, p in enumerate(zip(syms, syms[1:])) if p in ranks]
        if not cands:
            break
        _, i = min(cands)
        syms[i:i + 2] = [syms[i] + syms[i + 1]]
    if len(syms) > 1 and syms[-1] == EOW:
        syms[-2:] = [syms[-2] + EOW]
    return syms


def bpe_decode(pieces):
    """Undo segmentation: concatenate pieces, turning EOW markers into spaces."""
    return "".join(pieces).replace(EOW, " ").strip()


@dataclass(frozen=True)
class Vocab:
    token_to_id: dict = field(default_factory=dict)

    @classmethod
    def build(cls, token_lists, min_count=1):
        counts = collections.Counter(t for toks in token_lists for t in toks)
        table = {CLS: CLS_ID, UNK: UNK_ID, PAD: PAD_ID}
        for tok in sorted(counts, key=lambda t: (-counts[t], t)):
            if counts[tok] >= min_count and tok not in table:
                table[tok] = len(table)
        return cls(table)

    def __len__(self):
        return len(self.token_to_id)

    def lookup(self, token):
        return self.token_to_id.get(token, UNK_ID)

    def save(self, path):
        rows = sorted(self.token_to_id.items(), key=lambda kv: kv[1])
        Path(path).write_text("".join(f"{t}\t{i}\n" for t, i in rows), encoding="utf-8")

    @classmethod
    def load(cls, path):
        table = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            tok, idx = line.rsplit("\t", 1)
            table[tok] = int(idx)
        return cls(table)


def tokenize(text, mode="whitespace", bpe=None):
    """Token strings and offsets without CLS or id lookup."""
    words = pretokenize(text)
    if mode == "whitespace":
        return words
    if mode != "bpe":
        raise ValueError(f"unknown tokenizer mode {mode!r}")
    if bpe is None:
        raise ValueError("bpe mode needs a BpeModel")
    out = []
    for word, start, _ in words:
        pos = start
        for piece in bpe_segment(bpe, word):
            width = len(_strip(piece))
            out.append((piece, pos, pos + width))
            pos += width
    return out


def encode(text, vocab=None, mode="whitespace", prepend_cls=True, bpe=None):
    toks = tokenize(text, mode, bpe)
    tokens = [t for t, _, _ in toks]
    offsets = [(s, e) for _, s, e in toks]
    if prepend_cls:
        tokens.insert(0, CLS)
        offsets.insert(0, (0, 0))
    ids = None
    if vocab is not None:
        ids = tuple(CLS_ID if prepend_cls and i == 0 else vocab.lookup(t)
                    for i, t in enumerate(tokens))
    return TokenSequence(text, tuple(tokens), tuple(offsets), prepend_cls, ids)


def align_char_span(seq, span):
    """Smallest token range whose offsets cover ``span`` (end-exclusive chars).

    Tokens partially overlapping the span are included whole.
    """
    start, end = span
    hits = [i for i in range(seq.first, len(seq))
            if seq.offsets[i][0] < end and seq.offsets[i][1] > start]
    if not hits:
        raise AlignmentError(f"char span {span} covers no token")
    return hits[0], hits[-1]


def truncate(seq, max_len):
    if max_len < (2 if seq.has_cls else 1):
        raise ValueError(f"max_len {max_len} too small")
    if len(seq) <= max_len:
        return seq
    return replace(
        seq, tokens=seq.tokens[:max_len], offsets=seq.offsets[:max_len],
        ids=None if seq.ids is None else seq.ids[:max_len], truncated=True)
