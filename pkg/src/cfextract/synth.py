"""Template-built counterfactual corpus with exact gold spans.

Counterfactuals pair a past-perfect antecedent ("If they had sold the barn",
"Had she known the truth") with a modal-perfect consequent ("we would have
left"). Some have no consequent: either the antecedent stands alone
("If only ...") or it is followed by a tail that looks like a consequent
but states nothing hypothetical. Non-counterfactual distractors cover
indicative conditionals, wishes, reported "would", past-perfect narration
and plain past statements.
"""

import random
from dataclasses import dataclass

from .corpus import LabeledSentence, SpanAnnotated

SUBJECTS = [
    ("I", False), ("we", False), ("they", False), ("you", False), ("she", True),
    ("he", True), ("the team", True), ("the council", True), ("my father", True),
    ("our neighbours", False), ("the company", True), ("the driver", True),
    ("the doctors", False), ("Maria", True), ("Tomas", True), ("the mayor", True),
]
NAMES = ["Maria", "Tomas", "Alice", "Jonas", "Priya", "Chen", "Olga", "Ravi"]
# base, past, past participle, third person singular
VERBS = [
    ("leave", "left", "left", "leaves"), ("know", "knew", "known", "knows"),
    ("build", "built", "built", "builds"), ("sell", "sold", "sold", "sells"),
    ("find", "found", "found", "finds"), ("take", "took", "taken", "takes"),
    ("see", "saw", "seen", "sees"), ("stop", "stopped", "stopped", "stops"),
    ("win", "won", "won", "wins"), ("lose", "lost", "lost", "loses"),
    ("call", "called", "called", "calls"), ("fix", "fixed", "fixed", "fixes"),
    ("open", "opened", "opened", "opens"), ("sign", "signed", "signed", "signs"),
    ("buy", "bought", "bought", "buys"), ("miss", "missed", "missed", "misses"),
    ("check", "checked", "checked", "checks"), ("watch", "watched", "watched", "watches"),
    ("follow", "followed", "followed", "follows"), ("reach", "reached", "reached", "reaches"),
]
ADJECTIVES = ["old", "new", "small", "broken", "red", "local", "quiet", "final"]
BASE_NOUNS = [
    "barn", "truth", "train", "contract", "bridge", "letter", "game", "market",
    "house", "river", "report", "car", "door", "plan", "money", "election",
    "storm", "meeting", "road", "factory", "garden", "ticket", "phone", "shop",
]
MODALS = ["would have", "could have", "might have", "would not have", "would never have"]
TAILS = ["", "", "", " in time", " last year", " before noon", " earlier"]
PREFIXES = ["", "", "", "Now, ", "In hindsight, ", "Frankly, ", "{name} said that "]
SUFFIXES = ["", "", "", ", {name} said", ", according to the {noun}"]
FAKE_TAILS = [
    "a common argument from the {noun} critics", "as {name} noted", "the {noun} said",
    "a quiet conversation behind closed doors", "which is what everyone says",
]
_SYLLABLES = ["ka", "lo", "mir", "ten", "va", "ros", "ul", "pe", "dan", "shi", "bor", "el"]


@dataclass(frozen=True)
class SynthConfig:
    n_examples: int = 2000
    counterfactual_ratio: float = 0.5
    no_consequent_ratio: float = 0.2
    seed: int = 0
    vocab_size: int = 60

    def __post_init__(self):
        if self.n_examples < 1:
            raise ValueError("n_examples must be >= 1")
        for name in ("counterfactual_ratio", "no_consequent_ratio"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.vocab_size < 1:
            raise ValueError("vocab_size must be >= 1")


def _lexicon(size, rng):
    nouns = list(BASE_NOUNS[:size])
    seen = set(nouns)
    while len(nouns) < size:
        word = "".join(rng.choice(_SYLLABLES) for _ in range(rng.randint(2, 3)))
        if word not in seen:
            seen.add(word)
            nouns.append(word)
    return nouns


class _Builder:
    def __init__(self, rng, nouns):
        self.rng = rng
        self.nouns = nouns

    def pick(self, seq):
        return self.rng.choice(seq)

    def obj(self):
        noun = self.pick(self.nouns)
        if self.rng.random() < 0.3:
            return f"the {self.pick(ADJECTIVES)} {noun}"
        return f"the {noun}"

    def fill(self, pattern):
        return pattern.format(name=self.pick(NAMES), noun=self.pick(self.nouns))

    def antecedent_body(self):
        subj, _ = self.pick(SUBJECTS)
        verb = self.pick(VERBS)
        neg = "not " if self.rng.random() < 0.2 else ""
        return f"{subj} had {neg}{verb[2]} {self.obj()}{self.pick(TAILS)}"

    def consequent(self):
        subj, _ = self.pick(SUBJECTS)
        return f"{subj} {self.pick(MODALS)} {self.pick(VERBS)[2]} {self.obj()}"

    def indicative(self):
        subj, third = self.pick(SUBJECTS)
        verb = self.pick(VERBS)
        return f"{subj} {verb[3] if third else verb[0]} {self.obj()}"


def _cap(s):
    return s[:1].upper() + s[1:]


def _assemble(parts):
    """Concatenate ``(text, role)`` parts; return text and char span per role."""
    text = ""
    spans = {}
    for piece, role in parts:
        if role is not None:
            spans[role] = (len(text), len(text) + len(piece))
        text += piece
    return text, spans


def _counterfactual(b, with_consequent):
    rng = b.rng
    prefix = b.fill(b.pick(PREFIXES))
    suffix = b.fill(b.pick(SUFFIXES))
    at_start = prefix == ""
    body = b.antecedent_body()
    if with_consequent:
        form = rng.randrange(3)
        cons = b.consequent()
        if form == 0:
            ante = ("If " if at_start else "if ") + body
            parts = [(prefix, None), (ante, "a"), (", ", None), (cons, "c")]
        elif form == 1:
            subj, rest = body.split(" had ", 1)
            ante = ("Had " if at_start else "had ") + subj + " " + rest
            parts = [(prefix, None), (ante, "a"), (", ", None), (cons, "c")]
        else:
            cons = _cap(cons) if at_start else cons
            ante = "if " + body
            parts = [(prefix, None), (cons, "c"), (" ", None), (ante, "a")]
    else:
        if rng.random() < 0.5:
            ante = ("If only " if at_start else "if only ") + body
            parts = [(prefix, None), (ante, "a")]
        else:
            ante = ("If " if at_start else "if ") + body
            parts = [(prefix, None), (ante, "a"), (", ", None), (b.fill(b.pick(FAKE_TAILS)), None)]
    parts += [(suffix, None), (".", None)]
    return _assemble(parts)


def _distractor(b):
    rng = b.rng
    kind = rng.randrange(7)
    if kind == 0:
        s2, third = b.pick(SUBJECTS)
        text = f"If {b.indicative()}, {s2} will {b.pick(VERBS)[0]} {b.obj()}."
    elif kind == 1:
        subj, third = b.pick(SUBJECTS)
        text = f"{_cap(subj)} {'wishes' if third else 'wish'} to {b.pick(VERBS)[0]} {b.obj()}."
    elif kind == 2:
        subj, _ = b.pick(SUBJECTS)
        text = f"{_cap(subj)} {b.pick(VERBS)[1]} {b.obj()}{b.pick(TAILS)}."
    elif kind == 3:
        s1, _ = b.pick(SUBJECTS)
        s2, _ = b.pick(SUBJECTS)
        text = f"{_cap(s1)} said that {s2} would {b.pick(VERBS)[0]} {b.obj()}."
    elif kind == 4:
        s1, _ = b.pick(SUBJECTS)
        s2, _ = b.pick(SUBJECTS)
        text = f"When {s1} {b.pick(VERBS)[1]} {b.obj()}, {s2} {b.pick(VERBS)[1]} {b.obj()}."
    elif kind == 5:
        s1, _ = b.pick(SUBJECTS)
        s2, _ = b.pick(SUBJECTS)
        text = f"By the time {s1} {b.pick(VERBS)[1]} {b.obj()}, {s2} had {b.pick(VERBS)[2]} {b.obj()}."
    else:
        s1, _ = b.pick(SUBJECTS)
        text = f"{_cap(s1)} said that {b.antecedent_body()}."
    return text


def _flags(n, k, rng):
    flags = [True] * k + [False] * (n - k)
    rng.shuffle(flags)
    return flags


def generate_synthetic(config):
    """Return ``(span_examples, labeled_sentences)``, each ``n_examples`` long.

    Every span example is a counterfactual; ``no_consequent_ratio`` of them
    lack a consequent. The labeled list has exactly
    ``round(n * counterfactual_ratio)`` positives.
    """
    rng = random.Random(config.seed)
    b = _Builder(rng, _lexicon(config.vocab_size, rng))
    n = config.n_examples

    spans = []
    for i, no_cons in enumerate(_flags(n, round(n * config.no_consequent_ratio), rng)):
        text, sp = _counterfactual(b, not no_cons)
        spans.append(SpanAnnotated(f"s{i:06d}", text, sp["a"], sp.get("c")))

    labeled = []
    for i, pos in enumerate(_flags(n, round(n * config.counterfactual_ratio), rng)):
        if pos:
            text, _ = _counterfactual(b, rng.random() >= config.no_consequent_ratio)
        else:
            text = _distractor(b)
        labeled.append(LabeledSentence(f"c{i:06d}", text, int(pos)))
    return spans, labeled
