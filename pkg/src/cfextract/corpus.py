"""Task data files, validation splits, a synthetic corpus and length statistics."""

import csv
import io
import random
from dataclasses import dataclass
from pathlib import Path


class DataError(ValueError):
    """Bad data file: schema, parse or record problem."""


class SchemaError(DataError):
    pass


class RecordError(DataError):
    pass


@dataclass(frozen=True)
class LabeledSentence:
    id: str
    text: str
    label: int


@dataclass(frozen=True)
class SpanAnnotated:
    id: str
    text: str
    antecedent: tuple
    consequent: tuple = None

    @property
    def antecedent_text(self):
        return self.text[self.antecedent[0]:self.antecedent[1]]

    @property
    def consequent_text(self):
        if self.consequent is None:
            return None
        return self.text[self.consequent[0]:self.consequent[1]]


SUBTASK1_COLUMNS = {"id": "id", "text": "text", "label": "label"}
SUBTASK2_COLUMNS = {
    "id": "id", "text": "text",
    "antecedent_start": "antecedent_start", "antecedent_end": "antecedent_end",
    "consequent_start": "consequent_start", "consequent_end": "consequent_end",
}
# Column names used by the SemEval-2020 Task 5 release; its end indices are inclusive.
COMPETITION_SUBTASK1 = {"id": "sentenceID", "text": "sentence", "label": "gold_label"}
COMPETITION_SUBTASK2 = {
    "id": "sentenceID", "text": "sentence",
    "antecedent_start": "antecedent_startid", "antecedent_end": "antecedent_endid",
    "consequent_start": "consequent_startid", "consequent_end": "consequent_endid",
}


def _read_rows(path, colmap, delimiter):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter, strict=True)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, no header row") from None
        except csv.Error as exc:
            raise DataError(f"{path}: parse error in header: {exc}") from None
        index = {}
        for key, name in colmap.items():
            if name not in header:
                raise SchemaError(f"{path}: missing column {name!r} (for {key})")
            index[key] = header.index(name)
        row_no = 1
        while True:
            try:
                row = next(reader)
            except StopIteration:
                break
            except csv.Error as exc:
                raise DataError(f"{path}: parse error at row {row_no + 1}: {exc}") from None
            row_no += 1
            if not row:
                continue
            if len(row) != len(header):
                raise RecordError(f"{path}: row {row_no} has {len(row)} fields, expected {len(header)}")
            yield row_no, {key: row[i] for key, i in index.items()}


def _int(value, path, row_no, name):
    try:
        return int(float(value)) if "." in value else int(value)
    except ValueError:
        raise RecordError(f"{path}: row {row_no}: {name} {value!r} is not an integer") from None


def load_subtask1(path, colmap=None, delimiter=","):
    colmap = colmap or SUBTASK1_COLUMNS
    out = []
    for row_no, rec in _read_rows(path, colmap, delimiter):
        label = _int(rec["label"], path, row_no, "label")
        if label not in (0, 1):
            raise RecordError(f"{path}: row {row_no}: label {label} not in {{0,1}}")
        if not rec["text"]:
            raise RecordError(f"{path}: row {row_no}: empty text")
        out.append(LabeledSentence(rec["id"], rec["text"], label))
    return out


def _check_span(span, text, path, row_no, name):
    s, e = span
    if not 0 <= s < e <= len(text):
        raise RecordError(f"{path}: row {row_no}: {name} span {span} outside text of length {len(text)}")


def load_subtask2(path, colmap=None, delimiter=",", end_inclusive=False):
    """Read span annotations; consequent indices ``(-1, -1)`` mean no consequent.

    ``end_inclusive`` converts inclusive end indices (as in the competition
    release) into the end-exclusive convention used everywhere else.
    """
    colmap = colmap or SUBTASK2_COLUMNS
    shift = 1 if end_inclusive else 0
    out = []
    for row_no, rec in _read_rows(path, colmap, delimiter):
        text = rec["text"]
        ant = (_int(rec["antecedent_start"], path, row_no, "antecedent_start"),
               _int(rec["antecedent_end"], path, row_no, "antecedent_end") + shift)
        _check_span(ant, text, path, row_no, "antecedent")
        cs = _int(rec["consequent_start"], path, row_no, "consequent_start")
        ce = _int(rec["consequent_end"], path, row_no, "consequent_end")
        if cs == -1 and ce == -1:
            cons = None
        elif cs == -1 or ce == -1:
            raise RecordError(f"{path}: row {row_no}: only one consequent index is -1")
        else:
            cons = (cs, ce + shift)
            _check_span(cons, text, path, row_no, "consequent")
        out.append(SpanAnnotated(rec["id"], text, ant, cons))
    return out


def _write(path, header, rows, delimiter):
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def write_subtask1(records, path, colmap=None, delimiter=","):
    c = colmap or SUBTASK1_COLUMNS
    _write(path, [c["id"], c["text"], c["label"]],
           ([r.id, r.text, r.label] for r in records), delimiter)


def write_subtask2(records, path, colmap=None, delimiter=","):
    c = colmap or SUBTASK2_COLUMNS
    header = [c[k] for k in ("id", "text", "antecedent_start", "antecedent_end",
                             "consequent_start", "consequent_end")]
    rows = ([r.id, r.text, *r.antecedent, *(r.consequent or (-1, -1))] for r in records)
    _write(path, header, rows, delimiter)


@dataclass(frozen=True)
class SplitSpec:
    mode: str = "head-n"
    n: int = 3000
    seed: int = 0


def make_split(dataset, spec):
    """Return ``(validation, train)``; train keeps the original order."""
    dataset = list(dataset)
    if spec.n >= len(dataset) or spec.n < 0:
        raise ValueError(f"split size {spec.n} must be below dataset size {len(dataset)}")
    if spec.mode == "head-n":
        return dataset[:spec.n], dataset[spec.n:]
    if spec.mode != "random-n":
        raise ValueError(f"unknown split mode {spec.mode!r}")
    chosen = set(random.Random(spec.seed).sample(range(len(dataset)), spec.n))
    val = [r for i, r in enumerate(dataset) if i in chosen]
    train = [r for i, r in enumerate(dataset) if i not in chosen]
    return val, train


@dataclass(frozen=True)
class Histogram:
    bucket_width: int
    counts: dict
    total: int
    limit: int = None
    over_limit: int = 0

    @property
    def over_limit_fraction(self):
        return self.over_limit / self.total if self.total else 0.0

    def to_table(self):
        lines = [f"{'bucket':>12}  count"]
        for b in sorted(self.counts):
            lines.append(f"{f'[{b},{b + self.bucket_width})':>12}  {self.counts[b]}")
        lines.append(f"{'total':>12}  {self.total}")
        if self.limit is not None:
            lines.append(f"> {self.limit} tokens: {self.over_limit} ({100 * self.over_limit_fraction:.2f}%)")
        return "\n".join(lines) + "\n"

    def write(self, path):
        rows = "".join(f"{b}\t{self.counts[b]}\n" for b in sorted(self.counts))
        Path(path).write_text("bucket_start\tcount\n" + rows, encoding="utf-8")


def length_stats(dataset, tokenize, bucket_width=10, limit=None):
    """Histogram of token counts; ``tokenize`` maps text to a token sequence."""
    if bucket_width < 1:
        raise ValueError("bucket_width must be >= 1")
    counts = {}
    over = 0
    total = 0
    for rec in dataset:
        n = len(tokenize(rec.text if hasattr(rec, "text") else rec))
        b = (n // bucket_width) * bucket_width
        counts[b] = counts.get(b, 0) + 1
        total += 1
        if limit is not None and n > limit:
            over += 1
    return Histogram(bucket_width, counts, total, limit, over)
