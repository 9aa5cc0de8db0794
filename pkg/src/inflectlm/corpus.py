"""Inflection-table corpora: parsing, normalization, splitting and statistics.

One corpus line holds one noun's paradigm, forms joined by ``", "``, with the
dictionary form first::

    poartă, porți, poarta, porții, porți, porți, porțile, porților

Labeled corpora may append a tab and an integer inflection class (0-20).
"""

from __future__ import annotations

import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

SEPARATOR = ", "
MIN_CLASS_LABEL = 0
MAX_CLASS_LABEL = 20

# s/t with cedilla -> s/t with comma below
_CEDILLA_MAP = str.maketrans({
    "Ş": "Ș",
    "ş": "ș",
    "Ţ": "Ț",
    "ţ": "ț",
})


class CorpusParseError(ValueError):
    """A corpus line could not be parsed."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class CorpusValidationError(ValueError):
    """An entry or collection of entries violates a corpus invariant."""


def normalize_text(s: str | bytes) -> str:
    """Return ``s`` in NFC with Romanian cedilla letters mapped to comma-below.

    Bytes are decoded as strict UTF-8, so invalid sequences raise
    ``UnicodeDecodeError``.
    """
    if isinstance(s, (bytes, bytearray)):
        s = bytes(s).decode("utf-8")
    return unicodedata.normalize("NFC", s).translate(_CEDILLA_MAP)


@dataclass(frozen=True)
class InflectionEntry:
    """One noun: its ordered forms (dictionary form first) and optional class."""

    forms: tuple[str, ...]
    class_label: int | None = None

    def __post_init__(self):
        forms = tuple(normalize_text(f) for f in self.forms)
        if not forms:
            raise CorpusValidationError("an entry needs at least one form")
        for form in forms:
            if not form:
                raise CorpusValidationError("empty form")
            if "," in form or "\n" in form or "\r" in form:
                raise CorpusValidationError(f"form {form!r} contains a separator or line break")
        if self.class_label is not None:
            label = self.class_label
            if isinstance(label, bool) or not isinstance(label, (int, np.integer)):
                raise CorpusValidationError(f"class label must be an integer, got {label!r}")
            if not MIN_CLASS_LABEL <= label <= MAX_CLASS_LABEL:
                raise CorpusValidationError(
                    f"class label {label} outside [{MIN_CLASS_LABEL}, {MAX_CLASS_LABEL}]")
            object.__setattr__(self, "class_label", int(label))
        object.__setattr__(self, "forms", forms)

    @property
    def lemma(self) -> str:
        return self.forms[0]

    @property
    def line(self) -> str:
        """The training line: forms joined by the separator, no label."""
        return SEPARATOR.join(self.forms)

    def __len__(self) -> int:
        return len(self.forms)


def parse_line(line: str, line_number: int | None = None) -> InflectionEntry:
    label = None
    body = line
    if "\t" in line:
        body, _, raw_label = line.rpartition("\t")
        try:
            label = int(raw_label.strip())
        except ValueError:
            raise CorpusParseError(f"bad class label {raw_label!r}", line_number) from None
        if not MIN_CLASS_LABEL <= label <= MAX_CLASS_LABEL:
            raise CorpusValidationError(
                f"line {line_number}: class label {label} outside "
                f"[{MIN_CLASS_LABEL}, {MAX_CLASS_LABEL}]")
    forms = body.split(SEPARATOR)
    for form in forms:
        if not form.strip():
            raise CorpusParseError("empty form", line_number)
        if "," in form:
            raise CorpusParseError(f"stray comma in form {form!r}", line_number)
    try:
        return InflectionEntry(tuple(forms), label)
    except CorpusValidationError as exc:
        raise CorpusParseError(str(exc), line_number) from None


def parse_inflection_file(text: str | bytes) -> list[InflectionEntry]:
    """Parse a whole corpus file; empty lines are skipped, CRs stripped."""
    text = normalize_text(text)
    entries = []
    for number, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            continue
        entries.append(parse_line(line, number))
    return entries


def read_inflection_file(path) -> list[InflectionEntry]:
    with open(path, "rb") as fh:
        return parse_inflection_file(fh.read())


def format_entry(entry: InflectionEntry, with_label: bool = True) -> str:
    line = entry.line
    if with_label and entry.class_label is not None:
        line += f"\t{entry.class_label}"
    return line


def write_inflection_file(path, entries: Iterable[InflectionEntry]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for entry in entries:
            fh.write(format_entry(entry) + "\n")


def consolidate(train: Sequence[InflectionEntry], dev: Sequence[InflectionEntry]) -> list[InflectionEntry]:
    """Merge a train and a dev set, train first; duplicates are kept."""
    return list(train) + list(dev)


@dataclass
class SplitPair:
    train: list[InflectionEntry] = field(default_factory=list)
    test: list[InflectionEntry] = field(default_factory=list)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def stratified_split(entries: Sequence[InflectionEntry], test_fraction: float,
                     seed: int = 0) -> SplitPair:
    """Split so every class keeps (to within one entry) the same test share.

    Each class sends ``round_half_up(n_class * test_fraction)`` entries to the
    test side, picked by a seeded shuffle. Unlabeled corpora form one stratum.
    Both outputs keep the input order.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    if not entries:
        return SplitPair()
    labeled = [e.class_label is not None for e in entries]
    if any(labeled) and not all(labeled):
        raise CorpusValidationError("cannot stratify a mix of labeled and unlabeled entries")

    strata: dict[int | None, list[int]] = defaultdict(list)
    for index, entry in enumerate(entries):
        strata[entry.class_label].append(index)

    rng = np.random.default_rng(seed)
    test_indices: set[int] = set()
    for key in sorted(strata, key=lambda k: -1 if k is None else k):
        members = strata[key]
        n_test = _round_half_up(len(members) * test_fraction)
        order = rng.permutation(len(members))
        test_indices.update(members[i] for i in order[:n_test])

    split = SplitPair()
    for index, entry in enumerate(entries):
        (split.test if index in test_indices else split.train).append(entry)
    return split


def filter_by_form_count(entries: Iterable[InflectionEntry], n: int) -> list[InflectionEntry]:
    if n < 1:
        raise ValueError("form count must be >= 1")
    return [e for e in entries if len(e.forms) == n]


@dataclass
class CorpusStats:
    entry_count: int
    form_count_distribution: dict[int, int]
    line_length_histogram: dict[int, int]
    mean_line_length: float
    max_line_length: int
    bin_width: int = 1

    def histogram_rows(self) -> list[tuple[int, int]]:
        return sorted(self.line_length_histogram.items())

    def to_tsv(self) -> str:
        rows = ["bin\tcount"]
        rows.extend(f"{b}\t{c}" for b, c in self.histogram_rows())
        return "\n".join(rows) + "\n"

    def summary(self) -> dict:
        return {
            "entry_count": self.entry_count,
            "mean_line_length": self.mean_line_length,
            "max_line_length": self.max_line_length,
            "bin_width": self.bin_width,
            "form_count_distribution": {str(k): v for k, v in sorted(self.form_count_distribution.items())},
        }


def compute_stats(entries: Sequence[InflectionEntry], bin_width: int = 1) -> CorpusStats:
    """Line-length histogram (bins keyed by their lower edge) and form counts."""
    if bin_width < 1:
        raise ValueError("bin_width must be >= 1")
    lengths = [len(format_entry(e, with_label=False)) for e in entries]
    histogram = Counter((n // bin_width) * bin_width for n in lengths)
    return CorpusStats(
        entry_count=len(lengths),
        form_count_distribution=dict(Counter(len(e.forms) for e in entries)),
        line_length_histogram=dict(histogram),
        mean_line_length=float(np.mean(lengths)) if lengths else 0.0,
        max_line_length=max(lengths, default=0),
        bin_width=bin_width,
    )
