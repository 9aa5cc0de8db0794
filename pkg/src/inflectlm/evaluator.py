"""Exact-match evaluation of generated inflection tables."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .corpus import SEPARATOR, InflectionEntry, normalize_text
from .generator import GenConfig, generate_tables


def exact_match(generated: Sequence[str], gold: Sequence[str]) -> bool:
    """Same number of forms and every form identical after normalization."""
    if len(generated) != len(gold):
        return False
    return all(normalize_text(g) == normalize_text(r) for g, r in zip(generated, gold))


@dataclass
class EntryOutcome:
    lemma: str
    gold_form_count: int
    generated_form_count: int
    exact_match: bool
    generated: list[str] = field(default_factory=list)
    error: str | None = None


@dataclass
class EvalReport:
    total: int
    correct: int
    accuracy_percent: float
    form_count_mae: float
    per_entry: list[EntryOutcome]
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=True)

    def to_tsv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, delimiter="\t", lineterminator="\n")
        writer.writerow(["lemma", "gold_form_count", "generated_form_count", "exact_match",
                         "generated", "error"])
        for o in self.per_entry:
            writer.writerow([o.lemma, o.gold_form_count, o.generated_form_count, int(o.exact_match),
                             SEPARATOR.join(o.generated), o.error or ""])
        return buf.getvalue()


def summarize(outcomes: Sequence[EntryOutcome], config: dict | None = None) -> EvalReport:
    total = len(outcomes)
    if total == 0:
        raise ValueError("cannot summarize an empty evaluation")
    correct = sum(o.exact_match for o in outcomes)
    mae = sum(abs(o.generated_form_count - o.gold_form_count) for o in outcomes) / total
    return EvalReport(
        total=total,
        correct=correct,
        accuracy_percent=100.0 * correct / total,
        form_count_mae=mae,
        per_entry=list(outcomes),
        config=config or {},
    )


def evaluate(model, test: Sequence[InflectionEntry], gc: GenConfig,
             dataset_id: str | None = None) -> EvalReport:
    """Generate a table for every test lemma and score it against the gold forms.

    Lemmas containing characters unknown to the model are scored as failures
    (zero generated forms) instead of aborting the run.
    """
    if not test:
        raise ValueError("empty test set")
    runnable, outcomes = [], [None] * len(test)
    for k, entry in enumerate(test):
        missing = model.vocab.missing(entry.lemma + (SEPARATOR if gc.prefix_separator else ""))
        if missing:
            pos, ch = missing[0]
            outcomes[k] = EntryOutcome(entry.lemma, len(entry.forms), 0, False,
                                       error=f"out-of-vocabulary character {ch!r} at position {pos}")
        else:
            runnable.append(k)
    tables = generate_tables(model, [test[k].lemma for k in runnable], gc)
    for k, forms in zip(runnable, tables):
        gold = test[k].forms
        outcomes[k] = EntryOutcome(test[k].lemma, len(gold), len(forms), exact_match(forms, gold),
                                   generated=list(forms))
    config = {
        "model": model.config.to_dict(),
        "generation": gc.to_dict(),
        "dataset": dataset_id,
    }
    return summarize(outcomes, config)
