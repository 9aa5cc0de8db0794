"""Input coercion for the estimator API."""

from __future__ import annotations

from typing import Iterable

from .corpus import InflectionEntry, normalize_text, parse_line


def check_entries(X) -> list[InflectionEntry]:
    """Accept entries, corpus lines, or sequences of forms; return entries."""
    if isinstance(X, (str, bytes, InflectionEntry)):
        raise TypeError("expected a collection of entries, got a single item")
    entries = []
    for k, item in enumerate(X):
        if isinstance(item, InflectionEntry):
            entries.append(item)
        elif isinstance(item, str):
            entries.append(parse_line(item, k + 1))
        elif isinstance(item, Iterable):
            entries.append(InflectionEntry(tuple(item)))
        else:
            raise TypeError(f"item {k}: cannot interpret {type(item).__name__} as an inflection entry")
    if not entries:
        raise ValueError("no entries given")
    return entries


def check_lemmas(X) -> list[str]:
    """Lemmas from strings, entries (their first form) or form sequences."""
    if isinstance(X, (str, bytes, InflectionEntry)):
        raise TypeError("expected a collection of lemmas, got a single item")
    lemmas = []
    for k, item in enumerate(X):
        if isinstance(item, InflectionEntry):
            lemmas.append(item.lemma)
        elif isinstance(item, str):
            lemmas.append(normalize_text(item))
        elif isinstance(item, Iterable):
            forms = list(item)
            if not forms:
                raise ValueError(f"item {k}: empty form list")
            lemmas.append(normalize_text(forms[0]))
        else:
            raise TypeError(f"item {k}: cannot interpret {type(item).__name__} as a lemma")
    return lemmas
