"""Synthetic corpora with known answers, for end-to-end checks.

The toy language inflects each lemma into four forms: the lemma itself, the
lemma + "a", the lemma + "en", and the lemma with its last vowel shifted
(a->e->i->o->u->a) + "er". Every gold table can therefore be recomputed from
the lemma alone.
"""

from __future__ import annotations

import numpy as np

from .corpus import InflectionEntry

VOWELS = "aeiou"
CONSONANTS = "bdklmnr"
ALPHABET = VOWELS + CONSONANTS  # 12 letters
VOWEL_SHIFT = {v: VOWELS[(i + 1) % len(VOWELS)] for i, v in enumerate(VOWELS)}


def shift_last_vowel(stem: str) -> str:
    for i in range(len(stem) - 1, -1, -1):
        if stem[i] in VOWEL_SHIFT:
            return stem[:i] + VOWEL_SHIFT[stem[i]] + stem[i + 1:]
    return stem


def inflect(lemma: str) -> list[str]:
    return [lemma, lemma + "a", lemma + "en", shift_last_vowel(lemma) + "er"]


def random_lemmas(n: int, seed: int = 0, min_len: int = 3, max_len: int = 7) -> list[str]:
    """``n`` distinct lemmas over the 12-letter alphabet."""
    rng = np.random.default_rng(seed)
    seen: set[str] = set()
    lemmas = []
    while len(lemmas) < n:
        length = int(rng.integers(min_len, max_len + 1))
        word = "".join(rng.choice(list(ALPHABET), size=length))
        if word not in seen:
            seen.add(word)
            lemmas.append(word)
    return lemmas


def toy_inflection_corpus(n: int = 2000, seed: int = 0) -> list[InflectionEntry]:
    return [InflectionEntry(tuple(inflect(lemma))) for lemma in random_lemmas(n, seed)]


_PROSE_WORDS = (
    "the council parliament commission report proposal member states policy "
    "agreement market budget directive must should will has have been adopted "
    "debate question important european union citizens rights vote amendment "
    "regulation framework support development programme measures within across "
    "today this that which for with and in on of to by as is are we our"
).split()


def prose_corpus(n_lines: int = 50_000, seed: int = 0, min_words: int = 3,
                 max_words: int = 8) -> list[str]:
    """Parliament-flavoured word salad: lowercase sentences with few commas."""
    rng = np.random.default_rng(seed)
    words = np.array(_PROSE_WORDS)
    lines = []
    for _ in range(n_lines):
        k = int(rng.integers(min_words, max_words + 1))
        chosen = list(words[rng.integers(0, len(words), size=k)])
        if k > 4 and rng.random() < 0.2:
            chosen[int(rng.integers(1, k - 1))] += ","
        lines.append(" ".join(chosen) + ".")
    return lines
