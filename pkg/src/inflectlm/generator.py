"""Prefix-conditioned generation of inflection lines."""

from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass
from typing import Protocol, Sequence

import numpy as np

from .corpus import SEPARATOR, normalize_text
from .encoder import EOL_ID, PAD_ID, CharVocab, EncodingError, encode_text, left_pad

MIN_MAX_CHARS = 256


class NextCharModel(Protocol):
    vocab: CharVocab
    meta: dict

    @property
    def config(self): ...

    def predict_proba(self, contexts: np.ndarray) -> np.ndarray: ...


@dataclass
class GenConfig:
    temperature: float = 1.0
    max_chars: int | None = None
    sample_seed: int = 0
    prefix_separator: bool = False

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_chars is not None and self.max_chars < 1:
            raise ValueError("max_chars must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def resolve_max_chars(gc: GenConfig, model) -> int:
    """Explicit cap, else 4x the mean training line length (at least 256)."""
    if gc.max_chars is not None:
        return gc.max_chars
    mean_len = float(getattr(model, "meta", {}).get("train_mean_line_length", 0.0))
    return max(MIN_MAX_CHARS, int(np.ceil(4 * mean_len)))


def apply_temperature(probs: np.ndarray, temperature: float) -> np.ndarray:
    """Rescale to p**(1/T), renormalized; T=0 gives a one-hot on the argmax."""
    probs = np.asarray(probs, dtype=np.float64)
    if temperature == 0:
        out = np.zeros_like(probs)
        np.put_along_axis(out, np.argmax(probs, axis=-1)[..., None], 1.0, axis=-1)
        return out
    with np.errstate(divide="ignore"):
        logp = np.log(probs) / temperature
    logp -= logp.max(axis=-1, keepdims=True)
    e = np.exp(logp)
    return e / e.sum(axis=-1, keepdims=True)


def _rng_for(seed: int, prefix: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(prefix.encode("utf-8"))])


def generate_many(model: NextCharModel, prefixes: Sequence[str], gc: GenConfig) -> list[str]:
    """Continue every prefix in one batch until EOL or the character cap.

    Each prefix samples from its own generator seeded by (sample_seed, prefix),
    so results do not depend on which other prefixes share the batch.
    """
    vocab = model.vocab
    T = model.config.max_length
    cap = resolve_max_chars(gc, model)
    prefixes = [normalize_text(p) for p in prefixes]
    histories = [encode_text(p, vocab).tolist() for p in prefixes]
    rngs = [_rng_for(gc.sample_seed, p) for p in prefixes]
    generated: list[list[int]] = [[] for _ in prefixes]
    active = list(range(len(prefixes)))
    while active:
        contexts = np.stack([left_pad(histories[i], T) for i in active])
        probs = np.array(model.predict_proba(contexts), dtype=np.float64)
        probs[:, PAD_ID] = 0.0  # PAD is never a continuation
        still = []
        for row, i in enumerate(active):
            p = probs[row]
            if gc.temperature == 0:
                nxt = int(np.argmax(p))  # first maximum = lowest id
            else:
                q = apply_temperature(p, gc.temperature)
                nxt = int(rngs[i].choice(len(q), p=q))
            if nxt == EOL_ID:
                continue
            generated[i].append(nxt)
            histories[i].append(nxt)
            if len(generated[i]) < cap:
                still.append(i)
        active = still
    return [prefix + "".join(vocab.char_of[c] for c in gen)
            for prefix, gen in zip(prefixes, generated)]


def generate(model: NextCharModel, prefix: str, gc: GenConfig) -> str:
    """The prefix followed by the model's continuation (EOL excluded)."""
    return generate_many(model, [prefix], gc)[0]


def seed_prefix(lemma: str, gc: GenConfig) -> str:
    lemma = normalize_text(lemma)
    return lemma + SEPARATOR if gc.prefix_separator else lemma


def split_forms(line: str) -> list[str]:
    return line.split(SEPARATOR)


def generate_tables(model: NextCharModel, lemmas: Sequence[str], gc: GenConfig) -> list[list[str]]:
    lines = generate_many(model, [seed_prefix(l, gc) for l in lemmas], gc)
    return [split_forms(line) for line in lines]


def generate_table(model: NextCharModel, lemma: str, gc: GenConfig) -> list[str]:
    """Generate from the lemma and split the line into forms."""
    return generate_tables(model, [lemma], gc)[0]


def check_prefix(model: NextCharModel, prefix: str) -> None:
    missing = model.vocab.missing(normalize_text(prefix))
    if missing:
        pos, ch = missing[0]
        raise EncodingError(f"character {ch!r} at position {pos} is not in the vocabulary")
