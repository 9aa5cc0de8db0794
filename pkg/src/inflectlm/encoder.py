"""Character vocabulary and next-character sample encoding."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .corpus import InflectionEntry

PAD_ID = 0
EOL_ID = 1
N_RESERVED = 2


class EncodingError(ValueError):
    pass


class DecodingError(ValueError):
    pass


@dataclass(frozen=True)
class CharVocab:
    """Dense char<->id map. Ids 0 and 1 are PAD and end-of-line."""

    chars: tuple[str, ...]
    id_of: dict[str, int] = field(init=False, repr=False, compare=False)
    char_of: dict[int, str] = field(init=False, repr=False, compare=False)

    pad_id = PAD_ID
    eol_id = EOL_ID

    def __post_init__(self):
        chars = tuple(self.chars)
        if len(set(chars)) != len(chars):
            raise ValueError("duplicate characters in vocabulary")
        for ch in chars:
            if len(ch) != 1:
                raise ValueError(f"vocabulary entries must be single characters, got {ch!r}")
        object.__setattr__(self, "chars", chars)
        object.__setattr__(self, "id_of", {c: i + N_RESERVED for i, c in enumerate(chars)})
        object.__setattr__(self, "char_of", {i + N_RESERVED: c for i, c in enumerate(chars)})

    @property
    def size(self) -> int:
        return len(self.chars) + N_RESERVED

    def __len__(self) -> int:
        return self.size

    def __contains__(self, ch: str) -> bool:
        return ch in self.id_of

    def missing(self, text: str) -> list[tuple[int, str]]:
        return [(i, ch) for i, ch in enumerate(text) if ch not in self.id_of]

    def to_dict(self) -> dict:
        return {"chars": list(self.chars)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, data: dict) -> "CharVocab":
        return cls(tuple(data["chars"]))

    @classmethod
    def from_json(cls, text: str) -> "CharVocab":
        return cls.from_dict(json.loads(text))


def _lines_of(items: Iterable[InflectionEntry | str]) -> Iterable[str]:
    for item in items:
        yield item.line if isinstance(item, InflectionEntry) else item


def build_vocab(items: Iterable[InflectionEntry | str]) -> CharVocab:
    """Vocabulary over every character of the given entries or raw lines.

    Corpus characters get ids in codepoint order from 2 upward, so the result
    does not depend on the order of the input.
    """
    seen: set[str] = set()
    for line in _lines_of(items):
        seen.update(line)
    return CharVocab(tuple(sorted(seen)))


def encode_text(text: str, vocab: CharVocab) -> np.ndarray:
    try:
        return np.fromiter((vocab.id_of[ch] for ch in text), dtype=np.int32, count=len(text))
    except KeyError:
        pos, ch = vocab.missing(text)[0]
        raise EncodingError(f"character {ch!r} at position {pos} is not in the vocabulary") from None


class EncodedSample(NamedTuple):
    context: tuple[int, ...]
    target: int


def encode_line(line: str, vocab: CharVocab, max_length: int) -> list[EncodedSample]:
    """One sample per position 0..len(line); the last one predicts EOL."""
    if max_length < 1:
        raise ValueError("max_length must be >= 1")
    ids = [PAD_ID] * max_length + encode_text(line, vocab).tolist()
    samples = []
    for k in range(len(line) + 1):
        context = tuple(ids[k:k + max_length])
        target = ids[k + max_length] if k < len(line) else EOL_ID
        samples.append(EncodedSample(context, target))
    return samples


def decode(ids: Iterable[int], vocab: CharVocab) -> str:
    """Map ids back to text, stopping before the first EOL."""
    out = []
    for i in ids:
        i = int(i)
        if i == EOL_ID:
            break
        if i == PAD_ID:
            raise DecodingError("PAD id inside a sequence")
        try:
            out.append(vocab.char_of[i])
        except KeyError:
            raise DecodingError(f"unknown id {i}") from None
    return "".join(out)


def left_pad(ids: Sequence[int], max_length: int) -> np.ndarray:
    """The last ``max_length`` ids, left-padded with PAD."""
    ctx = np.full(max_length, PAD_ID, dtype=np.int32)
    tail = np.asarray(ids[-max_length:] if len(ids) else [], dtype=np.int32)
    if tail.size:
        ctx[max_length - tail.size:] = tail
    return ctx


class SampleSet:
    """Array-backed next-character samples.

    Contexts are materialized per batch from one flat id buffer, so a large
    corpus costs one int per character rather than ``max_length`` ints per
    sample.
    """

    def __init__(self, flat: np.ndarray, starts: np.ndarray, ends: np.ndarray,
                 targets: np.ndarray, max_length: int):
        self.flat = np.asarray(flat, dtype=np.int32)
        self.starts = np.asarray(starts, dtype=np.int64)
        self.ends = np.asarray(ends, dtype=np.int64)
        self.targets = np.asarray(targets, dtype=np.int32)
        self.max_length = int(max_length)
        if not (len(self.starts) == len(self.ends) == len(self.targets)):
            raise ValueError("inconsistent sample arrays")

    def __len__(self) -> int:
        return len(self.targets)

    @classmethod
    def from_lines(cls, lines: Iterable[str], vocab: CharVocab, max_length: int) -> "SampleSet":
        if max_length < 1:
            raise ValueError("max_length must be >= 1")
        chunks, starts, ends, targets = [], [], [], []
        offset = 0
        for line_no, line in enumerate(lines):
            try:
                ids = encode_text(line, vocab)
            except EncodingError as exc:
                raise EncodingError(f"line {line_no + 1}: {exc}") from None
            n = len(ids)
            chunks.append(ids)
            starts.append(np.full(n + 1, offset, dtype=np.int64))
            ends.append(offset + np.arange(n + 1, dtype=np.int64))
            targets.append(np.append(ids, EOL_ID))
            offset += n
        if not chunks:
            empty = np.zeros(0, dtype=np.int64)
            return cls(np.zeros(0, np.int32), empty, empty, np.zeros(0, np.int32), max_length)
        return cls(np.concatenate(chunks), np.concatenate(starts), np.concatenate(ends),
                   np.concatenate(targets), max_length)

    @classmethod
    def from_samples(cls, samples: Sequence[EncodedSample]) -> "SampleSet":
        if not samples:
            raise ValueError("no samples")
        max_length = len(samples[0].context)
        contexts = np.asarray([s.context for s in samples], dtype=np.int32)
        if contexts.shape != (len(samples), max_length):
            raise ValueError("all contexts must share one length")
        starts = np.arange(len(samples), dtype=np.int64) * max_length
        return cls(contexts.ravel(), starts, starts + max_length,
                   [s.target for s in samples], max_length)

    def contexts(self, index: np.ndarray | None = None) -> np.ndarray:
        """Left-padded context windows, shape (len(index), max_length)."""
        if index is None:
            index = np.arange(len(self))
        starts = self.starts[index]
        ends = self.ends[index]
        pos = ends[:, None] + np.arange(-self.max_length, 0)
        valid = pos >= starts[:, None]
        if self.flat.size == 0:
            return np.full(pos.shape, PAD_ID, dtype=np.int32)
        return np.where(valid, self.flat[np.clip(pos, 0, None)], PAD_ID).astype(np.int32)

    def batch(self, index: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.contexts(index), self.targets[index]

    def samples(self) -> list[EncodedSample]:
        ctx = self.contexts()
        return [EncodedSample(tuple(int(i) for i in row), int(t)) for row, t in zip(ctx, self.targets)]
