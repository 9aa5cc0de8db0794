import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from inflectlm.corpus import InflectionEntry
from inflectlm.encoder import (EOL_ID, PAD_ID, CharVocab, DecodingError, EncodingError,
                               SampleSet, build_vocab, decode, encode_line, encode_text)

P, E = PAD_ID, EOL_ID
ALPHA = "abcdeăî ,"


def test_vocab_single_form():
    v = build_vocab([InflectionEntry(("ab",))])
    assert v.size == 4
    assert (v.id_of["a"], v.id_of["b"]) == (2, 3)


def test_vocab_includes_separator_chars():
    v = build_vocab([InflectionEntry(("a", "b"))])
    assert v.size == 6
    assert v.chars == (" ", ",", "a", "b")


def test_vocab_empty_corpus():
    assert build_vocab([]).size == 2


def test_vocab_deterministic_and_order_insensitive():
    lines = ["macht, mächte", "poartă, porți", "abc"]
    assert build_vocab(lines) == build_vocab(lines)
    assert build_vocab(lines) == build_vocab(lines[::-1])


def test_vocab_inverse_maps():
    v = build_vocab(["poartă, porți"])
    assert all(v.char_of[v.id_of[c]] == c for c in v.chars)
    assert sorted(v.char_of) == list(range(2, v.size))
    assert PAD_ID not in v.char_of and EOL_ID not in v.char_of


def test_vocab_json_round_trip():
    v = build_vocab(["poartă, porți"])
    assert json.loads(v.to_json()) == {"chars": list(v.chars)}
    assert CharVocab.from_json(v.to_json()) == v


class TestEncodeLine:
    v = build_vocab(["abcd"])

    def test_unrolling(self):
        a, b = self.v.id_of["a"], self.v.id_of["b"]
        assert encode_line("ab", self.v, 3) == [((P, P, P), a), ((P, P, a), b), ((P, a, b), E)]

    def test_empty_line(self):
        assert encode_line("", self.v, 2) == [((P, P), E)]

    def test_truncation(self):
        samples = encode_line("abcd", self.v, 2)
        assert samples[-1] == ((self.v.id_of["c"], self.v.id_of["d"]), E)

    def test_out_of_vocab(self):
        with pytest.raises(EncodingError, match="'z' at position 2"):
            encode_line("abz", self.v, 2)

    @given(st.text(alphabet="abcd", max_size=30), st.integers(1, 12))
    def test_sample_count_and_shape(self, line, T):
        samples = encode_line(line, self.v, T)
        assert len(samples) == len(line) + 1
        assert all(len(s.context) == T for s in samples)
        assert all(E not in s.context for s in samples)


class TestDecode:
    v = build_vocab(["ab"])

    def test_basic(self):
        assert decode([self.v.id_of["a"], self.v.id_of["b"]], self.v) == "ab"

    def test_eol_terminates(self):
        assert decode([self.v.id_of["a"], E, self.v.id_of["b"]], self.v) == "a"

    def test_empty(self):
        assert decode([], self.v) == ""

    def test_unknown_id(self):
        with pytest.raises(DecodingError):
            decode([99], self.v)

    @given(st.text(alphabet=ALPHA, max_size=40))
    def test_round_trip(self, s):
        v = build_vocab([ALPHA])
        assert decode(encode_text(s, v), v) == s


@given(st.lists(st.text(alphabet="abcd, ", max_size=15), max_size=6), st.integers(1, 9))
def test_sample_set_matches_encode_line(lines, T):
    v = build_vocab(["abcd, "])
    ss = SampleSet.from_lines(lines, v, T)
    expected = [s for line in lines for s in encode_line(line, v, T)]
    assert ss.samples() == expected


def test_sample_set_from_samples():
    v = build_vocab(["abcd"])
    samples = encode_line("abcd", v, 3) + encode_line("ba", v, 3)
    ss = SampleSet.from_samples(samples)
    assert ss.samples() == samples
    ctx, tgt = ss.batch(np.array([4, 0]))
    assert ctx.tolist() == [list(samples[4].context), list(samples[0].context)]
    assert tgt.tolist() == [samples[4].target, samples[0].target]
