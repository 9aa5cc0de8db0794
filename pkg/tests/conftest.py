import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")

from inflectlm.corpus import InflectionEntry
from inflectlm.encoder import build_vocab
from inflectlm.model import CharModel, ModelConfig, init_model

POARTA = ["poartă", "porți", "poarta", "porții", "porți", "porți", "porțile", "porților"]
MACHT = ["macht", "mächte", "macht", "mächte", "macht", "mächten", "macht", "mächte"]


@pytest.fixture
def poarta_entry():
    return InflectionEntry(tuple(POARTA))


@pytest.fixture
def tiny_model():
    entries = [InflectionEntry(tuple(POARTA)), InflectionEntry(tuple(MACHT))]
    vocab = build_vocab(entries)
    cfg = ModelConfig(vocab_size=vocab.size, max_length=8, embed_dim=6, lstm_units=5,
                      lstm_layers=2, seed=3)
    return CharModel(init_model(cfg), cfg, vocab, {})


class StubModel:
    """Replays a fixed character script, ignoring the context.

    ``script`` is the continuation to emit after any prefix; once it runs out
    the stub emits EOL.
    """

    def __init__(self, vocab, script, max_length=8):
        self.vocab = vocab
        self.meta = {}
        self.config = ModelConfig(vocab_size=vocab.size, max_length=max_length)
        self.script = [vocab.id_of[c] for c in script]
        self.calls = 0

    def predict_proba(self, contexts):
        probs = np.full((len(contexts), self.vocab.size), 1e-6)
        # every row in this stub advances in lockstep
        k = self.calls
        probs[:, self.script[k] if k < len(self.script) else 1] = 1.0
        self.calls += 1
        return probs / probs.sum(axis=1, keepdims=True)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
