"""scikit-learn style wrapper around training, generation and scoring."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .encoder import SampleSet, build_vocab
from .evaluator import EvalReport, evaluate
from .generator import GenConfig, generate, generate_tables
from .model import CharModel, ModelConfig, init_model
from .trainer import TrainConfig, train
from .validation import check_entries, check_lemmas


class InflectionGenerator(BaseEstimator):
    """Character language model that completes a lemma into its inflection table.

    ``fit`` takes inflection entries (or their corpus lines), ``predict`` maps
    lemmas to lists of forms, and ``score`` is exact-match table accuracy in
    [0, 1]. Decoding is greedy unless ``temperature`` is positive.

    Parameters mirror :class:`ModelConfig`, :class:`TrainConfig` and
    :class:`GenConfig`; ``random_state`` seeds initialization, shuffling and
    sampling.
    """

    def __init__(self, max_length=40, embed_dim=100, lstm_units=128, lstm_layers=2,
                 bidirectional=True, epochs=14, batch_size=128, learning_rate=1e-3,
                 optimizer="adam", grad_clip_norm=5.0, precision="float32",
                 temperature=0.0, prefix_separator=False, max_chars=None, random_state=0):
        self.max_length = max_length
        self.embed_dim = embed_dim
        self.lstm_units = lstm_units
        self.lstm_layers = lstm_layers
        self.bidirectional = bidirectional
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.grad_clip_norm = grad_clip_norm
        self.precision = precision
        self.temperature = temperature
        self.prefix_separator = prefix_separator
        self.max_chars = max_chars
        self.random_state = random_state

    def _gen_config(self) -> GenConfig:
        return GenConfig(temperature=self.temperature, max_chars=self.max_chars,
                         sample_seed=self.random_state, prefix_separator=self.prefix_separator)

    def fit(self, X, y=None):
        entries = check_entries(X)
        vocab = build_vocab(entries)
        cfg = ModelConfig(vocab_size=vocab.size, max_length=self.max_length,
                          embed_dim=self.embed_dim, lstm_units=self.lstm_units,
                          lstm_layers=self.lstm_layers, bidirectional=self.bidirectional,
                          seed=self.random_state)
        tc = TrainConfig(epochs=self.epochs, batch_size=self.batch_size,
                         learning_rate=self.learning_rate, optimizer=self.optimizer,
                         grad_clip_norm=self.grad_clip_norm, shuffle_seed=self.random_state,
                         precision=self.precision)
        lines = [e.line for e in entries]
        params, report = train(init_model(cfg), cfg, SampleSet.from_lines(lines, vocab, cfg.max_length), tc)
        self.model_ = CharModel(params, cfg, vocab,
                                {"train_mean_line_length": float(np.mean([len(s) for s in lines]))})
        self.vocab_ = vocab
        self.train_report_ = report
        return self

    @classmethod
    def from_model(cls, model: CharModel, **params) -> "InflectionGenerator":
        """Wrap an already trained model (e.g. a loaded checkpoint)."""
        cfg = model.config
        est = cls(max_length=cfg.max_length, embed_dim=cfg.embed_dim, lstm_units=cfg.lstm_units,
                  lstm_layers=cfg.lstm_layers, bidirectional=cfg.bidirectional,
                  random_state=cfg.seed, **params)
        est.model_ = model
        est.vocab_ = model.vocab
        return est

    def predict(self, X) -> list[list[str]]:
        check_is_fitted(self, "model_")
        return generate_tables(self.model_, check_lemmas(X), self._gen_config())

    def generate(self, prefix: str) -> str:
        check_is_fitted(self, "model_")
        return generate(self.model_, prefix, self._gen_config())

    def evaluate(self, X, dataset_id: str | None = None) -> EvalReport:
        check_is_fitted(self, "model_")
        return evaluate(self.model_, check_entries(X), self._gen_config(), dataset_id)

    def score(self, X, y=None) -> float:
        return self.evaluate(X).accuracy_percent / 100.0
