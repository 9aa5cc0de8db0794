"""Unsupervised inflection-table generation with a character-level LSTM language model."""

__version__ = "0.1.0"

from .corpus import (CorpusStats, InflectionEntry, SplitPair, compute_stats, consolidate,
                     filter_by_form_count, format_entry, normalize_text, parse_inflection_file,
                     stratified_split)
from .encoder import CharVocab, EncodedSample, SampleSet, build_vocab, decode, encode_line
from .estimator import InflectionGenerator
from .evaluator import EvalReport, evaluate, exact_match
from .generator import GenConfig, generate, generate_table
from .model import (CharModel, ModelConfig, ModelParams, forward, init_model, load_checkpoint,
                    save_checkpoint)
from .trainer import TrainConfig, TrainReport, pretrain_finetune, train

__all__ = [
    "CharModel", "CharVocab", "CorpusStats", "EncodedSample", "EvalReport", "GenConfig",
    "InflectionEntry", "InflectionGenerator", "ModelConfig", "ModelParams", "SampleSet",
    "SplitPair", "TrainConfig", "TrainReport", "build_vocab", "compute_stats", "consolidate",
    "decode", "encode_line", "evaluate", "exact_match", "filter_by_form_count", "format_entry",
    "forward", "generate", "generate_table", "init_model", "load_checkpoint", "normalize_text",
    "parse_inflection_file", "pretrain_finetune", "save_checkpoint", "stratified_split", "train",
]
