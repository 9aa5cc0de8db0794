"""Experiment grid: filter, train and evaluate one configuration per row.

Rows are appended to ``results.jsonl`` as soon as they finish, so an
interrupted grid can be rerun over the same directory and only the missing
rows execute. Models are cached per (dataset, filter, T, epochs, seed) so rows
that differ only in temperature share one training run.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import InflectionEntry, filter_by_form_count, read_inflection_file
from .encoder import SampleSet, build_vocab
from .evaluator import evaluate
from .generator import GenConfig
from .model import CharModel, ModelConfig, init_model
from .trainer import TrainConfig, train

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ["dataset", "form_filter", "max_length", "epochs", "temperature", "seed",
                  "accuracy_percent", "correct", "total", "form_count_mae", "train_minutes",
                  "status", "error"]


@dataclass(frozen=True)
class RunSpec:
    dataset: str
    form_filter: int | None = None
    max_length: int = 40
    epochs: int = 14
    temperature: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.form_filter is not None and self.form_filter < 1:
            raise ValueError("form_filter must be >= 1")
        if self.max_length < 1 or self.epochs < 1 or self.temperature < 0:
            raise ValueError(f"invalid run spec {self}")

    @property
    def key(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @property
    def model_key(self) -> str:
        f = "all" if self.form_filter is None else f"f{self.form_filter}"
        return f"{self.dataset}_{f}_T{self.max_length}_e{self.epochs}_s{self.seed}"


@dataclass
class AblationGrid:
    runs: list[RunSpec]
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    generation: dict = field(default_factory=dict)
    corpora: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.runs:
            raise ValueError("ablation grid has no runs")

    @classmethod
    def from_dict(cls, data: dict) -> "AblationGrid":
        return cls(
            runs=[RunSpec(**r) for r in data.get("runs", [])],
            model=dict(data.get("model", {})),
            train=dict(data.get("train", {})),
            generation=dict(data.get("generation", {})),
            corpora=dict(data.get("corpora", {})),
        )

    @classmethod
    def from_file(cls, path) -> "AblationGrid":
        path = Path(path)
        grid = cls.from_dict(json.loads(path.read_text(encoding="utf-8")))
        for spec in grid.corpora.values():
            for side in ("train", "test"):
                if side in spec and not Path(spec[side]).is_absolute():
                    spec[side] = str(path.parent / spec[side])
        return grid


def reference_grid(dataset: str, temperatures: Sequence[float] = (0.0, 0.5, 1.0), seed: int = 0,
                   **kwargs) -> AblationGrid:
    """The five Romanian noun configurations (all forms vs 8 forms; T 40/90;
    14 or 28 epochs), each evaluated at every temperature."""
    rows = [(None, 40, 14), (None, 90, 14), (8, 40, 14), (8, 90, 14), (8, 90, 28)]
    runs = [RunSpec(dataset, f, T, e, tau, seed) for f, T, e in rows for tau in temperatures]
    return AblationGrid(runs=runs, **kwargs)


def load_corpora(spec: Mapping[str, Mapping[str, str]]) -> dict[str, tuple[list, list]]:
    return {name: (read_inflection_file(paths["train"]), read_inflection_file(paths["test"]))
            for name, paths in spec.items()}


def _read_done(path: Path) -> dict[str, dict]:
    done = {}
    if path.exists():
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                row = json.loads(line)
                done[row["key"]] = row
    return done


def _train_for(spec: RunSpec, train_entries: list[InflectionEntry], grid: AblationGrid) -> CharModel:
    vocab = build_vocab(train_entries)
    cfg = ModelConfig(**{**grid.model, "vocab_size": vocab.size, "max_length": spec.max_length,
                         "seed": spec.seed})
    tc = TrainConfig(**{**grid.train, "epochs": spec.epochs, "shuffle_seed": spec.seed})
    samples = SampleSet.from_lines([e.line for e in train_entries], vocab, cfg.max_length)
    params, _ = train(init_model(cfg), cfg, samples, tc)
    meta = {"train_mean_line_length": float(np.mean([len(e.line) for e in train_entries]))}
    return CharModel(params, cfg, vocab, meta)


def run_ablation(grid: AblationGrid, corpora: Mapping[str, tuple[Sequence[InflectionEntry], Sequence[InflectionEntry]]],
                 out_dir) -> list[dict]:
    """Run every spec not already recorded in ``out_dir``; return all rows in grid order."""
    out = Path(out_dir)
    (out / "models").mkdir(parents=True, exist_ok=True)
    jsonl = out / "results.jsonl"
    done = _read_done(jsonl)
    models: dict[str, CharModel] = {}
    train_minutes: dict[str, float] = {}

    for spec in grid.runs:
        if spec.key in done and done[spec.key]["status"] == "ok":
            logger.info("skipping completed run %s", spec.key)
            continue
        row = {**asdict(spec), "key": spec.key, "status": "ok", "error": None,
               "accuracy_percent": None, "correct": None, "total": None,
               "form_count_mae": None, "train_minutes": None}
        try:
            if spec.dataset not in corpora:
                raise KeyError(f"unknown dataset {spec.dataset!r}")
            train_entries, test_entries = corpora[spec.dataset]
            if spec.form_filter is not None:
                train_entries = filter_by_form_count(train_entries, spec.form_filter)
                test_entries = filter_by_form_count(test_entries, spec.form_filter)
            if not train_entries or not test_entries:
                raise ValueError("no entries left after filtering")
            ckpt = out / "models" / f"{spec.model_key}.mgck"
            if spec.model_key not in models:
                if ckpt.exists():
                    models[spec.model_key] = CharModel.load(ckpt)
                    train_minutes[spec.model_key] = float(models[spec.model_key].meta.get("train_minutes", 0.0))
                else:
                    started = time.perf_counter()
                    model = _train_for(spec, list(train_entries), grid)
                    train_minutes[spec.model_key] = (time.perf_counter() - started) / 60.0
                    model.meta["train_minutes"] = train_minutes[spec.model_key]
                    model.save(ckpt)
                    models[spec.model_key] = model
            gc = GenConfig(**{**grid.generation, "temperature": spec.temperature, "sample_seed": spec.seed})
            report = evaluate(models[spec.model_key], list(test_entries), gc, dataset_id=spec.dataset)
            row.update(accuracy_percent=report.accuracy_percent, correct=report.correct,
                       total=report.total, form_count_mae=report.form_count_mae,
                       train_minutes=train_minutes[spec.model_key])
        except Exception as exc:  # recorded in the row; the grid keeps going
            logger.exception("run %s failed", spec.key)
            row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        with jsonl.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
        done[spec.key] = row

    rows = [done[spec.key] for spec in grid.runs]
    write_results_table(rows, out / "results.tsv")
    (out / "results.json").write_text(json.dumps(rows, indent=2, ensure_ascii=False), encoding="utf-8")
    return rows


def write_results_table(rows: Sequence[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow(["" if row.get(c) is None else row.get(c) for c in RESULT_COLUMNS])
