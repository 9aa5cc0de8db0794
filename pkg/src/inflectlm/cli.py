"""Command-line entry point.

    inflectlm prepare --input ro.txt --labels --split 0.1 --seed 0 --out-dir data/
    inflectlm stats --input data/train.txt --bin-width 5
    inflectlm train --train data/train.txt --max-length 40 --epochs 14 --out ro.mgck
    inflectlm generate --model ro.mgck --prefix poartă --temperature 0
    inflectlm eval --model ro.mgck --test data/test.txt --temperature 0
    inflectlm ablate --grid grid.json --out results/
    inflectlm pretrain-finetune --pretrain prose.txt --finetune data/train.txt --out pt/

Option values resolve as: command-line flag, then ``--config`` JSON file,
then built-in default. Exit status is 0 on success, 1 on operational failure
and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .ablation import AblationGrid, load_corpora, run_ablation
from .corpus import (CorpusParseError, CorpusValidationError, compute_stats, consolidate,
                     filter_by_form_count, normalize_text, read_inflection_file,
                     stratified_split, write_inflection_file, InflectionEntry)
from .diagnostics import transfer_diagnostic
from .encoder import EncodingError, SampleSet, build_vocab
from .evaluator import evaluate
from .generator import GenConfig, generate
from .model import CharModel, CheckpointError, ModelConfig, init_model
from .trainer import TrainConfig, TrainingDivergedError, train

logger = logging.getLogger("inflectlm")

OPERATIONAL_ERRORS = (OSError, CorpusParseError, CorpusValidationError, EncodingError,
                      CheckpointError, TrainingDivergedError, ValueError, KeyError)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def write_manifest(path, args: argparse.Namespace, inputs: dict[str, str | None], started: str,
                   extra: dict | None = None) -> None:
    """Record how an artifact was produced, next to the artifact."""
    config = {k: v for k, v in vars(args).items() if k not in ("func",)}
    manifest = {
        "command": args.command,
        "argv": sys.argv[1:],
        "config": config,
        "inputs": {name: {"path": str(p), "sha256": sha256_file(p)}
                   for name, p in inputs.items() if p},
        "seeds": {k: v for k, v in config.items() if "seed" in k},
        "tool_version": __version__,
        "started": started,
        "finished": _now(),
    }
    if extra:
        manifest.update(extra)
    Path(path).write_text(json.dumps(manifest, indent=2, ensure_ascii=False, default=str), encoding="utf-8")


# -- argument groups -----------------------------------------------------------

def _add_model_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--max-length", type=int, default=40, help="context length T")
    g.add_argument("--embed-dim", type=int, default=100)
    g.add_argument("--lstm-units", type=int, default=128)
    g.add_argument("--lstm-layers", type=int, default=2)
    g.add_argument("--unidirectional", action="store_true")


def _add_train_args(p: argparse.ArgumentParser, epochs_flag: bool = True) -> None:
    g = p.add_argument_group("training")
    if epochs_flag:
        g.add_argument("--epochs", type=int, default=14)
    g.add_argument("--batch-size", type=int, default=128)
    g.add_argument("--lr", type=float, default=1e-3)
    g.add_argument("--optimizer", choices=["adam", "rmsprop"], default="adam")
    g.add_argument("--grad-clip", type=float, default=5.0)
    g.add_argument("--precision", choices=["float32", "float64"], default="float32")
    g.add_argument("--bucket-batches", action="store_true",
                   help="group similar context lengths per batch (faster, slower to converge)")
    g.add_argument("--seed", type=int, default=0)


def _add_gen_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("generation")
    g.add_argument("--temperature", type=float, default=1.0, help="0 = greedy")
    g.add_argument("--max-chars", type=int, default=None)
    g.add_argument("--prefix-separator", action="store_true",
                   help="seed generation with 'lemma, ' instead of the bare lemma")


def _model_config(args, vocab_size: int) -> ModelConfig:
    return ModelConfig(vocab_size=vocab_size, max_length=args.max_length, embed_dim=args.embed_dim,
                       lstm_units=args.lstm_units, lstm_layers=args.lstm_layers,
                       bidirectional=not args.unidirectional, seed=args.seed)


def _train_config(args, epochs: int) -> TrainConfig:
    return TrainConfig(epochs=epochs, batch_size=args.batch_size, learning_rate=args.lr,
                       optimizer=args.optimizer, grad_clip_norm=args.grad_clip,
                       shuffle_seed=args.seed, precision=args.precision,
                       bucket_batches=args.bucket_batches)


def _gen_config(args) -> GenConfig:
    return GenConfig(temperature=args.temperature, max_chars=args.max_chars,
                     sample_seed=args.seed, prefix_separator=args.prefix_separator)


# -- subcommands ---------------------------------------------------------------

def cmd_prepare(args) -> int:
    started = _now()
    entries = read_inflection_file(args.input)
    if args.consolidate:
        entries = consolidate(entries, read_inflection_file(args.consolidate))
    if args.labels:
        unlabeled = sum(e.class_label is None for e in entries)
        if unlabeled:
            raise CorpusValidationError(f"--labels given but {unlabeled} entries have no class label")
    else:
        entries = [InflectionEntry(e.forms) for e in entries]
    if args.filter_forms is not None:
        entries = filter_by_form_count(entries, args.filter_forms)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    if args.split is not None:
        pair = stratified_split(entries, args.split, args.seed)
        write_inflection_file(out / "train.txt", pair.train)
        write_inflection_file(out / "test.txt", pair.test)
        written = {"train.txt": len(pair.train), "test.txt": len(pair.test)}
    else:
        write_inflection_file(out / "prepared.txt", entries)
        written = {"prepared.txt": len(entries)}
    for name, n in written.items():
        print(f"{out / name}\t{n} entries")
    write_manifest(out / "prepare.manifest.json", args,
                   {"input": args.input, "dev": args.consolidate}, started, {"outputs": written})
    return 0


def cmd_stats(args) -> int:
    started = _now()
    entries = read_inflection_file(args.input)
    stats = compute_stats(entries, args.bin_width)
    if args.out:
        Path(args.out).write_text(stats.to_tsv(), encoding="utf-8")
        Path(args.out).with_suffix(".summary.json").write_text(
            json.dumps(stats.summary(), indent=2), encoding="utf-8")
        write_manifest(Path(args.out).with_suffix(".manifest.json"), args, {"input": args.input}, started)
    else:
        sys.stdout.write(stats.to_tsv())
    summary = stats.summary()
    print(f"entries={summary['entry_count']} mean_length={summary['mean_line_length']:.2f} "
          f"max_length={summary['max_line_length']} forms={summary['form_count_distribution']}",
          file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    started = _now()
    entries = read_inflection_file(args.train)
    lines = [e.line for e in entries]
    vocab = build_vocab(lines)
    cfg = _model_config(args, vocab.size)
    tc = _train_config(args, args.epochs)
    samples = SampleSet.from_lines(lines, vocab, cfg.max_length)
    meta = {"train_mean_line_length": sum(map(len, lines)) / max(1, len(lines))}

    out = Path(args.out)
    best_path = out.with_name(out.stem + ".best" + out.suffix)
    best = [float("inf")]

    def checkpoint(epoch, params, loss):
        CharModel(params, cfg, vocab, {**meta, "epoch": epoch}).save(out)
        if loss < best[0]:
            best[0] = loss
            CharModel(params, cfg, vocab, {**meta, "epoch": epoch}).save(best_path)

    params, report = train(init_model(cfg), cfg, samples, tc, on_epoch_end=checkpoint)
    CharModel(params, cfg, vocab, {**meta, "epoch": tc.epochs}).save(out)
    report.checkpoint_path = out.name  # the report sits beside the checkpoint
    report_path = out.with_suffix(".report.json")
    report_dict = report.to_dict(include_timing=not args.deterministic)
    report_dict["model_config"] = cfg.to_dict()
    report_path.write_text(json.dumps(report_dict, indent=2, sort_keys=True), encoding="utf-8")
    write_manifest(out.with_suffix(".manifest.json"), args, {"train": args.train}, started,
                   {"epoch_seconds": report.epoch_seconds})
    print(f"saved {out} (final loss {report.epoch_losses[-1]:.4f})" if report.epoch_losses else f"saved {out}")
    return 0


def cmd_generate(args) -> int:
    model = CharModel.load(args.model)
    gc = _gen_config(args)
    prefix = args.prefix + (", " if gc.prefix_separator else "")
    print(generate(model, prefix, gc))
    return 0


def cmd_eval(args) -> int:
    started = _now()
    model = CharModel.load(args.model)
    test = read_inflection_file(args.test)
    report = evaluate(model, test, _gen_config(args), dataset_id=Path(args.test).name)
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    Path(f"{prefix}.json").write_text(report.to_json(), encoding="utf-8")
    Path(f"{prefix}.tsv").write_text(report.to_tsv(), encoding="utf-8")
    write_manifest(f"{prefix}.manifest.json", args, {"model": args.model, "test": args.test}, started)
    print(f"accuracy {report.accuracy_percent:.2f}% ({report.correct}/{report.total}), "
          f"form-count MAE {report.form_count_mae:.3f}")
    return 0


def cmd_ablate(args) -> int:
    started = _now()
    grid = AblationGrid.from_file(args.grid)
    corpora = load_corpora(grid.corpora)
    rows = run_ablation(grid, corpora, args.out)
    inputs = {"grid": args.grid}
    for name, spec in grid.corpora.items():
        inputs[f"{name}.train"] = spec["train"]
        inputs[f"{name}.test"] = spec["test"]
    write_manifest(Path(args.out) / "ablate.manifest.json", args, inputs, started)
    failed = [r for r in rows if r["status"] != "ok"]
    for r in rows:
        acc = "-" if r["accuracy_percent"] is None else f"{r['accuracy_percent']:.2f}"
        print(f"{r['dataset']}\tforms={r['form_filter'] or 'all'}\tT={r['max_length']}\t"
              f"epochs={r['epochs']}\ttau={r['temperature']}\tacc={acc}\t{r['status']}")
    return 1 if failed else 0


def cmd_pretrain_finetune(args) -> int:
    started = _now()
    pretrain_lines = [l for l in Path(args.pretrain).read_text(encoding="utf-8").splitlines() if l.strip()]
    pretrain_lines = [normalize_text(l) for l in pretrain_lines]
    finetune = read_inflection_file(args.finetune)
    prompts_src = read_inflection_file(args.test) if args.test else finetune
    prompts = [e.lemma for e in prompts_src][: args.prompts]
    cfg = _model_config(args, vocab_size=3)  # replaced by the union vocabulary size
    diag, tuned, scratch = transfer_diagnostic(
        cfg, pretrain_lines, finetune, prompts,
        _train_config(args, args.epochs_pre), _train_config(args, args.epochs_fine),
        _train_config(args, args.epochs_scratch or args.epochs_fine), _gen_config(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tuned.save(out / "finetuned.mgck")
    scratch.save(out / "scratch.mgck")
    (out / "diagnostic.json").write_text(json.dumps(diag.to_dict(), indent=2, ensure_ascii=False),
                                         encoding="utf-8")
    write_manifest(out / "pretrain-finetune.manifest.json", args,
                   {"pretrain": args.pretrain, "finetune": args.finetune, "test": args.test}, started)
    print(f"separator rate: pretrained+finetuned {diag.pretrained_separator_rate:.3f}, "
          f"from scratch {diag.scratch_separator_rate:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of option defaults")
    common.add_argument("--threads", type=int, default=None, help="cap BLAS worker threads")
    common.add_argument("--deterministic", action="store_true",
                        help="single-threaded math; omit wall-clock fields from reports")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="inflectlm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", parents=[common], help="normalize, filter and split a corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--labels", action="store_true", help="entries carry class labels; keep them")
    p.add_argument("--filter-forms", type=int, default=None, metavar="N")
    p.add_argument("--split", type=float, default=None, metavar="FRACTION", help="test fraction")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--consolidate", default=None, metavar="DEV_FILE")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("stats", parents=[common], help="line-length histogram and form counts")
    p.add_argument("--input", required=True)
    p.add_argument("--bin-width", type=int, default=1)
    p.add_argument("--out", default=None, help="write the TSV here instead of stdout")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", parents=[common], help="train a model on an inflection corpus")
    p.add_argument("--train", required=True)
    p.add_argument("--out", default="model.mgck")
    _add_model_args(p)
    _add_train_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", parents=[common], help="complete one lemma")
    p.add_argument("--model", required=True)
    p.add_argument("--prefix", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_gen_args(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", parents=[common], help="exact-match evaluation on a test file")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", default="eval", help="output prefix for .json/.tsv")
    p.add_argument("--seed", type=int, default=0)
    _add_gen_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", parents=[common], help="run an experiment grid")
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("pretrain-finetune", parents=[common],
                       help="compare pretraining on prose against training from scratch")
    p.add_argument("--pretrain", required=True, help="plain text, one line per example")
    p.add_argument("--finetune", required=True, help="inflection corpus")
    p.add_argument("--test", default=None, help="lemmas to prompt with (default: finetune corpus)")
    p.add_argument("--prompts", type=int, default=200, help="max number of prompts")
    p.add_argument("--epochs-pre", type=int, default=14)
    p.add_argument("--epochs-fine", type=int, default=14)
    p.add_argument("--epochs-scratch", type=int, default=None)
    p.add_argument("--out", default="pretrain_finetune")
    _add_model_args(p)
    _add_train_args(p, epochs_flag=False)
    _add_gen_args(p)
    p.set_defaults(func=cmd_pretrain_finetune)
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            overrides = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read --config {args.config}: {exc}")
        sub = _subparser(parser, args.command)
        known = {a.dest for a in sub._actions}
        unknown = sorted(k for k in (o.replace("-", "_") for o in overrides) if k not in known)
        if unknown:
            parser.error(f"unknown keys in {args.config}: {', '.join(unknown)}")
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in overrides.items()})
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    threads = 1 if args.deterministic else args.threads
    try:
        if threads:
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=threads):
                return args.func(args)
        return args.func(args)
    except OPERATIONAL_ERRORS as exc:
        print(f"inflectlm {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
