import json

import pytest

from conftest import MACHT, POARTA
from inflectlm.cli import main, parse_args
from inflectlm.corpus import InflectionEntry, write_inflection_file
from inflectlm.model import load_checkpoint

TINY = ["--max-length", "8", "--embed-dim", "4", "--lstm-units", "4", "--batch-size", "16"]


@pytest.fixture
def corpus(tmp_path):
    path = tmp_path / "toy.txt"
    write_inflection_file(path, [InflectionEntry(tuple(POARTA)), InflectionEntry(tuple(MACHT)),
                                 InflectionEntry(("ab", "abe"))])
    return path


@pytest.fixture
def model_path(tmp_path, corpus):
    out = tmp_path / "m.mgck"
    assert main(["train", "--train", str(corpus), "--epochs", "2", "--out", str(out), *TINY]) == 0
    return out


def test_stats_single_entry(tmp_path, capsys):
    path = tmp_path / "one.txt"
    path.write_text("a, b\n", encoding="utf-8")
    assert main(["stats", "--input", str(path)]) == 0
    assert capsys.readouterr().out == "bin\tcount\n4\t1\n"


def test_stats_to_file(tmp_path, corpus):
    out = tmp_path / "hist.tsv"
    assert main(["stats", "--input", str(corpus), "--bin-width", "10", "--out", str(out)]) == 0
    assert out.read_text().startswith("bin\tcount\n")
    assert json.loads(out.with_suffix(".summary.json").read_text())["entry_count"] == 3
    assert out.with_suffix(".manifest.json").exists()


def test_prepare_split(tmp_path):
    src = tmp_path / "labeled.txt"
    src.write_text("".join(f"w{i}, w{i}a\t{i % 2}\n" for i in range(20)), encoding="utf-8")
    before = src.read_bytes()
    out = tmp_path / "prep"
    assert main(["prepare", "--input", str(src), "--labels", "--split", "0.1", "--seed", "1",
                 "--out-dir", str(out)]) == 0
    train = (out / "train.txt").read_text().splitlines()
    test = (out / "test.txt").read_text().splitlines()
    assert (len(train), len(test)) == (18, 2)
    assert src.read_bytes() == before  # input untouched
    manifest = json.loads((out / "prepare.manifest.json").read_text())
    assert manifest["command"] == "prepare" and manifest["seeds"] == {"seed": 1}
    assert len(manifest["inputs"]["input"]["sha256"]) == 64


def test_prepare_filter_and_normalize(tmp_path):
    src = tmp_path / "raw.txt"
    src.write_text("porţi, porți\nx, y, z\n", encoding="utf-8")
    assert main(["prepare", "--input", str(src), "--filter-forms", "2", "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "prepared.txt").read_text(encoding="utf-8") == "porți, porți\n"


def test_train_outputs(model_path):
    report = json.loads(model_path.with_suffix(".report.json").read_text())
    assert len(report["epoch_losses"]) == 2
    assert model_path.with_name("m.best.mgck").exists()
    manifest = json.loads(model_path.with_suffix(".manifest.json").read_text())
    assert manifest["config"]["epochs"] == 2 and manifest["tool_version"]
    _, cfg, _ = load_checkpoint(model_path)
    assert cfg.max_length == 8 and cfg.embed_dim == 4


def test_generate_deterministic(model_path, capsys):
    argv = ["generate", "--model", str(model_path), "--prefix", "poartă", "--temperature", "0",
            "--max-chars", "20"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    assert capsys.readouterr().out == first and first.startswith("poartă")


def test_eval_outputs(tmp_path, model_path, corpus, capsys):
    prefix = tmp_path / "ev" / "report"
    assert main(["eval", "--model", str(model_path), "--test", str(corpus), "--temperature", "0",
                 "--max-chars", "20", "--out", str(prefix)]) == 0
    report = json.loads((tmp_path / "ev" / "report.json").read_text())
    assert report["total"] == 3
    assert (tmp_path / "ev" / "report.tsv").read_text().startswith("lemma\t")
    assert "accuracy" in capsys.readouterr().out


def test_ablate(tmp_path, corpus):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({
        "runs": [{"dataset": "toy", "max_length": 8, "epochs": 1, "temperature": 0.0}],
        "model": {"embed_dim": 4, "lstm_units": 4}, "generation": {"max_chars": 20},
        "corpora": {"toy": {"train": corpus.name, "test": corpus.name}}}))
    assert main(["ablate", "--grid", str(grid), "--out", str(tmp_path / "res")]) == 0
    assert (tmp_path / "res" / "results.tsv").exists()
    assert (tmp_path / "res" / "ablate.manifest.json").exists()


def test_pretrain_finetune(tmp_path, corpus, capsys):
    prose = tmp_path / "prose.txt"
    prose.write_text("the cat sat, on a mat\nbig dogs run\n", encoding="utf-8")
    out = tmp_path / "pf"
    assert main(["pretrain-finetune", "--pretrain", str(prose), "--finetune", str(corpus),
                 "--epochs-pre", "1", "--epochs-fine", "1", "--max-chars", "20", "--out", str(out),
                 *TINY]) == 0
    diag = json.loads((out / "diagnostic.json").read_text())
    assert diag["pretrained_separator_rate"] is not None and diag["scratch_separator_rate"] is not None
    assert (out / "finetuned.mgck").exists() and (out / "scratch.mgck").exists()
    assert "separator rate" in capsys.readouterr().out


class TestExitCodes:
    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as info:
            main(["frobnicate"])
        assert info.value.code == 2

    def test_unknown_flag(self, corpus):
        with pytest.raises(SystemExit) as info:
            main(["stats", "--input", str(corpus), "--bogus"])
        assert info.value.code == 2

    def test_missing_file(self, tmp_path, capsys):
        assert main(["stats", "--input", str(tmp_path / "nope.txt")]) == 1
        assert "error" in capsys.readouterr().err

    def test_corrupt_checkpoint(self, tmp_path, corpus):
        bad = tmp_path / "bad.mgck"
        bad.write_bytes(b"not a checkpoint")
        assert main(["eval", "--model", str(bad), "--test", str(corpus)]) == 1

    def test_parse_error_has_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("a, b\n, , \n", encoding="utf-8")
        assert main(["stats", "--input", str(bad)]) == 1
        assert "2" in capsys.readouterr().err

    def test_oov_prefix(self, model_path):
        assert main(["generate", "--model", str(model_path), "--prefix", "qqq"]) == 1


class TestConfigPrecedence:
    def test_file_overrides_default_flag_overrides_file(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"epochs": 3, "lr": 0.01}))
        args = parse_args(["train", "--train", "x", "--config", str(cfg), "--epochs", "5"])
        assert args.epochs == 5 and args.lr == 0.01 and args.batch_size == 128

    def test_unknown_key_is_usage_error(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"epochz": 3}))
        with pytest.raises(SystemExit) as info:
            parse_args(["train", "--train", "x", "--config", str(cfg)])
        assert info.value.code == 2


def test_deterministic_runs_are_byte_identical(tmp_path, corpus):
    outputs = []
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        assert main(["train", "--train", str(corpus), "--epochs", "2", "--seed", "4",
                     "--deterministic", "--out", str(d / "m.mgck"), *TINY]) == 0
        assert main(["eval", "--model", str(d / "m.mgck"), "--test", str(corpus), "--seed", "4",
                     "--deterministic", "--max-chars", "20", "--out", str(d / "ev")]) == 0
        outputs.append([(d / name).read_bytes()
                        for name in ("m.mgck", "m.best.mgck", "m.report.json", "ev.json", "ev.tsv")])
    assert outputs[0] == outputs[1]
