import json

import jsonschema
import pytest
import yaml

from jointcem.cli import main
from jointcem.metrics import REPORT_SCHEMA

from conftest import TINY_MODEL


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    model = dict(TINY_MODEL, deletion_hidden=list(TINY_MODEL["deletion_hidden"]),
                 epochs=2, batch_size=16, val_fraction=0.25)
    config = {
        "model": model,
        "channel": {"n_utterances": 16, "d_a": 4, "vocab_size": 30, "min_words": 2, "max_words": 5,
                    "p_sub": 0.2, "p_ins": 0.1, "p_del": 0.1},
    }
    (root / "config.yaml").write_text(yaml.safe_dump(config))
    assert main(["gen-data", "--config", str(root / "config.yaml"), "--seed", "5", "--out", str(root / "data")]) == 0
    return root


def _run(workdir, *args):
    return main([args[0], "--config", str(workdir / "config.yaml"), *args[1:]])


def _train(workdir, variant, name=None):
    out = workdir / (name or f"train_{variant}")
    code = _run(workdir, "train", "--dataset", str(workdir / "data/dataset.jsonl"),
                "--variant", variant, "--seed", "1", "--out", str(out))
    assert code == 0
    return out


def test_gen_data_and_label(workdir):
    lines = (workdir / "data/dataset.jsonl").read_text().splitlines()
    assert len(lines) == 16
    assert (workdir / "data/manifest.json").exists()
    assert _run(workdir, "label", "--dataset", str(workdir / "data/dataset.jsonl"), "--out", str(workdir / "lab")) == 0
    records = [json.loads(x) for x in (workdir / "lab/labels.jsonl").read_text().splitlines()]
    assert len(records) == 16 * 4
    assert {"word_tags", "deletion_gaps", "e_utt", "wer"} <= set(records[0])


def test_train_is_deterministic_and_logs_all_terms(workdir):
    a = _train(workdir, "WUD", "wud_a")
    b = _train(workdir, "WUD", "wud_b")
    assert (a / "model.ckpt").read_bytes() == (b / "model.ckpt").read_bytes()
    entry = json.loads((a / "train_log.jsonl").read_text().splitlines()[0])
    for key in ("word_loss", "deletion_loss", "utt_loss"):
        assert entry[key] is not None
    manifest = json.loads((a / "manifest.json").read_text())
    assert len(manifest["inputs"]["dataset"]["sha256"]) == 64


@pytest.mark.parametrize("variant", ["W", "U", "WUD"])
def test_eval_report(workdir, variant):
    ckpt = _train(workdir, variant) / "model.ckpt"
    out = workdir / f"eval_{variant}"
    assert _run(workdir, "eval", "--checkpoint", str(ckpt), "--dataset", str(workdir / "data/dataset.jsonl"),
                "--out", str(out)) == 0
    report = json.loads((out / "report.json").read_text())
    jsonschema.validate(report, REPORT_SCHEMA)
    assert report["variant"] == variant
    assert (report["word"] is None) == (variant == "U")


def test_oracle_eval(workdir):
    out = workdir / "eval_oracle"
    assert _run(workdir, "eval", "--oracle", "--variant", "WUD",
                "--dataset", str(workdir / "data/dataset.jsonl"), "--out", str(out)) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["word"]["nce"] >= 0.999
    assert report["word"]["auc_roc"] == 1.0 and report["utterance"]["auc_roc"] == 1.0


def test_rescore_modes(workdir):
    ds = str(workdir / "data/dataset.jsonl")
    results = {}
    for mode in ("oracle", "constant"):
        out = workdir / f"rescore_{mode}"
        assert _run(workdir, "rescore", f"--{mode}", "--dataset", ds, "--out", str(out)) == 0
        results[mode] = json.loads((out / "rescore.json").read_text())
    assert results["oracle"]["rescored_wer"] == results["oracle"]["oracle_wer"]
    assert results["constant"]["rescored_wer"] == results["constant"]["baseline_wer"]
    ckpt = _train(workdir, "WU") / "model.ckpt"
    out = workdir / "rescore_model"
    assert _run(workdir, "rescore", "--checkpoint", str(ckpt), "--score", "utt", "--dataset", ds,
                "--out", str(out)) == 0


def test_usage_errors(workdir, tmp_path):
    ds = str(workdir / "data/dataset.jsonl")
    ckpt = _train(workdir, "W") / "model.ckpt"
    assert main(["rescore", "--checkpoint", str(ckpt), "--score", "utt", "--dataset", ds,
                 "--out", str(tmp_path / "r")]) == 2
    assert main(["eval", "--checkpoint", str(ckpt), "--variant", "WU", "--dataset", ds,
                 "--out", str(tmp_path / "e")]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("model:\n  not_a_field: 3\n")
    assert main(["train", "--config", str(bad), "--dataset", ds, "--out", str(tmp_path / "t")]) == 2
    assert main(["train", "--dataset", str(tmp_path / "missing.jsonl"), "--out", str(tmp_path / "t")]) == 2
    assert main(["bogus"]) == 2


def test_numerical_failure_exit_code(workdir, tmp_path, monkeypatch):
    from jointcem import cli
    from jointcem.cem.training import TrainingDiverged

    def diverge(*args, **kwargs):
        raise TrainingDiverged("epoch 1, step 0: non-finite loss")

    monkeypatch.setattr(cli, "train", diverge)
    assert _run(workdir, "train", "--dataset", str(workdir / "data/dataset.jsonl"), "--out", str(tmp_path)) == 3
