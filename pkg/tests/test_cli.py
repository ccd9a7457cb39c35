import json
import subprocess
import sys

import numpy as np
import pytest

from punct_embed.checkpoint import load_checkpoint
from punct_embed.cli import build_parser, main
from punct_embed.data import read_vectors, save_dataset, write_vectors
from punct_embed.synthetic import keyword_corpus, review_corpus

SMALL = ["--embedding-dim", "6", "--text-hidden", "4", "--tree-hidden", "3", "--fusion-hidden", "8",
         "--fusion-out", "5", "--classifier-hidden", "6,4", "--epochs", "2"]


def run(argv, environ=None):
    return main(argv, environ={} if environ is None else environ)


@pytest.fixture
def data(tmp_path):
    path = tmp_path / "d.jsonl"
    save_dataset(review_corpus(40, seed=5), path)
    return path


@pytest.fixture
def ckpt(tmp_path, data):
    out = tmp_path / "m.ckpt"
    assert run(["train", "--variant", "proposed", "--data", str(data), "--out", str(out), *SMALL]) == 0
    return out


def test_train_writes_checkpoint_and_log(ckpt, capsys):
    assert ckpt.exists()
    log = ckpt.with_name("m.ckpt.log.csv").read_text().splitlines()
    assert log[0] == "epoch,train_loss,val_acc" and len(log) == 4
    assert load_checkpoint(ckpt).config.variant == "proposed"


def test_eval_prints_accuracy(ckpt, data, capsys):
    assert run(["eval", "--checkpoint", str(ckpt), "--data", str(data)]) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("accuracy=") and 0.0 <= float(line.split("=")[1]) <= 1.0


def test_embed_writes_vectors(ckpt, data, tmp_path):
    out = tmp_path / "e.txt"
    assert run(["embed", "--checkpoint", str(ckpt), "--data", str(data), "--out", str(out)]) == 0
    width, rows = read_vectors(out)
    assert width == 5 and len(rows) == 40


def test_report_similarity_files(ckpt, data, tmp_path):
    out = tmp_path / "rep"
    assert run(["report-similarity", "--checkpoint", str(ckpt), "--data", str(data), "--out", str(out)]) == 0
    assert {p.name for p in out.iterdir()} == {"similarity.csv", "histogram.csv", "summary.csv", "histogram.png"}
    assert (out / "similarity.csv").read_text().startswith("id,similarity\n")


def test_case_study(ckpt, tmp_path):
    out = tmp_path / "cs.csv"
    assert run(["case-study", "--checkpoint", str(ckpt), "--group", "meaning_changed", "--out", str(out),
                "--figure", str(tmp_path / "cs.png")]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "id,with,without,variant,similarity" and len(lines) == 7
    assert (tmp_path / "cs.png").exists()


def test_make_splits_and_fold_use(data, tmp_path, capsys):
    splits = tmp_path / "s.json"
    assert run(["make-splits", "--data", str(data), "--k", "3", "--out", str(splits)]) == 0
    doc = json.loads(splits.read_text())
    assert doc["n"] == 40 and len(doc["folds"]) == 3
    assert [len(doc["folds"][0][k]) for k in ("train", "val", "test")] == [18, 2, 20]
    out = tmp_path / "f.ckpt"
    assert run(["train", "--variant", "bigru", "--data", str(data), "--splits", str(splits), "--fold", "2",
                "--out", str(out), *SMALL]) == 0
    assert run(["eval", "--checkpoint", str(out), "--data", str(data), "--splits", str(splits), "--fold", "9"]) == 2


def test_synth_and_import(tmp_path):
    assert run(["synth-data", "--n", "7", "--out", str(tmp_path / "s.jsonl")]) == 0
    assert len((tmp_path / "s.jsonl").read_text().splitlines()) == 8  # meta header + samples
    from pathlib import Path

    tsv = Path(__file__).parent / "fixtures" / "sst2_sample.tsv"
    assert run(["import-sst2", "--tsv", str(tsv), "--out", str(tmp_path / "i.jsonl")]) == 0


def test_external_context_round_trip(data, tmp_path, capsys):
    from punct_embed.data import load_dataset

    ids = [s.id for s in load_dataset(data)]
    ctx = tmp_path / "ctx.txt"
    write_vectors(ctx, ids, np.random.default_rng(0).normal(size=(len(ids), 7)))
    out = tmp_path / "c.ckpt"
    assert run(["train", "--data", str(data), "--context", str(ctx), "--out", str(out), *SMALL]) == 0
    assert load_checkpoint(out).config.external_context_dim == 7
    assert run(["eval", "--checkpoint", str(out), "--data", str(data), "--context", str(ctx)]) == 0
    assert run(["eval", "--checkpoint", str(out), "--data", str(data)]) == 2


@pytest.mark.parametrize("argv", [[], ["bogus"], ["train", "--nope"], ["eval"], ["make-splits", "--out", "x"]])
def test_usage_errors_exit_1(argv, capsys):
    assert run(argv) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_help_lists_flags(capsys):
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices
    for name, p in sub.items():
        assert run([name, "--help"]) == 0
        text = capsys.readouterr().out
        for action in p._actions:
            for flag in action.option_strings:
                assert flag in text, (name, flag)


def test_data_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "a", "text": "x", "label": 0}\n{"id": "b", "text": "y"}\n')
    assert run(["train", "--data", str(bad), "--out", str(tmp_path / "m")]) == 2
    assert ":2:" in capsys.readouterr().err
    assert run(["eval", "--checkpoint", str(tmp_path / "missing"), "--data", str(bad)]) == 2
    (tmp_path / "junk.ckpt").write_bytes(b"junk" * 10)
    assert run(["eval", "--checkpoint", str(tmp_path / "junk.ckpt"), "--data", str(bad)]) == 2


def test_config_file_and_env_precedence(data, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"variant": "bigru", "data": str(data), "out": str(tmp_path / "cfg.ckpt"),
                               "embedding-dim": 6, "text_hidden": 4, "classifier_hidden": [6, 4], "epochs": 1}))
    assert run(["train", "--config", str(cfg)]) == 0
    m = load_checkpoint(tmp_path / "cfg.ckpt")
    assert (m.config.variant, m.config.embedding_dim, m.config.classifier_hidden) == ("bigru", 6, (6, 4))
    # env beats config, flag beats env
    env = {"PUNCT_EMBED_EMBEDDING_DIM": "5", "PUNCT_EMBED_VARIANT": "bigru_attn"}
    assert run(["train", "--config", str(cfg), "--variant", "bigru"], env) == 0
    m = load_checkpoint(tmp_path / "cfg.ckpt")
    assert (m.config.variant, m.config.embedding_dim) == ("bigru", 5)


@pytest.mark.parametrize("doc,needle", [({"learning_rat": 0.1}, "unknown key"), ({"epochs": "many"}, "invalid")])
def test_bad_config_exit_2(tmp_path, doc, needle, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(doc))
    assert run(["train", "--config", str(cfg), "--data", "x", "--out", "y"]) == 2
    assert needle in capsys.readouterr().err


def test_reruns_are_byte_identical(data, tmp_path):
    outs = []
    for i in range(2):
        d = tmp_path / f"run{i}"
        assert run(["train", "--data", str(data), "--out", str(d / "m.ckpt"), "--seed", "3", *SMALL]) == 0
        assert run(["report-similarity", "--checkpoint", str(d / "m.ckpt"), "--data", str(data), "--out", str(d / "rep")]) == 0
        outs.append({p.relative_to(d): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()})
    assert outs[0] == outs[1] and len(outs[0]) == 6


def test_console_script_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "punct_embed.cli", "make-splits", "--n", "20", "--k", "2",
                           "--out", str(tmp_path / "s.json")], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("splits=")
