import json

import pytest

from cfextract import cli
from cfextract.cli import main
from cfextract.config import ConfigError, dump_config, load_config


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert run("gen-data", "--n", 300, "--seed", 7, "--out", out) == 0
    return out


def test_gen_data_deterministic(tmp_path, data):
    assert run("gen-data", "--n", 300, "--seed", 7, "--out", tmp_path) == 0
    for name in ("subtask1.csv", "subtask2.csv"):
        assert (tmp_path / name).read_bytes() == (data / name).read_bytes()


def test_run_dir_under_env_root(tmp_path, monkeypatch):
    monkeypatch.setenv("CFEXTRACT_RUNS", str(tmp_path))
    assert run("gen-data", "--n", 5, "--seed", 3) == 0
    (d,) = list(tmp_path.iterdir())
    assert d.name.endswith("-gen-data-seed3")
    cfg = load_config("gen-data", d / "config.ini")
    assert cfg.n == 5 and cfg.seed == 3


def test_evaluate_gold_against_itself(tmp_path, data):
    gold = data / "subtask2.csv"
    assert run("evaluate", "--task", 2, "--pred", gold, "--gold", gold, "--out", tmp_path) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert all(report[k] == 100.0 for k in ("EM", "F1", "A_EM", "A_F1", "C_EM", "C_F1", "ACC_no_c"))
    assert "ACC_no-c" in (tmp_path / "report.txt").read_text()
    gold1 = data / "subtask1.csv"
    assert run("evaluate", "--task", 1, "--pred", gold1, "--gold", gold1, "--out", tmp_path / "t1") == 0
    assert json.loads((tmp_path / "t1" / "report.json").read_text())["f1"] == 100.0


def test_grad_check_exit_codes(tmp_path, capsys):
    assert run("grad-check", "--configs", 2, "--out", tmp_path / "a") == 0
    assert "max relative error" in capsys.readouterr().out
    assert run("grad-check", "--configs", 1, "--threshold", 1e-30, "--out", tmp_path / "b") == 1


def test_usage_and_data_errors(tmp_path, capsys):
    assert run("no-such-command") == 2
    assert run("gen-data", "--bogus", 1) == 2
    assert run("evaluate", "--task", 2) == 2
    assert run("gen-data", "--n", "many", "--out", tmp_path / "x") == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("id,text,label\n1,fine,0\n2,oops,7\n")
    assert run("train-baseline", "--train", bad, "--split-n", 1, "--out", tmp_path / "y") == 1
    assert "row 3" in capsys.readouterr().err


def test_numeric_failure_exits_one(tmp_path, capsys, monkeypatch):
    def blow_up(cfg, out):
        raise FloatingPointError("non-finite activations in encoder layer 0")
    monkeypatch.setitem(cli.HANDLERS, "grad-check", blow_up)
    assert run("grad-check", "--out", tmp_path / "g") == 1
    assert "encoder layer 0" in capsys.readouterr().err


def test_config_precedence(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[train-neural]\nlr = 0.5\nepochs = 3\n")
    cfg = load_config("train-neural", ini, {"lr": "0.25"})
    assert (cfg.lr, cfg.epochs) == (0.25, 3)
    # untouched fields keep the span-extraction defaults
    assert (cfg.batch_size, cfg.max_grad_norm, cfg.weight_decay) == (64, 7.739, 0.02)
    assert (cfg.dropout, cfg.lookahead, cfg.lookahead_alpha) == (0.0415, True, 0.47)
    assert (cfg.split_mode, cfg.split_n) == ("random-n", 355)


def test_empty_file_gives_defaults(tmp_path):
    ini = tmp_path / "empty.ini"
    ini.write_text("")
    cls = load_config("train-neural", ini, {"task": "1"})
    assert (cls.batch_size, cls.lr, cls.epochs, cls.max_grad_norm, cls.adam_eps) == (96, 3e-5, 8, 1.0, 1e-8)
    assert (cls.split_mode, cls.split_n, cls.dropout) == ("head-n", 3000, 0.1)
    assert load_config("ensemble-search", ini, {"pool": "p", "gold": "g"}).top_k == 10


def test_config_errors(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[gen-data]\nnonsense = 1\n")
    with pytest.raises(ConfigError, match="nonsense"):
        load_config("gen-data", ini)
    ini.write_text("n = 3\n")
    with pytest.raises(ConfigError, match="line 1"):
        load_config("gen-data", ini)
    ini.write_text("[gen-data]\nn = 3\nthis line is broken\n")
    with pytest.raises(ConfigError, match="3"):
        load_config("gen-data", ini)
    ini.write_text("[mystery]\n")
    with pytest.raises(ConfigError, match="mystery"):
        load_config("gen-data", ini)
    with pytest.raises(ConfigError):
        load_config("train-baseline", None, {"train": "x", "kind": "forest"})


def test_dump_roundtrip(tmp_path):
    cfg = load_config("train-neural", None, {"train": "t.csv", "lr": "0.001"})
    (tmp_path / "c.ini").write_text(dump_config("train-neural", cfg))
    assert load_config("train-neural", tmp_path / "c.ini") == cfg


def test_train_predict_reproducible(tmp_path, data):
    args = ["--train", data / "subtask2.csv", "--split-n", 60, "--lr", 1e-3, "--batch-size", 32,
            "--epochs", 1, "--layers", 1, "--d-model", 16, "--d-ff", 32, "--max-len", 40]
    # r2 passes the checkpoint file rather than its run directory
    for name, ckpt in (("r1", ""), ("r2", "checkpoint.npz")):
        assert run("train-neural", *args, "--out", tmp_path / name) == 0
        assert run("predict", "--checkpoint", tmp_path / name / ckpt, "--data", data / "subtask2.csv",
                   "--out", tmp_path / f"{name}p") == 0
    for f in ("vocab.tsv", "config.ini", "train_log.jsonl", "metrics.json"):
        assert (tmp_path / "r1" / f).exists()
    assert (tmp_path / "r1p" / "predictions.csv").read_bytes() == \
        (tmp_path / "r2p" / "predictions.csv").read_bytes()
    pred = tmp_path / "r1p" / "predictions.csv"
    assert run("evaluate", "--task", 2, "--pred", pred, "--gold", data / "subtask2.csv",
               "--out", tmp_path / "ev") == 0


def test_baseline_and_stats(tmp_path, data, capsys):
    assert run("train-baseline", "--train", data / "subtask1.csv", "--split-n", 60, "--kind", "nb",
               "--out", tmp_path / "nb") == 0
    assert (tmp_path / "nb" / "misclassified.csv").read_text().startswith("id,gold,pred,text")
    assert json.loads((tmp_path / "nb" / "metrics.json").read_text())["f1"] >= 0
    assert run("stats", "--data", data / "subtask1.csv", "--tokenizer", "bpe", "--bpe-merges", 20,
               "--out", tmp_path / "st") == 0
    assert (tmp_path / "st" / "lengths.tsv").read_text().startswith("bucket_start\tcount")
