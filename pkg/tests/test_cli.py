import json

import pytest

from cascade_events.cli import main
from cascade_events.config import RunConfig, format_config, parse_config_text

SMALL = ["--set", "dim=8", "--set", "layers=1", "--set", "heads=2", "--set", "epochs=2", "--set", "max_len=12",
         "--set", "pos_dim=4", "--set", "max_distance=4", "--set", "dropout=0.0"]


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    code = main(["generate", "--output", str(out), "--splits", "30,8,8", "--seed", "4",
                 "--set", "n_types=3", "--set", "n_roles=4", "--set", "min_len=6", "--set", "max_len=12",
                 "--set", "vocab_size=60", "--set", "legal_density=0.75"])
    assert code == 0
    return out


def paths(data):
    return ["--schema", str(data / "schema.json"), "--train", str(data / "train.jsonl"),
            "--dev", str(data / "dev.jsonl")]


@pytest.fixture(scope="module")
def trained(data, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(["train", *paths(data), "--output", str(out), *SMALL]) == 0
    return out


def test_generate_outputs_and_determinism(data, tmp_path):
    assert {p.name for p in data.iterdir()} >= {"train.jsonl", "dev.jsonl", "test.jsonl", "schema.json",
                                                 "generator.txt"}
    again = tmp_path / "again"
    main(["generate", "--output", str(again), "--splits", "30,8,8", "--seed", "4",
          "--set", "n_types=3", "--set", "n_roles=4", "--set", "min_len=6", "--set", "max_len=12",
          "--set", "vocab_size=60", "--set", "legal_density=0.75"])
    for name in ("train.jsonl", "dev.jsonl", "test.jsonl", "schema.json"):
        assert (again / name).read_bytes() == (data / name).read_bytes()


def test_train_artifacts(trained):
    assert {"config.txt", "model.pt", "history.jsonl", "vocab.txt"} <= {p.name for p in trained.iterdir()}
    rows = [json.loads(x) for x in (trained / "history.jsonl").read_text().splitlines()]
    assert [r["epoch"] for r in rows] == [1, 2]
    assert {"train_loss", "dev_TI_f1", "dev_TC_f1", "dev_AI_f1", "dev_AC_f1"} <= set(rows[0])


def test_snapshot_rerun_reproduces_history(data, trained, tmp_path):
    assert main(["train", "--config", str(trained / "config.txt"), "--output", str(tmp_path)]) == 0
    assert (tmp_path / "history.jsonl").read_text() == (trained / "history.jsonl").read_text()


def test_default_snapshot_matches_documented_defaults(data, tmp_path):
    code = main(["train", "--schema", str(data / "schema.json"), "--train", str(data / "train.jsonl"),
                 "--output", str(tmp_path), "--set", "epochs=1"])
    assert code == 0
    snap = parse_config_text((tmp_path / "config.txt").read_text())
    expected = RunConfig(schema=str(data / "schema.json"), train=str(data / "train.jsonl"),
                         output=str(tmp_path), epochs=1)
    assert snap == expected.to_dict()
    reference = dict(batch_size=8, encoder_lr=2e-5, decoder_lr=1e-4, warmup=0.1, weight_decay=0.01, dropout=0.3,
                  threshold_1=0.5, threshold_2=0.5, threshold_3=0.5, threshold_4=0.5, threshold_5=0.5)
    assert {k: snap[k] for k in reference} == reference


def test_ablation_flags_reach_snapshot(data, tmp_path):
    args = ["train", *paths(data), "--output", str(tmp_path), *SMALL, "--set", "epochs=1", "--fusion", "gate",
            "--pooling", "maxp", "--no-self-attention", "--no-position-embedding", "--no-indicator",
            "--strict-roles", "--seed", "9", "--threshold-2", "0.3"]
    assert main(args) == 0
    snap = parse_config_text((tmp_path / "config.txt").read_text())
    assert snap["fusion"] == "gate" and snap["pooling"] == "maxp" and snap["seed"] == 9
    assert not snap["self_attention"] and not snap["position_embedding"] and not snap["indicator"]
    assert snap["strict_roles"] and snap["threshold_2"] == 0.3


def test_config_file_then_set_precedence(data, tmp_path):
    cfg = tmp_path / "run.txt"
    cfg.write_text("# comment\nfusion = add\nseed = 5\n")
    out = tmp_path / "o"
    assert main(["train", *paths(data), "--config", str(cfg), "--output", str(out), *SMALL,
                 "--set", "epochs=0", "--seed", "6"]) == 0
    snap = parse_config_text((out / "config.txt").read_text())
    assert snap["fusion"] == "add" and snap["seed"] == 6


def test_eval_gold_against_itself(data, tmp_path, capsys):
    gold = str(data / "test.jsonl")
    code = main(["eval", "--schema", str(data / "schema.json"), "--gold", gold, "--predictions", gold,
                 "--output", str(tmp_path)])
    assert code == 0
    assert "type-M" in capsys.readouterr().out
    overall = json.loads((tmp_path / "report_overall.json").read_text())
    assert all(m["f1"] == 1.0 for m in overall["metrics"].values())
    for name in ("report_overlap.json", "report_normal.json", "report.json", "config.txt"):
        assert (tmp_path / name).exists()


def test_predict_and_eval_from_checkpoint(data, trained, tmp_path):
    common = ["--schema", str(data / "schema.json"), "--checkpoint", str(trained / "model.pt")]
    out = tmp_path / "pred.jsonl"
    assert main(["predict", *common, "--input", str(data / "test.jsonl"), "--output", str(out),
                 "--threshold-1", "0.0", "--threshold-2", "0.0", "--threshold-3", "0.0", "--threshold-4", "1.0", "--threshold-5", "1.0"]) == 0
    rows = [json.loads(x) for x in out.read_text().splitlines()]
    assert len(rows) == 8 and all(r["events"] for r in rows)
    assert all("confidence" in e for r in rows for e in r["events"])
    assert parse_config_text((tmp_path / "pred.config.txt").read_text())["threshold_1"] == 0.0
    dropped = tmp_path / "dropped.jsonl"
    main(["predict", *common, "--input", str(data / "test.jsonl"), "--output", str(dropped),
          "--threshold-1", "0.0", "--threshold-2", "0.0", "--threshold-3", "0.0", "--threshold-4", "1.0", "--threshold-5", "1.0", "--drop-empty"])
    assert all(not json.loads(x)["events"] for x in dropped.read_text().splitlines())
    assert main(["eval", *common, "--gold", str(data / "test.jsonl"), "--output", str(tmp_path / "rep")]) == 0
    assert (tmp_path / "rep" / "report_overall.json").exists()


def test_unknown_key_exits_2(data, tmp_path, capsys):
    assert main(["train", *paths(data), "--output", str(tmp_path), "--set", "learning_rate=1"]) == 2
    assert "learning_rate" in capsys.readouterr().err
    bad = tmp_path / "bad.txt"
    bad.write_text("fusoin = add\n")
    assert main(["train", *paths(data), "--output", str(tmp_path), "--config", str(bad)]) == 2
    assert "fusoin" in capsys.readouterr().err


def test_missing_files_exit_2(data, tmp_path):
    assert main(["train", "--schema", str(data / "schema.json"), "--train", str(tmp_path / "nope.jsonl"),
                 "--output", str(tmp_path)]) == 2
    assert main(["eval", "--schema", str(data / "schema.json"), "--gold", str(data / "test.jsonl"),
                 "--predictions", str(tmp_path / "nope.jsonl")]) == 2
    assert main(["train", *paths(data), "--config", str(tmp_path / "nope.txt"), "--output", str(tmp_path)]) == 2
    assert main(["predict", "--schema", str(data / "schema.json"), "--input", str(data / "test.jsonl"),
                 "--checkpoint", str(tmp_path / "nope.pt"), "--output", str(tmp_path / "p.jsonl")]) == 2


def test_gradcheck_exit_codes(capsys):
    assert main(["gradcheck", "--only", "cln", "--only", "gate_fusion"]) == 0
    assert capsys.readouterr().out.count("PASS") == 2
    assert main(["gradcheck", "--only", "cln", "--corrupt-gradient"]) == 3
    assert "FAIL" in capsys.readouterr().out
    assert main(["gradcheck", "--only", "nonsense"]) == 2


def test_format_roundtrip():
    cfg = RunConfig(fusion="concat", threshold_3=0.25, strict_roles=True)
    assert RunConfig.from_dict(parse_config_text(format_config(cfg))) == cfg
