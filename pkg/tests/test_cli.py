import csv
import json

import pytest

from boxswarm.cli import build_parser, main
from boxswarm.gnn.io import load_dataset, load_params

MISSION = """\
seed = 1

[scene]
n_whales = 6

[agents]
count = 2
"""


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# boxswarm schema_version=1 config_hash=")
    return list(csv.DictReader(lines[1:]))


def test_bandwidth_table(tmp_path, capsys):
    out = tmp_path / "bw.csv"
    assert main(["bandwidth", "--n-w", "0", "20", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 21
    assert rows[0]["bytes"] == "128"
    assert rows[-1]["bytes"] == "308"
    assert float(rows[-1]["latency_s"]) == 0.002464
    assert rows[-1]["framed_bytes"] == "316"


def test_bandwidth_stdout_header(capsys):
    assert main(["bandwidth", "--n-w", "20", "20"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("# boxswarm schema_version=1")
    assert lines[1] == "schema_version,config_hash,n_w,d_h,bytes,latency_s,framed_bytes"


def test_config_hash_is_stable_and_sensitive(capsys):
    main(["bandwidth", "--n-w", "1", "2"])
    a = capsys.readouterr().out.splitlines()[0]
    main(["bandwidth", "--n-w", "1", "2"])
    b = capsys.readouterr().out.splitlines()[0]
    main(["bandwidth", "--n-w", "1", "2", "--d-h", "16"])
    c = capsys.readouterr().out.splitlines()[0]
    assert a == b and a != c


def test_gen_dataset_train_eval(tmp_path, capsys):
    data = tmp_path / "d.bin"
    params = tmp_path / "p.bin"
    assert main(["gen-dataset", "--n-a", "3", "--n-g", "5", "--count", "20", "--out", str(data)]) == 0
    assert len(load_dataset(data)) == 20
    assert main(["train", "--dataset", str(data), "--epochs", "2", "--batch", "10", "--quiet",
                 "--curve", str(tmp_path / "curve.csv"), "--out", str(params)]) == 0
    assert load_params(params).config.g_max == 10
    assert [r["epoch"] for r in read_csv(tmp_path / "curve.csv")] == ["1", "2"]
    out = tmp_path / "eval.csv"
    assert main(["eval-assign", "--params", str(params), "--n-a", "3", "--n-g-min", "4",
                 "--n-g-max", "6", "--trials", "10", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert [r["n_g"] for r in rows] == ["4", "5", "6"]
    assert all(0 <= float(r["diversity_pct"]) <= 100 for r in rows)
    table = capsys.readouterr().out
    assert "Optimality (%)" in table and "Diversity (%)" in table


def test_eval_registration(tmp_path):
    out = tmp_path / "reg.csv"
    assert main(["eval-registration", "--pairs", "3", "--noise", "0", "--stress", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 2
    assert rows[0]["accuracy_pct"] == "100.0"


def test_simulate_is_byte_identical(tmp_path, capsys):
    cfg = tmp_path / "m.toml"
    cfg.write_text(MISSION)
    a, b, c = tmp_path / "a.jsonl", tmp_path / "b.jsonl", tmp_path / "a.csv"
    assert main(["simulate", str(cfg), "--out", str(a), "--out-csv", str(c)]) == 0
    assert main(["simulate", str(cfg), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    records = [json.loads(line) for line in a.read_text().splitlines()]
    assert [r["record"] for r in records] == ["config", "mission", "agent", "agent"]
    assert records[0]["config"]["agents"]["count"] == 2
    assert len({r["config_hash"] for r in records}) == 1
    assert c.read_text().splitlines()[0].startswith("schema_version,config_hash,agent,goal")
    assert "consensus_ok=True" in capsys.readouterr().out


def test_simulate_seed_override_changes_report(tmp_path):
    cfg = tmp_path / "m.toml"
    cfg.write_text(MISSION)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    main(["simulate", str(cfg), "--out", str(a)])
    main(["simulate", str(cfg), "--seed", "2", "--out", str(b)])
    assert a.read_bytes() != b.read_bytes()


def test_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(MISSION.replace("count = 2", "count = 0"))
    assert main(["simulate", str(cfg)]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error: [config] line 7:")


def test_mission_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "m.toml"
    cfg.write_text(MISSION + "\n[detector]\ns_det = 0.0\n\n[scout]\nmax_frames = 20\n")
    assert main(["simulate", str(cfg)]) == 1
    assert capsys.readouterr().err.startswith("error: [scout]")


def test_missing_file_exit_code(tmp_path, capsys):
    assert main(["eval-assign", "--params", str(tmp_path / "nope.bin"), "--trials", "1"]) == 1
    assert capsys.readouterr().err.startswith("error: [eval-assign]")


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["bandwidth", "--link-bps", "0"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2


def test_train_defaults_follow_reference_recipe():
    from boxswarm.gnn.train import REFERENCE_MODEL, REFERENCE_TRAINING

    args = build_parser().parse_args(["train", "--out", "x"])
    assert args.lr == REFERENCE_TRAINING.lr
    assert args.optimizer == REFERENCE_TRAINING.optimizer
    assert args.ce_scale == REFERENCE_TRAINING.ce_scale
    assert args.no_residual is (not REFERENCE_MODEL.residual)
    assert args.count == 5000 and args.n_a == 5 and args.n_g == 10
