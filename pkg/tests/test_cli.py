import csv
import json

import pytest

from surfacewalk import cli
from surfacewalk import experiments as ex


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_no_command_is_usage_error(capsys):
    assert cli.main([]) == 2


def test_empty_config_is_usage_error(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("{}")
    assert cli.main(["--config", str(cfg), "oracle"]) == 2


def test_unknown_flag_and_field(tmp_path):
    assert cli.main(["oracle", "--no-such-flag"]) == 2
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"genus": 1, "colour": "red"}))
    assert cli.main(["--config", str(cfg), "--out-dir", str(tmp_path), "oracle"]) == 2


def test_unknown_experiment():
    assert cli.main(["run-experiment", "nope", "--genus", "1"]) == 2


def test_oracle_table(tmp_path):
    out = tmp_path / "o"
    code = cli.main(["--out-dir", str(out), "oracle", "--genus", "2", "--r-grid", "0:1:0.5"])
    assert code == 0
    rows = _rows(out / "oracle.csv")
    assert [float(r["r"]) for r in rows] == [0.0, 0.5, 1.0]
    assert abs(float(rows[2]["G"]) - 7 / 6) < 1e-15
    man = json.loads((out / "manifest.json").read_text())
    assert man["violations"] == 0 and "oracle.csv" in man["files"]
    assert len(man["config_hash"]) == 64


def test_r_beyond_R_is_usage_error(tmp_path):
    assert cli.main(["--out-dir", str(tmp_path), "oracle", "--genus", "2", "--r", "1.6"]) == 2


def test_outputs_deterministic(tmp_path):
    args = ["green", "--radius", "4", "--r-grid", "0.5,1.0"]
    cli.main(["--out-dir", str(tmp_path / "a")] + args)
    cli.main(["--out-dir", str(tmp_path / "b")] + args)
    assert (tmp_path / "a/green.csv").read_text() == (tmp_path / "b/green.csv").read_text()


def test_cache_gives_identical_numbers(tmp_path):
    args = ["green", "--radius", "4", "--r", "1.2"]
    cache = ["--cache-dir", str(tmp_path / "cache")]
    cli.main(["--out-dir", str(tmp_path / "a")] + cache + args)
    assert any((tmp_path / "cache").glob("ball_*.npz"))
    cli.main(["--out-dir", str(tmp_path / "b")] + cache + args)
    cli.main(["--out-dir", str(tmp_path / "c")] + args)
    a = (tmp_path / "a/green.csv").read_text()
    assert a == (tmp_path / "b/green.csv").read_text() == (tmp_path / "c/green.csv").read_text()


def test_run_experiment_alias(tmp_path):
    code = cli.main(["--out-dir", str(tmp_path), "run-experiment", "oracle-table",
                     "--genus", "1", "--r", "0.5"])
    assert code == 0 and (tmp_path / "oracle-table.csv").exists()


def test_spectral_radius_command(tmp_path):
    code = cli.main(["--out-dir", str(tmp_path), "spectral-radius", "--radius", "6", "--lumped"])
    assert code == 0
    d = json.loads((tmp_path / "spectral-radius.json").read_text())["diagnostics"]
    assert d["zuk_gate"] and d["lower"] > 2 ** 0.5


def test_violation_exit_code(tmp_path, monkeypatch):
    monkeypatch.setitem(cli.COMMANDS, "oracle", lambda cfg, cache: ex.Result([{"a": 1}], {}, 1))
    assert cli.main(["--out-dir", str(tmp_path), "oracle", "--genus", "1"]) == 1


def test_grid_parsing():
    assert ex.parse_grid("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert ex.parse_grid("1,2.5") == [1.0, 2.5]
    with pytest.raises(ex.ConfigError):
        ex.parse_grid("1:0:0.1")


def test_automaton_command_free(tmp_path):
    code = cli.main(["--out-dir", str(tmp_path), "automaton", "--genus", "2", "--free",
                     "--validate-radius", "6"])
    assert code == 0
    assert json.loads((tmp_path / "automaton.json").read_text())["states"] == 9
    assert (tmp_path / "automaton.dot").read_text().startswith("digraph")
