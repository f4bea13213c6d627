"""Config validation and the ``decaycorr`` command-line contract."""
import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from decaycorr import cli
from decaycorr import config as cfgmod

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def write_config(path, cfg):
    path.write_text(json.dumps(cfg, indent=2))
    return str(path)


def doubling_cfg(**over):
    cfg = {"schema_version": 1, "seed": 4, "system": {"kind": "doubling"},
           "observables": {"phi": {"kind": "sawtooth"}, "psi": {"kind": "sawtooth"}},
           "estimator": {"N": 1000, "burn_in": 100, "n_max": 6}}
    cfg.update(over)
    return cfg


def files(d):
    return {name: open(os.path.join(d, name), "rb").read() for name in sorted(os.listdir(d))}


# --------------------------------------------------------------------------- #
# config parsing
# --------------------------------------------------------------------------- #

def test_shipped_configs_validate():
    for name in sorted(os.listdir(CONFIGS)):
        with open(os.path.join(CONFIGS, name)) as fh:
            cfgmod.parse_config(fh.read(), name)


def test_invalid_json_reports_line():
    text = '{\n  "schema_version": 1,\n  "seed": 3,,\n}'
    with pytest.raises(cfgmod.ConfigError, match=r"^c\.json:3:"):
        cfgmod.parse_config(text, "c.json")


def test_schema_violation_reports_line_and_path():
    text = '{\n  "schema_version": 1,\n  "seed": 3,\n  "estimator": {\n    "N": -5\n  }\n}'
    with pytest.raises(cfgmod.ConfigError) as info:
        cfgmod.parse_config(text, "c.json")
    assert str(info.value).startswith("c.json:5: estimator/N:")


def test_unknown_key_reports_enclosing_line():
    text = '{\n  "schema_version": 1,\n  "system": {"kind": "doubling", "colour": 1}\n}'
    with pytest.raises(cfgmod.ConfigError, match=r"c\.json:3: system:.*colour"):
        cfgmod.parse_config(text, "c.json")


def test_seed_mandatory_and_override():
    raw = cfgmod.parse_config('{"schema_version": 1}')
    with pytest.raises(cfgmod.ConfigError, match="seed"):
        cfgmod.resolve(raw)
    assert cfgmod.resolve(raw, seed=9)["seed"] == 9
    assert cfgmod.resolve({"schema_version": 1, "seed": 2}, seed=9)["seed"] == 9


def test_resolve_fills_defaults_without_mutating():
    raw = {"schema_version": 1, "seed": 1, "estimator": {"N": 10}}
    res = cfgmod.resolve(raw, out="x")
    assert res["estimator"]["N"] == 10 and res["estimator"]["spacing"] == 16
    assert res["output"] == "x" and raw == {"schema_version": 1, "seed": 1, "estimator": {"N": 10}}


# --------------------------------------------------------------------------- #
# simulate
# --------------------------------------------------------------------------- #

def test_simulate_doubling_rows(tmp_path):
    cfg = write_config(tmp_path / "c.json", doubling_cfg())
    assert cli.run(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_OK
    with open(tmp_path / "o" / "ensemble.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["chain", "x0"]
    x = np.array([float(r[1]) for r in rows[1:]])
    assert len(x) == 1000 and np.all((x >= 0) & (x < 1))


@pytest.mark.parametrize("command", ["simulate", "correlate"])
def test_determinism_byte_identical(tmp_path, command):
    cfg = write_config(tmp_path / "c.json", doubling_cfg(analysis={"window": [0, 6]}))
    out = tmp_path / "o"
    assert cli.run([command, "--config", cfg, "--out", str(out), "--threads", "2"]) == 0
    first = files(out)
    assert cli.run([command, "--config", cfg, "--out", str(out), "--threads", "2"]) == 0
    assert files(out) == first


def test_seed_flag_changes_output(tmp_path):
    cfg = write_config(tmp_path / "c.json", doubling_cfg())
    cli.run(["simulate", "--config", cfg, "--out", str(tmp_path / "a")])
    cli.run(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "5"])
    assert files(tmp_path / "a")["ensemble.csv"] != files(tmp_path / "b")["ensemble.csv"]


def test_metadata_embeds_resolved_config_without_clock(tmp_path):
    cfg = write_config(tmp_path / "c.json", doubling_cfg())
    cli.run(["simulate", "--config", cfg, "--out", str(tmp_path / "o"), "--seed", "8"])
    meta = json.loads((tmp_path / "o" / "simulate.meta.json").read_text())
    assert meta["config"]["seed"] == 8
    assert meta["config"]["estimator"]["spacing"] == 16
    assert meta["escape_count"] == 0
    assert set(meta) == {"command", "version", "threads", "config", "status", "n_points", "escape_count", "seeds"}


def test_threads_env_and_flag_precedence(tmp_path, monkeypatch):
    cfg = write_config(tmp_path / "c.json", doubling_cfg())
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    cli.run(["simulate", "--config", cfg, "--out", str(tmp_path / "a")])
    cli.run(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--threads", "5"])
    assert json.loads((tmp_path / "a" / "simulate.meta.json").read_text())["threads"] == 3
    assert json.loads((tmp_path / "b" / "simulate.meta.json").read_text())["threads"] == 5


def test_henon_escape_exit_4_with_count(tmp_path):
    out = tmp_path / "o"
    code = cli.run(["simulate", "--config", os.path.join(CONFIGS, "henon_escape.json"), "--out", str(out)])
    assert code == cli.EXIT_CONSTRUCTION
    meta = json.loads((out / "simulate.meta.json").read_text())
    assert meta["escape_count"] > 0 and meta["status"] == "failed"
    assert meta["caveat"] == cli.HENON_CAVEAT


# --------------------------------------------------------------------------- #
# exit codes
# --------------------------------------------------------------------------- #

def test_config_error_exit_2(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text('{\n  "schema_version": 1,\n  "seed": "x"\n}')
    assert cli.run(["simulate", "--config", str(path)]) == cli.EXIT_CONFIG
    assert f"{path}:3: seed:" in capsys.readouterr().err


def test_missing_config_exit_3(tmp_path):
    assert cli.run(["simulate", "--config", str(tmp_path / "nope.json")]) == cli.EXIT_MISSING


def test_missing_upstream_exit_3(tmp_path):
    cfg = write_config(tmp_path / "c.json", doubling_cfg(estimator={"ensemble": "ensemble.csv"}))
    assert cli.run(["correlate", "--config", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_MISSING
    cfg = write_config(tmp_path / "v.json", doubling_cfg(analysis={"checks": ["oracle"]}))
    assert cli.run(["verify", "--config", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_MISSING


def test_lockfile_exit_3_and_released(tmp_path):
    cfg = write_config(tmp_path / "c.json", doubling_cfg())
    out = tmp_path / "o"
    out.mkdir()
    (out / cli.LOCK_NAME).write_text("123")
    assert cli.run(["simulate", "--config", cfg, "--out", str(out)]) == cli.EXIT_MISSING
    os.remove(out / cli.LOCK_NAME)
    assert cli.run(["simulate", "--config", cfg, "--out", str(out)]) == cli.EXIT_OK
    assert not (out / cli.LOCK_NAME).exists()


def test_tower_remainder_exit_4(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", {
        "schema_version": 1, "seed": 1, "system": {"kind": "intermittent_circle", "gamma": 0.5, "d": 2},
        "tower": {"depth": 50, "remainder_threshold": 1e-6}})
    assert cli.run(["tower", "--config", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_CONSTRUCTION
    assert "remainder mass" in capsys.readouterr().err


def test_tower_unsupported_system_exit_5(tmp_path):
    cfg = write_config(tmp_path / "c.json", {"schema_version": 1, "seed": 1, "system": {"kind": "henon"}})
    assert cli.run(["tower", "--config", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_UNSUPPORTED


def test_verify_constant_pair_passes(tmp_path):
    out = str(tmp_path / "o")
    cfg = os.path.join(CONFIGS, "constant_pair.json")
    assert cli.run(["correlate", "--config", cfg, "--out", out]) == 0
    assert cli.run(["verify", "--config", cfg, "--out", out]) == cli.EXIT_OK
    with open(os.path.join(out, "verify.csv"), newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["verdict"] for r in rows] == ["pass", "pass"]


def test_verify_failing_bound_exit_1(tmp_path):
    cfg = write_config(tmp_path / "c.json", doubling_cfg(
        analysis={"checks": ["bound"], "bound_law": {"model": "Exponential", "theta": 0.5, "C": 1e-6}}))
    out = str(tmp_path / "o")
    assert cli.run(["correlate", "--config", cfg, "--out", out]) == 0
    assert cli.run(["verify", "--config", cfg, "--out", out]) == cli.EXIT_FAIL
    assert "overall: FAIL" in open(os.path.join(out, "verify.txt")).read()


def test_doubling_oracle_verify(tmp_path):
    cfg = write_config(tmp_path / "c.json", doubling_cfg(
        estimator={"N": 200_000, "n_max": 8}, analysis={"checks": ["oracle", "constant"]}))
    out = str(tmp_path / "o")
    assert cli.run(["correlate", "--config", cfg, "--out", out]) == 0
    assert cli.run(["verify", "--config", cfg, "--out", out]) == cli.EXIT_OK


def test_correlate_outputs(tmp_path):
    cfg = write_config(tmp_path / "c.json", doubling_cfg(estimator={"N": 100_000, "n_max": 6},
                                                         analysis={"window": [0, 6]}))
    out = tmp_path / "o"
    assert cli.run(["correlate", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "correlation.csv").read_text().splitlines()[0].startswith("n,")
    plot = (out / "plot.dat").read_text().splitlines()
    assert plot[0] == "# n estimate std_error bound" and len(plot) == 8
    assert "plot.dat" in (out / "plot.gp").read_text()
    assert (out / "fit.csv").exists() and "selected:" in (out / "fit.txt").read_text()


def test_pipeline_keeps_each_metadata(tmp_path):
    cfg = write_config(tmp_path / "c.json", doubling_cfg(analysis={"checks": ["constant"]}))
    out = str(tmp_path / "o")
    for cmd in ("simulate", "correlate", "verify"):
        assert cli.run([cmd, "--config", cfg, "--out", out]) == 0
    assert {f"{c}.meta.json" for c in ("simulate", "correlate", "verify")} <= set(os.listdir(out))


# --------------------------------------------------------------------------- #
# predict
# --------------------------------------------------------------------------- #

def predict_json(capsys, argv):
    assert cli.run(["predict"] + argv) == cli.EXIT_OK
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


def test_predict_henon_hoelder(capsys):
    out = predict_json(capsys, ["--modulus", "hoelder", "--alpha", "0.5", "--case", "henon", "--theta", "0.5"])
    assert out["dominant"]["model"] == "Exponential"
    # alpha |log theta| = 0.5 log 2
    assert np.isclose(-np.log(out["dominant"]["theta"]), 0.5 * np.log(2))


def test_predict_solenoid_hoelder(capsys):
    out = predict_json(capsys, ["--modulus", "hoelder", "--alpha", "0.5", "--case", "solenoid", "--gamma", "0.5"])
    # min(alpha/gamma, 1/gamma - 1) = 1
    assert out["dominant"]["model"] == "Polynomial" and np.isclose(out["dominant"]["p"], 1.0)


def test_predict_solenoid_log_poly(capsys):
    out = predict_json(capsys, ["--modulus", "log_poly", "--alpha", "2", "--case", "solenoid", "--gamma", "0.5"])
    assert out["dominant"]["model"] == "LogPolynomial" and np.isclose(out["dominant"]["alpha"], 2.0)


def test_predict_from_config(capsys):
    out = predict_json(capsys, ["--config", os.path.join(CONFIGS, "predict_solenoid.json")])
    assert out["dominant"]["model"] == "Polynomial"


def test_predict_unsupported_exit_5(capsys):
    assert cli.run(["predict", "--modulus", "hoelder", "--alpha", "0.5", "--theta", "1.5"]) == cli.EXIT_UNSUPPORTED
    assert "supported cases" in capsys.readouterr().err


def test_predict_needs_modulus_exit_2():
    assert cli.run(["predict"]) == cli.EXIT_CONFIG
    assert cli.run(["predict", "--modulus", "hoelder"]) == cli.EXIT_CONFIG


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "decaycorr.cli", "predict", "--modulus", "lipschitz",
                           "--case", "henon", "--theta", "0.5"], capture_output=True, text=True)
    assert proc.returncode == 0 and "dominant:" in proc.stdout
