# tests/test_cli.py
import asyncio
import json

import pandas as pd
import pytest

from config import ExperimentConfig
from main import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main, run
from utils.qcore.qcore_constants import (
    CONVERGENCE_COLUMNS,
    DECOUPLING_COLUMNS,
    ENTROPY_COLUMNS,
    MERGE_COLUMNS,
)
from utils.qcore.qcore_exceptions import ExperimentConfigError


def _write(path, doc):
    path.write_text(json.dumps(doc))
    return path


# -------------------------
# Experiment config
# -------------------------
def test_unknown_key_rejected():
    with pytest.raises(ExperimentConfigError):
        ExperimentConfig.from_dict({"command": "entropy", "state": "bell", "colour": "red"})


def test_missing_command_rejected():
    with pytest.raises(ExperimentConfigError):
        ExperimentConfig.from_dict({"state": "bell"})


@pytest.mark.parametrize("doc", [
    {"command": "teleport", "state": "bell"},
    {"command": "merge", "state": "bell", "eps": 0.1},
    {"command": "entropy", "state": "no/such/file.json"},
    {"command": "smooth", "state": "bell"},
    {"command": "decouple", "state": "bell", "seed": 1, "samples": 1},
    {"command": "merge", "state": "bell", "eps": 0.1, "seed": -3},
    {"command": "merge", "state": "bell", "eps": 0.1, "seed": 1, "split": ["A", "A", "R"]},
    {"command": "merge", "state": "bell", "eps": 0.0, "seed": 1},
    {"command": "smooth", "state": "bell", "eps": 1.5},
    {"command": "convergence", "state": "bell", "eps": [0.1, -0.2]},
    {"command": "smooth", "state": "bell", "eps": "small"},
])
def test_invalid_experiments(doc):
    with pytest.raises(ExperimentConfigError):
        ExperimentConfig.from_dict(doc).validate()


def test_file_overrides(tmp_path):
    path = _write(tmp_path / "exp.json", {"command": "merge", "state": "bell", "eps": [0.1, 0.2], "seed": 1})
    config = ExperimentConfig.from_file(path, seed=9, out=str(tmp_path / "o"), samples=None)
    assert config.seed == 9
    assert config.out == str(tmp_path / "o")
    assert config.eps_list == [0.1, 0.2]
    assert config.resolved_state_id() == "bell"


def test_broken_json_is_config_error(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text("{\"command\": ")
    with pytest.raises(ExperimentConfigError):
        ExperimentConfig.from_file(path)


# -------------------------
# Runs
# -------------------------
def test_duality_ghz_report(tmp_path):
    config = ExperimentConfig(command="duality", state="ghz", out=str(tmp_path))
    assert asyncio.run(run(config)) == EXIT_OK
    frame = pd.read_csv(tmp_path / "entropies.csv")
    assert list(frame.columns) == ENTROPY_COLUMNS
    gap = frame.loc[frame["quantity"] == "duality", "value_bits"].iloc[0]
    assert abs(gap) <= 1e-7

    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["toolkit_name"] == "merge-toolkit"
    for key in ("toolkit_version", "config", "toolkit", "wall_time_s", "peak_rss_bytes",
                "metrics", "outputs", "notes"):
        assert key in manifest
    assert manifest["outputs"] == ["entropies.csv"]
    assert manifest["config"]["command"] == "duality"


def test_entropy_rows_for_tripartite_state(tmp_path):
    config = ExperimentConfig(command="entropy", state="w", out=str(tmp_path))
    assert asyncio.run(run(config)) == EXIT_OK
    frame = pd.read_csv(tmp_path / "entropies.csv")
    assert set(frame["quantity"]) == {"h_min", "h_max", "h_vn"}
    assert (frame["state_id"] == "w").all()


def test_merge_is_reproducible(tmp_path):
    outputs = []
    for name in ("first", "second"):
        config = ExperimentConfig(command="merge", state="bell", eps=0.1, seed=7, out=str(tmp_path / name))
        assert asyncio.run(run(config)) == EXIT_OK
        outputs.append((tmp_path / name / "merge_runs.csv").read_text())
    assert outputs[0] == outputs[1]
    frame = pd.read_csv(tmp_path / "first" / "merge_runs.csv")
    assert list(frame.columns) == MERGE_COLUMNS
    row = frame.iloc[0]
    assert row["cost_bits"] == 8
    assert row["error"] <= row["guarantee"]
    assert row["slack"] >= -1e-6


def test_merge_runs_every_l_value(tmp_path):
    config = ExperimentConfig(command="merge", state="bell", eps=0.1, seed=3, K=2, L=[1, 2], out=str(tmp_path))
    assert asyncio.run(run(config)) == EXIT_OK
    frame = pd.read_csv(tmp_path / "merge_runs.csv")
    assert sorted(frame["L"]) == [1, 2]
    assert (frame["K"] == 2).all()
    costs = dict(zip(frame["L"], frame["cost_bits"]))
    assert costs == {1: pytest.approx(1.0), 2: pytest.approx(0.0)}


def test_decouple_grid(tmp_path):
    config = ExperimentConfig(command="decouple", seed=1, samples=10, out=str(tmp_path),
                              grid={"d_A": [2], "states": 1})
    assert asyncio.run(run(config)) == EXIT_OK
    frame = pd.read_csv(tmp_path / "decoupling.csv")
    assert list(frame.columns) == DECOUPLING_COLUMNS
    assert sorted(frame["L"]) == [1, 2]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["notes"]["cells"] == 2


def test_convergence_refused_before_solving(tmp_path):
    config = ExperimentConfig(command="convergence", state="bell", eps=0.1, n_max=6, out=str(tmp_path))
    assert asyncio.run(run(config)) == EXIT_NUMERIC
    error = json.loads((tmp_path / "error.json").read_text())
    assert error["error"] == "DimensionError"
    assert error["operation"] == "convergence"


def test_convergence_report(tmp_path):
    config = ExperimentConfig(command="convergence", state="product", eps=0.1, n_max=1, out=str(tmp_path))
    assert asyncio.run(run(config)) == EXIT_OK
    frame = pd.read_csv(tmp_path / "convergence.csv")
    assert list(frame.columns) == CONVERGENCE_COLUMNS
    assert list(frame["n"]) == [1]


# -------------------------
# Failures
# -------------------------
def test_psd_violation_writes_error_object(tmp_path):
    state = _write(tmp_path / "bad.json", {
        "kind": "density",
        "layout": [{"label": "A", "dim": 2}, {"label": "B", "dim": 1}],
        "entries": [[1.1, 0.0], [0.0, 0.0], [0.0, 0.0], [-0.1, 0.0]],
    })
    out = tmp_path / "out"
    config = ExperimentConfig(command="entropy", state=str(state), out=str(out))
    assert asyncio.run(run(config)) == EXIT_NUMERIC
    error = json.loads((out / "error.json").read_text())
    assert error["error"] == "StateValidationError"
    assert error["invariant"] == "psd"
    assert not (out / "entropies.csv").exists()


def test_missing_seed_is_usage_error(tmp_path):
    config = ExperimentConfig(command="merge", state="bell", eps=0.1, out=str(tmp_path))
    assert asyncio.run(run(config)) == EXIT_USAGE
    assert json.loads((tmp_path / "error.json").read_text())["error"] == "ExperimentConfigError"


def test_converse_needs_costs(tmp_path):
    config = ExperimentConfig(command="converse", state="bell", seed=1, out=str(tmp_path))
    assert asyncio.run(run(config)) == EXIT_USAGE


# -------------------------
# main()
# -------------------------
def test_main_with_argv(tmp_path):
    path = _write(tmp_path / "exp.json", {"command": "duality", "state": "bell"})
    out = tmp_path / "res"
    assert asyncio.run(main(["--config", str(path), "--out", str(out)])) == EXIT_OK
    assert (out / "entropies.csv").exists()
    assert (out / "manifest.json").exists()


def test_main_config_error(tmp_path, capsys):
    path = _write(tmp_path / "exp.json", {"command": "duality", "state": "bell", "bogus": 1})
    out = tmp_path / "res"
    assert asyncio.run(main(["--config", str(path), "--out", str(out)])) == EXIT_USAGE
    printed = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert printed["error"] == "ExperimentConfigError"
    assert (out / "error.json").exists()


def test_main_rejects_eps_before_any_work(tmp_path, capsys):
    path = _write(tmp_path / "exp.json", {"command": "merge", "state": "bell", "eps": 1.2, "seed": 1})
    out = tmp_path / "res"
    assert asyncio.run(main(["--config", str(path), "--out", str(out)])) == EXIT_USAGE
    printed = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert printed["error"] == "ExperimentConfigError"
    assert "eps" in printed["message"]
    assert not (out / "merge_runs.csv").exists()
