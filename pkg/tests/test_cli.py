import csv
import json
import os

import numpy as np
import pytest

from spinorwave.cli import (CONVERGE_NORMS, ConfigError, RunConfig,
                            _parse_corrupt, load_config, main)
from spinorwave.diagnostics import REPORT_COLUMNS


def test_load_config_defaults():
    cfg = load_config(None)
    assert cfg.scenario == "minkowski"
    assert cfg.order == 4
    assert cfg.cfl == 0.25
    assert cfg.resolution == 0 and cfg.resolutions == ()
    cfg.validate()


def test_load_config_full_ini(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("""
[scenario]
name = pp_wave
amp = 0.1
check_tol = 1e-3
corrupt = w:1.05, phi:2.0

[grid]
resolution = 32
resolutions = 16, 32, 64
order = 2

[evolution]
cfl = 0.1
t_end = 2.5
dt = 0.01
monitor_every = 5
history_len = 4
max_gauge = 1e-3
min_eig = 1e-8

[output]
dir = out_dir
figures = off
checkpoint_every = 10
""")
    cfg = load_config(str(path))
    assert cfg.scenario == "pp_wave"
    assert cfg.params == {"amp": 0.1}
    assert cfg.check_tol == 1e-3
    assert cfg.corrupt == {"w": 1.05, "phi": 2.0}
    assert cfg.resolution == 32
    assert cfg.resolutions == (16, 32, 64)
    assert cfg.order == 2
    assert cfg.cfl == 0.1 and cfg.t_end == 2.5 and cfg.dt == 0.01
    assert cfg.monitor_every == 5 and cfg.history_len == 4
    assert cfg.max_gauge == 1e-3 and cfg.min_eig == 1e-8
    assert cfg.out == "out_dir"
    assert cfg.figures is False
    assert cfg.checkpoint_every == 10
    cfg.validate()


def test_load_config_rejects_unknown_entries(tmp_path):
    bad_section = tmp_path / "a.ini"
    bad_section.write_text("[solver]\nx = 1\n")
    with pytest.raises(ConfigError):
        load_config(str(bad_section))
    bad_key = tmp_path / "b.ini"
    bad_key.write_text("[grid]\npoints = 32\n")
    with pytest.raises(ConfigError):
        load_config(str(bad_key))
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.ini"))


def test_parse_corrupt():
    assert _parse_corrupt("w:1.05,f:0.5") == {"w": 1.05, "f": 0.5}
    with pytest.raises(ConfigError):
        _parse_corrupt("w")
    with pytest.raises(ConfigError):
        _parse_corrupt("metric:1.1")


@pytest.mark.parametrize("overrides", (
    {"scenario": "nope"}, {"order": 3}, {"resolution": 1}, {"cfl": 0.0},
    {"t_end": 0.0}, {"dt": -1.0}, {"history_len": 1}, {"min_eig": 0.0},
    {"resolutions": (1, 2, 3)}, {"check_tol": -1.0},
))
def test_config_validation_rejects(overrides):
    cfg = RunConfig(**overrides)
    with pytest.raises(ConfigError):
        cfg.validate()


def test_check_command_passes(capsys):
    code = main(["check", "--scenario", "minkowski", "--resolution", "8"])
    assert code == 0
    out = capsys.readouterr().out
    assert "admissible" in out and "PASS" in out
    assert "divergence criterion: PASS" in out


def test_check_command_reports_active_source(capsys):
    code = main(["check", "--scenario", "pp_wave", "--resolution", "32"])
    assert code == 0
    out = capsys.readouterr().out
    assert "source term f active" in out


def test_check_rejects_corrupt_config(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    out = tmp_path / "artifacts"
    path.write_text(f"""
[scenario]
name = pp_wave
corrupt = w:1.05

[grid]
resolution = 32

[output]
dir = {out}
""")
    code = main(["check", "--config", str(path)])
    assert code == 3
    record = json.loads((out / "error.json").read_text())
    assert record["error"] == "constraint"
    assert "momentum_identity" in record["detail"]


def test_evolve_writes_artifacts(tmp_path):
    out = tmp_path / "run"
    code = main(["evolve", "--scenario", "minkowski", "--resolution", "8",
                 "--t-end", "0.5", "--out", str(out)])
    assert code == 0
    assert not (out / "error.json").exists()

    with open(out / "diagnostics.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == REPORT_COLUMNS
    assert len(rows) >= 3
    assert (out / "diagnostics.png").stat().st_size > 1000

    checkpoints = sorted(out.glob("checkpoint_*.npz"))
    assert len(checkpoints) == 2
    first = np.load(checkpoints[0])
    assert set(first.files) == {"n", "shape", "spacing", "t", "order",
                                "g", "dgs", "k", "f", "phi_re", "phi_im"}
    assert first["t"] == 0.0
    assert first["g"].shape[-2:] == (3, 3)
    last = np.load(checkpoints[-1])
    assert last["t"] == pytest.approx(0.5)


def test_evolve_corrupt_fails_with_only_error_json(tmp_path):
    out = tmp_path / "run"
    code = main(["evolve", "--scenario", "pp_wave", "--resolution", "32",
                 "--corrupt", "w:1.05", "--out", str(out)])
    assert code == 3
    assert os.listdir(out) == ["error.json"]
    record = json.loads((out / "error.json").read_text())
    assert record["error"] == "constraint"


def test_evolve_halt_gives_exit_4(tmp_path):
    path = tmp_path / "halt.ini"
    out = tmp_path / "run"
    path.write_text(f"""
[scenario]
name = pp_wave

[grid]
resolution = 16

[evolution]
t_end = 2.0
max_gauge = 1e-12

[output]
dir = {out}
""")
    code = main(["evolve", "--config", str(path)])
    assert code == 4
    record = json.loads((out / "error.json").read_text())
    assert record["error"] == "halt"
    assert record["message"].startswith("gauge deviation")
    assert (out / "diagnostics.csv").exists()


def test_converge_minkowski_floor_pass(tmp_path):
    out = tmp_path / "conv"
    code = main(["converge", "--scenario", "minkowski",
                 "--resolutions", "8,12,16", "--t-end", "0.3",
                 "--out", str(out)])
    assert code == 0
    table = (out / "convergence.txt").read_text()
    assert "pass" in table and "FAIL" not in table
    with open(out / "convergence.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "norm"
    assert {r[0] for r in rows[1:]} == set(CONVERGE_NORMS)
    assert (out / "convergence.png").stat().st_size > 1000


def test_converge_needs_three_resolutions():
    code = main(["converge", "--scenario", "minkowski",
                 "--resolutions", "8,16"])
    assert code == 2


def test_unknown_scenario_in_config_exits_2(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text("[scenario]\nname = flrw\n")
    code = main(["check", "--config", str(path)])
    assert code == 2
    assert "config error" in capsys.readouterr().err
