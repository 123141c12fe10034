import csv
import json
import math
import subprocess
import sys

import numpy as np
from pathlib import Path
import pytest

from kerrpulse.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, EXIT_TRUNCATION, main, read_csv_columns, run_scenario, summarize_dataset, sweep
from kerrpulse.config import PRESET_NAMES, dump_config, figure_preset, parse_config, resolve_axis
from kerrpulse.errors import ConfigError

MINIMAL = """
model.delta = -11
model.chi = 15
model.omega_re = 7
drive.kind = "cw"
"""

SMALL = """
name = "small"
model.delta = -11
model.chi = 15
model.omega_re = 7
model.nmax = 15
drive.kind = "pulses"
drive.t0 = 1.0
drive.tau = 1.0
drive.width = 0.3
drive.count = 2
run.t_end = 2.0
run.sample_dt = 0.05
target.amplitudes = [0.7071067811865476, "-0.7071067811865476"]
measure.time = 1.53
wigner.times = [1.0, 2.0]
wigner.points = 21
"""


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.model.delta == -11 and cfg.model.chi == 15 and cfg.model.omega == 7
    assert cfg.model.gamma == 1 and cfg.model.nbath == 0 and cfg.model.nmax == 30
    assert cfg.model.drive.continuous and cfg.mode == "evolve" and cfg.target is None


def test_sections_and_dotted_keys_agree():
    sectioned = "[model]\ndelta = -11\nchi = 15\nomega_re = 7\n[drive]\nkind = \"cw\"\n"
    assert parse_config(sectioned).model == parse_config(MINIMAL).model


def test_zero_width_rejected():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL.replace('"cw"', '"pulses"') + "drive.width = 0\ndrive.tau = 1\n")
    assert info.value.field == "drive.width"


def test_unknown_key_named():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL + "foo = 1\n")
    assert "foo" in str(info.value) and info.value.field == "foo"


def test_parse_error_has_line():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL + "model.gamma = = 2\n")
    assert info.value.line == 6


@pytest.mark.parametrize("extra,field", [
    ("model.nmax = 1", "model.nmax"),
    ("model.nmax = 2.5", "model.nmax"),
    ("model.gamma = -1", "model.gamma"),
    ("model.nbath = -0.5", "model.nbath"),
    ("mode = \"dance\"", "mode"),
    ("wigner.times = [20.0]", "wigner.times"),
    ("model.chi = \"x\"", "model.chi"),
    ("target.amplitudes = [\"abc\"]", "target.amplitudes"),
])
def test_invalid_fields(extra, field):
    text = MINIMAL.replace("model.chi = 15\n", "") if field == "model.chi" else MINIMAL
    with pytest.raises(ConfigError) as info:
        parse_config(text + extra + "\n")
    assert info.value.field == field


def test_complex_amplitudes():
    cfg = parse_config(MINIMAL + 'target.amplitudes = [1, [0, 1], "1-1i"]\n')
    np.testing.assert_allclose(cfg.target[:3], np.array([1, 1j, 1 - 1j]) / 2)


def test_dump_round_trip():
    cfg = parse_config(SMALL)
    again = parse_config(dump_config(cfg))
    assert again.model == cfg.model and again.wigner == cfg.wigner
    np.testing.assert_array_equal(again.target, cfg.target)


def test_presets():
    fig3 = figure_preset("fig3")
    assert (fig3.model.delta, fig3.model.chi, fig3.model.omega) == (-15, 15, 6)
    assert (fig3.model.drive.tau, fig3.model.drive.width) == (5.5, 0.4)
    fig5 = figure_preset("fig5")
    assert (fig5.model.delta, fig5.model.chi, fig5.model.omega) == (-11, 15, 7)
    assert (fig5.model.drive.width, fig5.model.drive.tau) == (0.7, 2.2)
    np.testing.assert_allclose(fig5.target[:2], [2 ** -0.5, -(2 ** -0.5)])
    fig2 = figure_preset("fig2")
    assert fig2.mode == "steady" and fig2.model.drive.continuous and fig2.wigner.analytic
    np.testing.assert_allclose(figure_preset("fig4").wigner.times, [16.3, 16.34, 16.4])
    np.testing.assert_allclose(figure_preset("fig6").wigner.times, [10.02, 10.37, 10.72])
    for name in PRESET_NAMES:
        cfg = figure_preset(name)
        if not cfg.model.drive.continuous:
            # pulse k is centred on k * tau
            np.testing.assert_allclose(cfg.model.drive.centers[:3], cfg.model.drive.tau * np.arange(1, 4))
    with pytest.raises(ConfigError) as info:
        figure_preset("fig9")
    assert "fig3" in str(info.value)


def test_axis_resolution():
    assert resolve_axis("tau") == "drive.tau"
    assert resolve_axis("omega") == "model.omega_re"
    assert resolve_axis("model.chi") == "model.chi"
    with pytest.raises(ConfigError):
        resolve_axis("kind")
    with pytest.raises(ConfigError):
        resolve_axis("nothing")


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_run_scenario_outputs(tmp_path):
    res = run_scenario(parse_config(SMALL), tmp_path / "run")
    out = tmp_path / "run"
    ts = _rows(out / "timeseries.csv")
    assert ts[0] == ["t", "p0", "p1", "p2", "p3", "mean_n", "fidelity"]
    assert len(ts) == 1 + 41 + 1  # regular grid plus the measurement time
    w = _rows(out / "wigner_000.csv")
    assert w[0] == ["x", "y", "w"] and len(w) == 1 + 21 * 21
    assert float(w[1][0]) == float(w[2][0]) and float(w[1][1]) < float(w[2][1])  # y inner
    man = json.loads((out / "manifest.json").read_text())
    assert man["inputs"]["model.delta"] == -11 and man["truncation"]["ok"] and man["wall_time_s"] > 0
    assert {"version", "timestamp", "integrator"} <= set(man)
    assert res.truncation_ok
    assert not list(tmp_path.glob(".*partial*"))
    # 17 significant digits round-trip
    assert float(ts[5][1]) == float(repr(float(ts[5][1])))


def test_no_fidelity_column_without_target(tmp_path):
    cfg = parse_config(MINIMAL + "model.nmax = 10\nrun.t_end = 0.2\n")
    run_scenario(cfg, tmp_path)
    assert _rows(tmp_path / "timeseries.csv")[0] == ["t", "p0", "p1", "p2", "p3", "mean_n"]


def test_undriven_vacuum_is_constant(tmp_path):
    cfg = parse_config(MINIMAL.replace("omega_re = 7", "omega_re = 0") + "model.nmax = 10\nrun.t_end = 1.0\n")
    run_scenario(cfg, tmp_path)
    cols = read_csv_columns(tmp_path / "timeseries.csv")
    assert np.all(cols["p0"] == 1) and np.all(cols["mean_n"] == 0)


def test_rerun_is_byte_identical(tmp_path):
    text = SMALL + "mode = \"traj\"\nqsd.n_traj = 70\nqsd.seed = 3\nqsd.sample_dt = 0.05\n"
    cfg = parse_config(text)
    run_scenario(cfg, tmp_path / "a")
    run_scenario(cfg, tmp_path / "b")
    for name in ("timeseries.csv", "qsd_timeseries.csv", "qsd_stderr.csv", "wigner_001.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    other = parse_config(text.replace("qsd.seed = 3", "qsd.seed = 4"))
    run_scenario(other, tmp_path / "c")
    assert (tmp_path / "a" / "qsd_timeseries.csv").read_bytes() != (tmp_path / "c" / "qsd_timeseries.csv").read_bytes()


def test_failed_run_leaves_nothing(tmp_path):
    cfg = parse_config(MINIMAL + "mode = \"steady\"\nmodel.nmax = 10\nrun.t_end = 0.5\n")
    with pytest.raises(Exception):
        run_scenario(cfg, tmp_path / "fail")
    assert list(tmp_path.iterdir()) == []


def test_sweep_summary_matches_datasets(tmp_path):
    base = parse_config(SMALL)
    rows = sweep(base, "omega", [0.0, 7.0], tmp_path)
    summary = _rows(tmp_path / "summary.csv")
    assert summary[0] == ["axis_value", "peak_p1", "peak_fidelity", "negativity", "truncation_ok"]
    assert len(summary) == 3
    for row, line in zip(rows, summary[1:]):
        recomputed = summarize_dataset(row["dir"])
        assert float(line[1]) == recomputed["peak_p1"]
        assert float(line[2]) == recomputed["peak_fidelity"]
        assert float(line[3]) == recomputed["negativity"]
    assert float(summary[1][1]) == 0.0  # omega = 0 stays in the vacuum


def test_sweep_point_reproduces_single_run(tmp_path):
    base = parse_config(SMALL)
    run_scenario(base, tmp_path / "single")
    rows = sweep(base, "chi", [15], tmp_path / "sw")
    assert (tmp_path / "single" / "timeseries.csv").read_bytes() == \
        (tmp_path / "sw" / "model.chi=15.0" / "timeseries.csv").read_bytes()
    assert rows[0]["error"] is None


def test_sweep_records_failures(tmp_path):
    base = parse_config(MINIMAL + "mode = \"steady\"\nmodel.nmax = 10\nwigner.points = 11\n")
    rows = sweep(base, "run.t_end", [0.5, 40.0], tmp_path)
    assert rows[0]["error"] and "ConvergenceError" in rows[0]["error"]
    assert math.isnan(rows[0]["peak_p1"]) and rows[1]["error"] is None
    assert rows[1]["peak_p1"] > 0.1


def test_sweep_in_parallel_matches_serial(tmp_path):
    base = parse_config(SMALL)
    serial = sweep(base, "tau", [1.0, 1.2], tmp_path / "s")
    parallel = sweep(base, "tau", [1.0, 1.2], tmp_path / "p", workers=2)
    for a, b in zip(serial, parallel):
        assert (Path(a["dir"]) / "timeseries.csv").read_bytes() == (Path(b["dir"]) / "timeseries.csv").read_bytes()


def _write(tmp_path, text):
    path = tmp_path / "cfg.toml"
    path.write_text(text)
    return str(path)


def test_cli_exit_codes(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL)
    assert main(["evolve", cfg, "--out", str(tmp_path / "ok")]) == EXIT_OK
    assert (tmp_path / "ok" / "timeseries.csv").exists()
    assert main(["evolve", _write(tmp_path, SMALL + "foo = 2\n")]) == EXIT_CONFIG
    assert "foo" in capsys.readouterr().err
    assert main(["evolve", str(tmp_path / "missing.toml")]) == EXIT_CONFIG
    steady = _write(tmp_path, MINIMAL + "model.nmax = 10\nrun.t_end = 0.5\n")
    assert main(["steady", steady, "--out", str(tmp_path / "st")]) == EXIT_SOLVER
    assert not (tmp_path / "st").exists()
    trunc = _write(tmp_path, MINIMAL + "run.t_end = 0.5\n")
    assert main(["evolve", trunc, "--nmax", "4", "--out", str(tmp_path / "tr")]) == EXIT_TRUNCATION
    assert (tmp_path / "tr" / "timeseries.csv").exists()


def test_cli_overrides_and_sweep(tmp_path):
    cfg = _write(tmp_path, SMALL)
    assert main(["traj", cfg, "--seed", "5", "--nmax", "12", "--threads", "2", "--out", str(tmp_path / "t")]) == 0
    man = json.loads((tmp_path / "t" / "manifest.json").read_text())
    assert man["inputs"]["qsd.seed"] == 5 and man["inputs"]["model.nmax"] == 12
    assert main(["sweep", cfg, "--axis", "tau", "--values", "1.0,1.1", "--out", str(tmp_path / "sw")]) == 0
    assert len(_rows(tmp_path / "sw" / "summary.csv")) == 3
    assert main(["sweep", cfg, "--axis", "kind", "--values", "1", "--out", str(tmp_path / "x")]) == EXIT_CONFIG


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "kerrpulse", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "figure" in out.stdout
