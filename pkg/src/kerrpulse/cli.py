"""Scenario runner, parameter sweeps and the ``kerrpulse`` command line.

Every run writes CSV datasets plus a ``manifest.json`` into its own output
directory. Outputs are staged in a sibling temporary directory and moved
into place only when the run succeeds.
"""
from __future__ import annotations

import argparse
import csv
import datetime
import json
import logging
import math
import os
import shutil
import sys
import tempfile
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import INTEGER_KEYS, PRESET_NAMES, ScenarioConfig, figure_preset, from_flat, load_config, resolve_axis
from .errors import (BesselRangeError, ConfigError, KerrPulseError, SolverError, TruncationWarning,
                     UndefinedParameterError, WignerConsistencyError)
from .evolve import TRUNCATION_LIMIT, integrate_master, steady_state
from .hilbert import density_from_ket, fock_ket
from .observe import (WignerGrid, fidelity, grid_axes, integrate_grid, negativity_volume,
                      wigner_analytic_steady, wigner_numeric)
from .qsd import average_ensemble

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_TRUNCATION = 0, 2, 3, 4
FMT = "%.17g"
TIMESERIES = "timeseries.csv"
QSD_TIMESERIES = "qsd_timeseries.csv"
SUMMARY_HEADER = ["axis_value", "peak_p1", "peak_fidelity", "negativity", "truncation_ok"]


@dataclass
class RunResult:
    out_dir: Path
    manifest: dict

    @property
    def truncation_ok(self) -> bool:
        return bool(self.manifest["truncation"]["ok"])


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    return FMT % x


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _observable_rows(times, rhos, target):
    pops = np.real(np.diagonal(rhos, axis1=1, axis2=2))
    p4 = np.zeros((len(times), 4))
    k = min(4, pops.shape[1])
    p4[:, :k] = pops[:, :k]
    mean_n = pops @ np.arange(pops.shape[1])
    cols = [times, p4[:, 0], p4[:, 1], p4[:, 2], p4[:, 3], mean_n]
    header = ["t", "p0", "p1", "p2", "p3", "mean_n"]
    if target is not None:
        cols.append(np.array([fidelity(r, target) for r in rhos]))
        header.append("fidelity")
    return header, np.column_stack(cols)


def _write_wigner(path, grid: WignerGrid):
    x = np.repeat(grid.xs, len(grid.ys))
    y = np.tile(grid.ys, len(grid.xs))
    _write_csv(path, ["x", "y", "w"], np.column_stack([x, y, grid.values.ravel()]))


def read_wigner_csv(path) -> WignerGrid:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    xs = np.unique(data[:, 0])
    ys = np.unique(data[:, 1])
    values = data[:, 2].reshape(len(xs), len(ys))
    return WignerGrid(xs, ys, values, integrate_grid(xs, ys, values))


def read_csv_columns(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, i] for i, name in enumerate(header)}


def _vacuum(p):
    return density_from_ket(fock_ket(0, p.nmax))


def _index_of(times, t):
    i = int(np.argmin(np.abs(times - t)))
    if abs(times[i] - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"time {t} is not a sample time")
    return i


def _wigner_times(cfg: ScenarioConfig):
    times = list(cfg.wigner.times)
    if cfg.measure_time is not None and all(abs(cfg.measure_time - t) > 1e-12 for t in times):
        times.append(cfg.measure_time)
    return times


def _master_outputs(cfg: ScenarioConfig, stage: Path, manifest: dict):
    p = cfg.model
    extra = list(cfg.measure_times) + _wigner_times(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TruncationWarning)
        traj = integrate_master(_vacuum(p), cfg.t_end, p, cfg.integrator, extra_times=extra)
    for w in caught:
        log.warning("%s", w.message)
    header, rows = _observable_rows(traj.times, traj.states, cfg.target)
    _write_csv(stage / TIMESERIES, header, rows)
    manifest["files"].append(TIMESERIES)
    manifest["truncation"] = {"ok": traj.truncation_ok, "max_top_population": traj.max_top_population,
                              "limit": TRUNCATION_LIMIT}
    manifest["integrator"] = {"steps": traj.steps, "rejected": traj.rejected,
                              "renormalizations": traj.renormalizations, "defects": traj.defects}
    if cfg.measure_times:
        mrows = [rows[_index_of(traj.times, t)] for t in cfg.measure_times]
        _write_csv(stage / "measurements.csv", header, mrows)
        manifest["files"].append("measurements.csv")
    if cfg.write_wigner:
        xs, ys = grid_axes(cfg.wigner.extent, cfg.wigner.points)
        entries = []
        for i, t in enumerate(_wigner_times(cfg)):
            grid = wigner_numeric(traj.states[_index_of(traj.times, t)], xs, ys)
            name = f"wigner_{i:03d}.csv"
            _write_wigner(stage / name, grid)
            manifest["files"].append(name)
            entries.append({"t": t, "file": name, "negativity": negativity_volume(grid),
                            "min": float(grid.values.min()), "max": float(grid.values.max())})
        manifest["wigner"] = entries
    return traj


def _qsd_outputs(cfg: ScenarioConfig, stage: Path, manifest: dict, traj=None):
    p = cfg.model
    psi0 = fock_ket(0, p.nmax)
    ens = average_ensemble(psi0, cfg.t_end, p, cfg.qsd)
    header, rows = _observable_rows(ens.times, ens.mean_rho, cfg.target)
    _write_csv(stage / QSD_TIMESERIES, header, rows)
    se = np.zeros((len(ens.times), 4))
    k = min(4, p.nmax)
    se[:, :k] = ens.stderr_pop[:, :k]
    _write_csv(stage / "qsd_stderr.csv", ["t", "se0", "se1", "se2", "se3"], np.column_stack([ens.times, se]))
    manifest["files"] += [QSD_TIMESERIES, "qsd_stderr.csv"]
    info = {"n_traj": ens.n_traj, "dt": cfg.qsd.dt, "seed": cfg.qsd.seed}
    if traj is not None:
        idx = [_index_of(traj.times, t) for t in ens.times]
        me = np.real(np.diagonal(traj.states[idx], axis1=1, axis2=2))[:, :2]
        dev = np.abs(ens.populations[:, :2] - me)
        bound = np.maximum(3 * ens.stderr_pop[:, :2], 0.02)
        info["max_deviation_p0_p1"] = float(dev.max())
        info["within_bound"] = bool(np.all(dev <= bound))
    manifest["qsd"] = info


def _steady_outputs(cfg: ScenarioConfig, stage: Path, manifest: dict):
    p = cfg.model
    if not p.drive.continuous:
        raise ConfigError("steady mode needs drive.kind = \"cw\"", field="drive.kind")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TruncationWarning)
        rho = steady_state(p, cfg.integrator, t_cap=cfg.t_end)
    for w in caught:
        log.warning("%s", w.message)
    pops = np.real(np.diag(rho))
    top = float(pops[-2:].sum())
    _write_csv(stage / "populations.csv", ["n", "p"], np.column_stack([np.arange(p.nmax), pops]))
    manifest["files"].append("populations.csv")
    header, rows = _observable_rows(np.array([math.inf]), rho[None], cfg.target)
    manifest["steady"] = dict(zip(header[1:], rows[0, 1:].tolist()))
    manifest["truncation"] = {"ok": top < TRUNCATION_LIMIT, "max_top_population": top,
                              "limit": TRUNCATION_LIMIT}
    if not cfg.write_wigner:
        return
    xs, ys = grid_axes(cfg.wigner.extent, cfg.wigner.points)
    num = wigner_numeric(rho, xs, ys).normalized()
    _write_wigner(stage / "wigner_numeric.csv", num)
    manifest["files"].append("wigner_numeric.csv")
    if cfg.wigner.analytic and p.chi != 0 and p.nbath == 0:
        ana = wigner_analytic_steady(p, xs, ys).normalized()
        _write_wigner(stage / "wigner_analytic.csv", ana)
        manifest["files"].append("wigner_analytic.csv")
        manifest["wigner_comparison"] = {
            "linf": float(np.max(np.abs(num.values - ana.values))),
            "linf_over_peak": float(np.max(np.abs(num.values - ana.values)) / ana.peak),
            "min_numeric": float(num.values.min()),
            "min_analytic": float(ana.values.min()),
        }


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> RunResult:
    """Run ``cfg`` and write its datasets and manifest into ``out_dir``.

    Solver errors propagate; anything staged for a failed run is discarded.
    """
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=f".{out.name}.partial-", dir=out.parent))
    started = time.perf_counter()
    manifest = {"name": cfg.name, "mode": cfg.mode, "inputs": cfg.raw, "version": __version__,
                "files": []}
    try:
        if cfg.mode == "steady":
            _steady_outputs(cfg, stage, manifest)
        elif cfg.mode == "traj":
            if cfg.qsd is None:
                raise ConfigError("traj mode needs qsd settings", field="qsd")
            traj = _master_outputs(cfg, stage, manifest)
            _qsd_outputs(cfg, stage, manifest, traj)
        else:
            if cfg.mode == "wigner" and not cfg.wigner.times:
                raise ConfigError("wigner mode needs wigner.times", field="wigner.times")
            traj = _master_outputs(cfg, stage, manifest)
            if cfg.qsd is not None:
                _qsd_outputs(cfg, stage, manifest, traj)
        manifest["wall_time_s"] = time.perf_counter() - started
        manifest["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        with open(stage / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
        out.mkdir(exist_ok=True)
        for name in manifest["files"] + ["manifest.json"]:
            os.replace(stage / name, out / name)
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    return RunResult(out, manifest)


def _json_default(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x)}")


def summarize_dataset(path) -> dict:
    """Summary row recomputed from a written dataset directory."""
    path = Path(path)
    with open(path / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    row = {"peak_p1": math.nan, "peak_fidelity": math.nan, "negativity": math.nan,
           "truncation_ok": bool(manifest["truncation"]["ok"])}
    if (path / TIMESERIES).exists():
        cols = read_csv_columns(path / TIMESERIES)
        row["peak_p1"] = float(cols["p1"].max())
        if "fidelity" in cols:
            row["peak_fidelity"] = float(cols["fidelity"].max())
    elif (path / "populations.csv").exists():
        cols = read_csv_columns(path / "populations.csv")
        row["peak_p1"] = float(cols["p"][1])
    mtime = manifest["inputs"].get("measure.time")
    for entry in manifest.get("wigner", []):
        if mtime is not None and abs(entry["t"] - mtime) < 1e-12:
            row["negativity"] = negativity_volume(read_wigner_csv(path / entry["file"]))
    if math.isnan(row["negativity"]) and (path / "wigner_numeric.csv").exists():
        row["negativity"] = negativity_volume(read_wigner_csv(path / "wigner_numeric.csv"))
    return row


def _sweep_point(flat: dict, out_dir: str):
    try:
        run_scenario(from_flat(flat), out_dir)
        return None
    except (KerrPulseError, ValueError, ArithmeticError) as exc:
        return f"{type(exc).__name__}: {exc}"


def sweep(base: ScenarioConfig, axis: str, values, out_dir=None, workers: int = 1) -> list[dict]:
    """Run ``base`` once per value of ``axis``; write ``summary.csv`` in ``out_dir``.

    Each point writes into ``<out_dir>/<key>=<value>``. Failed points are
    recorded in the summary (NaN metrics) and ``summary.json``.
    """
    key = resolve_axis(axis)
    out = Path(out_dir if out_dir is not None else base.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    values = [float(v) for v in values]
    points = []
    for v in values:
        flat = dict(base.raw)
        flat[key] = int(v) if key in INTEGER_KEYS else v
        from_flat(flat)  # fail fast on invalid points before launching anything
        points.append((flat, str(out / f"{key}={flat[key]!r}")))
    if workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            errors = list(pool.map(_sweep_point, *zip(*points)))
    else:
        errors = [_sweep_point(*pt) for pt in points]
    rows = []
    for v, (_, d), err in zip(values, points, errors):
        if err is None:
            row = summarize_dataset(d)
        else:
            row = {"peak_p1": math.nan, "peak_fidelity": math.nan, "negativity": math.nan,
                   "truncation_ok": False}
        row = {"axis_value": v, **row, "dir": d, "error": err}
        rows.append(row)
    _write_csv(out / "summary.csv", SUMMARY_HEADER, [[r[h] for h in SUMMARY_HEADER] for r in rows])
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump({"axis": key, "points": rows}, fh, indent=2, default=_json_default)
    return rows


def _parse_values(text: str):
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values must be a comma-separated list of numbers, got {text!r}",
                          field="--values") from None


def _build_parser():
    ap = argparse.ArgumentParser(prog="kerrpulse", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, help="QSD seed (overrides qsd.seed)")
    common.add_argument("--nmax", type=int, help="Fock-space dimension (overrides model.nmax)")
    common.add_argument("--threads", type=int, help="worker threads / sweep processes")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for mode in ("evolve", "steady", "wigner", "traj"):
        sp = sub.add_parser(mode, parents=[common], help=f"run a scenario in {mode} mode")
        sp.add_argument("config")
    sp = sub.add_parser("sweep", parents=[common], help="run a scenario over a list of values")
    sp.add_argument("config", help="config file or preset name")
    sp.add_argument("--axis", required=True)
    sp.add_argument("--values", required=True)
    sp = sub.add_parser("figure", parents=[common], help="run a figure preset")
    sp.add_argument("name", choices=PRESET_NAMES)
    return ap


def _load(args, mode=None) -> ScenarioConfig:
    src = getattr(args, "config", None) or args.name
    cfg = figure_preset(src) if src in PRESET_NAMES and not Path(src).exists() else load_config(src)
    over = {}
    if mode is not None:
        over["mode"] = mode
    if args.nmax is not None:
        over["model.nmax"] = args.nmax
    if args.seed is not None:
        over["qsd.seed"] = args.seed
    if args.threads is not None and (cfg.qsd is not None or mode == "traj"):
        over["qsd.threads"] = args.threads
    if args.out is not None:
        over["output.dir"] = args.out
    elif args.command == "figure":
        over["output.dir"] = str(Path("out") / cfg.name)
    return cfg.with_overrides(**over) if over else cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "sweep":
            cfg = _load(args)
            rows = sweep(cfg, args.axis, _parse_values(args.values), cfg.output_dir,
                         workers=args.threads or 1)
            for r in rows:
                if r["error"]:
                    print(f"point {r['axis_value']:g} failed: {r['error']}", file=sys.stderr)
            print(Path(cfg.output_dir) / "summary.csv")
            if any(r["error"] for r in rows):
                return EXIT_SOLVER
            return EXIT_OK if all(r["truncation_ok"] for r in rows) else EXIT_TRUNCATION
        mode = None if args.command == "figure" else args.command
        cfg = _load(args, mode)
        result = run_scenario(cfg)
    except ConfigError as exc:
        where = f" [{exc.field}]" if exc.field else ""
        where += f" (line {exc.line})" if exc.line else ""
        print(f"config error{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, BesselRangeError, WignerConsistencyError, UndefinedParameterError) as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(result.out_dir)
    if not result.truncation_ok:
        print("warning: truncation unreliable; increase nmax", file=sys.stderr)
        return EXIT_TRUNCATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
