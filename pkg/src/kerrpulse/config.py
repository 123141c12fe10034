"""Scenario configuration: flat dotted-key TOML documents and figure presets.

A document looks like::

    name = "fig3"
    model.delta = -15
    model.chi = 15
    model.omega_re = 6
    drive.kind = "pulses"
    drive.tau = 5.5
    drive.width = 0.4
    run.t_end = 23

Every key is validated; unknown keys are rejected by name.
"""
from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .evolve import IntegratorConfig
from .hilbert import ket_from_amplitudes
from .model import ModelParams, PulseTrain
from .qsd import QsdConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MODES = ("evolve", "steady", "wigner", "traj")

# key -> (type, default); ``None`` default means optional/absent
_SCHEMA: dict[str, tuple[type, object]] = {
    "name": (str, "scenario"),
    "mode": (str, "evolve"),
    "model.delta": (float, None),
    "model.chi": (float, None),
    "model.omega_re": (float, 0.0),
    "model.omega_im": (float, 0.0),
    "model.gamma": (float, 1.0),
    "model.nbath": (float, 0.0),
    "model.nmax": (int, 30),
    "drive.kind": (str, "cw"),
    "drive.t0": (float, None),
    "drive.tau": (float, None),
    "drive.width": (float, None),
    "drive.count": (int, None),
    "run.t_end": (float, 10.0),
    "run.sample_dt": (float, 0.01),
    "integrator.rel_tol": (float, 1e-8),
    "integrator.abs_tol": (float, 1e-10),
    "integrator.dt_init": (float, 1e-3),
    "integrator.dt_max": (float, 0.1),
    "integrator.check_positivity": (bool, True),
    "qsd.dt": (float, 1e-3),
    "qsd.n_traj": (int, 100),
    "qsd.seed": (int, 0),
    "qsd.sample_dt": (float, 0.05),
    "qsd.threads": (int, 1),
    "wigner.extent": (float, 4.0),
    "wigner.points": (int, 201),
    "wigner.times": (list, None),
    "wigner.analytic": (bool, True),
    "target.amplitudes": (list, None),
    "measure.times": (list, None),
    "measure.time": (float, None),
    "output.dir": (str, "out"),
    "output.wigner": (bool, True),
}

NUMERIC_KEYS = tuple(k for k, (kind, _) in _SCHEMA.items() if kind in (float, int))
INTEGER_KEYS = tuple(k for k, (kind, _) in _SCHEMA.items() if kind is int)


@dataclass(frozen=True)
class WignerSpec:
    extent: float = 4.0
    points: int = 201
    times: tuple[float, ...] = ()
    analytic: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    mode: str
    model: ModelParams
    t_end: float
    sample_dt: float
    integrator: IntegratorConfig
    qsd: QsdConfig | None
    wigner: WignerSpec
    target: np.ndarray | None
    measure_times: tuple[float, ...]
    measure_time: float | None
    output_dir: str
    write_wigner: bool
    raw: dict = field(default_factory=dict, compare=False)

    def with_overrides(self, **flat) -> "ScenarioConfig":
        """New config with dotted keys replaced (re-validated)."""
        merged = dict(self.raw)
        merged.update(flat)
        return from_flat(merged)


def _flatten(tree, prefix=""):
    out = {}
    for key, value in tree.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, path + "."))
        else:
            out[path] = value
    return out


def _coerce(key, value, kind):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number, got {value!r}", field=key)
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{key} must be finite", field=key)
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"{key} must be an integer, got {value!r}", field=key)
        return int(value)
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false, got {value!r}", field=key)
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string, got {value!r}", field=key)
        return value
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{key} must be a list, got {value!r}", field=key)
    return list(value)


def _complex_amplitude(key, item):
    if isinstance(item, str):
        try:
            return complex(item.replace(" ", "").replace("i", "j"))
        except ValueError:
            raise ConfigError(f"{key}: cannot read {item!r} as a complex number", field=key) from None
    if isinstance(item, (list, tuple)) and len(item) == 2:
        return complex(float(item[0]), float(item[1]))
    if isinstance(item, (int, float)) and not isinstance(item, bool):
        return complex(item)
    raise ConfigError(f"{key}: amplitude {item!r} is not a number, [re, im] pair or string", field=key)


def _time_list(key, values):
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{key} entries must be numbers, got {v!r}", field=key)
        out.append(float(v))
    return tuple(out)


def _guard(key, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{key}: {exc}", field=key) from None


def from_flat(flat: dict) -> ScenarioConfig:
    """Validate a flat ``{dotted.key: value}`` mapping into a ScenarioConfig."""
    values = {}
    for key, value in flat.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown configuration key {key!r}", field=key)
        if value is None:
            continue
        values[key] = _coerce(key, value, _SCHEMA[key][0])
    for key, (_, default) in _SCHEMA.items():
        if key not in values and default is not None:
            values[key] = default
    for key in ("model.delta", "model.chi"):
        if key not in values:
            raise ConfigError(f"missing required key {key!r}", field=key)

    mode = values["mode"]
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}, got {mode!r}", field="mode")

    kind = values["drive.kind"]
    if kind == "cw":
        drive = PulseTrain.continuous_wave()
    elif kind == "pulses":
        width = values.get("drive.width")
        if width is None or not width > 0:
            raise ConfigError("drive.width must be a positive pulse width", field="drive.width")
        count = values.get("drive.count", 1)
        tau = values.get("drive.tau", 1.0 if count == 1 else None)
        if tau is None:
            raise ConfigError("drive.tau is required for a pulse train", field="drive.tau")
        if count > 1 and not tau > 0:
            raise ConfigError("drive.tau must be positive", field="drive.tau")
        if count < 1:
            raise ConfigError("drive.count must be >= 1", field="drive.count")
        drive = _guard("drive", PulseTrain, width=width, tau=tau, count=count, t0=values.get("drive.t0"))
    else:
        raise ConfigError(f"drive.kind must be 'cw' or 'pulses', got {kind!r}", field="drive.kind")

    if values["model.nmax"] < 2:
        raise ConfigError("model.nmax must be >= 2", field="model.nmax")
    if values["model.gamma"] < 0:
        raise ConfigError("model.gamma must be non-negative", field="model.gamma")
    if values["model.nbath"] < 0:
        raise ConfigError("model.nbath must be non-negative", field="model.nbath")
    model = ModelParams(
        delta=values["model.delta"],
        chi=values["model.chi"],
        omega=complex(values["model.omega_re"], values["model.omega_im"]),
        gamma=values["model.gamma"],
        nbath=values["model.nbath"],
        drive=drive,
        nmax=values["model.nmax"],
    )

    t_end = values["run.t_end"]
    if not t_end > 0:
        raise ConfigError("run.t_end must be positive", field="run.t_end")
    if not values["run.sample_dt"] > 0:
        raise ConfigError("run.sample_dt must be positive", field="run.sample_dt")
    integrator = _guard(
        "integrator", IntegratorConfig,
        rel_tol=values["integrator.rel_tol"], abs_tol=values["integrator.abs_tol"],
        dt_init=values["integrator.dt_init"], dt_max=values["integrator.dt_max"],
        sample_dt=values["run.sample_dt"], check_positivity=values["integrator.check_positivity"],
    )
    qsd = None
    if mode == "traj" or any(k.startswith("qsd.") for k in flat):
        qsd = _guard(
            "qsd", QsdConfig, dt=values["qsd.dt"], n_traj=values["qsd.n_traj"],
            seed=values["qsd.seed"], sample_dt=values["qsd.sample_dt"], threads=values["qsd.threads"],
        )

    wtimes = _time_list("wigner.times", values.get("wigner.times", []))
    for t in wtimes:
        if t < 0 or t > t_end:
            raise ConfigError(f"wigner time {t} outside [0, run.t_end]", field="wigner.times")
    if values["wigner.points"] < 2 or values["wigner.extent"] <= 0:
        raise ConfigError("wigner grid needs points >= 2 and a positive extent", field="wigner.points")
    wigner = WignerSpec(values["wigner.extent"], values["wigner.points"], wtimes, values["wigner.analytic"])

    target = None
    if "target.amplitudes" in values:
        amps = [_complex_amplitude("target.amplitudes", a) for a in values["target.amplitudes"]]
        target = _guard("target.amplitudes", ket_from_amplitudes, amps, model.nmax)

    mtimes = _time_list("measure.times", values.get("measure.times", []))
    mtime = values.get("measure.time")
    for t in mtimes + ((mtime,) if mtime is not None else ()):
        if t < 0 or t > t_end:
            raise ConfigError(f"measurement time {t} outside [0, run.t_end]", field="measure.times")

    raw = {k: v for k, v in flat.items() if v is not None}
    return ScenarioConfig(
        name=values["name"], mode=mode, model=model, t_end=t_end, sample_dt=values["run.sample_dt"],
        integrator=integrator, qsd=qsd, wigner=wigner, target=target, measure_times=mtimes,
        measure_time=mtime, output_dir=values["output.dir"], write_wigner=values["output.wigner"],
        raw=raw,
    )


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a configuration document."""
    try:
        tree = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"parse error: {exc}", line=int(m.group(1)) if m else None) from None
    return from_flat(_flatten(tree))


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(cfg: ScenarioConfig) -> str:
    """Render the flat key set back into a document ``parse_config`` accepts."""
    lines = []
    for key in sorted(cfg.raw):
        lines.append(f"{key} = {_toml_value(cfg.raw[key])}")
    return "\n".join(lines) + "\n"


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return str(v)


def resolve_axis(axis: str) -> str:
    """Map a sweep axis (dotted key or unique leaf name) to its dotted key."""
    if axis in _SCHEMA:
        key = axis
    else:
        aliases = {"omega": "model.omega_re"}
        if axis in aliases:
            key = aliases[axis]
        else:
            hits = [k for k in _SCHEMA if k.rsplit(".", 1)[-1] == axis]
            if len(hits) != 1:
                raise ConfigError(f"sweep axis {axis!r} does not name a unique config field", field=axis)
            key = hits[0]
    if key not in NUMERIC_KEYS:
        raise ConfigError(f"sweep axis {axis!r} is not numeric", field=axis)
    return key


# Pulse centers sit at k * tau (t0 = tau) so measurement times k tau - c T
# fall on the rising edge of pulse k.

def _pulse_count(t0, tau, width, t_end):
    return int(math.floor((t_end + 4 * width - t0) / tau)) + 1


def _fig1b():
    return {
        "name": "fig1b", "mode": "evolve",
        "model.delta": -11.0, "model.chi": 15.0, "model.omega_re": 7.0, "model.nmax": 50,
        "drive.kind": "cw", "run.t_end": 5.0, "run.sample_dt": 0.005,
    }


def _fig2():
    return {
        "name": "fig2", "mode": "steady",
        "model.delta": -11.0, "model.chi": 15.0, "model.omega_re": 7.0, "model.nmax": 50,
        "drive.kind": "cw", "run.t_end": 50.0, "wigner.analytic": True,
    }


def _fig3(name="fig3", mode="evolve"):
    tau, width, t_end = 5.5, 0.4, 23.0
    ks = (1, 2, 3, 4)
    return {
        "name": name, "mode": mode,
        "model.delta": -15.0, "model.chi": 15.0, "model.omega_re": 6.0, "model.nmax": 50,
        "drive.kind": "pulses", "drive.tau": tau, "drive.width": width, "drive.t0": tau,
        "drive.count": _pulse_count(tau, tau, width, t_end),
        "run.t_end": t_end, "run.sample_dt": 0.01,
        "measure.times": [k * tau - 0.25 * width for k in ks],
        "measure.time": 3 * tau - 0.25 * width,
        "wigner.times": [3 * tau - 0.5 * width, 3 * tau - 0.4 * width, 3 * tau - 0.25 * width],
    }


def _fig5(name="fig5", mode="evolve"):
    tau, width, t_end = 2.2, 0.7, 12.0
    ks = (1, 2, 3, 4, 5)
    r = 1 / math.sqrt(2)
    cfg = {
        "name": name, "mode": mode,
        "model.delta": -11.0, "model.chi": 15.0, "model.omega_re": 7.0, "model.nmax": 50,
        "drive.kind": "pulses", "drive.tau": tau, "drive.width": width, "drive.t0": tau,
        "drive.count": _pulse_count(tau, tau, width, t_end),
        "run.t_end": t_end, "run.sample_dt": 0.01,
        "target.amplitudes": [r, -r],
        "measure.times": [k * tau - 0.5 * width for k in ks],
        "measure.time": 5 * tau - 0.4 * width,
        "wigner.times": [5 * tau - 0.4 * width],
    }
    return cfg


def _fig6():
    cfg = _fig5("fig6", "wigner")
    tau, width = cfg["drive.tau"], cfg["drive.width"]
    cfg["wigner.times"] = [5 * tau - 1.4 * width, 5 * tau - 0.9 * width, 5 * tau - 0.4 * width]
    return cfg


_PRESETS = {
    "fig1b": _fig1b,
    "fig2": _fig2,
    "fig3": _fig3,
    "fig4": lambda: _fig3("fig4", "wigner"),
    "fig5": _fig5,
    "fig6": _fig6,
}
PRESET_NAMES = tuple(_PRESETS)


def figure_preset(name: str) -> ScenarioConfig:
    if name not in _PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}", field="name")
    return from_flat(_PRESETS[name]())
