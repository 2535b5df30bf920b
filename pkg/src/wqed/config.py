"""Run configuration: JSON loading, defaults, validation and echo."""

from __future__ import annotations

import dataclasses
import difflib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError, ValidationError
from .lattice import ArrayParams

TASKS = (
    "h0-spectrum",
    "full-ed",
    "swt",
    "heff",
    "sweep-eta",
    "sweep-theta",
    "sweep-beta",
    "analyze",
    "labels",
)
SWEEP_GRID = {"sweep-eta": "eta_over_phi", "sweep-theta": "theta", "sweep-beta": "beta"}
DEFAULT_ETA_OVER_PHI = (0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5)
DEFAULT_Q = (0.0, 2.0, 3.0, 4.0)
PARAM_KEYS = ("n_sites", "gamma0", "omega", "phi", "eta", "spacing")


@dataclass(frozen=True)
class Thresholds:
    eig_tol: float = 1e-8
    dim_cap: int = 20_000
    subradiant_count: int | None = None  # None -> N // 2
    gamma_cut_ratio: float | None = 0.1  # decay cut in units of gamma0; None -> count rule only
    gap_factor: float = 5.0
    gap_window: int | None = 10
    gap_floor: float = 1.0
    edge_depth_fraction: float = 0.05
    edge_bw_min: float = 0.5
    edge_ipr_factor: float = 3.0
    pair_tol_ratio: float = 1e-6
    nu_max: int = 10
    label_tol: float | None = None  # None -> 2 / N
    theta_points: int = 64
    include_physical_thetas: bool = False
    beta_points: int = 200
    beta_max: float = 0.25
    alpha: float = 4.0
    box_sizes: tuple | None = None


@dataclass(frozen=True)
class ModulationSpec:
    source: str = "analytic"  # analytic | extracted | explicit
    v: complex | None = None
    beta: float | None = None
    theta: float | None = None


@dataclass(frozen=True)
class RunConfig:
    params: ArrayParams
    task: str
    grids: dict = field(default_factory=dict)
    modulation: ModulationSpec = ModulationSpec()
    thresholds: Thresholds = Thresholds()
    output_dir: str = "out"
    matrix: str | None = None
    record_timing: bool = False

    def subradiant_count(self) -> int:
        t = self.thresholds.subradiant_count
        return self.params.n_sites // 2 if t is None else t

    def gamma_cut(self) -> float | None:
        r = self.thresholds.gamma_cut_ratio
        return None if r is None else r * self.params.gamma0

    def label_tol(self) -> float:
        t = self.thresholds.label_tol
        return 2.0 / self.params.n_sites if t is None else t

    def edge_depth(self) -> int:
        return max(1, math.ceil(self.thresholds.edge_depth_fraction * self.params.n_sites))


TOP_KEYS = ("task", "params", "grids", "modulation", "thresholds", "output_dir", "matrix", "record_timing")
GRID_KEYS = ("eta_over_phi", "theta", "beta", "q")
MOD_KEYS = ("source", "v", "beta", "theta")
THRESHOLD_KEYS = tuple(f.name for f in dataclasses.fields(Thresholds))
NULLABLE = ("subradiant_count", "gamma_cut_ratio", "label_tol", "gap_window", "box_sizes")


def _reject_unknown(section: str, data: dict, allowed) -> None:
    if not isinstance(data, dict):
        raise ValidationError(section, f"expected a JSON object, got {type(data).__name__}")
    for key in data:
        if key not in allowed:
            close = difflib.get_close_matches(key, allowed, n=1, cutoff=0.5)
            hint = f" (did you mean {close[0]!r}?)" if close else ""
            name = f"{section}.{key}" if section else key
            raise ValidationError(name, f"unknown key{hint}")


def _number(name: str, value, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(name, f"expected a number, got {value!r}")
    if kind is int:
        if int(value) != value:
            raise ValidationError(name, f"expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _complex(name: str, value) -> complex:
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(_number(name, value[0]), _number(name, value[1]))
    return complex(_number(name, value))


def config_from_dict(data: dict, task: str | None = None) -> RunConfig:
    _reject_unknown("", data, TOP_KEYS)
    resolved_task = data.get("task", task)
    if task is not None and resolved_task != task:
        raise ValidationError("task", f"config says {resolved_task!r} but {task!r} was requested")
    if resolved_task not in TASKS:
        close = difflib.get_close_matches(str(resolved_task), TASKS, n=1)
        hint = f" (did you mean {close[0]!r}?)" if close else ""
        raise ValidationError("task", f"unknown task {resolved_task!r}{hint}")

    if "params" not in data:
        raise ValidationError("params", "missing")
    raw = data["params"]
    _reject_unknown("params", raw, PARAM_KEYS)
    for key in ("n_sites", "gamma0", "omega", "phi"):
        if key not in raw:
            raise ValidationError(f"params.{key}", "missing")
    params = ArrayParams(
        n_sites=_number("params.n_sites", raw["n_sites"], int),
        gamma0=_number("params.gamma0", raw["gamma0"]),
        omega=_number("params.omega", raw["omega"]),
        phi=_number("params.phi", raw["phi"]),
        eta=_number("params.eta", raw.get("eta", 0.0)),
        spacing=_number("params.spacing", raw.get("spacing", 1.0)),
    )

    grids_raw = data.get("grids", {})
    _reject_unknown("grids", grids_raw, GRID_KEYS)
    grids = {}
    for key, values in grids_raw.items():
        if not isinstance(values, list) or not values:
            raise ValidationError(f"grids.{key}", "must be a nonempty list")
        grids[key] = tuple(_number(f"grids.{key}", v) for v in values)

    mod_raw = data.get("modulation", {})
    _reject_unknown("modulation", mod_raw, MOD_KEYS)
    source = mod_raw.get("source", "analytic")
    if source not in ("analytic", "extracted", "explicit"):
        raise ValidationError("modulation.source", f"must be analytic, extracted or explicit, got {source!r}")
    mod = ModulationSpec(
        source=source,
        v=_complex("modulation.v", mod_raw["v"]) if mod_raw.get("v") is not None else None,
        beta=_number("modulation.beta", mod_raw["beta"]) if mod_raw.get("beta") is not None else None,
        theta=_number("modulation.theta", mod_raw["theta"]) if mod_raw.get("theta") is not None else None,
    )
    if source == "explicit":
        missing = [k for k in ("v", "beta", "theta") if getattr(mod, k) is None]
        if resolved_task == "sweep-beta":
            missing = [k for k in missing if k != "beta"]
        if missing:
            raise ValidationError("modulation", f"explicit modulation needs {', '.join(missing)}")
    if mod.beta is not None and not 0 < mod.beta < 1:
        raise ValidationError("modulation.beta", f"must lie in (0, 1), got {mod.beta}")

    th_raw = data.get("thresholds", {})
    _reject_unknown("thresholds", th_raw, THRESHOLD_KEYS)
    th_values = {}
    for f in dataclasses.fields(Thresholds):
        if f.name not in th_raw:
            continue
        value = th_raw[f.name]
        name = f"thresholds.{f.name}"
        if value is None:
            if f.name not in NULLABLE:
                raise ValidationError(name, "may not be null")
            th_values[f.name] = None
        elif f.name == "include_physical_thetas":
            if not isinstance(value, bool):
                raise ValidationError(name, "expected true or false")
            th_values[f.name] = value
        elif f.name == "box_sizes":
            if not isinstance(value, list) or not value:
                raise ValidationError(name, "must be a nonempty list of integers")
            th_values[f.name] = tuple(_number(name, v, int) for v in value)
        elif f.name in ("dim_cap", "subradiant_count", "gap_window", "nu_max", "theta_points", "beta_points"):
            th_values[f.name] = _number(name, value, int)
        else:
            th_values[f.name] = _number(name, value)
    thresholds = Thresholds(**th_values)
    if thresholds.gap_factor <= 1:
        raise ValidationError("thresholds.gap_factor", "must be > 1")
    for name in ("theta_points", "beta_points", "nu_max"):
        if getattr(thresholds, name) < 1:
            raise ValidationError(f"thresholds.{name}", "must be >= 1")
    if thresholds.subradiant_count is not None and thresholds.subradiant_count < 1:
        raise ValidationError("thresholds.subradiant_count", "must be >= 1")

    if resolved_task in SWEEP_GRID and SWEEP_GRID[resolved_task] in grids and not grids[SWEEP_GRID[resolved_task]]:
        raise ValidationError(f"grids.{SWEEP_GRID[resolved_task]}", "must be nonempty")
    for b in grids.get("beta", ()):
        if not 0 < b < 1:
            raise ValidationError("grids.beta", f"values must lie in (0, 1), got {b}")

    out = data.get("output_dir", "out")
    if not isinstance(out, str):
        raise ValidationError("output_dir", "expected a string")
    matrix = data.get("matrix")
    if matrix is not None and not isinstance(matrix, str):
        raise ValidationError("matrix", "expected a path string")
    timing = data.get("record_timing", False)
    if not isinstance(timing, bool):
        raise ValidationError("record_timing", "expected true or false")
    return RunConfig(params, resolved_task, grids, mod, thresholds, out, matrix, timing)


def load_config(path, task: str | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError("config", f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(str(path), exc.lineno, exc.colno, exc.msg) from None
    if not isinstance(data, dict):
        raise ParseError(str(path), 1, 1, "top level must be a JSON object")
    return config_from_dict(data, task)


def config_to_dict(cfg: RunConfig) -> dict:
    """Fully resolved config as plain JSON data; ``config_from_dict`` inverts it."""
    mod = cfg.modulation
    th = dataclasses.asdict(cfg.thresholds)
    if th["box_sizes"] is not None:
        th["box_sizes"] = list(th["box_sizes"])
    return {
        "task": cfg.task,
        "params": cfg.params.as_dict(),
        "grids": {k: list(v) for k, v in sorted(cfg.grids.items())},
        "modulation": {
            "source": mod.source,
            "v": None if mod.v is None else [mod.v.real, mod.v.imag],
            "beta": mod.beta,
            "theta": mod.theta,
        },
        "thresholds": th,
        "output_dir": cfg.output_dir,
        "matrix": cfg.matrix,
        "record_timing": cfg.record_timing,
    }
