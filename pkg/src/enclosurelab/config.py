"""Experiment configuration: TOML ingestion, validation, and the manifest
echo that makes runs reproducible from their own output.

The format is TOML with four blocks (scene, grid, probe, run) plus an
optional ladder block; see configs/disk_demo.toml for a fully annotated
example.  Validation collects every violated field instead of stopping at
the first, and the manifest writer emits a config that parses back to the
identical experiment.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # python 3.10
    import tomli as tomllib

from .geometry import CoefficientSpec, ConvexPolygon, Disk, RectShape, Scene
from .probe import DEFAULT_H_GRID

__all__ = ["ConfigError", "LadderConfig", "ExperimentConfig", "load_config",
           "config_from_dict", "dump_toml", "WORKERS_ENV_VAR"]

WORKERS_ENV_VAR = "ENCLOSURELAB_WORKERS"


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class LadderConfig:
    enabled: bool = False
    m_values: tuple[int, ...] = (2, 3)
    amplitudes: tuple[float, ...] = (1.0, 0.5, 0.25, 0.125)
    h: float = 4.0
    t: float = 0.5
    theta: float = 0.0
    J: float = 5.5


@dataclass(frozen=True)
class ExperimentConfig:
    scene: Scene
    grid_n: int = 129
    oracle_n: int = 1025
    j_policy: float | str = "auto"
    h_values: tuple[float, ...] = DEFAULT_H_GRID
    directions: int = 16
    method: str = "slope"
    eps_t: float = 0.01
    bisect_tol: float = 0.02
    out_dir: str = "out"
    workers: int = 1
    pipelines: str = "both"
    deterministic: bool = True
    ladder: LadderConfig = field(default_factory=LadderConfig)

    def effective_workers(self) -> int:
        env = os.environ.get(WORKERS_ENV_VAR)
        if env:
            return max(1, int(env))
        return max(1, self.workers)


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([f"TOML parse error: {exc}"]) from exc
    return config_from_dict(data)


def config_from_dict(data: dict) -> ExperimentConfig:
    errors: list[str] = []
    scene = _parse_scene(data.get("scene", {}), errors)
    grid = data.get("grid", {})
    probe = data.get("probe", {})
    run = data.get("run", {})

    grid_n = _get(grid, "n", int, 129, errors, "grid.n")
    if isinstance(grid_n, int) and (grid_n < 9 or grid_n % 2 == 0):
        errors.append(f"grid.n: must be odd and >= 9 for the solver, got {grid_n}")
    oracle_n = _get(grid, "oracle_n", int, 1025, errors, "grid.oracle_n")
    if isinstance(oracle_n, int) and oracle_n < 257:
        errors.append(f"grid.oracle_n: must be >= 257, got {oracle_n}")

    j_policy = probe.get("J", "auto")
    if j_policy != "auto":
        if not isinstance(j_policy, (int, float)) or isinstance(j_policy, bool) or j_policy <= 0:
            errors.append(f"probe.J: must be 'auto' or a positive number, got {j_policy!r}")
        else:
            j_policy = float(j_policy)

    h_values = probe.get("h", "auto")
    if h_values == "auto":
        h_values = DEFAULT_H_GRID
    elif (isinstance(h_values, list) and len(h_values) >= 3
          and all(isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0
                  for v in h_values)):
        h_values = tuple(float(v) for v in h_values)
    else:
        errors.append(f"probe.h: must be 'auto' or a list of >= 3 positive numbers, got {h_values!r}")
        h_values = DEFAULT_H_GRID

    directions = _get(probe, "directions", int, 16, errors, "probe.directions")
    if isinstance(directions, int) and directions < 8:
        errors.append(f"probe.directions: must be >= 8, got {directions}")
    method = probe.get("method", "slope")
    if method not in ("slope", "bisect"):
        errors.append(f"probe.method: must be 'slope' or 'bisect', got {method!r}")
    eps_t = _get(probe, "eps_t", float, 0.01, errors, "probe.eps_t")
    if isinstance(eps_t, float) and eps_t <= 0:
        errors.append(f"probe.eps_t: must be positive, got {eps_t}")
    bisect_tol = _get(probe, "bisect_tol", float, 0.02, errors, "probe.bisect_tol")
    if isinstance(bisect_tol, float) and bisect_tol <= 0:
        errors.append(f"probe.bisect_tol: must be positive, got {bisect_tol}")

    out_dir = run.get("out_dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        errors.append(f"run.out_dir: must be a non-empty string, got {out_dir!r}")
    workers = _get(run, "workers", int, 1, errors, "run.workers")
    if isinstance(workers, int) and workers < 1:
        errors.append(f"run.workers: must be >= 1, got {workers}")
    pipelines = run.get("pipelines", "both")
    if pipelines not in ("solver", "oracle", "both"):
        errors.append(f"run.pipelines: must be 'solver', 'oracle' or 'both', got {pipelines!r}")
    deterministic = run.get("deterministic", True)
    if not isinstance(deterministic, bool):
        errors.append(f"run.deterministic: must be a boolean, got {deterministic!r}")

    ladder = _parse_ladder(data.get("ladder", {}), errors)

    if errors or scene is None:
        raise ConfigError(errors or ["scene: missing"])
    return ExperimentConfig(scene, grid_n, oracle_n, j_policy, h_values,
                            directions, method, eps_t, bisect_tol,
                            out_dir, workers, pipelines, deterministic, ladder)


def _get(block, key, kind, default, errors, name):
    val = block.get(key, default)
    if kind is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, kind) or isinstance(val, bool):
        errors.append(f"{name}: expected {kind.__name__}, got {val!r}")
        return default
    return val


def _parse_scene(block, errors) -> Scene | None:
    rect = block.get("rect", [0.0, 1.0, 0.0, 1.0])
    if not (isinstance(rect, list) and len(rect) == 4
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in rect)):
        errors.append(f"scene.rect: must be [x0, x1, y0, y1], got {rect!r}")
        rect = [0.0, 1.0, 0.0, 1.0]
    m = block.get("m", 2)
    if not isinstance(m, int) or isinstance(m, bool) or m < 2:
        errors.append(f"scene.m: m must be >= 2 (integer), got {m!r}")
        m = 2
    mu = block.get("mu", 0.5)
    if not isinstance(mu, (int, float)) or isinstance(mu, bool) or mu <= 0:
        errors.append(f"scene.mu: must be a positive number, got {mu!r}")
        mu = 0.5

    q0_block = block.get("q0", {"kind": "constant", "value": 0.0})
    try:
        q0 = CoefficientSpec(
            kind=q0_block.get("kind", "constant"),
            value=float(q0_block.get("value", 0.0)),
            center=tuple(q0_block.get("center", (0.5, 0.5))),
            width=float(q0_block.get("width", 0.1)),
            height=float(q0_block.get("height", 0.0)))
    except (ValueError, TypeError) as exc:
        errors.append(f"scene.q0: {exc}")
        q0 = CoefficientSpec()

    shapes: list = []
    qd_values: list[float] = []
    for idx, inc in enumerate(block.get("inclusions", [])):
        name = f"scene.inclusions[{idx}]"
        kind = inc.get("shape")
        qd = inc.get("qd")
        if not isinstance(qd, (int, float)) or isinstance(qd, bool):
            errors.append(f"{name}.qd: must be a number, got {qd!r}")
            continue
        try:
            if kind == "disk":
                shapes.append(Disk(tuple(float(v) for v in inc["center"]), float(inc["radius"])))
            elif kind == "rect":
                shapes.append(RectShape(tuple(float(v) for v in inc["bounds"])))
            elif kind == "polygon":
                shapes.append(ConvexPolygon(tuple(tuple(float(c) for c in v)
                                                  for v in inc["vertices"])))
            else:
                errors.append(f"{name}.shape: must be 'disk', 'rect' or 'polygon', got {kind!r}")
                continue
        except (KeyError, ValueError, TypeError) as exc:
            errors.append(f"{name}: {exc}")
            continue
        qd_values.append(float(qd))

    try:
        return Scene(tuple(float(v) for v in rect), q0, tuple(shapes),
                     tuple(qd_values), m, float(mu))
    except ValueError as exc:
        errors.append(f"scene: {exc}")
        return None


def _parse_ladder(block, errors) -> LadderConfig:
    if not block:
        return LadderConfig()
    try:
        cfg = LadderConfig(
            enabled=bool(block.get("enabled", False)),
            m_values=tuple(int(v) for v in block.get("m_values", (2, 3))),
            amplitudes=tuple(float(v) for v in block.get("amplitudes", (1.0, 0.5, 0.25, 0.125))),
            h=float(block.get("h", 4.0)),
            t=float(block.get("t", 0.5)),
            theta=float(block.get("theta", 0.0)),
            J=float(block.get("J", 5.5)))
    except (ValueError, TypeError) as exc:
        errors.append(f"ladder: {exc}")
        return LadderConfig()
    if any(m < 2 for m in cfg.m_values):
        errors.append("ladder.m_values: every m must be >= 2")
    if any(a <= 0 for a in cfg.amplitudes) or len(cfg.amplitudes) < 3:
        errors.append("ladder.amplitudes: need >= 3 positive values")
    if cfg.h <= 0:
        errors.append("ladder.h: must be positive")
    return cfg


# ---------------------------------------------------------------------------
# config echo (manifest)
# ---------------------------------------------------------------------------

def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Round-trippable dict form of the experiment (the manifest's config echo)."""
    scene = cfg.scene
    inclusions = []
    for shape, qd in zip(scene.inclusions, scene.qd_values):
        if isinstance(shape, Disk):
            inclusions.append({"shape": "disk", "center": list(shape.center),
                               "radius": shape.radius, "qd": qd})
        elif isinstance(shape, RectShape):
            inclusions.append({"shape": "rect", "bounds": list(shape.bounds), "qd": qd})
        else:
            inclusions.append({"shape": "polygon",
                               "vertices": [list(v) for v in shape.vertices], "qd": qd})
    q0 = {"kind": scene.q0.kind, "value": scene.q0.value}
    if scene.q0.kind == "gaussian":
        q0 = {"kind": "gaussian", "center": list(scene.q0.center),
              "width": scene.q0.width, "height": scene.q0.height}
    data = {
        "scene": {"rect": list(scene.rect), "m": scene.m, "mu": scene.mu,
                  "q0": q0, "inclusions": inclusions},
        "grid": {"n": cfg.grid_n, "oracle_n": cfg.oracle_n},
        "probe": {"J": cfg.j_policy, "h": list(cfg.h_values),
                  "directions": cfg.directions, "method": cfg.method,
                  "eps_t": cfg.eps_t, "bisect_tol": cfg.bisect_tol},
        "run": {"out_dir": cfg.out_dir, "workers": cfg.workers,
                "pipelines": cfg.pipelines, "deterministic": cfg.deterministic},
    }
    if cfg.ladder.enabled:
        data["ladder"] = {"enabled": True, "m_values": list(cfg.ladder.m_values),
                          "amplitudes": list(cfg.ladder.amplitudes), "h": cfg.ladder.h,
                          "t": cfg.ladder.t, "theta": cfg.ladder.theta, "J": cfg.ladder.J}
    return data


def dump_toml(data: dict) -> str:
    """Minimal deterministic TOML emitter for the manifest (scalars, lists,
    nested tables, and arrays of tables; exactly what the config schema uses)."""
    lines: list[str] = []
    _emit_table(data, [], lines)
    return "\n".join(lines) + "\n"


def _emit_table(table: dict, path: list[str], lines: list[str]) -> None:
    scalars = {k: v for k, v in table.items() if not isinstance(v, (dict, list))
               or (isinstance(v, list) and not _is_array_of_tables(v))}
    subtables = {k: v for k, v in table.items() if isinstance(v, dict)}
    table_arrays = {k: v for k, v in table.items()
                    if isinstance(v, list) and _is_array_of_tables(v)}
    if path and (scalars or not (subtables or table_arrays)):
        lines.append(f"[{'.'.join(path)}]")
    for key, val in scalars.items():
        lines.append(f"{key} = {_format_value(val)}")
    if scalars and path:
        lines.append("")
    for key, sub in subtables.items():
        _emit_table(sub, path + [key], lines)
    for key, arr in table_arrays.items():
        for item in arr:
            lines.append(f"[[{'.'.join(path + [key])}]]")
            for k2, v2 in item.items():
                lines.append(f"{k2} = {_format_value(v2)}")
            lines.append("")


def _is_array_of_tables(val: list) -> bool:
    return bool(val) and all(isinstance(item, dict) for item in val)


def _format_value(val) -> str:
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, int):
        return str(val)
    if isinstance(val, float):
        if not math.isfinite(val):
            raise ValueError(f"cannot serialize non-finite float {val}")
        return repr(val)
    if isinstance(val, str):
        return '"' + val.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(val, list):
        return "[" + ", ".join(_format_value(v) for v in val) + "]"
    raise TypeError(f"cannot serialize {type(val).__name__} to TOML")
