"""Experiment runner: probe-sweep orchestration, flat-file artifacts, the
reproducibility manifest, and the pipeline comparison report.

Artifacts written into the run directory:

    indicator.txt   one row per evaluated probe
    support.txt     one row per direction
    hull.txt        reconstructed polygon, "x y" per vertex, counterclockwise
    manifest.toml   config echo (feed it back as a config to reproduce) + meta
    ladder.txt      only when the amplitude-ladder sub-run is enabled

Numeric table content is byte-identical across repeated runs and worker
counts: tasks are pure functions of their inputs, results are gathered in
task order, and floats are printed with shortest round-trip formatting.
"""
from __future__ import annotations

import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, config_from_dict, config_to_dict, dump_toml, load_config
from .field import ComplexField, build_grid, sample_field
from .geometry import HullPolygon, Scene, hull_from_halfplanes, support_interval
from .indicator import IndicatorSampler, indicator_E, indicator_E_tilde
from .pde import solve_poisson, solve_semilinear_residual
from .probe import (AUTO_J_MARGIN, ProbeParams, calderon_evaluator,
                    min_admissible_J, underflow_guard)
from .reconstruct import default_dead_band, fit_log_rate

log = logging.getLogger("enclosurelab")

INDICATOR_HEADER = ("dir_index theta t h J m reE imE reEt imEt reEo imEo "
                    "logI newton_iters")
SUPPORT_HEADER = "dir_index theta t_hat slope fit_residual verdict"
LADDER_HEADER = ("m amplitude norm_u_minus_v norm_u_minus_ut absE absEt "
                 "absEdiff newton_iters")


@dataclass
class RunResult:
    out_dir: Path
    exit_code: int
    hull: HullPolygon
    n_directions: int
    n_failed: int
    wall_time_s: float


# ---------------------------------------------------------------------------
# worker side
# ---------------------------------------------------------------------------

_WORKER_CTX: dict = {}


def _worker_init(scene: Scene, grid_n: int, oracle_n: int, pipeline: str):
    grid = build_grid(scene.rect, grid_n) if pipeline != "oracle" else None
    _WORKER_CTX["sampler"] = IndicatorSampler(scene, grid, pipeline, oracle_n)


def _probe_task(task):
    """One (direction, t, h) probe -> an indicator table row (or an error)."""
    dir_index, theta, omega, t, h, j = task
    sampler: IndicatorSampler = _WORKER_CTX["sampler"]
    probe = ProbeParams(tuple(omega), t, h, j, sampler.scene.m)
    try:
        sm = sampler.sample(probe)
    except Exception as exc:  # Newton divergence, rejection race, solver fault
        return ("err", dir_index, f"t={t!r} h={h!r}: {exc}")
    return ("ok", _sample_row(dir_index, theta, t, h, j, sampler.scene.m, sm))


def _sample_row(dir_index, theta, t, h, j, m, sm):
    return (dir_index, theta, t, h, j, m,
            _re(sm.E), _im(sm.E), _re(sm.E_tilde), _im(sm.E_tilde),
            _re(sm.E_oracle), _im(sm.E_oracle), sm.log_I,
            sm.newton.iterations if sm.newton else 0)


def _bisect_direction_task(task):
    """Whole-direction bisection: solver calls run sequentially inside the
    task, directions parallelize across tasks.  Returns the support estimate
    fields together with every indicator row the search evaluated."""
    from .reconstruct import (BISECT_EDGE_MARGIN, ReconstructionError,
                              bisect_support, classify_halfspace)

    dir_index, theta, omega, b, bb, j, h_values, dead_band, tol_t = task
    base: IndicatorSampler = _WORKER_CTX["sampler"]
    sampler = IndicatorSampler(base.scene, base.grid, base.pipeline,
                               base.quad_n, J=j)
    rows = []

    def classify(t):
        decision = classify_halfspace(sampler, omega, t, h_values, dead_band)
        rows.extend(_sample_row(dir_index, theta, t, sm.probe.h, j,
                                sampler.scene.m, sm)
                    for sm in decision.samples)
        return decision

    margin = BISECT_EDGE_MARGIN * (bb - b)
    try:
        t_hat, warnings = bisect_support(omega, (b + margin, bb - margin),
                                         classify, tol_t)
    except ReconstructionError as exc:
        return ("err", dir_index, str(exc), rows)
    for w in warnings:
        log.warning("direction %d bisection: %s", dir_index, w)
    return ("ok", dir_index,
            (dir_index, theta, omega, t_hat, math.nan, math.nan, "hit"), rows)


def _re(z):
    return float(z.real) if z is not None else math.nan


def _im(z):
    return float(z.imag) if z is not None else math.nan


# ---------------------------------------------------------------------------
# sweep driver
# ---------------------------------------------------------------------------

def _direction_frame(cfg: ExperimentConfig):
    """Per-direction (theta, omega, b, B, J, t_center) tuples.

    "auto" J resolves to one gauge for the whole run: 1.1x the strict bound
    maximized over all requested directions, so every probe of the run shares
    it and none violates the admissibility rule.
    """
    geom = []
    for k in range(cfg.directions):
        theta = 2.0 * math.pi * k / cfg.directions
        omega = (math.cos(theta), math.sin(theta))
        b, bb = support_interval(cfg.scene, omega)
        geom.append((theta, omega, b, bb))
    if cfg.j_policy == "auto":
        j = AUTO_J_MARGIN * max(min_admissible_J(cfg.scene.m, b, bb)
                                for (_, _, b, bb) in geom)
    else:
        j = float(cfg.j_policy)
    return [(theta, omega, b, bb, j, 0.5 * (b + bb))
            for (theta, omega, b, bb) in geom]


def run_experiment(config, out_dir=None) -> RunResult:
    """Execute a full experiment from a config path, dict, or ExperimentConfig.

    Solver failures mark the affected directions and the run continues; any
    failed direction turns the exit code to 3.  Artifacts are always written,
    partial results included.
    """
    t_start = time.perf_counter()
    if isinstance(config, (str, Path)):
        cfg = load_config(config)
    elif isinstance(config, dict):
        cfg = config_from_dict(config)
    else:
        cfg = config
    out = Path(out_dir) if out_dir is not None else Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    scene = cfg.scene
    frame = _direction_frame(cfg)
    n_workers = cfg.effective_workers()

    if cfg.method == "bisect":
        rows, estimates, failures, dropped = _run_bisect_sweep(cfg, frame, n_workers)
        halfplanes = [(e[2], e[3]) for e in estimates if e[3] is not None]
        hull = (hull_from_halfplanes(halfplanes, scene.rect)
                if len(halfplanes) >= 3 else HullPolygon())
    else:
        require_j = cfg.pipelines != "oracle"
        tasks = []
        dropped = []
        for k, (theta, omega, b, bb, j, t_center) in enumerate(frame):
            for h in cfg.h_values:
                probe = ProbeParams(omega, t_center, h, j, scene.m)
                guard = underflow_guard(probe, scene, require_j_rule=require_j)
                if guard:
                    tasks.append((k, theta, omega, t_center, h, j))
                else:
                    dropped.append(f"dir={k} t={t_center!r} h={h!r}: {guard.reason}")
                    log.warning("dropped probe dir=%d h=%g: %s", k, h, guard.reason)

        outcomes = _execute(tasks, scene, cfg, n_workers, _probe_task)
        rows = []
        failures = {}
        for outcome in outcomes:
            if outcome[0] == "ok":
                rows.append(outcome[1])
            else:
                failures.setdefault(outcome[1], []).append(outcome[2])
                log.error("direction %d probe failed: %s", outcome[1], outcome[2])
        estimates, hull = _assemble(cfg, frame, rows, failures)
    _write_indicator_table(out / "indicator.txt", rows)
    _write_support_table(out / "support.txt", estimates)
    _write_hull(out / "hull.txt", hull)

    if cfg.ladder.enabled:
        _write_ladder_table(out / "ladder.txt", _run_ladder(cfg))

    wall = time.perf_counter() - t_start
    meta = {
        "tool_version": __version__,
        "python_version": sys.version.split()[0],
        "numpy_version": np.__version__,
        "workers_used": n_workers,
        "wall_time_s": wall,
        "dropped_probes": dropped,
        "resolved_J": [f[4] for f in frame],
        "failed_directions": sorted(failures),
        "hull_empty": hull.is_empty,
    }
    manifest = config_to_dict(cfg)
    manifest["meta"] = meta
    (out / "manifest.toml").write_text(dump_toml(manifest), encoding="ascii")

    exit_code = 3 if failures else 0
    n_failed = len(failures)
    log.info("run complete: %d directions (%d failed), hull %s, %.1fs",
             cfg.directions, n_failed, "EMPTY" if hull.is_empty else
             f"{len(hull.vertices)} vertices", wall)
    return RunResult(out, exit_code, hull, cfg.directions, n_failed, wall)


def _execute(tasks, scene, cfg, n_workers, task_fn):
    if n_workers <= 1 or len(tasks) <= 1:
        _worker_init(scene, cfg.grid_n, cfg.oracle_n, cfg.pipelines)
        return [task_fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=n_workers, initializer=_worker_init,
                             initargs=(scene, cfg.grid_n, cfg.oracle_n,
                                       cfg.pipelines)) as pool:
        return list(pool.map(task_fn, tasks, chunksize=4))


def _run_bisect_sweep(cfg, frame, n_workers):
    """Dispatch one bisection task per direction; solver calls run
    sequentially inside each task."""
    dead_band = default_dead_band(cfg.scene.m, cfg.eps_t)
    tasks = [(k, theta, omega, b, bb, j, tuple(cfg.h_values), dead_band,
              cfg.bisect_tol)
             for k, (theta, omega, b, bb, j, _t) in enumerate(frame)]
    outcomes = _execute(tasks, cfg.scene, cfg, n_workers, _bisect_direction_task)
    rows = []
    failures: dict[int, list[str]] = {}
    est_by_dir = {}
    for outcome in outcomes:
        rows.extend(outcome[3])
        if outcome[0] == "ok":
            est_by_dir[outcome[1]] = outcome[2]
        else:
            failures.setdefault(outcome[1], []).append(outcome[2])
            log.error("direction %d bisection failed: %s", outcome[1], outcome[2])
    estimates = []
    for k, (theta, omega, b, bb, j, _t) in enumerate(frame):
        estimates.append(est_by_dir.get(
            k, (k, theta, omega, None, math.nan, math.nan, "failed")))
    return rows, estimates, failures, []


def _assemble(cfg, frame, rows, failures):
    """Fold probe rows into per-direction support estimates and the hull."""
    scene = cfg.scene
    dead_band = default_dead_band(scene.m, cfg.eps_t)
    by_dir: dict[int, list] = {}
    for row in rows:
        by_dir.setdefault(row[0], []).append(row)
    estimates = []
    for k, (theta, omega, b, bb, j, t_center) in enumerate(frame):
        if k in failures:
            estimates.append((k, theta, omega, None, math.nan, math.nan, "failed"))
            continue
        dir_rows = by_dir.get(k, [])
        finite = [(r[3], r[12]) for r in dir_rows if math.isfinite(r[12])]
        if len(finite) < 3:
            if dir_rows and all(r[12] == -math.inf for r in dir_rows):
                # indicator vanished at every admissible h: nothing scatters
                estimates.append((k, theta, omega, None, -math.inf, 0.0, "none"))
            else:
                # fewer than 3 admissible probes survived the guard
                estimates.append((k, theta, omega, None, math.nan, math.nan, "dropped"))
            continue
        fit = fit_log_rate([1.0 / h for h, _ in finite], [v for _, v in finite])
        m = scene.m
        t_hat = t_center - fit.slope / (2.0 * m)
        t_hat = min(max(t_hat, b - 0.1), bb + 0.1)
        verdict = ("hit" if fit.slope > dead_band
                   else ("miss" if fit.slope < -dead_band else "uncertain"))
        estimates.append((k, theta, omega, t_hat, fit.slope, fit.residual_rms, verdict))

    halfplanes = [(e[2], e[3]) for e in estimates if e[3] is not None]
    hull = (hull_from_halfplanes(halfplanes, scene.rect)
            if len(halfplanes) >= 3 else HullPolygon())
    return estimates, hull


def _run_ladder(cfg: ExperimentConfig):
    """Amplitude-ladder sub-run on a fixed probe: per (m, amplitude) the
    nonlinear/Taylor error norms and both indicators."""
    lad = cfg.ladder
    grid = build_grid(cfg.scene.rect, cfg.grid_n)
    omega = (math.cos(lad.theta), math.sin(lad.theta))
    rows = []
    for m in lad.m_values:
        scene_m = cfg.scene.with_m(m)
        probe = ProbeParams(omega, lad.t, lad.h, lad.J, m)
        for amp in lad.amplitudes:
            interior, _ = calderon_evaluator(probe, amp)
            v = sample_field(interior, grid)
            z, report = solve_semilinear_residual(grid, scene_m, v)
            X, Y = grid.mesh()
            src = ComplexField(grid, -scene_m.q_total(X, Y) * v.values**m)
            zt = solve_poisson(grid, src, None)
            e, _ = indicator_E(grid, scene_m, probe, amp)
            et = indicator_E_tilde(grid, scene_m, probe, amp)
            rows.append((m, amp, z.sup_norm(),
                         float(np.max(np.abs(z.values - zt.values))),
                         abs(e), abs(et), abs(e - et), report.iterations))
    return rows


# ---------------------------------------------------------------------------
# table io
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_rows(path: Path, header: str, rows) -> None:
    lines = [header]
    lines.extend(" ".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def _write_indicator_table(path: Path, rows) -> None:
    _write_rows(path, INDICATOR_HEADER, rows)


def _write_support_table(path: Path, estimates) -> None:
    rows = [(k, theta, math.nan if t_hat is None else t_hat, slope, resid, verdict)
            for (k, theta, _omega, t_hat, slope, resid, verdict) in estimates]
    _write_rows(path, SUPPORT_HEADER, rows)


def _write_hull(path: Path, hull: HullPolygon) -> None:
    lines = [f"{x!r} {y!r}" for (x, y) in hull.vertices]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="ascii")


def _write_ladder_table(path: Path, rows) -> None:
    _write_rows(path, LADDER_HEADER, rows)


def read_table(path) -> tuple[list[str], list[list[str]]]:
    text = Path(path).read_text(encoding="ascii").strip("\n")
    lines = text.split("\n") if text else []
    if not lines:
        return [], []
    return lines[0].split(), [ln.split() for ln in lines[1:]]


# ---------------------------------------------------------------------------
# pipeline comparison
# ---------------------------------------------------------------------------

@dataclass
class CompareReport:
    n_probes: int
    remainder_rel: list[float]      # |E - E~| / |E~| per probe
    oracle_rel: list[float]         # |E~_pde - E~_oracle| / |E~_oracle| per probe
    quantiles: dict
    ladder_exponents: dict
    text: str


def compare_pipelines(artifact_dir) -> CompareReport:
    """Per-probe agreement between the full indicator, the auxiliary
    indicator, and its quadrature oracle; requires a pipelines="both" run."""
    art = Path(artifact_dir)
    manifest_path = art / "manifest.toml"
    indicator_path = art / "indicator.txt"
    if not manifest_path.exists() or not indicator_path.exists():
        raise FileNotFoundError(f"missing artifacts in {art}")
    cfg = load_config(manifest_path)
    if cfg.pipelines != "both":
        raise ValueError(f"compare needs a pipelines='both' run, got {cfg.pipelines!r}")

    header, rows = read_table(indicator_path)
    col = {name: i for i, name in enumerate(header)}
    remainder_rel = []
    oracle_rel = []
    table_lines = ["dir_index t h |E-Et|/|Et| |Et-Eo|/|Eo|"]
    for r in rows:
        e = complex(float(r[col["reE"]]), float(r[col["imE"]]))
        et = complex(float(r[col["reEt"]]), float(r[col["imEt"]]))
        eo = complex(float(r[col["reEo"]]), float(r[col["imEo"]]))
        rem = _rel(abs(e - et), abs(et))
        orel = _rel(abs(et - eo), abs(eo))
        remainder_rel.append(rem)
        oracle_rel.append(orel)
        table_lines.append(f"{r[col['dir_index']]} {r[col['t']]} {r[col['h']]} {rem!r} {orel!r}")

    quant = {
        "remainder_median": _median(remainder_rel),
        "remainder_p90": _quantile(remainder_rel, 0.9),
        "oracle_median": _median(oracle_rel),
        "oracle_p90": _quantile(oracle_rel, 0.9),
        "oracle_max": max(oracle_rel) if oracle_rel else math.nan,
    }
    ladder_exp = {}
    ladder_path = art / "ladder.txt"
    if ladder_path.exists():
        ladder_exp = _fit_ladder_exponents(ladder_path)

    lines = table_lines + [
        "",
        f"probes: {len(rows)}",
        f"|E-Et|/|Et|  median {quant['remainder_median']:.3e}  p90 {quant['remainder_p90']:.3e}",
        f"|Et-Eo|/|Eo| median {quant['oracle_median']:.3e}  p90 {quant['oracle_p90']:.3e}"
        f"  max {quant['oracle_max']:.3e}",
    ]
    for m, exps in sorted(ladder_exp.items()):
        lines.append(
            f"ladder m={m}: ||u-v|| exponent {exps['u_minus_v']:.3f} (expect {m}), "
            f"||u-ut|| {exps['u_minus_ut']:.3f} (expect {2*m-1}), "
            f"|E-Et| {exps['e_minus_et']:.3f} (expect {3*m-1})")
    return CompareReport(len(rows), remainder_rel, oracle_rel, quant, ladder_exp,
                         "\n".join(lines))


def _rel(num, den):
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den


def _median(vals):
    return _quantile(vals, 0.5)


def _quantile(vals, q):
    if not vals:
        return math.nan
    s = sorted(vals)
    idx = min(len(s) - 1, int(round(q * (len(s) - 1))))
    return s[idx]


def fit_ladder_exponent(amplitudes, values, noise_floor=0.0):
    """Log-log slope over ladder points at least 1000x above the noise floor."""
    pts = [(a, v) for a, v in zip(amplitudes, values) if v > 1e3 * noise_floor and v > 0]
    if len(pts) < 2:
        return math.nan
    la = np.log([p[0] for p in pts])
    lv = np.log([p[1] for p in pts])
    return float(np.polyfit(la, lv, 1)[0])


def _fit_ladder_exponents(path) -> dict:
    header, rows = read_table(path)
    col = {name: i for i, name in enumerate(header)}
    by_m: dict[int, dict[str, list]] = {}
    for r in rows:
        m = int(r[col["m"]])
        d = by_m.setdefault(m, {"amp": [], "zv": [], "zt": [], "de": [], "e": []})
        d["amp"].append(float(r[col["amplitude"]]))
        d["zv"].append(float(r[col["norm_u_minus_v"]]))
        d["zt"].append(float(r[col["norm_u_minus_ut"]]))
        d["de"].append(float(r[col["absEdiff"]]))
        d["e"].append(float(r[col["absE"]]))
    out = {}
    for m, d in by_m.items():
        floor_e = 1e-12 * max(d["e"]) if d["e"] else 0.0
        out[m] = {
            "u_minus_v": fit_ladder_exponent(d["amp"], d["zv"], 1e-12 * max(d["zv"])),
            "u_minus_ut": fit_ladder_exponent(d["amp"], d["zt"], 1e-12 * max(d["zt"])),
            "e_minus_et": fit_ladder_exponent(d["amp"], d["de"], floor_e),
        }
    return out
