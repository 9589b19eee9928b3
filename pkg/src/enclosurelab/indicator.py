"""Indicator functionals, their semianalytic oracle, and the per-probe
sampling front end used by the reconstruction drivers.

The full indicator is the weighted Neumann gap between the measured nonlinear
solution and the background model,

    E(f)  = int_bdry (dnu u_f - dnu u0_f~) conj(f^m) dsigma,

and the auxiliary indicator E~(f) replaces u_f by its Taylor surrogate.  Both
are evaluated from zero-boundary correction fields only: the shared harmonic
part cancels exactly at the level of the formulation, so no large-field
subtraction ever happens.  For Calderon probes the auxiliary indicator has a
closed-form volume representation, E~ = -int_D q_D |v|^(2m), evaluated here
by independent dense quadrature as the oracle.

Scaled quantities exp(2mJ/h)|E| overflow double precision by design; all
post-processing uses the log form 2mJ/h + ln|E| instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field import ComplexField, Grid, boundary_integral, normal_derivative, sample_boundary, sample_field
from .geometry import Scene, support_interval
from .pde import NewtonReport, get_laplacian, solve_semilinear_residual
from .probe import (AUTO_J_MARGIN, GuardResult, ProbeParams, ProbeRejectedError,
                    calderon_evaluator, min_admissible_J, power_trace,
                    underflow_guard)

__all__ = [
    "IndicatorSample",
    "IndicatorSampler",
    "indicator_E",
    "indicator_E_tilde",
    "oracle_E_tilde",
    "scaled_log_indicator",
]

ORACLE_QUAD_N = 1025


def _boundary_weight(grid: Grid, probe: ProbeParams, amplitude: float):
    return sample_boundary(power_trace(probe, probe.m, amplitude), grid)


def _background_correction(grid: Grid, scene: Scene, v: ComplexField) -> ComplexField:
    """z0 solving lap z0 = -q0 v^m, z0|boundary = 0 (background model, linear)."""
    lap = get_laplacian(grid)
    X, Y = grid.mesh()
    src = -scene.q0.evaluate(X, Y) * v.values**scene.m
    return ComplexField(grid, lap.solve(src, np.zeros((grid.n, grid.n), dtype=complex)))


def indicator_E(grid: Grid, scene: Scene, probe: ProbeParams,
                amplitude: float = 1.0) -> tuple[complex, NewtonReport]:
    """Full indicator via the nonlinear solve; requires an admissible probe
    (magnitude guard and J-rule)."""
    guard = underflow_guard(probe, scene, amplitude, require_j_rule=True)
    if not guard:
        raise ProbeRejectedError(guard)
    interior, _ = calderon_evaluator(probe, amplitude)
    v = sample_field(interior, grid)
    z_f, report = solve_semilinear_residual(grid, scene, v)
    z_0 = _background_correction(grid, scene, v)
    gap = ComplexField(grid, z_f.values - z_0.values)
    e = boundary_integral(normal_derivative(gap), _boundary_weight(grid, probe, amplitude))
    return e, report


def indicator_E_tilde(grid: Grid, scene: Scene, probe: ProbeParams,
                      amplitude: float = 1.0) -> complex:
    """Auxiliary indicator; both solves are linear, and the J-rule is not
    needed (it only controls the full indicator's remainder)."""
    guard = underflow_guard(probe, scene, amplitude, require_j_rule=False)
    if not guard:
        raise ProbeRejectedError(guard)
    lap = get_laplacian(grid)
    interior, _ = calderon_evaluator(probe, amplitude)
    v = sample_field(interior, grid)
    X, Y = grid.mesh()
    src = -scene.q_total(X, Y) * v.values**scene.m
    zt = ComplexField(grid, lap.solve(src, np.zeros((grid.n, grid.n), dtype=complex)))
    z_0 = _background_correction(grid, scene, v)
    gap = ComplexField(grid, zt.values - z_0.values)
    return boundary_integral(normal_derivative(gap), _boundary_weight(grid, probe, amplitude))


def oracle_E_tilde(scene: Scene, probe: ProbeParams, quad_n: int = ORACLE_QUAD_N,
                   amplitude: float = 1.0) -> complex:
    """Dense midpoint quadrature of -q_D |v|^(2m) over the inclusions on an
    independent quad_n x quad_n grid of cell centers (>= 257 recommended).

    This never touches the PDE grid, so it is an independent check rather than
    a shared-discretization echo.  The result is real with sign opposite to
    q_D; it is returned as complex for interface symmetry with the PDE path.
    """
    if quad_n < 9:
        raise ValueError(f"quad_n too small: {quad_n}")
    x0, x1, y0, y1 = scene.rect
    dd = (x1 - x0) / quad_n
    xs = x0 + (np.arange(quad_n) + 0.5) * dd
    ys = y0 + (np.arange(quad_n) + 0.5) * dd
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    chi_qd = scene.chi_qd(X, Y)
    mask = chi_qd != 0.0
    if not np.any(mask):
        return 0.0 + 0.0j
    wx, wy = probe.omega
    along = X[mask] * wx + Y[mask] * wy
    two_m = 2 * scene.m
    weights = np.exp(two_m * (probe.t - probe.J - along) / probe.h)
    total = float(np.sum(chi_qd[mask] * weights)) * dd * dd
    return complex(-(amplitude**two_m) * total)


def scaled_log_indicator(probe: ProbeParams, e: complex) -> float:
    """2mJ/h + ln|E|, the log form of exp(2mJ/h)|E|; E = 0 maps to the -inf
    sentinel (flagged by callers, never exponentiated)."""
    if e == 0:
        return -math.inf
    return 2.0 * probe.m * probe.J / probe.h + math.log(abs(e))


@dataclass(frozen=True)
class IndicatorSample:
    """One probe evaluation record; fields not produced by the requested
    pipeline stay None."""
    probe: ProbeParams
    E: complex | None
    E_tilde: complex | None
    E_oracle: complex | None
    log_I: float
    newton: NewtonReport | None

    @property
    def is_null(self) -> bool:
        """True when the pipeline's primary indicator vanished exactly."""
        return self.log_I == -math.inf


class IndicatorSampler:
    """Bundles scene, PDE grid, pipeline choice and J policy into a callable
    that turns (omega, t, h) into an IndicatorSample.

    pipeline: "solver" (full E and E~ via the PDE), "oracle" (quadrature
    only), or "both".  log_I is taken from E when the solver runs, otherwise
    from the oracle value.  J may be a number or "auto", which resolves to
    AUTO_J_MARGIN times the per-direction strict bound.
    """

    def __init__(self, scene: Scene, grid: Grid | None, pipeline: str = "both",
                 quad_n: int = ORACLE_QUAD_N, J: float | str = "auto"):
        if pipeline not in ("solver", "oracle", "both"):
            raise ValueError(f"unknown pipeline {pipeline!r}")
        if pipeline != "oracle" and grid is None:
            raise ValueError("solver pipelines need a PDE grid")
        self.scene = scene
        self.grid = grid
        self.pipeline = pipeline
        self.quad_n = quad_n
        self.J = J

    def resolve_J(self, omega) -> float:
        if self.J != "auto":
            return float(self.J)
        b, B = support_interval(self.scene, omega)
        return AUTO_J_MARGIN * min_admissible_J(self.scene.m, b, B)

    def make_probe(self, omega, t: float, h: float) -> ProbeParams:
        return ProbeParams(tuple(omega), float(t), float(h),
                           self.resolve_J(omega), self.scene.m)

    def guard(self, probe: ProbeParams, amplitude: float = 1.0) -> GuardResult:
        return underflow_guard(probe, self.scene, amplitude,
                               require_j_rule=(self.pipeline != "oracle"))

    def sample(self, probe: ProbeParams, amplitude: float = 1.0) -> IndicatorSample:
        """Evaluate one admissible probe; raises ProbeRejectedError otherwise."""
        guard = self.guard(probe, amplitude)
        if not guard:
            raise ProbeRejectedError(guard)
        e = e_tilde = e_oracle = None
        report = None
        if self.pipeline in ("oracle", "both"):
            e_oracle = oracle_E_tilde(self.scene, probe, self.quad_n, amplitude)
        if self.pipeline in ("solver", "both"):
            e, report = indicator_E(self.grid, self.scene, probe, amplitude)
            e_tilde = indicator_E_tilde(self.grid, self.scene, probe, amplitude)
        primary = e if e is not None else e_oracle
        return IndicatorSample(probe, e, e_tilde, e_oracle,
                               scaled_log_indicator(probe, primary), report)
