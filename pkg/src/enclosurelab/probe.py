"""Calderon exponential test data and admissibility checks.

One probe is the closed-form harmonic field

    v_h(x) = a * exp(-J/h) * exp(-(x.w + i x.w_perp - t)/h),

with unit vectors w_perp perpendicular to w.  Its modulus depends on x.w only
and equals exp(-J/h) on the critical line x.w = t.  The m-th power of v_h is
again of the same form, hence harmonic, which is what makes the auxiliary
indicator reduce to a volume integral over the inclusions.

The floating-point guard works entirely in log magnitudes: the interesting
signal scales like exp(2m(t-b-J)/h) and dives below double precision long
before anything overflows, so the h sweep must be fenced on both sides.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Scene, support_interval

__all__ = [
    "ProbeParams",
    "GuardResult",
    "ProbeRejectedError",
    "min_admissible_J",
    "calderon_evaluator",
    "power_trace",
    "underflow_guard",
    "DEFAULT_H_GRID",
    "AUTO_J_MARGIN",
]

# 1/h equally spaced: 1/h in {10/3, 4, 5, 6, 7, 8}; the rate fit conditions
# best on an equispaced 1/h axis.
DEFAULT_H_GRID = (0.30, 0.25, 0.20, 1.0 / 6.0, 1.0 / 7.0, 0.125)

# The decay/blow-up guarantee needs a strict inequality on J; excess J only
# burns dynamic range (the signal shrinks like exp(-2mJ/h)).
AUTO_J_MARGIN = 1.1

_LOG_UNDERFLOW = math.log(1e-280)
_LOG_OVERFLOW = math.log(1e280)


@dataclass(frozen=True)
class ProbeParams:
    """One Calderon probe (omega, t, h, J, m); omega_perp is fixed to the +90
    degree rotation of omega (perp_sign=-1 flips it, used to test conjugation
    symmetry)."""
    omega: tuple[float, float]
    t: float
    h: float
    J: float
    m: int
    perp_sign: int = 1

    def __post_init__(self):
        wx, wy = self.omega
        if abs(math.hypot(wx, wy) - 1.0) > 1e-12:
            raise ValueError(f"omega must be a unit vector, got {self.omega}")
        if self.h <= 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if self.J <= 0:
            raise ValueError(f"J must be positive, got {self.J}")
        if not isinstance(self.m, int) or self.m < 2:
            raise ValueError(f"m must be an integer >= 2, got {self.m}")
        if self.perp_sign not in (1, -1):
            raise ValueError("perp_sign must be +1 or -1")

    @property
    def omega_perp(self) -> tuple[float, float]:
        wx, wy = self.omega
        return (-self.perp_sign * wy, self.perp_sign * wx)

    def flipped_perp(self) -> "ProbeParams":
        return ProbeParams(self.omega, self.t, self.h, self.J, self.m, -self.perp_sign)


def min_admissible_J(m: int, b: float, B: float) -> float:
    """Strict lower bound (3m-1)/(m-1) * (B-b); callers must pick J above it."""
    if not isinstance(m, int) or m < 2:
        raise ValueError(f"m must be an integer >= 2, got {m}")
    if not B > b:
        raise ValueError(f"need B > b, got b={b}, B={B}")
    return (3.0 * m - 1.0) / (m - 1.0) * (B - b)


def _phase_evaluator(probe: ProbeParams, k: int, amplitude: float):
    wx, wy = probe.omega
    px, py = probe.omega_perp
    t, h, J = probe.t, probe.h, probe.J
    log_amp = k * (math.log(amplitude) if amplitude != 1.0 else 0.0)

    def evaluate(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        along = x * wx + y * wy
        across = x * px + y * py
        return np.exp(k * (t - J - along) / h + log_amp) * np.exp(-1j * k * across / h)

    return evaluate


def calderon_evaluator(probe: ProbeParams, amplitude: float = 1.0):
    """(interior, boundary) evaluators of the probe field; they share one
    closed form, and the interior samples are exactly the harmonic extension
    of the boundary trace."""
    ev = _phase_evaluator(probe, 1, amplitude)
    return ev, ev


def power_trace(probe: ProbeParams, k: int, amplitude: float = 1.0):
    """Closed form of the k-th power of the probe field (modulus to the k-th
    power, phase multiplied by k); used as the conj(f^m) indicator weight."""
    if k < 1:
        raise ValueError(f"power must be >= 1, got {k}")
    return _phase_evaluator(probe, k, amplitude)


@dataclass(frozen=True)
class GuardResult:
    ok: bool
    reason: str | None = None
    signal_log: float = 0.0        # natural log of the indicator-signal magnitude
    h_limit: float | None = None   # smallest admissible h for this (omega, t, J, m)

    def __bool__(self) -> bool:
        return self.ok


class ProbeRejectedError(RuntimeError):
    def __init__(self, guard: GuardResult):
        super().__init__(f"probe rejected: {guard.reason}")
        self.guard = guard


def underflow_guard(probe: ProbeParams, scene: Scene, amplitude: float = 1.0,
                    require_j_rule: bool = True) -> GuardResult:
    """Check a probe against the J-rule and double-precision magnitude fences.

    The extreme log magnitudes are exp1 = (t-b-J)/h + log(a) for the field
    itself and k*exp1 for its powers up to 2m; the probe is rejected if the
    indicator signal exp(2m*exp1) underflows below 1e-280 or any intermediate
    exceeds 1e+280.  Rejections report the limiting h.  The J-rule check is
    skipped for auxiliary-indicator work that never forms the full indicator.
    """
    b, B = support_interval(scene, probe.omega)
    if scene.m != probe.m:
        return GuardResult(False, f"probe m={probe.m} does not match scene m={scene.m}")
    if require_j_rule:
        j_min = min_admissible_J(probe.m, b, B)
        if probe.J <= j_min:
            return GuardResult(False, f"J-rule violated: J={probe.J} <= {j_min:.6g}")
    if not (b < probe.t < B):
        return GuardResult(False, f"t={probe.t} outside the open support interval ({b:.6g}, {B:.6g})")

    exp1 = (probe.t - b - probe.J) / probe.h + math.log(amplitude)
    signal_log = 2.0 * probe.m * exp1
    worst = max(exp1, probe.m * exp1, 2.0 * probe.m * exp1)
    if worst > _LOG_OVERFLOW:
        return GuardResult(False, "magnitude overflow beyond 1e+280", signal_log)
    if signal_log < _LOG_UNDERFLOW:
        h_limit = None
        denom = _LOG_UNDERFLOW - 2.0 * probe.m * math.log(amplitude)
        if denom < 0:
            h_limit = 2.0 * probe.m * (probe.t - b - probe.J) / denom
        return GuardResult(
            False,
            f"indicator signal exp({signal_log:.1f}) underflows below 1e-280",
            signal_log, h_limit)
    return GuardResult(True, None, signal_log)
