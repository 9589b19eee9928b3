"""Half-space decisions, support-function estimates, and hull assembly.

Decision rule: along the filtered h sweep the log indicator behaves like

    log_I(h) = 2m (t - t_*) / h + kappa * ln(1/h) + const + o(1),

where the kappa term collects the polynomial-in-h prefactors of the decay/
blow-up envelopes (the prefactor power depends on the inclusion boundary's
flatness at the supporting point, so it is fitted, not assumed).  At desk
scale the prefactor is not ignorable: dropping it biases the fitted rate by
roughly -1.5 * d(ln s)/ds ~ -0.27 on the default sweep, which is larger than
the decision dead band.  The rate is therefore estimated as the linear
coefficient of a small-basis least-squares fit in s = 1/h:

    basis [s, ln s, 1, 1/s]   (truncated adaptively for short sweeps),

which reduces exactly to the pure-rate model when the data contain no
prefactor.  The verdict is the sign of the fitted rate with a dead band
2m * eps_t, operationalizing the excluded grazing case |t - t_*| < eps_t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import HullPolygon, hull_from_halfplanes, support_interval
from .indicator import IndicatorSample, IndicatorSampler
from .probe import DEFAULT_H_GRID, ProbeRejectedError

__all__ = [
    "Decision",
    "SupportEstimate",
    "RateFit",
    "ReconstructionError",
    "fit_log_rate",
    "estimate_support_slope",
    "classify_halfspace",
    "bisect_support",
    "reconstruct_hull",
    "default_dead_band",
    "EPS_T_DEFAULT",
]

EPS_T_DEFAULT = 0.01
BISECT_EDGE_MARGIN = 0.05


class ReconstructionError(RuntimeError):
    """A direction failed hard; partial results ride along for persistence."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial if partial is not None else []


def default_dead_band(m: int, eps_t: float = EPS_T_DEFAULT) -> float:
    return 2.0 * m * eps_t


@dataclass(frozen=True)
class RateFit:
    slope: float
    coefficients: tuple[float, ...]
    residual_rms: float
    n_points: int


@dataclass(frozen=True)
class Decision:
    verdict: str          # "hit" | "miss" | "uncertain"
    slope: float
    dead_band: float
    reason: str | None = None
    samples: tuple[IndicatorSample, ...] = ()


@dataclass(frozen=True)
class SupportEstimate:
    omega: tuple[float, float]
    theta: float
    t_hat: float | None
    slope: float
    margin: float                 # |slope| - dead_band, the classification margin
    fit_residual: float
    verdict: str                  # "hit" | "miss" | "none" | "failed"
    samples: tuple[IndicatorSample, ...] = field(default=(), repr=False)
    note: str | None = None


def fit_log_rate(inv_h, log_i) -> RateFit:
    """Least-squares rate in s = 1/h with the prefactor-aware basis.

    Basis size adapts to the number of points: [s, 1] for 3, [s, ln s, 1] for
    4, and [s, ln s, 1, 1/s] for 5 or more, keeping the system comfortably
    overdetermined on short sweeps.  Exact pure-rate data are reproduced to
    rounding regardless of basis size.
    """
    s = np.asarray(inv_h, dtype=float)
    y = np.asarray(log_i, dtype=float)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("inv_h and log_i must be 1-D arrays of equal length")
    if s.size < 3:
        raise ValueError(f"rate fit needs at least 3 points, got {s.size}")
    if np.ptp(s) <= 0:
        raise ValueError("rate fit needs distinct 1/h values")
    columns = [s, np.log(s), np.ones_like(s), 1.0 / s]
    n_basis = 4 if s.size >= 5 else (3 if s.size == 4 else 2)
    if n_basis == 2:
        columns = [columns[0], columns[2]]
    else:
        columns = columns[:n_basis]
    a = np.vstack(columns).T
    coef, _, _, _ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    return RateFit(float(coef[0]), tuple(float(c) for c in coef), rms, int(s.size))


def _collect_samples(sampler: IndicatorSampler, omega, t: float, h_grid,
                     rejections: list[str] | None = None) -> list[IndicatorSample]:
    samples = []
    for h in h_grid:
        probe = sampler.make_probe(omega, t, h)
        try:
            samples.append(sampler.sample(probe))
        except ProbeRejectedError as exc:
            if rejections is not None:
                rejections.append(f"h={h:.6g}: {exc.guard.reason}")
    return samples


def classify_halfspace(sampler: IndicatorSampler, omega, t: float,
                       h_grid=DEFAULT_H_GRID, dead_band: float | None = None,
                       ) -> Decision:
    """Decide whether the half-space {x.omega <= t} meets the inclusions by
    the sign of the fitted log-indicator rate over the h sweep."""
    if dead_band is None:
        dead_band = default_dead_band(sampler.scene.m)
    b, B = support_interval(sampler.scene, omega)
    if not (b < t < B):
        raise ValueError(f"t={t} outside the open support interval ({b}, {B})")
    rejections: list[str] = []
    samples = _collect_samples(sampler, omega, t, h_grid, rejections)
    if not samples:
        return Decision("uncertain", math.nan, dead_band,
                        "all probes rejected: " + "; ".join(rejections))
    finite = [sm for sm in samples if math.isfinite(sm.log_I)]
    if len(finite) < 3:
        if all(sm.is_null for sm in samples):
            # indicator identically zero: nothing scatters, every half-space misses
            return Decision("miss", -math.inf, dead_band,
                            "indicator vanished at every h", tuple(samples))
        return Decision("uncertain", math.nan, dead_band,
                        f"only {len(finite)} finite samples", tuple(samples))
    fit = fit_log_rate([1.0 / sm.probe.h for sm in finite],
                       [sm.log_I for sm in finite])
    if fit.slope > dead_band:
        verdict = "hit"
    elif fit.slope < -dead_band:
        verdict = "miss"
    else:
        verdict = "uncertain"
    return Decision(verdict, fit.slope, dead_band, None, tuple(samples))


def estimate_support_slope(omega, t: float, samples) -> tuple[float, RateFit]:
    """Invert the rate model: t_hat = t - slope/(2m) from the fitted rate of
    the given samples (all sharing omega and t)."""
    finite = [sm for sm in samples if math.isfinite(sm.log_I)]
    if len(finite) < 3:
        raise ValueError(f"need at least 3 samples with finite log_I, got {len(finite)}")
    m = finite[0].probe.m
    fit = fit_log_rate([1.0 / sm.probe.h for sm in finite],
                       [sm.log_I for sm in finite])
    return t - fit.slope / (2.0 * m), fit


def bisect_support(omega, t_range: tuple[float, float], classify, tol_t: float,
                   ) -> tuple[float, list[str]]:
    """Dichotomy-faithful support search: bisection on hit/miss verdicts.

    `classify` maps t to a Decision.  The low end must miss and the high end
    must hit; uncertain verdicts shrink toward the hit side and are recorded
    as warnings.  Returns (t_hat, warnings).
    """
    if tol_t <= 0:
        raise ValueError("tol_t must be positive")
    lo, hi = float(t_range[0]), float(t_range[1])
    if not lo < hi:
        raise ValueError(f"empty bisection range {t_range}")
    warnings: list[str] = []
    d_lo = classify(lo)
    d_hi = classify(hi)
    if d_lo.verdict == "uncertain":
        warnings.append(f"uncertain at range low t={lo:.6g}; treated as miss")
    elif d_lo.verdict != "miss":
        raise ReconstructionError(
            f"no verdict transition in range: t={lo:.6g} gives {d_lo.verdict}, "
            f"t={hi:.6g} gives {d_hi.verdict}")
    if d_hi.verdict != "hit":
        raise ReconstructionError(
            f"no verdict transition in range: t={lo:.6g} gives {d_lo.verdict}, "
            f"t={hi:.6g} gives {d_hi.verdict}")
    while hi - lo > tol_t:
        mid = 0.5 * (lo + hi)
        dec = classify(mid)
        if dec.verdict == "hit":
            hi = mid
        elif dec.verdict == "miss":
            lo = mid
        else:
            warnings.append(f"uncertain at t={mid:.6g}; shrinking toward the hit side")
            hi = mid
    return 0.5 * (lo + hi), warnings


def reconstruct_hull(sampler: IndicatorSampler, n_directions: int,
                     method: str = "slope", h_grid=DEFAULT_H_GRID,
                     eps_t: float = EPS_T_DEFAULT, bisect_tol: float = 0.02,
                     on_error: str = "raise",
                     ) -> tuple[HullPolygon, list[SupportEstimate]]:
    """Per-direction support estimates over equiangular directions, then the
    half-plane intersection polygon.

    method "slope" needs one t per direction (the center of the support
    interval) and inverts the fitted rate; method "bisect" searches the
    hit/miss transition using verdicts only.  on_error "raise" aborts on the
    first hard direction failure (partial estimates attached to the error);
    "mark" records the direction as failed and continues.
    """
    if n_directions < 8:
        raise ValueError(f"need at least 8 directions, got {n_directions}")
    if method not in ("slope", "bisect"):
        raise ValueError(f"unknown method {method!r}")
    scene = sampler.scene
    dead_band = default_dead_band(scene.m, eps_t)
    estimates: list[SupportEstimate] = []
    for k in range(n_directions):
        theta = 2.0 * math.pi * k / n_directions
        omega = (math.cos(theta), math.sin(theta))
        try:
            estimates.append(_estimate_direction(
                sampler, omega, theta, method, h_grid, dead_band, bisect_tol))
        except (ReconstructionError, ProbeRejectedError, ValueError) as exc:
            if on_error == "raise":
                raise ReconstructionError(
                    f"direction {k} (theta={theta:.4f}) failed: {exc}",
                    partial=estimates) from exc
            estimates.append(SupportEstimate(
                omega, theta, None, math.nan, math.nan, math.nan, "failed",
                note=str(exc)))
    halfplanes = [(e.omega, e.t_hat) for e in estimates if e.t_hat is not None]
    if len(halfplanes) < 3:
        return HullPolygon(), estimates
    return hull_from_halfplanes(halfplanes, scene.rect), estimates


def _estimate_direction(sampler, omega, theta, method, h_grid, dead_band,
                        bisect_tol) -> SupportEstimate:
    scene = sampler.scene
    b, B = support_interval(scene, omega)
    if method == "slope":
        t = 0.5 * (b + B)
        samples = _collect_samples(sampler, omega, t, h_grid)
        finite = [sm for sm in samples if math.isfinite(sm.log_I)]
        if not samples:
            raise ReconstructionError("all probes rejected by the guard")
        if len(finite) < 3:
            if all(sm.is_null for sm in samples):
                return SupportEstimate(omega, theta, None, -math.inf, math.inf,
                                       0.0, "none", tuple(samples),
                                       "indicator vanished: no inclusion seen")
            raise ReconstructionError(f"only {len(finite)} finite samples")
        t_hat, fit = estimate_support_slope(omega, t, finite)
        clamped = min(max(t_hat, b - 0.1), B + 0.1)
        note = None if clamped == t_hat else f"t_hat clamped from {t_hat:.6g}"
        verdict = "hit" if fit.slope > dead_band else ("miss" if fit.slope < -dead_band else "uncertain")
        return SupportEstimate(omega, theta, clamped, fit.slope,
                               abs(fit.slope) - dead_band, fit.residual_rms,
                               verdict, tuple(samples), note)

    margin = BISECT_EDGE_MARGIN * (B - b)
    collected: list[IndicatorSample] = []

    def classify(t):
        dec = classify_halfspace(sampler, omega, t, h_grid, dead_band)
        collected.extend(dec.samples)
        return dec

    t_hat, warnings = bisect_support(omega, (b + margin, B - margin), classify, bisect_tol)
    return SupportEstimate(omega, theta, t_hat, math.nan, math.nan, math.nan,
                           "hit", tuple(collected),
                           "; ".join(warnings) if warnings else None)
