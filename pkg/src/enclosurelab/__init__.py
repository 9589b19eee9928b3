"""Numerical laboratory for enclosure-method reconstruction of inclusions in
a medium governed by the semilinear equation lap(u) + q(x) u^m = 0.

Complex exponential boundary probes drive a nonlinear forward solver; the
decay/blow-up dichotomy of a boundary indicator functional decides, per
direction and threshold, whether a half-space meets the inclusions, and the
surviving half-planes intersect to the convex hull.
"""

__version__ = "0.1.0"

from .field import BoundaryData, ComplexField, Grid, build_grid
from .geometry import (ConvexPolygon, CoefficientSpec, Disk, HullPolygon,
                       RectShape, Scene, hausdorff_distance,
                       hull_from_halfplanes, support_interval,
                       true_support_value)
from .indicator import (IndicatorSample, IndicatorSampler, indicator_E,
                        indicator_E_tilde, oracle_E_tilde,
                        scaled_log_indicator)
from .pde import (DiscreteLaplacian, NewtonDivergenceError, NewtonReport,
                  assemble_laplacian, jacobian_check, solve_poisson,
                  solve_semilinear_residual)
from .probe import (DEFAULT_H_GRID, ProbeParams, ProbeRejectedError,
                    calderon_evaluator, min_admissible_J, power_trace,
                    underflow_guard)
from .reconstruct import (Decision, SupportEstimate, bisect_support,
                          classify_halfspace, estimate_support_slope,
                          fit_log_rate, reconstruct_hull)

__all__ = [
    "BoundaryData", "ComplexField", "Grid", "build_grid",
    "ConvexPolygon", "CoefficientSpec", "Disk", "HullPolygon", "RectShape",
    "Scene", "hausdorff_distance", "hull_from_halfplanes", "support_interval",
    "true_support_value",
    "IndicatorSample", "IndicatorSampler", "indicator_E", "indicator_E_tilde",
    "oracle_E_tilde", "scaled_log_indicator",
    "DiscreteLaplacian", "NewtonDivergenceError", "NewtonReport",
    "assemble_laplacian", "jacobian_check", "solve_poisson",
    "solve_semilinear_residual",
    "DEFAULT_H_GRID", "ProbeParams", "ProbeRejectedError", "calderon_evaluator",
    "min_admissible_J", "power_trace", "underflow_guard",
    "Decision", "SupportEstimate", "bisect_support", "classify_halfspace",
    "estimate_support_slope", "fit_log_rate", "reconstruct_hull",
]
