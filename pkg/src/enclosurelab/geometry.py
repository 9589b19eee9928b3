"""Scene geometry: the computational domain, inclusion shapes, coefficients,
and the convex-geometry utilities used by the reconstruction.

The domain is an axis-aligned square (corners are accepted as a desk-scale
surrogate for a smooth boundary; see README).  Inclusion
shapes are restricted to disks, axis-aligned rectangles, and convex polygons
so that membership tests and support values have closed forms usable as test
oracles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Disk",
    "RectShape",
    "ConvexPolygon",
    "CoefficientSpec",
    "Scene",
    "HullPolygon",
    "support_interval",
    "coefficient_at",
    "true_support_value",
    "hull_from_halfplanes",
    "hausdorff_distance",
    "convex_hull_of_points",
    "true_hull_polygon",
]

_EPS = 1e-12


# ---------------------------------------------------------------------------
# shapes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"disk radius must be positive, got {self.radius}")

    def contains(self, x, y):
        cx, cy = self.center
        return (np.asarray(x) - cx) ** 2 + (np.asarray(y) - cy) ** 2 <= self.radius**2

    def support_min(self, omega) -> float:
        cx, cy = self.center
        return cx * omega[0] + cy * omega[1] - self.radius

    def bbox(self):
        cx, cy = self.center
        r = self.radius
        return (cx - r, cx + r, cy - r, cy + r)

    def boundary_points(self, n: int) -> np.ndarray:
        ang = 2.0 * np.pi * np.arange(n) / n
        cx, cy = self.center
        return np.column_stack([cx + self.radius * np.cos(ang),
                                cy + self.radius * np.sin(ang)])


@dataclass(frozen=True)
class RectShape:
    """Axis-aligned rectangle [x0,x1] x [y0,y1]."""
    bounds: tuple[float, float, float, float]

    def __post_init__(self):
        x0, x1, y0, y1 = self.bounds
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"degenerate rectangle bounds {self.bounds}")

    def contains(self, x, y):
        x0, x1, y0, y1 = self.bounds
        x = np.asarray(x)
        y = np.asarray(y)
        return (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)

    def _corners(self):
        x0, x1, y0, y1 = self.bounds
        return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])

    def support_min(self, omega) -> float:
        return float(np.min(self._corners() @ np.asarray(omega)))

    def bbox(self):
        return self.bounds

    def boundary_points(self, n: int) -> np.ndarray:
        return _sample_polygon_boundary(self._corners(), n)


@dataclass(frozen=True)
class ConvexPolygon:
    """Convex polygon given by counterclockwise vertices."""
    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.shape[0] < 3:
            raise ValueError("polygon needs at least 3 vertices")
        if _polygon_area(v) <= 0:
            raise ValueError("polygon vertices must be counterclockwise and non-degenerate")
        nxt = np.roll(v, -1, axis=0)
        nxt2 = np.roll(v, -2, axis=0)
        cross = ((nxt[:, 0] - v[:, 0]) * (nxt2[:, 1] - v[:, 1])
                 - (nxt[:, 1] - v[:, 1]) * (nxt2[:, 0] - v[:, 0]))
        if np.any(cross < -_EPS):
            raise ValueError("polygon is not convex")

    def contains(self, x, y):
        v = np.asarray(self.vertices, dtype=float)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        inside = np.ones(np.broadcast(x, y).shape, dtype=bool)
        for i in range(len(v)):
            ax, ay = v[i]
            bx, by = v[(i + 1) % len(v)]
            inside &= (bx - ax) * (y - ay) - (by - ay) * (x - ax) >= -_EPS
        return inside

    def support_min(self, omega) -> float:
        v = np.asarray(self.vertices, dtype=float)
        return float(np.min(v @ np.asarray(omega)))

    def bbox(self):
        v = np.asarray(self.vertices, dtype=float)
        return (v[:, 0].min(), v[:, 0].max(), v[:, 1].min(), v[:, 1].max())

    def boundary_points(self, n: int) -> np.ndarray:
        return _sample_polygon_boundary(np.asarray(self.vertices, dtype=float), n)


Shape = Disk | RectShape | ConvexPolygon


# ---------------------------------------------------------------------------
# coefficients and scene
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientSpec:
    """Background coefficient descriptor: a constant or a gaussian bump
    height*exp(-|x-c|^2/(2 width^2))."""
    kind: str = "constant"
    value: float = 0.0
    center: tuple[float, float] = (0.5, 0.5)
    width: float = 0.1
    height: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "gaussian"):
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        if self.kind == "gaussian" and self.width <= 0:
            raise ValueError("gaussian width must be positive")

    def evaluate(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "constant":
            return np.broadcast_to(float(self.value), np.broadcast(x, y).shape).copy()
        cx, cy = self.center
        r2 = (x - cx) ** 2 + (y - cy) ** 2
        return self.height * np.exp(-r2 / (2.0 * self.width**2))


@dataclass(frozen=True)
class Scene:
    """Physical setup: domain rectangle, background q0, inclusions with their
    per-inclusion constant coefficients, power m, and jump bound mu."""
    rect: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)
    q0: CoefficientSpec = field(default_factory=CoefficientSpec)
    inclusions: tuple[Shape, ...] = ()
    qd_values: tuple[float, ...] = ()
    m: int = 2
    mu: float = 0.5

    def __post_init__(self):
        x0, x1, y0, y1 = self.rect
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"degenerate domain rectangle {self.rect}")
        if not isinstance(self.m, int) or self.m < 2:
            raise ValueError(f"m must be an integer >= 2, got {self.m}")
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if len(self.inclusions) != len(self.qd_values):
            raise ValueError("each inclusion needs exactly one q_D value")
        for shape, qd in zip(self.inclusions, self.qd_values):
            bx0, bx1, by0, by1 = shape.bbox()
            if not (bx0 > x0 and bx1 < x1 and by0 > y0 and by1 < y1):
                raise ValueError(f"inclusion {shape} is not strictly inside the domain")
            if abs(qd) < self.mu:
                raise ValueError(f"|q_D| = {abs(qd)} violates the jump bound mu = {self.mu}")
        signs = {math.copysign(1.0, qd) for qd in self.qd_values}
        if len(signs) > 1:
            raise ValueError("q_D must have a single sign on all inclusions")

    @property
    def has_inclusions(self) -> bool:
        return len(self.inclusions) > 0

    def chi_qd(self, x, y):
        """chi_D(x) * q_D(x) evaluated pointwise (vectorized); where shapes
        overlap, the first inclusion's coefficient applies (no summation)."""
        out = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape, dtype=float)
        for shape, qd in zip(self.inclusions, self.qd_values):
            mask = shape.contains(x, y)
            out = np.where(mask & (out == 0.0), qd, out)
        return out

    def q_total(self, x, y):
        return self.q0.evaluate(x, y) + self.chi_qd(x, y)

    def with_m(self, m: int) -> "Scene":
        return Scene(self.rect, self.q0, self.inclusions, self.qd_values, m, self.mu)


def support_interval(scene: Scene, omega) -> tuple[float, float]:
    """(b, B) = (inf, sup) of x.omega over the domain rectangle, exact from corners."""
    omega = _check_unit(omega)
    x0, x1, y0, y1 = scene.rect
    corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    proj = corners @ omega
    return float(proj.min()), float(proj.max())


def coefficient_at(scene: Scene, x) -> tuple[float, float]:
    """(q0(x), chi_D(x) q_D(x)) at a single point; the full coefficient is the sum."""
    px, py = float(x[0]), float(x[1])
    x0, x1, y0, y1 = scene.rect
    if not (x0 <= px <= x1 and y0 <= py <= y1):
        raise ValueError(f"point {x} lies outside the domain {scene.rect}")
    return float(scene.q0.evaluate(px, py)), float(scene.chi_qd(px, py))


def true_support_value(scene: Scene, omega) -> float:
    """Exact t_*(omega) = inf over the inclusion set of x.omega.

    Returns +inf for an empty inclusion set (the distinguished "no inclusion"
    value: every half-space misses D).
    """
    omega = _check_unit(omega)
    if not scene.has_inclusions:
        return math.inf
    return min(shape.support_min(omega) for shape in scene.inclusions)


def _check_unit(omega):
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (2,) or abs(float(np.hypot(*omega)) - 1.0) > 1e-12:
        raise ValueError(f"omega must be a unit 2-vector, got {omega}")
    return omega


# ---------------------------------------------------------------------------
# hull polygon and half-plane intersection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HullPolygon:
    """Convex polygon with counterclockwise vertices; empty vertex tuple means
    the distinguished empty result (infeasible or no-inclusion)."""
    vertices: tuple[tuple[float, float], ...] = ()

    @property
    def is_empty(self) -> bool:
        return len(self.vertices) < 3

    def as_array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float).reshape(-1, 2)

    def contains(self, x, y, tol: float = 0.0):
        if self.is_empty:
            return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape, dtype=bool)
        v = self.as_array()
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        inside = np.ones(np.broadcast(x, y).shape, dtype=bool)
        for i in range(len(v)):
            ax, ay = v[i]
            bx, by = v[(i + 1) % len(v)]
            ex, ey = bx - ax, by - ay
            ln = math.hypot(ex, ey)
            inside &= (ex * (y - ay) - ey * (x - ax)) >= -tol * ln
        return inside


def hull_from_halfplanes(estimates, rect) -> HullPolygon:
    """Intersect the half-planes {x.omega >= t} with the domain rectangle.

    `estimates` is a sequence of (omega, t) pairs, at least 3 of them.  The
    intersection is computed by successive polygon clipping; an infeasible
    system yields the empty HullPolygon.
    """
    if len(estimates) < 3:
        raise ValueError(f"need at least 3 half-planes, got {len(estimates)}")
    x0, x1, y0, y1 = rect
    poly = [np.array([x0, y0]), np.array([x1, y0]),
            np.array([x1, y1]), np.array([x0, y1])]
    scale = max(x1 - x0, y1 - y0)
    for omega, t in estimates:
        poly = _clip_halfplane(poly, np.asarray(omega, dtype=float), float(t), scale)
        if len(poly) < 3:
            return HullPolygon()
    return HullPolygon(tuple((float(p[0]), float(p[1])) for p in poly))


def _clip_halfplane(poly, n, c, scale):
    """Sutherland-Hodgman clip of a ccw polygon against {x: x.n >= c}."""
    if not poly:
        return []
    out = []
    k = len(poly)
    for i in range(k):
        p, q = poly[i], poly[(i + 1) % k]
        fp = float(p @ n) - c
        fq = float(q @ n) - c
        if fp >= 0.0:
            out.append(p)
            if fq < 0.0:
                out.append(p + (q - p) * (fp / (fp - fq)))
        elif fq >= 0.0:
            out.append(p + (q - p) * (fp / (fp - fq)))
    tol = _EPS * scale
    dedup = []
    for p in out:
        if not dedup or math.hypot(*(p - dedup[-1])) > tol:
            dedup.append(p)
    if len(dedup) > 1 and math.hypot(*(dedup[0] - dedup[-1])) <= tol:
        dedup.pop()
    return dedup


def hausdorff_distance(a: HullPolygon, b: HullPolygon, samples_per_polygon: int = 1200) -> float:
    """Symmetric Hausdorff distance between polygon boundaries.

    One side is sampled densely (vertices always included), the other side is
    measured exactly via point-to-segment distances, so vertex-to-vertex and
    vertex-to-edge extremes are exact.
    """
    if a.is_empty or b.is_empty:
        raise ValueError("hausdorff_distance requires non-empty polygons")
    pa, pb = a.as_array(), b.as_array()
    return max(_one_sided_hausdorff(pa, pb, samples_per_polygon),
               _one_sided_hausdorff(pb, pa, samples_per_polygon))


def _one_sided_hausdorff(p, q, n_samples):
    samples = _sample_polygon_boundary(p, n_samples)
    q_next = np.roll(q, -1, axis=0)
    worst = 0.0
    for pt in samples:
        worst = max(worst, _dist_point_segments(pt, q, q_next))
    return worst


def _dist_point_segments(pt, a, b):
    ab = b - a
    denom = np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300)
    tt = np.clip(np.einsum("ij,ij->i", pt - a, ab) / denom, 0.0, 1.0)
    proj = a + tt[:, None] * ab
    return float(np.min(np.hypot(pt[0] - proj[:, 0], pt[1] - proj[:, 1])))


def _sample_polygon_boundary(vertices, n_total):
    v = np.asarray(vertices, dtype=float)
    nxt = np.roll(v, -1, axis=0)
    lengths = np.hypot(*(nxt - v).T)
    perimeter = float(lengths.sum())
    pts = []
    for i in range(len(v)):
        nseg = max(1, int(math.ceil(n_total * lengths[i] / max(perimeter, 1e-300))))
        frac = np.arange(nseg) / nseg
        pts.append(v[i] + frac[:, None] * (nxt[i] - v[i]))
    return np.vstack(pts)


def _polygon_area(v):
    nxt = np.roll(v, -1, axis=0)
    return 0.5 * float(np.sum(v[:, 0] * nxt[:, 1] - nxt[:, 0] * v[:, 1]))


def convex_hull_of_points(points) -> np.ndarray:
    """Andrew monotone chain; returns ccw hull vertices."""
    pts = sorted({(float(p[0]), float(p[1])) for p in points})
    if len(pts) < 3:
        return np.asarray(pts, dtype=float)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.asarray(lower[:-1] + upper[:-1], dtype=float)


def true_hull_polygon(scene: Scene, samples_per_shape: int = 1024) -> HullPolygon:
    """Convex hull of the inclusion union, as a dense polygon (test oracle)."""
    if not scene.has_inclusions:
        return HullPolygon()
    pts = np.vstack([s.boundary_points(samples_per_shape) for s in scene.inclusions])
    hull = convex_hull_of_points(pts)
    return HullPolygon(tuple((float(p[0]), float(p[1])) for p in hull))
