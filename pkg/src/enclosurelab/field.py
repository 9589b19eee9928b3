"""Uniform grid over the domain, complex nodal fields, and the discrete
calculus: boundary traces, outward normal derivatives, and boundary/interior
quadrature.

Grid layout: node (i, j) sits at (x0 + i*delta, y0 + j*delta); fields are
stored as (N, N) complex arrays indexed [i, j].  Boundary data is stored in a
single counterclockwise sweep starting at the corner (x0, y0): bottom edge,
right edge, top edge, left edge, each corner appearing once, 4(N-1) values.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "Grid",
    "ComplexField",
    "BoundaryData",
    "build_grid",
    "sample_field",
    "sample_boundary",
    "boundary_trace",
    "normal_derivative",
    "boundary_integral",
    "interior_integral",
    "write_field",
]


@dataclass(frozen=True)
class Grid:
    rect: tuple[float, float, float, float]
    n: int

    @property
    def spacing(self) -> float:
        x0, x1, _, _ = self.rect
        return (x1 - x0) / (self.n - 1)

    def axis_nodes(self):
        x0, x1, y0, y1 = self.rect
        return (x0 + self.spacing * np.arange(self.n),
                y0 + self.spacing * np.arange(self.n))

    def mesh(self):
        xs, ys = self.axis_nodes()
        return np.meshgrid(xs, ys, indexing="ij")

    @property
    def boundary_count(self) -> int:
        return 4 * (self.n - 1)

    def boundary_ij(self):
        return _boundary_ij(self.n)

    def boundary_points(self):
        bi, bj = self.boundary_ij()
        x0, _, y0, _ = self.rect
        return x0 + self.spacing * bi, y0 + self.spacing * bj


@lru_cache(maxsize=16)
def _boundary_ij(n: int):
    """Counterclockwise boundary node indices starting at (0, 0)."""
    bottom_i = np.arange(0, n - 1)
    right_j = np.arange(0, n - 1)
    top_i = np.arange(n - 1, 0, -1)
    left_j = np.arange(n - 1, 0, -1)
    bi = np.concatenate([bottom_i, np.full(n - 1, n - 1), top_i, np.zeros(n - 1, dtype=int)])
    bj = np.concatenate([np.zeros(n - 1, dtype=int), right_j, np.full(n - 1, n - 1), left_j])
    bi.setflags(write=False)
    bj.setflags(write=False)
    return bi, bj


@dataclass(frozen=True)
class ComplexField:
    grid: Grid
    values: np.ndarray  # (N, N) complex128

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=complex)
        if v.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"field shape {v.shape} does not match grid n={self.grid.n}")
        if not np.all(np.isfinite(v.view(float))):
            bad = np.argwhere(~np.isfinite(v))
            i, j = bad[0]
            raise ValueError(f"non-finite field value at node ({i}, {j})")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class BoundaryData:
    grid: Grid
    values: np.ndarray  # (4(N-1),) complex128, ccw from (x0, y0)

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=complex)
        if v.shape != (self.grid.boundary_count,):
            raise ValueError(
                f"boundary data length {v.shape} does not match 4(N-1)={self.grid.boundary_count}")
        if not np.all(np.isfinite(v.view(float))):
            raise ValueError("non-finite boundary value")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


def build_grid(rect, n: int) -> Grid:
    x0, x1, y0, y1 = (float(v) for v in rect)
    if not (x0 < x1 and y0 < y1):
        raise ValueError(f"degenerate rectangle {rect}")
    if n < 5 or n % 2 == 0:
        raise ValueError(f"grid needs an odd node count >= 5 per side, got {n}")
    side_x, side_y = x1 - x0, y1 - y0
    if abs(side_x - side_y) > 1e-12 * max(side_x, side_y):
        raise ValueError("grid cells must be square: domain rectangle must be a square")
    return Grid((x0, x1, y0, y1), int(n))


def sample_field(evaluator, grid: Grid) -> ComplexField:
    """Pointwise nodal samples of evaluator(x, y); the evaluator must accept
    numpy arrays and return finite values on the domain."""
    X, Y = grid.mesh()
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.asarray(evaluator(X, Y), dtype=complex)
    vals = np.broadcast_to(vals, (grid.n, grid.n))
    if not np.all(np.isfinite(vals.view(float))):
        bad = np.argwhere(~np.isfinite(vals))
        i, j = bad[0]
        raise ValueError(
            f"evaluator produced a non-finite sample at node ({i}, {j}), "
            f"x={X[i, j]!r}, y={Y[i, j]!r}")
    return ComplexField(grid, vals.copy())


def sample_boundary(evaluator, grid: Grid) -> BoundaryData:
    bx, by = grid.boundary_points()
    vals = np.asarray(evaluator(bx, by), dtype=complex)
    vals = np.broadcast_to(vals, (grid.boundary_count,))
    if not np.all(np.isfinite(vals.view(float))):
        raise ValueError("evaluator produced a non-finite boundary sample")
    return BoundaryData(grid, vals.copy())


def boundary_trace(f: ComplexField) -> BoundaryData:
    bi, bj = f.grid.boundary_ij()
    return BoundaryData(f.grid, f.values[bi, bj])


def normal_derivative(f: ComplexField) -> BoundaryData:
    """Outward normal derivative on the boundary by the second-order one-sided
    difference along the inward normal,

        dnu u = (3 u_b - 4 u_{b-delta} + u_{b-2delta}) / (2 delta),

    exact on fields that are affine or edge-normal quadratics.  At the four
    corners the two incident edges' values are averaged (the corner has no
    normal of its own; this convention is documented, not canonical).
    """
    grid = f.grid
    n, d = grid.n, grid.spacing
    if n < 9:
        raise ValueError(f"normal_derivative needs n >= 9, got {n}")
    u = f.values
    left = (3 * u[0, :] - 4 * u[1, :] + u[2, :]) / (2 * d)
    right = (3 * u[-1, :] - 4 * u[-2, :] + u[-3, :]) / (2 * d)
    bottom = (3 * u[:, 0] - 4 * u[:, 1] + u[:, 2]) / (2 * d)
    top = (3 * u[:, -1] - 4 * u[:, -2] + u[:, -3]) / (2 * d)

    edge_of_node = np.empty((n, n), dtype=complex)
    edge_of_node[:] = np.nan
    # fill non-corner boundary nodes, then overwrite corners with averages
    edge_of_node[0, 1:-1] = left[1:-1]
    edge_of_node[-1, 1:-1] = right[1:-1]
    edge_of_node[1:-1, 0] = bottom[1:-1]
    edge_of_node[1:-1, -1] = top[1:-1]
    edge_of_node[0, 0] = 0.5 * (left[0] + bottom[0])
    edge_of_node[-1, 0] = 0.5 * (right[0] + bottom[-1])
    edge_of_node[-1, -1] = 0.5 * (right[-1] + top[-1])
    edge_of_node[0, -1] = 0.5 * (left[-1] + top[0])

    bi, bj = grid.boundary_ij()
    return BoundaryData(grid, edge_of_node[bi, bj])


def boundary_integral(a: BoundaryData, b: BoundaryData) -> complex:
    """Composite trapezoid of a * conj(b) over the boundary.

    Each corner carries weight delta/2 from each incident edge, so every
    boundary node ends up with total weight delta; exact for edge-wise linear
    integrands.
    """
    if a.grid != b.grid:
        raise ValueError("boundary data live on different grids")
    return complex(a.grid.spacing * np.sum(a.values * np.conj(b.values)))


def interior_integral(f: ComplexField, weight, grid: Grid | None = None) -> complex:
    """Node-centered 2-D trapezoid of f(x) * weight(x) over the domain.

    `weight` is a callable weight(X, Y) -> array (or None for weight 1).
    Boundary nodes carry half weight, corners a quarter.
    """
    grid = grid or f.grid
    if grid != f.grid:
        raise ValueError("field grid mismatch")
    X, Y = grid.mesh()
    w = np.ones((grid.n, grid.n))
    w[0, :] *= 0.5
    w[-1, :] *= 0.5
    w[:, 0] *= 0.5
    w[:, -1] *= 0.5
    integrand = f.values * w
    if weight is not None:
        integrand = integrand * np.asarray(weight(X, Y), dtype=float)
    return complex(np.sum(integrand) * grid.spacing**2)


def write_field(f: ComplexField, path) -> None:
    """Dump one node per line: 'i j re im'."""
    with open(path, "w", encoding="ascii") as fh:
        for i in range(f.grid.n):
            for j in range(f.grid.n):
                v = f.values[i, j]
                fh.write(f"{i} {j} {float(v.real)!r} {float(v.imag)!r}\n")
