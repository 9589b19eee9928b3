"""Figure emission: one SVG per run directory, drawn from the persisted
tables only (the numeric pipeline stays headless).

Contents: domain outline, true inclusion shapes, true convex hull (dashed),
reconstructed hull (solid), and one faint support line x.omega = t_hat per
estimated direction; failed directions are marked with a dashed ray.
"""
from __future__ import annotations

import math
from pathlib import Path

from .config import load_config
from .geometry import Disk, RectShape, true_hull_polygon
from .runner import read_table

__all__ = ["emit_figure"]

_SIZE = 640.0
_PAD = 0.08


def emit_figure(artifact_dir) -> Path:
    art = Path(artifact_dir)
    manifest = art / "manifest.toml"
    support = art / "support.txt"
    hull_file = art / "hull.txt"
    for p in (manifest, support, hull_file):
        if not p.exists():
            raise FileNotFoundError(f"missing artifact {p}")
    cfg = load_config(manifest)
    scene = cfg.scene

    x0, x1, y0, y1 = scene.rect
    span = max(x1 - x0, y1 - y0)
    pad = _PAD * span
    scale = _SIZE / (span + 2 * pad)

    def to_px(x, y):
        return ((x - x0 + pad) * scale, (y1 - y + pad) * scale)

    def pts_attr(points):
        return " ".join(f"{px:.2f},{py:.2f}" for px, py in (to_px(x, y) for x, y in points))

    svg: list[str] = []
    height = _SIZE
    svg.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE:.0f}" '
               f'height="{height + 90:.0f}" viewBox="0 0 {_SIZE:.0f} {height + 90:.0f}">')
    svg.append('<rect width="100%" height="100%" fill="white"/>')

    # support lines first so everything else draws on top
    header, rows = read_table(support)
    col = {name: i for i, name in enumerate(header)}
    n_failed = 0
    n_lines = 0
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    for r in rows:
        theta = float(r[col["theta"]])
        verdict = r[col["verdict"]]
        omega = (math.cos(theta), math.sin(theta))
        if verdict == "failed":
            n_failed += 1
            tip = (cx + 0.45 * span * omega[0], cy + 0.45 * span * omega[1])
            a, b = to_px(cx, cy), to_px(*tip)
            svg.append(f'<line class="failed-direction" x1="{a[0]:.2f}" y1="{a[1]:.2f}" '
                       f'x2="{b[0]:.2f}" y2="{b[1]:.2f}" stroke="#cc2222" '
                       f'stroke-dasharray="3,5" stroke-width="1.5"/>')
            continue
        t_hat = float(r[col["t_hat"]])
        if not math.isfinite(t_hat):
            continue
        seg = _line_in_rect(omega, t_hat, scene.rect)
        if seg is None:
            continue
        (ax, ay), (bx, by) = seg
        a, b = to_px(ax, ay), to_px(bx, by)
        svg.append(f'<line class="support-line" x1="{a[0]:.2f}" y1="{a[1]:.2f}" '
                   f'x2="{b[0]:.2f}" y2="{b[1]:.2f}" stroke="#99bbdd" stroke-width="0.8"/>')
        n_lines += 1

    # domain outline
    svg.append('<polygon class="domain" points="'
               + pts_attr([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])
               + '" fill="none" stroke="black" stroke-width="1.5"/>')

    # true shapes
    for shape in scene.inclusions:
        if isinstance(shape, Disk):
            c = to_px(*shape.center)
            svg.append(f'<circle class="true-shape" cx="{c[0]:.2f}" cy="{c[1]:.2f}" '
                       f'r="{shape.radius * scale:.2f}" fill="#cfe3f5" '
                       f'stroke="#336699" stroke-width="1"/>')
        elif isinstance(shape, RectShape):
            bx0, bx1, by0, by1 = shape.bounds
            svg.append('<polygon class="true-shape" points="'
                       + pts_attr([(bx0, by0), (bx1, by0), (bx1, by1), (bx0, by1)])
                       + '" fill="#cfe3f5" stroke="#336699" stroke-width="1"/>')
        else:
            svg.append('<polygon class="true-shape" points="'
                       + pts_attr(shape.vertices)
                       + '" fill="#cfe3f5" stroke="#336699" stroke-width="1"/>')

    # true convex hull, dashed
    if scene.has_inclusions:
        true_hull = true_hull_polygon(scene, 512)
        svg.append('<polygon class="true-hull" points="' + pts_attr(true_hull.vertices)
                   + '" fill="none" stroke="#336699" stroke-width="1.2" '
                     'stroke-dasharray="6,4"/>')

    # reconstructed hull, solid
    hull_text = hull_file.read_text(encoding="ascii").strip()
    hull_pts = [tuple(float(v) for v in ln.split()) for ln in hull_text.splitlines() if ln]
    if len(hull_pts) >= 3:
        svg.append('<polygon class="reconstructed-hull" points="' + pts_attr(hull_pts)
                   + '" fill="none" stroke="#cc2222" stroke-width="2"/>')

    legend = [f"directions: {len(rows)}, support lines: {n_lines}"]
    if n_failed:
        legend.append(f"failed directions: {n_failed} (dashed red rays)")
    if len(hull_pts) >= 3:
        legend.append("solid red: reconstructed hull; dashed blue: true hull")
    else:
        legend.append("no inclusion detected (empty hull)")
    for i, line in enumerate(legend):
        svg.append(f'<text x="10" y="{height + 24 + 20 * i:.0f}" '
                   f'font-family="monospace" font-size="13">{line}</text>')
    svg.append("</svg>")

    out = art / "figure.svg"
    out.write_text("\n".join(svg) + "\n", encoding="ascii")
    return out


def _line_in_rect(omega, t, rect):
    """Segment of the line x.omega = t inside the rectangle (None if outside)."""
    x0, x1, y0, y1 = rect
    wx, wy = omega
    px, py = -wy, wx
    base = (t * wx, t * wy)
    span = math.hypot(x1 - x0, y1 - y0) * 2.0
    a = (base[0] - span * px, base[1] - span * py)
    b = (base[0] + span * px, base[1] + span * py)
    # Liang-Barsky clip of segment ab to the rectangle
    dx, dy = b[0] - a[0], b[1] - a[1]
    t_lo, t_hi = 0.0, 1.0
    for p, q in ((-dx, a[0] - x0), (dx, x1 - a[0]), (-dy, a[1] - y0), (dy, y1 - a[1])):
        if p == 0.0:
            if q < 0.0:
                return None
            continue
        r = q / p
        if p < 0.0:
            t_lo = max(t_lo, r)
        else:
            t_hi = min(t_hi, r)
        if t_lo > t_hi:
            return None
    return ((a[0] + t_lo * dx, a[1] + t_lo * dy),
            (a[0] + t_hi * dx, a[1] + t_hi * dy))
