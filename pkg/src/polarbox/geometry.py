"""Exact planar primitives for quadrilaterals in image coordinates.

Conventions used throughout the package:

* x grows rightward, y grows downward (image axes).
* A quad is a (4, 2) float array of vertices in cyclic order.
* The canonical cycle starts at the vertex with minimum y (ties broken by
  minimum x) and runs in the direction of ascending polar angle about the
  interior, which is the negative-shoelace orientation under image axes.
* A rotated rectangle is (cx, cy, w, h, angle) with angle in degrees in
  (-90, 0]; its corners are center + R(angle) @ (+-w/2, +-h/2) with
  R = [[cos, -sin], [sin, cos]].

The small fixed-size kernels (hull, calipers, clipping) run on plain floats;
numpy only wraps the public boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry, InvalidInput, NonConvexInput

AREA_EPS = 1e-9  # pixels^2 below which a polygon counts as degenerate


@dataclass(frozen=True)
class RotatedRect:
    """Five-parameter oriented rectangle under the legacy OpenCV convention."""

    cx: float
    cy: float
    w: float
    h: float
    angle: float  # degrees, in (-90, 0]

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise InvalidInput(f"rect sides must be positive, got w={self.w}, h={self.h}")
        if not (-90.0 < self.angle <= 0.0):
            raise InvalidInput(f"rect angle must lie in (-90, 0], got {self.angle}")

    @property
    def area(self) -> float:
        return self.w * self.h


def _as_point_list(points, minimum: int) -> list[tuple[float, float]]:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidInput(f"expected an (N, 2) point array, got shape {arr.shape}")
    if arr.shape[0] < minimum:
        raise InvalidInput(f"need at least {minimum} points, got {arr.shape[0]}")
    if not np.isfinite(arr).all():
        raise InvalidInput("points must be finite")
    return [(float(x), float(y)) for x, y in arr]


def as_quad(q) -> np.ndarray:
    """Validate and return a quad as a (4, 2) float64 array."""
    arr = np.asarray(q, dtype=float)
    if arr.shape != (4, 2):
        raise InvalidInput(f"a quad must have shape (4, 2), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidInput("quad vertices must be finite")
    return arr


def _signed_area(verts: list[tuple[float, float]]) -> float:
    total = 0.0
    n = len(verts)
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        total += x0 * y1 - x1 * y0
    return 0.5 * total


def polygon_area(vertices) -> float:
    """Absolute shoelace area of a simple polygon (>= 3 vertices)."""
    verts = _as_point_list(vertices, minimum=3)
    return abs(_signed_area(verts))


def canonicalize_quad(q) -> np.ndarray:
    """Rotate/reflect a quad's vertex list into the canonical cycle.

    The vertex set is unchanged. Raises DegenerateGeometry when the
    shoelace area is at or below AREA_EPS.
    """
    arr = as_quad(q)
    verts = [(float(x), float(y)) for x, y in arr]
    signed = _signed_area(verts)
    if abs(signed) <= AREA_EPS:
        raise DegenerateGeometry("quad area is below the degeneracy threshold")
    if signed > 0.0:
        verts.reverse()
    start = min(range(4), key=lambda i: (verts[i][1], verts[i][0]))
    cycle = verts[start:] + verts[:start]
    return np.array(cycle, dtype=float)


def _convex_hull(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Andrew monotone chain; collinear points on the boundary are dropped."""
    pts = sorted(set(points))
    if len(pts) < 3:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def min_area_rect(points) -> RotatedRect:
    """Smallest-area rotated rectangle containing the points.

    Runs calipers over the convex hull: the optimum is aligned with some
    hull edge, so each edge direction is tested and the minimal candidate
    kept. Ties are broken by the angle closest to 0, then by larger w.
    """
    pts = _as_point_list(points, minimum=3)
    hull = _convex_hull(pts)
    if len(hull) < 3:
        raise DegenerateGeometry("points are collinear or coincident")

    candidates = []  # (area, angle, w, h, cx, cy)
    n = len(hull)
    for i in range(n):
        x0, y0 = hull[i]
        x1, y1 = hull[(i + 1) % n]
        ex, ey = x1 - x0, y1 - y0
        length = math.hypot(ex, ey)
        if length <= 0.0:
            continue
        ux, uy = ex / length, ey / length
        vx, vy = -uy, ux
        pu = [px * ux + py * uy for px, py in hull]
        pv = [px * vx + py * vy for px, py in hull]
        min_u, max_u = min(pu), max(pu)
        min_v, max_v = min(pv), max(pv)
        len_u = max_u - min_u
        len_v = max_v - min_v
        cu = 0.5 * (min_u + max_u)
        cv = 0.5 * (min_v + max_v)
        cx = ux * cu + vx * cv
        cy = uy * cu + vy * cv

        phi = math.degrees(math.atan2(uy, ux))
        m = phi % 90.0
        angle = 0.0 if m == 0.0 else m - 90.0
        quarter_turns = round((phi - angle) / 90.0)
        if quarter_turns % 2:
            w, h = len_v, len_u
        else:
            w, h = len_u, len_v
        candidates.append((len_u * len_v, angle, w, h, cx, cy))

    best_area = min(c[0] for c in candidates)
    tol = 1e-9 * max(1.0, best_area)
    tied = [c for c in candidates if c[0] <= best_area + tol]
    # angle closest to 0 == largest angle in (-90, 0]; then larger w
    _, angle, w, h, cx, cy = max(tied, key=lambda c: (c[1], c[2]))
    if w <= 0.0 or h <= 0.0:
        raise DegenerateGeometry("minimal rectangle has no extent")
    return RotatedRect(cx, cy, w, h, angle)


def rect_to_quad(r: RotatedRect) -> np.ndarray:
    """Corners of a rotated rectangle, in canonical cycle order."""
    theta = math.radians(r.angle)
    c, s = math.cos(theta), math.sin(theta)
    hw, hh = 0.5 * r.w, 0.5 * r.h
    corners = []
    for dx, dy in ((-hw, -hh), (-hw, hh), (hw, hh), (hw, -hh)):
        corners.append((r.cx + dx * c - dy * s, r.cy + dx * s + dy * c))
    return canonicalize_quad(corners)


def _convexity_sign(verts: list[tuple[float, float]]) -> int:
    """-1 or +1 for a convex cycle; raises NonConvexInput on mixed turns."""
    n = len(verts)
    span = max(
        max(abs(x) for x, _ in verts), max(abs(y) for _, y in verts), 1.0
    )
    tol = 1e-9 * span * span
    sign = 0
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        cx, cy = verts[(i + 2) % n]
        cross = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if abs(cross) <= tol:
            continue
        s = 1 if cross > 0 else -1
        if sign == 0:
            sign = s
        elif s != sign:
            raise NonConvexInput("polygon is not convex")
    if sign == 0:
        raise DegenerateGeometry("polygon has no area")
    return sign


def _clip_convex(subject: list[tuple[float, float]],
                 clip: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Sutherland-Hodgman clip of a convex subject by a convex clip polygon.

    The clip polygon must be in negative-shoelace (canonical) orientation;
    points on an edge count as inside.
    """
    output = subject
    n = len(clip)
    for i in range(n):
        if not output:
            return []
        cx0, cy0 = clip[i]
        cx1, cy1 = clip[(i + 1) % n]
        ex, ey = cx1 - cx0, cy1 - cy0
        input_list = output
        output = []
        sx, sy = input_list[-1]
        s_in = ex * (sy - cy0) - ey * (sx - cx0) <= 0.0
        for px, py in input_list:
            p_in = ex * (py - cy0) - ey * (px - cx0) <= 0.0
            if p_in != s_in:
                # edge crossing: intersect segment (s, p) with the clip line
                dx, dy = px - sx, py - sy
                denom = ex * dy - ey * dx
                if denom != 0.0:
                    t = (ex * (cy0 - sy) - ey * (cx0 - sx)) / denom
                    output.append((sx + t * dx, sy + t * dy))
            if p_in:
                output.append((px, py))
            sx, sy, s_in = px, py, p_in
    return output


def convex_intersection(a, b) -> np.ndarray:
    """Vertices of the intersection of two convex quads (possibly empty)."""
    va = [(float(x), float(y)) for x, y in as_quad(a)]
    vb = [(float(x), float(y)) for x, y in as_quad(b)]
    _convexity_sign(va)
    if _convexity_sign(vb) > 0:
        vb.reverse()
    out = _clip_convex(va, vb)
    return np.array(out, dtype=float).reshape(-1, 2)


def _iou_convex(va: list[tuple[float, float]],
                vb: list[tuple[float, float]],
                area_a: float, area_b: float) -> float:
    """IoU of two convex polygons given their areas; no validation."""
    if _signed_area(vb) > 0.0:
        vb = list(reversed(vb))
    inter_verts = _clip_convex(va, vb)
    if len(inter_verts) < 3:
        return 0.0
    inter = abs(_signed_area(inter_verts))
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def iou_quad(a, b) -> float:
    """Intersection-over-union of two convex, non-degenerate quads."""
    va = [(float(x), float(y)) for x, y in as_quad(a)]
    vb = [(float(x), float(y)) for x, y in as_quad(b)]
    _convexity_sign(va)
    _convexity_sign(vb)
    area_a = abs(_signed_area(va))
    area_b = abs(_signed_area(vb))
    if area_a <= AREA_EPS or area_b <= AREA_EPS:
        raise DegenerateGeometry("iou of a degenerate quad is undefined")
    return _iou_convex(va, vb, area_a, area_b)


def rotate_quad(q, center, phi: float) -> np.ndarray:
    """Rigidly rotate a quad about ``center`` by ``phi`` radians."""
    arr = as_quad(q)
    cx, cy = float(center[0]), float(center[1])
    c, s = math.cos(phi), math.sin(phi)
    dx = arr[:, 0] - cx
    dy = arr[:, 1] - cy
    out = np.empty_like(arr)
    out[:, 0] = cx + dx * c - dy * s
    out[:, 1] = cy + dx * s + dy * c
    return out
