"""Conversions between quads and the box parameterizations under study.

The polar code describes a target by the center of its minimum bounding
rectangle, the sub-cell offset of that center at a given feature stride,
four polar angles (one per vertex, measured from the +y image axis,
increasing toward +x, in [0, 2pi)), the shorter MBR side s, and four
ratios r_p = s / ||V_p - C||.  For rectangles every ratio lands in
(0, sqrt(2)], with sqrt(2) attained exactly on squares.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry, InvalidInput, NonFiniteDiameter
from .geometry import (
    RotatedRect,
    as_quad,
    canonicalize_quad,
    min_area_rect,
    rect_to_quad,
)

TWO_PI = 2.0 * math.pi
RATIO_EPS = 1e-6  # ratios at or below this cannot produce a finite diameter


@dataclass
class PolarCode:
    """Polar target encoding; ``theta[p]`` is paired with ``r[p]``."""

    center: np.ndarray  # (2,) pixels, MBR center
    offset: np.ndarray  # (2,) cell fraction in [0, 1) at the encoding stride
    theta: np.ndarray   # (4,) radians in [0, 2pi), ascending
    s: float            # shorter MBR side, pixels
    r: np.ndarray       # (4,) shorter side / polar diameter


@dataclass
class EightParam:
    """Center plus four vertex offsets (lossless quad description)."""

    center: np.ndarray  # (2,)
    dv: np.ndarray      # (4, 2) vertex - center


class RepresentationKind(enum.Enum):
    SINGLE_ANGLE = "single_angle"
    POLAR_DIRECT = "polar_direct"
    POLAR_AVERAGE = "polar_average"
    POLAR_LONGER_RATIO = "polar_longer_ratio"
    POLAR_SHORTER_RATIO = "polar_shorter_ratio"


def polar_angle_of(center, vertex) -> float:
    """Polar angle of ``vertex`` about ``center``: 0 at +y, pi/2 at +x."""
    vx = float(vertex[0]) - float(center[0])
    vy = float(vertex[1]) - float(center[1])
    if math.hypot(vx, vy) <= 1e-12:
        raise DegenerateGeometry("vertex coincides with the center")
    return math.atan2(vx, vy) % TWO_PI


def _check_stride(stride: int) -> int:
    if int(stride) != stride or stride < 1:
        raise InvalidInput(f"stride must be an integer >= 1, got {stride}")
    return int(stride)


def _polar_parts(q) -> tuple[RotatedRect, np.ndarray, np.ndarray, np.ndarray]:
    """MBR plus per-vertex (theta, diameter) sorted by ascending theta."""
    quad = canonicalize_quad(q)
    rect = min_area_rect(quad)
    cx, cy = rect.cx, rect.cy
    thetas = np.empty(4)
    diams = np.empty(4)
    for i, (vx, vy) in enumerate(quad):
        dx, dy = vx - cx, vy - cy
        d = math.hypot(dx, dy)
        if d <= 1e-12:
            raise DegenerateGeometry("quad vertex coincides with its MBR center")
        thetas[i] = math.atan2(dx, dy) % TWO_PI
        diams[i] = d
    order = np.argsort(thetas, kind="stable")
    return rect, np.array([cx, cy]), thetas[order], diams[order]


def encode_polar(q, stride: int = 4) -> PolarCode:
    """Encode a convex quad as a polar code at the given feature stride."""
    stride = _check_stride(stride)
    rect, center, thetas, diams = _polar_parts(q)
    s = min(rect.w, rect.h)
    scaled = center / stride
    offset = scaled - np.floor(scaled)
    return PolarCode(center=center, offset=offset, theta=thetas, s=s, r=s / diams)


def decode_polar(code: PolarCode, stride: int = 4) -> np.ndarray:
    """Invert a polar code back to a canonical quad.

    Uses the stored center directly; map decoding reconstructs the center
    as (cell + offset) * stride before calling this.
    """
    _check_stride(stride)
    r = np.asarray(code.r, dtype=float)
    if (r <= RATIO_EPS).any():
        raise NonFiniteDiameter("ratio too small to invert into a diameter")
    theta = np.asarray(code.theta, dtype=float)
    d = float(code.s) / r
    cx, cy = float(code.center[0]), float(code.center[1])
    verts = np.stack([cx + d * np.sin(theta), cy + d * np.cos(theta)], axis=1)
    return canonicalize_quad(verts)


def quad_to_five(q) -> RotatedRect:
    """Five-parameter view of a quad (its MBR; lossy for non-rectangles)."""
    return min_area_rect(as_quad(q))


def five_to_quad(r: RotatedRect) -> np.ndarray:
    return rect_to_quad(r)


def quad_to_eight(q) -> EightParam:
    """Eight-parameter view: MBR center plus vertex offsets (lossless)."""
    quad = canonicalize_quad(q)
    rect = min_area_rect(quad)
    center = np.array([rect.cx, rect.cy])
    return EightParam(center=center, dv=quad - center)


def eight_to_quad(e: EightParam) -> np.ndarray:
    return as_quad(np.asarray(e.center, dtype=float) + np.asarray(e.dv, dtype=float))


def normalized_rect(cx: float, cy: float, w: float, h: float,
                    angle: float) -> RotatedRect:
    """Build a RotatedRect from free-floating five parameters.

    The angle is folded into (-90, 0] by quarter turns, swapping w and h on
    odd turns, so geometrically equivalent parameter vectors map to the
    same rectangle.
    """
    if not all(math.isfinite(v) for v in (cx, cy, w, h, angle)):
        raise InvalidInput("rectangle parameters must be finite")
    m = angle % 90.0
    folded = 0.0 if m == 0.0 else m - 90.0
    if round((angle - folded) / 90.0) % 2:
        w, h = h, w
    return RotatedRect(cx, cy, w, h, folded)


def _wrap_angles(theta: np.ndarray) -> np.ndarray:
    return np.mod(theta, TWO_PI)


def encode_variant(q, kind: RepresentationKind) -> np.ndarray:
    """Parameter vector for one of the studied box representations.

    Layouts:
      SINGLE_ANGLE        [cx, cy, w, h, angle_deg]
      POLAR_DIRECT        [cx, cy, t1..t4, d1..d4]
      POLAR_AVERAGE       [cx, cy, t1..t4, d_mean, k1..k4] with k = d_mean/d
      POLAR_LONGER_RATIO  [cx, cy, t1..t4, s_long, r1..r4] with r = s_long/d
      POLAR_SHORTER_RATIO [cx, cy, t1..t4, s_short, r1..r4] (the polar code)
    """
    if kind == RepresentationKind.SINGLE_ANGLE:
        rect = quad_to_five(q)
        return np.array([rect.cx, rect.cy, rect.w, rect.h, rect.angle])
    rect, center, thetas, diams = _polar_parts(q)
    if kind == RepresentationKind.POLAR_DIRECT:
        return np.concatenate([center, thetas, diams])
    if kind == RepresentationKind.POLAR_AVERAGE:
        d_mean = float(diams.mean())
        return np.concatenate([center, thetas, [d_mean], d_mean / diams])
    if kind == RepresentationKind.POLAR_LONGER_RATIO:
        s_long = max(rect.w, rect.h)
        return np.concatenate([center, thetas, [s_long], s_long / diams])
    if kind == RepresentationKind.POLAR_SHORTER_RATIO:
        s_short = min(rect.w, rect.h)
        return np.concatenate([center, thetas, [s_short], s_short / diams])
    raise InvalidInput(f"unknown representation kind: {kind!r}")


def variant_length(kind: RepresentationKind) -> int:
    return {
        RepresentationKind.SINGLE_ANGLE: 5,
        RepresentationKind.POLAR_DIRECT: 10,
        RepresentationKind.POLAR_AVERAGE: 11,
        RepresentationKind.POLAR_LONGER_RATIO: 11,
        RepresentationKind.POLAR_SHORTER_RATIO: 11,
    }[kind]


def _variant_vertices(vec, kind: RepresentationKind) -> list[tuple[float, float]]:
    """Raw decoded vertices (no canonical ordering); shared by decode paths."""
    v = [float(x) for x in vec]
    if len(v) != variant_length(kind):
        raise InvalidInput(
            f"{kind.value} expects {variant_length(kind)} parameters, got {len(v)}"
        )
    if kind == RepresentationKind.SINGLE_ANGLE:
        cx, cy, w, h, angle = v
        rect = normalized_rect(cx, cy, w, h, angle)
        return [(float(x), float(y)) for x, y in rect_to_quad(rect)]
    cx, cy = v[0], v[1]
    thetas = v[2:6]
    if kind == RepresentationKind.POLAR_DIRECT:
        diams = v[6:10]
    else:
        scale, ks = v[6], v[7:11]
        if any(k <= RATIO_EPS for k in ks):
            raise NonFiniteDiameter("ratio too small to invert into a diameter")
        diams = [scale / k for k in ks]
    return [
        (cx + d * math.sin(t % TWO_PI), cy + d * math.cos(t % TWO_PI))
        for t, d in zip(thetas, diams)
    ]


def decode_variant(vec, kind: RepresentationKind) -> np.ndarray:
    """Invert ``encode_variant`` for any representation kind."""
    return canonicalize_quad(_variant_vertices(vec, kind))
