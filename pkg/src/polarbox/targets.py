"""Training target grids built from ground-truth quads.

A target set holds six grids at 1/stride resolution: a per-class Gaussian
center heatmap, sub-cell offsets, four polar angles, the shorter MBR side,
four polar ratios, and a binary center-semantic mask.  Regression grids
are defined only at object-center cells (see ``valid_mask``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codec import encode_polar
from .errors import InvalidInput
from .geometry import min_area_rect

DEFAULT_MIN_OVERLAP = 0.7


@dataclass
class TargetMaps:
    heatmap: np.ndarray    # (C, H/S, W/S) in [0, 1]
    offset: np.ndarray     # (2, H/S, W/S) cell fractions in [0, 1)
    angles: np.ndarray     # (4, H/S, W/S) radians
    shorter: np.ndarray    # (1, H/S, W/S) pixels at input scale
    ratios: np.ndarray     # (4, H/S, W/S)
    semantic: np.ndarray   # (C, H/S, W/S) in {0, 1}
    valid_mask: np.ndarray  # (H/S, W/S) bool, True at object-center cells
    stride: int = 4
    skipped: int = 0       # objects whose center fell outside the grid

    @property
    def num_classes(self) -> int:
        return self.heatmap.shape[0]


def gaussian_radius(box_h: float, box_w: float,
                    min_overlap: float = DEFAULT_MIN_OVERLAP) -> float:
    """Largest center displacement keeping axis-aligned IoU >= min_overlap.

    Minimum of the three quadratic cases (diagonal shift, symmetric shrink,
    symmetric grow), each solved for the root that actually satisfies the
    overlap constraint.
    """
    if box_h < 0 or box_w < 0:
        raise InvalidInput("box sides must be non-negative")
    if not 0.0 < min_overlap < 1.0:
        raise InvalidInput("min_overlap must lie in (0, 1)")
    h, w = float(box_h), float(box_w)

    b1 = h + w
    c1 = w * h * (1.0 - min_overlap) / (1.0 + min_overlap)
    r1 = (b1 - math.sqrt(max(b1 * b1 - 4.0 * c1, 0.0))) / 2.0

    b2 = 2.0 * (h + w)
    c2 = (1.0 - min_overlap) * w * h
    r2 = (b2 - math.sqrt(max(b2 * b2 - 16.0 * c2, 0.0))) / 8.0

    a3 = 4.0 * min_overlap
    b3 = -2.0 * min_overlap * (h + w)
    c3 = (min_overlap - 1.0) * w * h
    r3 = (-b3 + math.sqrt(max(b3 * b3 - 4.0 * a3 * c3, 0.0))) / (2.0 * a3)

    return max(min(r1, r2, r3), 0.0)


def draw_gaussian(heatmap: np.ndarray, center_cell, sigma: float) -> bool:
    """Max-composite a Gaussian peak onto one heatmap plane, in place.

    The kernel is written inside its 3-sigma footprint; the peak cell gets
    exactly 1.0.  Returns False (nothing drawn) when the center cell is out
    of bounds, so callers can count clipped objects.
    """
    if sigma <= 0:
        raise InvalidInput("sigma must be positive")
    height, width = heatmap.shape
    cx, cy = int(center_cell[0]), int(center_cell[1])
    if not (0 <= cx < width and 0 <= cy < height):
        return False
    reach = 3.0 * sigma
    span = int(math.ceil(reach))
    x0, x1 = max(cx - span, 0), min(cx + span, width - 1)
    y0, y1 = max(cy - span, 0), min(cy + span, height - 1)
    ys = np.arange(y0, y1 + 1)[:, None] - cy
    xs = np.arange(x0, x1 + 1)[None, :] - cx
    dist2 = xs * xs + ys * ys
    kernel = np.exp(-dist2 / (2.0 * sigma * sigma))
    kernel[dist2 > reach * reach] = 0.0
    region = heatmap[y0:y1 + 1, x0:x1 + 1]
    np.maximum(region, kernel, out=region)
    heatmap[cy, cx] = 1.0
    return True


def _fill_disc(plane: np.ndarray, center_cell, radius: float) -> None:
    height, width = plane.shape
    cx, cy = int(center_cell[0]), int(center_cell[1])
    span = int(math.ceil(radius))
    x0, x1 = max(cx - span, 0), min(cx + span, width - 1)
    y0, y1 = max(cy - span, 0), min(cy + span, height - 1)
    if x0 > x1 or y0 > y1:
        return
    ys = np.arange(y0, y1 + 1)[:, None] - cy
    xs = np.arange(x0, x1 + 1)[None, :] - cx
    mask = (xs * xs + ys * ys) <= radius * radius
    plane[y0:y1 + 1, x0:x1 + 1][mask] = 1.0


def build_targets(annotations, width: int, height: int, num_classes: int,
                  stride: int = 4,
                  min_overlap: float = DEFAULT_MIN_OVERLAP) -> TargetMaps:
    """Build all target grids from (quad, class_id) pairs.

    Objects whose center cell falls outside the grid are skipped and
    counted.  When two objects share a center cell the later one overwrites
    the regression targets; the heatmap keeps the cellwise max.
    """
    if width % stride or height % stride:
        raise InvalidInput("width and height must be divisible by the stride")
    if num_classes < 1:
        raise InvalidInput("need at least one class")
    gw, gh = width // stride, height // stride

    maps = TargetMaps(
        heatmap=np.zeros((num_classes, gh, gw)),
        offset=np.zeros((2, gh, gw)),
        angles=np.zeros((4, gh, gw)),
        shorter=np.zeros((1, gh, gw)),
        ratios=np.zeros((4, gh, gw)),
        semantic=np.zeros((num_classes, gh, gw)),
        valid_mask=np.zeros((gh, gw), dtype=bool),
        stride=stride,
    )

    for quad, class_id in annotations:
        class_id = int(class_id)
        if not 0 <= class_id < num_classes:
            raise InvalidInput(f"class id {class_id} outside [0, {num_classes})")
        code = encode_polar(quad, stride)
        col = int(math.floor(code.center[0] / stride))
        row = int(math.floor(code.center[1] / stride))
        if not (0 <= col < gw and 0 <= row < gh):
            maps.skipped += 1
            continue

        rect = min_area_rect(quad)
        radius = gaussian_radius(rect.h / stride, rect.w / stride, min_overlap)
        sigma = (2.0 * radius + 1.0) / 6.0
        if not draw_gaussian(maps.heatmap[class_id], (col, row), sigma):
            maps.skipped += 1
            continue
        # disc footprint = the kernel's 3-sigma ball, so the binary mask
        # covers exactly the cells where heat >= exp(-4.5)
        _fill_disc(maps.semantic[class_id], (col, row), 3.0 * sigma)

        maps.offset[:, row, col] = code.offset
        maps.angles[:, row, col] = code.theta
        maps.shorter[0, row, col] = code.s
        maps.ratios[:, row, col] = code.r
        maps.valid_mask[row, col] = True

    return maps
