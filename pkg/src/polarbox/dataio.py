"""DOTA-format annotation/result text I/O and the large-image tiling protocol.

Pixels are never touched here; everything operates on coordinates.  Result
files follow the Task1 convention: one file per class, lines of
``imgname score x1 y1 x2 y2 x3 y3 x4 y4`` with the score at 4 decimals and
coordinates at 2.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidInput, ParseError
from .geometry import as_quad, convex_intersection, polygon_area
from .postprocess import Detection, rotated_nms

DEFAULT_PATCH = 1024
DEFAULT_OVERLAP = 200
DEFAULT_KEEP_RATIO = 0.7
DEFAULT_MERGE_IOU = 0.3

_HEADER_PREFIXES = ("imagesource", "gsd")


@dataclass
class Annotation:
    quad: np.ndarray  # (4, 2), vertex order as given in the source file
    category: str
    difficult: bool = False


@dataclass(frozen=True)
class Window:
    x0: int
    y0: int
    w: int
    h: int


def parse_dota_annotation(text: str) -> list[Annotation]:
    """Parse DOTA-style annotation text.

    Header lines beginning with ``imagesource`` or ``gsd`` are skipped; every
    other non-empty line must hold 8 coordinates, a category token and a 0/1
    difficulty flag, whitespace-separated.
    """
    annotations = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.lower().startswith(_HEADER_PREFIXES):
            continue
        tokens = line.split()
        if len(tokens) != 10:
            raise ParseError(f"expected 10 fields, got {len(tokens)}", lineno)
        try:
            coords = [float(t) for t in tokens[:8]]
        except ValueError as exc:
            raise ParseError(f"bad coordinate: {exc}", lineno) from None
        category = tokens[8]
        if tokens[9] not in ("0", "1"):
            raise ParseError(f"difficulty flag must be 0 or 1, got {tokens[9]!r}", lineno)
        quad = np.array(coords, dtype=float).reshape(4, 2)
        annotations.append(Annotation(quad=quad, category=category,
                                      difficult=tokens[9] == "1"))
    return annotations


def format_annotation_line(annotation: Annotation, precision: int = 6) -> str:
    coords = " ".join(f"{v:.{precision}f}" for v in np.asarray(annotation.quad).ravel())
    return f"{coords} {annotation.category} {int(annotation.difficult)}"


def write_dota_results(dets_by_image: Mapping[str, Sequence[Detection]],
                       class_names: Sequence[str]) -> dict[str, str]:
    """Render detections into per-class Task1 text bodies.

    Returns ``{class_name: text}``; callers write each text to
    ``Task1_<class>.txt``.  Images and detections are emitted in the order
    given.
    """
    lines: dict[str, list[str]] = {name: [] for name in class_names}
    for image, dets in dets_by_image.items():
        for det in dets:
            name = class_names[det.class_id]
            coords = " ".join(f"{v:.2f}" for v in np.asarray(det.quad).ravel())
            lines[name].append(f"{image} {det.score:.4f} {coords}")
    return {name: "\n".join(body) + "\n" if body else ""
            for name, body in lines.items()}


def parse_dota_results(text: str) -> list[tuple[str, float, np.ndarray]]:
    """Parse one Task1 result body into (imgname, score, quad) tuples."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 10:
            raise ParseError(f"expected 10 fields, got {len(tokens)}", lineno)
        try:
            score = float(tokens[1])
            coords = [float(t) for t in tokens[2:]]
        except ValueError as exc:
            raise ParseError(f"bad number: {exc}", lineno) from None
        out.append((tokens[0], score, np.array(coords).reshape(4, 2)))
    return out


def _positions(dim: int, patch: int, stride: int) -> list[int]:
    if dim <= patch:
        return [0]
    last = dim - patch
    count = -(-last // stride)  # ceil division
    seen = sorted({min(k * stride, last) for k in range(count + 1)})
    return seen


def split_windows(width: int, height: int, patch: int = DEFAULT_PATCH,
                  overlap: int = DEFAULT_OVERLAP) -> list[Window]:
    """Sliding windows covering the full image.

    Positions advance by ``patch - overlap``; the final position clamps to
    the image edge.  Images smaller than the patch yield a single
    full-image window.
    """
    if overlap < 0 or patch <= overlap:
        raise InvalidInput("need patch > overlap >= 0")
    if width < 1 or height < 1:
        raise InvalidInput("image dimensions must be positive")
    stride = patch - overlap
    win_w = min(patch, width)
    win_h = min(patch, height)
    return [Window(x, y, win_w, win_h)
            for y in _positions(height, patch, stride)
            for x in _positions(width, patch, stride)]


def _window_quad(win: Window) -> np.ndarray:
    return np.array([
        (win.x0, win.y0),
        (win.x0, win.y0 + win.h),
        (win.x0 + win.w, win.y0 + win.h),
        (win.x0 + win.w, win.y0),
    ], dtype=float)


def remap_annotations_to_window(annotations: Iterable[Annotation], win: Window,
                                keep_ratio: float = DEFAULT_KEEP_RATIO
                                ) -> list[Annotation]:
    """Translate annotations into window coordinates and filter by coverage.

    An instance is kept whole (never clipped; coordinates may leave the
    window) when at least ``keep_ratio`` of its area lies inside the window;
    partially covered instances are kept but marked difficult; instances
    with no overlap are dropped.
    """
    win_quad = _window_quad(win)
    shift = np.array([win.x0, win.y0], dtype=float)
    kept = []
    for ann in annotations:
        quad = as_quad(ann.quad)
        inter = convex_intersection(quad, win_quad)
        inter_area = polygon_area(inter) if len(inter) >= 3 else 0.0
        area = polygon_area(quad)
        ratio = inter_area / area if area > 0 else 0.0
        if ratio <= 0.0:
            continue
        moved = quad - shift
        if ratio >= keep_ratio:
            kept.append(replace(ann, quad=moved))
        else:
            kept.append(replace(ann, quad=moved, difficult=True))
    return kept


def merge_patch_detections(per_window: Sequence[tuple[Window, Sequence[Detection]]],
                           iou_threshold: float = DEFAULT_MERGE_IOU
                           ) -> list[Detection]:
    """Map per-window detections back to source coordinates and deduplicate.

    Quads are translated by their window origin, concatenated in the given
    order, then reduced by class-wise rotated NMS (duplicates across
    overlapping windows are near-identical, hence the low default
    threshold).
    """
    moved = []
    for win, dets in per_window:
        shift = np.array([win.x0, win.y0], dtype=float)
        for det in dets:
            moved.append(replace(det, quad=as_quad(det.quad) + shift))
    return rotated_nms(moved, iou_threshold)
