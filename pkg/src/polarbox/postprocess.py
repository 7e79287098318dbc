"""Turn predicted maps into detections: peaks, fusion, decoding, rotated NMS."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import PolarCode, decode_polar
from .errors import InvalidInput, NonFiniteDiameter
from .geometry import _convexity_sign, _iou_convex, _signed_area, as_quad

DEFAULT_TOP_K = 100
DEFAULT_SCORE_THRESHOLD = 0.05
DEFAULT_NMS_IOU = 0.5


@dataclass(eq=False)
class Detection:
    class_id: int
    score: float
    quad: np.ndarray  # (4, 2)


def fuse_center_semantic(heatmap, semantic_pred) -> np.ndarray:
    """Pixel-wise product of the center heatmap and the semantic scores."""
    h = np.asarray(heatmap, dtype=float)
    s = np.asarray(semantic_pred, dtype=float)
    if h.shape != s.shape:
        raise InvalidInput(f"shape mismatch: {h.shape} vs {s.shape}")
    return h * s


def extract_peaks(score_map, top_k: int = DEFAULT_TOP_K,
                  threshold: float = DEFAULT_SCORE_THRESHOLD):
    """Cells that dominate their 8-neighborhood and clear the threshold.

    Returns up to ``top_k`` tuples (class_id, (row, col), score) sorted by
    descending score; ties break by ascending (class, row, col).
    """
    scores = np.asarray(score_map, dtype=float)
    if scores.ndim != 3:
        raise InvalidInput(f"expected a (C, H, W) score map, got {scores.shape}")
    if top_k < 1:
        raise InvalidInput("top_k must be >= 1")
    if not 0.0 <= threshold <= 1.0:
        raise InvalidInput("threshold must lie in [0, 1]")

    padded = np.pad(scores, ((0, 0), (1, 1), (1, 1)), constant_values=-np.inf)
    neighbor_max = np.full_like(scores, -np.inf)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            shifted = padded[:, 1 + dr:1 + dr + scores.shape[1],
                             1 + dc:1 + dc + scores.shape[2]]
            np.maximum(neighbor_max, shifted, out=neighbor_max)
    is_peak = (scores >= neighbor_max) & (scores >= threshold)

    cs, rs, cols = np.nonzero(is_peak)
    vals = scores[cs, rs, cols]
    order = sorted(range(len(vals)),
                   key=lambda i: (-vals[i], cs[i], rs[i], cols[i]))
    return [(int(cs[i]), (int(rs[i]), int(cols[i])), float(vals[i]))
            for i in order[:top_k]]


def decode_detections(peaks, offset_map, angle_map, shorter_map, ratio_map,
                      stride: int = 4):
    """Assemble a polar code at each peak cell and decode it to a quad.

    Peaks whose ratios cannot be inverted are skipped; the skip count is
    returned alongside the detections.
    """
    detections: list[Detection] = []
    skipped = 0
    for class_id, (row, col), score in peaks:
        delta = np.asarray(offset_map, dtype=float)[:, row, col]
        center = np.array([(col + delta[0]) * stride, (row + delta[1]) * stride])
        code = PolarCode(
            center=center,
            offset=delta,
            theta=np.asarray(angle_map, dtype=float)[:, row, col],
            s=float(np.asarray(shorter_map, dtype=float)[0, row, col]),
            r=np.asarray(ratio_map, dtype=float)[:, row, col],
        )
        try:
            quad = decode_polar(code, stride)
        except NonFiniteDiameter:
            skipped += 1
            continue
        detections.append(Detection(class_id=class_id, score=score, quad=quad))
    return detections, skipped


def rotated_nms(detections, iou_threshold: float = DEFAULT_NMS_IOU):
    """Greedy class-wise suppression with exact rotated IoU.

    Detections are visited in descending score (ties by input index); one is
    kept iff its IoU with every kept same-class detection stays below the
    threshold.  Axis-aligned bounding boxes prefilter the exact IoU tests.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise InvalidInput("iou_threshold must lie in [0, 1]")
    dets = list(detections)
    if not dets:
        return []

    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    verts = []
    areas = np.empty(len(dets))
    boxes = np.empty((len(dets), 4))
    for i, det in enumerate(dets):
        quad = as_quad(det.quad)
        pts = [(float(x), float(y)) for x, y in quad]
        _convexity_sign(pts)
        verts.append(pts)
        areas[i] = abs(_signed_area(pts))
        boxes[i] = (quad[:, 0].min(), quad[:, 1].min(),
                    quad[:, 0].max(), quad[:, 1].max())

    kept: list[int] = []
    kept_by_class: dict[int, list[int]] = {}
    for i in order:
        det = dets[i]
        same = kept_by_class.get(det.class_id)
        suppressed = False
        if same:
            cand = np.array(same)
            cboxes = boxes[cand]
            overlap = ((boxes[i, 0] <= cboxes[:, 2]) & (boxes[i, 2] >= cboxes[:, 0])
                       & (boxes[i, 1] <= cboxes[:, 3]) & (boxes[i, 3] >= cboxes[:, 1]))
            for j in cand[overlap]:
                if _iou_convex(verts[i], verts[j], areas[i], areas[j]) >= iou_threshold:
                    suppressed = True
                    break
        if not suppressed:
            kept.append(i)
            kept_by_class.setdefault(det.class_id, []).append(i)
    return [dets[i] for i in kept]
