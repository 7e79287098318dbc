"""Oriented-box detection evaluation: per-class AP and mAP over quads.

Matching is greedy in score order with exact rotated IoU; AP comes in the
11-point flavor (default) or as the full area under the interpolated PR
curve.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .dataio import Annotation
from .errors import InvalidInput
from .geometry import iou_quad

VOC07 = "voc07"
ALL_POINTS = "all"
METRICS = (VOC07, ALL_POINTS)

DEFAULT_MATCH_IOU = 0.5


@dataclass
class EvalResult:
    per_class: dict[str, float]
    mean_ap: float
    metric: str
    iou_threshold: float


def match_detections(detections: Sequence[tuple[str, float, np.ndarray]],
                     gts_by_image: Mapping[str, Sequence[tuple[np.ndarray, bool]]],
                     iou_threshold: float = DEFAULT_MATCH_IOU
                     ) -> tuple[list[tuple[float, bool]], int]:
    """Greedy single-class matching of detections against ground truth.

    ``detections`` holds (image, score, quad); ``gts_by_image`` maps images
    to (quad, difficult) pairs.  Each detection takes the highest-IoU ground
    truth of its image: a hit on an unmatched, non-difficult gt is a TP, a
    hit on a difficult gt is ignored, anything else is an FP.  Returns the
    (score, is_tp) record list in rank order plus the non-difficult gt
    count.
    """
    order = sorted(range(len(detections)),
                   key=lambda i: (-detections[i][1], i))
    matched: dict[str, list[bool]] = {
        image: [False] * len(gts) for image, gts in gts_by_image.items()
    }
    records: list[tuple[float, bool]] = []
    for i in order:
        image, score, quad = detections[i]
        gts = gts_by_image.get(image, ())
        best_iou, best_j = 0.0, -1
        for j, (gt_quad, _) in enumerate(gts):
            iou = iou_quad(quad, gt_quad)
            if iou > best_iou:
                best_iou, best_j = iou, j
        if best_j >= 0 and best_iou >= iou_threshold:
            if gts[best_j][1]:
                continue  # difficult: neither TP nor FP
            if not matched[image][best_j]:
                matched[image][best_j] = True
                records.append((score, True))
            else:
                records.append((score, False))
        else:
            records.append((score, False))
    n_positive = sum(
        not difficult for gts in gts_by_image.values() for _, difficult in gts
    )
    return records, n_positive


def average_precision(matches: Sequence[tuple[float, bool]], n_positive: int,
                      metric: str = VOC07) -> float:
    """AP from rank-ordered (score, is_tp) records.

    ``voc07`` averages the max precision at the 11 recall thresholds
    0, 0.1, ..., 1; ``all`` integrates the interpolated PR curve.
    """
    if metric not in METRICS:
        raise InvalidInput(f"metric must be one of {METRICS}, got {metric!r}")
    if n_positive < 0:
        raise InvalidInput("n_positive must be >= 0")
    if n_positive == 0 or len(matches) == 0:
        return 0.0
    ranked = sorted(range(len(matches)), key=lambda i: (-matches[i][0], i))
    tp = np.cumsum([1.0 if matches[i][1] else 0.0 for i in ranked])
    fp = np.cumsum([0.0 if matches[i][1] else 1.0 for i in ranked])
    recall = tp / n_positive
    precision = tp / np.maximum(tp + fp, 1e-12)

    if metric == VOC07:
        ap = 0.0
        for i in range(11):
            t = i / 10.0
            mask = recall >= t
            ap += precision[mask].max() if mask.any() else 0.0
        return ap / 11.0

    # all-points: area under the right-continuous precision envelope
    rec = np.concatenate([[0.0], recall, [1.0]])
    prec = np.concatenate([[0.0], precision, [0.0]])
    for i in range(len(prec) - 2, -1, -1):
        prec[i] = max(prec[i], prec[i + 1])
    steps = np.nonzero(rec[1:] != rec[:-1])[0]
    return float(((rec[steps + 1] - rec[steps]) * prec[steps + 1]).sum())


def evaluate_obb_map(gts_by_image: Mapping[str, Sequence[Annotation]],
                     dets_by_class: Mapping[str, Sequence[tuple[str, float, np.ndarray]]],
                     classes: Sequence[str],
                     iou_threshold: float = DEFAULT_MATCH_IOU,
                     metric: str = VOC07,
                     skip_empty_classes: bool = False) -> EvalResult:
    """Per-class AP plus the unweighted mean over ``classes``.

    Classes without ground truth score 0 unless ``skip_empty_classes``
    removes them from the mean.  Detections whose class is not listed do
    not enter the table.
    """
    per_class: dict[str, float] = {}
    counted: list[float] = []
    for name in classes:
        gts = {
            image: [(ann.quad, ann.difficult) for ann in anns
                    if ann.category == name]
            for image, anns in gts_by_image.items()
        }
        dets = list(dets_by_class.get(name, ()))
        matches, n_positive = match_detections(dets, gts, iou_threshold)
        ap = average_precision(matches, n_positive, metric)
        per_class[name] = ap
        if n_positive > 0 or not skip_empty_classes:
            counted.append(ap)
    mean_ap = float(np.mean(counted)) if counted else 0.0
    return EvalResult(per_class=per_class, mean_ap=mean_ap, metric=metric,
                      iou_threshold=iou_threshold)


def ap_table_csv(result: EvalResult) -> str:
    lines = ["class,ap"]
    lines += [f"{name},{ap:.6f}" for name, ap in result.per_class.items()]
    lines.append(f"mAP,{result.mean_ap:.6f}")
    return "\n".join(lines) + "\n"


def ap_table_text(result: EvalResult) -> str:
    width = max([len("class")] + [len(n) for n in result.per_class])
    lines = [f"{'class':<{width}}  {'ap':>8}"]
    lines += [f"{name:<{width}}  {ap:8.6f}" for name, ap in result.per_class.items()]
    lines.append(f"{'mAP':<{width}}  {result.mean_ap:8.6f}")
    return "\n".join(lines) + "\n"
