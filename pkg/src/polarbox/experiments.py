"""Desk-scale optimization experiments over box representations.

Instead of training a network, each representation is fitted to a ground
truth by plain gradient descent on its own L1 parameter loss, and the IoU
to the ground truth is tracked along the way.  This isolates how friendly
each parameterization is to gradient-based regression: angle-range traps,
the w/h-swap discontinuity at the angle boundary, and the effect of
regressing raw pixel lengths versus bounded ratios.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .codec import (
    RepresentationKind,
    _variant_vertices,
    encode_variant,
    variant_length,
)
from .errors import DegenerateGeometry, InvalidInput, NonConvexInput, NonFiniteDiameter
from .geometry import (
    RotatedRect,
    _convexity_sign,
    _iou_convex,
    _signed_area,
    canonicalize_quad,
    rect_to_quad,
)

DEFAULT_LR = 0.01
DEFAULT_MAX_ITER = 2000
CONVERGED_IOU = 0.9
_SPARSE_RECORD = 50  # post-convergence trace cadence
_SIZE_EPS = 1e-5     # clamp floor for size-like parameters, above the decode guard

DEFAULT_CURVE_RATIOS = (1.0, 3.0, 5.0, 8.0)
DEFAULT_SIDE_RANGE = (4.0, 300.0)
DEFAULT_AR_RANGE = (1.0, 10.0)


@dataclass
class FitTrace:
    representation: RepresentationKind
    steps: list[tuple[int, float, float]]  # (iteration, parameter loss, iou)
    converged_at: int | None               # first iteration with iou >= 0.9
    final_params: list[float] | None = None


@dataclass
class ComparisonRow:
    kind: RepresentationKind
    mean_final_iou: float
    mean_converged_at: float  # nan when nothing converged
    fail_rate: float


def iou_angle_curve(aspect_ratios=DEFAULT_CURVE_RATIOS, bias_max_deg: float = 45.0,
                    step_deg: float = 1.0) -> list[tuple[float, float, float]]:
    """IoU between a unit-area rectangle and itself rotated by a bias.

    Returns (aspect_ratio, bias_deg, iou) rows for every ratio and every
    bias in 0..bias_max_deg.  High ratios lose IoU much faster per degree,
    which is what makes small angle errors expensive.
    """
    ratios = [float(a) for a in aspect_ratios]
    if any(a < 1.0 for a in ratios):
        raise InvalidInput("aspect ratios must be >= 1")
    if not 0.0 < step_deg <= bias_max_deg:
        raise InvalidInput("need 0 < step <= bias_max")
    n_steps = int(round(bias_max_deg / step_deg))
    rows = []
    for ar in ratios:
        w = math.sqrt(ar)
        base = rect_to_quad(RotatedRect(0.0, 0.0, w, 1.0 / w, 0.0))
        verts = [(float(x), float(y)) for x, y in base]
        area = abs(_signed_area(verts))
        for k in range(n_steps + 1):
            bias = k * step_deg
            if bias > bias_max_deg + 1e-9:
                break
            phi = math.radians(bias)
            c, s = math.cos(phi), math.sin(phi)
            rotated = [(x * c - y * s, x * s + y * c) for x, y in verts]
            rows.append((ar, bias, _iou_convex(rotated, verts, area, area)))
    return rows


def _clamp_sizes(params: list[float], kind: RepresentationKind) -> None:
    if kind == RepresentationKind.SINGLE_ANGLE:
        idx = (2, 3)
    elif kind == RepresentationKind.POLAR_DIRECT:
        idx = (6, 7, 8, 9)
    else:
        idx = (6, 7, 8, 9, 10)
    for i in idx:
        if params[i] < _SIZE_EPS:
            params[i] = _SIZE_EPS


def _safe_iou(params: list[float], kind: RepresentationKind,
              gt_verts: list[tuple[float, float]], gt_area: float) -> float:
    """IoU of the decoded parameters against the ground truth.

    Decodes that are degenerate, self-intersecting, or non-invertible score
    0 rather than aborting the trace.
    """
    try:
        verts = _variant_vertices(params, kind)
        _convexity_sign(verts)
    except (DegenerateGeometry, NonConvexInput, NonFiniteDiameter, InvalidInput):
        return 0.0
    area = abs(_signed_area(verts))
    return _iou_convex(verts, gt_verts, area, gt_area)


def fit_representation(gt_quad, kind: RepresentationKind, init,
                       lr: float = DEFAULT_LR,
                       max_iter: int = DEFAULT_MAX_ITER) -> FitTrace:
    """Gradient-descend one representation's L1 parameter loss toward a gt.

    Updates follow the L1 subgradient (components at an exact tie do not
    move, so the truth is a fixed point).  Size-like parameters are clamped
    positive each step; angles run unwrapped and only wrap at decode.  The
    trace records every iteration until the IoU first reaches 0.9, then
    every 50th plus the final state.
    """
    if lr <= 0 or max_iter < 0:
        raise InvalidInput("need lr > 0 and max_iter >= 0")
    target = [float(v) for v in encode_variant(gt_quad, kind)]
    params = [float(v) for v in init]
    if len(params) != variant_length(kind):
        raise InvalidInput(
            f"{kind.value} expects {variant_length(kind)} parameters, got {len(params)}"
        )
    _clamp_sizes(params, kind)
    try:
        init_verts = _variant_vertices(params, kind)
    except (DegenerateGeometry, NonFiniteDiameter, InvalidInput) as exc:
        raise InvalidInput(f"initial parameters do not decode: {exc}") from None
    if not all(math.isfinite(x) and math.isfinite(y) for x, y in init_verts):
        raise InvalidInput("initial parameters do not decode to finite vertices")

    gt_canon = canonicalize_quad(gt_quad)
    gt_verts = [(float(x), float(y)) for x, y in gt_canon]
    gt_area = abs(_signed_area(gt_verts))

    steps: list[tuple[int, float, float]] = []
    converged_at: int | None = None
    for it in range(max_iter + 1):
        if converged_at is None or it % _SPARSE_RECORD == 0 or it == max_iter:
            loss = sum(abs(p - t) for p, t in zip(params, target))
            iou = _safe_iou(params, kind, gt_verts, gt_area)
            steps.append((it, loss, iou))
            if converged_at is None and iou >= CONVERGED_IOU:
                converged_at = it
        if it == max_iter:
            break
        for k, (p, t) in enumerate(zip(params, target)):
            if p > t:
                params[k] = p - lr
            elif p < t:
                params[k] = p + lr
        _clamp_sizes(params, kind)
    return FitTrace(representation=kind, steps=steps, converged_at=converged_at,
                    final_params=params)


def boundary_case_pair(short_side: float, aspect_ratio: float,
                       center=(512.0, 512.0),
                       gt_angle: float = -10.0,
                       init_angle: float = -80.0):
    """Ground truth and a range-edge initialization with swapped sides.

    The init rectangle sits near the other end of the (-90, 0] angle range
    with its width and height exchanged; geometrically it is only a small
    rotation away from the truth, but in five-parameter space both the
    angle and the sides are far off.
    """
    cx, cy = center
    w = short_side * aspect_ratio
    gt = rect_to_quad(RotatedRect(cx, cy, w, short_side, gt_angle))
    init = rect_to_quad(RotatedRect(cx, cy, short_side, w, init_angle))
    return gt, init


def _perturbed_rect(rng: np.random.Generator, rect: RotatedRect) -> RotatedRect:
    from .codec import normalized_rect

    fw, fh = np.exp(rng.uniform(-0.3, 0.3, size=2))
    dtheta = rng.uniform(-25.0, 25.0)
    dx, dy = rng.uniform(-5.0, 5.0, size=2)
    return normalized_rect(rect.cx + dx, rect.cy + dy,
                           rect.w * fw, rect.h * fh, rect.angle + dtheta)


def _fit_sample(task):
    """One comparison sample: fit every representation, return the summaries."""
    gt_quad, init_quad, lr, max_iter = task
    out = []
    for kind in RepresentationKind:
        init_vec = encode_variant(init_quad, kind)
        trace = fit_representation(gt_quad, kind, init_vec, lr, max_iter)
        out.append((trace.steps[-1][2], trace.converged_at))
    return out


def compare_representations(n_samples: int, seed: int = 0,
                            lr: float = DEFAULT_LR,
                            max_iter: int = DEFAULT_MAX_ITER,
                            side_range=DEFAULT_SIDE_RANGE,
                            ar_range=DEFAULT_AR_RANGE,
                            jobs: int = 1) -> list[ComparisonRow]:
    """Race all representations from a common perturbed init.

    Each sample draws a random rectangle (shorter side and aspect ratio
    uniform over the given ranges, angle uniform in (-90, 0]), jitters it
    (log-scale on both sides, rotation, translation), then fits every
    representation from its own encoding of the same jittered rectangle.
    Samples are independent; ``jobs`` spreads them over processes without
    changing the result.
    """
    if n_samples < 0:
        raise InvalidInput("n_samples must be >= 0")
    kinds = list(RepresentationKind)
    if n_samples == 0:
        return []
    rng = np.random.default_rng(seed)

    tasks = []
    for _ in range(n_samples):
        short = rng.uniform(*side_range)
        ar = rng.uniform(*ar_range)
        w, h = short * ar, short
        if rng.random() < 0.5:
            w, h = h, w
        angle = rng.uniform(-90.0, 0.0)
        cx, cy = rng.uniform(100.0, 1900.0, size=2)
        gt_rect = RotatedRect(cx, cy, w, h, angle)
        tasks.append((rect_to_quad(gt_rect),
                      rect_to_quad(_perturbed_rect(rng, gt_rect)),
                      lr, max_iter))

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_fit_sample, tasks, chunksize=8))
    else:
        results = [_fit_sample(task) for task in tasks]

    finals: dict[RepresentationKind, list[float]] = {k: [] for k in kinds}
    convergences: dict[RepresentationKind, list[int]] = {k: [] for k in kinds}
    for sample in results:
        for kind, (final_iou, converged_at) in zip(kinds, sample):
            finals[kind].append(final_iou)
            if converged_at is not None:
                convergences[kind].append(converged_at)

    rows = []
    for kind in kinds:
        conv = convergences[kind]
        rows.append(ComparisonRow(
            kind=kind,
            mean_final_iou=float(np.mean(finals[kind])),
            mean_converged_at=float(np.mean(conv)) if conv else float("nan"),
            fail_rate=1.0 - len(conv) / n_samples,
        ))
    return rows


def curve_csv(rows) -> str:
    lines = ["ar,bias_deg,iou"]
    lines += [f"{ar:.6f},{bias:.6f},{iou:.6f}" for ar, bias, iou in rows]
    return "\n".join(lines) + "\n"


def comparison_csv(rows) -> str:
    lines = ["kind,mean_final_iou,mean_converged_at,fail_rate"]
    lines += [
        f"{row.kind.value},{row.mean_final_iou:.6f},"
        f"{row.mean_converged_at:.6f},{row.fail_rate:.6f}"
        for row in rows
    ]
    return "\n".join(lines) + "\n"
