"""Numeric head losses with analytic gradients.

These exist for correctness tests and for the direct-optimization
experiments; nothing here touches a neural network.  Every function
returns (scalar loss, dloss/dpred) with the gradient freshly allocated.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInput

CLAMP_EPS = 1e-7  # probabilities are clamped to [eps, 1-eps] before logs

HEAD_NAMES = ("heatmap", "offset", "angles", "shorter", "ratios", "semantic")


def _check_shapes(pred, target) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=float)
    t = np.asarray(target, dtype=float)
    if p.shape != t.shape:
        raise InvalidInput(f"shape mismatch: pred {p.shape} vs target {t.shape}")
    return p, t


def center_focal_loss(pred, target, alpha: float = 2.0,
                      beta: float = 4.0) -> tuple[float, np.ndarray]:
    """Penalty-reduced focal loss over a Gaussian center heatmap.

    Cells where the target equals 1 are positives; everywhere else the
    Gaussian value discounts the negative term by (1-target)^beta.  The sum
    is divided by max(#positives, 1).
    """
    raw, t = _check_shapes(pred, target)
    p = np.clip(raw, CLAMP_EPS, 1.0 - CLAMP_EPS)
    pos = t == 1.0
    n = max(int(pos.sum()), 1)

    one_minus_p = 1.0 - p
    log_p = np.log(p)
    log_1mp = np.log(one_minus_p)

    pos_term = np.where(pos, one_minus_p ** alpha * log_p, 0.0)
    neg_term = np.where(pos, 0.0, (1.0 - t) ** beta * p ** alpha * log_1mp)
    loss = -(pos_term.sum() + neg_term.sum()) / n

    grad_pos = alpha * one_minus_p ** (alpha - 1.0) * log_p - one_minus_p ** alpha / p
    grad_neg = -((1.0 - t) ** beta
                 * (alpha * p ** (alpha - 1.0) * log_1mp - p ** alpha / one_minus_p))
    grad = np.where(pos, grad_pos, grad_neg) / n
    return float(loss), grad


def masked_l1_loss(pred, target, mask) -> tuple[float, np.ndarray]:
    """Mean (over masked cells) of the summed per-component L1 error.

    ``pred``/``target`` are (K, H, W) grids, ``mask`` is an (H, W) boolean
    grid selecting the cells that carry a regression target.  The
    subgradient at exact ties is 0; an empty mask yields loss 0.
    """
    p, t = _check_shapes(pred, target)
    m = np.asarray(mask, dtype=bool)
    if m.shape != p.shape[-m.ndim:]:
        raise InvalidInput(f"mask shape {m.shape} does not match grid {p.shape}")
    n = int(m.sum())
    if n == 0:
        return 0.0, np.zeros_like(p)
    diff = (p - t) * m
    loss = np.abs(diff).sum() / n
    grad = np.sign(diff) / n
    return float(loss), grad


def semantic_loss(pred, target) -> tuple[float, np.ndarray]:
    """Per-cell binary cross-entropy against the {0,1} semantic mask, mean
    over all cells."""
    raw, t = _check_shapes(pred, target)
    p = np.clip(raw, CLAMP_EPS, 1.0 - CLAMP_EPS)
    count = p.size
    loss = -(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)).sum() / count
    grad = (-t / p + (1.0 - t) / (1.0 - p)) / count
    return float(loss), grad


def total_loss(preds, targets, weights=None) -> tuple[float, dict[str, float]]:
    """Weighted sum of all head losses with a per-head breakdown.

    ``preds`` maps head names (heatmap, offset, angles, shorter, ratios,
    semantic) to grids shaped like the corresponding target maps; missing
    weights default to 1.0.
    """
    weights = dict(weights or {})
    for name in weights:
        if name not in HEAD_NAMES:
            raise InvalidInput(f"unknown head: {name}")
        if weights[name] < 0:
            raise InvalidInput("weights must be non-negative")

    mask = targets.valid_mask
    breakdown = {
        "heatmap": center_focal_loss(preds["heatmap"], targets.heatmap)[0],
        "offset": masked_l1_loss(preds["offset"], targets.offset, mask)[0],
        "angles": masked_l1_loss(preds["angles"], targets.angles, mask)[0],
        "shorter": masked_l1_loss(preds["shorter"], targets.shorter, mask)[0],
        "ratios": masked_l1_loss(preds["ratios"], targets.ratios, mask)[0],
        "semantic": semantic_loss(preds["semantic"], targets.semantic)[0],
    }
    total = sum(weights.get(name, 1.0) * value for name, value in breakdown.items())
    return float(total), breakdown
