"""Shared test helpers: independent oracles and random-geometry generators.

The oracles here deliberately avoid the library code paths they check:
IoU via uniform point sampling, minimal rectangles via a dense angle
sweep, gaussian radii via grid search on axis-aligned IoU.
"""

import math

import numpy as np

from polarbox.geometry import RotatedRect


def inside_convex(quad, points):
    """Boolean mask of ``points`` (N, 2) lying inside a convex quad."""
    quad = np.asarray(quad, dtype=float)
    # orient so every interior point sits on the non-positive cross side
    x, y = quad[:, 0], quad[:, 1]
    signed = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    if signed > 0:
        quad = quad[::-1]
    mask = np.ones(len(points), dtype=bool)
    for i in range(4):
        a = quad[i]
        b = quad[(i + 1) % 4]
        e = b - a
        cross = e[0] * (points[:, 1] - a[1]) - e[1] * (points[:, 0] - a[0])
        mask &= cross <= 1e-12
    return mask


def monte_carlo_iou(quad_a, quad_b, n=1_000_000, seed=0):
    """IoU estimated from uniform samples over the pair's joint bbox.

    Uses jittered-grid (stratified) sampling: one uniform point per cell of
    a sqrt(n) x sqrt(n) grid tiling the bbox.  The estimate stays unbiased
    while the error becomes boundary-limited, so 1e6 points pin the areas
    to ~1e-4.
    """
    quad_a = np.asarray(quad_a, dtype=float)
    quad_b = np.asarray(quad_b, dtype=float)
    allv = np.vstack([quad_a, quad_b])
    lo = allv.min(axis=0)
    hi = allv.max(axis=0)
    g = int(math.isqrt(n))
    rng = np.random.default_rng(seed)
    ii, jj = np.meshgrid(np.arange(g), np.arange(g), indexing="ij")
    u = rng.random((g * g, 2))
    cells = np.stack([ii.ravel(), jj.ravel()], axis=1)
    pts = lo + (cells + u) / g * (hi - lo)
    in_a = inside_convex(quad_a, pts)
    in_b = inside_convex(quad_b, pts)
    union = np.count_nonzero(in_a | in_b)
    if union == 0:
        return 0.0
    return np.count_nonzero(in_a & in_b) / union


def random_rect(rng, side_range=(4.0, 300.0), ar_range=(1.0, 10.0),
                center_range=(100.0, 1900.0)):
    """Random rotated rectangle in the DOTA-like sweep ranges."""
    short = rng.uniform(*side_range)
    ar = rng.uniform(*ar_range)
    w, h = short * ar, short
    if rng.random() < 0.5:
        w, h = h, w
    angle = rng.uniform(-90.0, 0.0)
    cx, cy = rng.uniform(*center_range, size=2)
    return RotatedRect(float(cx), float(cy), float(w), float(h), float(angle))


def random_convex_quad(rng, center, radius_range=(10.0, 40.0)):
    """Convex quad from four points on an ellipse at sorted angles."""
    cx, cy = center
    angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=4))
    # keep the angular gaps away from zero so the quad stays fat
    while np.min(np.diff(np.concatenate([angles, [angles[0] + 2 * np.pi]]))) < 0.35:
        angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=4))
    rx, ry = rng.uniform(*radius_range, size=2)
    tilt = rng.uniform(0.0, np.pi)
    c, s = np.cos(tilt), np.sin(tilt)
    ex = rx * np.cos(angles)
    ey = ry * np.sin(angles)
    return np.stack([cx + ex * c - ey * s, cy + ex * s + ey * c], axis=1)


def overlapping_pair(rng):
    """Two convex quads that overlap substantially (for IoU oracles)."""
    base = random_convex_quad(rng, center=(50.0, 50.0), radius_range=(15.0, 35.0))
    shift = rng.uniform(-8.0, 8.0, size=2)
    phi = rng.uniform(-0.4, 0.4)
    c, s = np.cos(phi), np.sin(phi)
    centered = base - base.mean(axis=0)
    other = centered @ np.array([[c, s], [-s, c]]) * rng.uniform(0.85, 1.2)
    other = other + base.mean(axis=0) + shift
    return base, other


def axis_iou(box_a, box_b):
    """IoU of two axis-aligned (x0, y0, x1, y1) boxes."""
    ax0, ay0, ax1, ay1 = box_a
    bx0, by0, bx1, by1 = box_b
    iw = max(0.0, min(ax1, bx1) - max(ax0, bx0))
    ih = max(0.0, min(ay1, by1) - max(ay0, by0))
    inter = iw * ih
    area_a = (ax1 - ax0) * (ay1 - ay0)
    area_b = (bx1 - bx0) * (by1 - by0)
    union = area_a + area_b - inter
    return inter / union if union > 0 else 0.0


def gaussian_radius_oracle(h, w, min_overlap, step=0.01, r_max=None):
    """Grid-search the largest displacement keeping IoU >= min_overlap.

    Checks the three displacement families (diagonal shift, symmetric
    shrink, symmetric grow) with geometric axis-aligned IoU and returns the
    smallest of the three per-family maxima.
    """
    if r_max is None:
        r_max = max(h, w)
    base = (0.0, 0.0, w, h)

    def max_r(iou_of_r):
        best = 0.0
        r = step
        while r <= r_max + 1e-12:
            if iou_of_r(r) >= min_overlap:
                best = r
            else:
                break
            r += step
        return best

    shift = max_r(lambda r: axis_iou(base, (r, r, w + r, h + r)))
    shrink = max_r(lambda r: axis_iou(base, (r, r, w - r, h - r))
                   if w - 2 * r > 0 and h - 2 * r > 0 else 0.0)
    grow = max_r(lambda r: axis_iou(base, (-r, -r, w + r, h + r)))
    return min(shift, shrink, grow)


def rel_err(analytic, numeric, floor=1.0):
    """Elementwise |a - n| / max(floor, |a|, |n|)."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    denom = np.maximum(floor, np.maximum(np.abs(analytic), np.abs(numeric)))
    return np.abs(analytic - numeric) / denom


def central_diff_grad(loss_fn, pred, step=1e-5):
    """Central finite differences of a scalar loss over every pred element."""
    pred = np.asarray(pred, dtype=float)
    grad = np.zeros_like(pred)
    flat = pred.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = loss_fn(pred)
        flat[i] = orig - step
        lo = loss_fn(pred)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * step)
    return grad
