import math

import numpy as np
import pytest

from polarbox.errors import InvalidInput
from polarbox.geometry import RotatedRect, rect_to_quad
from polarbox.losses import (
    center_focal_loss,
    masked_l1_loss,
    semantic_loss,
    total_loss,
)
from polarbox.targets import build_targets

from conftest import central_diff_grad, rel_err

# substitution oracles, computed by hand from the loss definitions
FOCAL_HALF_PRED = 0.25 * math.log(2.0)            # 0.17328679...
FOCAL_BG_09 = 0.81 * math.log(10.0)               # 1.86509392...
ANGLE_L1_EXAMPLE = (abs(0.8 - 0.78540) + abs(2.4 - 2.35619)
                    + abs(3.9 - 3.92699) + abs(5.5 - 5.49779))  # 0.08761


def random_heat_pair(rng, shape=(2, 6, 6), n_peaks=3):
    target = np.zeros(shape)
    flat = rng.choice(np.prod(shape), size=n_peaks, replace=False)
    target.ravel()[flat] = 1.0
    background = rng.uniform(0.0, 0.6, size=shape)
    target = np.maximum(target, background * (target == 0))
    pred = rng.uniform(0.05, 0.95, size=shape)
    return pred, target


class TestCenterFocalLoss:
    def test_exact_fit_is_tiny(self):
        target = np.zeros((1, 4, 4))
        target[0, 2, 2] = 1.0
        loss, _ = center_focal_loss(target.copy(), target)
        assert 0.0 <= loss <= 1e-5

    def test_single_positive_half_pred(self):
        target = np.ones((1, 1, 1))
        pred = np.full((1, 1, 1), 0.5)
        loss, _ = center_focal_loss(pred, target)
        assert loss == pytest.approx(FOCAL_HALF_PRED, abs=1e-9)
        assert loss == pytest.approx(0.17329, abs=1e-5)

    def test_perfect_peak_plus_background(self):
        target = np.array([[[1.0, 0.0]]])
        pred = np.array([[[1.0, 0.9]]])  # peak clamps to 1 - eps internally
        loss, _ = center_focal_loss(pred, target)
        assert loss == pytest.approx(FOCAL_BG_09, abs=1e-5)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInput):
            center_focal_loss(np.zeros((1, 2, 2)), np.zeros((1, 3, 2)))

    def test_nonnegative_and_monotone_at_positive(self):
        target = np.zeros((1, 3, 3))
        target[0, 1, 1] = 1.0
        losses = []
        for p in (0.1, 0.3, 0.5, 0.7, 0.9, 0.99):
            pred = np.full((1, 3, 3), 0.2)
            pred[0, 1, 1] = p
            loss, _ = center_focal_loss(pred, target)
            assert loss >= 0.0
            losses.append(loss)
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            pred, target = random_heat_pair(rng)
            _, grad = center_focal_loss(pred, target)
            numeric = central_diff_grad(
                lambda p: center_focal_loss(p, target)[0], pred)
            assert rel_err(grad, numeric).max() < 1e-5


class TestMaskedL1Loss:
    def test_zero_at_fit(self):
        pred = np.ones((4, 3, 3))
        mask = np.zeros((3, 3), dtype=bool)
        mask[1, 1] = True
        loss, grad = masked_l1_loss(pred, pred.copy(), mask)
        assert loss == 0.0
        assert (grad == 0).all()

    def test_angle_head_example(self):
        pred = np.array([0.8, 2.4, 3.9, 5.5]).reshape(4, 1, 1)
        target = np.array([0.78540, 2.35619, 3.92699, 5.49779]).reshape(4, 1, 1)
        mask = np.ones((1, 1), dtype=bool)
        loss, _ = masked_l1_loss(pred, target, mask)
        assert loss == pytest.approx(ANGLE_L1_EXAMPLE, abs=1e-9)
        assert loss == pytest.approx(0.08761, abs=1e-5)

    def test_mean_over_masked_cells(self):
        pred = np.array([[[0.5, 1.5, 9.0]]])
        target = np.array([[[0.0, 0.0, 0.0]]])
        mask = np.array([[True, True, False]])
        loss, _ = masked_l1_loss(pred, target, mask)
        assert loss == pytest.approx(1.0)

    def test_empty_mask_guarded(self):
        loss, grad = masked_l1_loss(np.ones((2, 2, 2)), np.zeros((2, 2, 2)),
                                    np.zeros((2, 2), dtype=bool))
        assert loss == 0.0
        assert (grad == 0).all()

    def test_permutation_invariance(self):
        rng = np.random.default_rng(7)
        pred = rng.normal(size=(4, 1, 6))
        target = rng.normal(size=(4, 1, 6))
        mask = np.ones((1, 6), dtype=bool)
        base, _ = masked_l1_loss(pred, target, mask)
        perm = rng.permutation(6)
        shuffled, _ = masked_l1_loss(pred[:, :, perm], target[:, :, perm], mask)
        assert shuffled == pytest.approx(base, rel=1e-12)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            pred = rng.normal(size=(4, 4, 4))
            target = rng.normal(size=(4, 4, 4))
            mask = rng.random((4, 4)) < 0.5
            if not mask.any():
                mask[0, 0] = True
            near_tie = (np.abs(pred - target) < 1e-4) & mask
            _, grad = masked_l1_loss(pred, target, mask)
            numeric = central_diff_grad(
                lambda p: masked_l1_loss(p, target, mask)[0], pred)
            ok = ~near_tie
            assert rel_err(grad[ok], numeric[ok]).max() < 1e-5


class TestSemanticLoss:
    def test_exact_fit_is_tiny(self):
        target = (np.arange(16).reshape(1, 4, 4) % 3 == 0).astype(float)
        loss, _ = semantic_loss(target.copy(), target)
        assert 0.0 <= loss <= 1e-5

    def test_half_pred_is_ln2(self):
        loss_pos, _ = semantic_loss(np.array([[0.5]]), np.array([[1.0]]))
        loss_neg, _ = semantic_loss(np.array([[0.5]]), np.array([[0.0]]))
        assert loss_pos == pytest.approx(math.log(2.0), abs=1e-12)
        assert loss_neg == pytest.approx(math.log(2.0), abs=1e-12)
        assert loss_pos == pytest.approx(0.69315, abs=1e-5)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInput):
            semantic_loss(np.zeros((2, 2)), np.zeros((4,)))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(13)
        pred = rng.uniform(0.05, 0.95, size=(2, 5, 5))
        target = (rng.random((2, 5, 5)) < 0.3).astype(float)
        _, grad = semantic_loss(pred, target)
        numeric = central_diff_grad(lambda p: semantic_loss(p, target)[0], pred)
        assert rel_err(grad, numeric).max() < 1e-5


class TestTotalLoss:
    def _fixture(self):
        quad = rect_to_quad(RotatedRect(21, 17, 12, 6, -30))
        maps = build_targets([(quad, 0)], 64, 64, num_classes=1)
        preds = {
            "heatmap": np.clip(maps.heatmap, 1e-7, 1 - 1e-7),
            "offset": maps.offset.copy(),
            "angles": maps.angles.copy(),
            "shorter": maps.shorter.copy(),
            "ratios": maps.ratios.copy(),
            "semantic": np.clip(maps.semantic, 1e-7, 1 - 1e-7),
        }
        return preds, maps

    def test_zero_at_exact_fit(self):
        preds, maps = self._fixture()
        total, breakdown = total_loss(preds, maps)
        assert total == pytest.approx(0.0, abs=1e-4)
        assert set(breakdown) == {"heatmap", "offset", "angles", "shorter",
                                  "ratios", "semantic"}

    def test_heatmap_projection(self):
        preds, maps = self._fixture()
        preds["heatmap"] = np.full_like(preds["heatmap"], 0.5)
        weights = {"heatmap": 1.0, "offset": 0.0, "angles": 0.0,
                   "shorter": 0.0, "ratios": 0.0, "semantic": 0.0}
        total, breakdown = total_loss(preds, maps, weights)
        expected, _ = center_focal_loss(preds["heatmap"], maps.heatmap)
        assert total == pytest.approx(expected)
        assert breakdown["heatmap"] == pytest.approx(expected)

    def test_additive_example(self):
        # unit-weight sum of the two frozen substitution values
        target_heat = np.ones((1, 1, 1))
        pred_heat = np.full((1, 1, 1), 0.5)
        angles_pred = np.array([0.8, 2.4, 3.9, 5.5]).reshape(4, 1, 1)
        angles_tgt = np.array([0.78540, 2.35619, 3.92699, 5.49779]).reshape(4, 1, 1)

        class Maps:
            heatmap = target_heat
            offset = np.zeros((2, 1, 1))
            angles = angles_tgt
            shorter = np.zeros((1, 1, 1))
            ratios = np.zeros((4, 1, 1))
            semantic = np.zeros((1, 1, 1))
            valid_mask = np.ones((1, 1), dtype=bool)

        preds = {
            "heatmap": pred_heat,
            "offset": np.zeros((2, 1, 1)),
            "angles": angles_pred,
            "shorter": np.zeros((1, 1, 1)),
            "ratios": np.zeros((4, 1, 1)),
            "semantic": np.full((1, 1, 1), 1e-7),
        }
        total, breakdown = total_loss(preds, Maps)
        assert breakdown["heatmap"] == pytest.approx(FOCAL_HALF_PRED, abs=1e-9)
        assert breakdown["angles"] == pytest.approx(ANGLE_L1_EXAMPLE, abs=1e-9)
        assert total == pytest.approx(sum(breakdown.values()))

    def test_linear_in_weights(self):
        preds, maps = self._fixture()
        preds["offset"] = preds["offset"] + 0.1
        base_w = {"offset": 1.0}
        scaled_w = {"offset": 3.5}
        base, _ = total_loss(preds, maps, {**base_w, "heatmap": 0.0,
                                           "angles": 0.0, "shorter": 0.0,
                                           "ratios": 0.0, "semantic": 0.0})
        scaled, _ = total_loss(preds, maps, {**scaled_w, "heatmap": 0.0,
                                             "angles": 0.0, "shorter": 0.0,
                                             "ratios": 0.0, "semantic": 0.0})
        assert scaled == pytest.approx(3.5 * base)

    def test_negative_weight_rejected(self):
        preds, maps = self._fixture()
        with pytest.raises(InvalidInput):
            total_loss(preds, maps, {"heatmap": -1.0})
