import math

import numpy as np
import pytest

from polarbox.codec import (
    PolarCode,
    RepresentationKind,
    decode_polar,
    decode_variant,
    eight_to_quad,
    encode_polar,
    encode_variant,
    five_to_quad,
    normalized_rect,
    polar_angle_of,
    quad_to_eight,
    quad_to_five,
)
from polarbox.errors import DegenerateGeometry, InvalidInput, NonFiniteDiameter
from polarbox.geometry import RotatedRect, canonicalize_quad, iou_quad, rect_to_quad

from conftest import inside_convex, random_convex_quad, random_rect

SQRT2 = math.sqrt(2.0)


def square_at(cx, cy, side):
    return rect_to_quad(RotatedRect(cx, cy, side, side, 0.0))


class TestPolarAngle:
    def test_positive_y_is_zero(self):
        assert polar_angle_of((0, 0), (0, 1)) == 0.0

    def test_positive_x_is_quarter_turn(self):
        assert polar_angle_of((0, 0), (1, 0)) == pytest.approx(math.pi / 2)

    def test_up_left_wraps(self):
        assert polar_angle_of((0, 0), (-1, 1)) == pytest.approx(7 * math.pi / 4)

    def test_coincident_raises(self):
        with pytest.raises(DegenerateGeometry):
            polar_angle_of((3, 3), (3, 3))


class TestEncodePolar:
    def test_square_fixture(self):
        code = encode_polar(square_at(5, 5, 2), stride=4)
        np.testing.assert_allclose(code.center, [5.0, 5.0])
        np.testing.assert_allclose(code.offset, [0.25, 0.25])
        np.testing.assert_allclose(
            code.theta,
            [math.pi / 4, 3 * math.pi / 4, 5 * math.pi / 4, 7 * math.pi / 4],
        )
        assert code.s == pytest.approx(2.0)
        np.testing.assert_allclose(code.r, [SQRT2] * 4, atol=1e-12)

    def test_rect_4x2_ratios(self):
        # every half-diagonal is sqrt(5), so r = 2/sqrt(5)
        code = encode_polar(rect_to_quad(RotatedRect(0, 0, 4, 2, 0)), stride=4)
        assert code.s == pytest.approx(2.0)
        np.testing.assert_allclose(code.r, [2.0 / math.sqrt(5.0)] * 4)
        assert code.r[0] == pytest.approx(0.89443, abs=1e-5)

    def test_vertex_on_mbr_center_raises(self):
        # three corners of a right triangle plus its MBR center as 4th vertex
        quad = [(0, 0), (10, 0), (10, 10), (5, 5)]
        with pytest.raises(DegenerateGeometry):
            encode_polar(quad, stride=4)

    def test_degenerate_quad_raises(self):
        with pytest.raises(DegenerateGeometry):
            encode_polar([(0, 0), (1, 1), (2, 2), (3, 3)])

    def test_bad_stride(self):
        with pytest.raises(InvalidInput):
            encode_polar(square_at(5, 5, 2), stride=0)

    def test_theta_sorted_and_paired(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            code = encode_polar(rect_to_quad(random_rect(rng)))
            assert (np.diff(code.theta) > 0).all()
            assert code.theta[-1] - code.theta[0] < 2 * math.pi
            assert (code.r > 0).all()


class TestDecodePolar:
    def test_roundtrip_square(self):
        quad = canonicalize_quad(square_at(5, 5, 2))
        back = decode_polar(encode_polar(quad, 4), 4)
        np.testing.assert_allclose(back, quad, atol=1e-6)

    def test_grid_cell_fixture(self):
        # center = (cell + offset) * stride; d = 20 / sqrt(2)
        center = np.array([(10 + 0.3) * 4, (20 + 0.7) * 4])
        np.testing.assert_allclose(center, [41.2, 82.8])
        code = PolarCode(
            center=center,
            offset=np.array([0.3, 0.7]),
            theta=np.array([math.pi / 4, 3 * math.pi / 4,
                            5 * math.pi / 4, 7 * math.pi / 4]),
            s=20.0,
            r=np.array([SQRT2] * 4),
        )
        quad = decode_polar(code, 4)
        got = {tuple(np.round(v, 6)) for v in quad}
        assert got == {(51.2, 92.8), (51.2, 72.8), (31.2, 72.8), (31.2, 92.8)}

    def test_zero_ratio_raises(self):
        code = encode_polar(square_at(5, 5, 2))
        code.r = np.array([0.0, SQRT2, SQRT2, SQRT2])
        with pytest.raises(NonFiniteDiameter):
            decode_polar(code)

    def test_roundtrip_random_rects(self):
        rng = np.random.default_rng(23)
        for _ in range(500):
            quad = canonicalize_quad(rect_to_quad(random_rect(rng)))
            back = decode_polar(encode_polar(quad, 4), 4)
            scale = np.abs(quad).max()
            assert np.abs(back - quad).max() / scale < 1e-6

    def test_roundtrip_general_convex_quads(self):
        rng = np.random.default_rng(29)
        for _ in range(200):
            quad = canonicalize_quad(
                random_convex_quad(rng, center=rng.uniform(100, 900, 2)))
            back = decode_polar(encode_polar(quad, 4), 4)
            scale = max(np.abs(quad).max(), 1.0)
            assert np.abs(back - quad).max() / scale < 1e-6

    def test_translation_moves_center_only(self):
        rng = np.random.default_rng(31)
        quad = canonicalize_quad(rect_to_quad(random_rect(rng)))
        base = encode_polar(quad, 4)
        shifted = encode_polar(quad + np.array([48.0, 96.0]), 4)
        np.testing.assert_allclose(shifted.center - base.center, [48.0, 96.0],
                                   atol=1e-9)
        np.testing.assert_allclose(shifted.theta, base.theta, atol=1e-9)
        np.testing.assert_allclose(shifted.r, base.r, atol=1e-9)
        assert shifted.s == pytest.approx(base.s, abs=1e-9)


class TestFiveEight:
    def test_rectangle_five_roundtrip(self):
        rng = np.random.default_rng(37)
        for _ in range(100):
            quad = canonicalize_quad(rect_to_quad(random_rect(rng)))
            back = five_to_quad(quad_to_five(quad))
            np.testing.assert_allclose(back, quad, atol=1e-6)

    def test_five_covers_general_quads(self):
        rng = np.random.default_rng(41)
        for _ in range(100):
            quad = random_convex_quad(rng, center=(500, 500))
            mbr_quad = five_to_quad(quad_to_five(quad))
            from polarbox.geometry import polygon_area
            assert polygon_area(mbr_quad) >= polygon_area(quad) - 1e-9
            grown = (mbr_quad - mbr_quad.mean(0)) * (1 + 1e-9) + mbr_quad.mean(0)
            assert inside_convex(grown, quad).all()

    def test_diamond_angle(self):
        rect = quad_to_five([(0, 1), (1, 0), (2, 1), (1, 2)])
        assert rect.angle == pytest.approx(-45.0)

    def test_eight_roundtrip_exact(self):
        # identity by construction; center + (v - center) re-rounds once,
        # so "exact" means within one ulp
        rng = np.random.default_rng(43)
        for _ in range(1000):
            quad = canonicalize_quad(
                random_convex_quad(rng, center=rng.uniform(50, 950, 2)))
            np.testing.assert_allclose(eight_to_quad(quad_to_eight(quad)), quad,
                                       rtol=1e-14, atol=0)

    def test_eight_square_offsets(self):
        e = quad_to_eight(square_at(0, 0, 2))
        got = {tuple(v) for v in np.round(e.dv, 9)}
        assert got == {(1, 1), (1, -1), (-1, 1), (-1, -1)}

    def test_eight_degenerate(self):
        with pytest.raises(DegenerateGeometry):
            quad_to_eight([(0, 0), (1, 1), (2, 2), (3, 3)])


class TestVariants:
    @pytest.mark.parametrize("kind", list(RepresentationKind))
    def test_rect_roundtrip(self, kind):
        rng = np.random.default_rng(47)
        for _ in range(50):
            quad = canonicalize_quad(rect_to_quad(random_rect(rng)))
            back = decode_variant(encode_variant(quad, kind), kind)
            scale = np.abs(quad).max()
            assert np.abs(back - quad).max() / scale < 1e-6

    def test_direct_square_diameters(self):
        vec = encode_variant(square_at(0, 0, 2), RepresentationKind.POLAR_DIRECT)
        np.testing.assert_allclose(vec[6:10], [SQRT2] * 4)

    def test_longer_ratio_rect(self):
        vec = encode_variant(rect_to_quad(RotatedRect(0, 0, 4, 2, 0)),
                             RepresentationKind.POLAR_LONGER_RATIO)
        assert vec[6] == pytest.approx(4.0)
        np.testing.assert_allclose(vec[7:11], [4.0 / math.sqrt(5.0)] * 4)
        assert vec[7] == pytest.approx(1.78885, abs=1e-5)

    def test_shorter_matches_polar_code(self):
        quad = square_at(5, 5, 2)
        vec = encode_variant(quad, RepresentationKind.POLAR_SHORTER_RATIO)
        code = encode_polar(quad)
        np.testing.assert_allclose(vec, np.concatenate(
            [code.center, code.theta, [code.s], code.r]))

    def test_unknown_kind_rejected(self):
        with pytest.raises(InvalidInput):
            encode_variant(square_at(0, 0, 2), "bogus")

    def test_wrong_length_rejected(self):
        with pytest.raises(InvalidInput):
            decode_variant([0.0] * 7, RepresentationKind.SINGLE_ANGLE)


class TestNormalizedRect:
    def test_quarter_turns_fold_with_swap(self):
        r = normalized_rect(0, 0, 4, 2, 10.0)
        assert r.angle == pytest.approx(-80.0)
        assert (r.w, r.h) == (2, 4)

    def test_in_range_untouched(self):
        r = normalized_rect(0, 0, 4, 2, -30.0)
        assert (r.w, r.h, r.angle) == (4, 2, -30.0)

    def test_same_geometry(self):
        quad_a = rect_to_quad(normalized_rect(7, 9, 4, 2, 35.0))
        quad_b = rect_to_quad(normalized_rect(7, 9, 2, 4, -55.0))
        assert iou_quad(quad_a, quad_b) == pytest.approx(1.0, abs=1e-9)
