import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bevtrack.baseversion import CameraCalib
from bevtrack.errors import DegenerateBox
from bevtrack.geometry import (
    BEV_CORNER_INDICES,
    Box7,
    IouWeights,
    Rect2D,
    bev_polygon,
    convex_hull,
    convex_overlap_area,
    corners_3d,
    diou_bev,
    giou_bev,
    pairwise_similarity,
    polygon_area,
    project_box_to_image,
    ro_gdiou,
    ro_iou,
    sdiou_rv,
    similarity,
    similarity_upper_bound,
    wrap_angle,
)
from conftest import boxes, random_box
from oracles import monte_carlo_overlap, rect_overlap_area, ro_gdiou_reference


def unit(x, y, theta=0.0, l=1.0, w=1.0):
    return Box7(x, y, 0.0, l, w, 1.0, theta)


def params(b):
    return (b.x, b.y, b.l, b.w, b.theta)


# ---------------------------------------------------------------------------
# corners and footprints


def test_corner_two_axis_aligned():
    np.testing.assert_allclose(corners_3d(Box7(0, 0, 0, 2, 1, 1, 0))[2], (1, -0.5, -0.5))


def test_corner_two_quarter_turn():
    # rotating (1, -0.5) by +90 degrees gives (0.5, 1)
    np.testing.assert_allclose(corners_3d(Box7(0, 0, 0, 2, 1, 1, math.pi / 2))[2], (0.5, 1, -0.5), atol=1e-12)


def test_translation_shifts_every_corner():
    base = corners_3d(Box7(0, 0, 0, 2, 1, 1, 0.3))
    moved = corners_3d(Box7(5, 5, 5, 2, 1, 1, 0.3))
    np.testing.assert_allclose(moved - base, 5.0, atol=1e-12)


def test_bev_polygon_axis_aligned_vertex_set():
    got = {tuple(np.round(p, 12)) for p in bev_polygon(Box7(0, 0, 0, 2, 1, 1, 0))}
    assert got == {(1, -0.5), (1, 0.5), (-1, 0.5), (-1, -0.5)}


def test_bev_polygon_uses_corners_2_3_7_6():
    box = Box7(1.0, -2.0, 0.5, 3.0, 1.2, 1.0, 0.7)
    expected = {tuple(np.round(corners_3d(box)[k, :2], 9)) for k in BEV_CORNER_INDICES}
    assert {tuple(np.round(p, 9)) for p in bev_polygon(box)} == expected


def test_bev_polygon_area_matches_lw(rng):
    for _ in range(200):
        box = random_box(rng, spread=20.0, size=(0.1, 6.0))
        poly = bev_polygon(box)
        x, y = poly[:, 0], poly[:, 1]
        shoelace = 0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
        assert shoelace > 0  # counter-clockwise
        assert shoelace == pytest.approx(box.l * box.w, abs=1e-9)


@given(boxes(), st.floats(-math.pi, math.pi))
def test_rotation_preserves_area(box, turn):
    rotated = Box7(box.x, box.y, box.z, box.l, box.w, box.h, box.theta + turn)
    assert polygon_area(bev_polygon(rotated)) == pytest.approx(polygon_area(bev_polygon(box)), rel=1e-9)


def test_wrap_angle_range():
    values = np.linspace(-20, 20, 4001)
    wrapped = wrap_angle(values)
    assert np.all(wrapped > -math.pi) and np.all(wrapped <= math.pi)
    assert wrap_angle(-math.pi) == math.pi
    np.testing.assert_allclose(np.cos(wrapped), np.cos(values), atol=1e-9)


def test_degenerate_box_rejected():
    with pytest.raises(DegenerateBox):
        Box7(0, 0, 0, 0.0, 1, 1, 0)


# ---------------------------------------------------------------------------
# overlap


def test_overlap_identical():
    p = bev_polygon(unit(0, 0, 0.4, 2.0, 1.0))
    assert convex_overlap_area(p, p) == pytest.approx(2.0, abs=1e-12)


def test_overlap_disjoint():
    assert convex_overlap_area(bev_polygon(unit(0, 0)), bev_polygon(unit(5, 0))) == 0.0


def test_overlap_half_shift_monte_carlo():
    a, b = unit(0, 0), unit(0.5, 0)
    assert convex_overlap_area(bev_polygon(a), bev_polygon(b)) == pytest.approx(0.5, abs=1e-12)
    est = monte_carlo_overlap(params(a), params(b), 10**6, np.random.default_rng(0))
    assert est == pytest.approx(0.5, abs=1e-2)


def test_overlap_accepts_clockwise_input():
    a, b = bev_polygon(unit(0, 0, 0.3)), bev_polygon(unit(0.4, 0.2, -0.2))
    assert convex_overlap_area(a[::-1], b[::-1]) == pytest.approx(convex_overlap_area(a, b), abs=1e-12)


def test_overlap_matches_vertex_enumeration(rng):
    for _ in range(300):
        a, b = random_box(rng), random_box(rng)
        got = convex_overlap_area(bev_polygon(a), bev_polygon(b))
        assert got == pytest.approx(rect_overlap_area(params(a), params(b)), abs=1e-9)


@given(boxes(st.floats(-3, 3)), boxes(st.floats(-3, 3)))
def test_overlap_symmetric_and_bounded(a, b):
    pa, pb = bev_polygon(a), bev_polygon(b)
    ab, ba = convex_overlap_area(pa, pb), convex_overlap_area(pb, pa)
    assert ab == pytest.approx(ba, abs=1e-9)
    assert 0.0 <= ab <= min(a.l * a.w, b.l * b.w) + 1e-9


def test_convex_hull_square_with_interior_points():
    pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5], [0.5, 0]])
    hull = convex_hull(pts)
    assert [tuple(p) for p in hull] == [(0, 0), (1, 0), (1, 1), (0, 1)]


# ---------------------------------------------------------------------------
# similarities


def test_ro_gdiou_touching_unit_squares():
    # C = 2, U = 2 so no area penalty; c = 1, d = sqrt(5)
    assert ro_gdiou(unit(0, 0), unit(1, 0)) == pytest.approx(-0.2, abs=1e-12)


def test_ro_gdiou_identical_is_exactly_one(rng):
    for _ in range(100):
        box = random_box(rng, spread=30.0, size=(0.1, 10.0))
        assert ro_gdiou(box, box) == 1.0
        assert giou_bev(box, box) == 1.0
        assert diou_bev(box, box) == 1.0


def test_ro_gdiou_far_apart_approaches_minus_two():
    assert ro_gdiou(unit(0, 0), unit(1e6, 0)) == pytest.approx(-2.0, abs=1e-5)
    assert ro_gdiou(unit(0, 0), unit(1e6, 0)) > -2.0


def test_ro_gdiou_matches_reference(rng):
    for _ in range(300):
        a, b = random_box(rng, spread=3.0), random_box(rng, spread=3.0)
        assert ro_gdiou(a, b) == pytest.approx(ro_gdiou_reference(params(a), params(b)), abs=1e-9)


def test_ro_gdiou_weights_shift_between_penalties():
    a, b = unit(0, 0), unit(2, 1, 0.5)
    iou, g, d = ro_iou(a, b), giou_bev(a, b), diou_bev(a, b)
    area_pen, dist_pen = iou - g, iou - d
    got = ro_gdiou(a, b, IouWeights(1.5, 0.5))
    assert got == pytest.approx(iou - 1.5 * area_pen - 0.5 * dist_pen, abs=1e-12)


def test_iou_weights_must_sum_to_two():
    with pytest.raises(ValueError):
        IouWeights(1.0, 0.5)


@given(boxes(st.floats(-10, 10)), boxes(st.floats(-10, 10)))
def test_similarity_properties(a, b):
    for kind, lo in (("ro_gdiou", -2.0), ("giou", -1.0), ("diou", -1.0)):
        ab = similarity(a, b, kind)
        assert lo <= ab <= 1.0
        assert ab == similarity(b, a, kind)


@given(boxes(st.floats(-10, 10)), boxes(st.floats(-10, 10)), st.floats(-100, 100), st.floats(-100, 100), st.floats(-math.pi, math.pi))
def test_rigid_motion_invariance(a, b, tx, ty, rot):
    c, s = math.cos(rot), math.sin(rot)

    def move(box):
        return Box7(c * box.x - s * box.y + tx, s * box.x + c * box.y + ty, box.z, box.l, box.w, box.h, box.theta + rot)

    for fn in (ro_gdiou, giou_bev, diou_bev):
        assert fn(move(a), move(b)) == pytest.approx(fn(a, b), abs=1e-9)


def test_giou_equals_iou_when_nested():
    outer, inner = Box7(0, 0, 0, 4, 2, 1, 0.3), Box7(0.2, 0.1, 0, 1, 0.5, 1, 0.9)
    assert giou_bev(outer, inner) == pytest.approx(ro_iou(outer, inner), abs=1e-9)


def test_diou_blind_to_shape_at_equal_centre_distance():
    # two disjoint pairs with the same centre distance (6) and hull diameter (sqrt 68)
    square = unit(0, 0, 0.0, 2.0, 2.0)
    pair_a = (square, unit(6, 0, 0.0, 2.0, 2.0))
    pair_b = (square, unit(6, 0, 0.0, 1.0, 2 * (math.sqrt(11.75) - 1)))
    assert diou_bev(*pair_a) == pytest.approx(diou_bev(*pair_b), abs=1e-12)
    assert diou_bev(*pair_a) == pytest.approx(-36 / 68, abs=1e-12)
    # the enclosing-area term tells the two shapes apart
    assert abs(ro_gdiou(*pair_a) - ro_gdiou(*pair_b)) > 0.05


def test_similarity_rejects_unknown_kind():
    with pytest.raises(ValueError):
        similarity(unit(0, 0), unit(1, 0), "iou3d")


def test_pairwise_matches_scalar(rng):
    a = np.array([random_box(rng, 3.0).to_array() for _ in range(6)])
    b = np.array([random_box(rng, 3.0).to_array() for _ in range(5)])
    for kind in ("ro_gdiou", "giou", "diou"):
        got = pairwise_similarity(a, b, kind)
        want = [[similarity(x, y, kind) for y in b] for x in a]
        np.testing.assert_array_equal(got, want)


def test_pairwise_mask_leaves_nan(rng):
    a = np.array([random_box(rng).to_array() for _ in range(3)])
    mask = np.eye(3, dtype=bool)
    got = pairwise_similarity(a, a, mask=mask)
    assert np.all(np.diag(got) == 1.0)
    assert np.all(np.isnan(got[~mask]))


def test_upper_bound_holds(rng):
    a = np.array([random_box(rng, 15.0, (0.3, 6.0)).to_array() for _ in range(60)])
    b = np.array([random_box(rng, 15.0, (0.3, 6.0)).to_array() for _ in range(60)])
    for kind in ("ro_gdiou", "giou", "diou"):
        exact = pairwise_similarity(a, b, kind)
        for floor in (None, -0.5):
            assert np.all(similarity_upper_bound(a, b, kind, floor=floor) >= exact)


# ---------------------------------------------------------------------------
# image plane


def test_sdiou_identical_is_one():
    r = Rect2D(10, 20, 50, 80)
    assert sdiou_rv(r, r) == 1.0


def test_sdiou_offset_golden():
    # 10x10 boxes offset 5 px: IoU 50/150, enclosing 15x10, c^2 = 25, no size term
    got = sdiou_rv(Rect2D(0, 0, 10, 10), Rect2D(5, 0, 15, 10))
    assert got == pytest.approx(1 / 3 - 25 / 325, abs=1e-15)
    assert got == pytest.approx(0.25641025641025644, abs=1e-15)


def test_sdiou_far_apart_is_negative():
    assert sdiou_rv(Rect2D(0, 0, 10, 10), Rect2D(1e5, 0, 1e5 + 10, 10)) < -0.99


def test_sdiou_decreases_with_separation():
    values = [sdiou_rv(Rect2D(0, 0, 10, 10), Rect2D(dx, 0, dx + 10, 10)) for dx in range(0, 40)]
    assert all(x > y for x, y in zip(values, values[1:]))


def pinhole(f=500.0, c=320.0):
    # camera frame equals the global frame
    return CameraCalib("cam", ((f, 0, c), (0, f, c), (0, 0, 1)), tuple(map(tuple, np.eye(4))), (640, 640))


def test_projection_of_tiny_box_on_optical_axis():
    rect = project_box_to_image(Box7(0, 0, 10, 1e-6, 1e-6, 1e-6, 0), pinhole())
    assert rect is not None
    assert rect.center == pytest.approx((320, 320), abs=1e-6)
    assert rect.width < 1e-3 and rect.height < 1e-3


def test_projection_behind_camera_not_visible():
    assert project_box_to_image(Box7(0, 0, -10, 1, 1, 1, 0), pinhole()) is None


def test_projection_width_halves_with_depth():
    # box axes are x (length) and y (width); the camera looks along +z
    near = project_box_to_image(Box7(0, 0, 10, 1, 1, 0.01, 0), pinhole())
    far = project_box_to_image(Box7(0, 0, 20, 1, 1, 0.01, 0), pinhole())
    assert far.width == pytest.approx(near.width / 2, rel=1e-3)


def test_projection_clamped_to_image():
    rect = project_box_to_image(Box7(3, 0, 5, 4, 1, 1, 0), pinhole())
    assert rect.x_max == 640
