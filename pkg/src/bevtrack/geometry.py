"""Rotated-box geometry on the bird's-eye-view (BEV) plane and the image plane.

Boxes are ``(x, y, z, l, w, h, theta)`` with ``theta`` the yaw about the
vertical axis. Footprints are the xy-projection of corners 2, 3, 7, 6 in
counter-clockwise order, starting at the lexicographically smallest vertex.
The canonical start vertex matters: it makes the convex hull of two
coincident footprints reproduce the footprint exactly, so identical boxes
score exactly 1. The polygon work itself lives in :mod:`bevtrack._kernels`.

The enclosing shape used by the GIoU-style penalty is the convex hull of both
footprints, and the normalising "diagonal" is the hull diameter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels as _k
from .errors import DegenerateBox

TWO_PI = 2.0 * math.pi
COST_KINDS = ("ro_gdiou", "giou", "diou")

# Half-extent sign pattern of the 8 corners (rows: l, w, h).
_CORNER_SIGNS = np.array(
    [
        [1, 1, 1, 1, -1, -1, -1, -1],
        [1, -1, -1, 1, 1, -1, -1, 1],
        [1, 1, -1, -1, 1, 1, -1, -1],
    ],
    dtype=float,
)
BEV_CORNER_INDICES = (2, 3, 7, 6)


def wrap_angle(angle):
    """Wrap an angle (scalar or array, radians) into ``(-pi, pi]``."""
    if isinstance(angle, np.ndarray):
        return math.pi - np.mod(math.pi - angle, TWO_PI)
    return math.pi - (math.pi - float(angle)) % TWO_PI


@dataclass(frozen=True)
class Box7:
    x: float
    y: float
    z: float
    l: float
    w: float
    h: float
    theta: float

    def __post_init__(self):
        if not (self.l > 0 and self.w > 0 and self.h > 0):
            raise DegenerateBox(f"box dimensions must be positive, got l={self.l} w={self.w} h={self.h}")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "Box7":
        return cls(*(float(v) for v in values))

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.l, self.w, self.h, self.theta])


@dataclass(frozen=True)
class IouWeights:
    """Weights of the enclosing-area and centre-distance penalties; must sum to 2."""

    omega1: float = 1.0
    omega2: float = 1.0

    def __post_init__(self):
        if self.omega1 < 0 or self.omega2 < 0:
            raise ValueError("IoU weights must be non-negative")
        if abs(self.omega1 + self.omega2 - 2.0) > 1e-9:
            raise ValueError(f"omega1 + omega2 must equal 2, got {self.omega1 + self.omega2}")


@dataclass(frozen=True)
class Rect2D:
    """Axis-aligned image rectangle in pixels."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"invalid rectangle {self}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    def to_array(self) -> np.ndarray:
        return np.array([self.x_min, self.y_min, self.x_max, self.y_max])


def _as_box(box) -> Box7:
    return box if isinstance(box, Box7) else Box7.from_array(box)


# ---------------------------------------------------------------------------
# corners and footprints


def corners_3d(box: Box7) -> np.ndarray:
    """Return the 8 box corners as an ``(8, 3)`` array, row ``k`` = corner ``k``.

    Rotation ``R`` is about the z axis; corner order follows the half-extent
    sign pattern in ``_CORNER_SIGNS``.
    """
    box = _as_box(box)
    half = _CORNER_SIGNS * np.array([[box.l / 2.0], [box.w / 2.0], [box.h / 2.0]])
    c, s = math.cos(box.theta), math.sin(box.theta)
    xs = c * half[0] - s * half[1] + box.x
    ys = s * half[0] + c * half[1] + box.y
    zs = half[2] + box.z
    return np.stack([xs, ys, zs], axis=1)


def bev_polygon(box: Box7) -> np.ndarray:
    """BEV footprint of ``box`` as a ``(4, 2)`` array, counter-clockwise."""
    box = _as_box(box)
    return _k.footprint(box.x, box.y, box.l, box.w, box.theta)


def _ccw_array(poly) -> np.ndarray:
    pts = np.ascontiguousarray(poly, dtype=float).reshape(-1, 2)
    if _k.shoelace(pts, len(pts)) < 0:
        pts = pts[::-1].copy()
    return pts


def polygon_area(poly) -> float:
    pts = np.ascontiguousarray(poly, dtype=float).reshape(-1, 2)
    return abs(_k.shoelace(pts, len(pts)))


def convex_overlap_area(a, b) -> float:
    """Exact intersection area of two convex polygons (vertex arrays)."""
    poly, n = _k.clip(_ccw_array(a), _ccw_array(b))
    return max(0.0, _k.shoelace(poly, n))


def convex_hull(points) -> np.ndarray:
    """Convex hull vertices, counter-clockwise from the lexicographically smallest."""
    poly, n = _k.hull(np.ascontiguousarray(points, dtype=float).reshape(-1, 2))
    return poly[:n].copy()


# ---------------------------------------------------------------------------
# IoU-family similarities


def _kind_code(kind: str) -> int:
    try:
        return COST_KINDS.index(kind)
    except ValueError:
        raise ValueError(f"unknown cost kind {kind!r}") from None


def _terms(a, b) -> tuple:
    iou, area_pen, dist_pen = _k.pair_terms(_row(a), _row(b))
    if math.isnan(iou):
        raise DegenerateBox("box footprint has zero area")
    return iou, area_pen, dist_pen


def _row(box) -> np.ndarray:
    if isinstance(box, Box7):
        return np.array([box.x, box.y, box.z, box.l, box.w, box.h, box.theta])
    return np.asarray(box, dtype=float).reshape(7)


def ro_iou(a: Box7, b: Box7) -> float:
    return _terms(a, b)[0]


def ro_gdiou(a: Box7, b: Box7, weights: IouWeights = IouWeights()) -> float:
    """Rotated GIoU/DIoU blend on the BEV plane, in ``(-2, 1]``.

    ``iou - omega1 * (C - U) / C - omega2 * c**2 / d**2`` with ``C`` the area of
    the convex hull of both footprints, ``d`` its diameter and ``c`` the centre
    distance.
    """
    iou, area_pen, dist_pen = _terms(a, b)
    return iou - weights.omega1 * area_pen - weights.omega2 * dist_pen


def giou_bev(a: Box7, b: Box7) -> float:
    iou, area_pen, _ = _terms(a, b)
    return iou - area_pen


def diou_bev(a: Box7, b: Box7) -> float:
    iou, _, dist_pen = _terms(a, b)
    return iou - dist_pen


def similarity(a, b, kind: str = "ro_gdiou", weights: IouWeights = IouWeights()) -> float:
    """BEV similarity of the requested ``kind`` (one of :data:`COST_KINDS`)."""
    iou, area_pen, dist_pen = _terms(a, b)
    return _k.combine(iou, area_pen, dist_pen, _kind_code(kind), weights.omega1, weights.omega2)


_SUPPORT_DIRS = np.stack(
    [np.cos(np.arange(16) * TWO_PI / 16), np.sin(np.arange(16) * TWO_PI / 16)], axis=1
)


def _footprints_array(boxes: np.ndarray) -> np.ndarray:
    """``(K, 4, 2)`` footprint corners of ``(K, 7)`` boxes (any vertex order)."""
    c, s = np.cos(boxes[:, 6]), np.sin(boxes[:, 6])
    hl, hw = 0.5 * boxes[:, 3], 0.5 * boxes[:, 4]
    px = np.stack([hl, hl, -hl, -hl], axis=1)
    py = np.stack([-hw, hw, hw, -hw], axis=1)
    xs = c[:, None] * px - s[:, None] * py + boxes[:, 0:1]
    ys = s[:, None] * px + c[:, None] * py + boxes[:, 1:2]
    return np.stack([xs, ys], axis=2)


def _penalty_bounds(a: np.ndarray, b: np.ndarray) -> tuple:
    """Lower bounds on the area and distance penalties of disjoint pairs ``a[k], b[k]``.

    The diameter is exact (largest distance among the 8 corners). The hull
    area is bounded below by the polygon through the support points in 16
    evenly spaced directions: those points lie on the hull in
    counter-clockwise order, so the polygon is inscribed in it.
    """
    pts = np.concatenate([_footprints_array(a), _footprints_array(b)], axis=1)
    diff = pts[:, :, None, :] - pts[:, None, :, :]
    d2 = np.einsum("kijd,kijd->kij", diff, diff).max(axis=(1, 2))
    c2 = (a[:, 0] - b[:, 0]) ** 2 + (a[:, 1] - b[:, 1]) ** 2
    dist_pen = c2 / d2
    pick = np.argmax(pts @ _SUPPORT_DIRS.T, axis=1)
    sup = np.take_along_axis(pts, pick[:, :, None], axis=1)
    nxt = np.roll(sup, -1, axis=1)
    inscribed = 0.5 * np.sum(sup[:, :, 0] * nxt[:, :, 1] - nxt[:, :, 0] * sup[:, :, 1], axis=1)
    union = a[:, 3] * a[:, 4] + b[:, 3] * b[:, 4]
    enclose = np.maximum(inscribed, union)
    return (enclose - union) / enclose, dist_pen


def similarity_upper_bound(
    boxes_a: np.ndarray,
    boxes_b: np.ndarray,
    kind: str = "ro_gdiou",
    weights: IouWeights = IouWeights(),
    floor: Optional[float] = None,
) -> np.ndarray:
    """Cheap elementwise upper bound on :func:`similarity` for ``(N, 7)`` x ``(M, 7)`` boxes.

    Pairs whose circumscribed circles overlap get the trivial bound 1. The rest
    have zero IoU; a coarse bound uses only centre distance and radii, and
    pairs whose coarse bound is at least ``floor`` (all of them when ``floor``
    is ``None``) are refined with :func:`_penalty_bounds`.
    """
    if kind not in COST_KINDS:
        raise ValueError(f"unknown cost kind {kind!r}")
    a = np.asarray(boxes_a, dtype=float).reshape(-1, 7)
    b = np.asarray(boxes_b, dtype=float).reshape(-1, 7)
    c = np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
    ra = 0.5 * np.hypot(a[:, 3], a[:, 4])[:, None]
    rb = 0.5 * np.hypot(b[:, 3], b[:, 4])[None, :]
    dist_pen = c**2 / (c + ra + rb) ** 2
    area_pen = np.zeros_like(c)
    disjoint = c > ra + rb

    def combine(area_pen, dist_pen):
        if kind == "ro_gdiou":
            return -weights.omega1 * area_pen - weights.omega2 * dist_pen
        if kind == "giou":
            return -area_pen
        return -dist_pen

    coarse = combine(area_pen, dist_pen)
    refine = disjoint if floor is None else disjoint & (coarse >= floor)
    if refine.any():
        i, j = np.nonzero(refine)
        area_pen[i, j], dist_pen[i, j] = _penalty_bounds(a[i], b[j])
    # small slack keeps the bound safely above the exact value
    return np.where(disjoint, combine(area_pen, dist_pen) + 1e-9, 1.0)


def pairwise_similarity(
    boxes_a: np.ndarray,
    boxes_b: np.ndarray,
    kind: str = "ro_gdiou",
    weights: IouWeights = IouWeights(),
    mask: Optional[np.ndarray] = None,
) -> np.ndarray:
    """``(N, M)`` matrix of :func:`similarity`; entries outside ``mask`` are NaN."""
    a = np.asarray(boxes_a, dtype=float).reshape(-1, 7)
    b = np.asarray(boxes_b, dtype=float).reshape(-1, 7)
    out = np.full((len(a), len(b)), np.nan)
    code = _kind_code(kind)
    if mask is None:
        rows, cols = np.nonzero(np.ones(out.shape, dtype=bool))
    else:
        rows, cols = np.nonzero(mask)
    if len(rows):
        if not (np.all(a[:, 3:5] > 0) and np.all(b[:, 3:5] > 0)):
            raise DegenerateBox("box footprint has zero area")
        out[rows, cols] = _k.similarity_pairs(a, b, rows, cols, code, weights.omega1, weights.omega2)
    return out


# ---------------------------------------------------------------------------
# image plane


def sdiou_rv(a: Rect2D, b: Rect2D) -> float:
    """Image-plane IoU penalised by centre distance and size difference.

    ``iou - c**2 / d**2 - (dw**2 + dh**2) / (wc**2 + hc**2)`` where ``wc, hc``
    are the sides of the enclosing rectangle and ``d`` its diagonal.
    """
    iw = max(0.0, min(a.x_max, b.x_max) - max(a.x_min, b.x_min))
    ih = max(0.0, min(a.y_max, b.y_max) - max(a.y_min, b.y_min))
    inter = iw * ih
    union = a.width * a.height + b.width * b.height - inter
    wc = max(a.x_max, b.x_max) - min(a.x_min, b.x_min)
    hc = max(a.y_max, b.y_max) - min(a.y_min, b.y_min)
    diag2 = wc * wc + hc * hc
    (ax, ay), (bx, by) = a.center, b.center
    c2 = (ax - bx) ** 2 + (ay - by) ** 2
    shape = ((a.width - b.width) ** 2 + (a.height - b.height) ** 2) / diag2
    return inter / union - c2 / diag2 - shape


def project_box_to_image(box: Box7, calib) -> Optional[Rect2D]:
    """Project ``box`` through a pinhole camera; ``None`` when not visible.

    ``calib`` needs ``intrinsics`` (3x3), ``global_to_camera`` (4x4, camera z
    forward) and ``image_size`` (width, height). Corners behind the image plane
    are dropped; the bounds are clamped to the image.
    """
    box = _as_box(box)
    g2c = np.asarray(calib.global_to_camera, dtype=float)
    k = np.asarray(calib.intrinsics, dtype=float)
    center = g2c[:3, :3] @ np.array([box.x, box.y, box.z]) + g2c[:3, 3]
    if center[2] <= 0.0:
        return None
    cam = corners_3d(box) @ g2c[:3, :3].T + g2c[:3, 3]
    cam = cam[cam[:, 2] > 1e-6]
    u = k[0, 0] * cam[:, 0] / cam[:, 2] + k[0, 2]
    v = k[1, 1] * cam[:, 1] / cam[:, 2] + k[1, 2]
    width, height = calib.image_size
    x0, x1 = max(0.0, float(u.min())), min(float(width), float(u.max()))
    y0, y1 = max(0.0, float(v.min())), min(float(height), float(v.max()))
    if not (x0 < x1 and y0 < y1):
        return None
    return Rect2D(x0, y0, x1, y1)
