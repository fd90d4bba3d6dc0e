"""Compiled polygon kernels behind :mod:`bevtrack.geometry`.

Polygons are ``(n, 2)`` float arrays in counter-clockwise order. Box
footprints start at their lexicographically smallest vertex; with that
convention the hull of two coincident footprints reproduces the footprint
exactly, which keeps the identical-box similarity at exactly 1.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

# similarity kinds, in the order of geometry.COST_KINDS
KIND_RO_GDIOU, KIND_GIOU, KIND_DIOU = 0, 1, 2


@njit(cache=True)
def footprint(x, y, l, w, theta):
    c, s = math.cos(theta), math.sin(theta)
    hl, hw = l / 2.0, w / 2.0
    # corners 2, 3, 7, 6 of the 3D corner pattern
    px = (hl, hl, -hl, -hl)
    py = (-hw, hw, hw, -hw)
    tmp = np.empty((4, 2))
    for k in range(4):
        tmp[k, 0] = c * px[k] - s * py[k] + x
        tmp[k, 1] = s * px[k] + c * py[k] + y
    start = 0
    for k in range(1, 4):
        if tmp[k, 0] < tmp[start, 0] or (tmp[k, 0] == tmp[start, 0] and tmp[k, 1] < tmp[start, 1]):
            start = k
    out = np.empty((4, 2))
    for k in range(4):
        out[k, 0] = tmp[(start + k) % 4, 0]
        out[k, 1] = tmp[(start + k) % 4, 1]
    return out


@njit(cache=True)
def shoelace(pts, n):
    """Signed area of the first ``n`` vertices of ``pts``."""
    if n < 3:
        return 0.0
    acc = 0.0
    x0, y0 = pts[n - 1, 0], pts[n - 1, 1]
    for k in range(n):
        x1, y1 = pts[k, 0], pts[k, 1]
        acc += x0 * y1 - x1 * y0
        x0, y0 = x1, y1
    return 0.5 * acc


@njit(cache=True)
def clip(subject, clipper):
    """Sutherland-Hodgman: convex ``subject`` clipped by convex CCW ``clipper``.

    Returns ``(vertices, count)``; only the first ``count`` rows are valid.
    """
    cap = subject.shape[0] + clipper.shape[0] + 1
    cur = np.empty((cap, 2))
    nxt = np.empty((cap, 2))
    n = subject.shape[0]
    cur[:n] = subject
    m = clipper.shape[0]
    for k in range(m):
        if n < 3:
            return cur, 0
        ax, ay = clipper[k, 0], clipper[k, 1]
        bx, by = clipper[(k + 1) % m, 0], clipper[(k + 1) % m, 1]
        ex, ey = bx - ax, by - ay
        out = 0
        px, py = cur[n - 1, 0], cur[n - 1, 1]
        ps = ex * (py - ay) - ey * (px - ax)
        for i in range(n):
            qx, qy = cur[i, 0], cur[i, 1]
            qs = ex * (qy - ay) - ey * (qx - ax)
            if qs >= 0.0:
                if ps < 0.0:
                    t = ps / (ps - qs)
                    nxt[out, 0] = px + t * (qx - px)
                    nxt[out, 1] = py + t * (qy - py)
                    out += 1
                nxt[out, 0] = qx
                nxt[out, 1] = qy
                out += 1
            elif ps >= 0.0:
                t = ps / (ps - qs)
                nxt[out, 0] = px + t * (qx - px)
                nxt[out, 1] = py + t * (qy - py)
                out += 1
            px, py, ps = qx, qy, qs
        cur, nxt = nxt, cur
        n = out
    return cur, n


@njit(cache=True)
def _less(pts, i, j):
    return pts[i, 0] < pts[j, 0] or (pts[i, 0] == pts[j, 0] and pts[i, 1] < pts[j, 1])


@njit(cache=True)
def hull(points):
    """Monotone-chain convex hull, CCW from the smallest vertex, collinear points dropped.

    Returns ``(vertices, count)``.
    """
    n = points.shape[0]
    pts = points.copy()
    # insertion sort, lexicographic on (x, y)
    for i in range(1, n):
        j = i
        while j > 0 and _less(pts, j, j - 1):
            tx, ty = pts[j, 0], pts[j, 1]
            pts[j, 0], pts[j, 1] = pts[j - 1, 0], pts[j - 1, 1]
            pts[j - 1, 0], pts[j - 1, 1] = tx, ty
            j -= 1
    # drop exact duplicates
    u = 0
    for i in range(n):
        if u == 0 or pts[i, 0] != pts[u - 1, 0] or pts[i, 1] != pts[u - 1, 1]:
            pts[u, 0], pts[u, 1] = pts[i, 0], pts[i, 1]
            u += 1
    out = np.empty((2 * u + 1, 2))
    if u <= 2:
        out[:u] = pts[:u]
        return out, u
    k = 0
    for i in range(u):
        px, py = pts[i, 0], pts[i, 1]
        while k >= 2:
            ox, oy = out[k - 2, 0], out[k - 2, 1]
            ax, ay = out[k - 1, 0], out[k - 1, 1]
            if (ax - ox) * (py - oy) - (ay - oy) * (px - ox) > 0.0:
                break
            k -= 1
        out[k, 0], out[k, 1] = px, py
        k += 1
    lower = k
    for i in range(u - 2, -1, -1):
        px, py = pts[i, 0], pts[i, 1]
        while k >= lower + 1:
            ox, oy = out[k - 2, 0], out[k - 2, 1]
            ax, ay = out[k - 1, 0], out[k - 1, 1]
            if (ax - ox) * (py - oy) - (ay - oy) * (px - ox) > 0.0:
                break
            k -= 1
        out[k, 0], out[k, 1] = px, py
        k += 1
    # the last point repeats the first
    return out, k - 1


@njit(cache=True)
def diameter_sq(pts, n):
    best = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            dx = pts[i, 0] - pts[j, 0]
            dy = pts[i, 1] - pts[j, 1]
            d2 = dx * dx + dy * dy
            if d2 > best:
                best = d2
    return best


@njit(cache=True)
def _precedes(ta, tb):
    """Lexicographic ``tb < ta`` on 7-vectors."""
    for k in range(7):
        if tb[k] < ta[k]:
            return True
        if tb[k] > ta[k]:
            return False
    return False


@njit(cache=True)
def terms(ta, pa, tb, pb):
    """IoU, enclosing-area penalty and centre-distance penalty.

    ``ta``/``tb`` are ``(x, y, z, l, w, h, theta)`` and ``pa``/``pb`` their
    footprints. The pair is put in a fixed order first so the result is
    exactly symmetric. Zero-area footprints give NaN.
    """
    if _precedes(ta, tb):
        ta, tb, pa, pb = tb, ta, pb, pa
    area_a, area_b = shoelace(pa, 4), shoelace(pb, 4)
    if not (area_a > 0.0 and area_b > 0.0):
        return np.nan, np.nan, np.nan
    dx, dy = ta[0] - tb[0], ta[1] - tb[1]
    c2 = dx * dx + dy * dy
    reach = 0.5 * (math.hypot(ta[3], ta[4]) + math.hypot(tb[3], tb[4]))
    inter = 0.0
    # footprints cannot meet when their circumscribed circles are apart
    if c2 <= reach * reach:
        poly, n = clip(pa, pb)
        inter = max(0.0, shoelace(poly, n))
    union = area_a + area_b - inter
    both = np.empty((8, 2))
    both[:4] = pa
    both[4:] = pb
    h, n = hull(both)
    enclose = shoelace(h, n)
    d2 = diameter_sq(h, n)
    return inter / union, max(0.0, enclose - union) / enclose, c2 / d2


@njit(cache=True)
def combine(iou, area_pen, dist_pen, kind, omega1, omega2):
    if kind == KIND_RO_GDIOU:
        return iou - omega1 * area_pen - omega2 * dist_pen
    if kind == KIND_GIOU:
        return iou - area_pen
    return iou - dist_pen


@njit(cache=True)
def pair_terms(ta, tb):
    pa = footprint(ta[0], ta[1], ta[3], ta[4], ta[6])
    pb = footprint(tb[0], tb[1], tb[3], tb[4], tb[6])
    return terms(ta, pa, tb, pb)


@njit(cache=True)
def similarity_pairs(a, b, rows, cols, kind, omega1, omega2):
    """Similarity for the listed ``(rows[k], cols[k])`` pairs of ``a`` x ``b``."""
    fa = np.empty((a.shape[0], 4, 2))
    fb = np.empty((b.shape[0], 4, 2))
    done_a = np.zeros(a.shape[0], dtype=np.bool_)
    done_b = np.zeros(b.shape[0], dtype=np.bool_)
    out = np.empty(rows.shape[0])
    for k in range(rows.shape[0]):
        i, j = rows[k], cols[k]
        if not done_a[i]:
            fa[i] = footprint(a[i, 0], a[i, 1], a[i, 3], a[i, 4], a[i, 6])
            done_a[i] = True
        if not done_b[j]:
            fb[j] = footprint(b[j, 0], b[j, 1], b[j, 3], b[j, 4], b[j, 6])
            done_b[j] = True
        iou, area_pen, dist_pen = terms(a[i], fa[i], b[j], fb[j])
        out[k] = combine(iou, area_pen, dist_pen, kind, omega1, omega2)
    return out
