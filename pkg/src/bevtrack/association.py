"""Bidirectional BEV cost, Hungarian and greedy solvers, two-stage matching.

Stage 1 compares detections with tracks in the BEV plane, in both time
directions: each detection against the track pushed forward to the current
frame, and the detection pushed back against the track's previous box. Stage 2
takes whatever is left, projects it into the camera images and matches there
with SDIoU, which is insensitive to errors along the viewing ray.

Thresholds are stored in similarity units (higher is better); solvers work on
costs, the negated similarities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .categories import lookup
from .geometry import (
    COST_KINDS,
    Box7,
    IouWeights,
    pairwise_similarity,
    project_box_to_image,
    sdiou_rv,
    similarity_upper_bound,
)

# Finite stand-in for pairs that were skipped because they cannot pass the gate.
INFEASIBLE_COST = 1e6


class TrackView(NamedTuple):
    """What association needs to know about a track.

    ``box`` and ``velocity`` are the filtered state at the previous frame;
    ``predicted`` is the filter prediction at the current frame time.
    """

    track_id: int
    category: str
    box: Box7
    velocity: tuple
    predicted: Box7


@dataclass(frozen=True)
class CostMatrix:
    values: np.ndarray
    row_ids: tuple
    col_ids: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(len(self.row_ids), len(self.col_ids))
        if not np.all(np.isfinite(values)):
            raise ValueError("cost matrix entries must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "row_ids", tuple(self.row_ids))
        object.__setattr__(self, "col_ids", tuple(self.col_ids))


@dataclass(frozen=True)
class MatchSet:
    pairs: tuple = ()
    unmatched_detections: tuple = ()
    unmatched_tracks: tuple = ()

    def __post_init__(self):
        dets = [d for d, _ in self.pairs] + list(self.unmatched_detections)
        trks = [t for _, t in self.pairs] + list(self.unmatched_tracks)
        if len(set(dets)) != len(dets) or len(set(trks)) != len(trks):
            raise ValueError("an id appears more than once in the match set")

    def total_cost(self, cost: CostMatrix) -> float:
        rows = {r: i for i, r in enumerate(cost.row_ids)}
        cols = {c: j for j, c in enumerate(cost.col_ids)}
        return float(sum(cost.values[rows[d], cols[t]] for d, t in self.pairs))


def _default_bev() -> dict:
    return {"vehicle": -0.5, "vulnerable": -1.0, "default": -0.75}


def _default_rv() -> dict:
    return {"default": 0.1}


@dataclass(frozen=True)
class AssocConfig:
    """Association parameters.

    ``threshold_bev`` and ``threshold_rv`` map a category, a category group or
    ``"default"`` to the lowest similarity that may still form a pair.
    """

    alpha: float = 0.5
    weights: IouWeights = IouWeights()
    threshold_bev: Mapping[str, float] = field(default_factory=_default_bev)
    threshold_rv: Mapping[str, float] = field(default_factory=_default_rv)
    cost_kind: str = "ro_gdiou"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.cost_kind not in COST_KINDS:
            raise ValueError(f"cost_kind must be one of {COST_KINDS}, got {self.cost_kind!r}")
        for table in (self.threshold_bev, self.threshold_rv):
            if not all(math.isfinite(v) for v in table.values()):
                raise ValueError("association thresholds must be finite")


# ---------------------------------------------------------------------------
# motion


def _shift(box: Box7, dx: float, dy: float) -> Box7:
    return Box7(box.x + dx, box.y + dy, box.z, box.l, box.w, box.h, box.theta)


def backward_predict(det, dt: float) -> Box7:
    """The detection's box moved back by ``dt`` seconds at constant velocity."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    vx, vy = det.global_velocity
    return _shift(det.box7, -vx * dt, -vy * dt)


def forward_predict(track, dt: float) -> Box7:
    """The track's previous box moved forward by ``dt`` seconds at constant velocity."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    vx, vy = track.velocity
    return _shift(track.box, vx * dt, vy * dt)


# ---------------------------------------------------------------------------
# cost


def bidirectional_cost(
    dets: Sequence,
    tracks: Sequence[TrackView],
    dt: float,
    cfg: AssocConfig = AssocConfig(),
    det_ids: Optional[Sequence] = None,
    gate: Optional[float] = None,
) -> CostMatrix:
    """Cost matrix (rows: detections, cols: tracks) blending both time directions.

    With ``gate`` set, pairs whose cost provably exceeds it are not evaluated
    and hold :data:`INFEASIBLE_COST` instead.
    """
    row_ids = tuple(range(len(dets))) if det_ids is None else tuple(det_ids)
    col_ids = tuple(t.track_id for t in tracks)
    if not dets or not tracks:
        return CostMatrix(np.zeros((len(dets), len(tracks))), row_ids, col_ids)
    a = cfg.alpha
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    # same arithmetic as forward_predict / backward_predict, on whole arrays
    prev = np.array([t.box.to_array() for t in tracks])
    fwd = prev.copy()
    fwd[:, 0:2] += np.array([t.velocity for t in tracks], dtype=float) * dt
    cur = np.array([d.as_row() for d in dets], dtype=float)
    back = cur.copy()
    back[:, 0:2] -= np.array([d.global_velocity for d in dets], dtype=float) * dt
    kind, w = cfg.cost_kind, cfg.weights

    mask = None
    if gate is not None:
        floor = -gate
        bound = a * similarity_upper_bound(cur, fwd, kind, w, floor) + (1 - a) * similarity_upper_bound(
            back, prev, kind, w, floor
        )
        mask = -bound <= gate
    sim = np.zeros((len(dets), len(tracks)))
    if a > 0:
        sim += a * pairwise_similarity(cur, fwd, kind, w, mask)
    if a < 1:
        sim += (1 - a) * pairwise_similarity(back, prev, kind, w, mask)
    values = -sim
    if mask is not None:
        values[~mask] = INFEASIBLE_COST
    return CostMatrix(values, row_ids, col_ids)


# ---------------------------------------------------------------------------
# solvers


def _unmatched(cost: CostMatrix, pairs: list) -> MatchSet:
    used_r = {r for r, _ in pairs}
    used_c = {c for _, c in pairs}
    return MatchSet(
        tuple(pairs),
        tuple(r for r in cost.row_ids if r not in used_r),
        tuple(c for c in cost.col_ids if c not in used_c),
    )


def hungarian(cost: CostMatrix, threshold: float = math.inf) -> MatchSet:
    """Minimum-cost assignment over entries ``<= threshold``.

    Inadmissible entries are replaced by a penalty large enough that the solver
    first maximises the number of admissible pairs; any pair still above the
    threshold after solving is dropped.
    """
    values = cost.values
    if values.size == 0:
        return _unmatched(cost, [])
    admissible = values <= threshold
    if not admissible.any():
        return _unmatched(cost, [])
    work = values
    if not admissible.all():
        lo, hi = values[admissible].min(), values[admissible].max()
        penalty = hi + (hi - lo + 1.0) * min(values.shape)
        work = np.where(admissible, values, penalty)
    rows, cols = linear_sum_assignment(work)
    pairs = [
        (cost.row_ids[r], cost.col_ids[c])
        for r, c in sorted(zip(rows.tolist(), cols.tolist()))
        if admissible[r, c]
    ]
    return _unmatched(cost, pairs)


def greedy(cost: CostMatrix, threshold: float = math.inf) -> MatchSet:
    """Repeatedly take the cheapest remaining admissible entry.

    Ties go to the smaller row index, then the smaller column index.
    """
    values = cost.values
    rows, cols = np.nonzero(values <= threshold)
    order = np.lexsort((cols, rows, values[rows, cols]))
    used_r, used_c, pairs = set(), set(), []
    for k in order.tolist():
        r, c = int(rows[k]), int(cols[k])
        if r in used_r or c in used_c:
            continue
        used_r.add(r)
        used_c.add(c)
        pairs.append((cost.row_ids[r], cost.col_ids[c]))
    return _unmatched(cost, pairs)


# ---------------------------------------------------------------------------
# two-stage procedure


def _is_front(camera_id: str) -> bool:
    name = camera_id.lower()
    return name in ("front", "cam_front") or name.endswith("_front")


def ordered_cameras(calibs: Sequence) -> list:
    """Calibrations with front-facing cameras first, otherwise in document order."""
    return sorted(calibs, key=lambda c: not _is_front(c.camera_id))


def _stage_one(dets, tracks, dt, cfg: AssocConfig) -> list:
    pairs = []
    categories = sorted({d.category for d in dets} & {t.category for t in tracks})
    for cat in categories:
        d_idx = [i for i, d in enumerate(dets) if d.category == cat]
        t_sub = [t for t in tracks if t.category == cat]
        gate = -lookup(cfg.threshold_bev, cat)
        cost = bidirectional_cost([dets[i] for i in d_idx], t_sub, dt, cfg, det_ids=d_idx, gate=gate)
        pairs.extend(hungarian(cost, gate).pairs)
    return pairs


def _stage_two(dets, tracks, det_ids, calibs, cfg: AssocConfig) -> list:
    pairs = []
    free_d = list(det_ids)
    free_t = list(range(len(tracks)))
    for calib in ordered_cameras(calibs):
        if not free_d or not free_t:
            break
        d_rect = {i: project_box_to_image(dets[i].box7, calib) for i in free_d}
        t_rect = {j: project_box_to_image(tracks[j].predicted, calib) for j in free_t}
        d_vis = [i for i in free_d if d_rect[i] is not None]
        t_vis = [j for j in free_t if t_rect[j] is not None]
        for cat in sorted({dets[i].category for i in d_vis} & {tracks[j].category for j in t_vis}):
            rows = [i for i in d_vis if dets[i].category == cat]
            cols = [j for j in t_vis if tracks[j].category == cat]
            values = np.array([[-sdiou_rv(d_rect[i], t_rect[j]) for j in cols] for i in rows])
            found = greedy(CostMatrix(values, rows, cols), -lookup(cfg.threshold_rv, cat)).pairs
            pairs.extend((i, tracks[j].track_id) for i, j in found)
            matched_d = {i for i, _ in found}
            matched_t = {j for _, j in found}
            free_d = [i for i in free_d if i not in matched_d]
            free_t = [j for j in free_t if j not in matched_t]
    return pairs


def two_stage_match(
    dets: Sequence,
    tracks: Sequence[TrackView],
    frame,
    cfg: AssocConfig = AssocConfig(),
    dt: float = 0.1,
    rv_enabled: bool = True,
) -> MatchSet:
    """Match detections (ids are list indices) with tracks (ids are track ids).

    Matching never crosses categories. ``frame`` supplies the camera
    calibrations for stage 2; without any, only stage 1 runs.
    """
    pairs = _stage_one(dets, tracks, dt, cfg) if dets and tracks else []
    calibs = getattr(frame, "camera_calibrations", ()) if frame is not None else ()
    if rv_enabled and calibs:
        used_d = {d for d, _ in pairs}
        used_t = {t for _, t in pairs}
        rest_d = [i for i in range(len(dets)) if i not in used_d]
        rest_t = [t for t in tracks if t.track_id not in used_t]
        if rest_d and rest_t:
            pairs.extend(_stage_two(dets, rest_t, rest_d, calibs, cfg))
    pairs.sort()
    used_d = {d for d, _ in pairs}
    used_t = {t for _, t in pairs}
    return MatchSet(
        tuple(pairs),
        tuple(i for i in range(len(dets)) if i not in used_d),
        tuple(t.track_id for t in tracks if t.track_id not in used_t),
    )
