"""Online tracking loop: preprocess, predict, match, update, manage lifecycles."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .association import TrackView, two_stage_match
from .baseversion import DetectionBox, FrameRecord, LifecycleState, SceneRecord, TrackedBox, TrackingFrame
from .config import TrackerConfig
from .errors import NonMonotonicTimestamp
from .filters import FilterStates, init_from_detection, predict_many, update_many
from .geometry import Box7, ro_iou


@dataclass(frozen=True)
class Track:
    track_id: int
    category: str
    filters: FilterStates
    lifecycle_state: LifecycleState
    hit_count: int
    miss_count: int
    last_update_time: float
    last_detection: DetectionBox

    @property
    def box(self) -> Box7:
        """Filtered box; z and h come from the last matched detection."""
        (x, y), (l, w) = self.filters.position.xy, self.filters.size.lw
        z, h = self.last_detection.global_xyz[2], self.last_detection.lwh[2]
        return Box7(float(x), float(y), z, float(l), float(w), h, self.filters.heading.theta_p)

    @property
    def velocity(self) -> tuple:
        vx, vy = self.filters.position.velocity
        return (float(vx), float(vy))

    def to_tracked_box(self, state: LifecycleState) -> TrackedBox:
        box = self.box
        ax, ay = self.filters.position.acceleration
        return TrackedBox(
            track_id=self.track_id,
            category=self.category,
            score=self.last_detection.score,
            global_xyz=(box.x, box.y, box.z),
            lwh=(box.l, box.w, box.h),
            global_yaw=box.theta,
            velocity=self.velocity,
            acceleration=(float(ax), float(ay)),
            state=state,
        )


@dataclass(frozen=True)
class TrackerState:
    tracks: tuple = ()
    next_id: int = 1
    last_timestamp: Optional[float] = None


# ---------------------------------------------------------------------------
# preprocessing


def preprocess(dets: Sequence[DetectionBox], cfg: TrackerConfig) -> list:
    """Score filter followed by per-category NMS on BEV rotated IoU.

    Survivors keep their input order.
    """
    kept_idx = [i for i, d in enumerate(dets) if d.score >= cfg.lifecycle_for(d.category).score_threshold]
    survivors = []
    for cat in sorted({dets[i].category for i in kept_idx}):
        idx = sorted((i for i in kept_idx if dets[i].category == cat), key=lambda i: (-dets[i].score, i))
        thr = cfg.lifecycle_for(cat).nms_iou_threshold
        rows = np.array([dets[i].as_row() for i in idx])
        radius = 0.5 * np.hypot(rows[:, 3], rows[:, 4])
        centre_gap = np.hypot(rows[:, None, 0] - rows[None, :, 0], rows[:, None, 1] - rows[None, :, 1])
        # circumscribed circles apart means zero overlap
        near = centre_gap < radius[:, None] + radius[None, :]
        keep: list = []
        kept = np.zeros(len(idx), dtype=bool)
        for k, i in enumerate(idx):
            rivals = np.nonzero(near[k, :k] & kept[:k])[0]
            if not any(ro_iou(dets[i].box7, dets[idx[m]].box7) > thr for m in rivals.tolist()):
                keep.append(k)
                kept[k] = True
        survivors.extend(idx[k] for k in keep)
    return [dets[i] for i in sorted(survivors)]


# ---------------------------------------------------------------------------
# main loop


def _spawn(det: DetectionBox, track_id: int, t: float, cfg: TrackerConfig) -> Track:
    confirmed = cfg.lifecycle_for(det.category).confirm_hits <= 1
    return Track(
        track_id=track_id,
        category=det.category,
        filters=init_from_detection(det, cfg.noise_for(det.category)),
        lifecycle_state=LifecycleState.CONFIRMED if confirmed else LifecycleState.TENTATIVE,
        hit_count=1,
        miss_count=0,
        last_update_time=t,
        last_detection=det,
    )


def step(state: TrackerState, frame: FrameRecord, cfg: TrackerConfig = TrackerConfig()):
    """Advance the tracker by one frame; returns ``(new_state, emitted_boxes)``."""
    t = float(frame.timestamp)
    if state.last_timestamp is not None and not t > state.last_timestamp:
        raise NonMonotonicTimestamp(f"timestamp {t} does not follow {state.last_timestamp}")
    tracks = list(state.tracks)
    dt = t - state.last_timestamp if state.last_timestamp is not None else 0.0

    # snapshot at the previous frame, then predict to this one
    views: list = []
    if tracks:
        prev = [(tr.box, tr.velocity) for tr in tracks]
        predicted = predict_many([tr.filters for tr in tracks], dt, [cfg.noise_for(tr.category) for tr in tracks])
        tracks = [dataclasses.replace(tr, filters=f) for tr, f in zip(tracks, predicted)]
        views = [
            TrackView(tr.track_id, tr.category, box, vel, tr.box) for tr, (box, vel) in zip(tracks, prev)
        ]

    dets = preprocess(frame.detections, cfg)
    if views:
        matches = two_stage_match(dets, views, frame, cfg.association, dt, cfg.rv_enabled)
        pairs, unmatched_dets = matches.pairs, matches.unmatched_detections
    else:
        pairs, unmatched_dets = (), tuple(range(len(dets)))

    by_id = {tr.track_id: k for k, tr in enumerate(tracks)}
    matched = {by_id[tid]: d for d, tid in pairs}
    if matched:
        order = sorted(matched)
        updated = update_many(
            [tracks[k].filters for k in order],
            [dets[matched[k]] for k in order],
            [cfg.noise_for(tracks[k].category) for k in order],
        )
        for k, f in zip(order, updated):
            tr, det = tracks[k], dets[matched[k]]
            hits = tr.hit_count + 1
            confirmed = tr.lifecycle_state == LifecycleState.CONFIRMED or hits >= cfg.lifecycle_for(tr.category).confirm_hits
            tracks[k] = dataclasses.replace(
                tr,
                filters=f,
                hit_count=hits,
                miss_count=0,
                last_update_time=t,
                last_detection=det,
                lifecycle_state=LifecycleState.CONFIRMED if confirmed else LifecycleState.TENTATIVE,
            )

    survivors = []
    for k, tr in enumerate(tracks):
        if k not in matched:
            tr = dataclasses.replace(tr, miss_count=tr.miss_count + 1)
            if tr.miss_count > cfg.lifecycle_for(tr.category).max_misses:
                continue
        survivors.append(tr)

    next_id = state.next_id
    for d in unmatched_dets:
        det = dets[d]
        if det.score >= cfg.lifecycle_for(det.category).spawn_threshold:
            survivors.append(_spawn(det, next_id, t, cfg))
            next_id += 1

    emitted = []
    for tr in survivors:
        if tr.lifecycle_state != LifecycleState.CONFIRMED:
            continue
        if tr.miss_count == 0:
            emitted.append(tr.to_tracked_box(LifecycleState.CONFIRMED))
        elif cfg.emit_coasted:
            emitted.append(tr.to_tracked_box(LifecycleState.LOST))
    return TrackerState(tuple(survivors), next_id, t), emitted


def run_scene(scene: SceneRecord, cfg: TrackerConfig = TrackerConfig()) -> list:
    """Track a whole scene; returns ``[(frame, emitted_boxes), ...]``."""
    state = TrackerState()
    out = []
    for frame in scene.frames:
        state, boxes = step(state, frame, cfg)
        out.append((frame, boxes))
    return out


def as_tracking_frames(scene_id: str, results: Sequence[tuple]) -> list:
    """Convert :func:`run_scene` output into :class:`TrackingFrame` records."""
    return [TrackingFrame(scene_id, f.frame_index, f.timestamp, tuple(boxes)) for f, boxes in results]
