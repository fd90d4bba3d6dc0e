"""Simplified CLEAR-MOT counting with centre-distance matching.

This is a desk-scale counter, not an official benchmark toolkit: per frame,
gt and tracked boxes are paired greedily by BEV centre distance, and an
identity switch is recorded whenever a gt object is matched to a different
track id than at its previous match.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional


@dataclass(frozen=True)
class IdSwitch:
    frame_index: int
    gt_id: object
    old_track_id: int
    new_track_id: int


@dataclass(frozen=True)
class ClearCounts:
    tp: int
    fp: int
    fn: int
    idsw: int
    gt_count: int
    switches: tuple = field(default=(), compare=False)

    @property
    def mota(self) -> float:
        if self.gt_count == 0:
            return float("nan")
        return 1.0 - (self.fp + self.fn + self.idsw) / self.gt_count

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "idsw": self.idsw,
            "gt_count": self.gt_count,
            "mota": None if self.gt_count == 0 else self.mota,
            "switches": [
                {"frame_index": s.frame_index, "gt_id": s.gt_id, "old_track_id": s.old_track_id, "new_track_id": s.new_track_id}
                for s in self.switches
            ],
        }


def _greedy_pairs(gts, preds, threshold: float) -> list:
    cand = []
    for i, g in enumerate(gts):
        for j, p in enumerate(preds):
            d = math.hypot(g.global_xyz[0] - p.global_xyz[0], g.global_xyz[1] - p.global_xyz[1])
            if d <= threshold:
                cand.append((d, i, j))
    cand.sort()
    used_g, used_p, out = set(), set(), []
    for _, i, j in cand:
        if i not in used_g and j not in used_p:
            used_g.add(i)
            used_p.add(j)
            out.append((i, j))
    return out


def clear_counts(gt_scene, tracked_frames, threshold: float = 2.0, from_frame: Optional[int] = None) -> ClearCounts:
    """Count TP/FP/FN/IDSW of ``tracked_frames`` against ``gt_scene``.

    ``tracked_frames`` holds objects with ``frame_index`` and ``boxes`` (as
    read from tracking output). Frames before ``from_frame`` are ignored
    entirely, which is how a confirmation window is excluded.
    """
    by_frame = {f.frame_index: f.boxes for f in tracked_frames}
    last_match: dict = {}
    tp = fp = fn = gt_count = 0
    switches = []
    for frame in gt_scene.frames:
        if from_frame is not None and frame.frame_index < from_frame:
            continue
        gts = frame.detections
        preds = by_frame.get(frame.frame_index, ())
        pairs = _greedy_pairs(gts, preds, threshold)
        gt_count += len(gts)
        tp += len(pairs)
        fn += len(gts) - len(pairs)
        fp += len(preds) - len(pairs)
        for i, j in pairs:
            gid, tid = gts[i].tracking_id, preds[j].track_id
            prev = last_match.get(gid)
            if prev is not None and prev != tid:
                switches.append(IdSwitch(frame.frame_index, gid, prev, tid))
            last_match[gid] = tid
    return ClearCounts(tp, fp, fn, len(switches), gt_count, tuple(switches))
