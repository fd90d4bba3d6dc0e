"""Velocity-quality metrics, Savitzky-Golay smoothing and baseline estimators.

Metrics compare a tracked velocity series against ground truth:

* ``vae``  signed, wrapped angle between the two velocity directions;
* ``vaie`` mean angle error over samples where the direction is inverted
  (``|vae| > pi/2``), and ``vir`` the fraction of such samples;
* ``vne``  absolute speed difference;
* ``vse``  mean deviation of the tracked speed from its SG-smoothed version;
* ``vde``  lag, in frames, that best aligns the tracked speed with the ground
  truth around ground-truth speed peaks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .categories import lookup
from .errors import EmptySeries, NoPeaks, SeriesTooShort
from .geometry import TWO_PI

HALF_PI = 0.5 * math.pi
# gt speed below which the velocity direction is considered undefined (m/s)
MIN_ANGLE_SPEED = 0.2
DEFAULT_MATCH_DISTANCE = {"vehicle": 2.0, "vulnerable": 1.0, "default": 2.0}


@dataclass(frozen=True)
class SGParams:
    window: int = 5
    order: int = 2

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"SG window must be an odd integer >= 3, got {self.window}")
        if not 0 <= self.order < self.window:
            raise ValueError(f"SG order must satisfy 0 <= order < window, got {self.order}")


@dataclass(frozen=True, eq=False)
class VelocitySeries:
    timestamps: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float).reshape(-1)
        v = np.asarray(self.velocities, dtype=float).reshape(-1, 2)
        if len(t) != len(v):
            raise ValueError("timestamps and velocities differ in length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "velocities", v)

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def speed(self) -> np.ndarray:
        return np.hypot(self.velocities[:, 0], self.velocities[:, 1])

    @property
    def heading(self) -> np.ndarray:
        return np.arctan2(self.velocities[:, 1], self.velocities[:, 0])


@dataclass(frozen=True)
class MotionReport:
    """Aggregate metrics; angles in degrees, speeds in m/s."""

    tp: int
    n_samples: int
    vae: Optional[float]
    vae_signed: Optional[float]
    vne: Optional[float]
    vaie: Optional[float]
    vir: Optional[float]
    vse: Optional[float]
    vde_frames: Optional[float]
    vde_seconds: Optional[float]
    n_trajectories: int = 0

    def to_dict(self) -> dict:
        return {
            "TP": self.tp,
            "n_samples": self.n_samples,
            "n_trajectories": self.n_trajectories,
            "VAE_deg": self.vae,
            "VAE_signed_deg": self.vae_signed,
            "VNE_mps": self.vne,
            "VDE_frames": self.vde_frames,
            "VDE_s": self.vde_seconds,
            "VSE_mps": self.vse,
            "VAIE_deg": self.vaie,
            "VIR_pct": None if self.vir is None else 100.0 * self.vir,
        }


# ---------------------------------------------------------------------------
# elementary metrics


def vae(theta_gt, theta_d):
    """Signed angle error ``(gt - d + pi) mod 2pi - pi``, with ``-pi`` sent to ``+pi``."""
    if isinstance(theta_gt, np.ndarray) or isinstance(theta_d, np.ndarray):
        e = np.mod(np.asarray(theta_gt, dtype=float) - theta_d + math.pi, TWO_PI) - math.pi
        return np.where(e == -math.pi, math.pi, e)
    e = (float(theta_gt) - float(theta_d) + math.pi) % TWO_PI - math.pi
    return math.pi if e == -math.pi else e


def vaie_vir(errors) -> tuple:
    """``(VAIE, VIR)`` from signed angle errors; VAIE is ``None`` without inversions."""
    e = np.abs(np.asarray(errors, dtype=float).reshape(-1))
    if e.size == 0:
        raise EmptySeries("angle error series is empty")
    inverted = e > HALF_PI
    count = int(inverted.sum())
    return (float(e[inverted].mean()) if count else None), count / e.size


def vne(v_gt, v_d):
    """Absolute speed difference (scalars or arrays)."""
    if np.ndim(v_gt) or np.ndim(v_d):
        return np.abs(np.asarray(v_gt, dtype=float) - np.asarray(v_d, dtype=float))
    return abs(float(v_gt) - float(v_d))


def _sg_row(offsets: np.ndarray, order: int) -> np.ndarray:
    """Weights giving the fitted polynomial's value at offset 0."""
    vander = np.vander(offsets.astype(float), order + 1, increasing=True)
    return np.linalg.pinv(vander)[0]


def savitzky_golay(series, params: SGParams = SGParams()) -> np.ndarray:
    """Smooth by local least-squares polynomial fits.

    Interior samples use the centred window. Near the ends the window is cut
    at the boundary and the polynomial refit on what remains, with the order
    lowered when too few points are left.
    """
    y = np.asarray(series, dtype=float).reshape(-1)
    n, half = len(y), params.window // 2
    if n < params.window:
        raise SeriesTooShort(f"series of length {n} is shorter than the SG window {params.window}")
    out = np.empty(n)
    centre = _sg_row(np.arange(-half, half + 1), params.order)
    out[half : n - half] = np.convolve(y, centre[::-1], mode="valid")
    for i in list(range(half)) + list(range(n - half, n)):
        lo, hi = max(0, i - half), min(n, i + half + 1)
        order = min(params.order, hi - lo - 1)
        out[i] = _sg_row(np.arange(lo - i, hi - i), order) @ y[lo:hi]
    return out


def vse(speeds, params: SGParams = SGParams()) -> float:
    """Mean absolute gap between a speed series and its SG smoothing."""
    s = np.asarray(speeds, dtype=float).reshape(-1)
    return float(np.mean(np.abs(s - savitzky_golay(s, params))))


def detect_peaks(series) -> np.ndarray:
    """Indices ``t`` with ``s[t-1] < s[t] > s[t+1]``; endpoints never qualify."""
    s = np.asarray(series, dtype=float).reshape(-1)
    if len(s) < 3:
        return np.zeros(0, dtype=int)
    return np.nonzero((s[1:-1] > s[:-2]) & (s[1:-1] > s[2:]))[0] + 1


def vde_shifts(gt, d, window: int = 10, max_shift: int = 10) -> list:
    """Best lag per usable gt peak; see :func:`vde`."""
    g = np.asarray(gt, dtype=float).reshape(-1)
    x = np.asarray(d, dtype=float).reshape(-1)
    if len(g) != len(x):
        raise ValueError("gt and tracked series differ in length")
    if len(g) < window + max_shift:
        raise SeriesTooShort(f"need at least {window + max_shift} samples, got {len(g)}")
    shifts = []
    for t in detect_peaks(g).tolist():
        start = t - window // 2
        if start < 0 or start + window + max_shift > len(g):
            continue
        ref = g[start : start + window]
        scores = []
        for tau in range(max_shift + 1):
            diff = np.abs(ref - x[start + tau : start + tau + window])
            scores.append(diff.mean() + diff.std())
        shifts.append(int(np.argmin(scores)))
    return shifts


def vde(gt, d, window: int = 10, max_shift: int = 10) -> float:
    """Delay in frames, averaged over gt speed peaks that have a full window.

    For each peak the tracked series is slid forward by ``tau`` in
    ``[0, max_shift]`` and the lag minimising mean plus standard deviation of
    the absolute differences wins; ties go to the smallest lag.
    """
    shifts = vde_shifts(gt, d, window, max_shift)
    if not shifts:
        raise NoPeaks("no gt speed peak with a full window margin")
    return float(np.mean(shifts))


# ---------------------------------------------------------------------------
# baseline velocity estimators


def estimate_velocity_differentiation(positions, timestamps) -> VelocitySeries:
    """Backward differences; the first sample copies the second."""
    p = np.asarray(positions, dtype=float).reshape(-1, 2)
    t = np.asarray(timestamps, dtype=float).reshape(-1)
    if len(p) < 2:
        raise SeriesTooShort("differentiation needs at least 2 samples")
    v = np.empty_like(p)
    v[1:] = np.diff(p, axis=0) / np.diff(t)[:, None]
    v[0] = v[1]
    return VelocitySeries(t, v)


def estimate_velocity_curvefit(positions, frame_numbers, frame_rate: float = 1.0, timestamps=None) -> VelocitySeries:
    """Slope of the least-squares line through the latest three frames, per axis.

    Slopes are per frame and are scaled by ``frame_rate`` (Hz) into m/s. The
    first two samples copy the first full estimate.
    """
    p = np.asarray(positions, dtype=float).reshape(-1, 2)
    f = np.asarray(frame_numbers, dtype=float).reshape(-1)
    if len(p) < 3:
        raise SeriesTooShort("curve fitting needs at least 3 samples")
    v = np.empty_like(p)
    for i in range(2, len(p)):
        x = f[i - 2 : i + 1]
        xc = x - x.mean()
        v[i] = (xc @ p[i - 2 : i + 1]) / (xc @ xc)
    v[:2] = v[2]
    t = f / frame_rate if timestamps is None else timestamps
    return VelocitySeries(t, v * frame_rate)


# ---------------------------------------------------------------------------
# scene-level evaluation


@dataclass
class _Trajectory:
    timestamps: list
    v_gt: list
    v_d: list


def _match_frame(gt_boxes, pred_boxes, distances: Mapping[str, float]) -> list:
    """Greedy nearest-first centre matching; returns ``(gt_index, pred_index)``."""
    cand = []
    for i, g in enumerate(gt_boxes):
        limit = lookup(distances, g.category)
        for j, p in enumerate(pred_boxes):
            dist = math.hypot(g.global_xyz[0] - p.global_xyz[0], g.global_xyz[1] - p.global_xyz[1])
            if dist <= limit:
                cand.append((dist, i, j))
    cand.sort()
    used_g, used_p, out = set(), set(), []
    for _, i, j in cand:
        if i in used_g or j in used_p:
            continue
        used_g.add(i)
        used_p.add(j)
        out.append((i, j))
    return out


def collect_trajectories(gt_scene, tracked_frames, distances: Mapping[str, float] = DEFAULT_MATCH_DISTANCE) -> tuple:
    """Per ``(gt id, track id)`` velocity series and the TP count.

    ``tracked_frames`` is a sequence of objects with ``frame_index`` and
    ``boxes``; gt boxes must carry ``tracking_id``.
    """
    by_frame = {f.frame_index: f.boxes for f in tracked_frames}
    trajs: dict = {}
    tp = 0
    for frame in gt_scene.frames:
        preds = by_frame.get(frame.frame_index, ())
        gts = frame.detections
        for i, j in _match_frame(gts, preds, distances):
            tp += 1
            key = (gts[i].tracking_id, preds[j].track_id)
            tr = trajs.setdefault(key, _Trajectory([], [], []))
            tr.timestamps.append(frame.timestamp)
            tr.v_gt.append(gts[i].global_velocity)
            tr.v_d.append(preds[j].velocity)
    return {k: trajs[k] for k in sorted(trajs, key=lambda k: (str(k[0]), k[1]))}, tp


def _weighted(values: Sequence[float], weights: Sequence[float]) -> Optional[float]:
    if not values:
        return None
    return float(np.average(values, weights=weights))


def evaluate_motion(
    gt_scene,
    tracked_frames,
    distances: Mapping[str, float] = DEFAULT_MATCH_DISTANCE,
    sg: SGParams = SGParams(),
    vde_window: int = 10,
    vde_max_shift: int = 10,
    per_trajectory: bool = False,
) -> MotionReport:
    """All six metrics over the matched trajectories of one scene.

    By default every sample counts equally (a long trajectory weighs more);
    ``per_trajectory=True`` averages trajectory means instead. Trajectories
    shorter than the SG window contribute nothing to VSE, and VDE uses only
    trajectories with a usable gt peak.
    """
    trajs, tp = collect_trajectories(gt_scene, tracked_frames, distances)
    acc = {k: ([], []) for k in ("vae", "vae_s", "vne", "vaie", "vir", "vse", "vde", "dt")}

    def add(name, value, weight):
        acc[name][0].append(value)
        acc[name][1].append(1.0 if per_trajectory else weight)

    n_samples = 0
    for tr in trajs.values():
        gt = VelocitySeries(tr.timestamps, tr.v_gt)
        d = VelocitySeries(tr.timestamps, tr.v_d)
        n = len(gt)
        n_samples += n
        add("vne", float(np.mean(np.abs(gt.speed - d.speed))), n)
        moving = gt.speed >= MIN_ANGLE_SPEED
        if moving.any():
            err = vae(gt.heading[moving], d.heading[moving])
            add("vae", float(np.degrees(np.mean(np.abs(err)))), err.size)
            add("vae_s", float(np.degrees(np.mean(err))), err.size)
            vaie_v, vir_v = vaie_vir(err)
            add("vir", vir_v, err.size)
            if vaie_v is not None:
                add("vaie", math.degrees(vaie_v), int(np.sum(np.abs(err) > HALF_PI)))
        if n >= sg.window:
            add("vse", vse(d.speed, sg), n)
        if n >= vde_window + vde_max_shift:
            shifts = vde_shifts(gt.speed, d.speed, vde_window, vde_max_shift)
            if shifts:
                add("vde", float(np.mean(shifts)), len(shifts))
                add("dt", float(np.median(np.diff(gt.timestamps))), len(shifts))

    vde_frames = _weighted(*acc["vde"])
    vde_seconds = None
    if vde_frames is not None:
        vde_seconds = _weighted([f * dt for f, dt in zip(acc["vde"][0], acc["dt"][0])], acc["vde"][1])
    return MotionReport(
        tp=tp,
        n_samples=n_samples,
        vae=_weighted(*acc["vae"]),
        vae_signed=_weighted(*acc["vae_s"]),
        vne=_weighted(*acc["vne"]),
        vaie=_weighted(*acc["vaie"]),
        vir=_weighted(*acc["vir"]),
        vse=_weighted(*acc["vse"]),
        vde_frames=vde_frames,
        vde_seconds=vde_seconds,
        n_trajectories=len(trajs),
    )


def baseline_frames(det_scene, method: str, frame_rate: Optional[float] = None) -> list:
    """Tracking-output-like frames whose velocities come from a baseline estimator.

    Detections are grouped by their ``tracking_id`` (so identity is perfect) and
    velocities are re-estimated from positions with ``method`` in
    ``{"differentiation", "curvefit"}``.
    """
    from .baseversion import LifecycleState, TrackedBox, TrackingFrame

    tracks: dict = {}
    for frame in det_scene.frames:
        for det in frame.detections:
            if det.tracking_id is not None:
                tracks.setdefault(det.tracking_id, []).append((frame, det))
    per_frame: dict = {f.frame_index: [] for f in det_scene.frames}
    for tid, items in tracks.items():
        if len(items) < 3:
            continue
        pos = np.array([d.global_xyz[:2] for _, d in items])
        ts = np.array([f.timestamp for f, _ in items])
        if method == "differentiation":
            v = estimate_velocity_differentiation(pos, ts).velocities
        elif method == "curvefit":
            rate = frame_rate if frame_rate is not None else 1.0 / float(np.median(np.diff(ts)))
            frames = np.array([f.frame_index for f, _ in items])
            v = estimate_velocity_curvefit(pos, frames, rate, ts).velocities
        else:
            raise ValueError(f"unknown baseline method {method!r}")
        for (frame, det), vel in zip(items, v):
            per_frame[frame.frame_index].append(
                TrackedBox(
                    track_id=int(tid),
                    category=det.category,
                    score=det.score,
                    global_xyz=det.global_xyz,
                    lwh=det.lwh,
                    global_yaw=det.global_yaw,
                    velocity=(float(vel[0]), float(vel[1])),
                    acceleration=(0.0, 0.0),
                    state=LifecycleState.CONFIRMED,
                )
            )
    return [
        TrackingFrame(det_scene.scene_id, f.frame_index, f.timestamp, tuple(sorted(per_frame[f.frame_index], key=lambda b: b.track_id)))
        for f in det_scene.frames
    ]
