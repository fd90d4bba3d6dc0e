"""Seeded synthetic scenes: exact ground truth plus a noisy detector.

The ego vehicle sits at the origin with an identity pose. Objects start in
lanes parallel to the x axis ahead of it and move according to one of three
motion models. An optional front camera looks along +x from 1.5 m up.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .baseversion import CameraCalib, DetectionBox, FrameRecord, SceneRecord
from .errors import SchemaViolation

MOTION_MODELS = ("constant_velocity", "constant_turn", "brake_event")
CAMERA_HEIGHT = 1.5
CAMERA_INTRINSICS = ((1000.0, 0.0, 800.0), (0.0, 1000.0, 450.0), (0.0, 0.0, 1.0))
CAMERA_IMAGE_SIZE = (1600, 900)
CATEGORY_SIZES = {
    "car": (4.5, 1.9, 1.6),
    "truck": (8.0, 2.5, 3.2),
    "pedestrian": (0.7, 0.7, 1.75),
    "cyclist": (1.8, 0.7, 1.7),
}


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything that defines a synthetic scene; ``seed`` fixes all randomness.

    ``motion_model`` is either one model name for every object or one per
    object. ``depth_error_injections`` holds ``(frame, object, meters)``
    triples that push that detection along the camera ray.
    """

    n_objects: int = 5
    motion_model: object = "constant_velocity"
    duration: int = 100
    frame_rate: float = 10.0
    position_sigma: float = 0.0
    yaw_sigma: float = 0.0
    velocity_sigma: float = 0.0
    emit_velocity: bool = True
    dropout_prob: float = 0.0
    fp_rate: float = 0.0
    depth_error_injections: tuple = ()
    seed: int = 0
    category: str = "car"
    speed: float = 8.0
    speed_jitter: float = 2.0
    heading_jitter: float = 0.0
    turn_rate: float = 0.1
    n_lanes: Optional[int] = None
    lane_spacing: float = 6.0
    headway: float = 20.0
    start_x: float = 15.0
    brake_time: float = 0.4
    brake_decel: float = 4.0
    pre_brake_accel: float = 0.3
    with_camera: bool = True
    scene_id: str = "synthetic"

    def __post_init__(self):
        models = (self.motion_model,) if isinstance(self.motion_model, str) else tuple(self.motion_model)
        for m in models:
            if m not in MOTION_MODELS:
                raise ValueError(f"unknown motion model {m!r}")
        if not isinstance(self.motion_model, str):
            if len(models) != self.n_objects:
                raise ValueError("one motion model per object is required")
            object.__setattr__(self, "motion_model", models)
        object.__setattr__(
            self, "depth_error_injections", tuple((int(f), int(o), float(m)) for f, o, m in self.depth_error_injections)
        )
        if self.n_objects < 0 or self.duration < 0:
            raise ValueError("n_objects and duration must be non-negative")
        if not self.frame_rate > 0:
            raise ValueError("frame_rate must be positive")
        for name in ("position_sigma", "yaw_sigma", "velocity_sigma", "fp_rate", "speed_jitter", "heading_jitter"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0.0 <= self.dropout_prob <= 1.0:
            raise ValueError("dropout_prob must lie in [0, 1]")
        if not 0.0 <= self.brake_time <= 1.0:
            raise ValueError("brake_time is a fraction of the duration in [0, 1]")
        if self.category not in CATEGORY_SIZES:
            raise ValueError(f"category must be one of {sorted(CATEGORY_SIZES)}")

    def model_of(self, k: int) -> str:
        return self.motion_model if isinstance(self.motion_model, str) else self.motion_model[k]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["motion_model"] = self.motion_model if isinstance(self.motion_model, str) else list(self.motion_model)
        d["depth_error_injections"] = [list(x) for x in self.depth_error_injections]
        return d

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ScenarioSpec":
        if not isinstance(doc, Mapping):
            raise SchemaViolation("scenario spec must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        data = {k: v for k, v in doc.items() if not str(k).startswith("_")}
        unknown = sorted(set(data) - known)
        if unknown:
            raise SchemaViolation(f"scenario spec: unknown keys {unknown}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise SchemaViolation(f"scenario spec: {exc}") from exc


# ---------------------------------------------------------------------------
# kinematics


@dataclass(frozen=True)
class _Object:
    x0: float
    y0: float
    heading: float
    speed: float
    model: str


def _brake_profile(spec: ScenarioSpec, v_peak: float):
    """Knots ``(t, v)`` of a piecewise-linear speed profile with one strict peak."""
    total = spec.duration / spec.frame_rate
    t_peak = spec.brake_time * total
    v_start = max(0.0, v_peak - spec.pre_brake_accel * t_peak)
    v_end = 0.6 * v_peak
    t_end = t_peak + (v_peak - v_end) / spec.brake_decel
    return np.array([0.0, t_peak, t_end]), np.array([v_start, v_peak, v_end])


def _distance_along(knots_t, knots_v, t: float) -> tuple:
    """Distance, speed and acceleration at ``t`` for a piecewise-linear speed."""
    dist = 0.0
    for k in range(len(knots_t) - 1):
        t0, t1, v0, v1 = knots_t[k], knots_t[k + 1], knots_v[k], knots_v[k + 1]
        a = (v1 - v0) / (t1 - t0) if t1 > t0 else 0.0
        if t <= t1:
            dt = t - t0
            return dist + v0 * dt + 0.5 * a * dt * dt, v0 + a * dt, a
        dist += 0.5 * (v0 + v1) * (t1 - t0)
    dt = t - knots_t[-1]
    return dist + knots_v[-1] * dt, knots_v[-1], 0.0


def object_state(obj: _Object, t: float, spec: ScenarioSpec) -> tuple:
    """``(x, y, yaw, vx, vy, ax, ay)`` at time ``t``."""
    c, s = math.cos(obj.heading), math.sin(obj.heading)
    if obj.model == "constant_velocity":
        d = obj.speed * t
        return obj.x0 + d * c, obj.y0 + d * s, obj.heading, obj.speed * c, obj.speed * s, 0.0, 0.0
    if obj.model == "constant_turn":
        w = spec.turn_rate
        psi = obj.heading + w * t
        if w == 0.0:
            d = obj.speed * t
            return obj.x0 + d * c, obj.y0 + d * s, psi, obj.speed * c, obj.speed * s, 0.0, 0.0
        r = obj.speed / w
        x = obj.x0 + r * (math.sin(psi) - s)
        y = obj.y0 - r * (math.cos(psi) - c)
        vx, vy = obj.speed * math.cos(psi), obj.speed * math.sin(psi)
        return x, y, psi, vx, vy, -w * vy, w * vx
    knots_t, knots_v = _brake_profile(spec, obj.speed)
    d, v, a = _distance_along(knots_t, knots_v, t)
    return obj.x0 + d * c, obj.y0 + d * s, obj.heading, v * c, v * s, a * c, a * s


def _objects(spec: ScenarioSpec, rng: np.random.Generator) -> list:
    lanes = spec.n_lanes or max(spec.n_objects, 1)
    objs = []
    for k in range(spec.n_objects):
        lane, row = k % lanes, k // lanes
        speed = spec.speed + rng.uniform(-spec.speed_jitter, spec.speed_jitter)
        heading = rng.uniform(-spec.heading_jitter, spec.heading_jitter)
        objs.append(
            _Object(
                x0=spec.start_x + row * spec.headway,
                y0=(lane - 0.5 * (lanes - 1)) * spec.lane_spacing,
                heading=heading,
                speed=max(speed, 0.0),
                model=spec.model_of(k),
            )
        )
    return objs


# ---------------------------------------------------------------------------
# camera


def front_camera() -> CameraCalib:
    """Pinhole camera at ``(0, 0, 1.5)`` looking along +x (x right, y down, z forward)."""
    g2c = (
        (0.0, -1.0, 0.0, 0.0),
        (0.0, 0.0, -1.0, CAMERA_HEIGHT),
        (1.0, 0.0, 0.0, 0.0),
        (0.0, 0.0, 0.0, 1.0),
    )
    return CameraCalib("CAM_FRONT", CAMERA_INTRINSICS, g2c, CAMERA_IMAGE_SIZE)


def push_along_ray(xyz: Sequence[float], meters: float) -> tuple:
    """Move a point ``meters`` further from the camera along its viewing ray."""
    cam = np.array([0.0, 0.0, CAMERA_HEIGHT])
    p = np.asarray(xyz, dtype=float)
    ray = p - cam
    return tuple((p + meters * ray / np.linalg.norm(ray)).tolist())


# ---------------------------------------------------------------------------
# generation


def generate_scenario(spec: ScenarioSpec) -> tuple:
    """Return ``(gt_scene, detected_scene)``; identical specs give identical scenes."""
    rng = np.random.default_rng(spec.seed)
    objs = _objects(spec, rng)
    lwh = CATEGORY_SIZES[spec.category]
    z = 0.5 * lwh[2]
    cams = (front_camera(),) if spec.with_camera else ()
    injections = {(f, o): m for f, o, m in spec.depth_error_injections}
    gt_frames, det_frames = [], []

    for f in range(spec.duration):
        t = f / spec.frame_rate
        gts, dets = [], []
        for k, obj in enumerate(objs):
            x, y, yaw, vx, vy, ax, ay = object_state(obj, t, spec)
            gts.append(
                DetectionBox.from_pose(
                    (x, y, z), lwh, yaw, category=spec.category, score=1.0,
                    velocity=(vx, vy), acceleration=(ax, ay), tracking_id=k,
                )
            )
            # draw every random number even for dropped detections so that the
            # stream for one object does not depend on another's dropout
            drop = rng.random() < spec.dropout_prob
            noise_xy = rng.normal(0.0, spec.position_sigma, 2) if spec.position_sigma > 0 else np.zeros(2)
            noise_yaw = rng.normal(0.0, spec.yaw_sigma) if spec.yaw_sigma > 0 else 0.0
            noise_v = rng.normal(0.0, spec.velocity_sigma, 2) if spec.velocity_sigma > 0 else np.zeros(2)
            score = rng.uniform(0.5, 1.0)
            if drop:
                continue
            xyz = (x + noise_xy[0], y + noise_xy[1], z)
            if (f, k) in injections:
                xyz = push_along_ray(xyz, injections[(f, k)])
            vel = (vx + noise_v[0], vy + noise_v[1]) if spec.emit_velocity else None
            dets.append(
                DetectionBox.from_pose(
                    xyz, lwh, yaw + noise_yaw, category=spec.category, score=score,
                    velocity=vel, tracking_id=k,
                )
            )
        n_fp = rng.poisson(spec.fp_rate) if spec.fp_rate > 0 else 0
        if n_fp:
            xs = [g.global_xyz[0] for g in gts] or [spec.start_x]
            ys = [g.global_xyz[1] for g in gts] or [0.0]
            for _ in range(n_fp):
                dets.append(
                    DetectionBox.from_pose(
                        (rng.uniform(min(xs) - 10, max(xs) + 10), rng.uniform(min(ys) - 10, max(ys) + 10), z),
                        lwh, rng.uniform(-math.pi, math.pi), category=spec.category,
                        score=rng.uniform(0.3, 0.8), velocity=(0.0, 0.0),
                    )
                )
        order = rng.permutation(len(dets))
        token = f"{spec.scene_id}-{f:05d}"
        gt_frames.append(FrameRecord(f, t, token, tuple(gts), camera_calibrations=cams))
        det_frames.append(FrameRecord(f, t, token, tuple(dets[i] for i in order), camera_calibrations=cams))

    categories = (spec.category,)
    return (
        SceneRecord(spec.scene_id, tuple(gt_frames), categories),
        SceneRecord(spec.scene_id, tuple(det_frames), categories),
    )
