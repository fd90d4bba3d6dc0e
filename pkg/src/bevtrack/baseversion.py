"""BaseVersion scene documents and the NDJSON tracking output.

A BaseVersion document is one JSON object per scene::

    {"scene_id": ..., "categories": [...],            # categories optional
     "frames": [{"frame_index", "timestamp", "token",
                 "ego_to_global": 4x4, "cameras": [...],
                 "detections": [{"detection_score", "category", "global_xyz",
                                 "lwh", "global_orientation", "global_yaw",
                                 "global_velocity", "global_acceleration",
                                 "tracking_id"?}]}]}

Quaternions are stored ``[w, x, y, z]``. All geometry is in the global frame.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import DuplicateTrackId, InvariantViolation, MalformedDocument, SchemaViolation
from .geometry import Box7, wrap_angle

PathLike = Union[str, Path]

ORTHONORMAL_TOL = 1e-6
QUATERNION_TOL = 1e-6
YAW_TOL = 1e-4

Matrix = tuple  # nested tuple of floats; keeps records hashable and comparable


class MissingFieldWarning(UserWarning):
    """An optional detection field was absent and has been defaulted."""


class LifecycleState(str, Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    LOST = "lost"


def quaternion_from_yaw(yaw: float) -> tuple:
    return (math.cos(yaw / 2.0), 0.0, 0.0, math.sin(yaw / 2.0))


def yaw_from_quaternion(q: Sequence[float]) -> float:
    w, x, y, z = q
    return math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))


def as_matrix(m) -> np.ndarray:
    return np.asarray(m, dtype=float)


def invert_rigid(m) -> np.ndarray:
    m = as_matrix(m)
    out = np.eye(4)
    out[:3, :3] = m[:3, :3].T
    out[:3, 3] = -m[:3, :3].T @ m[:3, 3]
    return out


def to_tuple_matrix(m) -> Matrix:
    return tuple(tuple(float(v) for v in row) for row in np.asarray(m, dtype=float))


IDENTITY4: Matrix = to_tuple_matrix(np.eye(4))


@dataclass(frozen=True)
class DetectionBox:
    score: float
    category: str
    global_xyz: tuple
    lwh: tuple
    global_orientation: tuple
    global_yaw: float
    global_velocity: tuple = (0.0, 0.0)
    global_acceleration: tuple = (0.0, 0.0)
    # False when the source carried no velocity; the value is then zero
    velocity_valid: bool = True
    # ground-truth identity; only present in annotated / synthetic scenes
    tracking_id: Optional[int] = None

    @classmethod
    def from_pose(
        cls,
        xyz: Sequence[float],
        lwh: Sequence[float],
        yaw: float,
        *,
        category: str = "car",
        score: float = 1.0,
        velocity: Optional[Sequence[float]] = (0.0, 0.0),
        acceleration: Sequence[float] = (0.0, 0.0),
        tracking_id: Optional[int] = None,
    ) -> "DetectionBox":
        yaw = wrap_angle(yaw)
        return cls(
            score=float(score),
            category=category,
            global_xyz=tuple(float(v) for v in xyz),
            lwh=tuple(float(v) for v in lwh),
            global_orientation=quaternion_from_yaw(yaw),
            global_yaw=yaw,
            global_velocity=(0.0, 0.0) if velocity is None else tuple(float(v) for v in velocity),
            global_acceleration=tuple(float(v) for v in acceleration),
            velocity_valid=velocity is not None,
            tracking_id=tracking_id,
        )

    @property
    def box7(self) -> Box7:
        return Box7(*self.global_xyz, *self.lwh, self.global_yaw)

    def as_row(self) -> tuple:
        return (*self.global_xyz, *self.lwh, self.global_yaw)

    @property
    def speed(self) -> float:
        return math.hypot(*self.global_velocity)


@dataclass(frozen=True)
class CameraCalib:
    camera_id: str
    intrinsics: Matrix
    global_to_camera: Matrix
    image_size: tuple  # (width, height) pixels


@dataclass(frozen=True)
class FrameRecord:
    frame_index: int
    timestamp: float
    token: str
    detections: tuple = ()
    ego_to_global: Matrix = IDENTITY4
    camera_calibrations: tuple = ()


@dataclass(frozen=True)
class SceneRecord:
    scene_id: str
    frames: tuple = ()
    categories: Optional[tuple] = None


@dataclass(frozen=True)
class TrackedBox:
    track_id: int
    category: str
    score: float
    global_xyz: tuple
    lwh: tuple
    global_yaw: float
    velocity: tuple
    acceleration: tuple
    state: LifecycleState = LifecycleState.CONFIRMED

    @property
    def global_orientation(self) -> tuple:
        return quaternion_from_yaw(self.global_yaw)


@dataclass(frozen=True)
class TrackingFrame:
    scene_id: str
    frame_index: int
    timestamp: float
    boxes: tuple = field(default_factory=tuple)


# ---------------------------------------------------------------------------
# field readers


def _req(obj: dict, key: str, where: str):
    if not isinstance(obj, dict):
        raise SchemaViolation(f"{where}: expected an object")
    if key not in obj:
        raise SchemaViolation(f"{where}: missing field '{key}'")
    return obj[key]


def _num(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaViolation(f"{where}: expected a number, got {type(v).__name__}")
    v = float(v)
    if not math.isfinite(v):
        raise InvariantViolation(f"{where}: non-finite value")
    return v


def _int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaViolation(f"{where}: expected an integer")
    return v


def _str(v, where: str) -> str:
    if not isinstance(v, str):
        raise SchemaViolation(f"{where}: expected a string")
    return v


def _vec(v, n: int, where: str) -> tuple:
    if not isinstance(v, list) or len(v) != n:
        raise SchemaViolation(f"{where}: expected a list of {n} numbers")
    return tuple(_num(x, f"{where}[{i}]") for i, x in enumerate(v))


def _mat(v, rows: int, cols: int, where: str) -> Matrix:
    if not isinstance(v, list) or len(v) != rows:
        raise SchemaViolation(f"{where}: expected a {rows}x{cols} matrix")
    return tuple(_vec(r, cols, f"{where}[{i}]") for i, r in enumerate(v))


def _check_rigid(m: Matrix, where: str) -> None:
    a = np.asarray(m)
    rot = a[:3, :3]
    if not np.allclose(rot @ rot.T, np.eye(3), atol=ORTHONORMAL_TOL, rtol=0.0):
        raise InvariantViolation(f"{where}: rotation block is not orthonormal")
    if np.linalg.det(rot) < 0:
        raise InvariantViolation(f"{where}: rotation block is a reflection")
    if not np.array_equal(a[3], [0.0, 0.0, 0.0, 1.0]):
        raise InvariantViolation(f"{where}: last row must be [0, 0, 0, 1]")


def _parse_detection(d: dict, where: str, vocabulary: Optional[tuple]) -> DetectionBox:
    score = _num(_req(d, "detection_score", where), f"{where}.detection_score")
    if not 0.0 <= score <= 1.0:
        raise InvariantViolation(f"{where}: detection_score {score} outside [0, 1]")
    category = _str(_req(d, "category", where), f"{where}.category")
    if not category:
        raise InvariantViolation(f"{where}: empty category")
    if vocabulary is not None and category not in vocabulary:
        raise InvariantViolation(f"{where}: category {category!r} not in scene vocabulary")
    xyz = _vec(_req(d, "global_xyz", where), 3, f"{where}.global_xyz")
    lwh = _vec(_req(d, "lwh", where), 3, f"{where}.lwh")
    if min(lwh) <= 0.0:
        raise InvariantViolation(f"{where}: lwh components must be positive")
    quat = _vec(_req(d, "global_orientation", where), 4, f"{where}.global_orientation")
    if abs(math.sqrt(sum(q * q for q in quat)) - 1.0) > QUATERNION_TOL:
        raise InvariantViolation(f"{where}: global_orientation is not a unit quaternion")
    yaw = _num(_req(d, "global_yaw", where), f"{where}.global_yaw")
    if not -math.pi < yaw <= math.pi:
        raise InvariantViolation(f"{where}: global_yaw {yaw} outside (-pi, pi]")
    if abs(wrap_angle(yaw - yaw_from_quaternion(quat))) > YAW_TOL:
        raise InvariantViolation(f"{where}: global_yaw disagrees with global_orientation")

    velocity_valid = d.get("global_velocity") is not None
    if velocity_valid:
        velocity = _vec(d["global_velocity"], 2, f"{where}.global_velocity")
    else:
        warnings.warn(f"{where}: global_velocity missing, defaulting to zero", MissingFieldWarning, stacklevel=4)
        velocity = (0.0, 0.0)
    if d.get("global_acceleration") is not None:
        accel = _vec(d["global_acceleration"], 2, f"{where}.global_acceleration")
    else:
        warnings.warn(f"{where}: global_acceleration missing, defaulting to zero", MissingFieldWarning, stacklevel=4)
        accel = (0.0, 0.0)
    tracking_id = d.get("tracking_id")
    if tracking_id is not None:
        tracking_id = _int(tracking_id, f"{where}.tracking_id")
        if tracking_id < 0:
            raise InvariantViolation(f"{where}: tracking_id must be non-negative")
    return DetectionBox(score, category, xyz, lwh, quat, yaw, velocity, accel, velocity_valid, tracking_id)


def _parse_camera(c: dict, where: str) -> CameraCalib:
    camera_id = _str(_req(c, "camera_id", where), f"{where}.camera_id")
    intr = _mat(_req(c, "intrinsics", where), 3, 3, f"{where}.intrinsics")
    if intr[0][0] <= 0 or intr[1][1] <= 0:
        raise InvariantViolation(f"{where}: focal lengths must be positive")
    g2c = _mat(_req(c, "global_to_camera", where), 4, 4, f"{where}.global_to_camera")
    _check_rigid(g2c, f"{where}.global_to_camera")
    size = _req(c, "image_size", where)
    if not isinstance(size, list) or len(size) != 2:
        raise SchemaViolation(f"{where}.image_size: expected [width, height]")
    size = tuple(_int(s, f"{where}.image_size") for s in size)
    if min(size) <= 0:
        raise InvariantViolation(f"{where}: image_size must be positive")
    return CameraCalib(camera_id, intr, g2c, size)


def _parse_frame(f: dict, where: str, vocabulary: Optional[tuple]) -> FrameRecord:
    index = _int(_req(f, "frame_index", where), f"{where}.frame_index")
    timestamp = _num(_req(f, "timestamp", where), f"{where}.timestamp")
    if timestamp < 0:
        raise InvariantViolation(f"{where}: negative timestamp")
    token = _str(_req(f, "token", where), f"{where}.token")
    ego = _mat(_req(f, "ego_to_global", where), 4, 4, f"{where}.ego_to_global")
    _check_rigid(ego, f"{where}.ego_to_global")
    cams = f.get("cameras", [])
    if not isinstance(cams, list):
        raise SchemaViolation(f"{where}.cameras: expected a list")
    cameras = tuple(_parse_camera(c, f"{where}.cameras[{i}]") for i, c in enumerate(cams))
    dets = _req(f, "detections", where)
    if not isinstance(dets, list):
        raise SchemaViolation(f"{where}.detections: expected a list")
    detections = tuple(_parse_detection(d, f"{where}.detections[{i}]", vocabulary) for i, d in enumerate(dets))
    return FrameRecord(index, timestamp, token, detections, ego, cameras)


def scene_from_dict(doc) -> SceneRecord:
    if not isinstance(doc, dict):
        raise SchemaViolation("document: expected a top-level object")
    scene_id = _str(_req(doc, "scene_id", "scene"), "scene.scene_id")
    vocabulary = doc.get("categories")
    if vocabulary is not None:
        if not isinstance(vocabulary, list) or not all(isinstance(c, str) and c for c in vocabulary):
            raise SchemaViolation("scene.categories: expected a list of non-empty strings")
        vocabulary = tuple(vocabulary)
    frames_raw = _req(doc, "frames", "scene")
    if not isinstance(frames_raw, list):
        raise SchemaViolation("scene.frames: expected a list")
    frames = tuple(_parse_frame(f, f"frames[{i}]", vocabulary) for i, f in enumerate(frames_raw))
    for prev, cur in zip(frames, frames[1:]):
        if cur.frame_index <= prev.frame_index:
            raise SchemaViolation(f"frame {cur.frame_index}: frame indices must be strictly increasing")
        if cur.timestamp <= prev.timestamp:
            raise SchemaViolation(f"frame {cur.frame_index}: timestamps must be strictly increasing")
    return SceneRecord(scene_id, frames, vocabulary)


def loads_scene(data: Union[bytes, str]) -> SceneRecord:
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedDocument(f"not valid JSON: {exc}") from exc
    return scene_from_dict(doc)


def parse_scene(path: PathLike) -> SceneRecord:
    """Read and fully validate a BaseVersion document."""
    return loads_scene(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# writers


def _detection_dict(d: DetectionBox) -> dict:
    out = {
        "detection_score": d.score,
        "category": d.category,
        "global_xyz": list(d.global_xyz),
        "lwh": list(d.lwh),
        "global_orientation": list(d.global_orientation),
        "global_yaw": d.global_yaw,
    }
    if d.velocity_valid:
        out["global_velocity"] = list(d.global_velocity)
    out["global_acceleration"] = list(d.global_acceleration)
    if d.tracking_id is not None:
        out["tracking_id"] = d.tracking_id
    return out


def scene_to_dict(scene: SceneRecord) -> dict:
    doc: dict = {"scene_id": scene.scene_id}
    if scene.categories is not None:
        doc["categories"] = list(scene.categories)
    doc["frames"] = [
        {
            "frame_index": f.frame_index,
            "timestamp": f.timestamp,
            "token": f.token,
            "ego_to_global": [list(r) for r in f.ego_to_global],
            "cameras": [
                {
                    "camera_id": c.camera_id,
                    "intrinsics": [list(r) for r in c.intrinsics],
                    "global_to_camera": [list(r) for r in c.global_to_camera],
                    "image_size": list(c.image_size),
                }
                for c in f.camera_calibrations
            ],
            "detections": [_detection_dict(d) for d in f.detections],
        }
        for f in scene.frames
    ]
    return doc


def serialize_scene(scene: SceneRecord) -> bytes:
    """Canonical BaseVersion bytes: 2-space indented JSON plus a trailing newline."""
    return (json.dumps(scene_to_dict(scene), indent=2) + "\n").encode("utf-8")


def write_scene(scene: SceneRecord, path: PathLike) -> None:
    Path(path).write_bytes(serialize_scene(scene))


def _tracked_dict(b: TrackedBox) -> dict:
    return {
        "track_id": b.track_id,
        "category": b.category,
        "global_xyz": list(b.global_xyz),
        "lwh": list(b.lwh),
        "global_yaw": b.global_yaw,
        "score": b.score,
        "velocity": list(b.velocity),
        "acceleration": list(b.acceleration),
        "state": LifecycleState(b.state).value,
    }


def tracking_lines(frames: Iterable[tuple], scene_id: str) -> list:
    lines = []
    for frame, boxes in frames:
        seen = set()
        for b in boxes:
            if b.track_id in seen:
                raise DuplicateTrackId(f"frame {frame.frame_index}: track id {b.track_id} appears twice")
            seen.add(b.track_id)
        record = {
            "scene_id": scene_id,
            "frame_index": frame.frame_index,
            "timestamp": frame.timestamp,
            "boxes": [_tracked_dict(b) for b in boxes],
        }
        lines.append(json.dumps(record))
    return lines


def write_tracking_output(frames: Iterable[tuple], path: PathLike, scene_id: str = "") -> None:
    """Write ``(FrameRecord, [TrackedBox])`` pairs as NDJSON, one line per frame."""
    lines = tracking_lines(frames, scene_id)
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def _parse_tracked(b: dict, where: str) -> TrackedBox:
    state = _str(_req(b, "state", where), f"{where}.state")
    try:
        state = LifecycleState(state)
    except ValueError as exc:
        raise SchemaViolation(f"{where}.state: unknown state {state!r}") from exc
    track_id = _int(_req(b, "track_id", where), f"{where}.track_id")
    if track_id < 0:
        raise InvariantViolation(f"{where}: negative track_id")
    return TrackedBox(
        track_id=track_id,
        category=_str(_req(b, "category", where), f"{where}.category"),
        score=_num(_req(b, "score", where), f"{where}.score"),
        global_xyz=_vec(_req(b, "global_xyz", where), 3, f"{where}.global_xyz"),
        lwh=_vec(_req(b, "lwh", where), 3, f"{where}.lwh"),
        global_yaw=_num(_req(b, "global_yaw", where), f"{where}.global_yaw"),
        velocity=_vec(_req(b, "velocity", where), 2, f"{where}.velocity"),
        acceleration=_vec(_req(b, "acceleration", where), 2, f"{where}.acceleration"),
        state=state,
    )


def loads_tracking_output(text: str) -> list:
    frames = []
    for n, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"line {n + 1}: not valid JSON: {exc}") from exc
        where = f"line {n + 1}"
        boxes = _req(rec, "boxes", where)
        if not isinstance(boxes, list):
            raise SchemaViolation(f"{where}.boxes: expected a list")
        parsed = tuple(_parse_tracked(b, f"{where}.boxes[{i}]") for i, b in enumerate(boxes))
        if len({b.track_id for b in parsed}) != len(parsed):
            raise DuplicateTrackId(f"{where}: duplicate track id")
        frames.append(
            TrackingFrame(
                scene_id=_str(_req(rec, "scene_id", where), f"{where}.scene_id"),
                frame_index=_int(_req(rec, "frame_index", where), f"{where}.frame_index"),
                timestamp=_num(_req(rec, "timestamp", where), f"{where}.timestamp"),
                boxes=parsed,
            )
        )
    return frames


def read_tracking_output(path: PathLike) -> list:
    """Read an NDJSON tracking output into :class:`TrackingFrame` records."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedDocument(str(exc)) from exc
    return loads_tracking_output(text)
