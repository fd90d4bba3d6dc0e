"""Three decoupled linear Kalman filters per track.

* position: ``[x, y, vx, vy, ax, ay]``, constant acceleration, observes
  ``[x, y, vx, vy]`` (velocity rows dropped when the detector gave none);
* size: ``[l, w, vl, vw]``, constant velocity, observes ``[l, w]``;
* heading: ``[theta_p, theta_v, omega_p, omega_v]``, constant velocity,
  observes the detector yaw ``theta_p`` and the velocity direction
  ``theta_v = atan2(vy, vx)``; the latter only above ``v_min``.

Process noise is the piecewise-white-noise model: the highest derivative is
perturbed once per step, ``Q = var * G G^T``. Updates use the Joseph form and
re-symmetrise the covariance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .errors import NonPositiveDt
from .geometry import wrap_angle

MIN_SIZE = 0.05


@dataclass(frozen=True)
class NoiseConfig:
    """Filter noise parameters for one category (variances, SI units)."""

    position_process_var: float = 1.0
    position_meas_var: float = 0.1
    velocity_meas_var: float = 0.5
    size_process_var: float = 1e-4
    size_meas_var: float = 1.0
    heading_process_var: float = 0.1
    heading_meas_var: float = 0.05
    heading_velocity_meas_var: float = 0.1
    init_position_var: float = 1.0
    init_velocity_var: float = 10.0
    init_acceleration_var: float = 10.0
    init_size_var: float = 1.0
    init_size_rate_var: float = 0.1
    init_heading_var: float = 0.1
    init_heading_rate_var: float = 1.0
    # speed below which the velocity direction is not trusted (m/s)
    v_min: float = 0.5

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise ValueError(f"NoiseConfig.{name} must be positive, got {value}")


@dataclass(frozen=True, eq=False)
class PositionFilterState:
    state: np.ndarray
    covariance: np.ndarray

    @property
    def xy(self) -> np.ndarray:
        return self.state[0:2]

    @property
    def velocity(self) -> np.ndarray:
        return self.state[2:4]

    @property
    def acceleration(self) -> np.ndarray:
        return self.state[4:6]


@dataclass(frozen=True, eq=False)
class SizeFilterState:
    state: np.ndarray
    covariance: np.ndarray

    @property
    def lw(self) -> np.ndarray:
        return self.state[0:2]


@dataclass(frozen=True, eq=False)
class HeadingFilterState:
    state: np.ndarray
    covariance: np.ndarray

    @property
    def theta_p(self) -> float:
        return float(self.state[0])

    @property
    def theta_v(self) -> float:
        return float(self.state[1])


class FilterStates(NamedTuple):
    position: PositionFilterState
    size: SizeFilterState
    heading: HeadingFilterState


# ---------------------------------------------------------------------------
# model matrices


@lru_cache(maxsize=256)
def _ca_model(dt: float, var: float):
    f1 = np.array([[1.0, dt, 0.5 * dt * dt], [0.0, 1.0, dt], [0.0, 0.0, 1.0]])
    g = np.array([0.5 * dt * dt, dt, 1.0])
    q1 = var * np.outer(g, g)
    # state ordering is [x, y, vx, vy, ax, ay]: blocks interleave the two axes
    return np.kron(f1, np.eye(2)), np.kron(q1, np.eye(2))


@lru_cache(maxsize=256)
def _cv_model(dt: float, var: float):
    f1 = np.array([[1.0, dt], [0.0, 1.0]])
    g = np.array([0.5 * dt * dt, dt])
    q1 = var * np.outer(g, g)
    return np.kron(f1, np.eye(2)), np.kron(q1, np.eye(2))


_H_POS_FULL = np.eye(6)[:4]
_H_POS_XY = np.eye(6)[:2]
_H_SIZE = np.eye(4)[:2]
_H_HEAD_FULL = np.eye(4)[:2]
_H_HEAD_P = np.eye(4)[:1]


def _predict(x, p, f, q):
    """Batched predict: ``x`` is ``(N, n)``, ``p`` is ``(N, n, n)``."""
    x = x @ f.T
    p = f @ p @ f.T + q
    return x, 0.5 * (p + p.transpose(0, 2, 1))


def _update(x, p, innovation, h, r):
    """Batched Joseph-form update with a shared observation matrix ``h``."""
    ph = p @ h.T
    s = h @ ph + r
    k = np.linalg.solve(s, ph.transpose(0, 2, 1)).transpose(0, 2, 1)
    x = x + np.einsum("nij,nj->ni", k, innovation)
    ikh = np.eye(x.shape[1]) - k @ h
    p = ikh @ p @ ikh.transpose(0, 2, 1) + k @ r @ k.transpose(0, 2, 1)
    return x, 0.5 * (p + p.transpose(0, 2, 1))


def velocity_heading(det, v_min: float):
    """Velocity direction of ``det`` or ``None`` when it is unreliable."""
    if not det.velocity_valid:
        return None
    vx, vy = det.global_velocity
    if math.hypot(vx, vy) < v_min:
        return None
    return math.atan2(vy, vx)


# ---------------------------------------------------------------------------
# public operations


def init_from_detection(det, cfg: NoiseConfig = NoiseConfig()) -> FilterStates:
    x, y = det.global_xyz[0], det.global_xyz[1]
    vx, vy = det.global_velocity if det.velocity_valid else (0.0, 0.0)
    vel_var = cfg.init_velocity_var if det.velocity_valid else 100.0 * cfg.init_velocity_var
    pos = PositionFilterState(
        np.array([x, y, vx, vy, 0.0, 0.0], dtype=float),
        np.diag([cfg.init_position_var] * 2 + [vel_var] * 2 + [cfg.init_acceleration_var] * 2),
    )
    size = SizeFilterState(
        np.array([det.lwh[0], det.lwh[1], 0.0, 0.0], dtype=float),
        np.diag([cfg.init_size_var] * 2 + [cfg.init_size_rate_var] * 2),
    )
    theta_p = wrap_angle(det.global_yaw)
    theta_v = velocity_heading(det, cfg.v_min)
    heading = HeadingFilterState(
        np.array([theta_p, theta_p if theta_v is None else theta_v, 0.0, 0.0]),
        np.diag([cfg.init_heading_var] * 2 + [cfg.init_heading_rate_var] * 2),
    )
    return FilterStates(pos, size, heading)


def _stack(items):
    return np.stack([s.state for s in items]), np.stack([s.covariance for s in items])


def _predict_group(group: list, dt: float, cfg: NoiseConfig) -> list:
    pos_x, pos_p = _stack([s.position for s in group])
    size_x, size_p = _stack([s.size for s in group])
    head_x, head_p = _stack([s.heading for s in group])
    pos_x, pos_p = _predict(pos_x, pos_p, *_ca_model(dt, cfg.position_process_var))
    size_x, size_p = _predict(size_x, size_p, *_cv_model(dt, cfg.size_process_var))
    size_x[:, 0:2] = np.maximum(size_x[:, 0:2], MIN_SIZE)
    head_x, head_p = _predict(head_x, head_p, *_cv_model(dt, cfg.heading_process_var))
    head_x[:, 0:2] = wrap_angle(head_x[:, 0:2])
    return [
        FilterStates(
            PositionFilterState(pos_x[i], pos_p[i]),
            SizeFilterState(size_x[i], size_p[i]),
            HeadingFilterState(head_x[i], head_p[i]),
        )
        for i in range(len(group))
    ]


def _by_config(cfgs) -> dict:
    groups: dict = {}
    for i, cfg in enumerate(cfgs):
        groups.setdefault(cfg, []).append(i)
    return groups


def predict_many(states: Sequence[FilterStates], dt: float, cfgs: Sequence[NoiseConfig]) -> list:
    """Predict many tracks at once; ``cfgs[i]`` configures ``states[i]``."""
    if not dt > 0:
        raise NonPositiveDt(f"dt must be positive, got {dt}")
    out: list = [None] * len(states)
    for cfg, idx in _by_config(cfgs).items():
        for i, s in zip(idx, _predict_group([states[i] for i in idx], float(dt), cfg)):
            out[i] = s
    return out


def predict(states: FilterStates, dt: float, cfg: NoiseConfig = NoiseConfig()) -> FilterStates:
    """Advance all three filters by ``dt`` seconds."""
    return predict_many([states], dt, [cfg])[0]


def heading_innovation(s: HeadingFilterState, det, cfg: NoiseConfig) -> np.ndarray:
    """Wrapped heading innovation; one or two rows depending on the speed gate."""
    theta_v = velocity_heading(det, cfg.v_min)
    if theta_v is None:
        return np.array([wrap_angle(det.global_yaw - s.state[0])])
    return wrap_angle(np.array([det.global_yaw - s.state[0], theta_v - s.state[1]]))


def _update_group(group: list, dets: list, cfg: NoiseConfig) -> list:
    n = len(group)
    new_pos: list = [None] * n
    new_head: list = [None] * n

    # position: split by whether the detector supplied a velocity
    for with_vel in (True, False):
        idx = [i for i in range(n) if dets[i].velocity_valid == with_vel]
        if not idx:
            continue
        x, p = _stack([group[i].position for i in idx])
        if with_vel:
            z = np.array([[*dets[i].global_xyz[:2], *dets[i].global_velocity] for i in idx], dtype=float)
            h, r = _H_POS_FULL, np.diag([cfg.position_meas_var] * 2 + [cfg.velocity_meas_var] * 2)
        else:
            z = np.array([dets[i].global_xyz[:2] for i in idx], dtype=float)
            h, r = _H_POS_XY, np.diag([cfg.position_meas_var] * 2)
        x, p = _update(x, p, z - x @ h.T, h, r)
        for k, i in enumerate(idx):
            new_pos[i] = PositionFilterState(x[k], p[k])

    x, p = _stack([s.size for s in group])
    z = np.array([d.lwh[:2] for d in dets], dtype=float)
    x, p = _update(x, p, z - x @ _H_SIZE.T, _H_SIZE, np.diag([cfg.size_meas_var] * 2))
    x[:, 0:2] = np.maximum(x[:, 0:2], MIN_SIZE)
    new_size = [SizeFilterState(x[k], p[k]) for k in range(n)]

    innovations = [heading_innovation(group[i].heading, dets[i], cfg) for i in range(n)]
    for rows in (2, 1):
        idx = [i for i in range(n) if len(innovations[i]) == rows]
        if not idx:
            continue
        x, p = _stack([group[i].heading for i in idx])
        if rows == 2:
            h, r = _H_HEAD_FULL, np.diag([cfg.heading_meas_var, cfg.heading_velocity_meas_var])
        else:
            h, r = _H_HEAD_P, np.array([[cfg.heading_meas_var]])
        x, p = _update(x, p, np.stack([innovations[i] for i in idx]), h, r)
        x[:, 0:2] = wrap_angle(x[:, 0:2])
        for k, i in enumerate(idx):
            new_head[i] = HeadingFilterState(x[k], p[k])

    return [FilterStates(new_pos[i], new_size[i], new_head[i]) for i in range(n)]


def update_many(states: Sequence[FilterStates], dets: Sequence, cfgs: Sequence[NoiseConfig]) -> list:
    """Update many tracks at once, each with its matched detection."""
    out: list = [None] * len(states)
    for cfg, idx in _by_config(cfgs).items():
        for i, s in zip(idx, _update_group([states[i] for i in idx], [dets[i] for i in idx], cfg)):
            out[i] = s
    return out


def update(states: FilterStates, det, cfg: NoiseConfig = NoiseConfig()) -> FilterStates:
    """Kalman update of all three filters with one detection.

    Heading innovations are wrapped into ``(-pi, pi]`` before the gain is
    applied; the ``theta_v`` row is dropped below ``cfg.v_min``.
    """
    return update_many([states], [det], [cfg])[0]
