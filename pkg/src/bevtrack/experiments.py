"""Synthetic experiments shared by the CLI, the scripts and the acceptance tests."""
from __future__ import annotations

import dataclasses
import json
import time
from typing import Iterable, Optional, Sequence

import numpy as np

from .baseversion import serialize_scene, tracking_lines
from .clear import ClearCounts, clear_counts
from .config import TrackerConfig
from .geometry import COST_KINDS
from .motion_metrics import baseline_frames, evaluate_motion
from .synthetic import ScenarioSpec, generate_scenario
from .tracker import as_tracking_frames, run_scene

# frames before this index are the confirmation window for confirm_hits = 2
CONFIRMATION_FRAMES = 2
VELOCITY_METHODS = ("kalman", "differentiation", "curvefit")


def track_and_count(
    spec: ScenarioSpec, cfg: TrackerConfig = TrackerConfig(), from_frame: Optional[int] = CONFIRMATION_FRAMES
) -> ClearCounts:
    gt, det = generate_scenario(spec)
    frames = as_tracking_frames(det.scene_id, run_scene(det, cfg))
    return clear_counts(gt, frames, from_frame=from_frame)


# ---------------------------------------------------------------------------
# ablation


def ablation_specs(seeds: Iterable[int], **overrides) -> list:
    """The noisy scene used for the cost-function comparison, one per seed."""
    base = dict(
        n_objects=12,
        n_lanes=4,
        lane_spacing=3.5,
        headway=12.0,
        duration=60,
        position_sigma=0.3,
        yaw_sigma=0.05,
        velocity_sigma=0.5,
        dropout_prob=0.1,
        fp_rate=0.5,
        heading_jitter=0.1,
        speed_jitter=3.0,
    )
    base.update(overrides)
    return [ScenarioSpec(seed=s, **base) for s in seeds]


def ablation_rows(
    specs: Sequence[ScenarioSpec],
    cfg: TrackerConfig = TrackerConfig(),
    cost_kinds: Sequence[str] = COST_KINDS,
    rv_settings: Sequence[bool] = (False, True),
) -> list:
    """One row per (cost kind, RV setting) with counts summed and MOTA averaged over ``specs``."""
    scenes = [generate_scenario(s) for s in specs]
    rows = []
    for kind in cost_kinds:
        for rv in rv_settings:
            run_cfg = cfg.with_overrides(cost_kind=kind, rv_enabled=rv)
            counts = []
            for gt, det in scenes:
                frames = as_tracking_frames(det.scene_id, run_scene(det, run_cfg))
                counts.append(clear_counts(gt, frames, from_frame=CONFIRMATION_FRAMES))
            rows.append(
                {
                    "cost_kind": kind,
                    "bev": True,
                    "rv": rv,
                    "n_scenes": len(counts),
                    "mota": float(np.mean([c.mota for c in counts])),
                    "tp": sum(c.tp for c in counts),
                    "fp": sum(c.fp for c in counts),
                    "fn": sum(c.fn for c in counts),
                    "idsw": sum(c.idsw for c in counts),
                }
            )
    return rows


def format_rows(rows: Sequence[dict]) -> str:
    """Fixed-width table, one line per row."""
    header = f"{'cost':<9} {'BEV':<4} {'RV':<4} {'MOTA':>8} {'TP':>7} {'FP':>6} {'FN':>6} {'IDSW':>5}"
    lines = [header]
    for r in rows:
        lines.append(
            f"{r['cost_kind']:<9} {'y' if r['bev'] else 'n':<4} {'y' if r['rv'] else 'n':<4} "
            f"{r['mota']:>8.4f} {r['tp']:>7d} {r['fp']:>6d} {r['fn']:>6d} {r['idsw']:>5d}"
        )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# depth error along the camera ray


def depth_error_spec(n_frames: int = 1, start: int = 20, meters: float = 8.0, **overrides) -> ScenarioSpec:
    """One car driving away from the front camera, ``n_frames`` detections pushed along the ray."""
    base = dict(n_objects=1, duration=60, speed=5.0, speed_jitter=0.0, start_x=20.0)
    base.update(overrides)
    return ScenarioSpec(depth_error_injections=tuple((f, 0, meters) for f in range(start, start + n_frames)), **base)


def no_coast_config(cfg: TrackerConfig = TrackerConfig()) -> TrackerConfig:
    """``cfg`` with every track deleted on its first miss."""
    lifecycle = {k: dataclasses.replace(v, max_misses=0) for k, v in cfg.lifecycle.items()}
    return cfg.with_overrides(lifecycle=lifecycle)


# ---------------------------------------------------------------------------
# velocity estimators


def motion_spec(seed: int, **overrides) -> ScenarioSpec:
    """Braking scene sampled at 2 Hz with noisy positions and detector velocities."""
    base = dict(
        n_objects=4,
        motion_model="brake_event",
        duration=60,
        frame_rate=2.0,
        position_sigma=0.3,
        velocity_sigma=0.5,
        speed=14.0,
        speed_jitter=2.0,
        headway=30.0,
        brake_time=0.4,
        brake_decel=2.0,
        pre_brake_accel=0.2,
    )
    base.update(overrides)
    return ScenarioSpec(seed=seed, **base)


def motion_reports(spec: ScenarioSpec, cfg: TrackerConfig = TrackerConfig(), **eval_kwargs) -> dict:
    """MotionReport per velocity estimator on one scene."""
    gt, det = generate_scenario(spec)
    frames = {
        "kalman": as_tracking_frames(det.scene_id, run_scene(det, cfg)),
        "differentiation": baseline_frames(det, "differentiation"),
        "curvefit": baseline_frames(det, "curvefit"),
    }
    return {m: evaluate_motion(gt, frames[m], **eval_kwargs) for m in VELOCITY_METHODS}


def motion_table(specs: Sequence[ScenarioSpec], cfg: TrackerConfig = TrackerConfig(), **eval_kwargs) -> dict:
    """Per-estimator means over scenes of every defined metric field."""
    keys = ("vae", "vne", "vse", "vde_frames", "vde_seconds", "vaie", "vir")
    acc = {m: {k: [] for k in keys} | {"tp": []} for m in VELOCITY_METHODS}
    for spec in specs:
        for m, rep in motion_reports(spec, cfg, **eval_kwargs).items():
            acc[m]["tp"].append(rep.tp)
            for k in keys:
                value = getattr(rep, k)
                if value is not None:
                    acc[m][k].append(value)
    return {
        m: {k: (float(np.mean(v)) if v else None) for k, v in fields.items()} | {"n_scenes": len(specs)}
        for m, fields in acc.items()
    }


# ---------------------------------------------------------------------------
# throughput


def throughput_spec(n_frames: int = 1000, n_objects: int = 50, seed: int = 0) -> ScenarioSpec:
    return ScenarioSpec(
        n_objects=n_objects,
        n_lanes=10,
        lane_spacing=4.0,
        headway=15.0,
        duration=n_frames,
        position_sigma=0.1,
        speed_jitter=1.0,
        seed=seed,
    )


def warm_up(cfg: TrackerConfig = TrackerConfig()) -> None:
    """Run a tiny scene so compiled kernels are loaded before anything is timed."""
    run_scene(generate_scenario(ScenarioSpec(n_objects=2, duration=3))[1], cfg)


def time_tracking(spec: ScenarioSpec, cfg: TrackerConfig = TrackerConfig()) -> float:
    """Wall-clock seconds spent in :func:`run_scene`, generation excluded."""
    _, det = generate_scenario(spec)
    warm_up(cfg)
    start = time.perf_counter()
    run_scene(det, cfg)
    return time.perf_counter() - start


# ---------------------------------------------------------------------------
# end to end


def pipeline_bytes(spec: ScenarioSpec, cfg: TrackerConfig = TrackerConfig()) -> dict:
    """generate, track and evaluate; every artefact as the bytes the CLI would write."""
    gt, det = generate_scenario(spec)
    results = run_scene(det, cfg)
    frames = as_tracking_frames(det.scene_id, results)
    motion = evaluate_motion(gt, frames)
    counts = clear_counts(gt, frames)
    return {
        "gt": serialize_scene(gt),
        "det": serialize_scene(det),
        "tracks": "".join(line + "\n" for line in tracking_lines(results, det.scene_id)).encode(),
        "motion": json.dumps(motion.to_dict(), sort_keys=True).encode(),
        "clear": json.dumps(counts.to_dict(), sort_keys=True).encode(),
    }

