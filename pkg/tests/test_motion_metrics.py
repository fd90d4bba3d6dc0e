import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bevtrack.baseversion import DetectionBox, FrameRecord, LifecycleState, SceneRecord, TrackedBox, TrackingFrame
from bevtrack.errors import EmptySeries, NoPeaks, SeriesTooShort
from bevtrack.motion_metrics import (
    SGParams,
    VelocitySeries,
    baseline_frames,
    detect_peaks,
    estimate_velocity_curvefit,
    estimate_velocity_differentiation,
    evaluate_motion,
    savitzky_golay,
    vae,
    vaie_vir,
    vde,
    vde_shifts,
    vne,
    vse,
)
from oracles import lstsq_poly_center


def sg_reference(y, window, order):
    """Truncated-window SG from the normal equations, one sample at a time."""
    y = np.asarray(y, dtype=float)
    n, half = len(y), window // 2
    out = np.empty(n)
    for i in range(n):
        lo, hi = max(0, i - half), min(n, i + half + 1)
        x = np.arange(lo, hi) - i
        v = np.vander(x.astype(float), min(order, hi - lo - 1) + 1, increasing=True)
        out[i] = np.linalg.solve(v.T @ v, v.T @ y[lo:hi])[0]
    return out


# ---------------------------------------------------------------------------
# angle metrics


def test_vae_equal_angles():
    assert vae(1.3, 1.3) == 0.0


def test_vae_two_degree_separation():
    assert math.degrees(vae(math.radians(359), math.radians(1))) == pytest.approx(-2.0, abs=1e-12)


def test_vae_branch_point_maps_to_plus_pi():
    assert vae(0.0, math.pi) == math.pi
    assert vae(np.array([0.0]), np.array([math.pi]))[0] == math.pi


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_vae_range_and_antisymmetry(a, b):
    e = vae(a, b)
    assert -math.pi < e <= math.pi
    if abs(abs(e) - math.pi) > 1e-9:
        assert vae(b, a) == pytest.approx(-e, abs=1e-9)


def test_vaie_vir_no_inversions():
    assert vaie_vir([0.1, -0.2, 0.3]) == (None, 0.0)


def test_vaie_vir_two_of_ten():
    errors = [0.1] * 8 + [2.0, -2.5]
    vaie_value, vir_value = vaie_vir(errors)
    assert vir_value == 0.2
    assert vaie_value == pytest.approx(2.25)


def test_vaie_vir_all_pi():
    assert vaie_vir([math.pi] * 4) == (math.pi, 1.0)


def test_vaie_vir_empty():
    with pytest.raises(EmptySeries):
        vaie_vir([])


@given(st.lists(st.floats(-math.pi, math.pi), min_size=1, max_size=50))
def test_vir_is_exceedance_fraction(errors):
    _, vir_value = vaie_vir(errors)
    assert vir_value == sum(abs(e) > math.pi / 2 for e in errors) / len(errors)


def test_vne_values():
    assert vne(5.0, 4.4) == pytest.approx(0.6)
    assert vne(3.0, 3.0) == 0.0
    assert vne(0.0, 1.2) == 1.2


# ---------------------------------------------------------------------------
# smoothing


def test_sg_constant_series():
    np.testing.assert_allclose(savitzky_golay(np.full(9, 2.5)), 2.5, atol=1e-12)


def test_sg_impulse_centre():
    out = savitzky_golay([0, 0, 1, 0, 0], SGParams(5, 2))
    assert out[2] == pytest.approx(lstsq_poly_center([0, 0, 1, 0, 0], 2), abs=1e-12)
    assert out[2] == pytest.approx(17 / 35, abs=1e-12)


@pytest.mark.parametrize("window,order", [(5, 2), (7, 3), (9, 4), (5, 0), (11, 2)])
def test_sg_reproduces_polynomials(window, order):
    rng = np.random.default_rng(window * 10 + order)
    x = np.arange(40, dtype=float)
    for degree in range(order + 1):
        y = np.polyval(rng.normal(size=degree + 1), x / 10)
        np.testing.assert_allclose(savitzky_golay(y, SGParams(window, order)), y, atol=1e-9)


def test_sg_matches_normal_equations_everywhere():
    rng = np.random.default_rng(2)
    y = rng.normal(size=30)
    for window, order in ((5, 2), (7, 3), (9, 2)):
        np.testing.assert_allclose(savitzky_golay(y, SGParams(window, order)), sg_reference(y, window, order), atol=1e-10)


def test_sg_too_short():
    with pytest.raises(SeriesTooShort):
        savitzky_golay([1.0, 2.0, 3.0], SGParams(5, 2))


def test_sg_params_validation():
    for bad in ((4, 2), (1, 0), (5, 5)):
        with pytest.raises(ValueError):
            SGParams(*bad)


def test_vse_constant_is_zero():
    assert vse(np.full(10, 7.0)) == pytest.approx(0.0, abs=1e-12)


def test_vse_ramp_smoother_than_spikes():
    ramp = np.linspace(0, 10, 20)
    spikes = np.where(np.arange(20) % 2, 1.0, -1.0)
    assert vse(ramp) < vse(spikes)


def test_vse_golden():
    series = [3.0, 3.4, 3.1, 3.9, 4.2, 4.0, 4.8, 5.1, 4.9, 5.6]
    expected = float(np.mean(np.abs(np.array(series) - sg_reference(series, 5, 2))))
    assert expected == pytest.approx(27 / 175, abs=1e-12)
    assert vse(series) == pytest.approx(27 / 175, abs=1e-12)


# ---------------------------------------------------------------------------
# peaks and delay


def test_peaks_monotone_none():
    assert detect_peaks(np.arange(10)).size == 0


def test_peaks_single():
    assert detect_peaks([0, 1, 0]).tolist() == [1]


def test_peaks_plateau_not_a_peak():
    assert detect_peaks([0, 1, 1, 0]).size == 0


def triangle(n=40, at=15, height=10.0, slope=1.0):
    t = np.arange(n, dtype=float)
    return height - slope * np.abs(t - at)


def delayed(series, k):
    """``series`` lagged by ``k`` frames, holding the first value."""
    out = np.empty_like(series)
    out[k:] = series[: len(series) - k]
    out[:k] = series[0]
    return out


def test_vde_identical_is_zero():
    g = triangle()
    assert vde(g, g) == 0.0


@pytest.mark.parametrize("k", range(0, 11))
def test_vde_recovers_shift(k):
    g = triangle()
    d = delayed(g, k)
    assert vde(g, d) == k
    # brute force over every lag confirms the minimiser is unique
    ref = g[10:20]
    scores = []
    for tau in range(11):
        diff = np.abs(ref - d[10 + tau : 20 + tau])
        scores.append(diff.mean() + diff.std())
    assert scores.count(min(scores)) == 1 and int(np.argmin(scores)) == k


def test_vde_two_peaks_average():
    n = 80
    g = np.maximum(triangle(n, 15), triangle(n, 50))
    d = g.copy()
    d[:40] = delayed(g, 2)[:40]
    d[40:] = delayed(g, 4)[40:]
    assert vde_shifts(g, d) == [2, 4]
    assert vde(g, d) == 3.0


def test_vde_no_usable_peak():
    with pytest.raises(NoPeaks):
        vde(np.arange(30.0), np.arange(30.0))
    # a peak too close to the edge is skipped
    with pytest.raises(NoPeaks):
        vde(triangle(30, 2), triangle(30, 2))


def test_vde_too_short():
    with pytest.raises(SeriesTooShort):
        vde(triangle(15, 7), triangle(15, 7))


# ---------------------------------------------------------------------------
# baseline estimators


def test_differentiation_step():
    v = estimate_velocity_differentiation([[0, 0], [1, 0]], [0.0, 0.5])
    np.testing.assert_array_equal(v.velocities, [[2, 0], [2, 0]])


def test_differentiation_stationary_and_linear():
    t = np.arange(6) * 0.1
    np.testing.assert_array_equal(estimate_velocity_differentiation(np.ones((6, 2)), t).velocities, 0.0)
    lin = np.stack([3 * t, -t], axis=1)
    np.testing.assert_allclose(estimate_velocity_differentiation(lin, t).velocities, [[3, -1]] * 6, atol=1e-12)


def test_curvefit_exact_line():
    v = estimate_velocity_curvefit([[0, 0], [1, 0], [2, 0]], [0, 1, 2])
    assert v.velocities[2, 0] == pytest.approx(1.0)


def test_curvefit_matches_normal_equations():
    rng = np.random.default_rng(4)
    frames = np.array([0, 1, 2, 4, 5, 7])
    pos = rng.normal(size=(6, 2))
    got = estimate_velocity_curvefit(pos, frames, frame_rate=10.0).velocities
    for i in range(2, 6):
        x = frames[i - 2 : i + 1].astype(float)
        a = np.stack([x, np.ones(3)], axis=1)
        slope = np.linalg.solve(a.T @ a, a.T @ pos[i - 2 : i + 1])[0]
        np.testing.assert_allclose(got[i], 10.0 * slope, atol=1e-12)


def test_curvefit_constant_is_zero():
    np.testing.assert_allclose(estimate_velocity_curvefit(np.ones((5, 2)), range(5)).velocities, 0.0, atol=1e-15)


def test_velocity_series_validation():
    with pytest.raises(ValueError):
        VelocitySeries([0.0, 0.0], [[1, 0], [1, 0]])


# ---------------------------------------------------------------------------
# scene level


def braking_gt(n=40, rate=10.0):
    """One car on the x axis whose speed peaks at frame 15."""
    speed = 5.0 + triangle(n, 15, 3.0, 0.2)
    x = np.concatenate([[0.0], np.cumsum(speed[1:] / rate)])
    frames = []
    for f in range(n):
        box = DetectionBox.from_pose((x[f], 0.0, 0.8), (4.5, 1.9, 1.6), 0.0, velocity=(speed[f], 0.0), tracking_id=0)
        frames.append(FrameRecord(f, f / rate, f"t{f}", (box,)))
    return SceneRecord("s", tuple(frames), ("car",))


def as_tracks(scene, velocity=None, track_id=3):
    out = []
    for k, f in enumerate(scene.frames):
        g = f.detections[0]
        v = g.global_velocity if velocity is None else velocity(k, g)
        box = TrackedBox(track_id, g.category, g.score, g.global_xyz, g.lwh, g.global_yaw, tuple(v), (0.0, 0.0), LifecycleState.CONFIRMED)
        out.append(TrackingFrame(scene.scene_id, f.frame_index, f.timestamp, (box,)))
    return out


def test_evaluate_perfect_tracking():
    gt = braking_gt()
    rep = evaluate_motion(gt, as_tracks(gt))
    assert rep.tp == 40 and rep.n_trajectories == 1
    assert rep.vae == rep.vne == rep.vir == rep.vde_frames == 0.0
    # smoothness is a property of the estimate alone, so it equals the ground truth's own roughness
    speeds = [f.detections[0].global_velocity[0] for f in gt.frames]
    assert rep.vse == pytest.approx(vse(speeds), abs=1e-12)
    assert rep.vaie is None


def test_evaluate_reversed_direction():
    gt = braking_gt()
    rep = evaluate_motion(gt, as_tracks(gt, lambda k, g: (-g.global_velocity[0], 0.0)))
    assert rep.vir == 1.0
    assert rep.vae == pytest.approx(180.0)
    assert rep.vaie == pytest.approx(180.0)
    assert rep.vne == 0.0


def test_evaluate_lagged_speed():
    gt = braking_gt()
    speeds = [f.detections[0].global_velocity[0] for f in gt.frames]
    rep = evaluate_motion(gt, as_tracks(gt, lambda k, g: (speeds[max(0, k - 3)], 0.0)))
    assert rep.vde_frames == 3.0
    assert rep.vde_seconds == pytest.approx(0.3)


def test_evaluate_empty():
    gt = braking_gt()
    rep = evaluate_motion(gt, [])
    assert rep.tp == 0 and rep.vne is None and rep.n_samples == 0


def test_evaluate_distance_gate_excludes_far_tracks():
    gt = braking_gt()
    far = [
        TrackingFrame(t.scene_id, t.frame_index, t.timestamp, tuple(b.__class__(**{**b.__dict__, "global_xyz": (b.global_xyz[0] + 5, 0, 0)}) for b in t.boxes))
        for t in as_tracks(gt)
    ]
    assert evaluate_motion(gt, far).tp == 0


def test_per_trajectory_flag_changes_weighting():
    gt = braking_gt()
    # the track id switches at frame 30, giving trajectories of 30 and 10 samples
    tracks = as_tracks(gt, lambda k, g: (g.global_velocity[0] + (1.0 if k < 30 else 3.0), 0.0))
    tracks = [
        TrackingFrame(t.scene_id, t.frame_index, t.timestamp, tuple(b.__class__(**{**b.__dict__, "track_id": 3 if t.frame_index < 30 else 4}) for b in t.boxes))
        for t in tracks
    ]
    assert evaluate_motion(gt, tracks).vne == pytest.approx((30 * 1.0 + 10 * 3.0) / 40)
    assert evaluate_motion(gt, tracks, per_trajectory=True).vne == pytest.approx(2.0)


def test_baseline_frames_differentiation_recovers_constant_speed():
    rate = 10.0
    frames = []
    for f in range(20):
        box = DetectionBox.from_pose((2.0 * f / rate, 1.0, 0.8), (4.5, 1.9, 1.6), 0.0, velocity=(2.0, 0.0), tracking_id=0)
        frames.append(FrameRecord(f, f / rate, f"t{f}", (box,)))
    scene = SceneRecord("s", tuple(frames), ("car",))
    for method in ("differentiation", "curvefit"):
        out = baseline_frames(scene, method)
        vel = np.array([f.boxes[0].velocity for f in out])
        np.testing.assert_allclose(vel, [[2.0, 0.0]] * 20, atol=1e-9)
    with pytest.raises(ValueError):
        baseline_frames(scene, "magic")
