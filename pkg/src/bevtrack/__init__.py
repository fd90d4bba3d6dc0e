"""CPU-only 3D multi-object tracking with decoupled Kalman filters and two-stage BEV/RV matching."""
from .association import AssocConfig, CostMatrix, MatchSet, bidirectional_cost, greedy, hungarian, two_stage_match
from .baseversion import (
    CameraCalib,
    DetectionBox,
    FrameRecord,
    LifecycleState,
    SceneRecord,
    TrackedBox,
    TrackingFrame,
    parse_scene,
    read_tracking_output,
    serialize_scene,
    write_tracking_output,
)
from .clear import ClearCounts, clear_counts
from .config import LifecycleParams, TrackerConfig, load_config
from .filters import NoiseConfig
from .geometry import Box7, IouWeights, Rect2D, diou_bev, giou_bev, ro_gdiou, ro_iou, sdiou_rv
from .motion_metrics import MotionReport, SGParams, evaluate_motion
from .synthetic import ScenarioSpec, generate_scenario
from .tracker import Track, TrackerState, run_scene, step

__version__ = "0.1.0"
