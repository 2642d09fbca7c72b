"""Metric monocular depth from event streams by motion-compensation plane sweep.

Events are warped to a reference time under a set of depth hypotheses; the
hypothesis that collapses event trajectories best at each pixel, judged by
the focus of the warped-event image, is the depth estimate there.
"""
from .events import (EVENT_DTYPE, EventWindow, check_stream, form_windows,
                     load_events, make_events, save_events_binary,
                     save_events_text)
from .motion import (CameraIntrinsics, CameraRig, VelocitySample,
                     inject_velocity_noise, interpolate_velocity, load_camera,
                     load_track, motion_field, save_camera, save_track,
                     warp_events)
from .iwe import Iwe, IwePyramid, accumulate, build_pyramid
from .focus import (FocusConfig, FocusWeights, GradientStack, ScoreMap,
                    fcd_score_map, gradient_stack, objective)
from .costvol import (AggregationConfig, CostVolume, DepthMap, HypothesisSet,
                      SweepConfig, SweepResult, build_volume, estimate_depth,
                      extract_depth, fill_depth, inverse_depth_hypotheses,
                      linear_hypotheses, multiscale_fuse, objective_sweep,
                      trend_filter)
from .synth import GroundTruth, SceneSpec, generate, oracle_depth_error
from .metrics import MetricReport, evaluate
from .imgio import read_pfm, read_pgm, write_pfm, write_pgm

__version__ = "0.1.0"

__all__ = [
    "EVENT_DTYPE", "EventWindow", "check_stream", "form_windows",
    "load_events", "make_events", "save_events_binary", "save_events_text",
    "CameraIntrinsics", "CameraRig", "VelocitySample", "inject_velocity_noise",
    "interpolate_velocity", "load_camera", "load_track", "motion_field",
    "save_camera", "save_track", "warp_events",
    "Iwe", "IwePyramid", "accumulate", "build_pyramid",
    "FocusConfig", "FocusWeights", "GradientStack", "ScoreMap",
    "fcd_score_map", "gradient_stack", "objective",
    "AggregationConfig", "CostVolume", "DepthMap", "HypothesisSet",
    "SweepConfig", "SweepResult", "build_volume", "estimate_depth",
    "extract_depth", "fill_depth", "inverse_depth_hypotheses",
    "linear_hypotheses", "multiscale_fuse", "objective_sweep", "trend_filter",
    "GroundTruth", "SceneSpec", "generate", "oracle_depth_error",
    "MetricReport", "evaluate",
    "read_pfm", "read_pgm", "write_pfm", "write_pgm",
    "__version__",
]
