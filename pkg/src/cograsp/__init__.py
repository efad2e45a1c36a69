"""Geometric co-grasp compatibility scoring for robot and human grasps."""

from .candidates import HandSynthConfig, SamplerConfig, sample_robot_grasps, synthesize_hand_grasps
from .embodiment import (
    GraspPose,
    GripperParams,
    HandGrasp,
    HandModel,
    default_hand_model,
    gripper_approach,
    hand_approach,
    render_gripper,
)
from .estimators import CoGraspPruner, MedianThresholdLabeler
from .geometry import (
    GRIPPER,
    HAND,
    OBJECT,
    ConvexHull,
    PointCloud,
    RigidTransform,
    SpatialIndex,
    TriangleMesh,
    build_hull,
    estimate_normals,
    hulls_intersect,
    mean_pair_distance,
    min_pair_distance,
    transform_cloud,
)
from .pipeline import ObjectSpec, SceneSpec, ablation_report, build_scene, generate_dataset, run_pipeline
from .scoring import (
    ObjectThresholds,
    PruneResult,
    ScoreRecord,
    compute_thresholds,
    label_pair,
    prune,
    score_all_pairs,
    score_s_a,
    score_s_d,
    score_s_n,
    sweep_thresholds,
)
from .validation import CoGraspError, DegenerateInputError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "HandSynthConfig",
    "SamplerConfig",
    "sample_robot_grasps",
    "synthesize_hand_grasps",
    "GraspPose",
    "GripperParams",
    "HandGrasp",
    "HandModel",
    "default_hand_model",
    "gripper_approach",
    "hand_approach",
    "render_gripper",
    "CoGraspPruner",
    "MedianThresholdLabeler",
    "GRIPPER",
    "HAND",
    "OBJECT",
    "ConvexHull",
    "PointCloud",
    "RigidTransform",
    "SpatialIndex",
    "TriangleMesh",
    "build_hull",
    "estimate_normals",
    "hulls_intersect",
    "mean_pair_distance",
    "min_pair_distance",
    "transform_cloud",
    "ObjectSpec",
    "SceneSpec",
    "ablation_report",
    "build_scene",
    "generate_dataset",
    "run_pipeline",
    "ObjectThresholds",
    "PruneResult",
    "ScoreRecord",
    "compute_thresholds",
    "label_pair",
    "prune",
    "score_all_pairs",
    "score_s_a",
    "score_s_d",
    "score_s_n",
    "sweep_thresholds",
    "CoGraspError",
    "DegenerateInputError",
    "ValidationError",
]
