"""Robot grasp candidates (antipodal sampling) and synthetic hand placements."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .embodiment import (
    GraspPose,
    GripperParams,
    HandGrasp,
    HandModel,
    grasp_rotation,
    pose_hand,
    render_gripper,
)
from .geometry import PointCloud, RigidTransform, SpatialIndex, min_pair_distance, pair_distances
from .validation import ValidationError, check_rotation

COLLISION_CLEARANCE = 1e-3
# extra gap left on each side between finger pad and contact
FINGER_GAP = 0.003


@dataclass(frozen=True)
class SamplerConfig:
    friction_half_angle: float = math.atan(0.5)
    max_candidates: int = 200
    approach_samples_per_axis: int = 8
    standoff: float = 0.01
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 < self.friction_half_angle < math.pi / 2:
            raise ValidationError("friction_half_angle must be in (0, pi/2)")
        if self.max_candidates < 1:
            raise ValidationError("max_candidates must be >= 1")
        if self.approach_samples_per_axis < 1:
            raise ValidationError("approach_samples_per_axis must be >= 1")


@dataclass(frozen=True)
class HandSynthConfig:
    n: int = 4
    radial_offset: float = 0.02
    azimuth_samples: int = 8
    rng_seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("n must be >= 1")
        if self.azimuth_samples < 1:
            raise ValidationError("azimuth_samples must be >= 1")


def _perpendicular_basis(b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ref = np.eye(3)[int(np.argmin(np.abs(b)))]
    e1 = np.cross(b, ref)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(b, e1)


def _antipodality(p1, n1, cand_pts, cand_normals):
    """Worse of the two contact-cone cosines per candidate partner (-inf if coincident)."""
    d = cand_pts - p1
    span = np.linalg.norm(d, axis=1)
    ok = span > 1e-9
    u = np.zeros_like(d)
    u[ok] = d[ok] / span[ok, None]
    score = np.minimum(u @ -n1, np.einsum("ij,ij->i", u, cand_normals))
    score[~ok] = -np.inf
    return score


def sample_robot_grasps(
    object_cloud: PointCloud,
    normals,
    gripper: GripperParams,
    cfg: SamplerConfig,
) -> list[GraspPose]:
    """Sample collision-free antipodal grasps on an object cloud.

    Contact points are visited in a seeded random order. Each first contact is
    paired with its most antipodal partner within ``max_width`` (the one whose
    worse friction-cone alignment is best; ties go to the lower index), then approach
    directions around the baseline are tried until the rendered gripper keeps
    ``COLLISION_CLEARANCE`` from the object. The result is sorted by contact
    pair and holds at most ``cfg.max_candidates`` grasps; an empty list means
    no valid pair exists.
    """
    pts = object_cloud.points
    normals = np.asarray(normals, dtype=np.float64)
    if normals.shape != pts.shape:
        raise ValidationError("normals must align with object_cloud points")
    rng = np.random.default_rng(cfg.rng_seed)
    tree = cKDTree(pts)
    obstacle = SpatialIndex(pts)
    cos_half = math.cos(cfg.friction_half_angle)
    K = cfg.approach_samples_per_axis

    found = []
    for i1 in rng.permutation(len(pts)):
        if len(found) >= cfg.max_candidates:
            break
        p1, n1 = pts[i1], normals[i1]
        nbrs = np.asarray(tree.query_ball_point(p1, gripper.max_width), dtype=np.int64)
        if nbrs.size == 0:
            continue
        nbrs = np.sort(nbrs)
        spans = pair_distances(p1[None, :], pts[nbrs])[0]
        nbrs = nbrs[spans <= gripper.max_width]
        score = _antipodality(p1, n1, pts[nbrs], normals[nbrs])
        best = int(np.argmax(score))
        if score[best] < cos_half:
            continue
        i2 = int(nbrs[best])
        p2 = pts[i2]
        span = float(pair_distances(p1[None, :], p2[None, :])[0, 0])
        b = (p2 - p1) / span
        width = min(gripper.max_width, span + gripper.finger_thickness + 2 * FINGER_GAP)
        mid = 0.5 * (p1 + p2)
        e1, e2 = _perpendicular_basis(b)
        phase = rng.uniform(0.0, 2 * math.pi)
        for k in rng.permutation(K):
            ang = phase + 2 * math.pi * k / K
            a = math.cos(ang) * e1 + math.sin(ang) * e2
            grasp = GraspPose(
                RigidTransform(grasp_rotation(b, a), mid - cfg.standoff * a),
                width,
                contact_indices=(int(i1), i2),
                contact_points=np.stack([p1, p2]),
            )
            cloud = render_gripper(gripper, grasp)
            if obstacle.min_distance(cloud.points) >= COLLISION_CLEARANCE:
                found.append(grasp)
                break
    found.sort(key=lambda g: g.contact_indices)
    return found


def grasp_violations(
    grasp: GraspPose,
    object_cloud: PointCloud,
    normals,
    gripper: GripperParams,
    cfg: SamplerConfig,
) -> list[str]:
    """Re-check a sampled grasp against the sampler's guarantees.

    Returns a list of human-readable failures (empty when the grasp is valid).
    """
    problems = []
    R = grasp.pose.rotation
    try:
        check_rotation(R)
    except ValidationError as exc:
        problems.append(str(exc))
    if abs(float(R[:, 0] @ R[:, 2])) > 1e-9:
        problems.append("approach not perpendicular to baseline")
    if grasp.contact_indices is None:
        return problems + ["missing contact metadata"]
    i1, i2 = grasp.contact_indices
    p1, p2 = object_cloud.points[i1], object_cloud.points[i2]
    n = np.asarray(normals)
    span = float(np.linalg.norm(p2 - p1))
    if span > gripper.max_width:
        problems.append(f"contact span {span:.4f} exceeds max_width")
    d = (p2 - p1) / span
    cos_half = math.cos(cfg.friction_half_angle)
    if d @ -n[i1] < cos_half - 1e-12 or d @ n[i2] < cos_half - 1e-12:
        problems.append("contacts violate the friction cone")
    if np.max(np.abs(d - grasp.baseline)) > 1e-9:
        problems.append("baseline does not match contact direction")
    expected_t = 0.5 * (p1 + p2) - cfg.standoff * grasp.approach
    if np.max(np.abs(expected_t - grasp.pose.translation)) > 1e-9:
        problems.append("translation is not midpoint minus standoff")
    if grasp.opening_width > gripper.max_width:
        problems.append("opening width exceeds max_width")
    if min_pair_distance(render_gripper(gripper, grasp), object_cloud) < COLLISION_CLEARANCE:
        problems.append("rendered gripper collides with object")
    return problems


def principal_vertical_axis(points) -> np.ndarray:
    """Covariance eigenvector closest to world z, signed to point upward."""
    pts = np.asarray(points, dtype=np.float64)
    _, vecs = np.linalg.eigh(np.cov(pts.T))
    align = np.abs(vecs[2, :])
    # argmax returns the first maximum, giving the smallest-index tie-break
    axis = vecs[:, int(np.argmax(align))]
    return axis if axis[2] >= 0 else -axis


def synthesize_hand_grasps(object_cloud: PointCloud, hand: HandModel, cfg: HandSynthConfig) -> list[HandGrasp]:
    """Place ``cfg.n`` hands on a ring around the object's vertical axis.

    Each palm faces the object axis, fingers point up the axis, and the hand is
    slid inward until its closest point is ``radial_offset`` from the object.
    """
    pts = object_cloud.points
    if len(pts) == 0:
        raise ValidationError("object cloud is empty")
    rng = np.random.default_rng(cfg.rng_seed)
    c = pts.mean(axis=0)
    axis = principal_vertical_axis(pts) if len(pts) > 1 else np.array([0.0, 0.0, 1.0])
    u, v = _perpendicular_basis(axis)
    rel = pts - c
    along = rel @ axis
    radial_extent = float(np.max(np.linalg.norm(rel - np.outer(along, axis), axis=1)))
    half_height = 0.25 * float(along.max() - along.min())
    # keep the hand centre within 25 degrees of horizontal as seen from the centroid
    half_height = min(half_height, math.tan(math.radians(25)) * (radial_extent + cfg.radial_offset))

    A = cfg.azimuth_samples
    phase = rng.uniform(0.0, 2 * math.pi)
    slots = rng.choice(A, size=cfg.n, replace=cfg.n > A)
    heights = rng.uniform(-half_height, half_height, size=cfg.n)
    index = SpatialIndex(pts)
    template = hand.surface_cloud.points

    grasps = []
    for slot, h in zip(slots, heights):
        ang = phase + 2 * math.pi * slot / A
        r = math.cos(ang) * u + math.sin(ang) * v
        z_h = -r
        x_h = np.cross(axis, z_h)
        R = np.column_stack([x_h, axis, z_h])
        base = c + h * axis
        s = radial_extent + cfg.radial_offset + 0.1
        gap = np.inf
        for _ in range(50):
            gap = index.min_distance(template @ R.T + base + s * r)
            step = gap - cfg.radial_offset
            if abs(step) < 1e-7:
                break
            s -= step
        grasps.append(pose_hand(hand, RigidTransform(R, base + s * r), clearance=gap))
    return grasps
