"""Parametric two-finger gripper and simplified hand.

Gripper frame: ``x`` is the finger baseline ``b_g``, ``z`` the approach ``a_g``
and ``y = a_g x b_g``. The frame origin sits at the fingertip midpoint; the
fingers occupy ``-finger_length <= z <= 0`` and the palm body sits behind them.

Hand frame: the inner palm surface lies in the ``z = 0`` plane facing ``+z``,
fingers point along ``+y``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .geometry import (
    GRIPPER,
    HAND,
    PointCloud,
    RigidTransform,
    TriangleMesh,
    box_mesh,
    sample_box_surface,
    transform_cloud,
)
from .validation import ValidationError, check_positive, check_rotation, check_unit_vector


@dataclass(frozen=True)
class GripperParams:
    """Gripper dimensions in meters.

    Defaults are rough approximations of a Robotiq 2F-85 and are not
    calibrated against the real device.
    """

    max_width: float = 0.085
    finger_length: float = 0.038
    finger_thickness: float = 0.012
    palm_depth: float = 0.06
    sample_spacing: float = 0.004

    def __post_init__(self):
        for name in ("max_width", "finger_length", "finger_thickness", "palm_depth", "sample_spacing"):
            check_positive(getattr(self, name), name)
        if self.sample_spacing >= self.finger_thickness:
            raise ValidationError("sample_spacing must be smaller than finger_thickness")

    @property
    def palm_extents(self) -> tuple[float, float, float]:
        return (self.max_width + self.finger_thickness, 2 * self.finger_thickness, self.palm_depth)


def grasp_rotation(baseline, approach) -> np.ndarray:
    """Rotation with columns ``[b, a x b, a]`` (right-handed)."""
    b = np.asarray(baseline, dtype=np.float64)
    a = np.asarray(approach, dtype=np.float64)
    return np.column_stack([b, np.cross(a, b), a])


@dataclass(frozen=True, eq=False)
class GraspPose:
    """A parallel-jaw grasp: pose of the gripper frame plus finger opening.

    ``contact_indices``/``contact_points`` are filled in by the antipodal
    sampler so the grasp can be re-checked later; imported grasps may omit them.
    """

    pose: RigidTransform
    opening_width: float
    contact_indices: Optional[tuple[int, int]] = None
    contact_points: Optional[np.ndarray] = None

    def __post_init__(self):
        check_positive(self.opening_width, "opening_width")
        object.__setattr__(self, "opening_width", float(self.opening_width))
        if self.contact_points is not None:
            cp = np.array(self.contact_points, dtype=np.float64).reshape(2, 3)
            cp.flags.writeable = False
            object.__setattr__(self, "contact_points", cp)
        if self.contact_indices is not None:
            object.__setattr__(self, "contact_indices", tuple(int(i) for i in self.contact_indices))

    @classmethod
    def from_vectors(cls, baseline, approach, translation, opening_width, **kw) -> "GraspPose":
        return cls(RigidTransform(grasp_rotation(baseline, approach), translation), opening_width, **kw)

    @property
    def approach(self) -> np.ndarray:
        return self.pose.rotation[:, 2]

    @property
    def baseline(self) -> np.ndarray:
        return self.pose.rotation[:, 0]

    def transformed(self, xf: RigidTransform) -> "GraspPose":
        cp = None if self.contact_points is None else xf.apply(self.contact_points)
        return GraspPose(xf.compose(self.pose), self.opening_width, self.contact_indices, cp)

    def to_dict(self) -> dict:
        d = {**self.pose.to_dict(), "opening_width": self.opening_width}
        if self.contact_indices is not None:
            d["contact_indices"] = list(self.contact_indices)
        if self.contact_points is not None:
            d["contact_points"] = [float(x) for x in self.contact_points.reshape(-1)]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GraspPose":
        return cls(
            RigidTransform.from_dict(d),
            d["opening_width"],
            d.get("contact_indices"),
            d.get("contact_points"),
        )


def gripper_approach(grasp: GraspPose) -> np.ndarray:
    """Approach vector ``a_g``: third column of the grasp rotation."""
    return check_rotation(grasp.pose.rotation)[:, 2].copy()


@lru_cache(maxsize=256)
def _canonical_gripper(params: GripperParams, width: float) -> np.ndarray:
    L, t, s = params.finger_length, params.finger_thickness, params.sample_spacing
    parts = [
        sample_box_surface((-width / 2, 0.0, -L / 2), (t, t, L), s),
        sample_box_surface((width / 2, 0.0, -L / 2), (t, t, L), s),
        sample_box_surface((0.0, 0.0, -L - params.palm_depth / 2), params.palm_extents, s),
    ]
    pts = np.concatenate(parts)
    pts.flags.writeable = False
    return pts


def render_gripper(params: GripperParams, grasp: GraspPose) -> PointCloud:
    """Surface samples of the posed gripper, masked ``GRIPPER``.

    Fingers are centred ``opening_width`` apart along the baseline. The point
    count depends on ``params`` only.
    """
    if grasp.opening_width > params.max_width + 1e-12:
        raise ValidationError(
            f"opening_width {grasp.opening_width} exceeds max_width {params.max_width}"
        )
    pts = _canonical_gripper(params, grasp.opening_width)
    return PointCloud(grasp.pose.apply(pts), np.full(len(pts), GRIPPER, dtype=np.int8))


# -- hand -------------------------------------------------------------------

PALM_EXTENTS = (0.075, 0.085, 0.02)
_FINGER_LENGTH = 0.075
_FINGER_WIDTH = 0.016
_FINGER_THICK = 0.016


def _hand_boxes() -> list[tuple[tuple, tuple]]:
    px, py, pz = PALM_EXTENTS
    boxes = [((0.0, 0.0, -pz / 2), PALM_EXTENTS)]
    for x in (-0.027, -0.009, 0.009, 0.027):
        boxes.append(((x, py / 2 + _FINGER_LENGTH / 2, -_FINGER_THICK / 2), (_FINGER_WIDTH, _FINGER_LENGTH, _FINGER_THICK)))
    thumb_len = 0.055
    boxes.append(((px / 2 + thumb_len / 2, -0.01, -_FINGER_THICK / 2), (thumb_len, 0.02, _FINGER_THICK)))
    return boxes


@dataclass(frozen=True, eq=False)
class HandModel:
    """Rigid hand template with a designated inner-palm patch."""

    template: TriangleMesh
    palm_faces: tuple[int, ...]
    surface_cloud: PointCloud
    model_id: str = "default"

    def __post_init__(self):
        if len(self.palm_faces) == 0:
            raise ValidationError("palm_faces must not be empty")
        n = len(self.template.faces)
        if any(f < 0 or f >= n for f in self.palm_faces):
            raise ValidationError("palm face index out of range")
        object.__setattr__(self, "palm_faces", tuple(int(f) for f in self.palm_faces))


def default_hand_model(spacing: float = 0.005) -> HandModel:
    """Palm slab with four finger slabs and a thumb slab, as one mesh."""
    verts, faces, clouds = [], [], []
    for center, extents in _hand_boxes():
        mesh = box_mesh(center, extents)
        faces.append(mesh.faces + sum(len(v) for v in verts))
        verts.append(mesh.vertices)
        clouds.append(sample_box_surface(center, extents, spacing))
    template = TriangleMesh(np.concatenate(verts), np.concatenate(faces))
    cloud = np.concatenate(clouds)
    # faces 2 and 3 of the first box are the palm's +z side
    return HandModel(template, (2, 3), PointCloud.with_role(cloud, HAND))


def hand_approach(model: HandModel, pose: RigidTransform, weighting: str = "unweighted") -> np.ndarray:
    """Approach ``a_h``: mean of the posed palm-face normals, renormalised.

    ``weighting="area"`` weights each face normal by its area instead.
    """
    idx = np.asarray(model.palm_faces)
    normals = model.template.face_normals()[idx]
    if weighting == "area":
        w = model.template.face_areas()[idx]
    elif weighting == "unweighted":
        w = np.ones(len(idx))
    else:
        raise ValidationError(f"unknown weighting {weighting!r}")
    mean = (normals * w[:, None]).sum(axis=0) / w.sum()
    norm = np.linalg.norm(mean)
    if norm < 1e-9:
        raise ValidationError("palm normals cancel out; approach is undefined")
    return pose.rotation @ (mean / norm)


@dataclass(frozen=True, eq=False)
class HandGrasp:
    """A posed hand: its cloud ``PC^h`` and approach vector ``a_h``."""

    pose: RigidTransform
    cloud: PointCloud
    approach: np.ndarray
    model_id: str = "default"
    clearance: Optional[float] = None

    def __post_init__(self):
        a = check_unit_vector(self.approach, name="approach", tol=1e-9).copy()
        a.flags.writeable = False
        object.__setattr__(self, "approach", a)

    def transformed(self, xf: RigidTransform) -> "HandGrasp":
        return HandGrasp(
            xf.compose(self.pose),
            transform_cloud(self.cloud, xf),
            xf.rotation @ self.approach,
            self.model_id,
            self.clearance,
        )

    def to_dict(self) -> dict:
        d = {**self.pose.to_dict(), "model_id": self.model_id, "approach": [float(x) for x in self.approach]}
        if self.clearance is not None:
            d["clearance"] = float(self.clearance)
        return d


def pose_hand(model: HandModel, pose: RigidTransform, weighting: str = "unweighted", clearance=None) -> HandGrasp:
    return HandGrasp(
        pose,
        transform_cloud(model.surface_cloud, pose),
        hand_approach(model, pose, weighting),
        model.model_id,
        clearance,
    )


def hand_grasp_from_dict(d: dict, model: HandModel) -> HandGrasp:
    """Rebuild a hand grasp; the cloud is re-posed from ``model``."""
    if d.get("model_id", model.model_id) != model.model_id:
        raise ValidationError(f"hand grasp uses model {d['model_id']!r}, not {model.model_id!r}")
    return pose_hand(model, RigidTransform.from_dict(d), clearance=d.get("clearance"))
