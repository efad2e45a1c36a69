"""Input validation helpers and the package exception types."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

ROTATION_TOL = 1e-6
UNIT_TOL = 1e-6


class CoGraspError(ValueError):
    """Base class for all validation failures raised by this package."""


class ValidationError(CoGraspError):
    pass


class DegenerateInputError(CoGraspError):
    """Raised when geometry is too thin or too small for the requested operation."""


def check_points(points, *, name="points", allow_empty=False) -> np.ndarray:
    """Return ``points`` as a finite float64 array of shape (N, 3)."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 3:
        arr = arr.reshape(1, 3)
    if arr.size == 0:
        if allow_empty:
            return np.zeros((0, 3))
        raise ValidationError(f"{name} is empty")
    try:
        arr = check_array(arr, dtype=np.float64, ensure_2d=True, ensure_all_finite=True)
    except ValueError as exc:
        raise ValidationError(f"{name}: {exc}") from exc
    if arr.shape[1] != 3:
        raise ValidationError(f"{name} must have shape (N, 3), got {arr.shape}")
    return arr


def check_rotation(rotation, tol: float = ROTATION_TOL) -> np.ndarray:
    R = np.asarray(rotation, dtype=np.float64)
    if R.shape != (3, 3):
        raise ValidationError(f"rotation must be 3x3, got {R.shape}")
    if not np.all(np.isfinite(R)):
        raise ValidationError("rotation contains non-finite entries")
    if np.max(np.abs(R.T @ R - np.eye(3))) > tol:
        raise ValidationError("rotation is not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > tol:
        raise ValidationError("rotation determinant is not +1")
    return R


def check_unit_vector(v, *, name="vector", tol: float = UNIT_TOL) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ValidationError(f"{name} must be a finite 3-vector")
    if abs(np.linalg.norm(v) - 1.0) > tol:
        raise ValidationError(f"{name} must have unit norm (got {np.linalg.norm(v):.3g})")
    return v


def check_positive(value, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValidationError(f"{name} must be positive, got {value}")
    return value
