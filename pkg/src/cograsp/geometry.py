"""Point clouds, rigid transforms, convex hulls and nearest-point queries.

All distances are in meters. Pairwise distances go through :func:`pair_distances`
so that every code path (KD-tree refinement, batched scoring, tests) agrees on
the exact floating-point value of ``||x - y||``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull as _QhullHull
from scipy.spatial import QhullError, cKDTree
from scipy.spatial.distance import cdist

from .validation import (
    DegenerateInputError,
    ValidationError,
    check_points,
    check_rotation,
)

GRIPPER = -1
OBJECT = 0
HAND = 1
ROLES = (GRIPPER, OBJECT, HAND)

GEOM_TOL = 1e-9
HULL_PAD = 1e-6
_MEAN_BLOCK = 2048


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Ordered 3D points with an optional per-point role mask.

    Parameters
    ----------
    points : array-like of shape (N, 3)
    mask : array-like of shape (N,), optional
        Role tags, one of ``GRIPPER`` (-1), ``OBJECT`` (0) or ``HAND`` (+1).
    """

    points: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = check_points(self.points, allow_empty=True)
        object.__setattr__(self, "points", _frozen(pts))
        if self.mask is not None:
            mask = np.asarray(self.mask).reshape(-1)
            if mask.shape[0] != pts.shape[0]:
                raise ValidationError(
                    f"mask length {mask.shape[0]} does not match point count {pts.shape[0]}"
                )
            if not np.all(np.isin(mask, ROLES)):
                raise ValidationError("mask values must be in {-1, 0, 1}")
            object.__setattr__(self, "mask", _frozen(mask.astype(np.int8)))

    def __len__(self) -> int:
        return self.points.shape[0]

    @classmethod
    def with_role(cls, points, role: int) -> "PointCloud":
        pts = np.asarray(points, dtype=np.float64)
        return cls(pts, np.full(len(pts), role, dtype=np.int8))

    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)


def _as_points(cloud) -> np.ndarray:
    if isinstance(cloud, PointCloud):
        return cloud.points
    return check_points(cloud)


def _require_nonempty(pts: np.ndarray, name: str) -> None:
    if pts.shape[0] == 0:
        raise ValidationError(f"{name} cloud is empty")


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rotation plus translation; ``apply(p) = R @ p + t``."""

    rotation: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", _frozen(check_rotation(self.rotation)))
        t = np.asarray(self.translation, dtype=np.float64).reshape(-1)
        if t.shape != (3,) or not np.all(np.isfinite(t)):
            raise ValidationError("translation must be a finite 3-vector")
        object.__setattr__(self, "translation", _frozen(t))

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Return ``self ∘ other`` (apply ``other`` first)."""
        return RigidTransform(
            self.rotation @ other.rotation, self.rotation @ other.translation + self.translation
        )

    def inverse(self) -> "RigidTransform":
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def to_dict(self) -> dict:
        return {
            "rotation": [float(x) for x in self.rotation.reshape(-1)],
            "translation": [float(x) for x in self.translation],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RigidTransform":
        return cls(np.asarray(d["rotation"], dtype=np.float64).reshape(3, 3), d["translation"])


def transform_cloud(cloud: PointCloud, xf: RigidTransform) -> PointCloud:
    return PointCloud(xf.apply(cloud.points), cloud.mask)


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = check_points(self.vertices, name="vertices")
        f = np.asarray(self.faces, dtype=np.int64)
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValidationError("faces must have shape (F, 3)")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ValidationError("face index out of range")
        object.__setattr__(self, "vertices", _frozen(v))
        object.__setattr__(self, "faces", _frozen(f))
        if np.any(self.face_areas() <= 1e-12):
            raise ValidationError("mesh has degenerate faces")

    def _cross(self) -> np.ndarray:
        a, b, c = (self.vertices[self.faces[:, k]] for k in range(3))
        return np.cross(b - a, c - a)

    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self._cross(), axis=1)

    def face_normals(self) -> np.ndarray:
        n = self._cross()
        return n / np.linalg.norm(n, axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class ConvexHull:
    """Triangulated convex hull with outward unit normals.

    A point ``x`` is inside when ``normals @ x + offsets <= 0`` for every face.
    """

    vertices: np.ndarray
    faces: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray
    volume: float

    def signed_distances(self, points) -> np.ndarray:
        """Largest face-plane signed distance per point (positive = outside)."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return (pts @ self.normals.T + self.offsets).max(axis=1)

    def contains(self, points, tol: float = GEOM_TOL) -> np.ndarray:
        return self.signed_distances(points) <= tol


def _degenerate_axes(pts: np.ndarray) -> list[np.ndarray]:
    centered = pts - pts.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=True)
    s = np.concatenate([s, np.zeros(3 - len(s))])
    rms = s / np.sqrt(len(pts))
    return [vt[k] for k in range(3) if rms[k] < GEOM_TOL]


def pad_degenerate(points, offset: float = HULL_PAD) -> np.ndarray:
    """Thicken flat, collinear or tiny point sets so a 3D hull exists.

    Each degenerate principal direction doubles the set with copies shifted
    by ``±offset``; a single point becomes a small cube.
    """
    pts = check_points(points)
    for axis in _degenerate_axes(pts):
        pts = np.concatenate([pts + offset * axis, pts - offset * axis])
    return pts


def _qhull(pts: np.ndarray) -> ConvexHull:
    h = _QhullHull(pts)
    vid = np.sort(h.vertices)
    remap = np.full(len(pts), -1, dtype=np.int64)
    remap[vid] = np.arange(len(vid))
    faces = remap[h.simplices]
    verts = pts[vid]
    normals = h.equations[:, :3]
    a, b, c = (verts[faces[:, k]] for k in range(3))
    flip = np.einsum("ij,ij->i", np.cross(b - a, c - a), normals) < 0
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return ConvexHull(
        vertices=_frozen(verts),
        faces=_frozen(faces),
        normals=_frozen(normals),
        offsets=_frozen(h.equations[:, 3]),
        volume=float(h.volume),
    )


def build_hull(cloud, *, pad: bool = False) -> ConvexHull:
    """Convex hull of a point cloud.

    With ``pad=False`` fewer than 4 points or a coplanar/collinear set raises
    :class:`DegenerateInputError`; with ``pad=True`` such input is thickened
    by :func:`pad_degenerate` first.
    """
    pts = _as_points(cloud)
    if pad:
        pts = pad_degenerate(pts)
    elif len(pts) < 4 or _degenerate_axes(pts):
        raise DegenerateInputError("hull needs at least 4 non-coplanar points")
    try:
        return _qhull(pts)
    except QhullError as exc:
        if not pad:
            raise DegenerateInputError(str(exc)) from exc
    # nearly flat beyond Qhull's precision: thicken along the thinnest axis
    centered = pts - pts.mean(axis=0)
    thin = np.linalg.svd(centered, full_matrices=True)[2][-1]
    pts = np.concatenate([pts + HULL_PAD * thin, pts - HULL_PAD * thin])
    return _qhull(pts)


# -- hull intersection ------------------------------------------------------


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _sub(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def _axpy(t, x, y):
    return (y[0] + t * x[0], y[1] + t * x[1], y[2] + t * x[2])


def _closest_segment(a, b):
    ab = _sub(b, a)
    denom = _dot(ab, ab)
    t = -_dot(a, ab) / denom if denom > 0 else 0.0
    if t <= 0:
        return a, [a]
    if t >= 1:
        return b, [b]
    return _axpy(t, ab, a), [a, b]


def _closest_triangle(a, b, c):
    # Voronoi-region walk for the origin against triangle abc
    ab, ac = _sub(b, a), _sub(c, a)
    d1, d2 = -_dot(ab, a), -_dot(ac, a)
    if d1 <= 0 and d2 <= 0:
        return a, [a]
    d3, d4 = -_dot(ab, b), -_dot(ac, b)
    if d3 >= 0 and d4 <= d3:
        return b, [b]
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        return _axpy(d1 / (d1 - d3), ab, a), [a, b]
    d5, d6 = -_dot(ab, c), -_dot(ac, c)
    if d6 >= 0 and d5 <= d6:
        return c, [c]
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        return _axpy(d2 / (d2 - d6), ac, a), [a, c]
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return _axpy(w, _sub(c, b), b), [b, c]
    denom = va + vb + vc
    if denom == 0:
        return _closest_segment(a, b)
    v, w = vb / denom, vc / denom
    return _axpy(w, ac, _axpy(v, ab, a)), [a, b, c]


def _closest_tetra(a, b, c, d):
    """Closest point to the origin; third item is the interior margin or None."""
    faces = ((a, b, c, d), (a, c, d, b), (a, d, b, c), (b, d, c, a))
    vol = _dot(_sub(b, a), _cross(_sub(c, a), _sub(d, a)))
    flat = abs(vol) <= 1e-14 * max(_dot(_sub(b, a), _sub(b, a)), 1e-300) ** 1.5
    best, best_s, best_dd = None, None, np.inf
    margin = np.inf
    for p, q, r, opp in faces:
        n = _cross(_sub(q, p), _sub(r, p))
        side_o = -_dot(p, n)
        side_d = _dot(_sub(opp, p), n)
        nn = _dot(n, n) ** 0.5
        if not flat and side_o * side_d >= 0:
            if nn > 0:
                margin = min(margin, abs(side_o) / nn)
            continue
        pt, s = _closest_triangle(p, q, r)
        dd = _dot(pt, pt)
        if dd < best_dd:
            best, best_s, best_dd = pt, s, dd
    if best is None:
        return (0.0, 0.0, 0.0), [a, b, c, d], margin
    return best, best_s, None


def _support(verts: np.ndarray, d) -> tuple:
    return tuple(verts[int(np.argmax(verts @ np.asarray(d)))].tolist())


def gjk_intersect(va: np.ndarray, vb: np.ndarray, tol: float = GEOM_TOL, max_iter: int = 64):
    """Support-function test on two vertex sets.

    Returns ``True``/``False`` when the answer is certified by a margin larger
    than ``tol`` and ``None`` when the configuration is too close to call.
    """
    v = _sub(tuple(va[0].tolist()), tuple(vb[0].tolist()))
    simplex = [v]
    for _ in range(max_iter):
        vv = _dot(v, v)
        if vv <= 1e-30:
            return None
        w = _sub(_support(va, (-v[0], -v[1], -v[2])), _support(vb, v))
        vw = _dot(v, w)
        if vw > 0 and vw * vw > tol * tol * vv:
            return False
        if vv - vw <= 1e-12 * vv:
            return None
        if any(w == s for s in simplex):
            return None
        simplex.append(w)
        if len(simplex) == 2:
            v, simplex = _closest_segment(*simplex)
        elif len(simplex) == 3:
            v, simplex = _closest_triangle(*simplex)
        else:
            v, simplex, margin = _closest_tetra(*simplex)
            if margin is not None:
                return True if margin > tol else None
    return None


def lp_intersect(va: np.ndarray, vb: np.ndarray) -> bool:
    """Exact-ish feasibility test: is there a point in both convex hulls?"""
    na, nb = len(va), len(vb)
    A_eq = np.zeros((5, na + nb))
    A_eq[:3, :na] = va.T
    A_eq[:3, na:] = -vb.T
    A_eq[3, :na] = 1.0
    A_eq[4, na:] = 1.0
    b_eq = np.array([0.0, 0.0, 0.0, 1.0, 1.0])
    res = linprog(np.zeros(na + nb), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    return res.status == 0


def hulls_intersect(a: ConvexHull, b: ConvexHull, tol: float = GEOM_TOL) -> bool:
    """True iff the two closed hulls share at least one point (touching counts)."""
    va, vb = a.vertices, b.vertices
    if np.any(va.min(axis=0) - vb.max(axis=0) > tol) or np.any(vb.min(axis=0) - va.max(axis=0) > tol):
        return False
    verdict = gjk_intersect(va, vb, tol)
    if verdict is None:
        return lp_intersect(va, vb)
    return verdict


# -- distances --------------------------------------------------------------


def pair_distances(a, b) -> np.ndarray:
    """Dense ``|a| x |b|`` Euclidean distance matrix."""
    return cdist(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))


class SpatialIndex:
    """KD-tree over a point set whose answers match a brute-force scan exactly.

    The tree proposes candidates; the final distance is recomputed with
    :func:`pair_distances` so results are bit-identical to the dense path.
    """

    def __init__(self, cloud):
        self.points = _as_points(cloud)
        _require_nonempty(self.points, "indexed")
        self._tree = cKDTree(self.points)

    def __len__(self):
        return len(self.points)

    def _refine(self, q: np.ndarray, radius: float) -> tuple[float, int]:
        cand = np.sort(np.asarray(self._tree.query_ball_point(q, radius), dtype=np.int64))
        d = pair_distances(q[None, :], self.points[cand])[0]
        k = int(np.argmin(d))
        return float(d[k]), int(cand[k])

    def query(self, queries) -> tuple[np.ndarray, np.ndarray]:
        """Nearest indexed point for each query; ties go to the lowest index."""
        q = check_points(queries, name="queries")
        d_kd, _ = self._tree.query(q, k=1)
        dist = np.empty(len(q))
        idx = np.empty(len(q), dtype=np.int64)
        for i in range(len(q)):
            dist[i], idx[i] = self._refine(q[i], d_kd[i] * (1 + 1e-9) + 1e-300)
        return dist, idx

    def min_distance(self, queries) -> float:
        """Smallest distance from any query point to the indexed set."""
        q = check_points(queries, name="queries")
        d_kd, _ = self._tree.query(q, k=1)
        bound = d_kd.min() * (1 + 1e-9) + 1e-300
        best = np.inf
        for i in np.flatnonzero(d_kd <= bound):
            best = min(best, self._refine(q[i], bound)[0])
        return best


def min_pair_distance(a, b) -> float:
    """Minimum cross-pair distance between two non-empty clouds."""
    pa, pb = _as_points(a), _as_points(b)
    _require_nonempty(pa, "first")
    _require_nonempty(pb, "second")
    if len(pa) > len(pb):
        pa, pb = pb, pa
    return SpatialIndex(pb).min_distance(pa)


def _canonical_order(pa: np.ndarray, pb: np.ndarray):
    # fixed argument order keeps the summation order, hence the bits, symmetric
    if len(pa) > len(pb) or (len(pa) == len(pb) and pa.tobytes() > pb.tobytes()):
        return pb, pa
    return pa, pb


def pair_distance_stats(a, b) -> tuple[float, float]:
    """``(mean, min)`` over all cross pairs, from one dense sweep."""
    pa, pb = _canonical_order(_as_points(a), _as_points(b))
    _require_nonempty(pa, "first")
    _require_nonempty(pb, "second")
    total = 0.0
    lo = np.inf
    for start in range(0, len(pa), _MEAN_BLOCK):
        block = pair_distances(pa[start : start + _MEAN_BLOCK], pb)
        total += float(block.sum())
        lo = min(lo, float(block.min()))
    # rounding can push the mean of near-equal distances an ulp under the minimum
    return max(total / (len(pa) * len(pb)), lo), lo


def mean_pair_distance(a, b) -> float:
    """Average of ``||x - y||`` over every ``x in a``, ``y in b``."""
    return pair_distance_stats(a, b)[0]


def estimate_normals(cloud, k: int = 16) -> np.ndarray:
    """Per-point unit normals from local PCA, oriented away from the centroid."""
    pts = _as_points(cloud)
    k = int(k)
    if k < 3:
        raise ValidationError("k must be at least 3")
    if k > len(pts):
        raise ValidationError(f"k={k} exceeds cloud size {len(pts)}")
    _, idx = cKDTree(pts).query(pts, k=k)
    nb = pts[idx]
    centered = nb - nb.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered)
    _, vecs = np.linalg.eigh(cov)
    normals = vecs[:, :, 0]
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    outward = np.einsum("ij,ij->i", normals, pts - pts.mean(axis=0))
    # on-plane ties: make the largest-magnitude component positive
    lead = normals[np.arange(len(normals)), np.argmax(np.abs(normals), axis=1)]
    flip = (outward < 0) | ((outward == 0) & (lead < 0))
    normals[flip] *= -1
    return normals


# -- primitive shapes -------------------------------------------------------


def sample_box_surface(center, extents, spacing: float) -> np.ndarray:
    """Lattice points on the surface of an axis-aligned box.

    Every edge is split into ``ceil(extent / spacing)`` equal steps, so the
    realised spacing never exceeds ``spacing``.
    """
    center = np.asarray(center, dtype=np.float64)
    half = 0.5 * np.asarray(extents, dtype=np.float64)
    counts = [int(np.ceil(2 * h / spacing - 1e-9)) + 1 for h in half]
    axes = [np.linspace(-h, h, n) for h, n in zip(half, counts)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    ix, iy, iz = np.meshgrid(*(np.arange(n) for n in counts), indexing="ij")
    on_surface = (
        (ix == 0) | (ix == counts[0] - 1) | (iy == 0) | (iy == counts[1] - 1) | (iz == 0) | (iz == counts[2] - 1)
    )
    pts = np.stack([gx[on_surface], gy[on_surface], gz[on_surface]], axis=1)
    return pts + center


def sample_mesh_surface(mesh: TriangleMesh, spacing: float, seed: int = 0) -> np.ndarray:
    """Seeded area-weighted random samples, about one per ``spacing**2`` of area."""
    areas = mesh.face_areas()
    n = max(1, int(np.ceil(areas.sum() / (spacing * spacing))))
    rng = np.random.default_rng(seed)
    tri = rng.choice(len(areas), size=n, p=areas / areas.sum())
    u, v = rng.random(n), rng.random(n)
    flip = u + v > 1
    u[flip], v[flip] = 1 - u[flip], 1 - v[flip]
    a, b, c = (mesh.vertices[mesh.faces[tri, k]] for k in range(3))
    return a + u[:, None] * (b - a) + v[:, None] * (c - a)


_BOX_FACES = np.array(
    [
        [0, 2, 1], [0, 3, 2],  # -z
        [4, 5, 6], [4, 6, 7],  # +z
        [0, 1, 5], [0, 5, 4],  # -y
        [3, 7, 6], [3, 6, 2],  # +y
        [0, 4, 7], [0, 7, 3],  # -x
        [1, 2, 6], [1, 6, 5],  # +x
    ]
)


def box_mesh(center, extents) -> TriangleMesh:
    """Closed box mesh, 12 triangles wound counter-clockwise seen from outside.

    Faces 2 and 3 form the ``+z`` side.
    """
    c = np.asarray(center, dtype=np.float64)
    hx, hy, hz = 0.5 * np.asarray(extents, dtype=np.float64)
    corners = np.array(
        [
            [-hx, -hy, -hz], [hx, -hy, -hz], [hx, hy, -hz], [-hx, hy, -hz],
            [-hx, -hy, hz], [hx, -hy, hz], [hx, hy, hz], [-hx, hy, hz],
        ]
    )
    return TriangleMesh(corners + c, _BOX_FACES)
