"""Independent reference computations used to check the fast paths."""

import math

import numpy as np
from scipy.optimize import linprog


def point_distance(x, y):
    dx, dy, dz = x[0] - y[0], x[1] - y[1], x[2] - y[2]
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def brute_min_distance(a, b):
    a, b = np.asarray(a).tolist(), np.asarray(b).tolist()
    return min(point_distance(x, y) for x in a for y in b)


def brute_mean_distance(a, b):
    """Correctly rounded sum of all cross distances, divided by the pair count."""
    a, b = np.asarray(a).tolist(), np.asarray(b).tolist()
    return math.fsum(point_distance(x, y) for x in a for y in b) / (len(a) * len(b))


def brute_nearest(queries, points):
    """Nearest index per query (first minimum wins) and its distance."""
    q = np.asarray(queries)[:, None, :]
    d = q - np.asarray(points)[None, :, :]
    dist = np.sqrt(d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1] + d[..., 2] * d[..., 2])
    idx = np.argmin(dist, axis=1)
    return dist[np.arange(len(idx)), idx], idx


def hull_overlap_margin(hull_a, hull_b):
    """Largest ``delta`` such that some point lies ``delta`` inside every facet
    of both hulls. Positive: interiors overlap, zero: touching, negative:
    disjoint.
    """
    N = np.vstack([hull_a.normals, hull_b.normals])
    c = np.concatenate([hull_a.offsets, hull_b.offsets])
    # variables (x, y, z, delta); maximise delta s.t. N x + delta <= -c
    A_ub = np.hstack([N, np.ones((len(N), 1))])
    res = linprog(
        np.array([0.0, 0.0, 0.0, -1.0]),
        A_ub=A_ub,
        b_ub=-c,
        bounds=[(None, None)] * 3 + [(None, 10.0)],
        method="highs",
    )
    assert res.status == 0, res.message
    return -res.fun


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )
