"""Co-grasp compatibility scoring, median thresholds, labels and pruning.

For a robot gripper cloud ``g`` and a hand cloud ``h``:

* distance score ``s_d``: mean of all cross-pair distances,
* angle score ``s_a = -(a_g . a_h)``: +1 when the two approaches oppose,
* nearest score ``s_n``: 0 when the convex hulls overlap, otherwise the
  smallest cross-pair distance.

A pair is compatible (label 1) when ``s_d`` and ``s_a`` are both strictly
above the per-object medians.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .embodiment import GraspPose, HandGrasp
from .geometry import (
    ConvexHull,
    PointCloud,
    build_hull,
    hulls_intersect,
    mean_pair_distance,
    min_pair_distance,
    pair_distance_stats,
)
from .validation import CoGraspError, ValidationError, check_unit_vector

MEDIAN_MODES = ("mean", "lower")


@dataclass(frozen=True)
class ScoreRecord:
    robot_index: int
    hand_index: int
    s_d: float
    s_a: float
    s_n: float
    hulls_overlap: bool
    label: Optional[int] = None


@dataclass(frozen=True)
class ObjectThresholds:
    lambda_d: float
    lambda_a: float

    def to_dict(self) -> dict:
        return {"lambda_d": self.lambda_d, "lambda_a": self.lambda_a}


@dataclass
class PruneResult:
    """Accepted robot grasps (best first) and the rest.

    ``accepted`` holds ``(robot_index, rank_score)`` pairs; ``fractions[i]`` is
    the share of hand grasps that grasp ``i`` is compatible with.
    """

    accepted: list[tuple[int, float]]
    rejected: list[int]
    fractions: list[float]
    thresholds: Optional[ObjectThresholds] = None
    provenance: dict = field(default_factory=dict)

    @property
    def accepted_indices(self) -> list[int]:
        return [i for i, _ in self.accepted]

    def to_dict(self) -> dict:
        return {
            "accepted": [{"index": i, "score": s} for i, s in self.accepted],
            "rejected": list(self.rejected),
            "fractions": list(self.fractions),
            "thresholds": None if self.thresholds is None else self.thresholds.to_dict(),
            "provenance": dict(self.provenance),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PruneResult":
        th = d.get("thresholds")
        return cls(
            [(int(a["index"]), float(a["score"])) for a in d["accepted"]],
            [int(i) for i in d["rejected"]],
            [float(f) for f in d["fractions"]],
            None if th is None else ObjectThresholds(float(th["lambda_d"]), float(th["lambda_a"])),
            dict(d.get("provenance", {})),
        )


def score_s_d(gripper_cloud, hand_cloud) -> float:
    return mean_pair_distance(gripper_cloud, hand_cloud)


def score_s_a(a_g, a_h) -> float:
    a_g = check_unit_vector(a_g, name="a_g")
    a_h = check_unit_vector(a_h, name="a_h")
    return -float(a_g @ a_h)


def score_s_n(gripper_cloud, hand_cloud) -> tuple[float, bool]:
    """``(s_n, hulls_overlap)``; thin clouds get padded hulls."""
    if hulls_intersect(build_hull(gripper_cloud, pad=True), build_hull(hand_cloud, pad=True)):
        return 0.0, True
    return min_pair_distance(gripper_cloud, hand_cloud), False


def median(values, mode: str = "mean") -> float:
    """Median with a selectable even-length rule.

    ``"mean"`` averages the two central order statistics, ``"lower"`` takes
    the smaller one.
    """
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        raise ValidationError("median of an empty list")
    if mode not in MEDIAN_MODES:
        raise ValidationError(f"median mode must be one of {MEDIAN_MODES}")
    k = v.size // 2
    if v.size % 2:
        return float(v[k])
    if mode == "lower":
        return float(v[k - 1])
    return float(0.5 * (v[k - 1] + v[k]))


def compute_thresholds(records: Sequence[ScoreRecord], median_mode: str = "mean") -> ObjectThresholds:
    if len(records) == 0:
        raise ValidationError("cannot compute thresholds from an empty record list")
    return ObjectThresholds(
        median([r.s_d for r in records], median_mode),
        median([r.s_a for r in records], median_mode),
    )


def label_pair(record: ScoreRecord, th: ObjectThresholds) -> int:
    return int(record.s_d > th.lambda_d and record.s_a > th.lambda_a)


def label_records(records: Iterable[ScoreRecord], th: ObjectThresholds) -> list[ScoreRecord]:
    return [replace(r, label=label_pair(r, th)) for r in records]


@dataclass(frozen=True, eq=False)
class _Scorable:
    cloud: np.ndarray
    hull: ConvexHull
    approach: np.ndarray


def _prepare(cloud: PointCloud, approach) -> _Scorable:
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    if len(pts) == 0:
        raise ValidationError("cannot score an empty cloud")
    return _Scorable(pts, build_hull(pts, pad=True), check_unit_vector(approach, name="approach"))


def _score_pair(g: _Scorable, h: _Scorable, i: int, j: int) -> ScoreRecord:
    s_d, nearest = pair_distance_stats(g.cloud, h.cloud)
    overlap = hulls_intersect(g.hull, h.hull)
    return ScoreRecord(i, j, s_d, -float(g.approach @ h.approach), 0.0 if overlap else nearest, overlap)


def score_all_pairs(
    robot: Sequence[tuple[GraspPose, PointCloud]],
    hand: Sequence[HandGrasp],
    threads: int = 1,
) -> list[ScoreRecord]:
    """Score every (robot grasp, hand grasp) pair, robot-major.

    ``robot`` pairs each grasp with its rendered gripper cloud. Hulls are built
    once per cloud. ``threads`` > 1 spreads pairs over a thread pool (0 picks
    the CPU count); the returned order never depends on it.
    """
    if len(robot) == 0 or len(hand) == 0:
        raise ValidationError("need at least one robot grasp and one hand grasp")
    grippers = [_prepare(cloud, grasp.approach) for grasp, cloud in robot]
    hands = [_prepare(h.cloud, h.approach) for h in hand]
    n = len(hands)

    def work(k: int) -> ScoreRecord:
        i, j = divmod(k, n)
        try:
            return _score_pair(grippers[i], hands[j], i, j)
        except CoGraspError as exc:
            raise CoGraspError(f"pair (robot {i}, hand {j}): {exc}") from exc

    total = len(grippers) * n
    if threads == 1:
        return [work(k) for k in range(total)]
    with ThreadPoolExecutor(max_workers=None if threads <= 0 else threads) as pool:
        return list(pool.map(work, range(total), chunksize=max(1, total // 64)))


def _check_coverage(records: Sequence[ScoreRecord], m: int, n: int) -> None:
    seen = {(r.robot_index, r.hand_index) for r in records}
    if len(records) != m * n or len(seen) != m * n or any(
        not (0 <= i < m and 0 <= j < n) for i, j in seen
    ):
        raise ValidationError(f"records do not cover all {m}x{n} pairs exactly once")


def prune(
    records: Sequence[ScoreRecord],
    m: int,
    n: int,
    min_fraction: Optional[float] = None,
) -> PruneResult:
    """Select robot grasps compatible with the hand grasps.

    A grasp's compatibility fraction is the share of its ``n`` pairings labeled
    1. It is accepted when the fraction is ``>= min_fraction`` (default: any
    positive pairing). Accepted grasps are ranked by fraction, then by the mean
    of ``(s_a + 1) / 2`` over their positive pairs, then by index.
    """
    _check_coverage(records, m, n)
    if any(r.label is None for r in records):
        raise ValidationError("every record must be labeled before pruning")
    positives = np.zeros(m)
    sa_sum = np.zeros(m)
    for r in records:
        if r.label == 1:
            positives[r.robot_index] += 1
            sa_sum[r.robot_index] += 0.5 * (r.s_a + 1.0)
    fractions = positives / n
    tiebreak = np.divide(sa_sum, positives, out=np.zeros(m), where=positives > 0)
    if min_fraction is None:
        keep = fractions > 0
    else:
        keep = fractions >= min_fraction
    order = sorted(np.flatnonzero(keep), key=lambda i: (-fractions[i], -tiebreak[i], i))
    return PruneResult(
        accepted=[(int(i), float(fractions[i])) for i in order],
        rejected=[int(i) for i in np.flatnonzero(~keep)],
        fractions=[float(f) for f in fractions],
    )


def count_positive(s_d: np.ndarray, s_a: np.ndarray, lambda_d: float, lambda_a: float) -> int:
    return int(np.count_nonzero((s_d > lambda_d) & (s_a > lambda_a)))


def sweep_thresholds(
    records: Sequence[ScoreRecord],
    axis: str,
    grid: Sequence[float],
    median_mode: str = "mean",
) -> list[tuple[float, int]]:
    """Positive-pair counts while one threshold varies and the other sits at its median."""
    if len(records) == 0:
        raise ValidationError("cannot sweep an empty record list")
    if len(grid) == 0:
        raise ValidationError("sweep grid is empty")
    th = compute_thresholds(records, median_mode)
    s_d = np.array([r.s_d for r in records])
    s_a = np.array([r.s_a for r in records])
    if axis == "distance":
        return [(float(t), count_positive(s_d, s_a, t, th.lambda_a)) for t in grid]
    if axis == "angle":
        return [(float(t), count_positive(s_d, s_a, th.lambda_d, t)) for t in grid]
    raise ValidationError(f"axis must be 'distance' or 'angle', got {axis!r}")


def threshold_grid(values: Sequence[float], steps: int, eps: float = 1e-9) -> list[float]:
    """Evenly spaced grid from just below the minimum to just above the maximum."""
    if steps < 2:
        raise ValidationError("grid needs at least 2 steps")
    v = np.asarray(values, dtype=np.float64)
    return [float(x) for x in np.linspace(v.min() - eps, v.max() + eps, steps)]
