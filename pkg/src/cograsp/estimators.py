"""scikit-learn style wrappers around the threshold labeling and pruning steps.

Both estimators take a score matrix ``X`` of shape ``(n_pairs, 2)`` whose
columns are ``[s_d, s_a]``; rows must be robot-major (hand index varies
fastest) for :class:`CoGraspPruner`.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .scoring import MEDIAN_MODES, ObjectThresholds, PruneResult, ScoreRecord, median, prune
from .validation import ValidationError


def records_to_matrix(records) -> np.ndarray:
    """``[s_d, s_a]`` rows in the order given."""
    return np.array([[r.s_d, r.s_a] for r in records], dtype=np.float64).reshape(-1, 2)


def _check_scores(X) -> np.ndarray:
    X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_all_finite=True)
    if X.shape[1] != 2:
        raise ValidationError(f"expected score columns [s_d, s_a], got {X.shape[1]} columns")
    return X


class MedianThresholdLabeler(ClassifierMixin, BaseEstimator):
    """Learns per-object median thresholds and labels pairs against them.

    Parameters
    ----------
    median_mode : {"mean", "lower"}, default="mean"
        Even-length median rule.

    Attributes
    ----------
    lambda_d_ : float
    lambda_a_ : float
    classes_ : ndarray of shape (2,)
    """

    def __init__(self, median_mode="mean"):
        self.median_mode = median_mode

    def fit(self, X, y=None):
        X = _check_scores(X)
        if self.median_mode not in MEDIAN_MODES:
            raise ValidationError(f"median_mode must be one of {MEDIAN_MODES}")
        self.lambda_d_ = median(X[:, 0], self.median_mode)
        self.lambda_a_ = median(X[:, 1], self.median_mode)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = 2
        return self

    @property
    def thresholds_(self) -> ObjectThresholds:
        check_is_fitted(self, ["lambda_d_", "lambda_a_"])
        return ObjectThresholds(self.lambda_d_, self.lambda_a_)

    def predict(self, X):
        check_is_fitted(self, ["lambda_d_", "lambda_a_"])
        X = _check_scores(X)
        return ((X[:, 0] > self.lambda_d_) & (X[:, 1] > self.lambda_a_)).astype(np.int64)


class CoGraspPruner(BaseEstimator):
    """Median labeling followed by per-grasp pruning.

    Parameters
    ----------
    n_hands : int
        Hand grasps per robot grasp (rows per block in ``X``).
    min_fraction : float or None, default=None
        Acceptance cut on the compatibility fraction; ``None`` accepts any
        grasp with at least one compatible hand.
    median_mode : {"mean", "lower"}, default="mean"
    """

    def __init__(self, n_hands=4, min_fraction=None, median_mode="mean"):
        self.n_hands = n_hands
        self.min_fraction = min_fraction
        self.median_mode = median_mode

    def fit(self, X, y=None):
        X = _check_scores(X)
        self.labeler_ = MedianThresholdLabeler(self.median_mode).fit(X)
        self.n_features_in_ = 2
        return self

    def _records(self, X) -> tuple[list[ScoreRecord], int]:
        check_is_fitted(self, "labeler_")
        X = _check_scores(X)
        if self.n_hands < 1 or X.shape[0] % self.n_hands:
            raise ValidationError(f"{X.shape[0]} rows is not a multiple of n_hands={self.n_hands}")
        labels = self.labeler_.predict(X)
        recs = [
            ScoreRecord(k // self.n_hands, k % self.n_hands, float(s_d), float(s_a), 0.0, False, int(c))
            for k, ((s_d, s_a), c) in enumerate(zip(X, labels))
        ]
        return recs, X.shape[0] // self.n_hands

    def prune(self, X) -> PruneResult:
        recs, m = self._records(X)
        result = prune(recs, m, self.n_hands, self.min_fraction)
        result.thresholds = self.labeler_.thresholds_
        return result

    def decision_function(self, X) -> np.ndarray:
        """Compatibility fraction per robot grasp."""
        return np.asarray(self.prune(X).fractions)

    def predict(self, X) -> np.ndarray:
        """1 for accepted robot grasps, 0 otherwise."""
        result = self.prune(X)
        out = np.zeros(len(result.fractions), dtype=np.int64)
        out[result.accepted_indices] = 1
        return out
