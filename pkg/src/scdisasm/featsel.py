"""Feature selection over fused (or single-channel) trace indices.

Four selectors are provided. The greedy max-relevance/min-redundancy
selector scores a candidate feature i against the selected set S as

    M_i = G(i) - (1 / |S|) * sum_{j in S} R(i, j)

with G the histogram MI against the class labels and R the histogram MI
between two features; the first pick is the relevance argmax. The
"Filter" selector ranks by relevance alone, so it happily keeps
duplicated features that the greedy selector rejects. The Gini selector
scores each feature by its best single-threshold impurity reduction over
decile thresholds. PCA is the projection baseline and is the only
selector that mixes indices instead of picking them.

All selectors are deterministic and resolve ties toward the lowest
feature index.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyInput,
    InsufficientFeatures,
    RangeViolation,
    RankDeficientWarning,
)
from .infomath import DEFAULT_BINS, _bin_indices, _mi_from_joint


@dataclass(frozen=True)
class FeatureSet:
    """Selected feature indices in pick order with their scores."""

    indices: np.ndarray  # (k,) int64
    scores: np.ndarray   # (k,) float64, selector-specific
    method: str

    def __post_init__(self):
        idx = np.ascontiguousarray(self.indices, dtype=np.int64)
        sc = np.ascontiguousarray(self.scores, dtype=np.float64)
        if idx.ndim != 1 or idx.shape != sc.shape:
            raise DimensionMismatch("indices and scores must align")
        if idx.size == 0:
            raise EmptyInput("no features selected")
        if idx.size != np.unique(idx).size:
            raise ValueError("duplicate feature index")
        if idx.min() < 0:
            raise ValueError("negative feature index")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "scores", sc)

    @property
    def size(self) -> int:
        return int(self.indices.shape[0])

    def head(self, k: int) -> "FeatureSet":
        """Prefix of the pick order; greedy selectors are prefix-stable."""
        if k > self.size:
            raise InsufficientFeatures(f"only {self.size} features selected")
        return FeatureSet(self.indices[:k], self.scores[:k], self.method)


def _check_matrix(x: np.ndarray, labels=None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch("feature matrix must be (n, w)")
    if x.shape[0] == 0 or x.shape[1] == 0:
        raise EmptyInput("empty feature matrix")
    if labels is not None and np.asarray(labels).shape != (x.shape[0],):
        raise DimensionMismatch("labels must align with rows")
    return x


def _check_budget(w_star: int, available: int) -> None:
    if w_star < 1:
        raise InsufficientFeatures("must select at least one feature")
    if w_star > available:
        raise InsufficientFeatures(
            f"requested {w_star} features, only {available} available")


def _relevance_all(binned: np.ndarray, label_idx: np.ndarray,
                   n_labels: int, bins: int) -> np.ndarray:
    """Histogram MI of every binned column against the labels."""
    w = binned.shape[1]
    rel = np.empty(w)
    for k in range(w):
        joint = np.bincount(binned[:, k] * n_labels + label_idx,
                            minlength=bins * n_labels)
        rel[k] = _mi_from_joint(joint.reshape(bins, n_labels).astype(float))
    return rel


def _bin_matrix(x: np.ndarray, bins: int) -> np.ndarray:
    lo, hi = float(x.min()), float(x.max())
    if lo < -1e-9 or hi > 1.0 + 1e-9:
        raise RangeViolation("features must be normalized into [0, 1]")
    return _bin_indices(x, bins)


def _encode_labels(labels) -> tuple[np.ndarray, int]:
    _, idx = np.unique(np.asarray(labels), return_inverse=True)
    return idx.astype(np.int64), int(idx.max()) + 1


def mrmr_select(x, labels, w_star: int, bins: int = DEFAULT_BINS) -> FeatureSet:
    """Greedy max-relevance/min-redundancy selection.

    Redundancy sums are cached incrementally, so each step costs one MI
    evaluation per remaining candidate against the newest selection.
    Recorded scores are the criterion values at pick time (pure
    relevance for the first pick).
    """
    x = _check_matrix(x, labels)
    _check_budget(w_star, x.shape[1])
    binned = _bin_matrix(x, bins)
    label_idx, n_labels = _encode_labels(labels)
    rel = _relevance_all(binned, label_idx, n_labels, bins)

    w = x.shape[1]
    chosen = [int(np.argmax(rel))]        # argmax takes the lowest index on ties
    scores = [float(rel[chosen[0]])]
    red_sum = np.zeros(w)
    in_set = np.zeros(w, dtype=bool)
    in_set[chosen[0]] = True

    while len(chosen) < w_star:
        last = binned[:, chosen[-1]] * bins
        for c in np.flatnonzero(~in_set):
            joint = np.bincount(last + binned[:, c], minlength=bins * bins)
            red_sum[c] += _mi_from_joint(joint.reshape(bins, bins).astype(float))
        crit = rel - red_sum / len(chosen)
        crit[in_set] = -np.inf
        pick = int(np.argmax(crit))
        chosen.append(pick)
        scores.append(float(crit[pick]))
        in_set[pick] = True
    return FeatureSet(np.array(chosen), np.array(scores), "mrmr")


def filter_select(x, labels, w_star: int, bins: int = DEFAULT_BINS) -> FeatureSet:
    """Pure relevance ranking; duplicates of a strong feature survive."""
    x = _check_matrix(x, labels)
    _check_budget(w_star, x.shape[1])
    binned = _bin_matrix(x, bins)
    label_idx, n_labels = _encode_labels(labels)
    rel = _relevance_all(binned, label_idx, n_labels, bins)
    order = np.lexsort((np.arange(x.shape[1]), -rel))[:w_star]
    return FeatureSet(order, rel[order], "filter")


def _gini_gain_column(values: np.ndarray, label_idx: np.ndarray,
                      n_labels: int) -> float:
    """Best impurity reduction of a single threshold split, thresholds at
    the feature's deciles; degenerate splits score zero."""
    thr = np.quantile(values, np.arange(1, 10) / 10.0)
    # bucket b satisfies: values <= thr[j] exactly when b <= j
    bucket = np.searchsorted(thr, values, side="left")
    joint = np.bincount(bucket * n_labels + label_idx,
                        minlength=10 * n_labels).reshape(10, n_labels)
    cum = np.cumsum(joint, axis=0)
    total = cum[-1].astype(np.float64)
    n = total.sum()
    parent = 1.0 - float(((total / n) ** 2).sum())
    best = 0.0
    for j in range(9):
        left = cum[j].astype(np.float64)
        n_left = left.sum()
        if n_left == 0 or n_left == n:
            continue
        right = total - left
        g_left = 1.0 - float(((left / n_left) ** 2).sum())
        g_right = 1.0 - float(((right / (n - n_left)) ** 2).sum())
        gain = parent - (n_left / n) * g_left - ((n - n_left) / n) * g_right
        best = max(best, gain)
    return best


def gini_select(x, labels, w_star: int) -> FeatureSet:
    """Rank features by best decile-threshold Gini impurity reduction."""
    x = _check_matrix(x, labels)
    _check_budget(w_star, x.shape[1])
    label_idx, n_labels = _encode_labels(labels)
    gains = np.array([_gini_gain_column(x[:, k], label_idx, n_labels)
                      for k in range(x.shape[1])])
    order = np.lexsort((np.arange(x.shape[1]), -gains))[:w_star]
    return FeatureSet(order, gains[order], "gini")


@dataclass(frozen=True)
class PcaProjection:
    """Centered orthonormal projection onto leading components."""

    mean: np.ndarray                # (d,)
    components: np.ndarray          # (k, d) rows orthonormal
    explained_variance: np.ndarray  # (k,)

    @property
    def k(self) -> int:
        return int(self.components.shape[0])


def pca_fit(x, k: int) -> PcaProjection:
    """Fit the top-k principal components of (n, d) data.

    If the data has fewer than k nonzero-variance directions, a
    RankDeficientWarning is issued and the available components are
    returned. Component signs are fixed so the largest-magnitude entry
    of each component is positive, keeping fits reproducible.
    """
    x = _check_matrix(x)
    _check_budget(k, x.shape[1])
    mean = x.mean(axis=0)
    centered = x - mean
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    tol = s[0] * max(x.shape) * np.finfo(np.float64).eps if s.size else 0.0
    rank = int(np.sum(s > tol))
    if rank < k:
        warnings.warn(
            f"requested {k} components, data rank is {rank}",
            RankDeficientWarning, stacklevel=2)
        k = max(rank, 1)
    comp = vt[:k].copy()
    flip = np.sign(comp[np.arange(k), np.argmax(np.abs(comp), axis=1)])
    flip[flip == 0] = 1.0
    comp *= flip[:, None]
    var = (s[:k] ** 2) / x.shape[0]
    return PcaProjection(mean, comp, var)


def pca_project(x, projection: PcaProjection) -> np.ndarray:
    """Project (d,) or (n, d) data onto the fitted components."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != projection.mean.shape[0]:
        raise DimensionMismatch(
            f"dimension {x.shape[-1]} != fitted {projection.mean.shape[0]}")
    return (x - projection.mean) @ projection.components.T
