"""Entropy and mutual-information kernels.

Two estimator families are used side by side. The Gaussian route models
each class-conditional distribution of a feature as Gaussian, giving

    h(X) = 0.5 * log2(2 * pi * e * sigma^2)

and, for a label variable C with per-class spreads sigma_ci and priors
p_ci, the approximation

    I(X; C) = 0.5 * (log2(2 pi e sigma^2)
                     - sum_i p_ci * log2(2 pi e sigma_ci^2)).

The histogram route is a plug-in estimate on 32 equal-width bins over
[0, 1] and makes no distributional assumption; the two are required to
agree closely on simulator data, which is Gaussian by construction.

All spreads are population standard deviations (divide by N), which
keeps the class-mixture identity for the overall variance exact.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSigma,
    DimensionMismatch,
    EmptyInput,
    RangeViolation,
)

_TWO_PI_E = 2.0 * np.pi * np.e
SIGMA_FLOOR = 1e-12
DEFAULT_BINS = 32


@dataclass(frozen=True)
class ClassStats:
    """Scalar-feature statistics split by class.

    Carries the overall population spread, the per-class spreads and
    means, and the class priors. The overall variance always satisfies
    the mixture identity
    sigma^2 = sum_i p_i (sigma_i^2 + mu_i^2) - (sum_i p_i mu_i)^2.
    """

    sigma: float
    class_sigmas: np.ndarray
    class_means: np.ndarray
    priors: np.ndarray

    def __post_init__(self):
        cs = np.ascontiguousarray(self.class_sigmas, dtype=np.float64)
        cm = np.ascontiguousarray(self.class_means, dtype=np.float64)
        pr = np.ascontiguousarray(self.priors, dtype=np.float64)
        if cs.ndim != 1 or cs.shape != cm.shape or cs.shape != pr.shape:
            raise DimensionMismatch("per-class arrays must be equal-length 1-D")
        if cs.shape[0] < 2:
            raise ValueError("need at least two classes")
        if np.any(cs < 0) or self.sigma < 0:
            raise ValueError("spreads must be nonnegative")
        if abs(float(pr.sum()) - 1.0) > 1e-9 or np.any(pr < 0):
            raise ValueError("priors must be nonnegative and sum to 1")
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "class_sigmas", cs)
        object.__setattr__(self, "class_means", cm)
        object.__setattr__(self, "priors", pr)

    @property
    def n_classes(self) -> int:
        return int(self.class_sigmas.shape[0])

    @property
    def mean(self) -> float:
        return float(self.priors @ self.class_means)

    @classmethod
    def from_components(cls, means, sigmas, priors=None) -> "ClassStats":
        """Build stats from per-class means/spreads, deriving the overall
        spread through the mixture identity."""
        means = np.asarray(means, dtype=np.float64)
        sigmas = np.asarray(sigmas, dtype=np.float64)
        if priors is None:
            priors = np.full(means.shape[0], 1.0 / means.shape[0])
        priors = np.asarray(priors, dtype=np.float64)
        mu = float(priors @ means)
        var = float(priors @ (sigmas ** 2 + means ** 2) - mu ** 2)
        return cls(np.sqrt(max(var, 0.0)), sigmas, means, priors)

    @classmethod
    def from_samples(cls, values, labels) -> "ClassStats":
        """Empirical per-class stats of one feature (population spreads)."""
        values = np.asarray(values, dtype=np.float64)
        labels = np.asarray(labels)
        if values.size == 0:
            raise EmptyInput("no samples")
        if values.shape != labels.shape:
            raise DimensionMismatch("values and labels must align")
        classes = np.unique(labels)
        means = np.empty(classes.shape[0])
        sigmas = np.empty(classes.shape[0])
        priors = np.empty(classes.shape[0])
        for i, c in enumerate(classes):
            sel = values[labels == c]
            means[i] = sel.mean()
            sigmas[i] = sel.std()
            priors[i] = sel.size / values.size
        return cls.from_components(means, sigmas, priors)


def gaussian_entropy(sigma: float) -> float:
    """Differential entropy in bits of a Gaussian with spread sigma."""
    if sigma < SIGMA_FLOOR:
        raise DegenerateSigma(f"sigma {sigma!r} below {SIGMA_FLOOR}")
    return 0.5 * np.log2(_TWO_PI_E * sigma * sigma)


def mi_gaussian(stats: ClassStats) -> float:
    """Gaussian-approximation mutual information in bits, clamped at 0.

    Overall entropy uses the mixture spread; conditional entropy is the
    prior-weighted average of per-class Gaussian entropies.
    """
    if stats.sigma < SIGMA_FLOOR:
        raise DegenerateSigma("overall sigma below floor")
    if np.any(stats.class_sigmas < SIGMA_FLOOR):
        raise DegenerateSigma("a class sigma is below floor")
    h_all = gaussian_entropy(stats.sigma)
    h_cond = float(stats.priors @ (0.5 * np.log2(
        _TWO_PI_E * stats.class_sigmas ** 2)))
    return max(h_all - h_cond, 0.0)


def _bin_indices(values: np.ndarray, bins: int) -> np.ndarray:
    """Equal-width bins over [0, 1]; the right edge folds into the last bin."""
    idx = np.floor(values * bins).astype(np.int64)
    np.clip(idx, 0, bins - 1, out=idx)
    return idx


def _check_unit_range(values: np.ndarray) -> None:
    if values.size == 0:
        raise EmptyInput("no samples")
    lo, hi = float(values.min()), float(values.max())
    if lo < -1e-9 or hi > 1.0 + 1e-9:
        raise RangeViolation(f"values span [{lo}, {hi}], expected [0, 1]")


def _mi_from_joint(joint: np.ndarray) -> float:
    """Plug-in MI in bits from a joint count table, clamped at 0."""
    n = joint.sum()
    p = joint / n
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    nz = p > 0
    mi = float(np.sum(p[nz] * np.log2(p[nz] / (px @ py)[nz])))
    return max(mi, 0.0)


def mi_histogram(values, labels, bins: int = DEFAULT_BINS) -> float:
    """Histogram plug-in MI in bits between a [0, 1] feature and labels."""
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels)
    if values.shape != labels.shape or values.ndim != 1:
        raise DimensionMismatch("values and labels must be aligned 1-D")
    _check_unit_range(values)
    _, label_idx = np.unique(labels, return_inverse=True)
    n_labels = int(label_idx.max()) + 1
    if n_labels == 1:
        return 0.0
    vi = _bin_indices(values, bins)
    joint = np.bincount(vi * n_labels + label_idx,
                        minlength=bins * n_labels).reshape(bins, n_labels)
    return _mi_from_joint(joint.astype(np.float64))


def relevance(feature, labels, bins: int = DEFAULT_BINS) -> float:
    """Feature-to-class relevance: histogram MI against the labels."""
    return mi_histogram(feature, labels, bins)


def redundancy(feature_a, feature_b, bins: int = DEFAULT_BINS) -> float:
    """Feature-to-feature redundancy: MI between two binned features."""
    a = np.asarray(feature_a, dtype=np.float64)
    b = np.asarray(feature_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatch("features must be aligned 1-D")
    _check_unit_range(a)
    _check_unit_range(b)
    ai = _bin_indices(a, bins)
    bi = _bin_indices(b, bins)
    joint = np.bincount(ai * bins + bi,
                        minlength=bins * bins).reshape(bins, bins)
    return _mi_from_joint(joint.astype(np.float64))


def binned_entropy(values, bins: int = DEFAULT_BINS) -> float:
    """Shannon entropy in bits of the binned feature (self-MI ceiling)."""
    values = np.asarray(values, dtype=np.float64)
    _check_unit_range(values)
    counts = np.bincount(_bin_indices(values, bins), minlength=bins)
    p = counts[counts > 0] / values.size
    return float(-(p * np.log2(p)).sum())
