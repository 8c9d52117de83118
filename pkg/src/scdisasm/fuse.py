"""Information-optimal fusion of the power and EM channels.

The fused observable at one sample index is the convex blend

    Z = alpha * P + (1 - alpha) * E

of the two normalized channels. Assuming the channels are independent
within a class, the fused per-class variance is

    sigma_Zc^2 = alpha^2 sigma_Pc^2 + (1 - alpha)^2 sigma_Ec^2,

while the overall fused variance follows from the class mixture of the
fused means (which keeps the cross-channel correlation induced by the
class variable). The blend weight is chosen per index by driving the
stationarity function

    v(alpha) = sum_c (sigma_P^2 sigma_Ec^2 - sigma_E^2 sigma_Pc^2)
               / (alpha^2 sigma_Pc^2 + (1 - alpha)^2 sigma_Ec^2)

to zero with sign-bracketed bisection; v is the nontrivial factor of the
derivative of the product of per-class variance ratios, whose other
zeros sit at the boundary blends 0 and 1. Among all bisection roots and
the two boundaries, the blend with the largest fused Gaussian mutual
information wins, so the fused channel never falls below the better
single channel by more than numerical noise.
"""
from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

from .errors import (
    DegenerateSigma,
    DimensionMismatch,
    RangeViolation,
    TooFewSamples,
)
from .infomath import ClassStats, mi_gaussian
from .tracekit import DualTrace

_EPS = 1e-6        # open-interval margin for the root search
_V_TOL = 1e-9      # residual tolerance on v
_W_TOL = 1e-6      # interval tolerance for bisection
_SIGMA_FLOOR = 1e-9  # internal floor so the solver stays total
_GRID = 101        # sign-scan resolution

# golden-section ratios for the direct MI refinement
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI2 = 1.0 - _INV_PHI


@dataclass(frozen=True)
class CombineProfile:
    """Per-index blend weights and the MI bookkeeping behind them."""

    alphas: np.ndarray     # (w,)
    fused_mi: np.ndarray   # (w,) bits
    power_mi: np.ndarray   # (w,) bits
    em_mi: np.ndarray      # (w,) bits

    def __post_init__(self):
        a = np.ascontiguousarray(self.alphas, dtype=np.float64)
        if a.ndim != 1:
            raise DimensionMismatch("alphas must be 1-D")
        if np.any(a < 0.0) or np.any(a > 1.0):
            raise ValueError("blend weights must lie in [0, 1]")
        for name in ("fused_mi", "power_mi", "em_mi"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if arr.shape != a.shape:
                raise DimensionMismatch(f"{name} must align with alphas")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "alphas", a)

    @property
    def window(self) -> int:
        return int(self.alphas.shape[0])

    @property
    def improves_power(self) -> np.ndarray:
        return self.fused_mi + 1e-12 >= self.power_mi

    @property
    def improves_em(self) -> np.ndarray:
        return self.fused_mi + 1e-12 >= self.em_mi


def _check_pair(stats_power: ClassStats, stats_em: ClassStats) -> None:
    if stats_power.n_classes != stats_em.n_classes:
        raise DimensionMismatch("channel stats disagree in class count")
    if not np.allclose(stats_power.priors, stats_em.priors, atol=1e-9):
        raise DimensionMismatch("channel stats disagree in priors")


def v_alpha(alpha: float, stats_power: ClassStats,
            stats_em: ClassStats) -> float:
    """Stationarity function of the fused variance-ratio product."""
    _check_pair(stats_power, stats_em)
    s1 = stats_power.class_sigmas ** 2
    s2 = stats_em.class_sigmas ** 2
    denom = alpha * alpha * s1 + (1.0 - alpha) * (1.0 - alpha) * s2
    if np.any(denom < 1e-300):
        raise DegenerateSigma(
            "per-class variances vanish at this blend; constant feature")
    num = (stats_power.sigma ** 2) * s2 - (stats_em.sigma ** 2) * s1
    return float(np.sum(num / denom))


def fused_class_stats(stats_power: ClassStats, stats_em: ClassStats,
                      alpha: float) -> ClassStats:
    """Stats of the blended feature under within-class independence;
    the overall spread comes from the mixture of fused class means."""
    _check_pair(stats_power, stats_em)
    a = float(alpha)
    mu = a * stats_power.class_means + (1.0 - a) * stats_em.class_means
    var = (a * a * stats_power.class_sigmas ** 2
           + (1.0 - a) * (1.0 - a) * stats_em.class_sigmas ** 2)
    return ClassStats.from_components(mu, np.sqrt(var), stats_power.priors)


def _fused_mi_floored(stats_power: ClassStats, stats_em: ClassStats,
                      alphas: np.ndarray) -> np.ndarray:
    """Fused Gaussian MI at many blends, sigmas floored to stay total."""
    a = alphas[:, None]
    mu = a * stats_power.class_means + (1.0 - a) * stats_em.class_means
    var = (a * a * stats_power.class_sigmas ** 2
           + (1.0 - a) ** 2 * stats_em.class_sigmas ** 2)
    var = np.maximum(var, _SIGMA_FLOOR ** 2)
    pri = stats_power.priors
    m = mu @ pri
    overall = (var + mu * mu) @ pri - m * m
    overall = np.maximum(overall, _SIGMA_FLOOR ** 2)
    h_all = 0.5 * np.log2(overall)
    h_cond = 0.5 * (np.log2(var) @ pri)
    return np.maximum(h_all - h_cond, 0.0)


def _v_grid(alphas: np.ndarray, stats_power: ClassStats,
            stats_em: ClassStats) -> np.ndarray:
    s1 = np.maximum(stats_power.class_sigmas ** 2, _SIGMA_FLOOR ** 2)
    s2 = np.maximum(stats_em.class_sigmas ** 2, _SIGMA_FLOOR ** 2)
    a = alphas[:, None]
    denom = a * a * s1 + (1.0 - a) ** 2 * s2
    num = (stats_power.sigma ** 2) * s2 - (stats_em.sigma ** 2) * s1
    return (num / denom).sum(axis=1)


def solve_alpha_star(stats_power: ClassStats,
                     stats_em: ClassStats) -> float:
    """Blend weight maximizing the fused Gaussian MI.

    Candidates come from two routes that are kept separate on purpose.
    The analytic route brackets sign changes of v on the open interval
    and bisects to |v| < 1e-9 or width < 1e-6; its zeros are stationary
    under the channel-independent variance composition, which ignores
    how class means line up across channels. The direct route refines
    the fused-MI maximum itself on a fine grid, picking up the shift
    that aligned class means produce. The returned weight is the MI
    argmax over both routes plus the two boundaries, so it is total
    (constant features fall back to a boundary or 0.5) and never loses
    to the better single channel. A v that vanishes identically means
    the channels carry interchangeable information: return 0.5.
    """
    _check_pair(stats_power, stats_em)
    lo, hi = _EPS, 1.0 - _EPS
    grid = np.linspace(lo, hi, _GRID)
    vg = _v_grid(grid, stats_power, stats_em)
    if not np.any(vg != 0.0):
        return 0.5

    roots: list[float] = []
    sign = np.sign(vg)
    for k in range(_GRID - 1):
        if sign[k] == 0.0:
            roots.append(float(grid[k]))
            continue
        if sign[k + 1] != 0.0 and sign[k] != sign[k + 1]:
            a, b = float(grid[k]), float(grid[k + 1])
            va = _v_grid(np.array([a]), stats_power, stats_em)[0]
            for _ in range(100):
                mid = 0.5 * (a + b)
                vm = _v_grid(np.array([mid]), stats_power, stats_em)[0]
                if abs(vm) < _V_TOL or (b - a) < _W_TOL:
                    break
                if (vm < 0.0) == (va < 0.0):
                    a, va = mid, vm
                else:
                    b = mid
            roots.append(0.5 * (a + b))

    fine = np.linspace(0.0, 1.0, _GRID)
    best = int(np.argmax(_fused_mi_floored(stats_power, stats_em, fine)))
    a = fine[max(best - 1, 0)]
    b = fine[min(best + 1, _GRID - 1)]
    for _ in range(60):
        if (b - a) < _W_TOL:
            break
        m1 = a + (b - a) * _INV_PHI2
        m2 = a + (b - a) * _INV_PHI
        f1, f2 = _fused_mi_floored(stats_power, stats_em, np.array([m1, m2]))
        if f1 < f2:
            a = m1
        else:
            b = m2
    roots.append(0.5 * (a + b))

    candidates = np.array(roots + [0.0, 1.0])
    mis = _fused_mi_floored(stats_power, stats_em, candidates)
    return float(candidates[int(np.argmax(mis))])


def combine(dual: DualTrace, profile: CombineProfile) -> np.ndarray:
    """Blend one normalized dual trace into the fused trace."""
    if dual.window != profile.window:
        raise DimensionMismatch(
            f"trace window {dual.window} != profile window {profile.window}")
    a = profile.alphas
    return a * dual.power + (1.0 - a) * dual.em


def combine_arrays(power: np.ndarray, em: np.ndarray,
                   profile: CombineProfile) -> np.ndarray:
    """Blend normalized (n, w) channel blocks into fused features."""
    power = np.asarray(power, dtype=np.float64)
    em = np.asarray(em, dtype=np.float64)
    if power.shape != em.shape or power.shape[-1] != profile.window:
        raise DimensionMismatch("blocks must match the profile window")
    a = profile.alphas
    return a * power + (1.0 - a) * em


def check_improvement(stats_power: ClassStats, stats_em: ClassStats,
                      alpha: float, against: str = "power") -> bool:
    """Whether blending at ``alpha`` does not lose information against a
    single channel: fused Gaussian MI >= that channel's MI.

    Equivalently, with n classes and fused spread sigma_Z, the product
    form (sigma_ch / sigma_Z)^n * prod_c sigma_Zc <= prod_c sigma_chc;
    the comparison runs in the log domain so long products cannot
    underflow.
    """
    if against not in ("power", "em"):
        raise ValueError("against must be 'power' or 'em'")
    single = stats_power if against == "power" else stats_em
    fused = fused_class_stats(stats_power, stats_em, alpha)
    return mi_gaussian(fused) + 1e-12 >= mi_gaussian(single)


def _class_moments(x: np.ndarray, labels: np.ndarray, n_classes: int):
    """Per-class counts, means, and population variances of (n, w) data.

    Uses a stable sort and segmented reduction; classes must be encoded
    as 0..n_classes-1 with every class present.
    """
    order = np.argsort(labels, kind="stable")
    xs = x[order]
    ls = labels[order]
    counts = np.bincount(ls, minlength=n_classes)
    if np.any(counts == 0):
        raise TooFewSamples("every class needs at least one sample")
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    sums = np.add.reduceat(xs, starts, axis=0)
    sqs = np.add.reduceat(xs * xs, starts, axis=0)
    means = sums / counts[:, None]
    variances = np.maximum(sqs / counts[:, None] - means * means, 0.0)
    return counts, means, variances


def fit_combine_profile(power: np.ndarray, em: np.ndarray,
                        labels: np.ndarray) -> CombineProfile:
    """Fit per-index blend weights on a normalized training set.

    ``power`` and ``em`` are (n, w) blocks in [0, 1]; ``labels`` encodes
    the class of each row. Degenerate indices (a constant feature in a
    class or channel) resolve through the boundary/0.5 fallbacks instead
    of raising, so profiles exist for any training set with two or more
    classes.
    """
    power = np.asarray(power, dtype=np.float64)
    em = np.asarray(em, dtype=np.float64)
    labels = np.asarray(labels)
    if power.shape != em.shape or power.ndim != 2:
        raise DimensionMismatch("channel blocks must be matching (n, w)")
    if labels.shape != (power.shape[0],):
        raise DimensionMismatch("labels must align with rows")
    for block in (power, em):
        lo, hi = float(block.min()), float(block.max())
        if lo < -1e-9 or hi > 1.0 + 1e-9:
            raise RangeViolation("blocks must be normalized into [0, 1]")
    _, label_idx = np.unique(labels, return_inverse=True)
    n_classes = int(label_idx.max()) + 1
    if n_classes < 2:
        raise TooFewSamples("need at least two classes")

    _, mean_p, var_p = _class_moments(power, label_idx, n_classes)
    _, mean_e, var_e = _class_moments(em, label_idx, n_classes)
    counts = np.bincount(label_idx, minlength=n_classes)
    priors = counts / counts.sum()

    w = power.shape[1]
    alphas = np.empty(w)
    mi_f = np.empty(w)
    mi_p = np.empty(w)
    mi_e = np.empty(w)
    for k in range(w):
        sp = ClassStats.from_components(mean_p[:, k], np.sqrt(var_p[:, k]),
                                        priors)
        se = ClassStats.from_components(mean_e[:, k], np.sqrt(var_e[:, k]),
                                        priors)
        a = solve_alpha_star(sp, se)
        alphas[k] = a
        mi_f[k] = _fused_mi_floored(sp, se, np.array([a]))[0]
        mi_p[k] = _fused_mi_floored(sp, se, np.array([1.0]))[0]
        mi_e[k] = _fused_mi_floored(sp, se, np.array([0.0]))[0]
    return CombineProfile(alphas, mi_f, mi_p, mi_e)
