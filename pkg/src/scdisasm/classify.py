"""Discriminant classification: float QDA/LDA banks, the two-level
hierarchical model, and its fixed-point form.

Each class c scores an input x with the quadratic discriminant

    delta_c(x) = -0.5 (x - mu_c)^T inv(Sigma_c) (x - mu_c)
                 + ln p_c - 0.5 ln det(Sigma_c)

and the argmax wins, ties resolving to the lowest class index. LDA is
the same bank with the covariance pooled across classes. Covariances are
population estimates with a relative ridge lam = 1e-6 * trace(Sigma) / d
added before inversion.

The fixed-point form works on signed 16-bit coefficients at scale 2^q
with 64-bit accumulators and scores

    Score_c(z) = -(z - mu_c)^T inv(Sigma_c) (z - mu_c) + b_c,
    b_c = 2 (ln p_c - 0.5 ln det(Sigma_c)),

which is exactly 2 * delta_c, so the float and fixed argmax agree up to
rounding. Raw inverse-covariance entries rarely fit 16 bits, so a bank
may carry a power-of-two score scale applied to inv(Sigma_c) and b_c of
every class alike; scaling all scores by a positive constant never moves
the argmax. Quantizing with the default scale of 1 enforces the plain
16-bit range and raises OverflowRisk when a coefficient does not fit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    MissingGroup,
    OverflowRisk,
    SingularCovariance,
    TooFewSamples,
    UnknownInstruction,
)
from .featsel import FeatureSet
from .fuse import CombineProfile, combine_arrays
from .leaksim import GroupTable
from .tracekit import DualTrace, LabeledDataset, NormalizationStats, normalize

RIDGE_SCALE = 1e-6
Q_MIN, Q_MAX = 8, 14
_INT16_MAX = 32767


def _regularized(cov: np.ndarray) -> np.ndarray:
    d = cov.shape[0]
    lam = RIDGE_SCALE * float(np.trace(cov)) / d
    return cov + lam * np.eye(d)


def _factor(cov: np.ndarray):
    """Inverse and log-determinant of a regularized covariance."""
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(
            "covariance not positive definite after ridge") from exc
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise SingularCovariance("non-positive determinant")
    return np.linalg.inv(cov), float(logdet)


@dataclass
class QdaBank:
    """Per-class Gaussian parameters plus cached inverse factors.

    ``class_labels`` are integer identities (group ids for the top level,
    global instruction indices within a group). Banks are treated as
    immutable once trained; online adaptation works on a ``copy()``.
    """

    class_labels: np.ndarray  # (C,) int64
    means: np.ndarray         # (C, d)
    covs: np.ndarray          # (C, d, d)
    priors: np.ndarray        # (C,)
    inv_covs: np.ndarray = field(default=None, repr=False)
    log_dets: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.class_labels = np.ascontiguousarray(self.class_labels, np.int64)
        self.means = np.ascontiguousarray(self.means, np.float64)
        self.covs = np.ascontiguousarray(self.covs, np.float64)
        self.priors = np.ascontiguousarray(self.priors, np.float64)
        if self.inv_covs is None:
            self.refresh()

    def refresh(self, classes=None) -> None:
        """(Re)compute inverses and log-determinants, all classes or a
        subset; the single code path keeps reloads bit-identical."""
        if classes is None:
            classes = range(self.n_classes)
            self.inv_covs = np.empty_like(self.covs)
            self.log_dets = np.empty(self.n_classes)
        for c in classes:
            self.inv_covs[c], self.log_dets[c] = _factor(self.covs[c])

    @property
    def n_classes(self) -> int:
        return int(self.class_labels.shape[0])

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])

    @property
    def biases(self) -> np.ndarray:
        """Fixed-point score offsets b_c = 2 (ln p_c - 0.5 ln det)."""
        return 2.0 * (np.log(self.priors) - 0.5 * self.log_dets)

    def copy(self) -> "QdaBank":
        return QdaBank(self.class_labels.copy(), self.means.copy(),
                       self.covs.copy(), self.priors.copy(),
                       self.inv_covs.copy(), self.log_dets.copy())


def _class_split(x: np.ndarray, y: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise DimensionMismatch("expected (n, d) features and (n,) labels")
    classes, idx = np.unique(y, return_inverse=True)
    counts = np.bincount(idx)
    if np.any(counts < 2):
        short = classes[counts < 2]
        raise TooFewSamples(f"classes with fewer than 2 samples: {short}")
    return x, classes.astype(np.int64), idx, counts


def train_qda(x, y, priors=None) -> QdaBank:
    """Fit per-class means and population covariances with ridge.

    ``priors`` defaults to empirical class frequencies.
    """
    x, classes, idx, counts = _class_split(x, y)
    c, d = classes.shape[0], x.shape[1]
    means = np.empty((c, d))
    covs = np.empty((c, d, d))
    for k in range(c):
        block = x[idx == k]
        means[k] = block.mean(axis=0)
        centered = block - means[k]
        covs[k] = _regularized((centered.T @ centered) / block.shape[0])
    if priors is None:
        priors = counts / counts.sum()
    return QdaBank(classes, means, covs, np.asarray(priors, dtype=np.float64))


def train_lda(x, y, priors=None) -> QdaBank:
    """Fit a pooled-covariance bank (equal class shapes by assumption)."""
    x, classes, idx, counts = _class_split(x, y)
    c, d = classes.shape[0], x.shape[1]
    means = np.empty((c, d))
    pooled = np.zeros((d, d))
    for k in range(c):
        block = x[idx == k]
        means[k] = block.mean(axis=0)
        centered = block - means[k]
        pooled += centered.T @ centered
    pooled = _regularized(pooled / x.shape[0])
    covs = np.repeat(pooled[None, :, :], c, axis=0)
    if priors is None:
        priors = counts / counts.sum()
    return QdaBank(classes, means, covs, np.asarray(priors, dtype=np.float64))


def score_batch(bank: QdaBank, x: np.ndarray) -> np.ndarray:
    """(m, C) discriminant scores delta_c for a block of inputs."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != bank.dim:
        raise DimensionMismatch(f"input dim {x.shape[1]} != bank dim {bank.dim}")
    out = np.empty((x.shape[0], bank.n_classes))
    log_priors = np.log(bank.priors)
    for c in range(bank.n_classes):
        diff = x - bank.means[c]
        quad = np.einsum("md,de,me->m", diff, bank.inv_covs[c], diff)
        out[:, c] = -0.5 * quad + log_priors[c] - 0.5 * bank.log_dets[c]
    return out


def qda_scores(bank: QdaBank, x) -> np.ndarray:
    """Per-class discriminant scores of a single input."""
    return score_batch(bank, np.asarray(x, dtype=np.float64)[None, :])[0]


def classify(bank: QdaBank, x) -> int:
    """Argmax class label; ties resolve to the lowest class index."""
    return int(bank.class_labels[int(np.argmax(qda_scores(bank, x)))])


def classify_batch(bank: QdaBank, x) -> np.ndarray:
    return bank.class_labels[np.argmax(score_batch(bank, x), axis=1)]


def lda_classify(bank: QdaBank, x) -> int:
    """Alias for pooled-covariance banks, same scoring path."""
    return classify(bank, x)


def bubble_argmax(scores) -> int:
    """Index of the maximum by pairwise comparison sweep, keeping the
    first winner on ties (mirrors the hardware sorter)."""
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    return best


def count_classifiers(group_sizes, strategy: str = "hierarchical") -> int:
    """Number of pairwise decision surfaces a one-vs-one realization
    would need: the hierarchy pays C(G, 2) between groups plus C(s, 2)
    within each; flat pays C(total, 2)."""
    sizes = [int(s) for s in group_sizes]
    if any(s < 1 for s in sizes):
        raise ValueError("group sizes must be positive")
    if strategy == "hierarchical":
        return math.comb(len(sizes), 2) + sum(math.comb(s, 2) for s in sizes)
    if strategy == "flat":
        return math.comb(sum(sizes), 2)
    raise ValueError(f"unknown strategy {strategy!r}")


# -- hierarchical model -------------------------------------------------------

@dataclass
class HierModel:
    """Deployable pipeline: normalization, blend profile, selected
    features, and the two classifier levels."""

    stats: NormalizationStats
    profile: CombineProfile
    feature_set: FeatureSet
    table: GroupTable
    inter: QdaBank                 # class_labels = 1-based group ids
    within: dict[int, QdaBank]     # group id -> bank over global label ids
    classifier: str = "qda"

    def copy(self) -> "HierModel":
        return HierModel(self.stats, self.profile, self.feature_set,
                         self.table, self.inter.copy(),
                         {g: b.copy() for g, b in self.within.items()},
                         self.classifier)


def fused_features(dataset: LabeledDataset, stats: NormalizationStats,
                   profile: CombineProfile) -> np.ndarray:
    """Normalize both channels and blend them into (n, w) fused features."""
    p = normalize(dataset.power, stats, 0)
    e = normalize(dataset.em, stats, 1)
    return combine_arrays(p, e, profile)


def global_label_ids(dataset: LabeledDataset, table: GroupTable) -> np.ndarray:
    """Map record labels onto the grouping table's global label order."""
    order = {m: i for i, m in enumerate(table.labels)}
    try:
        lut = np.array([order[m] for m in dataset.labels], dtype=np.int64)
    except KeyError as exc:
        raise UnknownInstruction(str(exc)) from exc
    return lut[dataset.instr_ids]


def train_hier(dataset: LabeledDataset, table: GroupTable,
               stats: NormalizationStats, profile: CombineProfile,
               feature_set: FeatureSet, classifier: str = "qda") -> HierModel:
    """Train the inter-group bank and one within-group bank per group.

    The training set must cover every group of the table; priors are
    empirical, so a template set gives groups priors proportional to
    their sizes and instructions uniform priors within a group.
    """
    if classifier not in ("qda", "lda"):
        raise ValueError("classifier must be 'qda' or 'lda'")
    fit = train_qda if classifier == "qda" else train_lda
    fused = fused_features(dataset, stats, profile)
    x = fused[:, feature_set.indices]
    y_instr = global_label_ids(dataset, table)
    y_group = dataset.group_ids.astype(np.int64)
    present = set(int(g) for g in np.unique(y_group))
    wanted = set(range(1, table.n_groups + 1))
    if present != wanted:
        raise MissingGroup(f"training set misses groups {sorted(wanted - present)}")
    inter = fit(x, y_group)
    within = {}
    for g in sorted(wanted):
        rows = y_group == g
        within[g] = fit(x[rows], y_instr[rows])
    return HierModel(stats, profile, feature_set, table, inter, within,
                     classifier)


def trace_features(model: HierModel, dual: DualTrace) -> np.ndarray:
    """Run one raw dual trace through the preprocessing stages."""
    fused = combine_arrays(normalize(dual.power, model.stats, 0)[None, :],
                           normalize(dual.em, model.stats, 1)[None, :],
                           model.profile)
    return fused[0, model.feature_set.indices]


def hier_classify(model: HierModel, dual: DualTrace) -> tuple[int, str]:
    """(group id, mnemonic) decision for one raw dual-channel window."""
    z = trace_features(model, dual)
    g = classify(model.inter, z)
    instr = classify(model.within[g], z)
    return g, model.table.labels[instr]


def hier_classify_batch(model: HierModel, power: np.ndarray,
                        em: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized decisions for raw (n, w) channel blocks.

    Returns (group ids, global instruction ids).
    """
    p = normalize(power, model.stats, 0)
    e = normalize(em, model.stats, 1)
    x = combine_arrays(p, e, model.profile)[:, model.feature_set.indices]
    groups = classify_batch(model.inter, x)
    instrs = np.empty(x.shape[0], dtype=np.int64)
    for g in np.unique(groups):
        rows = groups == g
        instrs[rows] = classify_batch(model.within[int(g)], x[rows])
    return groups, instrs


# -- fixed-point form ---------------------------------------------------------

@dataclass
class FixedBank:
    """Quantized bank: means at scale 2^q, scaled inverse covariances and
    biases at scale 2^q times 2^scale_exp, all int16 with int64 math."""

    class_labels: np.ndarray  # (C,) int64
    mu_q: np.ndarray          # (C, d) int16
    a_q: np.ndarray           # (C, d, d) int16
    b_q: np.ndarray           # (C,) int16
    q: int
    scale_exp: int

    @property
    def n_classes(self) -> int:
        return int(self.class_labels.shape[0])

    @property
    def dim(self) -> int:
        return int(self.mu_q.shape[1])

    def copy(self) -> "FixedBank":
        return FixedBank(self.class_labels.copy(), self.mu_q.copy(),
                         self.a_q.copy(), self.b_q.copy(), self.q,
                         self.scale_exp)


@dataclass
class FixedModel:
    """Quantized hierarchy; preprocessing stays with the float model."""

    inter: FixedBank
    within: dict[int, FixedBank]
    q: int

    def copy(self) -> "FixedModel":
        return FixedModel(self.inter.copy(),
                          {g: b.copy() for g, b in self.within.items()},
                          self.q)


def _quantize_coeff(values: np.ndarray, q: int, what: str) -> np.ndarray:
    scaled = np.rint(values * (1 << q))
    worst = float(np.max(np.abs(scaled))) if scaled.size else 0.0
    if worst > _INT16_MAX:
        raise OverflowRisk(
            f"{what}: quantized magnitude {int(worst)} exceeds {_INT16_MAX} "
            f"at q={q}")
    return scaled.astype(np.int16)


def quantize_bank(bank: QdaBank, q: int, scale_exp: int = 0) -> FixedBank:
    """Quantize one bank at scale 2^q.

    ``scale_exp`` applies a power-of-two factor to the inverse
    covariances and biases of every class alike before quantization (an
    argmax-preserving rescale); the default exponent of 0 quantizes the
    raw coefficients and raises OverflowRisk when one does not fit int16.
    """
    if not Q_MIN <= q <= Q_MAX:
        raise ValueError(f"q must lie in [{Q_MIN}, {Q_MAX}]")
    s = math.ldexp(1.0, scale_exp)
    mu_q = _quantize_coeff(bank.means, q, "class mean")
    a_q = _quantize_coeff(bank.inv_covs * s, q, "inverse covariance")
    b_q = _quantize_coeff(bank.biases * s, q, "score bias")
    return FixedBank(bank.class_labels.copy(), mu_q, a_q, b_q, q, scale_exp)


def auto_scale_exp(bank: QdaBank, q: int) -> int:
    """Largest power-of-two exponent keeping every scaled coefficient of
    this bank inside the signed 16-bit range at scale 2^q."""
    worst = max(float(np.max(np.abs(bank.inv_covs))),
                float(np.max(np.abs(bank.biases))), 1e-300)
    # need |worst * 2^e * 2^q| <= _INT16_MAX
    return int(math.floor(math.log2(_INT16_MAX / (worst * (1 << q)))))


def quantize_model(model: HierModel, q: int) -> FixedModel:
    """Quantize the whole hierarchy, choosing a per-bank score scale
    automatically; scales differ between banks, never within one."""
    inter = quantize_bank(model.inter, q, auto_scale_exp(model.inter, q))
    within = {g: quantize_bank(b, q, auto_scale_exp(b, q))
              for g, b in model.within.items()}
    return FixedModel(inter, within, q)


def quantize_input(z: np.ndarray, q: int) -> np.ndarray:
    """Round features in [0, 1] to integers at scale 2^q."""
    return np.rint(np.asarray(z, dtype=np.float64) * (1 << q)).astype(np.int64)


def fixed_score_batch(fbank: FixedBank, z_q: np.ndarray) -> np.ndarray:
    """(m, C) integer scores at scale 2^(3q + scale_exp), int64 exact."""
    z_q = np.atleast_2d(np.asarray(z_q, dtype=np.int64))
    if z_q.shape[1] != fbank.dim:
        raise DimensionMismatch("input dim does not match bank")
    out = np.empty((z_q.shape[0], fbank.n_classes), dtype=np.int64)
    shift = 2 * fbank.q
    for c in range(fbank.n_classes):
        diff = z_q - fbank.mu_q[c].astype(np.int64)
        quad = np.einsum("md,de,me->m", diff,
                         fbank.a_q[c].astype(np.int64), diff)
        out[:, c] = -quad + (int(fbank.b_q[c]) << shift)
    return out


def fixed_scores(fbank: FixedBank, z_q) -> np.ndarray:
    return fixed_score_batch(fbank, np.asarray(z_q, dtype=np.int64)[None, :])[0]


def fixed_classify(fbank: FixedBank, z_q) -> int:
    """Bubble-sweep argmax over integer scores."""
    return int(fbank.class_labels[bubble_argmax(fixed_scores(fbank, z_q))])


def fixed_classify_batch(fbank: FixedBank, z_q: np.ndarray) -> np.ndarray:
    scores = fixed_score_batch(fbank, z_q)
    picks = np.array([bubble_argmax(row) for row in scores], dtype=np.int64)
    return fbank.class_labels[picks]


def fixed_hier_classify_batch(model: HierModel, fixed: FixedModel,
                              power: np.ndarray, em: np.ndarray):
    """Vectorized fixed-point decisions for raw channel blocks; the float
    model supplies normalization, blending, and feature selection."""
    p = normalize(power, model.stats, 0)
    e = normalize(em, model.stats, 1)
    x = combine_arrays(p, e, model.profile)[:, model.feature_set.indices]
    z_q = quantize_input(x, fixed.q)
    groups = fixed_classify_batch(fixed.inter, z_q)
    instrs = np.empty(x.shape[0], dtype=np.int64)
    for g in np.unique(groups):
        rows = groups == g
        instrs[rows] = fixed_classify_batch(fixed.within[int(g)], z_q[rows])
    return groups, instrs
