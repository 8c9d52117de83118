"""Self-labeled covariate-shift correction.

An incoming window is classified first, then the winning class is pulled
toward it:

    mu'    = (1 - theta) mu    + theta z
    Sigma' = (1 - theta) Sigma + theta (z - mu)(z - mu)^T

with mu in the covariance update taken before the mean moves. Offline
runs update mean and covariance in float; the real-time path updates
only the quantized means, in integer arithmetic, matching what the
streaming hardware can afford.

Self-labeling is risky by construction: a misclassified window drags the
wrong class. Every step is therefore logged with its predicted label and
the score gap to the runner-up before and after the update, so ground
truth (when available) can quantify the pollution.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .classify import (
    FixedModel,
    HierModel,
    QdaBank,
    fixed_score_batch,
    quantize_input,
    score_batch,
)
from .errors import SingularCovariance
from .fuse import combine_arrays
from .tracekit import DualTrace, normalize

THETA_FLOOR = 1e-4
THETA_CEIL = 0.5
MODES = ("mean", "mean_cov")


def default_theta(n_adapt: int, n_train_per_class: int) -> float:
    """Update weight from the adaptation/training size ratio, clamped to
    [1e-4, 0.5] so a huge batch can never overwrite training outright."""
    if n_adapt < 0 or n_train_per_class <= 0:
        raise ValueError("counts must be non-negative / positive")
    return float(min(max(n_adapt / (n_train_per_class + n_adapt),
                         THETA_FLOOR), THETA_CEIL))


@dataclass
class AdaptState:
    """Knobs plus per-class bookkeeping for one adaptation run."""

    theta: float
    mode: str = "mean_cov"
    batch_size: int = 400
    group_updates: dict[int, int] = field(default_factory=dict)
    instr_updates: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"theta {self.theta} outside (0, 1]")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")

    def bump(self, group: int, instr: int) -> None:
        self.group_updates[group] = self.group_updates.get(group, 0) + 1
        self.instr_updates[instr] = self.instr_updates.get(instr, 0) + 1


@dataclass
class AdjustRecord:
    """One self-adjustment step of the hierarchy."""

    step: int
    predicted_label: str
    theta: float
    mode: str
    group: int
    inter_gap_pre: float
    inter_gap_post: float
    within_gap_pre: float
    within_gap_post: float
    cov_updated: bool


def _gap(scores: np.ndarray, idx: int) -> float:
    """Score margin of class idx over the best of the rest."""
    if scores.shape[0] < 2:
        return float("inf")
    others = np.delete(scores, idx)
    return float(scores[idx] - others.max())


def _adjust_bank(bank: QdaBank, z: np.ndarray, theta: float,
                 update_cov: bool, refresh: bool,
                 orig_covs: dict | None = None):
    """Score, self-label, and pull the winner toward z in place.

    Returns (class row index, gap before, gap after, cov touched).
    When ``refresh`` is false the caller owns re-factorization; the
    first covariance snapshot per class lands in ``orig_covs`` so a
    failed batch-end factorization can roll back.
    """
    scores = score_batch(bank, z[None, :])[0]
    c = int(np.argmax(scores))
    pre = _gap(scores, c)
    mu_old = bank.means[c].copy()
    bank.means[c] = (1.0 - theta) * mu_old + theta * z
    touched = False
    if update_cov:
        if orig_covs is not None and c not in orig_covs:
            orig_covs[c] = bank.covs[c].copy()
        d = z - mu_old
        new_cov = (1.0 - theta) * bank.covs[c] + theta * np.outer(d, d)
        if refresh:
            saved = bank.covs[c].copy()
            bank.covs[c] = new_cov
            try:
                bank.refresh([c])
                touched = True
            except SingularCovariance:
                bank.covs[c] = saved
                bank.refresh([c])
        else:
            bank.covs[c] = new_cov
            touched = True
    post = _gap(score_batch(bank, z[None, :])[0], c)
    return c, pre, post, touched


def _refresh_dirty(bank: QdaBank, dirty: set[int],
                   orig_covs: dict[int, np.ndarray]) -> None:
    """Batch-end re-factorization with per-class rollback on failure."""
    for c in sorted(dirty):
        try:
            bank.refresh([c])
        except SingularCovariance:
            bank.covs[c] = orig_covs[c]
            bank.refresh([c])


def hier_features(model: HierModel, power: np.ndarray,
                  em: np.ndarray) -> np.ndarray:
    """Preprocess raw (n, w) channel blocks into selected fused rows."""
    p = normalize(power, model.stats, 0)
    e = normalize(em, model.stats, 1)
    return combine_arrays(p, e, model.profile)[:, model.feature_set.indices]


def self_adjust(model: HierModel, z: np.ndarray, state: AdaptState,
                step: int = 0, refresh: bool = True,
                bookkeeping=None) -> AdjustRecord:
    """One self-labeled update of both hierarchy levels for a selected
    fused feature vector z; mutates the model in place."""
    update_cov = state.mode == "mean_cov"
    if bookkeeping is None:
        bookkeeping = {"inter": (set(), {}), "within": {}}
    inter_dirty, inter_orig = bookkeeping["inter"]
    gi, ipre, ipost, it = _adjust_bank(model.inter, z, state.theta,
                                       update_cov, refresh, inter_orig)
    group = int(model.inter.class_labels[gi])
    if it:
        inter_dirty.add(gi)
    wbank = model.within[group]
    if group not in bookkeeping["within"]:
        bookkeeping["within"][group] = (set(), {})
    w_dirty, w_orig = bookkeeping["within"][group]
    wi, wpre, wpost, wt = _adjust_bank(wbank, z, state.theta, update_cov,
                                       refresh, w_orig)
    if wt:
        w_dirty.add(wi)
    instr = int(wbank.class_labels[wi])
    state.bump(group, instr)
    return AdjustRecord(step, model.table.labels[instr], state.theta,
                        state.mode, group, ipre, ipost, wpre, wpost,
                        it or wt)


def adapt_batch(model: HierModel, power: np.ndarray, em: np.ndarray,
                state: AdaptState, start_step: int = 0) -> list[AdjustRecord]:
    """Sequentially self-adjust on a block of raw windows, deferring
    re-factorization of touched covariances to the end of the batch."""
    x = hier_features(model, power, em)
    bookkeeping = {"inter": (set(), {}), "within": {}}
    records = []
    for i in range(x.shape[0]):
        records.append(self_adjust(model, x[i], state, start_step + i,
                                   refresh=False, bookkeeping=bookkeeping))
    if state.mode == "mean_cov":
        _refresh_dirty(model.inter, *bookkeeping["inter"])
        for g, (dirty, orig) in bookkeeping["within"].items():
            _refresh_dirty(model.within[g], dirty, orig)
    return records


def adapt_trace(model: HierModel, dual: DualTrace, state: AdaptState,
                step: int = 0) -> AdjustRecord:
    """Single-window convenience wrapper over raw channels."""
    z = hier_features(model, dual.power[None, :], dual.em[None, :])[0]
    return self_adjust(model, z, state, step)


# -- fixed-point path ---------------------------------------------------------

def _adjust_fixed_bank(fbank, z_q: np.ndarray, theta_q: int):
    """Integer mean-only pull: mu += round(theta * (z - mu)) at scale
    2^q, with round-half-up on the shift."""
    scores = fixed_score_batch(fbank, z_q[None, :])[0]
    # plain argmax matches the bubble sweep: strict >, first winner
    c = int(np.argmax(scores))
    pre = _gap(scores.astype(np.float64), c)
    q = fbank.q
    d = z_q - fbank.mu_q[c].astype(np.int64)
    step = (theta_q * d + (1 << (q - 1))) >> q
    fbank.mu_q[c] = (fbank.mu_q[c].astype(np.int64) + step).astype(np.int16)
    post = _gap(fixed_score_batch(fbank, z_q[None, :])[0].astype(np.float64), c)
    return c, pre, post


def adapt_batch_fixed(model: HierModel, fixed: FixedModel, power: np.ndarray,
                      em: np.ndarray, state: AdaptState,
                      start_step: int = 0) -> list[AdjustRecord]:
    """Real-time adaptation: self-label with the quantized hierarchy and
    update only its integer means. The float model supplies the
    preprocessing front end and is not modified."""
    if state.mode != "mean":
        raise ValueError("fixed-point adaptation is mean-only")
    x = hier_features(model, power, em)
    z_q = quantize_input(x, fixed.q)
    theta_q = int(round(state.theta * (1 << fixed.q)))
    records = []
    for i in range(z_q.shape[0]):
        gi, ipre, ipost = _adjust_fixed_bank(fixed.inter, z_q[i], theta_q)
        group = int(fixed.inter.class_labels[gi])
        wbank = fixed.within[group]
        wi, wpre, wpost = _adjust_fixed_bank(wbank, z_q[i], theta_q)
        instr = int(wbank.class_labels[wi])
        state.bump(group, instr)
        records.append(AdjustRecord(start_step + i,
                                    model.table.labels[instr], state.theta,
                                    state.mode, group, ipre, ipost, wpre,
                                    wpost, False))
    return records


LOG_FIELDS = ("step", "predicted_label", "theta", "mode", "group",
              "inter_gap_pre", "inter_gap_post", "within_gap_pre",
              "within_gap_post", "cov_updated")


def write_adapt_log(records: list[AdjustRecord], path) -> None:
    """Adaptation log as CSV, one row per self-adjustment step."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_FIELDS)
        for r in records:
            writer.writerow([r.step, r.predicted_label, repr(r.theta),
                             r.mode, r.group, repr(r.inter_gap_pre),
                             repr(r.inter_gap_post), repr(r.within_gap_pre),
                             repr(r.within_gap_post), int(r.cov_updated)])
