"""Experiment drivers tying the pipeline together.

Four entry points:

* ``run_offline``: template capture, 90/10 split, fusion + selection +
  hierarchical training, and recognition-rate curves over feature count
  for every channel x selector x classifier combination.
* ``run_timeline``: six-point evaluation of benchmark streams with two
  reboot-induced DC shifts and self-adjustment batches in between, in
  both float (mean+cov) and fixed-point (mean-only) modes.
* ``sampling_sweep``: the full pipeline at several sampling densities.
* ``cycle_budget``: per-instruction cycle accounting of the streaming
  datapath against the sampling-ratio deadline.

Everything is deterministic given the config seed; reports carry the
seed so a run can be reproduced exactly.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, fields

import numpy as np

from .adapt import AdaptState, adapt_batch, adapt_batch_fixed, default_theta
from .classify import (
    HierModel,
    classify_batch,
    count_classifiers,
    fixed_hier_classify_batch,
    global_label_ids,
    hier_classify_batch,
    quantize_model,
    train_hier,
    train_lda,
    train_qda,
)
from .config import RunConfig
from .errors import ConfigError, EmptyInput, LengthMismatch
from .featsel import filter_select, gini_select, mrmr_select, pca_fit, \
    pca_project
from .fuse import combine_arrays, fit_combine_profile
from .leaksim import AVR_TABLE, LeakModel, Session, gen_benchmark, \
    gen_dataset, make_program, reboot
from .rng import child_rng
from .tracekit import LabeledDataset, fit_normalizer, normalize

# streaming datapath stage costs, in sampler clock cycles per window
DEFAULT_STAGE_CYCLES = {
    "combine": 10,
    "inter": 40,
    "within": 40,
    "sort": 20,
    "adjust": 10,
}


@dataclass(frozen=True)
class CycleBudget:
    stages: dict
    total: int
    deadline: int
    real_time: bool
    throughput: float  # windows per second at the given clock
    w_star: int
    n_groups: int
    max_group: int


def cycle_budget(w_star: int, n_groups: int, max_group: int,
                 sampling_ratio: int, clock_hz: float = 160e6,
                 stage_cycles: dict | None = None) -> CycleBudget:
    """Cycle accounting for one streamed window.

    The deadline is the sampler/target clock ratio: the datapath must
    finish a window before the next instruction completes. The boundary
    is inclusive; a total exactly at the deadline still streams.
    """
    if min(w_star, n_groups, max_group, sampling_ratio) < 1 or clock_hz <= 0:
        raise ValueError("cycle budget inputs must be positive")
    stages = dict(DEFAULT_STAGE_CYCLES if stage_cycles is None
                  else stage_cycles)
    total = int(sum(stages.values()))
    return CycleBudget(stages, total, int(sampling_ratio),
                       total <= int(sampling_ratio), clock_hz / total,
                       int(w_star), int(n_groups), int(max_group))


# -- metrics ------------------------------------------------------------------

@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with rows = truth, columns = prediction, plus the
    row-normalized rates (zero rows stay zero)."""

    labels: tuple
    counts: np.ndarray  # (C, C) int64
    rates: np.ndarray   # (C, C) float64

    @property
    def accuracy(self) -> float:
        total = int(self.counts.sum())
        return float(np.trace(self.counts) / total) if total else 0.0


def confusion_matrix(truth, predicted, labels) -> ConfusionMatrix:
    """Tabulate integer class ids against the given label order."""
    truth = np.asarray(truth, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if truth.size == 0:
        raise EmptyInput("no predictions to tabulate")
    if truth.shape != predicted.shape:
        raise LengthMismatch(
            f"{truth.shape[0]} truths vs {predicted.shape[0]} predictions")
    c = len(labels)
    if truth.min() < 0 or truth.max() >= c or predicted.min() < 0 \
            or predicted.max() >= c:
        raise LengthMismatch("class id outside label table")
    counts = np.bincount(truth * c + predicted,
                         minlength=c * c).reshape(c, c)
    sums = counts.sum(axis=1, keepdims=True)
    rates = np.divide(counts, sums, out=np.zeros((c, c)), where=sums > 0)
    return ConfusionMatrix(tuple(labels), counts, rates)


def recognition_rate(truth, predicted) -> float:
    truth = np.asarray(truth)
    predicted = np.asarray(predicted)
    if truth.size == 0:
        raise EmptyInput("nothing evaluated")
    if truth.shape != predicted.shape:
        raise LengthMismatch("prediction/truth length mismatch")
    return float(np.mean(truth == predicted))


# -- dataset plumbing ---------------------------------------------------------

def split_dataset(dataset: LabeledDataset, test_fraction: float,
                  seed: int) -> tuple[LabeledDataset, LabeledDataset]:
    """Deterministic stratified split; every class keeps at least one
    held-out record. Reconstructable from (dataset order, seed) alone."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test fraction must lie in (0, 1)")
    train_idx, test_idx = [], []
    for ci in range(len(dataset.labels)):
        rows = np.flatnonzero(dataset.instr_ids == ci)
        perm = rows[child_rng(seed, "split", ci).permutation(rows.size)]
        n_test = max(1, int(round(test_fraction * rows.size)))
        test_idx.append(perm[:n_test])
        train_idx.append(perm[n_test:])
    train = np.sort(np.concatenate(train_idx))
    test = np.sort(np.concatenate(test_idx))
    return dataset.subset(train), dataset.subset(test)


def simulator_from(config: RunConfig, window: int | None = None,
                   noise_scale: float = 1.0) -> LeakModel:
    """Leak model for the config; ``noise_scale`` inflates the white
    noise floor to model a cheaper capture chain on the same target."""
    return LeakModel.synthetic(AVR_TABLE,
                               window=window or config.window,
                               seed=config.seed,
                               noise_sigma=config.noise_sigma * noise_scale,
                               dc_wander=config.dc_wander,
                               offset_spread=config.offset_spread,
                               bleed=config.bleed,
                               layout=config.layout,
                               dev_harmonics=config.dev_harmonics)


def simulate_templates(config: RunConfig) -> LabeledDataset:
    """Template dataset for the config: all instructions, boot session."""
    sim = simulator_from(config)
    return gen_dataset(AVR_TABLE.labels, config.n_per_class,
                       Session.initial(config.seed), sim)


def _select_features(x, y, selector: str, k: int, bins: int):
    if selector == "mrmr":
        return mrmr_select(x, y, k, bins)
    if selector == "filter":
        return filter_select(x, y, k, bins)
    if selector == "gini":
        return gini_select(x, y, k)
    raise ConfigError(
        f"selector '{selector}' cannot produce an index set for a "
        "deployable model; use mrmr, filter, or gini")


def fit_pipeline(train: LabeledDataset, config: RunConfig,
                 w_star: int | None = None) -> HierModel:
    """Normalizer, blend profile, feature selection, and hierarchy from
    one training set."""
    table = AVR_TABLE
    stats = fit_normalizer(train)
    p = normalize(train.power, stats, 0)
    e = normalize(train.em, stats, 1)
    y = global_label_ids(train, table)
    profile = fit_combine_profile(p, e, y)
    fused = combine_arrays(p, e, profile)
    k = w_star if w_star is not None else config.w_star
    fs = _select_features(fused, y, config.selector, min(k, fused.shape[1]),
                          config.bins)
    return train_hier(train, table, stats, profile, fs, config.classifier)


def evaluate_model(model: HierModel, dataset: LabeledDataset, fixed=None):
    """(rate, predicted ids, truth ids) on raw windows; pass a quantized
    model to take the fixed-point path."""
    truth = global_label_ids(dataset, model.table)
    if fixed is None:
        _, pred = hier_classify_batch(model, dataset.power, dataset.em)
    else:
        _, pred = fixed_hier_classify_batch(model, fixed, dataset.power,
                                            dataset.em)
    return recognition_rate(truth, pred), pred, truth


# -- offline study ------------------------------------------------------------

def _fit_banks(x, y_group, y_instr, classifier: str):
    fit = train_qda if classifier == "qda" else train_lda
    inter = fit(x, y_group)
    within = {}
    for g in np.unique(y_group):
        rows = y_group == g
        within[int(g)] = fit(x[rows], y_instr[rows])
    return inter, within


def _predict_banks(inter, within, x):
    groups = classify_batch(inter, x)
    instrs = np.empty(x.shape[0], dtype=np.int64)
    for g in np.unique(groups):
        rows = groups == g
        instrs[rows] = classify_batch(within[int(g)], x[rows])
    return groups, instrs


CHANNEL_NAMES = ("power", "em", "fused")
SELECTOR_NAMES = ("mrmr", "filter", "gini", "pca")
CLASSIFIER_NAMES = ("qda", "lda")


@dataclass
class OfflineReport:
    seed: int
    window: int
    w_star: int
    n_train: int
    n_test: int
    alpha_mean: float
    curves: dict = field(default_factory=dict)
    deploy_rate: float = 0.0
    deploy_group_rate: float = 0.0
    confusion: ConfusionMatrix | None = None
    hier_count: int = 0
    flat_count: int = 0
    model: HierModel | None = None


def run_offline(config: RunConfig, channels=CHANNEL_NAMES,
                selectors=SELECTOR_NAMES,
                classifiers=CLASSIFIER_NAMES) -> OfflineReport:
    """Template study: recognition-rate-vs-feature-count curves across
    channels, selectors, and classifiers, plus one deployment model at
    the configured operating point."""
    table = AVR_TABLE
    data = simulate_templates(config)
    train, test = split_dataset(data, 0.1, config.seed)

    stats = fit_normalizer(train)
    p_tr = normalize(train.power, stats, 0)
    e_tr = normalize(train.em, stats, 1)
    p_te = normalize(test.power, stats, 0)
    e_te = normalize(test.em, stats, 1)
    y_tr = global_label_ids(train, table)
    y_te = global_label_ids(test, table)
    g_tr = train.group_ids.astype(np.int64)

    profile = fit_combine_profile(p_tr, e_tr, y_tr)
    f_tr = combine_arrays(p_tr, e_tr, profile)
    f_te = combine_arrays(p_te, e_te, profile)
    mats = {"power": (p_tr, p_te), "em": (e_tr, e_te), "fused": (f_tr, f_te)}

    ks = sorted({k for k in config.feature_counts if k <= config.window})
    k_max = max(ks)
    curves = {}
    for channel in channels:
        x_tr, x_te = mats[channel]
        for selector in selectors:
            if selector == "pca":
                proj = pca_fit(x_tr, min(k_max, x_tr.shape[1]))
                z_tr = pca_project(x_tr, proj)
                z_te = pca_project(x_te, proj)
                take = lambda x, k: x[:, :min(k, x.shape[1])]
            else:
                fs = _select_features(x_tr, y_tr, selector,
                                      min(k_max, x_tr.shape[1]), config.bins)
                z_tr, z_te = x_tr, x_te
                cols = fs.indices
                take = lambda x, k: x[:, cols[:min(k, cols.size)]]
            for classifier in classifiers:
                pts = []
                for k in ks:
                    inter, within = _fit_banks(take(z_tr, k), g_tr, y_tr,
                                               classifier)
                    _, pred = _predict_banks(inter, within, take(z_te, k))
                    pts.append((k, recognition_rate(y_te, pred)))
                curves[(channel, selector, classifier)] = pts

    fs_dep = _select_features(f_tr, y_tr, config.selector
                              if config.selector != "pca" else "mrmr",
                              config.w_star, config.bins)
    model = train_hier(train, table, stats, profile, fs_dep,
                       config.classifier)
    rate, pred, truth = evaluate_model(model, test)
    g_pred, _ = hier_classify_batch(model, test.power, test.em)
    g_rate = recognition_rate(test.group_ids, g_pred)

    sizes = [len(g) for g in table.groups]
    return OfflineReport(
        seed=config.seed, window=config.window, w_star=config.w_star,
        n_train=train.n_records, n_test=test.n_records,
        alpha_mean=float(np.mean(profile.alphas)), curves=curves,
        deploy_rate=rate, deploy_group_rate=g_rate,
        confusion=confusion_matrix(truth, pred, table.labels),
        hier_count=count_classifiers(sizes, "hierarchical"),
        flat_count=count_classifiers(sizes, "flat"), model=model)


# -- timeline -----------------------------------------------------------------

TIMELINE_POINTS = 6
ADAPT_AFTER = (1, 3, 5)
REBOOT_AFTER = (2, 4)


@dataclass
class TimelineReport:
    seed: int
    theta: float
    rates: dict          # mode -> benchmark -> [rate per point]
    mean_rates: dict     # mode -> [rate per point]
    confusions: dict     # mode -> [ConfusionMatrix per point]
    logs: dict           # mode -> benchmark -> [AdjustRecord]
    budget: CycleBudget


def run_timeline(config: RunConfig) -> TimelineReport:
    """Benchmark recognition at six points with reboots after points 2
    and 4 and self-adjustment after points 1, 3, and 5.

    Both modes follow the same program in the same boot sessions, but
    each observes it through its own capture chain: the offline mode at
    the reference noise floor, the real-time mode through a front end
    ``rt_noise_scale`` times noisier. Templates are profiled once on the
    reference chain and deployed to both, so the real-time mode carries
    a train/deploy mismatch on top of quantized mean-only arithmetic.

    Each boot session's probe windows are captured once and both of its
    checkpoints are scored on them, so the before/after comparison within
    a session is paired. Adjustment batches come from separate streams
    and never overlap the probes.
    """
    table = AVR_TABLE
    sim = simulator_from(config)
    sim_rt = sim if config.rt_noise_scale == 1.0 else \
        simulator_from(config, noise_scale=config.rt_noise_scale)
    session0 = Session.initial(config.seed)
    train = gen_dataset(table.labels, config.n_per_class, session0, sim)

    stats = fit_normalizer(train)
    p = normalize(train.power, stats, 0)
    e = normalize(train.em, stats, 1)
    y = global_label_ids(train, table)
    profile = fit_combine_profile(p, e, y)
    fused = combine_arrays(p, e, profile)

    k_rank = min(max(config.w_star, config.realtime_w_star), config.window)
    ranking = mrmr_select(fused, y, k_rank, config.bins)
    base_off = train_hier(train, table, stats, profile,
                          ranking.head(min(config.w_star, k_rank)),
                          config.classifier)
    base_rt = train_hier(train, table, stats, profile, ranking,
                         config.classifier)

    theta = config.theta if config.theta is not None else \
        default_theta(config.batch_size, config.n_per_class)
    budget = cycle_budget(config.realtime_w_star, table.n_groups,
                          max(len(g) for g in table.groups),
                          config.sampling_ratio, config.clock_hz)

    rates = {"offline": {}, "realtime": {}}
    logs = {"offline": {}, "realtime": {}}
    point_pairs = {m: [([], []) for _ in range(TIMELINE_POINTS)]
                   for m in ("offline", "realtime")}

    for bench in config.benchmarks:
        program = make_program(bench, sim, length=config.eval_windows)
        adapt_prog = program[:config.batch_size] if \
            len(program) >= config.batch_size else \
            make_program(bench, sim, length=config.batch_size)
        m_off = base_off.copy()
        fixed = quantize_model(base_rt, config.q)
        state_off = AdaptState(theta, "mean_cov", config.batch_size)
        state_rt = AdaptState(theta, "mean", config.batch_size)
        r_off, r_rt = [], []
        log_off, log_rt = [], []
        session = reboot(session0, sim)
        step = 0
        for point in range(1, TIMELINE_POINTS + 1):
            probe_key = f"probe{session.session_id}"
            evalset = gen_benchmark(program, session, sim,
                                    stream_key=probe_key)
            evalset_rt = gen_benchmark(program, session, sim_rt,
                                       stream_key=probe_key)
            truth = global_label_ids(evalset, table)
            _, pred_o = hier_classify_batch(m_off, evalset.power, evalset.em)
            _, pred_r = fixed_hier_classify_batch(base_rt, fixed,
                                                  evalset_rt.power,
                                                  evalset_rt.em)
            r_off.append(recognition_rate(truth, pred_o))
            r_rt.append(recognition_rate(truth, pred_r))
            point_pairs["offline"][point - 1][0].append(truth)
            point_pairs["offline"][point - 1][1].append(pred_o)
            point_pairs["realtime"][point - 1][0].append(truth)
            point_pairs["realtime"][point - 1][1].append(pred_r)
            if point in ADAPT_AFTER:
                batch = gen_benchmark(adapt_prog, session, sim,
                                      stream_key=f"adapt{point}")
                batch_rt = gen_benchmark(adapt_prog, session, sim_rt,
                                         stream_key=f"adapt{point}")
                log_off += adapt_batch(m_off, batch.power, batch.em,
                                       state_off, start_step=step)
                log_rt += adapt_batch_fixed(base_rt, fixed, batch_rt.power,
                                            batch_rt.em, state_rt,
                                            start_step=step)
                step += batch.n_records
            elif point in REBOOT_AFTER:
                session = reboot(session, sim)
        rates["offline"][bench] = r_off
        rates["realtime"][bench] = r_rt
        logs["offline"][bench] = log_off
        logs["realtime"][bench] = log_rt

    mean_rates = {m: [float(np.mean([rates[m][b][i] for b in config.benchmarks]))
                      for i in range(TIMELINE_POINTS)]
                  for m in ("offline", "realtime")}
    confusions = {m: [confusion_matrix(np.concatenate(t), np.concatenate(p),
                                       table.labels)
                      for t, p in point_pairs[m]]
                  for m in ("offline", "realtime")}
    return TimelineReport(config.seed, theta, rates, mean_rates, confusions,
                          logs, budget)


# -- sampling sweep -----------------------------------------------------------

@dataclass
class SweepReport:
    seed: int
    entries: list  # (points per cycle, window, w_star, rate)

    @property
    def rates(self):
        return [r for _, _, _, r in self.entries]


def sampling_sweep(config: RunConfig, points_per_cycle=None) -> SweepReport:
    """Full pipeline accuracy as the sampler density varies; the
    underlying continuous signatures stay fixed, only the grid moves."""
    ppcs = sorted(set(points_per_cycle or config.sweep_points))
    if not ppcs or ppcs[0] < 1:
        raise ConfigError("sweep_points: need positive points-per-cycle")
    entries = []
    for ppc in ppcs:
        w = 2 * ppc  # window spans two instruction cycles
        sim = simulator_from(config, window=w)
        data = gen_dataset(AVR_TABLE.labels, config.n_per_class,
                           Session.initial(config.seed), sim)
        train, test = split_dataset(data, 0.1, config.seed)
        k = min(config.w_star, w)
        sub = RunConfig(**{**_cfg_kwargs(config), "window": w, "w_star": k,
                           "realtime_w_star": min(config.realtime_w_star, w),
                           "feature_counts": (k,)})
        model = fit_pipeline(train, sub, w_star=k)
        rate, _, _ = evaluate_model(model, test)
        entries.append((ppc, w, k, rate))
    return SweepReport(config.seed, entries)


def _cfg_kwargs(config: RunConfig) -> dict:
    return {f.name: getattr(config, f.name) for f in fields(config)}


# -- report emission ----------------------------------------------------------

def write_offline_csv(report: OfflineReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("channel", "selector", "classifier", "features", "rate"))
        for (ch, sel, clf), pts in sorted(report.curves.items()):
            for k, rate in pts:
                w.writerow((ch, sel, clf, k, repr(rate)))


def write_timeline_csv(report: TimelineReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("mode", "benchmark", "point", "rate"))
        for mode in sorted(report.rates):
            for bench in report.rates[mode]:
                for i, rate in enumerate(report.rates[mode][bench], 1):
                    w.writerow((mode, bench, i, repr(rate)))
        for mode in sorted(report.mean_rates):
            for i, rate in enumerate(report.mean_rates[mode], 1):
                w.writerow((mode, "(mean)", i, repr(rate)))


def write_sweep_csv(report: SweepReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("points_per_cycle", "window", "w_star", "rate"))
        for ppc, window, k, rate in report.entries:
            w.writerow((ppc, window, k, repr(rate)))


def write_confusion_csv(cm: ConfusionMatrix, path) -> None:
    """Row-normalized rates, rows and columns in label-table order."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("label",) + tuple(cm.labels))
        for i, label in enumerate(cm.labels):
            w.writerow((label,) + tuple(repr(float(r))
                                        for r in cm.rates[i]))
