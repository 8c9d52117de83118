import csv

import numpy as np
import pytest

from scdisasm.config import RunConfig
from scdisasm.errors import ConfigError, EmptyInput, LengthMismatch
from scdisasm.harness import (ADAPT_AFTER, REBOOT_AFTER, TIMELINE_POINTS,
                              confusion_matrix, cycle_budget,
                              recognition_rate, run_offline, run_timeline,
                              sampling_sweep, simulator_from,
                              write_confusion_csv, write_offline_csv,
                              write_sweep_csv, write_timeline_csv)


@pytest.fixture(scope="module")
def micro_cfg():
    return RunConfig(window=64, n_per_class=12, w_star=12,
                     realtime_w_star=16, bins=16, batch_size=40,
                     eval_windows=60, benchmarks=("timeloop",),
                     feature_counts=(4, 8, 12), sweep_points=(4, 8),
                     seed=13, theta=0.01)


@pytest.fixture(scope="module")
def timeline(micro_cfg):
    return run_timeline(micro_cfg)


@pytest.fixture(scope="module")
def offline(small_cfg):
    return run_offline(small_cfg, channels=("fused",),
                       selectors=("filter",), classifiers=("qda",))


class TestCycleBudget:
    def test_default_stage_costs(self):
        b = cycle_budget(70, 8, 20, 160, 160e6)
        assert b.stages == {"combine": 10, "inter": 40, "within": 40,
                            "sort": 20, "adjust": 10}
        assert b.total == 120
        assert b.deadline == 160
        assert b.real_time
        assert b.throughput == pytest.approx(160e6 / 120)

    def test_deadline_boundary_is_inclusive(self):
        stages = {"only": 160}
        assert cycle_budget(50, 8, 20, 160, stage_cycles=stages).real_time
        stages = {"only": 161}
        assert not cycle_budget(50, 8, 20, 160,
                                stage_cycles=stages).real_time

    @pytest.mark.parametrize("args", [(0, 8, 20, 160), (50, 0, 20, 160),
                                      (50, 8, 0, 160), (50, 8, 20, 0)])
    def test_positive_inputs_required(self, args):
        with pytest.raises(ValueError):
            cycle_budget(*args)

    def test_clock_must_be_positive(self):
        with pytest.raises(ValueError):
            cycle_budget(50, 8, 20, 160, clock_hz=0.0)


class TestMetrics:
    def test_confusion_counts_and_rates(self):
        truth = [0, 0, 1, 1, 2]
        pred = [0, 1, 1, 1, 0]
        cm = confusion_matrix(truth, pred, ("a", "b", "c"))
        assert cm.counts.sum() == 5
        assert cm.counts[0].tolist() == [1, 1, 0]
        assert cm.counts[1].tolist() == [0, 2, 0]
        assert np.allclose(cm.rates[1], [0, 1, 0])
        assert cm.accuracy == pytest.approx(3 / 5)

    def test_absent_class_row_stays_zero(self):
        cm = confusion_matrix([0, 0], [0, 1], ("a", "b"))
        assert np.all(cm.rates[1] == 0)
        assert np.allclose(cm.rates.sum(axis=1), [1, 0])

    def test_confusion_input_validation(self):
        with pytest.raises(EmptyInput):
            confusion_matrix([], [], ("a",))
        with pytest.raises(LengthMismatch):
            confusion_matrix([0, 1], [0], ("a", "b"))
        with pytest.raises(LengthMismatch):
            confusion_matrix([0, 5], [0, 1], ("a", "b"))

    def test_recognition_rate(self):
        assert recognition_rate([1, 2, 3], [1, 2, 0]) == pytest.approx(2 / 3)
        with pytest.raises(EmptyInput):
            recognition_rate([], [])


class TestSimulatorFrom:
    def test_window_override(self, small_cfg):
        assert simulator_from(small_cfg).window == small_cfg.window
        assert simulator_from(small_cfg, window=32).window == 32

    def test_noise_scale_inflates_floor(self, small_cfg):
        base = simulator_from(small_cfg)
        noisy = simulator_from(small_cfg, noise_scale=1.5)
        assert np.allclose(noisy.noise, 1.5 * base.noise)
        # only the white noise floor moves, not the signatures
        assert np.array_equal(noisy.sig, base.sig)


class TestRunOffline:
    def test_report_shape(self, offline, small_cfg):
        assert offline.seed == small_cfg.seed
        assert offline.w_star == small_cfg.w_star
        assert set(offline.curves) == {("fused", "filter", "qda")}
        pts = offline.curves[("fused", "filter", "qda")]
        assert [k for k, _ in pts] == sorted(small_cfg.feature_counts)
        assert all(0.0 <= r <= 1.0 for _, r in pts)

    def test_classifier_counts(self, offline):
        assert offline.hier_count == 568
        assert offline.flat_count == 3655

    def test_deployment_metrics_consistent(self, offline):
        assert offline.confusion.accuracy == pytest.approx(
            offline.deploy_rate)
        # coarse level can only merge errors, never add them
        assert offline.deploy_group_rate >= offline.deploy_rate
        assert 0.0 <= offline.alpha_mean <= 1.0

    def test_split_sizes(self, offline, small_cfg):
        total = 86 * small_cfg.n_per_class
        assert offline.n_train + offline.n_test == total


class TestRunTimeline:
    def test_schedule_constants(self):
        assert TIMELINE_POINTS == 6
        assert set(ADAPT_AFTER) & set(REBOOT_AFTER) == set()
        assert ADAPT_AFTER == (1, 3, 5)
        assert REBOOT_AFTER == (2, 4)

    def test_report_structure(self, timeline, micro_cfg):
        assert set(timeline.rates) == {"offline", "realtime"}
        for mode in ("offline", "realtime"):
            assert set(timeline.rates[mode]) == set(micro_cfg.benchmarks)
            for series in timeline.rates[mode].values():
                assert len(series) == TIMELINE_POINTS
                assert all(0.0 <= r <= 1.0 for r in series)
            assert len(timeline.mean_rates[mode]) == TIMELINE_POINTS
            assert len(timeline.confusions[mode]) == TIMELINE_POINTS

    def test_theta_comes_from_config(self, timeline, micro_cfg):
        assert timeline.theta == micro_cfg.theta

    def test_adapt_logs_cover_three_batches(self, timeline, micro_cfg):
        for mode in ("offline", "realtime"):
            log = timeline.logs[mode]["timeloop"]
            assert len(log) == len(ADAPT_AFTER) * micro_cfg.batch_size
            assert [r.step for r in log] == list(range(len(log)))
        assert all(r.mode == "mean_cov"
                   for r in timeline.logs["offline"]["timeloop"])
        rt = timeline.logs["realtime"]["timeloop"]
        assert all(r.mode == "mean" and not r.cov_updated for r in rt)

    def test_budget_attached(self, timeline, micro_cfg):
        assert timeline.budget.real_time
        assert timeline.budget.w_star == micro_cfg.realtime_w_star

    def test_deterministic_replay(self, timeline, micro_cfg):
        again = run_timeline(micro_cfg)
        assert again.rates == timeline.rates
        assert again.mean_rates == timeline.mean_rates


class TestSamplingSweep:
    def test_entries_follow_grid(self, small_cfg):
        rep = sampling_sweep(small_cfg, points_per_cycle=(4, 8))
        assert [(ppc, w) for ppc, w, _, _ in rep.entries] == [(4, 8),
                                                              (8, 16)]
        for ppc, w, k, rate in rep.entries:
            assert k == min(small_cfg.w_star, w)
            assert 0.0 <= rate <= 1.0
        assert rep.rates == [e[3] for e in rep.entries]

    def test_bad_grid_rejected(self, small_cfg):
        with pytest.raises(ConfigError):
            sampling_sweep(small_cfg, points_per_cycle=(0, 4))


class TestCsvWriters:
    def test_offline_csv(self, offline, tmp_path):
        path = tmp_path / "offline.csv"
        write_offline_csv(offline, path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["channel", "selector", "classifier", "features",
                           "rate"]
        pts = offline.curves[("fused", "filter", "qda")]
        assert len(rows) == 1 + len(pts)
        assert float(rows[1][4]) == pts[0][1]

    def test_timeline_csv(self, timeline, micro_cfg, tmp_path):
        path = tmp_path / "timeline.csv"
        write_timeline_csv(timeline, path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        n_bench = len(micro_cfg.benchmarks)
        assert len(rows) == 1 + 2 * (n_bench + 1) * TIMELINE_POINTS
        mean_rows = [r for r in rows[1:] if r[1] == "(mean)"]
        got = [float(r[3]) for r in mean_rows if r[0] == "offline"]
        assert got == timeline.mean_rates["offline"]

    def test_sweep_csv(self, small_cfg, tmp_path):
        rep = sampling_sweep(small_cfg, points_per_cycle=(4,))
        path = tmp_path / "sweep.csv"
        write_sweep_csv(rep, path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 2
        assert float(rows[1][3]) == rep.entries[0][3]

    def test_confusion_csv(self, timeline, tmp_path):
        cm = timeline.confusions["offline"][0]
        path = tmp_path / "confusion.csv"
        write_confusion_csv(cm, path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 1 + len(cm.labels)
        assert rows[0][1:] == list(cm.labels)
        back = np.array([[float(v) for v in row[1:]] for row in rows[1:]])
        assert np.array_equal(back, cm.rates)
