import numpy as np
import pytest

from scdisasm.errors import UnknownInstruction
from scdisasm.leaksim import (AVR_TABLE, BENCHMARK_LENGTHS, LeakModel,
                              Session, gen_benchmark, gen_dataset,
                              make_program, reboot)

PAPER_GROUP_SIZES = (12, 10, 13, 20, 3, 2, 14, 12)


def _fast_model(**kw):
    args = dict(window=48, seed=3, dev_harmonics=8, base_harmonics=4)
    args.update(kw)
    return LeakModel.synthetic(**args)


class TestGroupTable:
    def test_counts(self, table):
        assert len(table.labels) == 86
        assert table.n_groups == 8
        assert table.sizes == PAPER_GROUP_SIZES

    def test_every_label_in_exactly_one_group(self, table):
        seen = [m for g in table.groups for m in g]
        assert len(seen) == len(set(seen)) == 86

    def test_group_of_agrees_with_membership(self, table):
        # group ids are 1-based
        for gi, group in enumerate(table.groups, start=1):
            for m in group:
                assert table.group_of(m) == gi

    def test_unknown_mnemonic_rejected(self, table):
        with pytest.raises(UnknownInstruction):
            table.group_of("frobnicate")


class TestSyntheticModel:
    def test_negative_noise_rejected(self):
        with pytest.raises(ValueError):
            _fast_model(noise_sigma=-0.1)
        with pytest.raises(ValueError):
            _fast_model(dc_wander=-0.01)

    def test_unknown_layout_rejected(self):
        with pytest.raises(ValueError):
            _fast_model(layout="sideways")

    def test_copy_layout_mirrors_channels(self):
        m = _fast_model(layout="copy", noise_sigma=0.0, dc_wander=0.0)
        d = gen_dataset(m.labels[:4], 3, Session.initial(3), m)
        assert np.allclose(d.power, d.em)

    def test_same_seed_same_tables(self):
        a, b = _fast_model(), _fast_model()
        assert np.array_equal(a.sig, b.sig)

    def test_seed_changes_tables(self):
        assert not np.array_equal(_fast_model().sig,
                                  _fast_model(seed=4).sig)


class TestGenDataset:
    def test_shapes_and_labels(self):
        m = _fast_model()
        d = gen_dataset(m.labels, 5, Session.initial(3), m)
        assert d.n_records == 86 * 5
        assert d.window == 48
        assert d.labels == m.labels
        assert np.bincount(d.instr_ids).tolist() == [5] * 86

    def test_deterministic(self):
        m = _fast_model()
        s = Session.initial(3)
        a = gen_dataset(m.labels[:6], 4, s, m)
        b = gen_dataset(m.labels[:6], 4, s, m)
        assert np.array_equal(a.power, b.power)
        assert np.array_equal(a.em, b.em)

    def test_session_offset_shifts_means(self):
        m = _fast_model(noise_sigma=0.01, dc_wander=0.0)
        base = gen_dataset(m.labels[:4], 20, Session.initial(3), m)
        shifted = gen_dataset(m.labels[:4], 20, Session(1, 0.2, -0.2, 3), m)
        assert shifted.power.mean() - base.power.mean() == pytest.approx(
            0.2, abs=0.02)
        assert shifted.em.mean() - base.em.mean() == pytest.approx(
            -0.2, abs=0.02)

    def test_wander_adds_common_mode_variance(self):
        # bleed off so neighbor draws cannot move the window mean
        quiet = _fast_model(noise_sigma=0.0, dc_wander=0.0, bleed=0.0)
        noisy = _fast_model(noise_sigma=0.0, dc_wander=0.05, bleed=0.0)
        s = Session.initial(3)
        dq = gen_dataset(quiet.labels[:1], 40, s, quiet)
        dn = gen_dataset(noisy.labels[:1], 40, s, noisy)
        # per-window mean jitter across records, one class
        assert dq.power.mean(axis=1).std() < 1e-6
        assert dn.power.mean(axis=1).std() == pytest.approx(0.05, rel=0.4)

    def test_zero_noise_windows_identical(self):
        m = _fast_model(noise_sigma=0.0, dc_wander=0.0, bleed=0.0)
        d = gen_dataset(m.labels[:2], 6, Session.initial(3), m)
        block = d.power[d.instr_ids == 0]
        assert np.allclose(block, block[0])


class TestPrograms:
    def test_known_benchmarks_have_lengths(self):
        m = _fast_model()
        for name, length in BENCHMARK_LENGTHS.items():
            assert len(make_program(name, m)) == length

    def test_unknown_benchmark_needs_length(self):
        m = _fast_model()
        with pytest.raises(UnknownInstruction):
            make_program("mystery", m)
        assert len(make_program("mystery", m, length=100)) == 100

    def test_loop_structure(self):
        m = _fast_model()
        prog = make_program("timeloop", m)
        body = prog[:24]
        for i, op in enumerate(prog):
            assert op == body[i % 24]
        assert len(set(prog)) <= 12

    def test_programs_differ_by_name_not_call(self):
        m = _fast_model()
        assert make_program("timeloop", m) == make_program("timeloop", m)
        assert make_program("timeloop", m) != make_program("ascii", m)

    def test_gen_benchmark_follows_program(self):
        m = _fast_model()
        prog = make_program("timeloop", m, length=50)
        d = gen_benchmark(prog, Session.initial(3), m, stream_key="t")
        assert d.n_records == 50
        named = [d.labels[i] for i in d.instr_ids]
        assert tuple(named) == prog

    def test_stream_key_changes_noise_not_labels(self):
        m = _fast_model()
        prog = make_program("timeloop", m, length=30)
        s = Session.initial(3)
        a = gen_benchmark(prog, s, m, stream_key="x")
        b = gen_benchmark(prog, s, m, stream_key="y")
        assert np.array_equal(a.instr_ids, b.instr_ids)
        assert not np.array_equal(a.power, b.power)


class TestReboot:
    def test_ids_increment_and_seed_sticks(self):
        m = _fast_model()
        s1 = reboot(Session.initial(9), m)
        assert (s1.session_id, s1.seed) == (1, 9)

    def test_offsets_at_full_spread(self):
        m = _fast_model(offset_spread=0.07)
        s1 = reboot(Session.initial(5), m)
        assert abs(s1.power_offset) == pytest.approx(0.07)
        assert abs(s1.em_offset) == pytest.approx(0.07)

    def test_consecutive_boots_never_repeat_sign_state(self):
        m = _fast_model(offset_spread=0.05)
        for seed in range(20):
            s = reboot(Session.initial(seed), m)
            for _ in range(5):
                nxt = reboot(s, m)
                assert (np.sign(nxt.offsets) != np.sign(s.offsets)).any()
                s = nxt

    def test_signs_marginally_balanced(self):
        m = _fast_model(offset_spread=0.05)
        firsts = [reboot(Session.initial(seed), m).power_offset
                  for seed in range(200)]
        assert 0.3 < np.mean(np.array(firsts) > 0) < 0.7

    def test_zero_spread_keeps_zero_offsets(self):
        m = _fast_model(offset_spread=0.0)
        s1 = reboot(Session.initial(4), m)
        assert s1.power_offset == s1.em_offset == 0.0

    def test_copy_layout_shares_one_sign(self):
        m = _fast_model(layout="copy", offset_spread=0.05)
        s = reboot(Session.initial(2), m)
        for _ in range(4):
            assert s.power_offset == s.em_offset
            s = reboot(s, m)
