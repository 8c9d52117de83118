"""Shared fixtures: one small trained pipeline reused across test files.

The fixtures favor speed over realism (86 classes but short windows and
thin training); accuracy-sensitive checks live in test_acceptance.py
with their own full-size configs.
"""
import numpy as np
import pytest

from scdisasm.classify import quantize_model, train_hier
from scdisasm.config import RunConfig
from scdisasm.featsel import mrmr_select
from scdisasm.fuse import combine_arrays, fit_combine_profile
from scdisasm.harness import (simulate_templates, split_dataset,
                              global_label_ids)
from scdisasm.leaksim import AVR_TABLE
from scdisasm.tracekit import fit_normalizer, normalize


@pytest.fixture(scope="session")
def table():
    return AVR_TABLE


@pytest.fixture(scope="session")
def small_cfg():
    return RunConfig(window=64, n_per_class=30, w_star=16,
                     realtime_w_star=20, bins=16, batch_size=60,
                     eval_windows=120, feature_counts=(4, 8, 16),
                     sweep_points=(4, 8),
                     benchmarks=("timeloop", "matrix"), seed=11)


@pytest.fixture(scope="session")
def small_data(small_cfg):
    return simulate_templates(small_cfg)


@pytest.fixture(scope="session")
def small_split(small_data, small_cfg):
    return split_dataset(small_data, 0.1, small_cfg.seed)


@pytest.fixture(scope="session")
def small_model(small_split, small_cfg, table):
    train, _ = small_split
    stats = fit_normalizer(train)
    p = normalize(train.power, stats, 0)
    e = normalize(train.em, stats, 1)
    y = global_label_ids(train, table)
    profile = fit_combine_profile(p, e, y)
    fused = combine_arrays(p, e, profile)
    ranking = mrmr_select(fused, y, small_cfg.w_star, small_cfg.bins)
    return train_hier(train, table, stats, profile, ranking,
                      small_cfg.classifier)


@pytest.fixture(scope="session")
def small_fixed(small_model, small_cfg):
    return quantize_model(small_model, small_cfg.q)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
