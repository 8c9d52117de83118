import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scdisasm.infomath import ClassStats, mi_gaussian
from scdisasm.fuse import (CombineProfile, check_improvement, combine_arrays,
                           fit_combine_profile, fused_class_stats,
                           solve_alpha_star, v_alpha)


def _stats(means, sigmas, priors=None):
    means = np.asarray(means, float)
    sigmas = np.asarray(sigmas, float)
    priors = (np.full(means.size, 1.0 / means.size)
              if priors is None else np.asarray(priors, float))
    mu = priors @ means
    var = priors @ (sigmas**2 + means**2) - mu**2
    return ClassStats(np.sqrt(var), sigmas, means, priors)


def _rand_pair(rng, n_classes=3):
    a = _stats(rng.uniform(0.3, 0.7, n_classes),
               rng.uniform(0.02, 0.1, n_classes))
    b = _stats(rng.uniform(0.3, 0.7, n_classes),
               rng.uniform(0.02, 0.1, n_classes))
    return a, b


class TestFusedStats:
    def test_mixture_identity_holds(self, rng):
        sp, se = _rand_pair(rng)
        for alpha in (0.0, 0.3, 0.5, 0.9, 1.0):
            f = fused_class_stats(sp, se, alpha)
            mu = f.priors @ f.class_means
            var = f.priors @ (f.class_sigmas**2 + f.class_means**2) - mu**2
            assert f.sigma**2 == pytest.approx(var, rel=1e-9)

    def test_boundaries_recover_single_channels(self, rng):
        sp, se = _rand_pair(rng)
        assert np.allclose(fused_class_stats(sp, se, 1.0).class_means,
                           sp.class_means)
        assert np.allclose(fused_class_stats(sp, se, 0.0).class_means,
                           se.class_means)


class TestAlphaStar:
    def test_interchangeable_channels_give_half(self):
        s = _stats([0.4, 0.6], [0.05, 0.05])
        assert solve_alpha_star(s, s) == pytest.approx(0.5)

    def test_result_in_unit_interval(self, rng):
        for _ in range(20):
            sp, se = _rand_pair(rng)
            assert 0.0 <= solve_alpha_star(sp, se) <= 1.0

    def test_beats_001_grid(self, rng):
        grid = np.arange(0.0, 1.0001, 0.01)
        for _ in range(15):
            sp, se = _rand_pair(rng)
            a = solve_alpha_star(sp, se)
            best = max(mi_gaussian(fused_class_stats(sp, se, g))
                       for g in grid)
            assert mi_gaussian(fused_class_stats(sp, se, a)) >= best - 1e-9

    def test_never_loses_to_single_channel(self, rng):
        for _ in range(25):
            sp, se = _rand_pair(rng)
            a = solve_alpha_star(sp, se)
            fused = mi_gaussian(fused_class_stats(sp, se, a))
            assert fused >= mi_gaussian(sp) - 1e-6
            assert fused >= mi_gaussian(se) - 1e-6
            assert check_improvement(sp, se, a)

    def test_v_vanishes_for_identical_channels(self):
        s = _stats([0.4, 0.6], [0.05, 0.05])
        for alpha in (0.2, 0.5, 0.8):
            assert v_alpha(alpha, s, s) == pytest.approx(0.0, abs=1e-12)


def _profile(alphas):
    z = np.zeros_like(np.asarray(alphas, float))
    return CombineProfile(alphas, z, z, z)


class TestCombine:
    def test_alpha_one_returns_power(self, rng):
        p = rng.random((5, 4))
        e = rng.random((5, 4))
        assert np.allclose(combine_arrays(p, e, _profile(np.ones(4))), p)

    def test_alpha_zero_returns_em(self, rng):
        p = rng.random((5, 4))
        e = rng.random((5, 4))
        assert np.allclose(combine_arrays(p, e, _profile(np.zeros(4))), e)

    def test_convexity_per_index(self, rng):
        p = rng.random((5, 4))
        e = rng.random((5, 4))
        alphas = np.array([0.2, 0.4, 0.6, 0.8])
        z = combine_arrays(p, e, _profile(alphas))
        assert np.allclose(z, alphas * p + (1 - alphas) * e)

    def test_fit_profile_on_mirrored_channels_centers(self, rng):
        # identical information on both sides: no weight preference
        x = np.repeat(rng.random((400, 1)), 3, axis=1)
        noise = rng.normal(0, 0.02, (2, 400, 3))
        labels = (x[:, 0] > 0.5).astype(int)
        prof = fit_combine_profile(np.clip(x + noise[0], 0, 1),
                                   np.clip(x + noise[1], 0, 1), labels)
        assert prof.alphas.shape == (3,)
        assert np.all((prof.alphas > 0.2) & (prof.alphas < 0.8))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_fused_sigma_never_negative(seed, alpha):
    rng = np.random.default_rng(seed)
    sp, se = _rand_pair(rng)
    f = fused_class_stats(sp, se, alpha)
    assert f.sigma >= 0.0
    assert np.all(f.class_sigmas >= 0.0)
