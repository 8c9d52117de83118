import itertools

import numpy as np
import pytest

from scdisasm.errors import InsufficientFeatures
from scdisasm.featsel import (FeatureSet, filter_select, gini_select,
                              mrmr_select, pca_fit, pca_project)
from scdisasm.infomath import mi_histogram, redundancy


def _duplicate_construction(rng, n=1200):
    """Three features: strong f0, near-duplicate f1, weaker independent f2.

    A pure relevance ranking takes the duplicate second; a
    redundancy-penalized one must skip to the independent feature.
    """
    labels = rng.integers(0, 2, n)
    f0 = np.clip(0.3 + 0.4 * labels + rng.normal(0, 0.05, n), 0, 1)
    f1 = np.clip(f0 + rng.normal(0, 0.01, n), 0, 1)
    f2 = np.clip(0.4 + 0.2 * labels + rng.normal(0, 0.06, n), 0, 1)
    return np.column_stack([f0, f1, f2]), labels


def _mid_oracle(x, labels, first, bins):
    """Brute-force second pick: relevance minus mean redundancy with the
    already-selected feature, maximized over the leftovers."""
    best, best_score = None, -np.inf
    for j in range(x.shape[1]):
        if j == first:
            continue
        score = (mi_histogram(x[:, j], labels, bins)
                 - redundancy(x[:, j], x[:, first], bins))
        if score > best_score:
            best, best_score = j, score
    return best


class TestDuplicateConstruction:
    def test_mrmr_skips_duplicate_filter_takes_it(self, rng):
        x, labels = _duplicate_construction(rng)
        m = mrmr_select(x, labels, 2, bins=16).indices
        f = filter_select(x, labels, 2, bins=16).indices
        assert set(f) == {0, 1}
        assert set(m) == {m[0], 2}
        assert m[0] in (0, 1)

    def test_mrmr_second_pick_matches_brute_force(self, rng):
        x, labels = _duplicate_construction(rng)
        m = mrmr_select(x, labels, 2, bins=16).indices
        assert m[1] == _mid_oracle(x, labels, m[0], 16)


class TestFeatureSet:
    def test_head_prefix(self):
        fs = FeatureSet(np.array([4, 2, 7]), np.array([0.5, 0.4, 0.3]),
                        "mrmr")
        assert np.array_equal(fs.head(2).indices, [4, 2])
        with pytest.raises(InsufficientFeatures):
            fs.head(99)

    def test_duplicate_indices_rejected(self):
        with pytest.raises(ValueError):
            FeatureSet(np.array([1, 1]), np.array([0.2, 0.1]), "mrmr")

    def test_budget_exceeding_features_rejected(self, rng):
        x = rng.random((50, 4))
        labels = rng.integers(0, 2, 50)
        with pytest.raises(InsufficientFeatures):
            mrmr_select(x, labels, 5, bins=8)


class TestSelectors:
    def test_rankings_are_permutations(self, rng):
        x = rng.random((300, 6))
        labels = rng.integers(0, 3, 300)
        for select in (mrmr_select, filter_select):
            fs = select(x, labels, 6, bins=8)
            assert sorted(fs.indices.tolist()) == list(range(6))

    def test_gini_prefers_separating_feature(self, rng):
        labels = rng.integers(0, 2, 800)
        strong = np.clip(0.2 + 0.6 * labels + rng.normal(0, 0.05, 800), 0, 1)
        x = np.column_stack([rng.random(800), strong, rng.random(800)])
        assert gini_select(x, labels, 1).indices[0] == 1

    def test_filter_orders_by_relevance(self, rng):
        x = rng.random((400, 5))
        labels = (x[:, 3] > 0.5).astype(int)
        fs = filter_select(x, labels, 5, bins=8)
        assert fs.indices[0] == 3
        assert np.all(np.diff(fs.scores) <= 1e-12)


class TestPca:
    def test_components_orthonormal(self, rng):
        x = rng.normal(size=(200, 8))
        proj = pca_fit(x, 4)
        gram = proj.components @ proj.components.T
        assert np.allclose(gram, np.eye(4), atol=1e-9)

    def test_projection_shape_and_centering(self, rng):
        x = rng.normal(size=(200, 8))
        proj = pca_fit(x, 3)
        z = pca_project(x, proj)
        assert z.shape == (200, 3)
        assert np.allclose(z.mean(axis=0), 0.0, atol=1e-9)

    def test_first_component_carries_most_variance(self, rng):
        x = rng.normal(size=(500, 6))
        x[:, 2] *= 9.0
        z = pca_project(x, pca_fit(x, 6))
        variances = z.var(axis=0)
        assert np.all(np.diff(variances) <= 1e-9)
        assert variances[0] == pytest.approx(x.var(axis=0).max(), rel=0.1)
