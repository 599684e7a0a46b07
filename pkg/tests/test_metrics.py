import numpy as np
import pytest
from scipy.stats import kstest

import oracles
from oracles import random_instance
from minority_guidance.metrics import avg_knn, histogram, improved_precision_recall, knn, lof


class TestAvgKnn:
    def test_examples(self):
        np.testing.assert_allclose(avg_knn(np.array([[0.0], [1.0], [3.0]]), k=2), [2.0, 1.5, 2.5])
        np.testing.assert_allclose(avg_knn(np.array([[0.0], [5.0], [6.0]]), k=1), [5.0, 1.0, 1.0])

    def test_identical(self):
        np.testing.assert_array_equal(avg_knn(np.ones((6, 2)), k=3), 0.0)

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            avg_knn(np.zeros((5, 2)), k=5)

    def test_reference(self):
        np.testing.assert_allclose(avg_knn(np.array([[0.0]]), k=2, reference=np.array([[1.0], [-3.0]])), [2.0])


class TestKnn:
    def test_ties_broken_by_index(self):
        ref = np.array([[1.0], [-1.0], [1.0], [-1.0]])
        _, idx = knn(np.zeros((1, 1)), ref, 3)
        assert idx.tolist() == [[0, 1, 2]]

    def test_exclude_self(self):
        x = np.array([[0.0], [0.0], [2.0]])
        d, idx = knn(x, x, 1, exclude_self=True)
        assert idx[:, 0].tolist() == [1, 0, 0]
        np.testing.assert_array_equal(d[:, 0], [0.0, 0.0, 2.0])


class TestLof:
    def test_identical_points(self):
        np.testing.assert_array_equal(lof(np.zeros((30, 2)), k=5), 1.0)

    def test_grid_interior(self):
        g = np.stack(np.meshgrid(np.arange(15.0), np.arange(15.0)), -1).reshape(-1, 2)
        v = lof(g, k=20)
        interior = np.all((g >= 3) & (g <= 11), axis=1)
        assert np.all((v[interior] >= 0.8) & (v[interior] <= 1.2))
        np.testing.assert_allclose(v, oracles.lof(g, 20), rtol=1e-12)

    def test_displaced_point(self):
        rng = np.random.default_rng(0)
        cluster = rng.uniform(-0.5, 0.5, (40, 2))
        diam = max(np.linalg.norm(a - b) for a in cluster for b in cluster)
        x = np.vstack([cluster, [[10 * diam, 0.0]]])
        v = lof(x, k=20)
        assert v[-1] > 1.5 and np.argmax(v) == 40

    def test_novelty_matches_oracle(self):
        rng = np.random.default_rng(1)
        ref, q = rng.standard_normal((50, 2)), rng.standard_normal((15, 2)) * 2
        np.testing.assert_allclose(lof(q, k=7, reference=ref), oracles.lof_novelty(q, ref, 7), rtol=1e-12)

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            lof(np.zeros((5, 2)), k=5)


class TestPrecisionRecall:
    def test_identical_sets(self):
        x = np.random.default_rng(0).standard_normal((30, 2))
        assert improved_precision_recall(x, x, k=5) == (1.0, 1.0)

    def test_displaced(self):
        x = np.random.default_rng(0).standard_normal((30, 2))
        assert improved_precision_recall(x, x + 100.0, k=5)[0] == 0.0

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            improved_precision_recall(np.zeros((5, 2)), np.ones((10, 2)), k=5)


@pytest.mark.parametrize("seed", range(50))
def test_oracle_equivalence(seed):
    x = random_instance(seed)
    rng = np.random.default_rng(1000 + seed)
    k = int(rng.integers(1, min(20, len(x) - 1) + 1))
    # neighbour sets and coverage decisions are exact; real values differ only by summation order
    assert knn(x, x, k, exclude_self=True)[1].tolist() == oracles.knn_indices(x, k)
    np.testing.assert_allclose(avg_knn(x, k), oracles.avg_knn(x, k), rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(lof(x, k), oracles.lof(x, k), rtol=1e-12)
    y = random_instance(seed + 500)[:, : x.shape[1]]
    if y.shape[1] < x.shape[1]:
        y = np.hstack([y, np.zeros((len(y), x.shape[1] - y.shape[1]))])
    kp = min(k, len(y) - 1)
    assert improved_precision_recall(x, y, kp) == oracles.precision_recall(x, y, kp)


def _rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@pytest.mark.parametrize("seed", range(5))
def test_rigid_motion_invariance(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((40, 2)), rng.standard_normal((35, 2))
    R, shift = _rotation(rng.uniform(0, 2 * np.pi)), rng.uniform(-5, 5, 2)
    xm, ym = x @ R.T + shift, y @ R.T + shift
    np.testing.assert_allclose(avg_knn(xm, 5), avg_knn(x, 5), rtol=1e-12)
    np.testing.assert_allclose(lof(xm, 10), lof(x, 10), rtol=1e-10)
    assert improved_precision_recall(xm, ym, 5) == improved_precision_recall(x, y, 5)


def test_scale_covariance():
    rng = np.random.default_rng(7)
    x, y = rng.standard_normal((40, 2)), rng.standard_normal((35, 2))
    c = 4.0  # power of two keeps the scaling exact
    np.testing.assert_allclose(avg_knn(c * x, 5), c * avg_knn(x, 5), rtol=1e-14)
    np.testing.assert_allclose(lof(c * x, 10), lof(x, 10), rtol=1e-12)
    assert improved_precision_recall(c * x, c * y, 5) == improved_precision_recall(x, y, 5)


class TestHistogram:
    def test_single_value(self):
        edges, dens = histogram([2.5], 1)
        assert len(edges) == 2 and dens[0] * (edges[1] - edges[0]) == pytest.approx(1.0)

    def test_normalised(self):
        v = np.random.default_rng(0).exponential(size=500)
        for bins in (1, 7, 50):
            edges, dens = histogram(v, bins)
            assert np.sum(dens * np.diff(edges)) == pytest.approx(1.0)
            assert edges[0] == v.min() and edges[-1] == v.max()

    def test_uniform_flat(self):
        v = np.random.default_rng(1).uniform(size=20_000)
        edges, dens = histogram(v, 20)
        assert np.max(np.abs(dens - 1.0)) < 0.15
        # empirical CDF from the histogram against the uniform CDF
        cdf = np.concatenate([[0.0], np.cumsum(dens * np.diff(edges))])
        assert np.max(np.abs(cdf - edges)) < 0.02
        assert kstest(v, "uniform").pvalue > 0.01

    def test_errors(self):
        with pytest.raises(ValueError):
            histogram([], 3)
        with pytest.raises(ValueError):
            histogram([1.0], 0)
