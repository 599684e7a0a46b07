import numpy as np
import pytest

from minority_guidance import nn
from minority_guidance.diffusion import build_schedule, generate, make_plan
from minority_guidance.guidance import (ClassifierModel, GuidanceConfig, guided_generate, guided_score,
                                        mixed_density_score, train_classifier)
from minority_guidance.minority import OrdinalBinning, quantile_bins
from minority_guidance.scores import TIME_WIDTH, GaussianMixture, GmmScore, net_input
from oracles import central_diff, rel_err

SCHED = build_schedule()


def random_classifier(rng, d=2, L=4, hidden=(16, 16)):
    net = nn.init_mlp([d + TIME_WIDTH, *hidden, L], rng)
    for W in net.weights:
        W[...] = rng.standard_normal(W.shape) / np.sqrt(W.shape[0])
    return ClassifierModel(net, L, SCHED.T)


def exact_posterior_classifier(gmm: GaussianMixture, t: int):
    """Single affine layer whose logits equal log p(component | x_t) up to a constant at step ``t``.

    Needs equal component variances so the log posterior is linear in x.
    """
    assert np.allclose(gmm.variances, gmm.variances[0])
    a = SCHED.alpha(t)
    v = a * gmm.variances[0] + 1 - a
    m = np.sqrt(a) * gmm.means
    W = np.zeros((gmm.dim + TIME_WIDTH, len(gmm.weights)))
    W[: gmm.dim] = m.T / v
    b = np.log(gmm.weights) - np.sum(m * m, axis=1) / (2 * v)
    return ClassifierModel(nn.MLP([W], [b]), len(gmm.weights), SCHED.T)


class Constant:
    """Score provider returning a fixed vector."""

    def __init__(self, v):
        self.v = np.asarray(v, dtype=float)
        self.dim = len(self.v)

    def score(self, x, t):
        return np.broadcast_to(self.v, np.shape(x)).copy()


def test_config_validation():
    with pytest.raises(ValueError):
        GuidanceConfig(mode="other")
    with pytest.raises(ValueError):
        GuidanceConfig(scale=np.inf)
    with pytest.raises(ValueError):
        GuidanceConfig(target_class=-1)


class TestGuidedScore:
    def test_w_zero(self):
        clf = random_classifier(np.random.default_rng(0))
        prov = Constant([0.5, -1.0])
        x = np.ones((3, 2))
        np.testing.assert_array_equal(guided_score(prov, clf, x, 10, GuidanceConfig(1, 0.0)), prov.score(x, 10))

    def test_input_independent_classifier(self):
        clf = random_classifier(np.random.default_rng(1))
        clf.net.weights[0][:2] = 0.0
        prov = Constant([0.5, -1.0])
        x = np.random.default_rng(2).standard_normal((4, 2))
        np.testing.assert_allclose(guided_score(prov, clf, x, 10, GuidanceConfig(2, 7.0)), prov.score(x, 10),
                                   atol=1e-15)

    def test_target_out_of_range(self):
        clf = random_classifier(np.random.default_rng(0), L=3)
        with pytest.raises(ValueError):
            guided_score(Constant([0, 0]), clf, np.zeros(2), 5, GuidanceConfig(3, 1.0))
        with pytest.raises(ValueError):
            guided_score(Constant([0, 0]), clf, np.zeros(2), 5, GuidanceConfig(0, 1.0, "mixed"))

    def test_linear_in_scale(self):
        clf = random_classifier(np.random.default_rng(3))
        prov = Constant([0.2, 0.1])
        x = np.random.default_rng(4).standard_normal((5, 2))
        g = clf.log_prob_grad(x, 50, 1)
        for w1, w2 in [(0.5, 1.5), (2.0, 3.0)]:
            joint = guided_score(prov, clf, x, 50, GuidanceConfig(1, w1 + w2))
            np.testing.assert_allclose(joint, prov.score(x, 50) + (w1 + w2) * g, rtol=1e-14)
            sep = guided_score(prov, clf, x, 50, GuidanceConfig(1, w1)) + w2 * g
            np.testing.assert_allclose(joint, sep, rtol=1e-12)

    def test_midpoint_points_to_target(self):
        gmm = GaussianMixture([0.5, 0.5], [[-2.0], [2.0]], [0.3, 0.3])
        t = 200
        clf = exact_posterior_classifier(gmm, t)
        prov = GmmScore(gmm, SCHED)
        mid = np.zeros(1)
        assert prov.score(mid, t)[0] == pytest.approx(0.0, abs=1e-12)
        assert guided_score(prov, clf, mid, t, GuidanceConfig(1, 2.0))[0] > 0
        assert guided_score(prov, clf, mid, t, GuidanceConfig(0, 2.0))[0] < 0

    def test_exact_classifier_gradient_matches_closed_form(self):
        gmm = GaussianMixture([0.7, 0.3], [[-1.0], [1.5]], [0.5, 0.5])
        t = 400
        clf = exact_posterior_classifier(gmm, t)
        a = SCHED.alpha(t)
        v = a * 0.5 + 1 - a
        x = np.array([0.3])
        dens = [w * np.exp(-(x[0] - np.sqrt(a) * m[0]) ** 2 / (2 * v)) for w, m in zip(gmm.weights, gmm.means)]
        p1 = dens[1] / sum(dens)
        # d/dx log p1 = (1 - p1) * (slope_1 - slope_0)
        slope = np.sqrt(a) * gmm.means[:, 0] / v
        expected = (1 - p1) * (slope[1] - slope[0])
        assert clf.log_prob_grad(x, t, 1)[0] == pytest.approx(expected, rel=1e-12)


class TestMixedDensity:
    def test_single_class(self):
        clf = random_classifier(np.random.default_rng(0), L=1)
        b, _ = quantile_bins([1.0, 2.0, 3.0], 1)
        prov = Constant([0.3, 0.3])
        x = np.random.default_rng(1).standard_normal((3, 2))
        np.testing.assert_allclose(mixed_density_score(prov, clf, b, x, 7, 5.0), prov.score(x, 7), atol=1e-15)

    def test_w_zero(self):
        clf = random_classifier(np.random.default_rng(0))
        b, _ = quantile_bins(np.arange(1.0, 9.0), 4)
        prov = Constant([0.3, 0.3])
        np.testing.assert_array_equal(mixed_density_score(prov, clf, b, np.ones(2), 7, 0.0), [0.3, 0.3])

    def test_rejects_bad_binning(self):
        clf = random_classifier(np.random.default_rng(0), L=3)
        with pytest.raises(ValueError):
            mixed_density_score(Constant([0, 0]), clf, OrdinalBinning(np.array([1.0]), np.array([0.5, 2.0])),
                                np.zeros(2), 5, 1.0)
        with pytest.raises(ValueError):
            mixed_density_score(Constant([0, 0]), clf, OrdinalBinning(np.array([1.0, 2.0]),
                                                                      np.array([0.0, 1.5, 3.0])), np.zeros(2), 5, 1.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_finite_difference(self, seed):
        rng = np.random.default_rng(seed)
        clf = random_classifier(rng, L=5)
        tau = np.sort(rng.uniform(0.1, 4.0, 5))
        b = OrdinalBinning(np.sort(rng.uniform(0, 4, 4)), tau)
        x = rng.standard_normal(2)
        t = int(rng.integers(1, 1001))
        g = mixed_density_score(Constant([0, 0]), clf, b, x, t, 1.0)

        def log_lhat(v):
            logits = nn.forward(clf.net, net_input(v, t, SCHED.T))
            p = np.exp(nn.log_softmax(logits))
            return float(np.log(np.sum(tau * p)))

        assert rel_err(g, central_diff(log_lhat, x, h=1e-5)) < 1e-4

    def test_calibrated_classifier_matches_closed_form(self):
        gmm = GaussianMixture([0.6, 0.4], [[-1.0], [2.0]], [0.4, 0.4])
        t = 300
        clf = exact_posterior_classifier(gmm, t)
        tau = np.array([0.5, 3.0])
        b = OrdinalBinning(np.array([1.0]), tau)
        a = SCHED.alpha(t)
        v = a * 0.4 + 1 - a
        for x in (-1.5, 0.2, 1.7):
            comp = np.array([w * np.exp(-(x - np.sqrt(a) * m[0]) ** 2 / (2 * v))
                             for w, m in zip(gmm.weights, gmm.means)])
            s = np.array([-(x - np.sqrt(a) * m[0]) / v for m in gmm.means])
            expected = np.sum(tau * comp * s) / np.sum(tau * comp) - np.sum(comp * s) / np.sum(comp)
            got = mixed_density_score(Constant([0.0]), clf, b, np.array([x]), t, 1.0)[0]
            assert got == pytest.approx(expected, rel=1e-3)


class TestTrainClassifier:
    def test_single_class(self):
        clf = train_classifier(np.zeros(10, dtype=int), np.random.default_rng(0).standard_normal((10, 2)), SCHED)
        assert clf.class_count == 1
        assert not np.any(clf.log_prob_grad(np.ones((3, 2)), 100, 0))

    def test_errors(self):
        data = np.zeros((4, 2))
        with pytest.raises(ValueError):
            train_classifier([0, 1, 1], data, SCHED)
        with pytest.raises(ValueError):
            train_classifier([0, 0, 2, 2], data, SCHED)

    def test_separable_modes(self):
        gmm = GaussianMixture([0.5, 0.5], [[-3.0, 0.0], [3.0, 0.0]], [0.1, 0.1])
        x, lab = gmm.sample(1000, np.random.default_rng(0))
        clf = train_classifier(lab, x, SCHED, epochs=60, seed=1, hidden=(32, 32))
        xh, labh = gmm.sample(2000, np.random.default_rng(1))
        t = 20
        a = SCHED.alpha(t)
        xt = np.sqrt(a) * xh + np.sqrt(1 - a) * np.random.default_rng(2).standard_normal(xh.shape)
        assert np.mean(clf.predict(xt, t) == labh) > 0.95

    def test_shuffled_labels_chance(self):
        L = 4
        rng = np.random.default_rng(3)
        x = rng.standard_normal((1000, 2))
        lab = rng.permutation(np.arange(1000) % L)
        clf = train_classifier(lab, x, SCHED, epochs=30, seed=1, hidden=(32, 32))
        n = 4000
        xh = rng.standard_normal((n, 2))
        labh = rng.integers(0, L, n)
        acc = np.mean(clf.predict(xh, 10) == labh)
        assert abs(acc - 1 / L) < 3 * np.sqrt((1 / L) * (1 - 1 / L) / n)

    def test_deterministic(self):
        x = np.random.default_rng(0).standard_normal((100, 2))
        lab = np.arange(100) % 2
        a = train_classifier(lab, x, SCHED, epochs=2, seed=5, hidden=(8,))
        b = train_classifier(lab, x, SCHED, epochs=2, seed=5, hidden=(8,))
        assert nn.flat_params(a.net).tobytes() == nn.flat_params(b.net).tobytes()


class TestGuidedGenerate:
    def test_w_zero_matches_generate(self):
        s = build_schedule(100)
        gmm = GaussianMixture([0.5, 0.5], [[-1.0, 0.0], [1.0, 0.0]], [0.2, 0.2])
        prov = GmmScore(gmm, s)
        clf = random_classifier(np.random.default_rng(0))
        clf.T = s.T
        plan = make_plan(s, 25)
        a = guided_generate(prov, clf, None, s, plan, GuidanceConfig(3, 0.0), 40, seed=9)
        b = generate(prov, s, plan, 40, seed=9)
        assert a.tobytes() == b.tobytes()

    def test_mixed_needs_binning(self):
        s = build_schedule(10)
        clf = random_classifier(np.random.default_rng(0))
        with pytest.raises(ValueError):
            guided_generate(Constant([0, 0]), clf, None, s, None, GuidanceConfig(0, 1.0, "mixed"), 5, 0)

    def test_guidance_shifts_mass_to_target(self):
        s = build_schedule(200)
        gmm = GaussianMixture([0.9, 0.1], [[-2.0], [2.0]], [0.3, 0.3])
        prov = GmmScore(gmm, s)

        class PerStep:
            """Exact posterior classifier rebuilt at every step."""

            class_count = 2
            T = s.T

            def log_prob_grad(self, x, t, target):
                a = s.alpha(t)
                v = a * 0.3 + 1 - a
                m = np.sqrt(a) * gmm.means[:, 0]
                logp = np.log(gmm.weights) - (x - m) ** 2 / (2 * v)
                p = np.exp(logp - logp.max(axis=1, keepdims=True))
                p /= p.sum(axis=1, keepdims=True)
                slope = m / v
                return ((slope[target] - p @ slope))[:, None]

        base = generate(prov, s, None, 2000, seed=0)
        guided = guided_generate(prov, PerStep(), None, s, None, GuidanceConfig(1, 2.0), 2000, seed=0)
        assert np.mean(guided > 0) > 2 * np.mean(base > 0)


def test_logits_shape_follows_input():
    clf = random_classifier(np.random.default_rng(0), L=3)
    assert clf.logits(np.zeros(2), 5).shape == (3,)
    assert clf.logits(np.zeros((4, 2)), 5).shape == (4, 3)
    assert clf.predict(np.zeros(2), 5).shape == ()
