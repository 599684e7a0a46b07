"""Score providers and denoising score matching.

Three interchangeable ways to get ``grad log q_t(x_t)``:

* :class:`GmmScore` -- the exact diffused score of a Gaussian mixture.
* :class:`EmpiricalScore` -- the DSM optimum for a finite dataset, i.e. the
  posterior average of the conditional scores
  ``(sqrt(alpha_t) x0_i - x_t) / (1 - alpha_t)``.
* :class:`NetworkScore` -- a trained noise predictor, ``-eps(x_t, t) / sqrt(1 - alpha_t)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from . import nn
from .diffusion import NoiseSchedule

log = logging.getLogger(__name__)

TIME_WIDTH = 8
_CHUNK = 512


@dataclass(frozen=True)
class GaussianMixture:
    """Isotropic mixture: ``weights[k]``, ``means[k]`` and scalar ``variances[k]``."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        mu = np.atleast_2d(np.asarray(self.means, dtype=float))
        var = np.asarray(self.variances, dtype=float).reshape(-1)
        if w.ndim != 1 or len(w) != len(mu) or len(var) != len(w):
            raise ValueError("weights, means and variances must have one entry per component")
        if np.any(w <= 0) or np.any(w > 1) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must lie in (0, 1] and sum to 1")
        if np.any(var < 0):
            raise ValueError("variances must be non-negative")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", var)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def sample(self, n: int, rng: np.random.Generator):
        """Draw ``n`` points; returns ``(points, component_labels)``."""
        labels = rng.choice(len(self.weights), size=n, p=self.weights)
        z = rng.standard_normal((n, self.dim))
        return self.means[labels] + np.sqrt(self.variances[labels])[:, None] * z, labels


def _check_x(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise ValueError(f"input dimension {x.shape[-1]} != {dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")
    return x


def _component_terms(x2, t, means, variances, log_weights, schedule):
    a = schedule.alpha(t)
    m = np.sqrt(a) * means
    v = a * variances + (1.0 - a)
    diff = m[None, :, :] - x2[:, None, :]
    sq = np.einsum("nkd,nkd->nk", diff, diff)
    d = x2.shape[1]
    logp = log_weights[None, :] - 0.5 * sq / v[None, :] - 0.5 * d * np.log(2 * np.pi * v)[None, :]
    return diff, v, logp


def _mixture_score(x, t, means, variances, log_weights, schedule):
    x = np.asarray(x, dtype=float)
    x2 = np.atleast_2d(x)
    out = np.empty_like(x2)
    for s in range(0, len(x2), _CHUNK):
        diff, v, logp = _component_terms(x2[s:s + _CHUNK], t, means, variances, log_weights, schedule)
        r = softmax(logp, axis=1)
        out[s:s + _CHUNK] = np.einsum("nk,nkd->nd", r / v[None, :], diff)
    return out.reshape(x.shape)


def _mixture_log_density(x, t, means, variances, log_weights, schedule):
    x2 = np.atleast_2d(np.asarray(x, dtype=float))
    _, _, logp = _component_terms(x2, t, means, variances, log_weights, schedule)
    out = logsumexp(logp, axis=1)
    return out if np.ndim(x) > 1 else out[0]


def gmm_score(x_t, t: int, gmm: GaussianMixture, schedule: NoiseSchedule):
    """Exact score of the mixture after diffusing to step ``t``.

    Component ``k`` diffuses to ``N(sqrt(a) mu_k, (a var_k + 1 - a) I)``.
    """
    x_t = _check_x(x_t, gmm.dim)
    return _mixture_score(x_t, t, gmm.means, gmm.variances, np.log(gmm.weights), schedule)


def gmm_log_density(x_t, t: int, gmm: GaussianMixture, schedule: NoiseSchedule):
    x_t = _check_x(x_t, gmm.dim)
    return _mixture_log_density(x_t, t, gmm.means, gmm.variances, np.log(gmm.weights), schedule)


def posterior_weights(x_t, t: int, data, schedule: NoiseSchedule):
    """Responsibilities ``q(x0 = data[i] | x_t)`` under a uniform prior, shape ``(n, N)``."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    x2 = np.atleast_2d(np.asarray(x_t, dtype=float))
    a = schedule.alpha(t)
    diff = x2[:, None, :] - np.sqrt(a) * data[None, :, :]
    logits = -np.einsum("nkd,nkd->nk", diff, diff) / (2.0 * (1.0 - a))
    return softmax(logits, axis=1)


def empirical_optimal_score(x_t, t: int, data, schedule: NoiseSchedule):
    """DSM-optimal score for a finite dataset with a uniform prior over its points."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if len(data) == 0:
        raise ValueError("empty dataset")
    x_t = _check_x(x_t, data.shape[1])
    n = len(data)
    return _mixture_score(x_t, t, data, np.zeros(n), np.full(n, -np.log(n)), schedule)


class GmmScore:
    def __init__(self, gmm: GaussianMixture, schedule: NoiseSchedule):
        self.gmm = gmm
        self.schedule = schedule
        self.dim = gmm.dim

    def score(self, x, t):
        return gmm_score(x, t, self.gmm, self.schedule)

    def log_density(self, x, t):
        return gmm_log_density(x, t, self.gmm, self.schedule)


class EmpiricalScore:
    """The closed-form DSM optimum over ``data``; duplicate rows act as prior weight."""

    def __init__(self, data, schedule: NoiseSchedule):
        data = np.atleast_2d(np.asarray(data, dtype=float))
        if len(data) == 0:
            raise ValueError("empty dataset")
        self.data = data
        self.schedule = schedule
        self.dim = data.shape[1]

    def score(self, x, t):
        return empirical_optimal_score(x, t, self.data, self.schedule)

    def log_density(self, x, t):
        n = len(self.data)
        return _mixture_log_density(x, t, self.data, np.zeros(n), np.full(n, -np.log(n)), self.schedule)


def net_input(x, t, T: int, width: int = TIME_WIDTH):
    """Concatenate ``x`` with time features; ``t`` scalar or one index per row."""
    x2 = np.atleast_2d(np.asarray(x, dtype=float))
    tf = nn.time_features(t, T, width)
    if tf.ndim == 1:
        tf = np.broadcast_to(tf, (len(x2), width))
    return np.concatenate([x2, tf], axis=1)


def network_score(x_t, t: int, net: nn.MLP, schedule: NoiseSchedule, time_width: int = TIME_WIDTH):
    x_t = np.asarray(x_t, dtype=float)
    if net.in_dim != x_t.shape[-1] + time_width or net.out_dim != x_t.shape[-1]:
        raise ValueError(f"network widths {net.widths} do not fit data dimension {x_t.shape[-1]}")
    eps = nn.forward(net, net_input(x_t, t, schedule.T, time_width))
    return (-eps / np.sqrt(1.0 - schedule.alpha(t))).reshape(x_t.shape)


class NetworkScore:
    def __init__(self, net: nn.MLP, schedule: NoiseSchedule, time_width: int = TIME_WIDTH):
        self.net = net
        self.schedule = schedule
        self.time_width = time_width
        self.dim = net.out_dim

    def score(self, x, t):
        return network_score(x, t, self.net, self.schedule, self.time_width)


def dsm_loss_and_grads(net: nn.MLP, batch, schedule: NoiseSchedule, seed, time_width: int = TIME_WIDTH):
    """Noise-prediction DSM loss ``mean_i ||eps(x_t_i, t_i) - z_i||^2`` and its gradients.

    ``t_i`` is uniform on ``1..T`` and ``z_i`` standard normal, both drawn from
    ``default_rng(seed)`` (a Generator is also accepted).
    """
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    if len(batch) == 0:
        raise ValueError("empty batch")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n, d = batch.shape
    t = rng.integers(1, schedule.T + 1, size=n)
    z = rng.standard_normal((n, d))
    a = schedule.alphas[t - 1][:, None]
    x_t = np.sqrt(a) * batch + np.sqrt(1.0 - a) * z
    inp = net_input(x_t, t, schedule.T, time_width)
    resid = nn.forward(net, inp) - z
    loss = float(np.mean(np.sum(resid * resid, axis=1)))
    grads = nn.param_gradients(net, inp, 2.0 * resid / n)
    return loss, grads


def train_score_net(data, schedule: NoiseSchedule, hidden=(128, 128, 128), steps: int = 4000,
                    batch_size: int = 256, lr: float = 1e-3, seed: int = 0,
                    time_width: int = TIME_WIDTH) -> nn.MLP:
    """Fit an epsilon-predictor to ``data`` with Adam and a cosine learning-rate decay."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    rng = np.random.default_rng(seed)
    d = data.shape[1]
    net = nn.init_mlp([d + time_width, *hidden, d], rng)
    state = nn.AdamState.for_net(net, lr=lr)
    for step in range(steps):
        state.lr = lr * 0.5 * (1.0 + np.cos(np.pi * step / steps))
        idx = rng.integers(0, len(data), size=batch_size)
        loss, grads = dsm_loss_and_grads(net, data[idx], schedule, rng, time_width)
        nn.optimizer_step(net, state, grads)
        if step % 1000 == 0:
            log.debug("dsm step %d loss %.4f", step, loss)
    return net
