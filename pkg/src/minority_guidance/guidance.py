"""Noise-conditioned ordinal classifier and the guided samplers built on it."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import nn
from .diffusion import NoiseSchedule, ScoreProvider, StepPlan, make_plan, run_chain
from .minority import OrdinalBinning
from .scores import TIME_WIDTH, net_input

log = logging.getLogger(__name__)

MODES = ("class", "mixed")


@dataclass
class ClassifierModel:
    net: nn.MLP
    class_count: int
    T: int
    time_width: int = TIME_WIDTH

    @property
    def dim(self) -> int:
        return self.net.in_dim - self.time_width

    def logits(self, x, t):
        out = nn.forward(self.net, net_input(x, t, self.T, self.time_width))
        return out[0] if np.ndim(x) == 1 else out

    def predict(self, x, t):
        return np.argmax(self.logits(x, t), axis=-1)

    def _input_grad(self, x, t, head):
        x = np.asarray(x, dtype=float)
        g = nn.input_gradient(self.net, net_input(x, t, self.T, self.time_width), head)
        return g[:, : self.dim].reshape(x.shape)

    def log_prob_grad(self, x, t, target: int):
        """``grad_x log p(target | x_t)``."""
        return self._input_grad(x, t, nn.LogSoftmaxHead(target))

    def log_mixture_grad(self, x, t, coefficients):
        """``grad_x log sum_i c_i p(i | x_t)``."""
        return self._input_grad(x, t, nn.LogMixtureHead(coefficients))


@dataclass(frozen=True)
class GuidanceConfig:
    target_class: int = 0
    scale: float = 2.0
    mode: str = "class"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not np.isfinite(self.scale) or self.scale < 0:
            raise ValueError("scale must be finite and non-negative")
        if self.target_class < 0:
            raise ValueError("target_class must be non-negative")


def train_classifier(labels, data, schedule: NoiseSchedule, epochs: int = 20, seed: int = 0,
                     hidden=(128, 128, 128), batch_size: int = 256, lr: float = 1e-3,
                     class_count: int | None = None, time_width: int = TIME_WIDTH) -> ClassifierModel:
    """Cross-entropy training on ``(perturb(x0, t), label)`` with ``t`` uniform on ``1..T``.

    ``epochs`` counts passes of ``ceil(N / batch_size)`` minibatches each.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    labels = np.asarray(labels, dtype=int).reshape(-1)
    if len(labels) != len(data):
        raise ValueError(f"{len(labels)} labels for {len(data)} data points")
    L = int(labels.max()) + 1 if class_count is None else int(class_count)
    counts = np.bincount(labels, minlength=L)
    if len(counts) > L or np.any(counts == 0):
        raise ValueError(f"every class in 0..{L - 1} needs at least one example")
    rng = np.random.default_rng(seed)
    n, d = data.shape
    net = nn.init_mlp([d + time_width, *hidden, L], rng)
    clf = ClassifierModel(net, L, schedule.T, time_width)
    if L == 1:
        return clf
    state = nn.AdamState.for_net(net, lr=lr)
    steps = epochs * -(-n // batch_size)
    onehot = np.eye(L)
    for step in range(steps):
        state.lr = lr * 0.5 * (1.0 + np.cos(np.pi * step / steps))
        idx = rng.integers(0, n, size=batch_size)
        t = rng.integers(1, schedule.T + 1, size=batch_size)
        a = schedule.alphas[t - 1][:, None]
        x_t = np.sqrt(a) * data[idx] + np.sqrt(1.0 - a) * rng.standard_normal((batch_size, d))
        inp = net_input(x_t, t, schedule.T, time_width)
        logits = nn.forward(net, inp)
        p = np.exp(nn.log_softmax(logits))
        grads = nn.param_gradients(net, inp, (p - onehot[labels[idx]]) / batch_size)
        nn.optimizer_step(net, state, grads)
        if step % 1000 == 0:
            ce = -np.mean(nn.log_softmax(logits)[np.arange(batch_size), labels[idx]])
            log.debug("classifier step %d ce %.4f", step, ce)
    return clf


def guided_score(provider: ScoreProvider, clf: ClassifierModel, x_t, t: int, cfg: GuidanceConfig):
    """``score(x_t) + w * grad log p(target | x_t)``."""
    if cfg.mode != "class":
        raise ValueError("guided_score needs a class-conditional config")
    if cfg.target_class >= clf.class_count:
        raise ValueError(f"target class {cfg.target_class} >= {clf.class_count} classes")
    s = provider.score(x_t, t)
    if cfg.scale == 0:
        return s
    return s + cfg.scale * clf.log_prob_grad(x_t, t, cfg.target_class)


def mixed_density_score(provider: ScoreProvider, clf: ClassifierModel, binning: OrdinalBinning,
                        x_t, t: int, w: float):
    """``score(x_t) + w * grad log sum_i tau_i p(i | x_t)`` with ``tau`` the class representatives."""
    tau = np.asarray(binning.representatives, dtype=float)
    if len(tau) != clf.class_count:
        raise ValueError(f"binning has {len(tau)} classes, classifier {clf.class_count}")
    if np.any(tau <= 0):
        raise ValueError("class representatives must be positive")
    s = provider.score(x_t, t)
    if w == 0:
        return s
    return s + w * clf.log_mixture_grad(x_t, t, tau)


def guided_generate(provider: ScoreProvider, clf: ClassifierModel, binning: OrdinalBinning | None,
                    schedule: NoiseSchedule, plan: StepPlan | None, cfg: GuidanceConfig,
                    count: int, seed: int) -> np.ndarray:
    """Ancestral sampling with the guided score in place of the plain one.

    The classifier sees the original step index of each plan element. With
    ``cfg.scale == 0`` the output equals :func:`generate` for the same seed.
    """
    plan = make_plan(schedule) if plan is None else plan
    if cfg.mode == "class":
        if cfg.target_class >= clf.class_count:
            raise ValueError(f"target class {cfg.target_class} >= {clf.class_count} classes")

        def score_fn(x, t):
            return guided_score(provider, clf, x, t, cfg)
    else:
        if binning is None:
            raise ValueError("mixed-density sampling needs a binning")

        def score_fn(x, t):
            return mixed_density_score(provider, clf, binning, x, t, cfg.scale)

    return run_chain(score_fn, plan, count, provider.dim, seed)
