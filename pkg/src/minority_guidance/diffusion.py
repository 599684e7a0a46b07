"""Variance schedules, forward perturbation and the ancestral reverse sampler.

Step indices are 1-based throughout: ``t = 1..T`` are noisy latents and
``t = 0`` is clean data.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np


class ScoreProvider(Protocol):
    def score(self, x, t: int) -> np.ndarray: ...


@dataclass(frozen=True)
class NoiseSchedule:
    betas: np.ndarray
    alphas: np.ndarray

    @property
    def T(self) -> int:
        return len(self.betas)

    def _check(self, t):
        if not 1 <= t <= self.T:
            raise ValueError(f"step index {t} outside 1..{self.T}")

    def beta(self, t: int) -> float:
        self._check(t)
        return float(self.betas[t - 1])

    def alpha(self, t: int) -> float:
        self._check(t)
        return float(self.alphas[t - 1])

    def fingerprint(self) -> bytes:
        return hashlib.sha256(np.asarray(self.betas, dtype="<f8").tobytes()).digest()


def build_schedule(T: int = 1000, beta_start: float = 1e-4, beta_end: float = 0.02) -> NoiseSchedule:
    """Linear beta schedule and its cumulative products ``alpha_t``."""
    if int(T) != T or T < 1:
        raise ValueError(f"T must be a positive integer, got {T}")
    if not 0 < beta_start <= beta_end < 1:
        raise ValueError("need 0 < beta_start <= beta_end < 1")
    betas = np.linspace(beta_start, beta_end, int(T))
    alphas = np.cumprod(1.0 - betas)
    betas.setflags(write=False)
    alphas.setflags(write=False)
    return NoiseSchedule(betas, alphas)


def perturb(x0, t: int, noise, schedule: NoiseSchedule):
    """Sample of ``q(x_t | x_0)`` for the supplied standard-normal ``noise``."""
    x0 = np.asarray(x0, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if x0.shape[-1] != noise.shape[-1]:
        raise ValueError(f"noise dimension {noise.shape[-1]} != data dimension {x0.shape[-1]}")
    a = schedule.alpha(t)
    return np.sqrt(a) * x0 + np.sqrt(1.0 - a) * noise


def _reverse_step(x, beta, score, noise):
    return (x + beta * score) / np.sqrt(1.0 - beta) + np.sqrt(beta) * noise


def ancestral_step(x_t, t: int, score, schedule: NoiseSchedule, noise):
    """One reverse step ``(x + beta_t*score)/sqrt(1-beta_t) + sqrt(beta_t)*noise``.

    The noise is scaled by the standard deviation of the ``N(mu, beta_t I)``
    reverse transition.
    """
    x_t = np.asarray(x_t, dtype=float)
    score = np.asarray(score, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if score.shape != x_t.shape or noise.shape != x_t.shape:
        raise ValueError("score and noise must match the shape of x_t")
    return _reverse_step(x_t, schedule.beta(t), score, noise)


@dataclass(frozen=True)
class StepPlan:
    """Increasing step indices ending at T, plus the betas a respaced chain uses.

    ``betas[i] = 1 - alpha[indices[i]] / alpha[indices[i-1]]`` so a full plan
    reproduces the schedule's own betas.
    """

    indices: np.ndarray
    betas: np.ndarray

    def __len__(self):
        return len(self.indices)


def make_plan(schedule: NoiseSchedule, n: int | None = None) -> StepPlan:
    """Evenly strided subset of ``1..T`` with ``n`` elements, last one ``T``."""
    T = schedule.T
    n = T if n is None else int(n)
    if not 1 <= n <= T:
        raise ValueError(f"plan length {n} outside 1..{T}")
    # k*T/n for k=1..n: even stride, always ends at T, strictly increasing
    idx = (np.arange(1, n + 1) * T) // n
    prev = np.concatenate([[1.0], schedule.alphas[idx[:-1] - 1]])
    betas = 1.0 - schedule.alphas[idx - 1] / prev
    return StepPlan(idx.astype(int), betas)


def run_chain(score_fn: Callable[[np.ndarray, int], np.ndarray], plan: StepPlan,
              count: int, dim: int, seed: int) -> np.ndarray:
    """Ancestral sampling driven by ``score_fn(x, t)``.

    A single ``default_rng(seed)`` stream supplies the initial ``(count, dim)``
    draw and then one ``(count, dim)`` draw per step from ``T`` down to the
    second step; the last step adds no noise.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((count, dim))
    for i in range(len(plan) - 1, -1, -1):
        t = int(plan.indices[i])
        z = rng.standard_normal((count, dim)) if i > 0 else np.zeros((count, dim))
        x = _reverse_step(x, float(plan.betas[i]), score_fn(x, t), z)
    return x


def generate(provider: ScoreProvider, schedule: NoiseSchedule, plan: StepPlan | None,
             count: int, seed: int, dim: int | None = None) -> np.ndarray:
    """Unguided samples, shape ``(count, dim)``."""
    plan = make_plan(schedule) if plan is None else plan
    dim = dim if dim is not None else provider.dim
    return run_chain(provider.score, plan, count, dim, seed)
