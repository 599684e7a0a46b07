"""Tweedie reconstruction, minority score and ordinal (quantile) binning."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffusion import NoiseSchedule, ScoreProvider, perturb

DISTANCES = ("l2", "l1", "feature")
FEATURE_WIDTH = 16
_FEATURE_SEED = 20230131


def tweedie_denoise(x_t, t: int, provider: ScoreProvider, schedule: NoiseSchedule):
    """Posterior-mean estimate of ``x_0``: ``(x_t + (1 - a) score) / sqrt(a)``."""
    a = schedule.alpha(t)
    if a <= 0:
        raise ZeroDivisionError(f"alpha_{t} is zero; reconstruction undefined")
    x_t = np.asarray(x_t, dtype=float)
    return (x_t + (1.0 - a) * provider.score(x_t, t)) / np.sqrt(a)


def _projection(dim: int) -> np.ndarray:
    rng = np.random.default_rng([_FEATURE_SEED, dim])
    return rng.standard_normal((dim, FEATURE_WIDTH)) / np.sqrt(FEATURE_WIDTH)


def distance(a, b, kind: str = "l2"):
    """Row-wise distance; ``feature`` is L2 after a fixed seeded random projection."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    diff = a - b
    if kind == "l2":
        return np.sqrt(np.sum(diff * diff, axis=-1))
    if kind == "l1":
        return np.sum(np.abs(diff), axis=-1)
    if kind == "feature":
        f = diff @ _projection(diff.shape[-1])
        return np.sqrt(np.sum(f * f, axis=-1))
    raise ValueError(f"unknown distance kind {kind!r}; expected one of {DISTANCES}")


def default_score_step(schedule: NoiseSchedule, t_frac: float = 0.9) -> int:
    return min(schedule.T, max(1, int(round(t_frac * schedule.T))))


def minority_scores(x0, provider: ScoreProvider, schedule: NoiseSchedule, t: int | None = None,
                    draws: int = 1, dist: str = "l2", seed: int = 0):
    """Minority score of every row of ``x0``.

    Each point is perturbed to step ``t`` (default ``round(0.9 T)``), denoised
    in one shot, and compared with the original; the ``draws`` distances are
    averaged. Noise comes from ``default_rng(seed)`` as a ``(draws, n, d)`` block.
    """
    if draws < 1:
        raise ValueError("draws must be at least 1")
    t = default_score_step(schedule) if t is None else int(t)
    schedule.alpha(t)
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    noise = np.random.default_rng(seed).standard_normal((draws, *x0.shape))
    total = np.zeros(len(x0))
    for z in noise:
        x_t = perturb(x0, t, z, schedule)
        total += distance(x0, tweedie_denoise(x_t, t, provider, schedule), dist)
    return total / draws


def minority_score(x0, provider: ScoreProvider, schedule: NoiseSchedule, t: int | None = None,
                   draws: int = 1, dist: str = "l2", seed: int = 0) -> float:
    """Minority score of a single point; see :func:`minority_scores`."""
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim != 1:
        raise ValueError("expected a single vector")
    return float(minority_scores(x0[None], provider, schedule, t, draws, dist, seed)[0])


@dataclass(frozen=True)
class OrdinalBinning:
    """``L`` quantile classes: upper edges of classes ``0..L-2`` and per-class mean scores."""

    edges: np.ndarray
    representatives: np.ndarray

    @property
    def class_count(self) -> int:
        return len(self.representatives)

    def assign(self, scores):
        """Class of new scores; a score equal to an edge goes to the lower class."""
        return np.searchsorted(self.edges, np.asarray(scores, dtype=float), side="left")


def quantile_bins(scores, L: int):
    """Split scores into ``L`` equal-count ordinal classes.

    Returns ``(binning, labels)``. Class 0 holds the lowest scores. Ranks come
    from a stable sort, and rank ``r`` of ``n`` maps to class ``floor(r L / n)``
    so class sizes differ by at most one.
    """
    scores = np.asarray(scores, dtype=float).reshape(-1)
    n = len(scores)
    if L < 1:
        raise ValueError("L must be positive")
    if n < L:
        raise ValueError(f"cannot make {L} classes from {n} scores")
    order = np.argsort(scores, kind="stable")
    labels = np.empty(n, dtype=int)
    labels[order] = (np.arange(n) * L) // n
    edges = np.array([scores[labels == c].max() for c in range(L - 1)])
    reps = np.array([scores[labels == c].mean() for c in range(L)])
    return OrdinalBinning(edges, reps), labels
