"""Flat ``section.key = value`` experiment configuration.

Values are JSON literals (numbers, strings, lists). Lines starting with ``#``
are comments.
Floats are written with ``repr`` so a config round-trips bit-exactly.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

DEFAULTS = {
    "seed": 0,
    "output.dir": "artifacts",
    "dataset.weights": [0.95, 0.05],
    "dataset.means": [[0.0, 0.0], [4.0, 0.0]],
    "dataset.variances": [1.0, 0.25],
    "dataset.n": 5000,
    "dataset.n_holdout": 5000,
    "schedule.T": 1000,
    "schedule.beta_start": 1e-4,
    "schedule.beta_end": 0.02,
    "score_net.hidden": [128, 128, 128],
    "score_net.steps": 6000,
    "score_net.batch_size": 256,
    "score_net.lr": 1e-3,
    "minority.provider": "network",
    "minority.t_frac": 0.9,
    "minority.draws": 1,
    "minority.distance": "l2",
    "minority.classes": 10,
    "classifier.hidden": [128, 128, 128],
    "classifier.epochs": 200,
    "classifier.batch_size": 256,
    "classifier.lr": 1e-3,
    "sampling.mode": "class",
    "sampling.plan_length": 250,
    "sampling.count": 2000,
    "sampling.targets": [0, 5, 9],
    "sampling.scales": [2.0],
    "metrics.k_avgknn": 5,
    "metrics.k_lof": 20,
    "metrics.k_precision": 5,
    "metrics.bins": 50,
}


class ConfigError(ValueError):
    """Invalid configuration; ``stage`` names the pipeline stage whose precondition failed."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def parse_config(text: str) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("config", f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError("config", f"line {lineno}: unknown key {key!r}")
        try:
            cfg[key] = json.loads(value)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"line {lineno}: bad value for {key}: {exc}") from None
    return cfg


def load_config(path) -> dict:
    return parse_config(Path(path).read_text())


def dump_config(cfg: dict) -> str:
    return "".join(f"{k} = {json.dumps(cfg[k])}\n" for k in sorted(cfg))


def save_config(cfg: dict, path) -> None:
    Path(path).write_bytes(dump_config(cfg).encode())


def _require(cond, stage, msg):
    if not cond:
        raise ConfigError(stage, msg)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def validate(cfg: dict) -> dict:
    """Check every downstream precondition up front; returns ``cfg`` unchanged."""
    _require(_is_int(cfg["seed"]), "config", "seed must be an integer")

    w, mu, var = cfg["dataset.weights"], cfg["dataset.means"], cfg["dataset.variances"]
    _require(isinstance(w, list) and w and all(_num(x) for x in w), "synth", "weights must be a list of numbers")
    _require(isinstance(mu, list) and len(mu) == len(w), "synth", "one mean per weight")
    _require(isinstance(var, list) and len(var) == len(w), "synth", "one variance per weight")
    _require(all(0 < x <= 1 for x in w) and abs(sum(w) - 1.0) <= 1e-9, "synth", "weights must be in (0,1] and sum to 1")
    _require(all(isinstance(m, list) and m and all(_num(c) for c in m) for m in mu), "synth", "means must be lists of numbers")
    _require(len({len(m) for m in mu}) == 1, "synth", "all means must share a dimension")
    _require(all(_num(v) and v >= 0 for v in var), "synth", "variances must be non-negative")
    n, n_hold = cfg["dataset.n"], cfg["dataset.n_holdout"]
    _require(_is_int(n) and n >= 1, "synth", "dataset.n must be a positive integer")
    _require(_is_int(n_hold) and n_hold >= 1, "synth", "dataset.n_holdout must be a positive integer")

    T = cfg["schedule.T"]
    _require(_is_int(T) and T >= 1, "schedule", "T must be a positive integer")
    b0, b1 = cfg["schedule.beta_start"], cfg["schedule.beta_end"]
    _require(_num(b0) and _num(b1) and 0 < b0 <= b1 < 1, "schedule", "need 0 < beta_start <= beta_end < 1")

    for sec in ("score_net", "classifier"):
        h = cfg[f"{sec}.hidden"]
        _require(isinstance(h, list) and all(_is_int(x) and x >= 1 for x in h), sec, "hidden must list positive ints")
        _require(_is_int(cfg[f"{sec}.batch_size"]) and cfg[f"{sec}.batch_size"] >= 1, sec, "batch_size must be positive")
        _require(_num(cfg[f"{sec}.lr"]) and cfg[f"{sec}.lr"] > 0, sec, "lr must be positive")
    _require(_is_int(cfg["score_net.steps"]) and cfg["score_net.steps"] >= 1, "train-score", "steps must be positive")
    _require(_is_int(cfg["classifier.epochs"]) and cfg["classifier.epochs"] >= 1, "train-classifier",
             "epochs must be positive")

    _require(cfg["minority.provider"] in ("network", "oracle"), "score-minority", "provider must be network|oracle")
    tf = cfg["minority.t_frac"]
    _require(_num(tf) and 0 < tf <= 1 and 1 <= round(tf * T) <= T, "score-minority", "t_frac must select a step in 1..T")
    _require(_is_int(cfg["minority.draws"]) and cfg["minority.draws"] >= 1, "score-minority", "draws must be >= 1")
    _require(cfg["minority.distance"] in ("l1", "l2", "feature"), "score-minority", "distance must be l1|l2|feature")
    L = cfg["minority.classes"]
    _require(_is_int(L) and L >= 1, "binning", "classes must be a positive integer")
    _require(L <= n, "binning", f"cannot form {L} classes from {n} samples")

    _require(cfg["sampling.mode"] in ("class", "mixed"), "sample", "mode must be class|mixed")
    pl = cfg["sampling.plan_length"]
    _require(_is_int(pl) and 1 <= pl <= T, "sample", f"plan_length must lie in 1..{T}")
    _require(_is_int(cfg["sampling.count"]) and cfg["sampling.count"] >= 1, "sample", "count must be >= 1")
    tg = cfg["sampling.targets"]
    _require(isinstance(tg, list) and tg and all(_is_int(x) and 0 <= x < L for x in tg), "sample",
             f"targets must be class indices in 0..{L - 1}")
    sc = cfg["sampling.scales"]
    _require(isinstance(sc, list) and sc and all(_num(x) and x >= 0 for x in sc), "sample",
             "scales must be non-negative numbers")

    count = cfg["sampling.count"]
    for key in ("metrics.k_avgknn", "metrics.k_lof", "metrics.k_precision"):
        k = cfg[key]
        _require(_is_int(k) and 1 <= k < min(n, n_hold, count), "evaluate",
                 f"{key} must satisfy 1 <= k < min(dataset.n, n_holdout, sampling.count)")
    _require(_is_int(cfg["metrics.bins"]) and cfg["metrics.bins"] >= 1, "evaluate", "bins must be positive")
    return cfg
