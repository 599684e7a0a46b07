"""End-to-end experiment: synthesise data, train, score, bin, guide, evaluate.

Every stage reads its inputs from and writes its outputs to one artifact
directory, so stages can run one at a time from the CLI or all at once via
:func:`run_pipeline`. Stage seeds are derived from the config seed and the
stage name, so reruns are byte-identical apart from ``status.json`` timestamps.
"""

from __future__ import annotations

import json
import logging
import time
import zlib
from pathlib import Path

import numpy as np

from .. import metrics
from ..diffusion import build_schedule, make_plan, generate
from ..guidance import ClassifierModel, GuidanceConfig, guided_generate, train_classifier
from ..minority import OrdinalBinning, default_score_step, minority_scores, quantile_bins
from ..scores import TIME_WIDTH, EmpiricalScore, GaussianMixture, NetworkScore, train_score_net
from .config import save_config, validate
from .io import emit_csv, load_checkpoint, read_csv, read_matrix, save_checkpoint

log = logging.getLogger(__name__)

STAGES = ("synth", "train-score", "score-minority", "bin", "train-classifier", "sample", "evaluate")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def stage_seed(seed: int, stage: str) -> int:
    ss = np.random.SeedSequence([seed, zlib.crc32(stage.encode())])
    return int(ss.generate_state(1)[0])


def gmm_from_config(cfg) -> GaussianMixture:
    return GaussianMixture(cfg["dataset.weights"], cfg["dataset.means"], cfg["dataset.variances"])


def schedule_from_config(cfg):
    return build_schedule(cfg["schedule.T"], cfg["schedule.beta_start"], cfg["schedule.beta_end"])


def synth_dataset(gmm: GaussianMixture, n: int, seed: int):
    """``n`` i.i.d. mixture draws and their component labels (for evaluation only)."""
    if n < 1:
        raise ValueError("n must be positive")
    return gmm.sample(n, np.random.default_rng(seed))


def _write_points(path, x, labels=None):
    header = [f"x{i}" for i in range(x.shape[1])]
    if labels is None:
        emit_csv(header, x.tolist(), path)
    else:
        emit_csv(header + ["mode"], [list(r) + [int(m)] for r, m in zip(x, labels)], path)


def _read_dataset(out: Path):
    m = read_matrix(out / "dataset.csv")
    return m[:, :-1], m[:, -1].astype(int)


def _fmt_scale(w):
    return ("%g" % w).replace(".", "p")


def batch_names(cfg):
    names = {"unguided": None}
    for w in cfg["sampling.scales"]:
        if cfg["sampling.mode"] == "class":
            for lt in cfg["sampling.targets"]:
                names[f"class_l{lt}_w{_fmt_scale(w)}"] = GuidanceConfig(lt, float(w), "class")
        else:
            names[f"mixed_w{_fmt_scale(w)}"] = GuidanceConfig(0, float(w), "mixed")
    return names


def run_synth(cfg, out: Path):
    gmm = gmm_from_config(cfg)
    seed = stage_seed(cfg["seed"], "synth")
    x, lab = synth_dataset(gmm, cfg["dataset.n"], seed)
    xh, labh = synth_dataset(gmm, cfg["dataset.n_holdout"], seed + 1)
    _write_points(out / "dataset.csv", x, lab)
    _write_points(out / "holdout.csv", xh, labh)


def run_train_score(cfg, out: Path):
    x, _ = _read_dataset(out)
    sched = schedule_from_config(cfg)
    net = train_score_net(x, sched, cfg["score_net.hidden"], cfg["score_net.steps"],
                          cfg["score_net.batch_size"], cfg["score_net.lr"],
                          stage_seed(cfg["seed"], "train-score"))
    save_checkpoint(out / "eps_net.ckpt", net, "eps", sched, TIME_WIDTH)


def _score_provider(cfg, out, sched):
    net, tw = load_checkpoint(out / "eps_net.ckpt", "eps", sched)
    return NetworkScore(net, sched, tw)


def run_score_minority(cfg, out: Path):
    x, _ = _read_dataset(out)
    sched = schedule_from_config(cfg)
    if cfg["minority.provider"] == "oracle":
        provider = EmpiricalScore(x, sched)
    else:
        provider = _score_provider(cfg, out, sched)
    t = default_score_step(sched, cfg["minority.t_frac"])
    s = minority_scores(x, provider, sched, t, cfg["minority.draws"], cfg["minority.distance"],
                        stage_seed(cfg["seed"], "score-minority"))
    emit_csv(["index", "raw_score"], [[i, v] for i, v in enumerate(s)], out / "minority_scores.csv")


def run_bin(cfg, out: Path):
    _, rows = read_csv(out / "minority_scores.csv")
    scores = np.array([r[1] for r in rows])
    binning, labels = quantile_bins(scores, cfg["minority.classes"])
    emit_csv(["index", "raw_score", "ordinal_class"],
             [[i, s, int(c)] for i, (s, c) in enumerate(zip(scores, labels))], out / "minority_records.csv")
    edges = list(binning.edges) + [np.inf]
    emit_csv(["class", "upper_edge", "representative"],
             [[c, e, r] for c, (e, r) in enumerate(zip(edges, binning.representatives))], out / "binning.csv")


def _read_binning(out: Path):
    _, rows = read_csv(out / "binning.csv")
    return OrdinalBinning(np.array([r[1] for r in rows[:-1]]), np.array([r[2] for r in rows]))


def run_train_classifier(cfg, out: Path):
    x, _ = _read_dataset(out)
    _, rows = read_csv(out / "minority_records.csv")
    labels = np.array([int(r[2]) for r in rows])
    sched = schedule_from_config(cfg)
    clf = train_classifier(labels, x, sched, cfg["classifier.epochs"], stage_seed(cfg["seed"], "train-classifier"),
                           cfg["classifier.hidden"], cfg["classifier.batch_size"], cfg["classifier.lr"],
                           class_count=cfg["minority.classes"])
    save_checkpoint(out / "classifier.ckpt", clf.net, "classifier", sched, clf.time_width)


def run_sample(cfg, out: Path):
    sched = schedule_from_config(cfg)
    provider = _score_provider(cfg, out, sched)
    net, tw = load_checkpoint(out / "classifier.ckpt", "classifier", sched)
    clf = ClassifierModel(net, net.out_dim, sched.T, tw)
    binning = _read_binning(out)
    plan = make_plan(sched, cfg["sampling.plan_length"])
    seed = stage_seed(cfg["seed"], "sample")
    (out / "samples").mkdir(exist_ok=True)
    for name, g in batch_names(cfg).items():
        if g is None:
            x = generate(provider, sched, plan, cfg["sampling.count"], seed)
        else:
            x = guided_generate(provider, clf, binning, sched, plan, g, cfg["sampling.count"], seed)
        _write_points(out / "samples" / f"{name}.csv", x)


def nearest_component(x, gmm: GaussianMixture):
    d = metrics.pairwise_distances(x, gmm.means)
    return np.argmin(d, axis=1)


def run_evaluate(cfg, out: Path):
    gmm = gmm_from_config(cfg)
    minority_comp = int(np.argmin(gmm.weights))
    held = read_matrix(out / "holdout.csv")[:, :-1]
    batches = {"real": _read_dataset(out)[0]}
    for name in batch_names(cfg):
        batches[name] = read_matrix(out / "samples" / f"{name}.csv")
    (out / "metrics").mkdir(exist_ok=True)
    summary = []
    for name, x in batches.items():
        knn = metrics.avg_knn(x, cfg["metrics.k_avgknn"], reference=held)
        lof = metrics.lof(x, cfg["metrics.k_lof"], reference=held)
        prec, rec = metrics.improved_precision_recall(held, x, cfg["metrics.k_precision"])
        frac = float(np.mean(nearest_component(x, gmm) == minority_comp))
        emit_csv(["index", "avg_knn", "lof"], [[i, a, b] for i, (a, b) in enumerate(zip(knn, lof))],
                 out / "metrics" / f"{name}.csv")
        edges, dens = metrics.histogram(lof, cfg["metrics.bins"])
        emit_csv(["bin_lo", "bin_hi", "density"], [[a, b, c] for a, b, c in zip(edges[:-1], edges[1:], dens)],
                 out / "metrics" / f"{name}_lof_hist.csv")
        q25, q75 = np.percentile(lof, [25, 75])
        summary.append([name, len(x), knn.mean(), lof.mean(), q25, q75, prec, rec, frac])
    emit_csv(["batch", "n", "mean_avg_knn", "mean_lof", "lof_q25", "lof_q75", "precision", "recall",
              "minority_mode_fraction"], summary, out / "metrics_summary.csv")


RUNNERS = {
    "synth": run_synth,
    "train-score": run_train_score,
    "score-minority": run_score_minority,
    "bin": run_bin,
    "train-classifier": run_train_classifier,
    "sample": run_sample,
    "evaluate": run_evaluate,
}


def _write_status(out: Path, status: dict):
    (out / "status.json").write_text(json.dumps(status, indent=2, sort_keys=True) + "\n")


def run_stages(cfg, out, stages=STAGES) -> Path:
    """Validate ``cfg`` and run ``stages`` in order, recording progress in ``status.json``.

    Raises :class:`ConfigError` before touching ``out`` if the config is
    invalid, and :class:`StageError` naming the failed stage otherwise.
    """
    validate(cfg)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.txt")
    status_path = out / "status.json"
    status = json.loads(status_path.read_text()) if status_path.exists() else {"stages": {}}
    for stage in stages:
        t0 = time.time()
        status["stages"][stage] = {"state": "running", "started": t0}
        _write_status(out, status)
        try:
            RUNNERS[stage](cfg, out)
        except Exception as exc:
            status["stages"][stage].update(state="failed", error=f"{type(exc).__name__}: {exc}")
            status["state"], status["failed_stage"] = "failed", stage
            _write_status(out, status)
            raise StageError(stage, exc) from exc
        status["stages"][stage].update(state="ok", seconds=round(time.time() - t0, 3))
        log.info("stage %s done in %.1fs", stage, time.time() - t0)
    status["state"] = "ok"
    status.pop("failed_stage", None)
    _write_status(out, status)
    return out


def run_pipeline(cfg, out=None) -> Path:
    return run_stages(cfg, out if out is not None else cfg["output.dir"])
