"""Steering a trained sampler toward rare or common regions.

We train a small noise-prediction network on the 95/5 mixture, score the
training set with it, split the scores into ordinal classes, and train a
noise-conditioned classifier on those classes. Adding the classifier's
log-gradient to the score during sampling then targets a chosen class:
class 0 gives prototypical samples, the top class gives rare ones.

Reduced budgets keep this to a couple of minutes on one core.

Run: python demos/02_minority_guidance.py
"""

import numpy as np

from minority_guidance import (GaussianMixture, GuidanceConfig, NetworkScore, build_schedule, generate,
                               guided_generate, improved_precision_recall, lof, make_plan, minority_scores,
                               quantile_bins, train_classifier, train_score_net)

sched = build_schedule()
gmm = GaussianMixture([0.95, 0.05], [[0.0, 0.0], [4.0, 0.0]], [1.0, 0.25])
rng = np.random.default_rng(0)
x, mode = gmm.sample(3000, rng)
held, _ = gmm.sample(3000, rng)

print("training the noise-prediction network ...")
provider = NetworkScore(train_score_net(x, sched, steps=3000, seed=1), sched)

scores = minority_scores(x, provider, sched, seed=2)
binning, labels = quantile_bins(scores, 10)
print("training the minority classifier ...")
clf = train_classifier(labels, x, sched, epochs=80, seed=3)

plan = make_plan(sched, 100)


def describe(name, batch):
    far = np.linalg.norm(batch - gmm.means[1], axis=1) < np.linalg.norm(batch - gmm.means[0], axis=1)
    prec, _ = improved_precision_recall(held, batch, 5)
    print(f"{name:>12}: small-mode share {far.mean():.3f}, mean LOF {lof(batch, 20, reference=held).mean():.3f}, "
          f"precision {prec:.3f}")


describe("unguided", generate(provider, sched, plan, 1000, seed=4))
for target in (0, 5, 9):
    describe(f"class {target}", guided_generate(provider, clf, binning, sched, plan, GuidanceConfig(target, 2.0),
                                                1000, seed=4))
