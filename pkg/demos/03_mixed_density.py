"""The mixed-density sampler: one knob instead of a target class.

Rather than picking a class, the mixed-density sampler tilts the data density
by the expected minority score under the classifier, sum_i tau_i p(i | x_t),
where tau_i is the mean raw score of class i. Raising the weight w moves mass
toward rarer regions, which shows up as a rising mean LOF.

This uses the exact mixture score as the provider so only the classifier is
trained.

Run: python demos/03_mixed_density.py
"""

import numpy as np

from minority_guidance import (GaussianMixture, GmmScore, GuidanceConfig, build_schedule, guided_generate, lof,
                               make_plan, minority_scores, quantile_bins, train_classifier)

sched = build_schedule()
gmm = GaussianMixture([0.95, 0.05], [[0.0, 0.0], [4.0, 0.0]], [1.0, 0.25])
rng = np.random.default_rng(0)
x, _ = gmm.sample(3000, rng)
held, _ = gmm.sample(3000, rng)
provider = GmmScore(gmm, sched)

binning, labels = quantile_bins(minority_scores(x, provider, sched, seed=1), 10)
print("class representatives:", np.round(binning.representatives, 3))
clf = train_classifier(labels, x, sched, epochs=80, seed=2)

plan = make_plan(sched, 100)
for w in (0.0, 5.0, 20.0):
    batch = guided_generate(provider, clf, binning, sched, plan, GuidanceConfig(0, w, "mixed"), 1000, seed=3)
    v = lof(batch, 20, reference=held)
    q25, q75 = np.percentile(v, [25, 75])
    print(f"w={w:>4}: mean LOF {v.mean():.3f}  (quartiles {q25:.3f} .. {q75:.3f})")
