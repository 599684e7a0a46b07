"""Minority score and minority guidance for diffusion models, at desk scale."""

from .diffusion import (NoiseSchedule, StepPlan, ancestral_step, build_schedule, generate, make_plan,
                        perturb)
from .guidance import (ClassifierModel, GuidanceConfig, guided_generate, guided_score,
                       mixed_density_score, train_classifier)
from .metrics import avg_knn, histogram, improved_precision_recall, lof
from .minority import (OrdinalBinning, distance, minority_score, minority_scores, quantile_bins,
                       tweedie_denoise)
from .scores import (EmpiricalScore, GaussianMixture, GmmScore, NetworkScore, dsm_loss_and_grads,
                     empirical_optimal_score, gmm_score, network_score, train_score_net)

__version__ = "0.1.0"
