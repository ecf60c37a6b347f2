"""Differentially private model aggregation across data silos.

Private logistic-regression models (DPPSGD or AMP) are trained per partner
and combined for a target partner by a gradient-boosted stacker.
"""

from ._backend import NAME as BACKEND
from .aggregation import EnsembleModel, build_ensemble, build_stack_features, load_ensemble, predict_ensemble, save_ensemble, train_stacker
from .amp import AmpHyperparams, calibrate_amp, train_amp
from .core_math import LossBounds, LossConfig, derive_bounds, loss, loss_gradient, project_to_ball, sigmoid
from .data import (
    GeneratorConfig,
    NormalizationConfig,
    PartnerDataset,
    Period,
    generate_synthetic_partners,
    load_partner_csv,
    normalize_dataset,
    normalize_records,
    train_test_split,
    write_partner_csv,
)
from .dppsgd import DppsgdHyperparams, train_dppsgd, train_non_private, tune_C
from .errors import *  # noqa: F401,F403
from .evaluation import EvalReport, auc, quartiles, relative_lift, summarize
from .gbdt import Forest, GbdtParams, fit_gbdt
from .models import Algorithm, PrivateModel
from .privacy_noise import PrivacyBudget, child_rng, dppsgd_sensitivity, gaussian_sigma, sample_l2_laplace, split_budget

__version__ = "0.1.0"
