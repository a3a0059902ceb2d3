"""Treatment-effect estimation with latent-confounder VAEs.

Public surface: the autodiff/net/optimizer primitives, the CEVAE model and
training loop, reference baselines, synthetic benchmark generators, metrics,
the exact discrete proxy-model oracle, and the experiment harness consumed
by the ``cevae`` command-line tool.
"""

from .autodiff import Value, backward
from .baselines import fit_lr1, fit_lr2, fit_naive, fit_tarnet
from .data import Dataset, SplitSpec, load_csv, save_csv, split
from .datagen import (
    ToyConfig,
    TwinsProxyConfig,
    gen_synthetic_twins,
    gen_toy,
    make_proxies,
    make_twins_treatment,
    toy_true_ate,
)
from .layers import DenseNet
from .metrics import att_error, ate_error, auc, pehe, policy_risk, sqrt_pehe
from .model import (
    CevaeConfig,
    CevaeModel,
    EstimateReport,
    elbo,
    estimate_effects,
    full_objective,
    load_checkpoint,
    predict_do,
    save_checkpoint,
)
from .optim import Adamax, TrainingError
from .oracle import BinaryProxyModel, enumerate_small, true_do, wrong_adjust
from .training import TrainConfig, train

__version__ = "0.1.0"
