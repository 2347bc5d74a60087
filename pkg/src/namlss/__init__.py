"""Additive per-feature networks that fit every parameter of a response
distribution by minimizing its negative log-likelihood.

Quick start::

    from namlss import SynthConfig, TrainConfig, build, synth_dataset, train

    ds = synth_dataset(SynthConfig(family="normal", n=3000, seed=7))
    m = build("normal", "per-parameter", 5, (64, 32), seed=1)
    m, history = train(m, ds.x, ds.y, TrainConfig(learning_rate=1e-3))
"""

from .backend import BACKEND
from .data import (Dataset, FoldPlan, PreprocessSpec, SynthConfig, kfold,
                   preprocess, read_csv, sample, synth_dataset, synth_params)
from .errors import (ConfigError, ContractError, DataError, FormatError,
                     NamlssError, NumericError, ShapeError, SupportError)
from .families import (FAMILIES, FamilyDescriptor, activate, activation_grad,
                       approx_params_from_mean, get_family, log_gamma, mean,
                       nll, nll_grad, nll_terms)
from .metrics import (MetricReport, aggregate_folds, auc_riemann,
                      heldout_loglik, mean_gamma_deviance, mse)
from .model import (PER_PARAMETER, SHARED, BaselineModel, InteractionModel,
                    NamlssModel, ShapeFunctionTable, build, build_dnn,
                    build_mlp, build_nam, deserialize, fit_interactions,
                    serialize, shape_functions)
from .numerics import (LayerSpec, MlpParams, gradient_check, init_mlp,
                       make_dropout_masks, mlp_backward, mlp_forward,
                       stack_specs)
from .rng import stream
from .training import (PRESETS, AdamState, TrainConfig, TrainHistory, adam_step,
                    feature_dropout_mask, get_preset, train)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BaselineModel", "ConfigError", "ContractError", "DataError",
    "Dataset", "FAMILIES", "FamilyDescriptor", "FoldPlan", "FormatError",
    "InteractionModel", "LayerSpec", "MetricReport", "MlpParams",
    "NamlssError", "NamlssModel", "NumericError", "PER_PARAMETER", "PRESETS",
    "PreprocessSpec", "SHARED", "ShapeError", "ShapeFunctionTable",
    "SupportError", "SynthConfig", "TrainConfig", "TrainHistory", "AdamState",
    "activate", "activation_grad", "adam_step", "aggregate_folds",
    "approx_params_from_mean", "auc_riemann", "build", "build_dnn",
    "build_mlp", "build_nam", "deserialize", "feature_dropout_mask",
    "fit_interactions", "get_family", "get_preset", "gradient_check",
    "heldout_loglik", "init_mlp", "kfold", "log_gamma", "make_dropout_masks",
    "mean", "mean_gamma_deviance", "metrics", "mlp_backward", "mlp_forward",
    "mse", "nll", "nll_grad", "nll_terms", "preprocess", "read_csv", "sample",
    "serialize", "shape_functions", "stack_specs", "stream", "synth_dataset",
    "synth_params", "train",
]
