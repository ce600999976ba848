"""Shared-module multi-task learning: models, closed forms, training and diagnostics."""

from .analysis import (covariance_similarity_score, sin_contraction_check, theorem1_check,
                       transfer_gap, transfer_report, validation_metric)
from .closed_form import (capacity_construction, fit_linear_mtl, greedy_error_bound,
                          head_given_shared, reduced_objective, solve_equal_covariance, solve_same_covariates,
                          stl_solve)
from .estimators import SharedSubspaceRegressor, SVDTaskWeighter
from .exceptions import (ArgumentError, ConfigError, DivergenceError, NumericalFailure,
                         PreconditionError)
from .model import MTLModel, forward, gradients, init_model, objective
from .tasks import (CovarianceSpec, TaskDataset, gen_linear_task, gen_logistic_task,
                    gen_multihead_relu_task, gen_relu_task, make_covariance, make_model_pair)
from .trainer import LossTrace, TrainConfig, train, train_aligned
from .weighting import svd_reweight, uncertainty_weights, uniform_weights

__version__ = "0.1.0"

__all__ = [
    "ArgumentError", "ConfigError", "CovarianceSpec", "DivergenceError", "LossTrace", "MTLModel",
    "NumericalFailure", "PreconditionError", "SVDTaskWeighter", "SharedSubspaceRegressor",
    "TaskDataset", "TrainConfig", "capacity_construction", "covariance_similarity_score",
    "fit_linear_mtl", "forward", "gen_linear_task", "gen_logistic_task", "gen_multihead_relu_task",
    "gen_relu_task", "gradients", "greedy_error_bound", "head_given_shared", "init_model", "make_covariance",
    "make_model_pair", "objective", "reduced_objective", "sin_contraction_check",
    "solve_equal_covariance", "solve_same_covariates", "stl_solve", "svd_reweight",
    "theorem1_check", "train", "train_aligned", "transfer_gap", "transfer_report",
    "uncertainty_weights", "uniform_weights", "validation_metric",
]
