"""Rotation sensitivity and equivariance of adaptive gradient methods.

A desk-scale numerical laboratory: a planar Gaussian-mixture classification
task with an adjustable rotation, small ReLU networks with exact gradients,
literal implementations of GD, Adam, SignGD and Shampoo, gradient-outer-
product reparameterization, and boundary/risk analysis tooling.
"""

from .datagen import MixtureParams, Dataset, sample, bayes_predict, check_assumption2
from .linalg import rotation_matrix, param_rotation, sym_eig, inv_root
from .loss import make_sample_loss_oracle, population_grad_row, sign_pattern_holds
from .model import make_fixed_outer_two_layer, make_full_two_layer, forward
from .optim import GradOracle, Trajectory, gd_run, adam_run, signgd_run, shampoo_run
from .egop import SamplingSpec, estimate_egop, egop_basis, reparameterized_oracle
from .analysis import extract_boundary, classification_risk, equivariance_residual

__version__ = "0.1.0"

__all__ = [
    "MixtureParams",
    "Dataset",
    "sample",
    "bayes_predict",
    "check_assumption2",
    "rotation_matrix",
    "param_rotation",
    "sym_eig",
    "inv_root",
    "make_sample_loss_oracle",
    "population_grad_row",
    "sign_pattern_holds",
    "make_fixed_outer_two_layer",
    "make_full_two_layer",
    "forward",
    "GradOracle",
    "Trajectory",
    "gd_run",
    "adam_run",
    "signgd_run",
    "shampoo_run",
    "SamplingSpec",
    "estimate_egop",
    "egop_basis",
    "reparameterized_oracle",
    "extract_boundary",
    "classification_risk",
    "equivariance_residual",
    "__version__",
]
