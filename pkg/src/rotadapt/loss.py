"""Linear correlation loss: full-batch sample form and closed population form.

The sample objective is L_N(theta) = -(1/N) sum_k y_k f(theta; x_k). For the
fixed-outer two-layer family on the rotated mixture, the population gradient
of row w_k has the closed form

    -(sigma a_k / 4) (U (p+ mu+ + p+- mu+- - 2 p- mu-) / sigma
                      + w_bar (p+ G+ + p+- G+- - 2 p- G-))

where p_alpha = Phi(<U mu_alpha, w_bar> / sigma) and G_alpha is the matching
Mills ratio phi/Phi. It depends on w only through its direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datagen import Dataset, MixtureParams, cluster_means
from .linalg import rotation_matrix, std_normal
from .model import Architecture, value_and_weighted_grad
from .optim import GradOracle


def sample_loss_grad(
    dataset: Dataset, arch: Architecture, theta: np.ndarray
) -> tuple[float, np.ndarray]:
    """Loss and exact full-batch gradient of the sample correlation loss."""
    n = len(dataset)
    if n == 0:
        raise ValueError("dataset is empty")
    coeffs = -dataset.labels / n
    outputs, grad = value_and_weighted_grad(arch, theta, dataset.features, coeffs)
    return float(coeffs @ outputs), grad


def make_sample_loss_oracle(dataset: Dataset, arch: Architecture) -> GradOracle:
    """Wrap the sample loss as a deterministic first-order oracle."""
    return GradOracle(
        dim=arch.n_params(),
        fn=lambda theta: sample_loss_grad(dataset, arch, theta),
    )


@dataclass(frozen=True)
class PGammaTerms:
    """Component probabilities and Mills ratios for a weight direction."""

    p_plus: float
    p_pm: float
    p_minus: float
    gamma_plus: float
    gamma_pm: float
    gamma_minus: float


def _terms_arrays(params: MixtureParams, gamma: float, w_rows: np.ndarray):
    """(p, Gamma) arrays of shape (m, 3) for unit rows; shared by the ops."""
    norms = np.linalg.norm(w_rows, axis=1)
    if (norms == 0.0).any():
        raise ValueError("weight rows must be nonzero")
    w_bar = w_rows / norms[:, None]
    u = rotation_matrix(gamma)
    means = cluster_means(params)
    rotated = np.stack(
        [u @ means.mu_plus, u @ means.mu_pm, u @ means.mu_minus], axis=1
    )  # (2, 3)
    z = (w_bar @ rotated) / params.sigma
    pdf, cdf = std_normal(z)
    return w_bar, rotated, cdf, pdf / cdf


def p_gamma_terms(params: MixtureParams, gamma: float, w: np.ndarray) -> PGammaTerms:
    """Probabilities p_alpha and Mills ratios for a single weight vector."""
    _, _, p, g = _terms_arrays(params, gamma, np.asarray(w, dtype=float)[None, :])
    return PGammaTerms(
        p_plus=float(p[0, 0]),
        p_pm=float(p[0, 1]),
        p_minus=float(p[0, 2]),
        gamma_plus=float(g[0, 0]),
        gamma_pm=float(g[0, 1]),
        gamma_minus=float(g[0, 2]),
    )


def population_grad(
    params: MixtureParams, gamma: float, a: np.ndarray, w: np.ndarray
) -> np.ndarray:
    """Closed-form population gradient, one 2-vector per hidden row."""
    a = np.asarray(a, dtype=float)
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[1] != 2:
        raise ValueError("weights must be an (m, 2) matrix")
    if a.shape != (w.shape[0],):
        raise ValueError("one outer weight per hidden row is required")
    w_bar, rotated, p, g = _terms_arrays(params, gamma, w)
    signs = np.array([1.0, 1.0, -2.0])
    mean_part = (rotated * (p * signs)[:, None, :]).sum(axis=2) / params.sigma
    mills_part = (p * g * signs).sum(axis=1)
    return (
        -(params.sigma / 4.0)
        * a[:, None]
        * (mean_part + w_bar * mills_part[:, None])
    )


def population_grad_row(
    params: MixtureParams, gamma: float, a_k: float, w: np.ndarray
) -> np.ndarray:
    """Single-row convenience form of :func:`population_grad`."""
    if a_k not in (-1.0, 1.0, -1, 1):
        raise ValueError("outer weight must be +/-1")
    return population_grad(
        params, gamma, np.array([float(a_k)]), np.asarray(w, dtype=float)[None, :]
    )[0]


def sign_pattern_holds(
    params: MixtureParams, gamma: float, a: np.ndarray, w: np.ndarray
) -> bool:
    """True when every row gradient has strict signs -a_k in both coordinates.

    An exactly-zero coordinate counts as a violation.
    """
    grads = population_grad(params, gamma, np.asarray(a, dtype=float), w)
    target = -np.asarray(a, dtype=float)[:, None]
    return bool((np.sign(grads) == np.sign(target)).all() and (grads != 0.0).all())
