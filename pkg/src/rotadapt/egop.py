"""Expected gradient outer product estimation and orthogonal reparameterization.

The estimator averages outer products of oracle gradients at parameter points
drawn from an isotropic Gaussian. Its eigenbasis V defines a change of
variables theta -> V theta; minimizing the composed objective with any
deterministic first-order method gives trajectories that are invariant to
rotations of the underlying data, and solutions map back through V.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from . import linalg
from .optim import GradOracle

DEGENERACY_REL_GAP = 1e-10


@dataclass(frozen=True)
class SamplingSpec:
    """Isotropic Gaussian probe distribution, scale * N(0, I), seeded."""

    scale: float
    seed: int

    def __post_init__(self):
        if not self.scale > 0.0:
            raise ValueError("scale must be positive")


@dataclass
class EgopEstimate:
    matrix: np.ndarray  # (p, p) symmetric PSD
    samples: int
    spec: SamplingSpec | None
    degenerate: bool | None = None  # set when the eigenbasis is extracted


def sample_probe_points(spec: SamplingSpec, count: int, dim: int) -> np.ndarray:
    """Deterministic (count, dim) Gaussian probe matrix for the given spec."""
    rng = np.random.Generator(np.random.Philox(key=spec.seed))
    u = rng.random((count, dim))
    z = ndtri(np.where(u == 0.0, np.finfo(float).tiny, u))
    return spec.scale * z


def egop_from_points(oracle: GradOracle, points: np.ndarray) -> np.ndarray:
    """Average gradient outer product over explicit probe points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != oracle.dim:
        raise ValueError("probe points do not match the oracle dimension")
    acc = np.zeros((oracle.dim, oracle.dim))
    for i, theta in enumerate(points):
        _, grad = oracle(theta)
        if not np.isfinite(grad).all():
            raise FloatingPointError(f"non-finite gradient at probe point {i}")
        acc += np.outer(grad, grad)
    acc /= points.shape[0]
    return 0.5 * (acc + acc.T)


def estimate_egop(oracle: GradOracle, spec: SamplingSpec, count: int) -> EgopEstimate:
    """Monte-Carlo gradient outer product estimate with ``count`` probes."""
    if count < 1:
        raise ValueError("need at least one probe point")
    points = sample_probe_points(spec, count, oracle.dim)
    return EgopEstimate(
        matrix=egop_from_points(oracle, points), samples=count, spec=spec
    )


def egop_basis(estimate: EgopEstimate) -> np.ndarray:
    """Orthogonal eigenbasis of the estimate, columns by descending eigenvalue.

    Flags (and warns about) near-degenerate spectra, where the basis is not
    unique.
    """
    eig = linalg.sym_eig(estimate.matrix)
    lam = eig.eigenvalues
    lam_max = max(abs(lam[0]), abs(lam[-1]))
    degenerate = bool(
        lam.size > 1 and (np.diff(lam) > -DEGENERACY_REL_GAP * max(lam_max, 1e-300)).any()
    )
    estimate.degenerate = degenerate
    if degenerate:
        warnings.warn(
            "near-degenerate spectrum: the eigenbasis is not unique",
            RuntimeWarning,
            stacklevel=2,
        )
    return linalg.require_orthogonal(eig.eigenvectors)


def reparameterized_oracle(oracle: GradOracle, v: np.ndarray) -> GradOracle:
    """Oracle of the composed objective theta -> L(V theta).

    Returns values (L(V theta), V^T grad L(V theta)). Solutions found in the
    new coordinates map back through :func:`recover_solution`.
    """
    v = linalg.require_orthogonal(v)
    if v.shape[0] != oracle.dim:
        raise ValueError("basis dimension does not match the oracle")

    def fn(theta):
        loss, grad = oracle(v @ theta)
        return loss, v.T @ grad

    return GradOracle(dim=oracle.dim, fn=fn)


def recover_solution(v: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Map a solution of the composed objective back to original coordinates."""
    return np.asarray(v, dtype=float) @ np.asarray(theta, dtype=float)


def coupled_basis(v_base: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Eigenbasis of the rotated problem implied by the parameter rotation q.

    Computes Q^T V_base directly, which bypasses a second eigendecomposition
    and is exact for rotation-coupled gradient sampling.
    """
    v_base = linalg.require_orthogonal(v_base)
    q = linalg.require_orthogonal(q)
    if v_base.shape != q.shape:
        raise ValueError("basis and rotation dimensions disagree")
    return q.T @ v_base
