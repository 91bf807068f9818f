"""Gaussian-mixture binary classification data under planar rotation.

The base distribution lives in R^2: the label y and a latent switch eps are
independent Rademacher draws, x1 is Gaussian around one of two horizontal
centers selected by y, and x2 is Gaussian around mu*eps for positive labels
and around 0 for negative ones. A rotated variant applies a fixed rotation to
every sample. Sampling is counter-based (Philox) with inverse-CDF Gaussians,
and the rotated dataset for a given seed is exactly the rotation of the
unrotated one, which makes equivariance checks exact rather than statistical.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .linalg import rotation_matrix, std_normal

FLOAT_FMT = "%.17g"
SQRT_HALF_PI = np.sqrt(np.pi / 2.0)


@dataclass(frozen=True)
class MixtureParams:
    """Slope/scale/noise triple (omega, mu, sigma) defining the mixture.

    The two derived horizontal centers are coupled to omega and mu so that
    the optimal decision boundary passes through the origin.
    """

    omega: float
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.omega > 1.0:
            raise ValueError(f"omega must exceed 1, got {self.omega}")
        if not self.mu > 0.0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def mu1(self) -> float:
        return 0.5 * self.mu * (self.omega - 1.0 / self.omega)

    @property
    def mu3(self) -> float:
        return 0.5 * self.mu * (self.omega + 1.0 / self.omega)

    @property
    def snr(self) -> float:
        return self.mu / self.sigma


@dataclass(frozen=True)
class ClusterMeans:
    mu_plus: np.ndarray
    mu_pm: np.ndarray
    mu_minus: np.ndarray


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (n, 2)
    labels: np.ndarray  # (n,) values in {-1, +1}
    gamma: float
    seed: int
    params: MixtureParams

    def __post_init__(self):
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels disagree in length")
        if not np.isin(self.labels, (-1, 1)).all():
            raise ValueError("labels must be +/-1")

    def __len__(self) -> int:
        return self.labels.shape[0]


def derive_means(omega: float, mu: float) -> tuple[float, float]:
    """Horizontal centers (mu1, mu3) implied by slope omega and scale mu."""
    p = MixtureParams(omega=omega, mu=mu, sigma=1.0)
    return p.mu1, p.mu3


def cluster_means(params: MixtureParams) -> ClusterMeans:
    """Conditional means of x for the three mixture components (gamma = 0)."""
    half = 0.5 * params.mu
    a = params.omega - 1.0 / params.omega
    b = params.omega + 1.0 / params.omega
    return ClusterMeans(
        mu_plus=np.array([half * a, params.mu]),
        mu_pm=np.array([half * a, -params.mu]),
        mu_minus=np.array([-half * b, 0.0]),
    )


def _inverse_cdf_normal(u: np.ndarray) -> np.ndarray:
    # random() lands in [0, 1); nudge exact zeros off the pole of ndtri
    return ndtri(np.where(u == 0.0, np.finfo(float).tiny, u))


def sample(params: MixtureParams, gamma: float, n: int, seed: int) -> Dataset:
    """Draw n labelled points from the mixture rotated by ``gamma`` radians.

    The draw order per dataset is fixed (labels, switches, two Gaussian
    coordinates), and the rotation is applied to the finished base sample, so
    datasets sharing a seed share their underlying randomness across angles.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.Generator(np.random.Philox(key=seed))
    y = np.where(rng.random(n) < 0.5, -1, 1)
    eps = np.where(rng.random(n) < 0.5, -1, 1)
    z1 = _inverse_cdf_normal(rng.random(n))
    z2 = _inverse_cdf_normal(rng.random(n))
    mu1, mu3 = params.mu1, params.mu3
    x1 = 0.5 * (mu1 - mu3) + y * 0.5 * (mu1 + mu3) + params.sigma * z1
    x2 = params.mu * eps * (y + 1) / 2.0 + params.sigma * z2
    base = np.stack([x1, x2], axis=1)
    feats = base @ rotation_matrix(gamma).T
    return Dataset(features=feats, labels=y, gamma=gamma, seed=seed, params=params)


def bayes_decision_value(params: MixtureParams, gamma: float, x: np.ndarray):
    """Signed decision function of the optimal classifier; >= 0 means +1.

    For gamma = 0 the rule compares x2 against a slope -omega line with a
    logistic correction; for other angles the unrotated rule is evaluated at
    the back-rotated point. Accepts a single point or an (n, 2) array.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if gamma != 0.0:
        pts = pts @ rotation_matrix(gamma)  # rows become U(gamma)^T x
    x1, x2 = pts[:, 0], pts[:, 1]
    s2_over_mu = params.sigma**2 / params.mu
    # log((1 + exp(-2 mu x2 / sigma^2)) / 2), stable for large |x2|
    t = -2.0 * params.mu * x2 / params.sigma**2
    log_term = np.logaddexp(0.0, t) - np.log(2.0)
    val = x2 + params.omega * x1 + s2_over_mu * log_term
    return float(val[0]) if single else val


def bayes_predict(params: MixtureParams, gamma: float, x: np.ndarray):
    """Optimal label (+1/-1) at x under the gamma-rotated mixture."""
    val = bayes_decision_value(params, gamma, x)
    if np.isscalar(val):
        return 1 if val >= 0.0 else -1
    return np.where(val >= 0.0, 1, -1)


def c_mu(params: MixtureParams) -> float:
    """Lower bound on p_plus + p_pm + 2*p_minus, a value in [1/2, 1]."""
    arg = params.snr * min(1.0, 0.5 * (params.omega - 1.0 / params.omega))
    return std_normal(arg)[1]


def check_assumption2(params: MixtureParams, gamma: float) -> tuple[bool, float]:
    """Signal-to-noise condition for the uniform gradient sign pattern.

    Returns (satisfied, slack) where slack is the margin by which 1/S clears
    the angle-dependent threshold sqrt(pi/2) * ((c omega - 2/omega) sin(gamma)
    - cos(gamma)); only gamma in (0, pi/4] is supported.
    """
    if not 0.0 < gamma <= np.pi / 4:
        raise ValueError(
            f"gamma={gamma} outside the supported interval (0, pi/4]; "
            "other angles are unchecked"
        )
    c = c_mu(params)
    omega_ok = params.omega > np.sqrt(2.0 / c)
    rhs = SQRT_HALF_PI * (
        (c * params.omega - 2.0 / params.omega) * np.sin(gamma) - np.cos(gamma)
    )
    slack = rhs - 1.0 / params.snr
    return bool(omega_ok and slack >= 0.0), float(slack)


def dataset_to_csv(dataset: Dataset, path) -> None:
    """Write features and labels as x1,x2,y with 17 significant digits."""
    with open(path, "w", newline="\n") as fh:
        fh.write("x1,x2,y\n")
        for (x1, x2), y in zip(dataset.features, dataset.labels):
            fh.write(f"{FLOAT_FMT % x1},{FLOAT_FMT % x2},{int(y):+d}\n")


def dataset_from_csv(path, params: MixtureParams, gamma: float, seed: int) -> Dataset:
    """Read a CSV written by :func:`dataset_to_csv`.

    The file carries only features and labels; distribution metadata is
    supplied by the caller.
    """
    feats, labels = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["x1", "x2", "y"]:
            raise ValueError(f"unexpected CSV header {header}")
        for row in reader:
            feats.append((float(row[0]), float(row[1])))
            labels.append(int(row[2]))
    return Dataset(
        features=np.array(feats),
        labels=np.array(labels),
        gamma=gamma,
        seed=seed,
        params=params,
    )
