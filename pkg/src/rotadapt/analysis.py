"""Decision-boundary extraction, risk measurement, and coupling residuals.

Boundaries are zero level sets of a real-valued predictor traced by marching
squares on a uniform grid with linear interpolation of edge crossings. Risk
is Monte-Carlo misclassification probability against fresh mixture samples,
always paired with the optimal rule evaluated on the same draw.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .datagen import MixtureParams, bayes_decision_value, sample
from .linalg import rotation_matrix, vec
from .model import Architecture
from .optim import Trajectory

DEFAULT_BBOX = (-8.0, 8.0, -8.0, 8.0)
DEFAULT_RESOLUTION = 512

# Cell corner bit order: A = (i, j), B = (i+1, j), C = (i+1, j+1), D = (i, j+1)
# Edges: b = AB, r = BC, t = DC, l = AD. One or two segments per sign case.
_CASE_SEGMENTS = {
    1: [("l", "b")],
    2: [("b", "r")],
    3: [("l", "r")],
    4: [("r", "t")],
    6: [("b", "t")],
    7: [("l", "t")],
    8: [("t", "l")],
    9: [("b", "t")],
    11: [("r", "t")],
    12: [("r", "l")],
    13: [("b", "r")],
    14: [("l", "b")],
}
_SADDLE_SEGMENTS = {
    # (case, center >= 0) -> segments
    (5, True): [("l", "t"), ("b", "r")],
    (5, False): [("l", "b"), ("r", "t")],
    (10, True): [("l", "b"), ("r", "t")],
    (10, False): [("l", "t"), ("b", "r")],
}


@dataclass
class Boundary:
    """Traced zero level set: (n, 2, 2) segment endpoints plus grid metadata."""

    segments: np.ndarray
    bbox: tuple[float, float, float, float]
    resolution: int

    @property
    def points(self) -> np.ndarray:
        return self.segments.reshape(-1, 2)

    @property
    def cell_size(self) -> float:
        x0, x1, _, _ = self.bbox
        return (x1 - x0) / (self.resolution - 1)


def _edge_points(edge, xs, ys, ii, jj, f):
    """Interpolated zero crossings on one named edge of the selected cells."""
    fa = f[ii, jj]
    fb = f[ii + 1, jj]
    fc = f[ii + 1, jj + 1]
    fd = f[ii, jj + 1]
    if edge == "b":
        f1, f2 = fa, fb
        p1 = np.stack([xs[ii], ys[jj]], axis=1)
        p2 = np.stack([xs[ii + 1], ys[jj]], axis=1)
    elif edge == "r":
        f1, f2 = fb, fc
        p1 = np.stack([xs[ii + 1], ys[jj]], axis=1)
        p2 = np.stack([xs[ii + 1], ys[jj + 1]], axis=1)
    elif edge == "t":
        f1, f2 = fd, fc
        p1 = np.stack([xs[ii], ys[jj + 1]], axis=1)
        p2 = np.stack([xs[ii + 1], ys[jj + 1]], axis=1)
    else:
        f1, f2 = fa, fd
        p1 = np.stack([xs[ii], ys[jj]], axis=1)
        p2 = np.stack([xs[ii], ys[jj + 1]], axis=1)
    t = (f1 / (f1 - f2))[:, None]
    return p1 + t * (p2 - p1)


def extract_boundary(
    predictor,
    bbox: tuple[float, float, float, float] = DEFAULT_BBOX,
    resolution: int = DEFAULT_RESOLUTION,
) -> Boundary:
    """Marching-squares zero contour of ``predictor`` over a uniform grid.

    ``predictor`` maps an (n, 2) array to n real values; points with value
    >= 0 count as the positive region. Saddle cells are disambiguated by the
    corner average.
    """
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    x0, x1, y0, y1 = bbox
    xs = np.linspace(x0, x1, resolution)
    ys = np.linspace(y0, y1, resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    values = np.asarray(
        predictor(np.stack([gx.ravel(), gy.ravel()], axis=1)), dtype=float
    )
    if not np.isfinite(values).all():
        raise FloatingPointError("predictor returned a non-finite grid value")
    f = values.reshape(resolution, resolution)

    pos = f >= 0.0
    code = (
        pos[:-1, :-1].astype(np.int8)
        + 2 * pos[1:, :-1]
        + 4 * pos[1:, 1:]
        + 8 * pos[:-1, 1:]
    )
    segments = []

    def emit(mask, seg_list):
        ii, jj = np.nonzero(mask)
        if ii.size == 0:
            return
        for e1, e2 in seg_list:
            a = _edge_points(e1, xs, ys, ii, jj, f)
            b = _edge_points(e2, xs, ys, ii, jj, f)
            segments.append(np.stack([a, b], axis=1))

    for case, seg_list in _CASE_SEGMENTS.items():
        emit(code == case, seg_list)
    for case in (5, 10):
        cells = code == case
        if not cells.any():
            continue
        center = 0.25 * (f[:-1, :-1] + f[1:, :-1] + f[1:, 1:] + f[:-1, 1:])
        emit(cells & (center >= 0.0), _SADDLE_SEGMENTS[(case, True)])
        emit(cells & (center < 0.0), _SADDLE_SEGMENTS[(case, False)])

    if segments:
        all_segments = np.concatenate(segments, axis=0)
    else:
        all_segments = np.zeros((0, 2, 2))
    return Boundary(segments=all_segments, bbox=bbox, resolution=resolution)


def boundary_to_csv(boundary: Boundary, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("seg_id,x1,x2\n")
        for k, seg in enumerate(boundary.segments):
            for pt in seg:
                fh.write(f"{k},{'%.17g' % pt[0]},{'%.17g' % pt[1]}\n")


@dataclass
class RiskReport:
    risk: float
    stderr: float
    n_mc: int
    bayes_risk: float
    bayes_stderr: float
    excess_risk: float

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2)
            fh.write("\n")


def classification_risk(
    predictor, params: MixtureParams, gamma: float, n_mc: int, seed: int
) -> RiskReport:
    """Monte-Carlo misclassification risk on fresh draws, paired with the
    optimal rule on the same sample."""
    if n_mc < 10**4:
        raise ValueError("need at least 1e4 Monte-Carlo samples")
    ds = sample(params, gamma, n_mc, seed)
    pred = np.where(np.asarray(predictor(ds.features)) >= 0.0, 1, -1)
    err = (pred != ds.labels).astype(float)
    bayes = np.where(bayes_decision_value(params, gamma, ds.features) >= 0.0, 1, -1)
    bayes_err = (bayes != ds.labels).astype(float)
    risk = float(err.mean())
    bayes_risk = float(bayes_err.mean())
    return RiskReport(
        risk=risk,
        stderr=float(np.sqrt(risk * (1.0 - risk) / n_mc)),
        n_mc=n_mc,
        bayes_risk=bayes_risk,
        bayes_stderr=float(np.sqrt(bayes_risk * (1.0 - bayes_risk) / n_mc)),
        excess_risk=risk - bayes_risk,
    )


def paired_risk_difference(
    predictor_a, predictor_b, params: MixtureParams, gamma: float, n_mc: int, seed: int
) -> tuple[float, float]:
    """risk(a) - risk(b) on a shared sample, with the paired standard error."""
    ds = sample(params, gamma, n_mc, seed)
    pred_a = np.where(np.asarray(predictor_a(ds.features)) >= 0.0, 1, -1)
    pred_b = np.where(np.asarray(predictor_b(ds.features)) >= 0.0, 1, -1)
    diff = (pred_a != ds.labels).astype(float) - (pred_b != ds.labels).astype(float)
    return float(diff.mean()), float(diff.std(ddof=1) / np.sqrt(n_mc))


def row_direction_convergence(traj: Trajectory, arch: Architecture) -> np.ndarray:
    """Per-snapshot minimum cosine between hidden rows and their sign-matched
    diagonal target a_k (1, 1) / sqrt(2).

    Only defined for the fixed-outer two-layer family on 2-D inputs.
    """
    if arch.dims[0] != 2 or arch.weight_trainable != (True, False):
        raise ValueError("expects the fixed-outer two-layer family on 2-D inputs")
    m = arch.dims[1]
    a = arch.fixed_weights[1][0]
    target = np.stack([a, a], axis=1) / np.sqrt(2.0)
    mins = np.empty(len(traj))
    for t, theta in enumerate(traj.thetas):
        w = theta.reshape(m, 2, order="F")
        norms = np.linalg.norm(w, axis=1)
        if (norms == 0.0).any():
            raise ValueError(f"zero weight row encountered at snapshot {t}")
        mins[t] = ((w / norms[:, None]) * target).sum(axis=1).min()
    return mins


def equivariance_residual(
    traj_rot: Trajectory, traj_base: Trajectory, q: np.ndarray
) -> float:
    """max_t ||theta_t^rot - Q^T theta_t^base|| / (1 + ||theta_t^base||)."""
    if len(traj_rot) != len(traj_base):
        raise ValueError("trajectories have different lengths")
    mapped = traj_base.thetas @ q  # rows become Q^T theta_t
    num = np.linalg.norm(traj_rot.thetas - mapped, axis=1)
    den = 1.0 + np.linalg.norm(traj_base.thetas, axis=1)
    return float((num / den).max())


def boundary_equivariance_check(
    predictor_rot, predictor_base, gamma: float, probes: np.ndarray
) -> float:
    """sup over probes of |f_rot(x) - f_base(U(gamma)^T x)|."""
    probes = np.asarray(probes, dtype=float)
    if probes.size == 0:
        raise ValueError("need at least one probe point")
    back = probes @ rotation_matrix(gamma)  # rows become U^T x
    return float(
        np.abs(
            np.asarray(predictor_rot(probes)) - np.asarray(predictor_base(back))
        ).max()
    )
