"""Deterministic first-order update rules: GD, Adam, SignGD, Shampoo.

Every runner maps (oracle, theta0, hyperparameters) to a Trajectory and is a
pure function of its inputs: identical bits in give identical bits out. The
Adam runner follows the literal pseudocode ordering in which the step is taken
with the previous moments and the gradient is then evaluated at the new point
(so the first step is a no-op); a ``standard_order`` flag switches to the
conventional gradient-first ordering.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linalg import inv_root, unvec, vec
from .model import ParamLayout


@dataclass(frozen=True)
class GradOracle:
    """First-order access to an objective: theta -> (loss, gradient)."""

    dim: int
    fn: Callable[[np.ndarray], tuple[float, np.ndarray]]

    def __call__(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        loss, grad = self.fn(np.asarray(theta, dtype=float))
        grad = np.asarray(grad, dtype=float)
        if grad.shape != (self.dim,):
            raise ValueError(f"oracle returned gradient of shape {grad.shape}")
        return float(loss), grad


@dataclass
class Trajectory:
    """Recorded iterates and losses of one optimizer run."""

    thetas: np.ndarray  # (k, p)
    losses: np.ndarray  # (k,)
    steps: np.ndarray  # (k,) iteration index of each snapshot
    stride: int = 1
    fingerprint: str = ""

    def __len__(self) -> int:
        return self.thetas.shape[0]

    @property
    def final(self) -> np.ndarray:
        return self.thetas[-1]


def _fingerprint(name: str, theta0: np.ndarray, **hyper) -> str:
    h = hashlib.sha256()
    h.update(name.encode())
    for key in sorted(hyper):
        h.update(f"|{key}={hyper[key]!r}".encode())
    h.update(theta0.tobytes())
    return h.hexdigest()[:16]


class _Recorder:
    def __init__(self, theta0, total_steps, stride, fingerprint):
        self.stride = max(int(stride), 1)
        self.total_steps = total_steps
        self.thetas = [np.array(theta0, dtype=float)]
        self.losses = []
        self.steps = [0]
        self.fingerprint = fingerprint

    def record_loss0(self, loss):
        self.losses.append(loss)

    def record(self, t, theta, loss):
        if t % self.stride == 0 or t == self.total_steps:
            self.thetas.append(theta.copy())
            self.losses.append(loss)
            self.steps.append(t)

    def done(self):
        return Trajectory(
            thetas=np.array(self.thetas),
            losses=np.array(self.losses),
            steps=np.array(self.steps),
            stride=self.stride,
            fingerprint=self.fingerprint,
        )


def _check_finite(grad: np.ndarray, t: int) -> None:
    if not np.isfinite(grad).all():
        raise FloatingPointError(f"non-finite gradient at step {t}")


def gd_run(
    oracle: GradOracle,
    theta0: np.ndarray,
    eta: float,
    steps: int,
    momentum: float = 0.0,
    stride: int = 1,
) -> Trajectory:
    """Plain gradient descent, optionally with heavy-ball momentum.

    Update: v <- momentum * v + g; theta <- theta - eta * v.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    theta = np.array(theta0, dtype=float)
    rec = _Recorder(
        theta, steps, stride, _fingerprint("gd", theta, eta=eta, momentum=momentum)
    )
    velocity = np.zeros_like(theta)
    loss, grad = oracle(theta)
    rec.record_loss0(loss)
    for t in range(steps):
        _check_finite(grad, t)
        velocity = momentum * velocity + grad
        theta = theta - eta * velocity
        loss, grad = oracle(theta)
        rec.record(t + 1, theta, loss)
    return rec.done()


def signgd_run(
    oracle: GradOracle,
    theta0: np.ndarray,
    eta: float,
    eps: float,
    steps: int,
    stride: int = 1,
) -> Trajectory:
    """Sign gradient descent: theta <- theta - eta * g / sqrt(g*g + eps).

    With eps = 0 the step is the coordinate-wise sign of the gradient, with
    sign(0) = 0.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    theta = np.array(theta0, dtype=float)
    rec = _Recorder(theta, steps, stride, _fingerprint("signgd", theta, eta=eta, eps=eps))
    loss, grad = oracle(theta)
    rec.record_loss0(loss)
    for t in range(steps):
        _check_finite(grad, t)
        if eps == 0.0:
            step = np.sign(grad)
        else:
            step = grad / np.sqrt(grad * grad + eps)
        theta = theta - eta * step
        loss, grad = oracle(theta)
        rec.record(t + 1, theta, loss)
    return rec.done()


def _adam_step(m, v, eps):
    denom = np.sqrt(v + eps)
    moving = m != 0.0
    if (moving & (denom == 0.0)).any():
        raise ZeroDivisionError(
            "Adam update undefined: eps = 0 with zero second moment against a "
            "nonzero first moment"
        )
    out = np.zeros_like(m)
    np.divide(m, denom, out=out, where=moving)
    return out


def adam_run(
    oracle: GradOracle,
    theta0: np.ndarray,
    eta: float,
    beta1: float,
    beta2: float,
    eps: float,
    steps: int,
    standard_order: bool = False,
    stride: int = 1,
) -> Trajectory:
    """Adam with bias-corrected moments and eps inside the square root.

    Default ordering steps with the previous moments and then refreshes them
    with the gradient at the new point, so theta_1 = theta_0 exactly. With
    ``standard_order`` the gradient at the current point updates the moments
    before the step is taken.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
        raise ValueError("beta1 and beta2 must lie in [0, 1)")
    theta = np.array(theta0, dtype=float)
    rec = _Recorder(
        theta,
        steps,
        stride,
        _fingerprint(
            "adam", theta, eta=eta, beta1=beta1, beta2=beta2, eps=eps,
            standard_order=standard_order,
        ),
    )
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    loss, grad = oracle(theta)
    rec.record_loss0(loss)
    if standard_order:
        m_raw = np.zeros_like(theta)
        v_raw = np.zeros_like(theta)
        for t in range(steps):
            _check_finite(grad, t)
            m_raw = beta1 * m_raw + (1.0 - beta1) * grad
            v_raw = beta2 * v_raw + (1.0 - beta2) * grad * grad
            m_hat = m_raw / (1.0 - beta1 ** (t + 1))
            v_hat = v_raw / (1.0 - beta2 ** (t + 1))
            theta = theta - eta * _adam_step(m_hat, v_hat, eps)
            loss, grad = oracle(theta)
            rec.record(t + 1, theta, loss)
        return rec.done()
    for t in range(steps):
        theta = theta - eta * _adam_step(m, v, eps)
        loss, grad = oracle(theta)
        _check_finite(grad, t)
        m = (beta1 * m + (1.0 - beta1) * grad) / (1.0 - beta1 ** (t + 1))
        v = (beta2 * v + (1.0 - beta2) * grad * grad) / (1.0 - beta2 ** (t + 1))
        rec.record(t + 1, theta, loss)
    return rec.done()


@dataclass
class ShampooState:
    """Per-block Kronecker-factored accumulators and cached inverse roots."""

    left: list = field(default_factory=list)  # m_j x m_j accumulators
    right: list = field(default_factory=list)  # m_{j-1} x m_{j-1} accumulators
    root_left: list = field(default_factory=list)
    root_right: list = field(default_factory=list)


def _diag_inv_quarter(diag: np.ndarray, floor: float) -> np.ndarray:
    return np.maximum(diag, floor) ** -0.25


def shampoo_run(
    oracle: GradOracle,
    layout: ParamLayout,
    theta0: np.ndarray,
    eta: float,
    eps: float,
    steps: int,
    root_period: int = 1,
    include_step0_root: bool = True,
    floor: float = 1e-12,
    stride: int = 1,
) -> Trajectory:
    """Layer-wise preconditioned descent with inverse fourth roots. See
    :func:`shampoo_run_with_state` for the update rule."""
    traj, _ = shampoo_run_with_state(
        oracle, layout, theta0, eta, eps, steps, root_period,
        include_step0_root, floor, stride,
    )
    return traj


def shampoo_run_with_state(
    oracle: GradOracle,
    layout: ParamLayout,
    theta0: np.ndarray,
    eta: float,
    eps: float,
    steps: int,
    root_period: int = 1,
    include_step0_root: bool = True,
    floor: float = 1e-12,
    stride: int = 1,
) -> tuple[Trajectory, ShampooState]:
    """Layer-wise preconditioned descent with inverse fourth roots.

    Each parameter block G (a weight matrix, or a bias treated as a column)
    accumulates L <- L + G G^T and R <- R + G^T G starting from eps * I, and
    the update is eta * L^(-1/4) G R^(-1/4). Matrix roots are recomputed every
    ``root_period`` steps; between recomputations the most recent roots are
    reused. Before the first root computation (possible only when
    ``include_step0_root`` is off) the update falls back to diagonal
    preconditioning, which forfeits the rotation-coupling guarantee.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    if root_period < 1:
        raise ValueError("root_period must be at least 1")
    theta = np.array(theta0, dtype=float)
    if theta.shape != (layout.size,):
        raise ValueError("theta does not match the layout")
    rec = _Recorder(
        theta,
        steps,
        stride,
        _fingerprint(
            "shampoo", theta, eta=eta, eps=eps, root_period=root_period,
            include_step0_root=include_step0_root,
        ),
    )
    state = ShampooState()
    for blk in layout.blocks:
        state.left.append(eps * np.eye(blk.rows))
        state.right.append(eps * np.eye(blk.cols))
        state.root_left.append(None)
        state.root_right.append(None)

    loss, grad = oracle(theta)
    rec.record_loss0(loss)
    for t in range(steps):
        _check_finite(grad, t)
        compute_roots = (t % root_period == 0) and (include_step0_root or t > 0)
        new_theta = theta.copy()
        for i, blk in enumerate(layout.blocks):
            g_block = unvec(grad[blk.offset : blk.offset + blk.size], blk.rows, blk.cols)
            state.left[i] = state.left[i] + g_block @ g_block.T
            state.right[i] = state.right[i] + g_block.T @ g_block
            if compute_roots:
                state.root_left[i] = inv_root(state.left[i], 0.25, floor)
                state.root_right[i] = inv_root(state.right[i], 0.25, floor)
            if state.root_left[i] is not None:
                update = state.root_left[i] @ g_block @ state.root_right[i]
            else:
                dl = _diag_inv_quarter(np.diag(state.left[i]), floor)
                dr = _diag_inv_quarter(np.diag(state.right[i]), floor)
                update = dl[:, None] * g_block * dr[None, :]
            new_theta[blk.offset : blk.offset + blk.size] -= eta * vec(update)
        theta = new_theta
        loss, grad = oracle(theta)
        rec.record(t + 1, theta, loss)
    return rec.done(), state


def shampoo_accumulator_diagnostics(state: ShampooState) -> dict:
    """Symmetry deviation and minimum eigenvalue across all accumulators."""
    from .linalg import sym_eig

    sym_dev = 0.0
    min_eig = np.inf
    for mats in (state.left, state.right):
        for m in mats:
            sym_dev = max(sym_dev, np.abs(m - m.T).max())
            min_eig = min(min_eig, sym_eig(m).eigenvalues.min())
    return {"max_symmetry_deviation": sym_dev, "min_eigenvalue": float(min_eig)}
