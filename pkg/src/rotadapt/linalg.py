"""Small dense linear algebra with fixed, reproducible conventions.

Everything here is deterministic: identical input bits give identical output
bits. The symmetric eigensolver is a cyclic Jacobi iteration rather than a
LAPACK call so that results do not depend on the BLAS build.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

SQRT2 = np.sqrt(2.0)
INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

ORTHOGONALITY_TOL = 1e-10


class ConvergenceError(RuntimeError):
    """Jacobi sweeps hit the iteration cap before reaching tolerance."""


def rotation_matrix(gamma: float) -> np.ndarray:
    """Counter-clockwise 2x2 rotation by ``gamma`` radians."""
    if not np.isfinite(gamma):
        raise ValueError("rotation angle must be finite")
    c, s = np.cos(gamma), np.sin(gamma)
    return np.array([[c, -s], [s, c]])


def require_orthogonal(m: np.ndarray, tol: float = ORTHOGONALITY_TOL) -> np.ndarray:
    """Validate that ``m`` is orthogonal (max-norm tolerance) and return it."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    dev = np.abs(m.T @ m - np.eye(m.shape[0])).max()
    if dev > tol:
        raise ValueError(f"matrix is not orthogonal: max |M^T M - I| = {dev:.3e}")
    return m


def vec(m: np.ndarray) -> np.ndarray:
    """Column-major vectorization of a matrix."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError("vec expects a 2-D array")
    return m.reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`: reshape a flat vector back to ``rows x cols``."""
    v = np.asarray(v, dtype=float)
    if v.size != rows * cols:
        raise ValueError(f"cannot reshape {v.size} entries into {rows}x{cols}")
    return v.reshape(rows, cols, order="F")


def param_rotation(u: np.ndarray, arch) -> np.ndarray:
    """Orthogonal parameter-space map Q with f(theta; U x) = f(Q theta; x).

    Q acts as U^T (x) I on the flattened first-layer weight block and as the
    identity on every other coordinate of the trainable layout.
    """
    u = require_orthogonal(u)
    d = arch.dims[0]
    if u.shape[0] != d:
        raise ValueError(f"rotation is {u.shape[0]}-dimensional but input dim is {d}")
    layout = arch.layout()
    first = layout.blocks[0]
    if first.kind != "w" or first.layer != 0:
        raise ValueError("first-layer weights must be trainable and lead the layout")
    m1 = arch.dims[1]
    q = np.eye(layout.size)
    q[: m1 * d, : m1 * d] = np.kron(u.T, np.eye(m1))
    return q


@dataclass(frozen=True)
class EigResult:
    """Eigenvalues sorted descending with matching orthonormal eigenvectors.

    Sign convention: in each eigenvector column the entry of largest absolute
    value is positive (ties resolved at the lowest index).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _fix_column_signs(v: np.ndarray) -> np.ndarray:
    idx = np.abs(v).argmax(axis=0)
    flip = v[idx, np.arange(v.shape[1])] < 0
    v = v.copy()
    v[:, flip] *= -1.0
    return v


def sym_eig(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> EigResult:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps run in a fixed (p, q) order until the off-diagonal Frobenius norm
    drops below ``tol * ||A||_F``, so the output is bit-reproducible.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(a - a.T).max() > 1e-10 * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    n = a.shape[0]
    work = 0.5 * (a + a.T)
    v = np.eye(n)
    norm_a = np.linalg.norm(work)
    if norm_a == 0.0:
        return EigResult(np.zeros(n), np.eye(n))

    def off_norm(m):
        off = m - np.diag(np.diag(m))
        return np.linalg.norm(off)

    converged = False
    for _ in range(max_sweeps):
        if off_norm(work) <= tol * norm_a:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = work[p, q]
                if apq == 0.0:
                    continue
                app, aqq = work[p, p], work[q, q]
                tau = (aqq - app) / (2.0 * apq)
                if tau == 0.0:
                    t = 1.0
                elif abs(tau) > 1e150:  # tau*tau would overflow
                    t = 0.5 / tau
                else:
                    t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                colp = work[:, p].copy()
                colq = work[:, q].copy()
                newp = c * colp - s * colq
                newq = s * colp + c * colq
                work[:, p] = newp
                work[p, :] = newp
                work[:, q] = newq
                work[q, :] = newq
                work[p, p] = c * c * app - 2.0 * s * c * apq + s * s * aqq
                work[q, q] = s * s * app + 2.0 * s * c * apq + c * c * aqq
                work[p, q] = 0.0
                work[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        converged = off_norm(work) <= tol * norm_a
    if not converged:
        raise ConvergenceError(
            f"Jacobi did not converge in {max_sweeps} sweeps; "
            f"off-diagonal residual {off_norm(work):.3e} vs target {tol * norm_a:.3e}"
        )

    vals = np.diag(work).copy()
    order = np.argsort(-vals, kind="stable")
    return EigResult(vals[order], _fix_column_signs(v[:, order]))


def inv_root(a: np.ndarray, power: float, floor: float = 1e-12) -> np.ndarray:
    """Inverse matrix root A^(-power) for symmetric PSD A, power in {1/2, 1/4}.

    Eigenvalues are clamped below at ``floor`` before taking the negative
    power, which keeps the result finite when A is singular.
    """
    if power not in (0.5, 0.25):
        raise ValueError("power must be 1/2 or 1/4")
    if floor <= 0.0:
        raise ValueError("floor must be positive")
    eig = sym_eig(a)
    scale = max(np.abs(eig.eigenvalues).max(), 1.0)
    if eig.eigenvalues.min() < -1e-8 * scale:
        raise ValueError(
            f"matrix is not PSD: min eigenvalue {eig.eigenvalues.min():.3e}"
        )
    lam = np.maximum(eig.eigenvalues, floor) ** (-power)
    v = eig.eigenvectors
    return (v * lam) @ v.T


def std_normal(z):
    """Standard Gaussian density and CDF, (phi(z), Phi(z)).

    The CDF goes through the complementary error function and is accurate to
    better than 1e-12 over the real line. Accepts scalars or arrays.
    """
    z = np.asarray(z, dtype=float)
    pdf = np.exp(-0.5 * z * z) * INV_SQRT_2PI
    cdf = 0.5 * erfc(-z / SQRT2)
    if z.ndim == 0:
        return float(pdf), float(cdf)
    return pdf, cdf
