"""Feed-forward ReLU networks with a fixed flattened-parameter layout.

A network is a stack of affine layers with ReLU on every hidden layer and an
identity output. Parameter blocks can be individually frozen; the flat
parameter vector theta enumerates only the trainable blocks, ordered as all
weight matrices (column-major vectorized) followed by all bias vectors, in
layer order. The ReLU subgradient at zero is taken to be 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .linalg import unvec, vec


@dataclass(frozen=True)
class Block:
    kind: str  # "w" or "b"
    layer: int  # 0-based affine layer index
    offset: int
    rows: int
    cols: int

    @property
    def size(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class ParamLayout:
    blocks: tuple[Block, ...]
    size: int


@dataclass(frozen=True)
class Architecture:
    """Layer dimensions plus trainability flags and frozen block values.

    ``dims`` is (d, m_1, ..., m_L, 1). Affine layer j maps dims[j] to
    dims[j+1]; hidden layers apply ReLU, the last layer is linear. Frozen
    weight blocks carry their values in ``fixed_weights`` (and similarly for
    biases); absent biases are simply not applied.
    """

    dims: tuple[int, ...]
    weight_trainable: tuple[bool, ...]
    bias_present: tuple[bool, ...]
    bias_trainable: tuple[bool, ...]
    fixed_weights: tuple
    fixed_biases: tuple

    def __post_init__(self):
        if len(self.dims) < 2:
            raise ValueError("need at least one affine layer")
        if any(d <= 0 for d in self.dims):
            raise ValueError("all layer widths must be positive")
        if self.dims[-1] != 1:
            raise ValueError("output width must be 1")
        n = self.n_layers
        for name, flags in (
            ("weight_trainable", self.weight_trainable),
            ("bias_present", self.bias_present),
            ("bias_trainable", self.bias_trainable),
            ("fixed_weights", self.fixed_weights),
            ("fixed_biases", self.fixed_biases),
        ):
            if len(flags) != n:
                raise ValueError(f"{name} must have one entry per affine layer")
        for j in range(n):
            if not self.weight_trainable[j]:
                w = self.fixed_weights[j]
                if w is None or w.shape != (self.dims[j + 1], self.dims[j]):
                    raise ValueError(f"frozen weight block {j} needs a fixed value")
            if self.bias_present[j] and not self.bias_trainable[j]:
                if self.fixed_biases[j] is None:
                    raise ValueError(f"frozen bias block {j} needs a fixed value")
            if self.bias_trainable[j] and not self.bias_present[j]:
                raise ValueError(f"bias block {j} marked trainable but absent")

    @property
    def n_layers(self) -> int:
        return len(self.dims) - 1

    def layout(self) -> ParamLayout:
        blocks = []
        offset = 0
        for j in range(self.n_layers):
            if self.weight_trainable[j]:
                rows, cols = self.dims[j + 1], self.dims[j]
                blocks.append(Block("w", j, offset, rows, cols))
                offset += rows * cols
        for j in range(self.n_layers):
            if self.bias_present[j] and self.bias_trainable[j]:
                blocks.append(Block("b", j, offset, self.dims[j + 1], 1))
                offset += self.dims[j + 1]
        return ParamLayout(tuple(blocks), offset)

    def n_params(self) -> int:
        return self.layout().size


def _init_weight(rng: np.random.Generator, rows: int, cols: int, scale) -> np.ndarray:
    std = scale if scale is not None else 1.0 / np.sqrt(cols)
    return rng.normal(0.0, std, size=(rows, cols))


def make_fixed_outer_two_layer(
    d: int, m: int, a: np.ndarray, seed: int, init_scale: float | None = None
) -> tuple[Architecture, np.ndarray]:
    """Two-layer ReLU net with frozen +/-1 outer weights and no biases.

    Only the m x d hidden weight matrix is trainable, so theta has length
    m*d. Hidden weights start i.i.d. Gaussian with std 1/sqrt(d) unless
    ``init_scale`` overrides it.
    """
    a = np.asarray(a, dtype=float)
    if a.shape != (m,):
        raise ValueError(f"outer weights must have shape ({m},)")
    if not np.isin(a, (-1.0, 1.0)).all():
        raise ValueError("outer weights must be +/-1")
    arch = Architecture(
        dims=(d, m, 1),
        weight_trainable=(True, False),
        bias_present=(False, False),
        bias_trainable=(False, False),
        fixed_weights=(None, a.reshape(1, m)),
        fixed_biases=(None, None),
    )
    rng = np.random.default_rng(seed)
    w1 = _init_weight(rng, m, d, init_scale)
    return arch, vec(w1)


def make_full_two_layer(
    d: int, m: int, seed: int, init_scale: float | None = None
) -> tuple[Architecture, np.ndarray]:
    """Two-layer ReLU net with trainable outer weights and hidden bias.

    theta stacks [vec(W1), vec(W2), b1]; the hidden bias starts at zero.
    """
    arch = Architecture(
        dims=(d, m, 1),
        weight_trainable=(True, True),
        bias_present=(True, False),
        bias_trainable=(True, False),
        fixed_weights=(None, None),
        fixed_biases=(None, None),
    )
    rng = np.random.default_rng(seed)
    w1 = _init_weight(rng, m, d, init_scale)
    w2 = _init_weight(rng, 1, m, init_scale)
    theta = np.concatenate([vec(w1), vec(w2), np.zeros(m)])
    return arch, theta


def make_mlp(
    dims: tuple[int, ...],
    seed: int,
    bias: bool = True,
    init_scale: float | None = None,
) -> tuple[Architecture, np.ndarray]:
    """Fully trainable deep ReLU net for the given layer widths."""
    n = len(dims) - 1
    arch = Architecture(
        dims=tuple(dims),
        weight_trainable=(True,) * n,
        bias_present=(bias,) * n,
        bias_trainable=(bias,) * n,
        fixed_weights=(None,) * n,
        fixed_biases=(None,) * n,
    )
    rng = np.random.default_rng(seed)
    parts = [
        vec(_init_weight(rng, dims[j + 1], dims[j], init_scale)) for j in range(n)
    ]
    if bias:
        parts.extend(np.zeros(dims[j + 1]) for j in range(n))
    return arch, np.concatenate(parts)


def unpack(arch: Architecture, theta: np.ndarray):
    """Materialize per-layer weight matrices and bias vectors from theta."""
    theta = np.asarray(theta, dtype=float)
    layout = arch.layout()
    if theta.shape != (layout.size,):
        raise ValueError(f"theta must have shape ({layout.size},), got {theta.shape}")
    weights = list(arch.fixed_weights)
    biases = [
        arch.fixed_biases[j] if arch.bias_present[j] else None
        for j in range(arch.n_layers)
    ]
    for blk in layout.blocks:
        piece = theta[blk.offset : blk.offset + blk.size]
        if blk.kind == "w":
            weights[blk.layer] = unvec(piece, blk.rows, blk.cols)
        else:
            biases[blk.layer] = piece
    return weights, biases


def forward(arch: Architecture, theta: np.ndarray, x: np.ndarray) -> float:
    """Scalar network output at a single input point."""
    return float(forward_batch(arch, theta, np.asarray(x, dtype=float)[None, :])[0])


def forward_batch(arch: Architecture, theta: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Network outputs for an (n, d) batch of inputs."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2 or xs.shape[1] != arch.dims[0]:
        raise ValueError(f"inputs must have shape (n, {arch.dims[0]})")
    weights, biases = unpack(arch, theta)
    h = xs
    last = arch.n_layers - 1
    for j in range(arch.n_layers):
        z = h @ weights[j].T
        if biases[j] is not None:
            z = z + biases[j]
        h = z if j == last else np.maximum(z, 0.0)
    return h[:, 0]


def grad_theta(arch: Architecture, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Gradient of the scalar output with respect to theta at one input."""
    _, grad = value_and_weighted_grad(
        arch, theta, np.asarray(x, dtype=float)[None, :], np.ones(1)
    )
    return grad


def value_and_weighted_grad(
    arch: Architecture, theta: np.ndarray, xs: np.ndarray, coeffs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Outputs f(theta; x_i) and the gradient of sum_i coeffs_i f(theta; x_i).

    One shared backward pass over the batch; summation order is fixed by the
    matrix products, so results are reproducible bit for bit.
    """
    xs = np.asarray(xs, dtype=float)
    coeffs = np.asarray(coeffs, dtype=float)
    weights, biases = unpack(arch, theta)
    n_layers = arch.n_layers
    acts = [xs]
    pres = []
    h = xs
    for j in range(n_layers):
        z = h @ weights[j].T
        if biases[j] is not None:
            z = z + biases[j]
        pres.append(z)
        h = z if j == n_layers - 1 else np.maximum(z, 0.0)
        acts.append(h)
    outputs = acts[-1][:, 0]

    grad_w = [None] * n_layers
    grad_b = [None] * n_layers
    delta = coeffs[:, None]  # d(sum c_i f_i)/d(pre-activation of last layer)
    for j in range(n_layers - 1, -1, -1):
        grad_w[j] = delta.T @ acts[j]
        grad_b[j] = delta.sum(axis=0)
        if j > 0:
            delta = (delta @ weights[j]) * (pres[j - 1] >= 0.0)

    layout = arch.layout()
    grad = np.zeros(layout.size)
    for blk in layout.blocks:
        piece = grad_w[blk.layer] if blk.kind == "w" else grad_b[blk.layer]
        grad[blk.offset : blk.offset + blk.size] = (
            vec(piece) if blk.kind == "w" else piece
        )
    return outputs, grad


def save_theta(path_prefix: str, arch: Architecture, theta: np.ndarray) -> None:
    """Store theta as flat binary plus a JSON sidecar describing the layout."""
    np.save(path_prefix + ".npy", np.asarray(theta, dtype=float))
    layout = arch.layout()
    sidecar = {
        "dims": list(arch.dims),
        "size": layout.size,
        "blocks": [
            {
                "kind": b.kind,
                "layer": b.layer,
                "offset": b.offset,
                "rows": b.rows,
                "cols": b.cols,
            }
            for b in layout.blocks
        ],
    }
    with open(path_prefix + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")


def load_theta(path_prefix: str, arch: Architecture) -> np.ndarray:
    """Load a theta saved by :func:`save_theta`, validating the layout."""
    theta = np.load(path_prefix + ".npy")
    with open(path_prefix + ".json") as fh:
        sidecar = json.load(fh)
    if sidecar["size"] != arch.n_params() or sidecar["dims"] != list(arch.dims):
        raise ValueError("stored layout does not match the architecture")
    return theta
