"""Dense feedforward ReLU generators.

A generator maps a latent input x in R^k through d ReLU layers
x_i = relu(W_i x_{i-1} + b_i) and a final linear readout V x_d in R^n.
Because the activations are piecewise linear, fixing the on/off state of
every unit (an activation pattern) turns the whole map into an affine
function of x; most of the library is built on that observation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import as_generator


@dataclass(frozen=True)
class NetworkDims:
    """Layer sizes: latent k, intermediate widths n_1..n_d, output n."""

    k: int
    widths: tuple[int, ...]
    n: int

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if self.k < 1 or self.n < 1:
            raise ValueError(f"dimensions must be >= 1, got k={self.k}, n={self.n}")
        if len(self.widths) < 1 or any(w < 1 for w in self.widths):
            raise ValueError(f"need at least one layer of width >= 1, got {self.widths}")

    @property
    def d(self) -> int:
        return len(self.widths)

    def is_expansive(self) -> bool:
        """Strictly increasing widths with the readout at least as wide.

        Advisory only: the descent-direction results are proven for this
        regime, but nothing in the library requires it.
        """
        seq = (self.k,) + self.widths
        increasing = all(a < b for a, b in zip(seq, seq[1:]))
        return increasing and self.widths[-1] <= self.n


@dataclass(frozen=True, eq=False)
class NetworkParams:
    """One parameter snapshot theta = (V, W_1..W_d, b_1..b_d)."""

    dims: NetworkDims
    V: np.ndarray
    W: tuple[np.ndarray, ...]
    b: tuple[np.ndarray, ...]

    def __post_init__(self):
        d = self.dims.d
        if len(self.W) != d or len(self.b) != d:
            raise ValueError(f"expected {d} weight matrices and bias vectors")
        if self.V.shape != (self.dims.n, self.dims.widths[-1]):
            raise ValueError(f"V has shape {self.V.shape}, expected "
                             f"{(self.dims.n, self.dims.widths[-1])}")
        prev = self.dims.k
        for i, (Wi, bi) in enumerate(zip(self.W, self.b)):
            ni = self.dims.widths[i]
            if Wi.shape != (ni, prev):
                raise ValueError(f"W[{i}] has shape {Wi.shape}, expected {(ni, prev)}")
            if bi.shape != (ni,):
                raise ValueError(f"b[{i}] has shape {bi.shape}, expected {(ni,)}")
            prev = ni
        for arr in (self.V, *self.W, *self.b):
            if not np.all(np.isfinite(arr)):
                raise ValueError("network parameters must be finite")

    def flat(self) -> np.ndarray:
        """All parameters as one vector: V, then W_1, b_1, ..., W_d, b_d."""
        parts = [self.V.ravel()]
        for Wi, bi in zip(self.W, self.b):
            parts.append(Wi.ravel())
            parts.append(bi)
        return np.concatenate(parts)

    @staticmethod
    def from_flat(dims: NetworkDims, vec: np.ndarray) -> "NetworkParams":
        pos = 0

        def take(shape):
            nonlocal pos
            size = int(np.prod(shape))
            out = vec[pos:pos + size].reshape(shape).copy()
            pos += size
            return out

        V = take((dims.n, dims.widths[-1]))
        W, b = [], []
        prev = dims.k
        for ni in dims.widths:
            W.append(take((ni, prev)))
            b.append(take((ni,)))
            prev = ni
        if pos != vec.size:
            raise ValueError(f"flat vector has {vec.size} entries, consumed {pos}")
        return NetworkParams(dims, V, tuple(W), tuple(b))


@dataclass(eq=False)
class LayerOutputs:
    """Per-layer record of one forward evaluation.

    x[0] is the input; x[i] = relu(z[i-1]) is the output of layer i;
    z[i-1] = W_i x[i-1] + b_i is the preactivation of layer i.
    """

    x: list[np.ndarray]
    z: list[np.ndarray]
    output: np.ndarray


@dataclass(frozen=True, eq=False)
class ActivationPattern:
    """Per-layer boolean masks; bit (i, j) is True iff z_{i,j} > 0 strictly.

    A preactivation of exactly zero counts as inactive, matching the
    strict inequality in the masked-matrix convention.
    """

    masks: tuple[np.ndarray, ...]

    def key(self) -> bytes:
        """Hashable fingerprint for dict lookups and deduplication."""
        return b"".join(np.packbits(m.astype(np.uint8)).tobytes() for m in self.masks)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ActivationPattern):
            return NotImplemented
        return len(self.masks) == len(other.masks) and all(
            np.array_equal(a, b) for a, b in zip(self.masks, other.masks)
        )

    def __hash__(self) -> int:
        return hash(self.key())


def init_gaussian(dims: NetworkDims, seed: int | np.random.Generator) -> NetworkParams:
    """Draw a random snapshot: V ~ N(0, 1/n), W_i and b_i ~ N(0, 1/n_i).

    Draw order (part of the determinism contract): V first, then
    W_1, b_1, ..., W_d, b_d.
    """
    rng = as_generator(seed, tag="network-init")
    nd = dims.widths[-1]
    V = rng.standard_normal((dims.n, nd)) / np.sqrt(dims.n)
    W, b = [], []
    prev = dims.k
    for ni in dims.widths:
        scale = 1.0 / np.sqrt(ni)
        W.append(rng.standard_normal((ni, prev)) * scale)
        b.append(rng.standard_normal(ni) * scale)
        prev = ni
    return NetworkParams(dims, V, tuple(W), tuple(b))


def forward(params: NetworkParams, x: np.ndarray) -> LayerOutputs:
    """Evaluate the network, keeping every intermediate layer."""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.dims.k,):
        raise ValueError(f"input has shape {x.shape}, expected {(params.dims.k,)}")
    xs = [x]
    zs = []
    for Wi, bi in zip(params.W, params.b):
        z = Wi @ xs[-1] + bi
        zs.append(z)
        xs.append(np.maximum(z, 0.0))
    return LayerOutputs(x=xs, z=zs, output=params.V @ xs[-1])


def batch_forward(params: NetworkParams, X: np.ndarray) -> np.ndarray:
    """Outputs for a batch of inputs, one per row. Returns an (N, n) array."""
    H = np.asarray(X, dtype=float)
    if H.ndim != 2 or H.shape[1] != params.dims.k:
        raise ValueError(f"batch has shape {H.shape}, expected (N, {params.dims.k})")
    for Wi, bi in zip(params.W, params.b):
        H = np.maximum(H @ Wi.T + bi, 0.0)
    return H @ params.V.T


def activation_pattern(params: NetworkParams, x: np.ndarray) -> ActivationPattern:
    outs = forward(params, x)
    return pattern_of(outs)


def pattern_of(outs: LayerOutputs) -> ActivationPattern:
    """Pattern of an already-computed forward pass."""
    return ActivationPattern(tuple(z > 0.0 for z in outs.z))


def masked_forward(params: NetworkParams, pattern: ActivationPattern,
                   x: np.ndarray) -> np.ndarray:
    """Affine evaluation with the unit on/off states frozen to `pattern`.

    No ReLU is applied; a unit whose mask bit is off contributes exactly
    zero regardless of its preactivation. When `pattern` is the true
    pattern of x this reproduces forward(params, x).output exactly.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (params.dims.k,):
        raise ValueError(f"input has shape {x.shape}, expected {(params.dims.k,)}")
    if len(pattern.masks) != params.dims.d:
        raise ValueError("pattern does not match network depth")
    h = x
    for Wi, bi, mask in zip(params.W, params.b, pattern.masks):
        if mask.shape != bi.shape:
            raise ValueError("pattern mask width does not match layer width")
        z = Wi @ h + bi
        h = np.where(mask, z, 0.0)
    return params.V @ h


def masked_jacobian(params: NetworkParams, pattern: ActivationPattern) -> np.ndarray:
    """Jacobian V diag(m_d) W_d ... diag(m_1) W_1 of the frozen affine piece."""
    J = np.where(pattern.masks[0][:, None], params.W[0], 0.0)
    for Wi, mask in zip(params.W[1:], pattern.masks[1:]):
        J = np.where(mask[:, None], Wi @ J, 0.0)
    return params.V @ J


def operator_norm(M: np.ndarray, iters: int = 100, tol: float = 1e-10) -> float:
    """Largest singular value by power iteration on M^T M.

    Deterministic: starts from a fixed vector with a small ramp so it is
    never orthogonal to the top singular space in practice.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    cols = M.shape[1]
    v = np.ones(cols) + np.linspace(0.0, 1e-3, cols)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(iters):
        w = M.T @ (M @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v_new = w / norm
        sigma_new = np.linalg.norm(M @ v_new)
        if abs(sigma_new - sigma) <= tol * max(1.0, sigma_new):
            return float(sigma_new)
        v, sigma = v_new, sigma_new
    return float(sigma)


def layer_operator_norms(params: NetworkParams) -> list[float]:
    return [operator_norm(Wi) for Wi in params.W]
