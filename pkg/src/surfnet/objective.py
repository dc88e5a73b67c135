"""The inversion objective f(x) = 0.5 ||A G(x) - A y||^2 and its derivatives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import NetworkParams, batch_forward, forward, pattern_of
from .rng import as_generator


@dataclass(frozen=True, eq=False)
class MeasurementMatrix:
    """Either the identity (no compression) or a dense Gaussian sketch.

    Gaussian entries are N(0, 1/m) so that A approximately preserves
    inner products of low-dimensional families of vectors.
    """

    kind: str  # "identity" | "gaussian"
    m: int
    n: int
    A: np.ndarray | None = None

    @staticmethod
    def identity(n: int) -> "MeasurementMatrix":
        return MeasurementMatrix(kind="identity", m=n, n=n)

    @staticmethod
    def gaussian(m: int, n: int, seed: int | np.random.Generator) -> "MeasurementMatrix":
        rng = as_generator(seed, tag="measurement")
        A = rng.standard_normal((m, n)) / np.sqrt(m)
        return MeasurementMatrix(kind="gaussian", m=m, n=n, A=A)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """A v for a vector, or v A^T row-wise for a batch."""
        if self.kind == "identity":
            return v
        return v @ self.A.T if v.ndim == 2 else self.A @ v

    def apply_t(self, v: np.ndarray) -> np.ndarray:
        """A^T v."""
        if self.kind == "identity":
            return v
        return self.A.T @ v


class Objective:
    """f(x) = 0.5 ||A G(x) - A y||^2 for a fixed snapshot, target, and A.

    Immutable; evaluation is reentrant. The measured target A y is cached
    at construction.
    """

    def __init__(self, params: NetworkParams, A: MeasurementMatrix, y: np.ndarray):
        y = np.asarray(y, dtype=float)
        if y.shape != (params.dims.n,):
            raise ValueError(f"target has shape {y.shape}, expected {(params.dims.n,)}")
        if A.n != params.dims.n:
            raise ValueError(f"measurement matrix expects vectors of length {A.n}, "
                             f"network outputs have length {params.dims.n}")
        self.params = params
        self.A = A
        self.y = y
        self.Ay = A.apply(y)

    @property
    def k(self) -> int:
        return self.params.dims.k

    def residual(self, x: np.ndarray) -> np.ndarray:
        return self.A.apply(forward(self.params, x).output) - self.Ay

    def value(self, x: np.ndarray) -> float:
        r = self.residual(x)
        return 0.5 * float(r @ r)

    def batch_value(self, X: np.ndarray) -> np.ndarray:
        """Objective at each row of X; used by grid oracles."""
        R = self.A.apply(batch_forward(self.params, X)) - self.Ay
        return 0.5 * np.einsum("ij,ij->i", R, R)

    def value_and_gradient(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        """One forward pass shared between the value and the gradient.

        The gradient is J^T A^T (A G(x) - A y) where J is the Jacobian
        of the affine piece selected by the activation pattern of x.
        At a kink the strict z > 0 convention picks one adjacent piece,
        so this is a one-sided subgradient choice there.
        """
        outs = forward(self.params, x)
        r = self.A.apply(outs.output) - self.Ay
        w = self.params.V.T @ self.A.apply_t(r)
        for Wi, z in zip(reversed(self.params.W), reversed(outs.z)):
            w = Wi.T @ np.where(z > 0.0, w, 0.0)
        return 0.5 * float(r @ r), w

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.value_and_gradient(x)[1]

    def directional_derivative(self, x: np.ndarray, v: np.ndarray) -> float:
        """One-sided derivative lim_{t->0+} (f(x + t v) - f(x)) / t.

        Exact even at kinks: the pattern is probed a nudge into the piece
        entered along v, and the derivative of that piece's quadratic is
        evaluated at x. The nudge 1e-9 (1 + ||x||) sits far below any
        realistic preactivation slack at unit-scale weights.
        """
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        vnorm = np.linalg.norm(v)
        if vnorm == 0.0:
            raise ValueError("direction vector must be nonzero")
        v = v / vnorm
        eps = 1e-9 * (1.0 + np.linalg.norm(x))
        probe = forward(self.params, x + eps * v)
        pattern = pattern_of(probe)
        # Affine extension of the entered piece, evaluated at x itself.
        h = x
        u = v
        for Wi, bi, mask in zip(self.params.W, self.params.b, pattern.masks):
            h = np.where(mask, Wi @ h + bi, 0.0)
            u = np.where(mask, Wi @ u, 0.0)
        g_here = self.params.V @ h   # piece value at x (equals G(x) on the closure)
        ju = self.params.V @ u       # J v
        r = self.A.apply(g_here) - self.Ay
        return float(self.A.apply(ju) @ r)
