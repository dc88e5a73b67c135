"""Constructed flows with known closed-form behavior.

These are the workhorses of the test suite and the bundled experiments:
each one's global minimizer path is known analytically, so algorithm
output can be checked against pencil-and-paper values.
"""

from __future__ import annotations

import numpy as np

from .flow import ParameterFlow
from .network import NetworkDims, NetworkParams, init_gaussian
from .rng import stream


def one_unit_flow(horizon: float = 1.0) -> ParameterFlow:
    """G_s(x) = (1 + s) relu(x + 1), a single growing unit.

    Against the target y = 2 (identity measurements) the minimizer is
    x*(s) = 2 / (1 + s) - 1, which has speed at most 2 on [0, 1], and the
    single weight matrix has unit norm.
    """
    dims = NetworkDims(k=1, widths=(1,), n=1)

    def at(s: float) -> NetworkParams:
        return NetworkParams(dims, np.array([[1.0 + s]]),
                             (np.array([[1.0]]),), (np.array([1.0]),))

    return ParameterFlow.analytic(at, horizon)


def one_unit_target() -> np.ndarray:
    return np.array([2.0])


def one_unit_minimizer(s: float) -> float:
    return 2.0 / (1.0 + s) - 1.0


def abs_network() -> NetworkParams:
    """G(x) = |x| built from two opposed units; handy for kink tests."""
    dims = NetworkDims(k=1, widths=(2,), n=1)
    return NetworkParams(dims, np.array([[1.0, 1.0]]),
                         (np.array([[1.0], [-1.0]]),), (np.zeros(2),))


# ---------------------------------------------------------------------------
# Fold flow: the target map starts as a scaled identity and grows
# coordinatewise |.| outputs. The true latent stays the unique global
# minimizer at every stage, but the finished network confuses sign
# information: each coordinate of a cold start falls into a mirrored
# decoy basin with probability 1/2.
# ---------------------------------------------------------------------------

FOLD_EPS = 0.1


def fold_flow(k: int = 2, eps: float = FOLD_EPS, horizon: float = 1.0) -> ParameterFlow:
    """Interpolation from G_0(x) = (eps x, 0) to G_1(x) = (eps x, |x|).

    Hidden layer: a (+x_i, -x_i) unit pair per coordinate. The first k
    outputs read eps x_i (difference of the pair, globally linear); the
    last k outputs read w(s) |x_i| (sum of the pair) with w growing from
    0 to 1. For y = G_1(x_*):

      f_s(x) = 0.5 eps^2 ||x - x_*||^2
             + 0.5 sum_i (w(s)|x_i| - |x_*i|)^2,

    whose global minimizer stays on the sign pattern of x_* for every s
    (the mirrored branch is strictly worse), while the final landscape
    has 2^k basins. Snapshot 0 is an exact convex quadratic.
    """
    dims = NetworkDims(k=k, widths=(2 * k,), n=2 * k)
    W = np.zeros((2 * k, k))
    for i in range(k):
        W[2 * i, i] = 1.0
        W[2 * i + 1, i] = -1.0
    b = np.zeros(2 * k)

    def readout(w: float) -> np.ndarray:
        V = np.zeros((2 * k, 2 * k))
        for i in range(k):
            V[i, 2 * i] = eps
            V[i, 2 * i + 1] = -eps       # eps x_i
            V[k + i, 2 * i] = w
            V[k + i, 2 * i + 1] = w      # w |x_i|
        return V

    start = NetworkParams(dims, readout(0.0), (W,), (b,))
    end = NetworkParams(dims, readout(1.0), (W,), (b,))
    return ParameterFlow.interpolation(start, end, horizon)


# ---------------------------------------------------------------------------
# Kink-crossing flow: a fold unit pair h(t) = relu(t) + 2 relu(-t) plus a
# constant unit whose readout weight decays. The effective scalar target
# starts negative (minimizer pinned at the kink t = 0) and ends at 1
# (minimizer slides into the t < 0 piece), so the tracked minimizer
# changes activation pattern partway through the flow.
# ---------------------------------------------------------------------------


def kink_cross_flow(horizon: float = 1.0) -> ParameterFlow:
    """k=2 flow whose minimizer leaves a kink and crosses into a new piece.

    Hidden units: relu(x1), relu(-x1), relu(x2 + 1), relu(1 - x2), relu(1).
    Outputs: [h(x1) + w5(s), x2, |x1|] with h(t) = relu(t) + 2 relu(-t)
    and w5 interpolating 1.5 -> 0 (the x2 readout is the biased pair
    difference, linear on |x2| < 1 and active at the origin). Against the
    fixed target y = (1, 0.3, 0), writing ytil(s) = 1 - w5(s) = 1.5 s - 0.5:

      x*(s) = (0, 0.3)                for ytil(s) <= 0,
      x*(s) = (-2 ytil(s) / 5, 0.3)   for ytil(s) > 0.

    The minimizer is unique at every s, moves with speed at most 0.6,
    and max_i ||W_i|| = sqrt(2), so tracking is safe for steps below
    tau / (0.6 * 2). The final landscape has a decoy basin at (0.5, 0.3)
    with value 0.25 versus the global 0.1.
    """
    dims = NetworkDims(k=2, widths=(5,), n=3)
    W = np.array([
        [1.0, 0.0],
        [-1.0, 0.0],
        [0.0, 1.0],
        [0.0, -1.0],
        [0.0, 0.0],
    ])
    b = np.array([0.0, 0.0, 1.0, 1.0, 1.0])

    def readout(w5: float) -> np.ndarray:
        return np.array([
            [1.0, 2.0, 0.0, 0.0, w5],
            [0.0, 0.0, 0.5, -0.5, 0.0],
            [1.0, 1.0, 0.0, 0.0, 0.0],
        ])

    start = NetworkParams(dims, readout(1.5), (W,), (b,))
    end = NetworkParams(dims, readout(0.0), (W,), (b,))
    return ParameterFlow.interpolation(start, end, horizon)


def kink_cross_target() -> np.ndarray:
    return np.array([1.0, 0.3, 0.0])


def kink_cross_minimizer(s: float, horizon: float = 1.0) -> np.ndarray:
    ytil = 1.5 * (s / horizon) - 0.5
    t = 0.0 if ytil <= 0 else -2.0 * ytil / 5.0
    return np.array([t, 0.3])


def random_interpolation_flow(dims: NetworkDims, seed: int,
                              drift: float = 0.05,
                              horizon: float = 1.0) -> ParameterFlow:
    """Gaussian snapshot drifting toward a nearby perturbed copy."""
    start = init_gaussian(dims, stream(seed, 0, "interp-start"))
    bump = init_gaussian(dims, stream(seed, 1, "interp-drift"))
    end = NetworkParams.from_flat(dims, start.flat() + drift * bump.flat())
    return ParameterFlow.interpolation(start, end, horizon)
