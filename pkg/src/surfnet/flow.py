"""Parameter flows theta(s) and estimates of their regularity.

A flow is a continuously indexed family of network snapshots over
s in [0, S]. Three kinds are supported: analytic closures, entrywise
linear interpolation between two snapshots, and recorded snapshot
sequences, e.g. from the micro trainer below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import NonFiniteEncountered
from .landscape import OracleConfig, OracleResult, brute_force_min
from .network import NetworkDims, NetworkParams, init_gaussian, layer_operator_norms
from .objective import MeasurementMatrix, Objective
from .rng import stream

# Slop added before flooring S/delta so an exactly divisible horizon is
# not truncated by float division error.
_FLOOR_SLOP = 1e-9


@dataclass(frozen=True, eq=False)
class ParameterFlow:
    """theta(s) for s in [0, horizon].

    kind "analytic" evaluates a closure; "interpolation" blends two
    snapshots entrywise, theta(s) = (1 - s/S) start + (s/S) end;
    "snapshots" is a recorded sequence indexed by strictly increasing
    integer steps, evaluated as a left-continuous step function.
    """

    kind: str
    horizon: float
    dims: NetworkDims
    fn: Callable[[float], NetworkParams] | None = None
    start: NetworkParams | None = None
    end: NetworkParams | None = None
    sequence: tuple[NetworkParams, ...] = ()
    indices: tuple[int, ...] = ()

    @staticmethod
    def analytic(fn: Callable[[float], NetworkParams], horizon: float) -> "ParameterFlow":
        if horizon <= 0:
            raise ValueError("horizon must be positive")
        return ParameterFlow(kind="analytic", horizon=float(horizon),
                             dims=fn(0.0).dims, fn=fn)

    @staticmethod
    def interpolation(start: NetworkParams, end: NetworkParams,
                      horizon: float = 1.0) -> "ParameterFlow":
        if start.dims != end.dims:
            raise ValueError("interpolation endpoints must share dimensions")
        if horizon <= 0:
            raise ValueError("horizon must be positive")
        return ParameterFlow(kind="interpolation", horizon=float(horizon),
                             dims=start.dims, start=start, end=end)

    @staticmethod
    def snapshots(sequence: list[NetworkParams],
                  indices: list[int] | None = None) -> "ParameterFlow":
        if not sequence:
            raise ValueError("snapshot sequence must be nonempty")
        if indices is None:
            indices = list(range(len(sequence)))
        if len(indices) != len(sequence):
            raise ValueError("one index per snapshot required")
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError("snapshot indices must be strictly increasing")
        return ParameterFlow(kind="snapshots", horizon=float(max(indices[-1], 1)),
                             dims=sequence[0].dims,
                             sequence=tuple(sequence), indices=tuple(indices))

    def at(self, s: float) -> NetworkParams:
        if not 0.0 <= s <= self.horizon + 1e-12:
            raise ValueError(f"s={s} outside [0, {self.horizon}]")
        if self.kind == "analytic":
            return self.fn(s)
        if self.kind == "interpolation":
            u = s / self.horizon
            blend = (1.0 - u) * self.start.flat() + u * self.end.flat()
            return NetworkParams.from_flat(self.dims, blend)
        pos = int(np.searchsorted(self.indices, s, side="right")) - 1
        return self.sequence[max(pos, 0)]


@dataclass(frozen=True, eq=False)
class FlowDiscretization:
    """Snapshots theta_t = theta(delta t) for t = 0..T."""

    delta: float
    T: int
    snapshots: tuple[NetworkParams, ...]

    @property
    def dims(self) -> NetworkDims:
        return self.snapshots[0].dims


def discretize(flow: ParameterFlow, delta: float) -> FlowDiscretization:
    """Sample the flow every delta; snapshot flows pass through unchanged."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if flow.kind == "snapshots":
        spacings = {b - a for a, b in zip(flow.indices, flow.indices[1:])}
        step = float(spacings.pop()) if len(spacings) == 1 else 1.0
        return FlowDiscretization(delta=step, T=len(flow.sequence) - 1,
                                  snapshots=flow.sequence)
    T = int(math.floor(flow.horizon / delta + _FLOOR_SLOP))
    snaps = tuple(flow.at(delta * t) for t in range(T + 1))
    return FlowDiscretization(delta=float(delta), T=T, snapshots=snaps)


@dataclass(frozen=True)
class TrainConfig:
    """Micro-trainer knobs: plain SGD on a decoder-only squared loss."""

    steps: int = 400
    cadence: int = 40
    lr: float = 1e-3
    batch_size: int | None = None   # None: full batch

    def __post_init__(self):
        if self.steps < 0 or self.cadence < 1 or self.lr <= 0:
            raise ValueError("invalid trainer configuration")


def training_loss(params: NetworkParams, X: np.ndarray, Y: np.ndarray) -> float:
    from .network import batch_forward
    R = batch_forward(params, X) - Y
    return 0.5 * float(np.sum(R * R))


def training_gradients(params: NetworkParams, X: np.ndarray, Y: np.ndarray):
    """Backpropagated gradients of the summed squared loss.

    Returns (dV, [dW_i], [db_i]) matching the parameter layout.
    """
    acts = [np.asarray(X, dtype=float)]
    zs = []
    H = acts[0]
    for Wi, bi in zip(params.W, params.b):
        Z = H @ Wi.T + bi
        zs.append(Z)
        H = np.maximum(Z, 0.0)
        acts.append(H)
    out = H @ params.V.T
    delta = out - Y                       # (N, n)
    dV = delta.T @ acts[-1]
    back = delta @ params.V               # (N, n_d)
    dW, db = [], []
    for i in range(params.dims.d - 1, -1, -1):
        back = back * (zs[i] > 0.0)
        dW.append(back.T @ acts[i])
        db.append(back.sum(axis=0))
        if i > 0:
            back = back @ params.W[i]
    dW.reverse()
    db.reverse()
    return dV, dW, db


def micro_train_flow(dims: NetworkDims, target_data: np.ndarray,
                     cfg: TrainConfig, seed: int) -> ParameterFlow:
    """Train a generator to match fixed targets and record snapshots.

    Latent codes are drawn once from the seed's stream and frozen; the
    loss is 0.5 sum_j ||G(x_j) - y_j||^2. Snapshots are recorded at step
    0 and every `cadence` steps (plus the final step), giving a
    snapshot-sequence flow. Divergence aborts with the partial sequence.
    """
    Y = np.atleast_2d(np.asarray(target_data, dtype=float))
    if Y.shape[0] == 0:
        raise ValueError("target_data must be nonempty")
    if Y.shape[1] != dims.n:
        raise ValueError(f"targets have {Y.shape[1]} columns, expected {dims.n}")
    rng = stream(seed, 0, "micro-train")
    X = rng.standard_normal((Y.shape[0], dims.k))
    params = init_gaussian(dims, stream(seed, 1, "micro-train-init"))

    sequence = [params]
    indices = [0]
    for step in range(1, cfg.steps + 1):
        if cfg.batch_size is None or cfg.batch_size >= Y.shape[0]:
            Xb, Yb = X, Y
        else:
            pick = rng.choice(Y.shape[0], size=cfg.batch_size, replace=False)
            Xb, Yb = X[pick], Y[pick]
        dV, dW, db = training_gradients(params, Xb, Yb)
        params = NetworkParams(
            dims,
            params.V - cfg.lr * dV,
            tuple(Wi - cfg.lr * dWi for Wi, dWi in zip(params.W, dW)),
            tuple(bi - cfg.lr * dbi for bi, dbi in zip(params.b, db)),
        )
        if not np.all(np.isfinite(params.V)):
            break
        if step % cfg.cadence == 0 or step == cfg.steps:
            if indices[-1] != step:
                sequence.append(params)
                indices.append(step)
    return ParameterFlow.snapshots(sequence, indices)


@dataclass(frozen=True)
class FlowRegularity:
    """Empirical constants governing how fast a flow may be discretized.

    max_weight_norm bounds ||W_i(s)|| over the sampled grid;
    minimizer_lipschitz bounds the minimizer's speed along the flow,
    estimated from the grid oracle; step_bound is the implied safe
    discretization step tau / (L max(M, 1)^(d+1)), infinite for a
    stationary minimizer.
    """

    max_weight_norm: float
    minimizer_lipschitz: float
    step_bound: float
    tau: float
    s_grid: tuple[float, ...]
    minimizers: tuple[tuple[float, ...], ...]
    near_ties: int


def estimate_regularity(flow: ParameterFlow, tau: float, y: np.ndarray,
                        A: MeasurementMatrix, oracle_cfg: OracleConfig,
                        s_samples: int = 201) -> FlowRegularity:
    """Sample the flow and bound its weight norms and minimizer speed.

    Requires the grid oracle, so only small latent dimensions are
    tractable. near_ties counts grid points where the oracle saw two
    basins nearly tied in value, a diagnostic for non-unique minimizers.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    grid = np.linspace(0.0, flow.horizon, s_samples)
    max_norm = 0.0
    minimizers = []
    near_ties = 0
    for s in grid:
        params = flow.at(float(s))
        max_norm = max(max_norm, max(layer_operator_norms(params)))
        res = brute_force_min(Objective(params, A, y), oracle_cfg)
        minimizers.append(res.x_min)
        near_ties += int(res.near_tie)
    lip = 0.0
    for (s0, x0), (s1, x1) in zip(zip(grid, minimizers), zip(grid[1:], minimizers[1:])):
        lip = max(lip, float(np.linalg.norm(x1 - x0)) / float(s1 - s0))
    d = flow.dims.d
    bound = math.inf if lip == 0.0 else tau / (lip * max(max_norm, 1.0) ** (d + 1))
    return FlowRegularity(
        max_weight_norm=float(max_norm),
        minimizer_lipschitz=float(lip),
        step_bound=float(bound),
        tau=float(tau),
        s_grid=tuple(float(s) for s in grid),
        minimizers=tuple(tuple(float(v) for v in x) for x in minimizers),
        near_ties=near_ties,
    )
