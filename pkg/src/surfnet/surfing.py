"""Surfing: warm-started minimization across a discretized parameter flow.

Simple surfing re-minimizes each snapshot's objective from the previous
minimizer. Projected surfing instead enumerates the linear pieces whose
activation patterns differ from the previous iterate's only on slack
units, solves the convex quadratic on each by projected gradient descent,
and keeps the best candidate; with a fine enough step this provably
tracks the global minimizer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .descent import DescentConfig, DescentResult, minimize, minimize_on_piece
from .errors import InfeasiblePiece, NonFiniteEncountered, SlackBudgetExceeded
from .flow import FlowDiscretization
from .objective import MeasurementMatrix, Objective
from .pieces import PieceFamily, enumerate_pieces, piece_for
from .network import activation_pattern

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SurfConfig:
    """Knobs shared by both algorithms.

    tau is the slack threshold for the projected variant and must be
    positive there. x_init_policy picks the starting point when none is
    given explicitly: "zero" starts at the origin, "uniform" draws from
    the hypercube [-init_bound, init_bound]^k using the caller's stream.
    """

    descent: DescentConfig = field(default_factory=DescentConfig)
    tau: float | None = None
    x_init_policy: str = "zero"       # "zero" | "uniform"
    init_bound: float = 1.0
    record_trajectory: bool = False

    def __post_init__(self):
        if self.x_init_policy not in ("zero", "uniform"):
            raise ValueError(f"unknown init policy {self.x_init_policy!r}")
        if self.tau is not None and self.tau <= 0:
            raise ValueError("tau must be positive")


@dataclass(eq=False)
class SurfResult:
    x_per_snapshot: list[np.ndarray]
    f_per_snapshot: list[float]
    pieces_examined_per_step: list[int]
    total_inner_iterations: int
    trajectories: list[list[np.ndarray]] | None = None

    @property
    def x_final(self) -> np.ndarray:
        return self.x_per_snapshot[-1]

    @property
    def f_final(self) -> float:
        return self.f_per_snapshot[-1]


def _initial_point(k: int, cfg: SurfConfig, x_init, rng) -> np.ndarray:
    if x_init is not None:
        x = np.asarray(x_init, dtype=float).copy()
        if x.shape != (k,):
            raise ValueError(f"x_init has shape {x.shape}, expected {(k,)}")
        return x
    if cfg.x_init_policy == "zero":
        return np.zeros(k)
    if rng is None:
        raise ValueError("uniform init policy requires an rng")
    return rng.uniform(-cfg.init_bound, cfg.init_bound, size=k)


def surf_simple(disc: FlowDiscretization, y: np.ndarray, A: MeasurementMatrix,
                cfg: SurfConfig, x_init: np.ndarray | None = None,
                rng: np.random.Generator | None = None) -> SurfResult:
    """Minimize each snapshot objective from the previous minimizer."""
    x = _initial_point(disc.dims.k, cfg, x_init, rng)
    result = SurfResult([], [], [], 0,
                        trajectories=[] if cfg.record_trajectory else None)
    for t, params in enumerate(disc.snapshots):
        obj = Objective(params, A, y)
        try:
            res = minimize(obj, x, cfg.descent)
        except NonFiniteEncountered as exc:
            raise NonFiniteEncountered(str(exc), snapshot=t) from exc
        x = res.x_final
        result.x_per_snapshot.append(x)
        result.f_per_snapshot.append(res.f_final)
        result.total_inner_iterations += res.iterations
        if result.trajectories is not None:
            result.trajectories.append([x])
    return result


def surf_projected(disc: FlowDiscretization, y: np.ndarray, A: MeasurementMatrix,
                   cfg: SurfConfig, x_init: np.ndarray | None = None,
                   rng: np.random.Generator | None = None) -> SurfResult:
    """Piece-enumerating surfing.

    The first snapshot is minimized by plain descent (from the given or
    policy start); each later step enumerates the candidate pieces around
    the previous iterate at slack tau, runs projected gradient descent on
    every feasible candidate, and keeps the lowest objective value, ties
    broken toward the earliest-enumerated (anchor first). A slack budget
    overflow or an infeasible candidate degrades to the anchor piece with
    a logged warning rather than aborting.
    """
    if cfg.tau is None:
        raise ValueError("projected surfing requires cfg.tau > 0")
    x = _initial_point(disc.dims.k, cfg, x_init, rng)
    result = SurfResult([], [], [], 0,
                        trajectories=[] if cfg.record_trajectory else None)

    obj0 = Objective(disc.snapshots[0], A, y)
    res0 = minimize(obj0, x, cfg.descent)
    x = res0.x_final
    result.x_per_snapshot.append(x)
    result.f_per_snapshot.append(res0.f_final)
    result.total_inner_iterations += res0.iterations
    if result.trajectories is not None:
        result.trajectories.append([x])

    for t in range(1, disc.T + 1):
        params = disc.snapshots[t]
        obj = Objective(params, A, y)
        try:
            family = enumerate_pieces(params, x, cfg.tau)
            candidates = family.pieces
        except SlackBudgetExceeded as exc:
            log.warning("snapshot %d: %s; falling back to the anchor piece", t, exc)
            candidates = [piece_for(params, activation_pattern(params, x))]
        best = None
        for g, piece in enumerate(candidates):
            try:
                res = minimize_on_piece(obj, piece, x, cfg.descent)
            except InfeasiblePiece as exc:
                log.warning("snapshot %d piece %d infeasible: %s", t, g, exc)
                continue
            except NonFiniteEncountered as exc:
                raise NonFiniteEncountered(str(exc), snapshot=t) from exc
            result.total_inner_iterations += res.iterations
            f_true = obj.value(res.x_final)
            if best is None or f_true < best[0]:
                best = (f_true, res.x_final)
        if best is None:
            raise InfeasiblePiece(f"no feasible candidate piece at snapshot {t}")
        x = best[1]
        result.x_per_snapshot.append(x)
        result.f_per_snapshot.append(best[0])
        result.pieces_examined_per_step.append(len(candidates))
        if result.trajectories is not None:
            result.trajectories.append([x])
    return result


def direct_descent(final_params, y: np.ndarray, A: MeasurementMatrix,
                   cfg: SurfConfig, n_restarts: int = 1,
                   rng: np.random.Generator | None = None,
                   x_inits: list[np.ndarray] | None = None) -> DescentResult:
    """Baseline: minimize only the final snapshot, best of n_restarts."""
    if x_inits is not None:
        starts = [np.asarray(x, dtype=float) for x in x_inits]
    else:
        if n_restarts < 1:
            raise ValueError("n_restarts must be at least 1")
        starts = [_initial_point(final_params.dims.k, cfg, None, rng)
                  for _ in range(n_restarts)]
    obj = Objective(final_params, A, y)
    best = None
    for x0 in starts:
        res = minimize(obj, x0, cfg.descent)
        if best is None or res.f_final < best.f_final:
            best = res
    return best
