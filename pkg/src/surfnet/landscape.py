"""Empirical landscape checks and grid-based global minimization oracles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .descent import DescentConfig, minimize
from .errors import OracleIntractable
from .network import NetworkParams
from .objective import MeasurementMatrix, Objective
from .rng import stream

GRID_CAP = 10_000_000
BATCH = 65_536


@dataclass(frozen=True)
class LandscapeReport:
    """Fraction of sampled points with a strict radially-inward descent
    direction, per tested radius.

    Radii are relative: points are sampled on spheres of radius
    r * (1 + ||y||). ball_estimate is the smallest tested radius whose
    fraction reaches the threshold (None if none does); the region inside
    it is where descent toward the origin is no longer reliable.
    """

    radii: tuple[float, ...]
    fractions: tuple[float, ...]
    ball_estimate: float | None
    n_samples: int
    seed: int
    threshold: float = 0.99


def verify_descent_direction(params: NetworkParams, y: np.ndarray,
                             A: MeasurementMatrix, radii: list[float],
                             n_samples: int, seed: int,
                             threshold: float = 0.99) -> LandscapeReport:
    """Sample spheres and test D_{-x/||x||} f(x) < 0 at each point.

    Sphere sampling is Gaussian normalize-and-scale from the named
    stream, so reports are deterministic given the seed.
    """
    obj = Objective(params, A, np.asarray(y, dtype=float))
    scale = 1.0 + float(np.linalg.norm(y))
    radii = sorted(float(r) for r in radii)
    fractions = []
    for idx, r in enumerate(radii):
        rng = stream(seed, idx, "landscape-sphere")
        hits = 0
        for _ in range(n_samples):
            g = rng.standard_normal(params.dims.k)
            g /= np.linalg.norm(g)
            x = r * scale * g
            if obj.directional_derivative(x, -x) < 0.0:
                hits += 1
        fractions.append(hits / n_samples)
    ball = next((r for r, f in zip(radii, fractions) if f >= threshold), None)
    return LandscapeReport(tuple(radii), tuple(fractions), ball,
                           n_samples, seed, threshold)


@dataclass(frozen=True)
class OracleConfig:
    """Grid search over [-bound, bound]^k followed by local polish."""

    bound: float = 2.0
    resolution: float = 0.01
    polish: DescentConfig = field(default_factory=lambda: DescentConfig(
        step_size=0.5, max_iters=2000, grad_tol=1e-12, step_tol=1e-14))
    top_cells: int = 10
    near_tie_f: float = 1e-3
    near_tie_x: float = 0.1


@dataclass(frozen=True)
class OracleResult:
    x_min: np.ndarray
    f_min: float
    near_tie: bool


def _polish_cell(obj: Objective, x0: np.ndarray, resolution: float,
                 cfg: DescentConfig) -> tuple[float, np.ndarray]:
    """Descend from a grid cell without leaving its basin.

    Two guards keep the refinement basin-faithful: iterates are clamped
    to a small box around the cell, and no single step may move farther
    than one grid cell, so monotone descent cannot jump across a ridge
    the grid resolved. The cell nearest the global minimizer therefore
    polishes to the minimizer itself.
    """
    lo, hi = x0 - 1.5 * resolution, x0 + 1.5 * resolution
    x = x0.copy()
    f = obj.value(x)
    eta = cfg.step_size
    for _ in range(cfg.max_iters):
        g = obj.gradient(x)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= 1e-13:
            break
        eta = min(cfg.step_size, 2.0 * eta)
        while True:
            move = eta * g
            length = float(np.linalg.norm(move))
            if length > resolution:
                move *= resolution / length
            x_new = np.clip(x - move, lo, hi)
            f_new = obj.value(x_new)
            if np.isfinite(f_new) and f_new < f:
                break
            eta *= 0.5
            if eta < 1e-20:
                x_new, f_new = x, f
                break
        step = float(np.linalg.norm(x_new - x))
        x, f = x_new, f_new
        if step <= cfg.step_tol:
            break
    return f, x


def brute_force_min(obj: Objective, cfg: OracleConfig) -> OracleResult:
    """Global minimization by exhaustive grid evaluation plus polish.

    Intended as an independent check at k <= 3; raises OracleIntractable
    beyond the hard grid cap. near_tie reports two polished basins within
    near_tie_f in value but further than near_tie_x apart, a diagnostic
    for non-unique minimizers.
    """
    k = obj.k
    per_axis = int(round(2 * cfg.bound / cfg.resolution)) + 1
    if per_axis ** k > GRID_CAP:
        raise OracleIntractable(
            f"grid of {per_axis}^{k} points exceeds the cap {GRID_CAP}")
    axis = np.linspace(-cfg.bound, cfg.bound, per_axis)
    grids = np.meshgrid(*([axis] * k), indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=1)

    values = np.empty(points.shape[0])
    for lo in range(0, points.shape[0], BATCH):
        hi = min(lo + BATCH, points.shape[0])
        values[lo:hi] = obj.batch_value(points[lo:hi])

    order = np.argsort(values, kind="stable")[:cfg.top_cells]
    polished = [
        _polish_cell(obj, points[idx], cfg.resolution, cfg.polish)
        for idx in order
    ]
    polished.sort(key=lambda t: t[0])
    f_best, x_best = polished[0]
    near_tie = any(
        f - f_best <= cfg.near_tie_f and np.linalg.norm(x - x_best) > cfg.near_tie_x
        for f, x in polished[1:]
    )
    return OracleResult(x_min=x_best, f_min=float(f_best), near_tie=near_tie)
