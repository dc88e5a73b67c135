"""Inner-loop optimizers: gradient descent, Adam, and projected descent on a piece."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NonFiniteEncountered
from .objective import Objective
from .pieces import LinearPiece, project_onto_piece

ARMIJO_C = 1e-4
MIN_STEP = 1e-20


@dataclass(frozen=True)
class DescentConfig:
    """Stopping rules and update rule for one minimization call.

    grad_tol=None resolves to the scale-aware default 1e-8 (1 + ||A y||)
    at call time. Backtracking defaults on for plain gradient descent
    (piece curvature varies, a fixed step is unsafe) and off for Adam.
    """

    step_size: float = 0.1
    max_iters: int = 5000
    grad_tol: float | None = None
    step_tol: float = 1e-10
    kind: str = "gd"               # "gd" | "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    backtracking: bool | None = None

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.step_tol <= 0 or (self.grad_tol is not None and self.grad_tol <= 0):
            raise ValueError("tolerances must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.kind not in ("gd", "adam"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")

    def resolved_backtracking(self) -> bool:
        return self.kind == "gd" if self.backtracking is None else self.backtracking


ADAM_DEFAULTS = DescentConfig(kind="adam", step_size=0.01)


@dataclass(frozen=True)
class DescentResult:
    x_final: np.ndarray
    f_final: float
    iterations: int
    converged: bool
    stop_reason: str  # "grad_tol" | "step_tol" | "max_iters"


def _resolve_grad_tol(obj: Objective, cfg: DescentConfig) -> float:
    if cfg.grad_tol is not None:
        return cfg.grad_tol
    return 1e-8 * (1.0 + float(np.linalg.norm(obj.Ay)))


def minimize(obj: Objective, x_init: np.ndarray, cfg: DescentConfig) -> DescentResult:
    """Descend f from x_init until grad_tol, step_tol, or max_iters."""
    x = np.asarray(x_init, dtype=float).copy()
    if x.shape != (obj.k,):
        raise ValueError(f"x_init has shape {x.shape}, expected {(obj.k,)}")
    grad_tol = _resolve_grad_tol(obj, cfg)
    backtrack = cfg.resolved_backtracking()

    m = np.zeros_like(x)
    v = np.zeros_like(x)
    eta = cfg.step_size
    f, g = obj.value_and_gradient(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise NonFiniteEncountered("objective non-finite at the starting point")

    for it in range(1, cfg.max_iters + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= grad_tol:
            return DescentResult(x, f, it - 1, True, "grad_tol")

        if cfg.kind == "adam":
            m = cfg.beta1 * m + (1 - cfg.beta1) * g
            v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
            m_hat = m / (1 - cfg.beta1 ** it)
            v_hat = v / (1 - cfg.beta2 ** it)
            x_new = x - cfg.step_size * m_hat / (np.sqrt(v_hat) + cfg.eps_adam)
            f_new, g_new = obj.value_and_gradient(x_new)
        else:
            # Armijo halving; reuse twice the last accepted step as the
            # next trial so well-scaled problems pay one probe per iter.
            eta = min(cfg.step_size, 2.0 * eta) if backtrack else cfg.step_size
            while True:
                x_new = x - eta * g
                f_new = obj.value(x_new)
                if not backtrack:
                    break
                if np.isfinite(f_new) and f_new <= f - ARMIJO_C * eta * gnorm * gnorm:
                    break
                eta *= 0.5
                if eta < MIN_STEP:
                    x_new = x
                    f_new = f
                    break
            g_new = obj.gradient(x_new)

        if not np.isfinite(f_new) or not np.all(np.isfinite(g_new)):
            raise NonFiniteEncountered(f"non-finite value at iteration {it}")
        step = float(np.linalg.norm(x_new - x))
        x, f, g = x_new, f_new, g_new
        if step <= cfg.step_tol:
            return DescentResult(x, f, it, True, "step_tol")

    return DescentResult(x, f, cfg.max_iters, False, "max_iters")


def piece_quadratic(obj: Objective, piece: LinearPiece):
    """q(x) = 0.5 ||B x + r0||^2 with B = A J, r0 = A offset - A y."""
    B = obj.A.apply(piece.J) if obj.A.kind == "gaussian" else piece.J
    r0 = obj.A.apply(piece.offset) - obj.Ay
    return B, r0


def _quad_lambda_max(B: np.ndarray, iters: int = 50) -> float:
    v = np.ones(B.shape[1]) + np.linspace(0.0, 1e-3, B.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = B.T @ (B @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam = norm
    return float(lam)


def minimize_on_piece(obj: Objective, piece: LinearPiece, x_init: np.ndarray,
                      cfg: DescentConfig) -> DescentResult:
    """Projected gradient descent on the piece's convex quadratic.

    The step 0.9 / lambda_max guarantees contraction, so the iterates
    converge to the constrained minimizer; the returned point is feasible
    to projection tolerance.
    """
    x = project_onto_piece(piece, np.asarray(x_init, dtype=float))
    B, r0 = piece_quadratic(obj, piece)
    lam = _quad_lambda_max(B)
    if lam == 0.0:
        r = B @ x + r0
        return DescentResult(x, 0.5 * float(r @ r), 0, True, "grad_tol")
    eta = 0.9 / lam

    iterations = 0
    for it in range(1, cfg.max_iters + 1):
        iterations = it
        g = B.T @ (B @ x + r0)
        if not np.all(np.isfinite(g)):
            raise NonFiniteEncountered(f"non-finite gradient at PGD iteration {it}")
        x_new = project_onto_piece(piece, x - eta * g, check=False)
        step = float(np.linalg.norm(x_new - x))
        x = x_new
        if step <= cfg.step_tol:
            r = B @ x + r0
            return DescentResult(x, 0.5 * float(r @ r), it, True, "step_tol")
    r = B @ x + r0
    return DescentResult(x, 0.5 * float(r @ r), iterations, False, "max_iters")
