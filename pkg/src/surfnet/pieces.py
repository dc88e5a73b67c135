"""Linear pieces of the generator: slack sets, enumeration, and projection.

For a fixed activation pattern the network is affine in x, and the set of
inputs realizing that pattern is a polytope cut out by one halfspace per
unit: the unit's preactivation, composed through the frozen layers below
it, must have the sign demanded by the pattern.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasiblePiece, SlackBudgetExceeded, SlackBudgetWarning
from .network import ActivationPattern, NetworkParams, forward

FEAS_TOL = 1e-7
PROJ_TOL = 1e-10
MAX_SWEEPS = 10_000
SLACK_BUDGET = 20
SLACK_WARN = 12


@dataclass(frozen=True)
class SlackSet:
    """Units whose preactivation magnitude at the anchor is at most tau.

    Entries are (layer, row) with 0-based indices; layer 0 is the first
    hidden layer. These are the units whose sign can plausibly flip after
    a small parameter change.
    """

    entries: frozenset[tuple[int, int]]
    tau: float

    def __len__(self) -> int:
        return len(self.entries)


def slack_set(params: NetworkParams, x: np.ndarray, tau: float) -> SlackSet:
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    outs = forward(params, x)
    entries = {
        (i, int(j))
        for i, z in enumerate(outs.z)
        for j in np.flatnonzero(np.abs(z) <= tau)
    }
    return SlackSet(frozenset(entries), tau)


@dataclass(eq=False)
class LinearPiece:
    """One affine piece of the network and its polytope in input space.

    On the polytope {x : C x <= c}, masked evaluation with `pattern`
    equals J x + offset. Constraint rows are scaled to unit norm so the
    feasibility tolerances are geometric distances. Rows that do not
    depend on x (zero normal) are dropped when trivially satisfied; if
    one is violated the polytope is empty and `empty` is set.
    """

    pattern: ActivationPattern
    C: np.ndarray          # (n_constraints, k), unit-norm rows
    c: np.ndarray          # (n_constraints,)
    J: np.ndarray          # (n, k)
    offset: np.ndarray     # (n,)
    empty: bool = False

    def violation(self, x: np.ndarray) -> float:
        if self.C.shape[0] == 0:
            return 0.0
        return float(np.max(self.C @ x - self.c, initial=0.0))

    def contains(self, x: np.ndarray, tol: float = FEAS_TOL) -> bool:
        return not self.empty and self.violation(x) <= tol

    def affine_value(self, x: np.ndarray) -> np.ndarray:
        return self.J @ x + self.offset


def piece_for(params: NetworkParams, pattern: ActivationPattern) -> LinearPiece:
    """Build the polytope and affine map for a full activation pattern."""
    k = params.dims.k
    rows, rhs = [], []
    Ci = np.eye(k)            # x_{i-1} = Ci x + ei through the frozen layers
    ei = np.zeros(k)
    empty = False
    for Wi, bi, mask in zip(params.W, params.b, pattern.masks):
        Z = Wi @ Ci
        u = Wi @ ei + bi
        sign = np.where(mask, 1.0, -1.0)
        # sign * (Z x + u) >= 0  ->  (-sign Z) x <= sign u
        A_layer = -sign[:, None] * Z
        b_layer = sign * u
        norms = np.linalg.norm(A_layer, axis=1)
        for a_row, b_val, nrm in zip(A_layer, b_layer, norms):
            if nrm <= 1e-14:
                if b_val < -FEAS_TOL:
                    empty = True
                continue
            rows.append(a_row / nrm)
            rhs.append(b_val / nrm)
        Ci = np.where(mask[:, None], Z, 0.0)
        ei = np.where(mask, u, 0.0)
    C = np.array(rows).reshape(len(rows), k)
    c = np.asarray(rhs, dtype=float)
    return LinearPiece(pattern=pattern, C=C, c=c,
                       J=params.V @ Ci, offset=params.V @ ei, empty=empty)


@dataclass(eq=False)
class PieceFamily:
    """All pieces reachable from the anchor by flipping slack-set bits.

    pieces[0] is always the anchor's own piece. Candidates whose polytope
    is empty (per the projection-based feasibility test) are discarded,
    so 1 <= len(pieces) <= 2^{|slack|}.
    """

    anchor: np.ndarray
    slack: SlackSet
    pieces: list[LinearPiece] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.pieces)


def enumerate_pieces(params: NetworkParams, x: np.ndarray, tau: float,
                     budget: int = SLACK_BUDGET,
                     feas_tol: float = FEAS_TOL) -> PieceFamily:
    """Enumerate the candidate pieces around x at slack threshold tau.

    Raises SlackBudgetExceeded when the slack set is larger than `budget`.
    """
    x = np.asarray(x, dtype=float)
    slack = slack_set(params, x, tau)
    if len(slack) > budget:
        raise SlackBudgetExceeded(len(slack), budget)
    if len(slack) > SLACK_WARN:
        warnings.warn(
            f"slack set has {len(slack)} entries; enumerating "
            f"{2 ** len(slack)} candidate pieces", SlackBudgetWarning)

    outs = forward(params, x)
    base = [z > 0.0 for z in outs.z]
    flips = sorted(slack.entries)

    family = PieceFamily(anchor=x, slack=slack)
    for assignment in itertools.product((False, True), repeat=len(flips)):
        masks = [m.copy() for m in base]
        for (layer, row), flipped in zip(flips, assignment):
            if flipped:
                masks[layer][row] = ~masks[layer][row]
        piece = piece_for(params, ActivationPattern(tuple(masks)))
        if piece.empty:
            continue
        # Feasibility: project the anchor; the anchor is near the polytope
        # by construction, so an emptiness certificate or a converged
        # projection with residual above tolerance discards the candidate.
        proj, empty = _project_certified(piece.C, piece.c, x, PROJ_TOL, MAX_SWEEPS)
        if empty is True or piece.violation(proj) > feas_tol:
            continue
        family.pieces.append(piece)
    return family


# Direct active-set enumeration is used whenever the subset count is
# small; by conic Caratheodory the projection onto a polytope in R^k is
# determined by at most k active constraints, so trying every subset of
# size <= k is exact and doubles as a feasibility certificate.
_SUBSET_CAP = 4096


def _project_subsets(C: np.ndarray, c: np.ndarray, x0: np.ndarray,
                     max_size: int) -> np.ndarray | None:
    """Exact projection by active-set enumeration; None when infeasible.

    Subsets are scanned most-violated-first; the first candidate that is
    feasible with nonnegative multipliers satisfies the KKT conditions of
    the projection QP and is returned immediately, which makes the usual
    one-face case cost a single small solve.
    """
    m = C.shape[0]
    viol = C @ x0 - c
    order = np.argsort(-viol, kind="stable")
    best = None
    for size in range(1, max_size + 1):
        for subset in itertools.combinations(order.tolist(), size):
            Ca = C[list(subset)]
            rhs = Ca @ x0 - c[list(subset)]
            mu = np.linalg.lstsq(Ca @ Ca.T, rhs, rcond=None)[0]
            xp = x0 - Ca.T @ mu
            if np.max(C @ xp - c) > 1e-9:
                continue
            if np.all(mu >= -1e-12):
                return xp
            d = float(np.linalg.norm(xp - x0))
            if best is None or d < best[0] - 1e-15:
                best = (d, xp)
    return None if best is None else best[1]


def _project_certified(C: np.ndarray, c: np.ndarray, x0: np.ndarray,
                       tol: float, max_sweeps: int):
    """Projection plus an emptiness verdict.

    Returns (point, empty) where empty is True when active-set
    enumeration certified an empty polytope (point is then a violating
    representative), False when the point is an exact projection, and
    None when only the iterative scheme ran and the caller must judge by
    the residual violation.
    """
    x0 = np.asarray(x0, dtype=float)
    m = C.shape[0]
    k = x0.size
    if m == 0:
        return x0.copy(), False
    viol = C @ x0 - c
    if np.max(viol) <= 0.0:
        return x0.copy(), False
    if np.count_nonzero(viol > 0.0) == 1:
        # One violated halfspace: its reflection is the projection when
        # feasible (single positive multiplier satisfies KKT).
        i = int(np.argmax(viol))
        xp = x0 - viol[i] * C[i]
        if np.max(C @ xp - c) <= 1e-12:
            return xp, False

    certified_empty = False
    max_size = m if m <= 3 else (k if k <= 3 else 0)
    if max_size and sum(math.comb(m, j) for j in range(1, max_size + 1)) <= _SUBSET_CAP:
        exact = _project_subsets(C, c, x0, max_size)
        if exact is not None:
            return exact, False
        # No subset candidate is feasible, so the polytope is empty up to
        # tolerance; a short cyclic run exhibits a violating point.
        certified_empty = True
        max_sweeps = min(max_sweeps, 50)

    x = x0.copy()
    corrections = np.zeros((m, k))
    for _ in range(max_sweeps):
        delta = 0.0
        for i in range(m):
            zread = x + corrections[i]
            over = float(C[i] @ zread - c[i])
            if over > 0.0:
                xn = zread - over * C[i]
            else:
                xn = zread
            corrections[i] = zread - xn
            delta = max(delta, float(np.max(np.abs(xn - x))))
            x = xn
        if delta <= tol:
            break
    return x, (True if certified_empty else None)


def project_halfspaces(C: np.ndarray, c: np.ndarray, x0: np.ndarray,
                       tol: float = PROJ_TOL,
                       max_sweeps: int = MAX_SWEEPS) -> np.ndarray:
    """Euclidean projection onto {x : C x <= c} with unit-norm rows.

    Small systems (few constraints, or low input dimension) are solved
    exactly by active-set enumeration; otherwise Dykstra's cyclic scheme
    is used, which converges to the true projection (not just a feasible
    point) for intersections of halfspaces. For an empty intersection the
    returned point retains a constraint violation, which callers use as
    the infeasibility signal.
    """
    point, _ = _project_certified(C, c, x0, tol, max_sweeps)
    return point


def project_onto_piece(piece: LinearPiece, x0: np.ndarray,
                       check: bool = True) -> np.ndarray:
    """Orthogonal projection of x0 onto the piece's polytope.

    With check=True, raises InfeasiblePiece when the converged point
    still violates a constraint, which certifies an empty polytope.
    """
    if piece.empty:
        raise InfeasiblePiece("piece has a constant constraint that can never hold")
    proj = project_halfspaces(piece.C, piece.c, np.asarray(x0, dtype=float))
    if check and piece.violation(proj) > FEAS_TOL:
        raise InfeasiblePiece(
            f"projection residual {piece.violation(proj):.3e} exceeds {FEAS_TOL:.0e}")
    return proj


def kkt_residual(piece: LinearPiece, x0: np.ndarray, x_proj: np.ndarray,
                 active_tol: float = 1e-8) -> float:
    """Distance of x0 - x_proj from the cone of active constraint normals.

    Independent optimality check for the projection: at the true
    projection the residual lies in that cone, so the returned value is
    ~0. Uses nonnegative least squares as the cone solver.
    """
    from scipy.optimize import nnls

    r = np.asarray(x0, float) - np.asarray(x_proj, float)
    if np.linalg.norm(r) <= 1e-14:
        return 0.0
    if piece.C.shape[0] == 0:
        return float(np.linalg.norm(r))
    slacks = piece.c - piece.C @ x_proj
    active = slacks <= active_tol
    if not np.any(active):
        return float(np.linalg.norm(r))
    coeffs, resid = nnls(piece.C[active].T, r)
    return float(resid)


def slack_size_profile(params: NetworkParams, xs: np.ndarray,
                       taus: list[float]) -> list[dict]:
    """|S(x, theta, tau)| statistics over sample inputs, one row per tau."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    all_z = []
    for x in xs:
        outs = forward(params, x)
        all_z.append(np.concatenate([np.abs(z) for z in outs.z]))
    all_z = np.array(all_z)
    rows = []
    for tau in taus:
        sizes = np.sum(all_z <= tau, axis=1)
        rows.append({
            "tau": float(tau),
            "max_size": int(sizes.max()),
            "mean_size": float(sizes.mean()),
            "samples": int(len(sizes)),
        })
    return rows
