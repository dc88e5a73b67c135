import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surfnet import (InfeasiblePiece, SlackBudgetExceeded, activation_pattern,
                     enumerate_pieces, forward, kkt_residual, piece_for,
                     project_onto_piece, slack_set, slack_size_profile)
from surfnet.errors import SlackBudgetWarning
from surfnet.network import ActivationPattern, NetworkDims, NetworkParams, init_gaussian
from surfnet.pieces import LinearPiece, project_halfspaces
from surfnet.rng import stream

from conftest import random_net


def halfspace_piece(C, c):
    C = np.atleast_2d(np.asarray(C, float))
    norms = np.linalg.norm(C, axis=1)
    return LinearPiece(pattern=None, C=C / norms[:, None],
                       c=np.asarray(c, float) / norms,
                       J=np.zeros((1, C.shape[1])), offset=np.zeros(1))


def test_slack_set_abs_network(abs_net):
    ss = slack_set(abs_net, np.array([0.5]), 0.6)
    assert ss.entries == {(0, 0), (0, 1)}


def test_slack_set_empty_at_interior(abs_net):
    assert len(slack_set(abs_net, np.array([0.5]), 0.0)) == 0


def test_slack_set_everything_at_huge_tau():
    params = random_net(1)
    total = sum(params.dims.widths)
    ss = slack_set(params, np.zeros(3), 1e9)
    assert len(ss) == total


def test_slack_set_rejects_negative_tau(abs_net):
    with pytest.raises(ValueError):
        slack_set(abs_net, np.array([0.0]), -1.0)


def test_enumerate_empty_slack_gives_anchor_only():
    params = random_net(2)
    x = stream(2, 1, "anchor").uniform(-1, 1, 3)
    fam = enumerate_pieces(params, x, 0.0)
    assert len(fam) == 1
    assert fam.pieces[0].pattern == activation_pattern(params, x)


def test_enumerate_abs_network_cases(abs_net):
    fam = enumerate_pieces(abs_net, np.array([0.5]), 0.6)
    # Anchor [[1,0]] first; the opposite halfline and the two degenerate
    # {0} candidates are all feasible.
    assert len(fam) == 4
    anchor = fam.pieces[0].pattern.masks[0]
    assert anchor.astype(int).tolist() == [1, 0]
    patterns = {p.pattern.key() for p in fam.pieces}
    assert len(patterns) == 4


def test_enumerate_interior_piece_matches_forward():
    params = random_net(7)
    rng = stream(7, 3, "interior")
    x = rng.uniform(-1.5, 1.5, 3)
    fam = enumerate_pieces(params, x, 0.0)
    piece = fam.pieces[0]
    for _ in range(20):
        probe = rng.uniform(-1.5, 1.5, 3)
        proj = project_onto_piece(piece, probe)
        out = forward(params, proj).output
        assert np.allclose(piece.affine_value(proj), out, rtol=1e-9, atol=1e-11)


def test_piece_constraints_consistent_with_pattern():
    params = random_net(19, k=2, widths=(5, 6), n=7)
    x = stream(19, 0, "cons").uniform(-1, 1, 2)
    fam = enumerate_pieces(params, x, 0.15)
    rng = stream(19, 1, "cons-probe")
    for piece in fam.pieces:
        for _ in range(20):
            inside = project_onto_piece(piece, rng.uniform(-2, 2, 2))
            outs = forward(params, inside)
            for (mask, z) in zip(piece.pattern.masks, outs.z):
                clear = np.abs(z) > 1e-9
                assert np.array_equal((z > 0)[clear], mask[clear])


def test_slack_budget_exceeded():
    params = random_net(3, k=2, widths=(30,), n=5)
    with pytest.raises(SlackBudgetExceeded):
        enumerate_pieces(params, np.zeros(2), 1e9)


def test_slack_budget_warning():
    # 13 slack rows is over the warning bar but under the hard budget.
    dims = NetworkDims(k=2, widths=(13,), n=2)
    W = stream(4, 0, "warn").standard_normal((13, 2))
    params = NetworkParams(dims, np.zeros((2, 13)), (W,), (np.zeros(13),))
    with pytest.warns(SlackBudgetWarning):
        enumerate_pieces(params, np.zeros(2), 1e-12)


def test_project_single_halfspace_1d():
    piece = halfspace_piece([[-1.0]], [0.0])   # x >= 0
    assert project_onto_piece(piece, np.array([-3.0])) == pytest.approx([0.0])


def test_project_feasible_point_is_identity():
    piece = halfspace_piece([[1.0, 1.0]], [2.0])
    x0 = np.array([0.3, 0.4])
    assert np.array_equal(project_onto_piece(piece, x0), x0)


def test_project_simplex_corner():
    piece = halfspace_piece([[-1, 0], [0, -1], [1, 1]], [0.0, 0.0, 1.0])
    proj = project_onto_piece(piece, np.array([2.0, 2.0]))
    assert proj == pytest.approx([0.5, 0.5], abs=1e-9)


def test_projection_idempotent_random_polytopes():
    rng = stream(11, 0, "idem")
    for _ in range(50):
        k = int(rng.integers(1, 4))
        m = int(rng.integers(1, 9))
        C = rng.standard_normal((m, k))
        interior = rng.uniform(-1, 1, k)
        c = C @ interior + rng.uniform(0.1, 1.0, m)
        piece = halfspace_piece(C, c)
        x0 = rng.uniform(-5, 5, k)
        p1 = project_onto_piece(piece, x0)
        p2 = project_onto_piece(piece, p1)
        assert np.linalg.norm(p2 - p1) < 1e-10


def test_projection_kkt_random_polytopes():
    rng = stream(12, 0, "kkt")
    for _ in range(50):
        k = int(rng.integers(2, 4))
        m = int(rng.integers(2, 9))
        C = rng.standard_normal((m, k))
        interior = rng.uniform(-1, 1, k)
        c = C @ interior + rng.uniform(0.05, 1.0, m)
        piece = halfspace_piece(C, c)
        x0 = rng.uniform(-5, 5, k)
        proj = project_onto_piece(piece, x0)
        assert piece.violation(proj) <= 1e-7
        assert kkt_residual(piece, x0, proj) < 1e-7


def test_projection_matches_dense_qp_oracle():
    # Independent check: solve the projection QP by brute penalty-free
    # means (scipy) and compare.
    from scipy.optimize import minimize as scipy_minimize

    rng = stream(14, 0, "qp")
    for trial in range(10):
        k, m = 3, 6
        C = rng.standard_normal((m, k))
        interior = rng.uniform(-1, 1, k)
        c = C @ interior + rng.uniform(0.05, 1.0, m)
        piece = halfspace_piece(C, c)
        x0 = rng.uniform(-4, 4, k)
        ours = project_onto_piece(piece, x0)
        ref = scipy_minimize(
            lambda x: 0.5 * np.sum((x - x0) ** 2), interior,
            jac=lambda x: x - x0,
            constraints=[{"type": "ineq",
                          "fun": lambda x: piece.c - piece.C @ x,
                          "jac": lambda x: -piece.C}],
            method="SLSQP", options={"maxiter": 200, "ftol": 1e-14})
        assert np.linalg.norm(ours - ref.x) < 1e-6


def test_degenerate_piece_kept(abs_net):
    # Patterns [[1,1]] and [[0,0]] pin x to exactly 0; they stay in the
    # family and project onto that point.
    fam = enumerate_pieces(abs_net, np.array([0.0]), 0.1)
    assert len(fam) == 4
    for piece in fam.pieces:
        proj = project_onto_piece(piece, np.array([5.0]))
        assert piece.violation(proj) <= 1e-7


def test_infeasible_piece_raises():
    piece = halfspace_piece([[1.0], [-1.0]], [-1.0, -1.0])   # x <= -1 and x >= 1
    with pytest.raises(InfeasiblePiece):
        project_onto_piece(piece, np.array([0.0]))


def test_family_cardinality_bounds():
    params = random_net(8, k=2, widths=(6,), n=4)
    rng = stream(8, 2, "card")
    for _ in range(10):
        x = rng.uniform(-1, 1, 2)
        tau = float(rng.uniform(0.0, 0.3))
        fam = enumerate_pieces(params, x, tau)
        assert 1 <= len(fam) <= 2 ** len(fam.slack)


def test_slack_profile_interior_zero():
    params = random_net(5, k=3, widths=(6, 8), n=9)
    xs = stream(5, 4, "profile").uniform(-2, 2, (200, 3))
    rows = slack_size_profile(params, xs, [0.0, 1e-6, 0.5])
    assert rows[0]["max_size"] == 0
    assert rows[0]["tau"] == 0.0


def test_slack_profile_constructed_kink():
    params = random_net(6, k=3, widths=(6, 8), n=9)
    # Put x exactly on the first-layer row-0 kink.
    w, b = params.W[0][0], params.b[0][0]
    x = -b * w / float(w @ w)
    assert abs(w @ x + b) < 1e-12
    rows = slack_size_profile(params, x[None, :], [0.0])
    assert rows[0]["max_size"] == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.0, 0.5), st.floats(0.0, 0.5))
def test_slack_monotone_in_tau(seed, tau_a, tau_b):
    params = random_net(seed % 100)
    x = stream(seed, 0, "mono").uniform(-1, 1, 3)
    lo, hi = sorted([tau_a, tau_b])
    assert slack_set(params, x, lo).entries <= slack_set(params, x, hi).entries


def test_project_halfspaces_no_constraints():
    x0 = np.array([1.0, -2.0])
    assert np.array_equal(project_halfspaces(np.zeros((0, 2)), np.zeros(0), x0), x0)


def test_piece_for_zero_row_handling():
    # A constant always-on unit contributes no constraint; flipping it
    # off would make the piece empty.
    dims = NetworkDims(k=1, widths=(1,), n=1)
    params = NetworkParams(dims, np.array([[1.0]]),
                           (np.array([[0.0]]),), (np.array([1.0]),))
    on = piece_for(params, ActivationPattern((np.array([True]),)))
    assert on.C.shape[0] == 0 and not on.empty
    off = piece_for(params, ActivationPattern((np.array([False]),)))
    assert off.empty
