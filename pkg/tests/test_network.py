import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surfnet import (NetworkDims, NetworkParams, activation_pattern, forward,
                     init_gaussian, masked_forward, masked_jacobian, operator_norm)
from surfnet.network import batch_forward, pattern_of
from surfnet.rng import stream
from surfnet import zoo

from conftest import random_net, small_dims


def test_dims_validation():
    with pytest.raises(ValueError):
        NetworkDims(k=0, widths=(3,), n=2)
    with pytest.raises(ValueError):
        NetworkDims(k=2, widths=(), n=2)
    with pytest.raises(ValueError):
        NetworkDims(k=2, widths=(3, 0), n=2)


def test_expansive_flag_advisory():
    assert NetworkDims(k=4, widths=(100, 400), n=1600).is_expansive()
    assert not NetworkDims(k=4, widths=(100, 50), n=1600).is_expansive()
    # Non-expansive dims still construct and evaluate.
    params = init_gaussian(NetworkDims(k=4, widths=(2,), n=3), 0)
    forward(params, np.zeros(4))


def test_init_shapes():
    dims = NetworkDims(k=4, widths=(100, 400), n=1600)
    params = init_gaussian(dims, 123)
    assert params.V.shape == (1600, 400)
    assert params.W[0].shape == (100, 4)
    assert params.W[1].shape == (400, 100)
    assert params.b[0].shape == (100,)
    assert params.b[1].shape == (400,)


def test_init_deterministic():
    dims = NetworkDims(k=3, widths=(5, 7), n=9)
    a = init_gaussian(dims, 42)
    b = init_gaussian(dims, 42)
    assert np.array_equal(a.flat(), b.flat())
    c = init_gaussian(dims, 43)
    assert not np.array_equal(a.flat(), c.flat())


def test_init_variance_monte_carlo():
    # k=1, widths=[1], n=1: W_1 is a single N(0, 1) draw (n_1 = 1).
    # Sample variance over 1e5 seeds should sit within 3 sigma of 1,
    # where sigma ~ sqrt(2/N) for a chi-square spread.
    dims = NetworkDims(k=1, widths=(1,), n=1)
    N = 100_000
    draws = np.array([init_gaussian(dims, s).W[0][0, 0] for s in range(N)])
    var = draws.var()
    assert abs(var - 1.0) < 3.0 * np.sqrt(2.0 / N)


def test_forward_abs_network(abs_net):
    assert forward(abs_net, np.array([2.0])).output == pytest.approx([2.0])
    assert forward(abs_net, np.array([-3.0])).output == pytest.approx([3.0])


def test_forward_zero_propagation():
    dims = NetworkDims(k=2, widths=(4, 5), n=3)
    params = init_gaussian(dims, 7)
    zero_bias = NetworkParams(dims, params.V, params.W,
                              tuple(np.zeros_like(b) for b in params.b))
    assert np.array_equal(forward(zero_bias, np.zeros(2)).output, np.zeros(3))


@pytest.mark.parametrize("s", [0.0, 0.5, 1.0])
def test_forward_one_unit_hand_value(s):
    params = zoo.one_unit_flow().at(s)
    out = forward(params, np.array([0.5]))
    assert out.output == pytest.approx([(1.0 + s) * 1.5])


def test_forward_shape_mismatch(abs_net):
    with pytest.raises(ValueError):
        forward(abs_net, np.zeros(2))


def test_pattern_abs_network(abs_net):
    pat = activation_pattern(abs_net, np.array([2.0]))
    assert [m.astype(int).tolist() for m in pat.masks] == [[1, 0]]


def test_pattern_boundary_convention(abs_net):
    # Both preactivations are exactly zero at x=0 and count as inactive.
    pat = activation_pattern(abs_net, np.array([0.0]))
    assert [m.astype(int).tolist() for m in pat.masks] == [[0, 0]]


def test_masked_forward_matches_zeroed_rows_oracle():
    # Independent construction: zero out the off rows of W_i, b_i and
    # evaluate the resulting network without any ReLU.
    for seed in range(10):
        params = random_net(seed)
        x = stream(seed, 1, "mask-oracle").uniform(-2, 2, params.dims.k)
        pat = activation_pattern(params, x)
        h = x
        for Wi, bi, mask in zip(params.W, params.b, pat.masks):
            Wz = np.where(mask[:, None], Wi, 0.0)
            bz = np.where(mask, bi, 0.0)
            h = Wz @ h + bz
        oracle = params.V @ h
        assert np.allclose(masked_forward(params, pat, x), oracle,
                           rtol=0, atol=1e-12)
        assert np.allclose(forward(params, x).output, oracle, rtol=0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(small_dims(), st.integers(0, 2**32 - 1))
def test_masked_forward_exact_equality(dims, seed):
    params = init_gaussian(dims, seed)
    x = stream(seed, 3, "hyp-x").uniform(-3, 3, dims.k)
    pat = activation_pattern(params, x)
    assert np.array_equal(masked_forward(params, pat, x),
                          forward(params, x).output)


def test_masked_forward_all_ones_pure_affine():
    params = random_net(11, k=2, widths=(5,), n=4)
    from surfnet.network import ActivationPattern
    ones = ActivationPattern((np.ones(5, dtype=bool),))
    x = np.array([0.3, -0.8])
    expected = params.V @ (params.W[0] @ x + params.b[0])
    assert np.allclose(masked_forward(params, ones, x), expected, atol=1e-14)


def test_masked_forward_affine_extension(abs_net):
    from surfnet.network import ActivationPattern
    pat = ActivationPattern((np.array([True, False]),))
    out = masked_forward(abs_net, pat, np.array([-3.0]))
    assert out == pytest.approx([-3.0])


def test_masked_jacobian_matches_finite_difference():
    params = random_net(5)
    x = np.array([0.4, -0.2, 0.9])
    pat = activation_pattern(params, x)
    J = masked_jacobian(params, pat)
    # The masked map is affine, so J is exact against differences.
    for j in range(params.dims.k):
        e = np.zeros(params.dims.k)
        e[j] = 1e-3
        diff = (masked_forward(params, pat, x + e) -
                masked_forward(params, pat, x - e)) / 2e-3
        assert np.allclose(J[:, j], diff, atol=1e-9)


def test_batch_forward_matches_loop():
    # Summation order differs from the single-sample path, so compare to
    # tight tolerance rather than bitwise.
    params = random_net(9)
    X = stream(9, 2, "batch").uniform(-2, 2, (20, 3))
    batched = batch_forward(params, X)
    for row, x in zip(batched, X):
        assert np.allclose(row, forward(params, x).output, rtol=1e-13, atol=1e-13)


def test_lipschitz_propagation():
    params = random_net(3, k=4, widths=(8, 10), n=12)
    norms = [operator_norm(W) for W in params.W]
    rng = stream(3, 5, "lip")
    for _ in range(20):
        x, xp = rng.uniform(-2, 2, 4), rng.uniform(-2, 2, 4)
        a, b = forward(params, x), forward(params, xp)
        bound = np.linalg.norm(x - xp)
        for i in range(params.dims.d):
            bound *= norms[i]
            gap = np.linalg.norm(a.x[i + 1] - b.x[i + 1])
            assert gap <= bound * (1 + 1e-9) + 1e-12


def test_forward_continuous_along_segment():
    params = random_net(8)
    rng = stream(8, 1, "segment")
    x, xp = rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3)
    lip = operator_norm(params.V)
    for W in params.W:
        lip *= operator_norm(W)
    ts = np.linspace(0, 1, 101)
    vals = [forward(params, t * x + (1 - t) * xp).output for t in ts]
    seg_len = np.linalg.norm(x - xp) / 100
    for a, b in zip(vals, vals[1:]):
        assert np.linalg.norm(a - b) <= lip * seg_len + 1e-9


def test_operator_norm_against_svd():
    rng = stream(2, 0, "opnorm")
    for shape in [(4, 3), (10, 10), (3, 7)]:
        M = rng.standard_normal(shape)
        assert operator_norm(M) == pytest.approx(np.linalg.svd(M)[1][0], rel=1e-8)


def test_flat_round_trip():
    params = random_net(21)
    rebuilt = NetworkParams.from_flat(params.dims, params.flat())
    assert np.array_equal(rebuilt.flat(), params.flat())


def test_params_validation():
    dims = NetworkDims(k=2, widths=(3,), n=2)
    with pytest.raises(ValueError):
        NetworkParams(dims, np.zeros((2, 4)), (np.zeros((3, 2)),), (np.zeros(3),))
    with pytest.raises(ValueError):
        NetworkParams(dims, np.full((2, 3), np.nan), (np.zeros((3, 2)),),
                      (np.zeros(3),))
