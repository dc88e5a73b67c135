import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surfnet import (MeasurementMatrix, NetworkDims, OracleConfig, ParameterFlow,
                     TrainConfig, discretize, estimate_regularity, init_gaussian,
                     micro_train_flow)
from surfnet.flow import training_gradients, training_loss
from surfnet.network import NetworkParams
from surfnet.rng import stream
from surfnet import zoo

from conftest import random_net


def test_interpolation_endpoints():
    start, end = random_net(1), random_net(2)
    flow = ParameterFlow.interpolation(start, end, horizon=2.0)
    assert np.array_equal(flow.at(0.0).flat(), start.flat())
    assert np.array_equal(flow.at(2.0).flat(), end.flat())


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 63), st.integers(0, 63))
def test_interpolation_affine_in_s(i, j):
    # Dyadic s values keep the blend coefficients exact.
    start, end = random_net(3), random_net(4)
    flow = ParameterFlow.interpolation(start, end, horizon=1.0)
    s, sp = i / 64.0, j / 64.0
    mid = flow.at((s + sp) / 2.0).flat()
    avg = 0.5 * (flow.at(s).flat() + flow.at(sp).flat())
    assert np.allclose(mid, avg, rtol=1e-15, atol=1e-15)


def test_interpolation_requires_matching_dims():
    with pytest.raises(ValueError):
        ParameterFlow.interpolation(random_net(1), random_net(1, k=2), 1.0)


def test_discretize_delta_equals_horizon():
    flow = ParameterFlow.interpolation(random_net(5), random_net(6), horizon=1.0)
    disc = discretize(flow, 1.0)
    assert disc.T == 1
    assert len(disc.snapshots) == 2


def test_discretize_one_unit_values():
    disc = discretize(zoo.one_unit_flow(), 0.25)
    assert [float(s.V[0, 0]) for s in disc.snapshots] == [1.0, 1.25, 1.5, 1.75, 2.0]


def test_discretize_inexact_division():
    disc = discretize(zoo.one_unit_flow(), 0.04)
    assert disc.T == 25


def test_discretize_snapshots_pass_through():
    seq = [random_net(i) for i in range(4)]
    flow = ParameterFlow.snapshots(seq, [0, 40, 80, 120])
    disc = discretize(flow, 0.123)
    assert disc.T == 3
    assert all(a is b for a, b in zip(disc.snapshots, seq))


def test_snapshot_indices_must_increase():
    with pytest.raises(ValueError):
        ParameterFlow.snapshots([random_net(1), random_net(2)], [5, 5])


def test_snapshot_flow_step_lookup():
    seq = [random_net(i) for i in range(3)]
    flow = ParameterFlow.snapshots(seq, [0, 10, 20])
    assert flow.at(0) is seq[0]
    assert flow.at(9.5) is seq[0]
    assert flow.at(10) is seq[1]
    assert flow.at(20) is seq[2]


def micro_targets(n=4, count=2, seed=70):
    return stream(seed, 0, "targets").standard_normal((count, n))


def test_micro_train_zero_steps():
    dims = NetworkDims(k=2, widths=(8, 16), n=4)
    flow = micro_train_flow(dims, micro_targets(), TrainConfig(steps=0), seed=7)
    assert len(flow.sequence) == 1
    assert flow.indices == (0,)


def test_micro_train_loss_decreases():
    dims = NetworkDims(k=2, widths=(8, 16), n=4)
    targets = micro_targets()
    flow = micro_train_flow(dims, targets,
                            TrainConfig(steps=200, cadence=40, lr=1e-3), seed=7)
    codes = stream(7, 0, "micro-train").standard_normal((2, 2))
    losses = [training_loss(p, codes, targets) for p in flow.sequence]
    for prev, nxt in zip(losses, losses[1:]):
        assert nxt <= prev * 1.05


def test_micro_train_deterministic():
    dims = NetworkDims(k=2, widths=(4, 6), n=3)
    cfg = TrainConfig(steps=80, cadence=40, lr=1e-3)
    a = micro_train_flow(dims, micro_targets(n=3), cfg, seed=9)
    b = micro_train_flow(dims, micro_targets(n=3), cfg, seed=9)
    assert np.array_equal(a.sequence[-1].flat(), b.sequence[-1].flat())


def test_training_gradients_match_finite_differences():
    dims = NetworkDims(k=2, widths=(3, 4), n=3)
    params = init_gaussian(dims, 15)
    X = stream(15, 1, "fd-x").standard_normal((3, 2))
    Y = stream(15, 2, "fd-y").standard_normal((3, 3))
    dV, dW, db = training_gradients(params, X, Y)
    flat_grad = NetworkParams(dims, dV, tuple(dW), tuple(db)).flat()
    base = params.flat()
    h = 1e-6
    rng = stream(15, 3, "fd-idx")
    for idx in rng.choice(base.size, size=15, replace=False):
        bump = base.copy()
        bump[idx] += h
        up = training_loss(NetworkParams.from_flat(dims, bump), X, Y)
        bump[idx] -= 2 * h
        down = training_loss(NetworkParams.from_flat(dims, bump), X, Y)
        fd = (up - down) / (2 * h)
        assert fd == pytest.approx(flat_grad[idx], rel=1e-5, abs=1e-5)


def test_micro_train_drift_scales_with_lr():
    dims = NetworkDims(k=2, widths=(8, 16), n=4)
    targets = micro_targets()

    def max_drift(lr):
        flow = micro_train_flow(dims, targets,
                                TrainConfig(steps=80, cadence=40, lr=lr), seed=7)
        return max(np.max(np.abs(b.flat() - a.flat()))
                   for a, b in zip(flow.sequence, flow.sequence[1:]))

    ratio = max_drift(1e-3) / max_drift(1e-4)
    assert 10.0 / 3.0 <= ratio <= 30.0


def test_estimate_regularity_one_unit_closed_form():
    flow = zoo.one_unit_flow()
    reg = estimate_regularity(flow, 0.1, zoo.one_unit_target(),
                              MeasurementMatrix.identity(1),
                              OracleConfig(bound=4.0, resolution=0.01),
                              s_samples=201)
    assert reg.max_weight_norm == pytest.approx(1.0, abs=1e-9)
    assert 1.9 <= reg.minimizer_lipschitz <= 2.0
    assert reg.step_bound == pytest.approx(0.1 / reg.minimizer_lipschitz, rel=1e-12)
    assert reg.near_ties == 0


def test_estimate_regularity_constant_flow_sentinel():
    params = zoo.one_unit_flow().at(0.3)
    flow = ParameterFlow.analytic(lambda s: params, horizon=1.0)
    reg = estimate_regularity(flow, 0.1, zoo.one_unit_target(),
                              MeasurementMatrix.identity(1),
                              OracleConfig(bound=4.0, resolution=0.01),
                              s_samples=11)
    assert reg.minimizer_lipschitz == 0.0
    assert math.isinf(reg.step_bound)


def test_estimate_regularity_equal_endpoints():
    params = random_net(77, k=1, widths=(3,), n=2)
    flow = ParameterFlow.interpolation(params, params, horizon=1.0)
    y = stream(77, 1, "eq").standard_normal(2)
    reg = estimate_regularity(flow, 0.1, y, MeasurementMatrix.identity(2),
                              OracleConfig(bound=2.0, resolution=0.01),
                              s_samples=5)
    assert reg.minimizer_lipschitz == 0.0


def test_flow_at_range_check():
    flow = zoo.one_unit_flow()
    with pytest.raises(ValueError):
        flow.at(1.5)
