import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from reluflow.errors import BuildTooLarge, ConfigError
from reluflow.network import realize
from reluflow.smooth import (
    SmoothTarget,
    approx_smooth,
    approx_univariate_library,
    estimate_derivative_bounds,
    fd_weights,
    grid_nodes,
    monomial_net,
    multi_indices,
    partial_derivatives,
    partition_of_unity_net,
    validation_points,
)


def unit(d):
    return (np.zeros(d), np.ones(d))


def line(n=10_001, lo=0.0, hi=1.0):
    return np.linspace(lo, hi, n)[:, None]


# -- helpers with closed-form oracles -------------------------------------

@pytest.mark.parametrize(
    "order, offsets, weights",
    [
        (1, [-1, 1], [-0.5, 0.5]),
        (2, [-1, 0, 1], [1.0, -2.0, 1.0]),
        (3, [-2, -1, 1, 2], [-0.5, 1.0, -1.0, 0.5]),
        (4, [-2, -1, 0, 1, 2], [1.0, -4.0, 6.0, -4.0, 1.0]),
    ],
)
def test_fd_weights_match_classical_stencils(order, offsets, weights):
    o, w = fd_weights(order)
    assert o.tolist() == offsets
    assert np.allclose(w, weights, atol=1e-12)


@pytest.mark.parametrize("d, order", [(1, 3), (2, 2), (3, 3), (4, 2)])
def test_multi_index_counts(d, order):
    assert len(multi_indices(d, order)) == math.comb(d + order - 1, order)
    assert len(multi_indices(d, order, exact=False)) == math.comb(d + order, order)
    assert all(sum(a) == order for a in multi_indices(d, order))


def test_partial_derivatives_of_polynomial():
    # f = x^2 y + y^3 on [0,1]^2
    f = lambda p: p[:, 0] ** 2 * p[:, 1] + p[:, 1] ** 3
    pts = np.random.default_rng(0).uniform(0.1, 0.9, size=(20, 2))
    alphas = [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    out = partial_derivatives(f, pts, alphas, np.zeros(2), np.ones(2))
    x, y = pts[:, 0], pts[:, 1]
    exact = {(1, 0): 2 * x * y, (0, 1): x**2 + 3 * y**2, (2, 0): 2 * y, (1, 1): 2 * x, (0, 2): 6 * y}
    for a in alphas:
        assert np.allclose(out[a], exact[a], atol=1e-5)


def test_derivative_bound_estimate_of_sine():
    est = estimate_derivative_bounds(lambda p: np.sin(p[:, 0]), np.zeros(1), np.array([math.pi]), 2)
    assert abs(est[(2,)] - 1.0) < 0.05


def test_grid_nodes_enumerates_lattice():
    nodes = grid_nodes(2, 3)
    assert nodes.shape == (16, 2)
    assert {tuple(r) for r in nodes} == {(i, j) for i in range(4) for j in range(4)}


@pytest.mark.parametrize("d, n", [(1, 7), (2, 5), (3, 3)])
def test_partition_of_unity_sums_to_one(d, n):
    lo, hi = -np.ones(d), 2 * np.ones(d)
    net = partition_of_unity_net(lo, hi, n)
    pts = validation_points(lo, hi, n, 20_000)
    hats = realize(net, pts)
    assert np.max(np.abs(hats.sum(axis=1) - 1.0)) <= 1e-10
    assert hats.min() >= -1e-12 and hats.max() <= 1 + 1e-12


def test_hats_are_nodal_interpolants():
    n, d = 4, 2
    nodes = grid_nodes(d, n)
    vals = np.random.default_rng(0).normal(size=nodes.shape[0])
    net = partition_of_unity_net(np.zeros(d), np.ones(d), n, nodes, vals[None, :])
    assert np.allclose(realize(net, nodes / n)[:, 0], vals, atol=1e-12)


@pytest.mark.parametrize("beta", [(1, 0), (2, 0), (1, 1), (2, 1), (0, 3)])
def test_monomial_net_accuracy(beta):
    lo, hi = np.array([-1.0, 0.0]), np.array([1.0, 2.0])
    eps = 1e-3
    net = monomial_net(lo, hi, beta, eps)
    pts = validation_points(lo, hi, 10, 40_000)
    y = (pts - lo) / (hi - lo)
    exact = y[:, 0] ** beta[0] * y[:, 1] ** beta[1]
    assert np.max(np.abs(realize(net, pts)[:, 0] - exact)) <= eps


# -- approximation contract -------------------------------------------------

def test_zero_function_gives_zero_network():
    net, cert = approx_smooth(SmoothTarget(2, unit(2), lambda x: np.zeros(len(x)), 3, 1.0), 1e-2)
    assert net.num_layers == 1 and net.num_weights == 0
    assert cert.measured_error == 0.0


def test_identity_is_represented_exactly():
    net, cert = approx_smooth(SmoothTarget(1, unit(1), lambda x: x[:, 0], 2, 1.0), 1e-3)
    assert net.num_weights <= 3
    assert np.max(np.abs(realize(net, line())[:, 0] - line()[:, 0])) <= 1e-12


def test_square_dense_grid():
    eps = 1e-3
    net, cert = approx_smooth(SmoothTarget(1, unit(1), lambda x: x[:, 0] ** 2, 2, 2.0), eps)
    x = line()
    assert np.max(np.abs(realize(net, x)[:, 0] - x[:, 0] ** 2)) <= eps
    assert cert.passed and cert.route == "nodal"
    # Taylor remainder of order 2 with the declared bound: C = 2 * 1^2 / 2!, budget eps / 2
    assert cert.grid_n == math.ceil(math.sqrt(1.0 / (eps / 2)))


def test_square_cost_envelope():
    sizes = {}
    for eps in (1e-1, 1e-2, 1e-3):
        net, _ = approx_smooth(SmoothTarget(1, unit(1), lambda x: x[:, 0] ** 2, 2, 2.0), eps)
        sizes[eps] = net.num_weights
    # slope d/k = 1/2 with the fit tolerance: a factor 10 in eps costs at most 10**0.85
    assert sizes[1e-2] / sizes[1e-1] <= 10**0.85
    assert sizes[1e-3] / sizes[1e-2] <= 10**0.85


def test_monotone_cost():
    target = SmoothTarget(2, unit(2), lambda x: np.sin(2 * x[:, 0]) * np.cos(x[:, 1]), 2, 4.0)
    W = [approx_smooth(target, eps)[0].num_weights for eps in (0.1, 0.05, 0.025)]
    assert W[0] <= W[1] <= W[2]


def test_general_box_uses_affine_rescaling():
    target = SmoothTarget(1, ([-1.0], [2.0]), lambda x: x[:, 0] ** 2, 2, 4.0)
    net, cert = approx_smooth(target, 1e-2)
    x = line(3001, -1.0, 2.0)
    assert np.max(np.abs(realize(net, x)[:, 0] - x[:, 0] ** 2)) <= 1e-2


def test_taylor_route_for_higher_smoothness():
    target = SmoothTarget(2, unit(2), lambda x: np.sin(x[:, 0] + 2 * x[:, 1]), 4, 9.0)
    eps = 1e-2
    net, cert = approx_smooth(target, eps, bounds="estimated")
    assert cert.route == "taylor" and cert.taylor_order == 3
    assert cert.estimated and cert.constant_source == "estimated"
    pts = validation_points(np.zeros(2), np.ones(2), 30, 40_000)
    assert np.max(np.abs(realize(net, pts)[:, 0] - target(pts))) <= eps


def test_derivative_bounds_override_norm_bound():
    target = SmoothTarget(1, unit(1), lambda x: x[:, 0] ** 2, 2, 100.0, derivative_bounds={(2,): 2.0})
    _, cert = approx_smooth(target, 1e-2)
    assert cert.constant_source == "derivative_bounds"
    assert cert.remainder_constant == pytest.approx(1.0)


def test_inconsistent_metadata_is_flagged():
    target = SmoothTarget(1, unit(1), lambda x: 10 * x[:, 0] ** 2, 2, 1.0)
    _, cert = approx_smooth(target, 1e-2)
    assert any("inconsistent metadata" in w for w in cert.warnings)
    assert cert.passed  # validation refines the grid


def test_size_limit():
    target = SmoothTarget(3, unit(3), lambda x: np.sin(5 * x.sum(axis=1)), 2, 100.0)
    with pytest.raises(BuildTooLarge):
        approx_smooth(target, 1e-3, max_nodes=1000)


@pytest.mark.parametrize("eps", [0.0, 1.0, -0.5, float("nan")])
def test_epsilon_validated(eps):
    with pytest.raises(ConfigError):
        approx_smooth(SmoothTarget(1, unit(1), lambda x: x[:, 0], 2, 1.0), eps)


@pytest.mark.parametrize("box", [([0.0], [0.0]), ([1.0], [0.0]), ([0.0], [np.inf])])
def test_bad_boxes(box):
    with pytest.raises(ConfigError):
        SmoothTarget(1, box, lambda x: x[:, 0], 2, 1.0)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.sampled_from([0.1, 0.01]))
def test_random_quadratics(a, b, c, eps):
    target = SmoothTarget(1, unit(1), lambda x: a * x[:, 0] ** 2 + b * x[:, 0] + c, 2, 2 * abs(a) + abs(b) + 1e-3)
    net, cert = approx_smooth(target, eps)
    x = line(2001)
    assert np.max(np.abs(realize(net, x)[:, 0] - target(x))) <= eps


# -- library ----------------------------------------------------------------

def test_exp_on_degenerate_interval():
    net, cert = approx_univariate_library("exp", (0.0, 0.0), 1e-3)
    assert realize(net, np.zeros((3, 1)))[:, 0].tolist() == [1.0, 1.0, 1.0]
    assert cert.measured_error == 0.0


def test_exp_neg_on_unit_interval():
    net, cert = approx_univariate_library("exp_neg", (0.0, 1.0), 1e-3)
    t = line()
    assert np.max(np.abs(realize(net, t)[:, 0] - np.exp(-t[:, 0]))) <= 1e-3


def test_exp_neg_cost_grows_slowly():
    W = [approx_univariate_library("exp_neg", (0.0, 1.0), eps)[0].num_weights for eps in (1e-2, 1e-3, 1e-4)]
    assert W[0] <= W[1] <= W[2]
    # k = 3: eps^(-1/3) up to the logarithmic product cost
    assert W[2] / W[0] <= 100 ** (1 / 3) * 4


def test_unknown_library_function():
    with pytest.raises(ConfigError):
        approx_univariate_library("sinh", (0.0, 1.0), 1e-2)
