import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from reluflow.calculus import (
    MulConfig,
    affine_net,
    const_shift_net,
    constant_net,
    identity_net,
    linear_combination,
    multiply_gadget,
    multiply_nets,
    parallelize,
    selector_net,
    sparse_concat,
    squaring_levels,
    sum_nets,
)
from reluflow.errors import ConfigError, ShapeMismatch
from reluflow.network import realize

from .strategies import networks, points

TOL = 1e-12


def rel_dev(a, b):
    return float(np.max(np.abs(a - b) / (1.0 + np.abs(b))))


# -- composition ----------------------------------------------------------

def test_identity_composed_with_identity():
    net = sparse_concat(identity_net(3), identity_net(3))
    x = np.random.default_rng(0).normal(size=(50, 3))
    assert np.allclose(realize(net, x), x, atol=TOL, rtol=0)


@given(st.data())
def test_composition_realizes_nested_evaluation(data):
    inner = data.draw(networks())
    outer = data.draw(networks(input_dim=inner.output_dim))
    comp = sparse_concat(outer, inner)
    x = points(np.random.default_rng(1), inner.input_dim, 100)
    assert rel_dev(realize(comp, x), realize(outer, realize(inner, x))) <= TOL
    assert comp.num_layers == outer.num_layers + inner.num_layers
    assert comp.num_weights <= 2 * outer.num_weights + 2 * inner.num_weights


@given(st.data())
def test_composition_is_associative(data):
    c = data.draw(networks())
    b = data.draw(networks(input_dim=c.output_dim))
    a = data.draw(networks(input_dim=b.output_dim))
    x = points(np.random.default_rng(2), c.input_dim, 64)
    left = realize(sparse_concat(sparse_concat(a, b), c), x)
    right = realize(sparse_concat(a, sparse_concat(b, c)), x)
    assert rel_dev(left, right) <= TOL


def test_composition_dimension_mismatch():
    with pytest.raises(ShapeMismatch):
        sparse_concat(identity_net(2), identity_net(3))


# -- parallelization ------------------------------------------------------

def test_parallelize_single_identity():
    x = np.random.default_rng(0).normal(size=(20, 2))
    assert np.array_equal(realize(parallelize([identity_net(2)]), x), x)


@given(st.lists(networks(input_dim=3), min_size=1, max_size=4))
def test_parallelize_stacks_outputs_and_adds_weights(nets):
    par = parallelize(nets)
    x = points(np.random.default_rng(3), 3, 64)
    ref = np.hstack([realize(n, x) for n in nets])
    assert rel_dev(realize(par, x), ref) <= TOL
    assert par.num_weights == sum(n.num_weights for n in nets)
    assert par.num_layers == max(n.num_layers for n in nets)
    assert par.num_neurons == 3 + sum(n.num_neurons - 3 for n in nets)


def test_parallelize_rejects_mismatched_inputs():
    with pytest.raises(ShapeMismatch):
        parallelize([identity_net(2), identity_net(3)])
    with pytest.raises(ShapeMismatch):
        parallelize([])


# -- sums -----------------------------------------------------------------

@given(networks(input_dim=2, output_dim=1))
def test_sum_with_negation_vanishes(net):
    neg = linear_combination(net, [[-1.0]])
    g = np.linspace(-2, 2, 41)
    x = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    assert np.max(np.abs(realize(sum_nets(net, neg), x))) <= TOL * (1 + np.max(np.abs(realize(net, x))))


@given(networks(input_dim=2, output_dim=1), networks(input_dim=2, output_dim=1))
def test_sum_realizes_pointwise_sum(a, b):
    s = sum_nets(a, b)
    x = points(np.random.default_rng(4), 2, 100)
    assert rel_dev(realize(s, x), realize(a, x) + realize(b, x)) <= TOL
    assert s.num_layers == max(a.num_layers, b.num_layers)
    assert s.num_weights <= a.num_weights + b.num_weights


def test_sum_weight_count_is_additive_for_disjoint_supports():
    a = affine_net([[1.0, 0.0]], [0.5])
    b = affine_net([[0.0, 2.0]], [0.0])
    assert sum_nets(a, b).num_weights == a.num_weights + b.num_weights


@given(networks(input_dim=2, output_dim=1), networks(input_dim=2, output_dim=1))
def test_parallelize_then_sum_equals_sum(a, b):
    via = linear_combination(parallelize([a, b]), [[1.0, 1.0]])
    x = points(np.random.default_rng(5), 2, 64)
    assert rel_dev(realize(via, x), realize(sum_nets(a, b), x)) <= TOL


def test_sum_requires_equal_output_dims():
    with pytest.raises(ShapeMismatch):
        sum_nets(identity_net(2), selector_net(2, [0]))


# -- helpers --------------------------------------------------------------

def test_selector_returns_first_coordinate():
    x = np.random.default_rng(0).normal(size=(10, 4))
    assert np.array_equal(realize(selector_net(4, [0]), x)[:, 0], x[:, 0])


@pytest.mark.parametrize("m", [1, 2, 5])
def test_selector_weight_count(m):
    assert selector_net(6, list(range(m))).num_weights == m


def test_duplication_net():
    dup = np.zeros((4, 3))
    dup[0, 0] = 1.0
    dup[1:, :] = np.eye(3)
    x = np.random.default_rng(0).normal(size=(10, 3))
    assert np.array_equal(realize(affine_net(dup), x), np.c_[x[:, 0], x])


def test_const_shift_and_constant():
    x = np.random.default_rng(0).normal(size=(10, 3))
    out = realize(const_shift_net(3, [1.0, 0.0, -2.0], 0.5), x)[:, 0]
    assert np.allclose(out, x[:, 0] - 2 * x[:, 2] + 0.5, atol=TOL)
    assert np.all(realize(constant_net(3, [1.0, -1.0]), x) == [1.0, -1.0])


def test_selector_out_of_range():
    with pytest.raises(ShapeMismatch):
        selector_net(3, [3])


# -- products -------------------------------------------------------------

def grid(M, n=201):
    g = np.linspace(-M, M, n)
    return np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)


@pytest.mark.parametrize("eps", [1e-1, 1e-2, 1e-3])
def test_gadget_error_on_grid(eps):
    p = grid(2.0)
    out = realize(multiply_gadget(MulConfig(eps, 2.0)), p)[:, 0]
    assert np.max(np.abs(out - p[:, 0] * p[:, 1])) <= eps


def test_gadget_vanishes_at_origin_and_is_symmetric():
    net = multiply_gadget(MulConfig(1e-2, 2.0))
    assert realize(net, np.zeros(2))[0] == 0.0
    p = grid(2.0, 41)
    assert np.allclose(realize(net, p), realize(net, p[:, ::-1]), atol=1e-12)


def test_zero_factor():
    zero, x = constant_net(1, 0.0), affine_net([[1.0]])
    t = np.linspace(-1, 1, 1001)[:, None]
    for eps in (1e-1, 1e-3):
        assert np.max(np.abs(realize(multiply_nets(zero, x, MulConfig(eps, 1.0)), t))) <= eps


@pytest.mark.parametrize("eps", [1e-1, 1e-2, 1e-3])
def test_constant_factors(eps):
    a, b = constant_net(1, 0.5), constant_net(1, 0.5)
    t = np.linspace(0, 1, 1000)[:, None]
    assert np.max(np.abs(realize(multiply_nets(a, b, MulConfig(eps, 1.0)), t) - 0.25)) <= eps


def test_random_constant_pairs(rng):
    t = np.linspace(0, 1, 11)[:, None]
    for _ in range(10):
        M = float(rng.uniform(0.5, 4.0))
        u, v = rng.uniform(-M, M, 2)
        net = multiply_nets(constant_net(1, u), constant_net(1, v), MulConfig(1e-3, M))
        assert np.max(np.abs(realize(net, t) - u * v)) <= 1e-3


def test_gadget_weights_affine_in_log_inverse_eps():
    eps = np.array([1e-1, 1e-2, 1e-3, 1e-4])
    W = np.array([multiply_gadget(MulConfig(e, 2.0)).num_weights for e in eps])
    u = np.log(1 / eps)
    coef = np.polyfit(u, W, 1)
    resid = np.max(np.abs(W - np.polyval(coef, u)))
    assert resid < 0.05 * (W.max() - W.min())
    assert np.all(np.diff(W) > 0)


@pytest.mark.parametrize("M", [0.5, 1.0, 2.0, 5.0])
def test_gadget_closed_form_size(M):
    for eps in (1e-1, 1e-2, 1e-3):
        m_sum, m_abs = squaring_levels(eps, M)
        net = multiply_gadget(MulConfig(eps, M))
        assert net.num_weights == 14 + 7 * (m_sum + 2 * m_abs)
        assert net.num_layers == max(m_sum, m_abs) + 2
        # error ledger: 2 M^2 max(E_sum, 2 E_abs) with E_m = 4^-(m+1)
        assert 2.0 * M**2 * max(4.0 ** -(m_sum + 1), 2 * 4.0 ** -(m_abs + 1)) <= eps


@pytest.mark.parametrize("M", [0.5, 3.0])
def test_gadget_error_other_radii(M):
    p = grid(M, 101)
    for eps in (1e-1, 1e-3):
        out = realize(multiply_gadget(MulConfig(eps, M)), p)[:, 0]
        assert np.max(np.abs(out - p[:, 0] * p[:, 1])) <= eps


def test_multiply_size_bound():
    a = affine_net([[1.0, 0.0]])
    b = affine_net([[0.0, 1.0]])
    for eps in (1e-1, 1e-3):
        cfg = MulConfig(eps, 1.0)
        net = multiply_nets(a, b, cfg)
        g = multiply_gadget(cfg)
        assert net.num_weights <= 2 * g.num_weights + 2 * (a.num_weights + b.num_weights)
        assert net.num_layers == max(a.num_layers, b.num_layers) + g.num_layers


@pytest.mark.parametrize("eps, M", [(0.0, 1.0), (1.0, 1.0), (-0.1, 1.0), (0.1, 0.0), (0.1, math.inf)])
def test_mul_config_validation(eps, M):
    with pytest.raises(ConfigError):
        MulConfig(eps, M)


def test_multiply_requires_scalar_outputs():
    with pytest.raises(ShapeMismatch):
        multiply_nets(identity_net(2), selector_net(2, [0]), MulConfig(0.1, 1.0))
