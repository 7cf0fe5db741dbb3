import math

import numpy as np
import pytest

from reluflow.characteristics import (
    FlowMap,
    VectorFieldProblem,
    builtin_problem,
    ramp_initial_condition,
    reference_solution,
    smooth_initial_condition,
)
from reluflow.errors import CapabilityError, ConfigError
from reluflow.network import realize
from reluflow.transport import (
    BuildCertificate,
    build_conservative,
    build_damped,
    build_homogeneous,
    build_source,
    build_u0_net,
    build_weak,
    piecewise_affine_initial_condition,
    validation_lattice,
)

EPS = 0.2


def small_lattice(problem):
    return validation_lattice(problem, n_t=9, n_x=13, n_eta=3)


@pytest.fixture(scope="module")
def shear():
    return builtin_problem("param-shear", n=1, D=1, T=1.0, K_box=(-1.0, 1.0), k=3)


@pytest.fixture(scope="module")
def homogeneous_build(shear):
    return build_homogeneous(shear, EPS, validate=True, lattice=small_lattice(shear))


# -- homogeneous ---------------------------------------------------------------

def test_homogeneous_meets_epsilon(homogeneous_build):
    net, cert = homogeneous_build
    assert isinstance(cert, BuildCertificate)
    assert cert.passed and cert.measured_error <= EPS
    assert net.input_dim == 3 and net.output_dim == 1


def test_homogeneous_delta_ledger(homogeneous_build):
    _, cert = homogeneous_build
    lip = cert.constants_used["Lip_u0"]
    assert cert.deltas["delta1"] == pytest.approx(EPS / 2)
    assert cert.deltas["delta2"] == pytest.approx(EPS / (2 * lip))
    assert cert.deltas["delta1"] + lip * cert.deltas["delta2"] <= EPS * (1 + 1e-12)
    assert cert.theorem_id == "T4.5"


def test_certificate_serializes(homogeneous_build):
    net, cert = homogeneous_build
    doc = cert.as_dict()
    assert doc["total"]["W"] == net.num_weights
    assert set(doc["sub_sizes"]) == {"u0", "flow"}
    assert '"passed": true' in cert.to_json()


def test_zero_velocity_freezes_initial_data():
    problem = VectorFieldProblem(
        n=1, D=1, T=1.0, V=lambda t, x, eta: np.zeros_like(x), div_V=lambda t, x, eta: np.zeros(x.shape[0]),
        u0=ramp_initial_condition(1), growth_C=1e-9, ck_norms={j: 0.0 for j in range(8)},
        K_box=(-1.0, 1.0), k=2,
    )
    net, cert = build_homogeneous(problem, EPS, validate=True, lattice=small_lattice(problem))
    assert cert.passed
    pts = small_lattice(problem)
    assert np.max(np.abs(realize(net, pts)[:, 0] - np.maximum(0, 1 - np.abs(pts[:, 1])))) <= EPS


def test_weights_nonincreasing_in_epsilon(shear):
    sizes = [build_homogeneous(shear, e)[0].num_weights for e in (0.4, 0.2, 0.1)]
    assert sizes[0] <= sizes[1] <= sizes[2]


def test_epsilon_and_bounds_validation(shear):
    for bad in (0.0, 1.0, -0.1, float("nan")):
        with pytest.raises(ConfigError):
            build_homogeneous(shear, bad)
    with pytest.raises(ConfigError):
        build_homogeneous(shear, EPS, bounds="guessed")


# -- weak (Lipschitz initial data) ------------------------------------------------

def test_weak_with_piecewise_initial_data():
    u0 = piecewise_affine_initial_condition([-1.0, -0.2, 0.3, 1.0], [0.0, 1.0, 0.5, 0.0])
    problem = builtin_problem("const", n=1, D=0, T=1.0, K_box=(-1.0, 1.0), k=2, u0=u0, c=0.5)
    net, cert = build_weak(problem, EPS, validate=True, lattice=validation_lattice(problem, 21, 41))
    assert cert.theorem_id == "T4.6"
    assert cert.passed


def test_weak_rejects_smooth_data():
    u0 = smooth_initial_condition(lambda x: np.sin(x[:, 0]), 1, 3, 1.0)
    problem = builtin_problem("const", n=1, D=0, u0=u0)
    with pytest.raises(CapabilityError):
        build_weak(problem, EPS)


def test_piecewise_initial_condition_network_is_exact():
    u0 = piecewise_affine_initial_condition([-1.0, 0.0, 2.0], [1.0, -1.0, 3.0])
    x = np.linspace(-3, 4, 301)[:, None]
    assert np.max(np.abs(realize(u0.exact_net, x)[:, 0] - u0(x))) <= 1e-12
    assert u0.lip == 2.0 and u0.sup == 3.0
    with pytest.raises(ConfigError):
        piecewise_affine_initial_condition([0.0, 0.0], [1.0, 2.0])


# -- initial data networks -----------------------------------------------------------

def test_ramp_initial_data_is_exact():
    net, cert = build_u0_net(ramp_initial_condition(1), 0.01)
    assert cert is None and net.num_weights == 6


def test_smooth_initial_data_network():
    u0 = smooth_initial_condition(lambda x: np.sin(x[:, 0]), 1, 3, 1.0, lip=1.0, sup=1.0)
    net, cert = build_u0_net(u0, 0.05, G=2.0)
    x = np.linspace(-2, 2, 2001)[:, None]
    assert np.max(np.abs(realize(net, x)[:, 0] - np.sin(x[:, 0]))) <= 0.05
    with pytest.raises(ConfigError):
        build_u0_net(u0, 0.05)


# -- source --------------------------------------------------------------------

def _f_const(t, x, eta):
    return np.ones(x.shape[0])


@pytest.fixture(scope="module")
def source_problem():
    return builtin_problem("const", n=1, D=0, T=1.0, K_box=(-1.0, 1.0), k=2, c=0.5, f=_f_const,
                           f_bounds={"sup": 1.0, "c1": 1.0}, lip={"f": 1e-12})


def test_source_meets_epsilon_and_ledger(source_problem):
    net, cert = build_source(source_problem, EPS, validate=True, lattice=validation_lattice(source_problem, 21, 41))
    assert cert.passed
    lip_u0 = cert.constants_used["Lip_u0"]
    G1 = cert.constants_used["G1"]
    d1, d2, d3 = cert.deltas["delta1"], cert.deltas["delta2"], cert.deltas["delta3"]
    assert d1 == pytest.approx(EPS / 6)
    assert d3 == pytest.approx(EPS / 12)
    assert d2 == pytest.approx(EPS / (12 * max(lip_u0, 1e-12)))
    assert cert.N == math.ceil(15 / EPS * max(1.0 * (1 + G1), 2.0))
    # u0, flow through u0, integrand, flow through f, quadrature (5 max/N <= eps/3)
    quad = 5 * max(1.0 * (1 + G1), 2.0) / cert.N
    terms = [d1, lip_u0 * d2, d3, cert.constants_used["Lip_f"] * d2, quad]
    assert quad <= EPS / 3
    assert sum(terms) < EPS


def test_zero_source_matches_homogeneous():
    zero = builtin_problem("const", n=1, D=0, T=1.0, K_box=(-1.0, 1.0), k=2, c=0.5,
                           f=lambda t, x, eta: np.zeros(x.shape[0]), f_bounds={"sup": 0.0, "c1": 0.0}, lip={"f": 0.0})
    pts = validation_lattice(zero, 11, 21)
    net, cert = build_source(zero, EPS, validate=True, lattice=pts)
    t, x, eta = zero.split(pts)
    hom = reference_solution(zero, "homogeneous", t, x, eta)
    assert np.max(np.abs(realize(net, pts)[:, 0] - hom)) <= EPS


def test_source_requires_f(shear):
    with pytest.raises(CapabilityError):
        build_source(shear, EPS)


# -- conservative ------------------------------------------------------------------

def test_conservative_ledger_and_accuracy():
    problem = builtin_problem("linear", n=1, D=0, T=1.0, K_box=(-1.0, 1.0), k=2, lam=0.5)
    net, cert = build_conservative(problem, EPS, validate=True, lattice=validation_lattice(problem, 11, 21))
    assert cert.passed
    c = cert.constants_used
    d = cert.deltas
    G_J = c["G_J"]
    terms = G_J * d["delta1"] + G_J * c["Lip_u0"] * d["delta2"] + c["sup_u0"] * d["delta3"] + d["mul"]
    assert terms <= EPS * (1 + 1e-12)


def test_rotation_conservative_matches_homogeneous():
    problem = builtin_problem("rotation", n=2, D=0, T=0.5, K_box=(-1.0, 1.0), k=2, omega=1.0)
    pts = validation_lattice(problem, 5, 9)
    net, _ = build_conservative(problem, 0.3)
    t, x, eta = problem.split(pts)
    hom = reference_solution(problem, "homogeneous", t, x, eta)
    assert np.max(np.abs(realize(net, pts)[:, 0] - hom)) <= 0.3


def test_conservative_needs_two_derivatives(shear):
    with pytest.raises(CapabilityError):
        build_conservative(shear, EPS, k=1)


# -- damped --------------------------------------------------------------------------

def test_zero_damping_matches_homogeneous():
    problem = builtin_problem("const", n=1, D=0, T=1.0, K_box=(-1.0, 1.0), k=2, c=0.5,
                              a=lambda t, x, eta: np.zeros(x.shape[0]),
                              a_bounds={"sup": 0.0, "c1": 0.0, "nonnegative": True}, lip={"a": 0.0})
    pts = validation_lattice(problem, 11, 21)
    net, cert = build_damped(problem, EPS, validate=True, lattice=pts)
    assert cert.passed
    t, x, eta = problem.split(pts)
    hom = reference_solution(problem, "homogeneous", t, x, eta)
    assert np.max(np.abs(realize(net, pts)[:, 0] - hom)) <= EPS


def test_damped_requires_a(shear):
    with pytest.raises(CapabilityError):
        build_damped(shear, EPS)


def test_reference_solution_uses_cached_flow(shear):
    fm = FlowMap(shear)
    pts = small_lattice(shear)
    t, x, eta = shear.split(pts)
    a = reference_solution(shear, "homogeneous", t, x, eta, fm=fm)
    b = reference_solution(shear, "weak", t, x, eta)
    assert np.allclose(a, b, atol=1e-7)
