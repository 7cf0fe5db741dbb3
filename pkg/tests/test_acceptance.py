"""Acceptance criteria, one test each, at their stated tolerances and time limits.

Every test records a ``criterion N: PASS|FAIL ...`` line that the terminal
summary prints after the run.
"""

import functools
import math
import time

import numpy as np
import pytest

from reluflow.calculus import MulConfig, multiply_gadget
from reluflow.characteristics import VectorFieldProblem, builtin_problem, ramp_initial_condition
from reluflow.network import realize
from reluflow.props import calculus_suite, flow_suite, quadrature_suite
from reluflow.smooth import SmoothTarget, approx_smooth
from reluflow.transport import (
    build_conservative,
    build_damped,
    build_homogeneous,
    build_source,
    validation_lattice,
)


def verdict(record_property, number, ok, elapsed, limit, detail):
    ok = bool(ok) and elapsed < limit
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}  ({elapsed:.1f} s, limit {limit:.0f} s)"
    record_property("criterion", line)
    print(line)
    return ok


def lattice_error(net, points, reference):
    return float(np.max(np.abs(realize(net, points)[:, 0] - reference)))


def split(points):
    return points[:, 0], points[:, 1:2], points[:, 2:]


def ramp(x):
    return np.maximum(0.0, 1.0 - np.abs(x))


# 1 ----------------------------------------------------------------------------------

def test_criterion_1_exact_calculus(record_property):
    t0 = time.perf_counter()
    results = calculus_suite(pairs=200, seed=0, tol=1e-12)
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in results)
    failed = [r.name for r in results if not r.passed]
    assert verdict(record_property, 1, ok, elapsed, 10, f"{len(results)} checks on 200 pairs, failed: {failed or 'none'}")


# 2 ----------------------------------------------------------------------------------

def test_criterion_2_multiplication_gadget(record_property):
    t0 = time.perf_counter()
    g = np.linspace(-2.0, 2.0, 201)
    X, Y = np.meshgrid(g, g, indexing="ij")
    pts = np.c_[X.ravel(), Y.ravel()]
    eps = np.array([1e-1, 1e-2, 1e-3])
    errors, W = [], []
    for e in eps:
        net = multiply_gadget(MulConfig(e, 2.0))
        errors.append(float(np.max(np.abs(realize(net, pts)[:, 0] - pts[:, 0] * pts[:, 1]))))
        W.append(net.num_weights)
    W = np.asarray(W, dtype=float)
    u = np.log(1 / eps)
    coef = np.polyfit(u, W, 1)
    rel = float(np.max(np.abs(W - np.polyval(coef, u))) / (W.max() - W.min()))
    elapsed = time.perf_counter() - t0
    ok = all(err <= e for err, e in zip(errors, eps)) and rel < 0.05
    detail = f"errors {[f'{x:.2e}' for x in errors]}, W {W.astype(int).tolist()}, affine residual {rel:.1%}"
    assert verdict(record_property, 2, ok, elapsed, 30, detail)


# 3 ----------------------------------------------------------------------------------

SMOOTH_EPS = [2.0**-j for j in range(3, 10)]


def _square():
    return SmoothTarget(1, ([0.0], [1.0]), lambda x: x[:, 0] ** 2, 2, 2.0, name="x^2")


def _sinsin():
    return SmoothTarget(2, ([0.0, 0.0], [1.0, 1.0]),
                        lambda x: np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]) / np.pi**2, 2, 1.0, name="sinsin")


def _grid(d, per_axis):
    axes = [np.linspace(0.0, 1.0, per_axis)] * d
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)


@functools.lru_cache(maxsize=None)
def smooth_rates():
    """Per target: dimension, measured errors, weights and the fitted slope."""
    out = {}
    for target, per_axis in ((_square(), 4001), (_sinsin(), 401)):
        pts = _grid(target.dim, per_axis)
        ref = target(pts)
        errs, W = [], []
        for e in SMOOTH_EPS:
            net, cert = approx_smooth(target, e, bounds="declared")
            errs.append(max(cert.measured_error, lattice_error(net, pts, ref)))
            W.append(net.num_weights)
        u = np.log(1 / np.asarray(SMOOTH_EPS))
        slope = float(np.polyfit(u, np.log(W) - np.log(u + 1.0), 1)[0])
        raw = float(np.polyfit(u, np.log(W), 1)[0])
        out[target.name] = (target.dim, errs, W, slope, raw)
    return out


def test_criterion_3_smooth_rate(record_property):
    t0 = time.perf_counter()
    rates = smooth_rates()
    elapsed = time.perf_counter() - t0
    ok = True
    parts = []
    for name, (d, errs, W, slope, raw) in rates.items():
        good = all(err <= e for err, e in zip(errs, SMOOTH_EPS)) and abs(slope - d / 2) <= 0.35
        ok &= good
        parts.append(f"{name}: slope {slope:.3f} (raw {raw:.3f}) vs {d / 2:g}, max err/eps {max(np.divide(errs, SMOOTH_EPS)):.2f}")
    assert verdict(record_property, 3, ok, elapsed, 300, "; ".join(parts))


# 4 ----------------------------------------------------------------------------------

def test_criterion_4_riemann_emulation(record_property):
    t0 = time.perf_counter()
    results = quadrature_suite(seed=0, counts=(4, 16, 64), grid=1000)
    elapsed = time.perf_counter() - t0
    failed = [r.name for r in results if not r.passed]
    assert verdict(record_property, 4, not failed, elapsed, 30, f"{len(results)} checks, failed: {failed or 'none'}")


# 5 ----------------------------------------------------------------------------------

def test_criterion_5_flow_fidelity(record_property):
    t0 = time.perf_counter()
    results = flow_suite(tuples=1000, seed=0, tol=1e-7, det_tol=1e-5)
    elapsed = time.perf_counter() - t0
    failed = [r.name for r in results if not r.passed]
    assert verdict(record_property, 5, not failed, elapsed, 60, f"{len(results)} checks on 4 fields, failed: {failed or 'none'}")


# 6-9 -------------------------------------------------------------------------------

def test_criterion_6_homogeneous(record_property):
    eps = 1e-2
    t0 = time.perf_counter()
    problem = builtin_problem("param-shear", n=1, D=1, T=1.0, K_box=(-2.0, 2.0), k=3)
    net, cert = build_homogeneous(problem, eps)
    pts = validation_lattice(problem, 41, 81, 21)
    t, x, eta = split(pts)
    err = lattice_error(net, pts, ramp(x[:, 0] - eta[:, 0] * t))
    elapsed = time.perf_counter() - t0
    lip = cert.constants_used["Lip_u0"]
    ledger = (cert.deltas["delta1"] == pytest.approx(eps / 2) and cert.deltas["delta2"] == pytest.approx(eps / (2 * lip)))
    detail = f"error {err:.2e} on {pts.shape[0]} points, W {net.num_weights}, delta1 {cert.deltas['delta1']:.3g}, delta2 {cert.deltas['delta2']:.3g}"
    assert verdict(record_property, 6, err <= eps and ledger, elapsed, 120, detail)


def test_criterion_7_source(record_property):
    eps = 2e-2
    t0 = time.perf_counter()
    problem = builtin_problem("const", n=1, D=0, T=1.0, K_box=(-2.0, 2.0), k=3, c=0.5,
                              f=lambda t, x, eta: np.ones(x.shape[0]), f_bounds={"sup": 1.0, "c1": 1.0}, lip={"f": 0.0})
    net, cert = build_source(problem, eps)
    pts = validation_lattice(problem, 41, 81)
    t, x, _ = split(pts)
    err = lattice_error(net, pts, ramp(x[:, 0] - 0.5 * t) + t)
    elapsed = time.perf_counter() - t0
    G1 = cert.constants_used["G1"]
    N_rule = math.ceil(15 / eps * max(1.0 * (1 + G1), 2.0))
    ok = err <= eps and cert.N == N_rule and any("factor T" in n for n in cert.notes)
    detail = f"error {err:.2e}, N {cert.N} (rule {N_rule}), W {net.num_weights}"
    assert verdict(record_property, 7, ok, elapsed, 180, detail)


def test_criterion_8_conservative(record_property):
    eps = 2e-2
    t0 = time.perf_counter()
    problem = builtin_problem("linear", n=1, D=0, T=1.0, K_box=(-2.0, 2.0), k=4, lam=1.0)
    net, cert = build_conservative(problem, eps)
    pts = validation_lattice(problem, 41, 81)
    t, x, _ = split(pts)
    err = lattice_error(net, pts, ramp(x[:, 0] * np.exp(-t)) * np.exp(-t))
    elapsed = time.perf_counter() - t0
    d, c = cert.deltas, cert.constants_used
    quarters = [c["G_J"] * d["delta1"] + c["G_J"] * c["Lip_u0"] * d["delta2"], c["sup_u0"] * d["delta3"], d["mul"]]
    ok = err <= eps and set(d) == {"delta1", "delta2", "delta3", "mul"} and sum(quarters) <= eps * (1 + 1e-12)
    detail = f"error {err:.2e}, W {net.num_weights}, ledger sum {sum(quarters):.3g}"
    assert verdict(record_property, 8, ok, elapsed, 180, detail)


def test_criterion_9_damped(record_property):
    eps = 2e-2
    t0 = time.perf_counter()
    problem = builtin_problem("const", n=1, D=0, T=1.0, K_box=(-2.0, 2.0), k=3, c=0.5,
                              a=lambda t, x, eta: np.ones(x.shape[0]),
                              a_bounds={"sup": 1.0, "c1": 1.0, "nonnegative": True}, lip={"a": 0.0})
    net, cert = build_damped(problem, eps)
    pts = validation_lattice(problem, 41, 81)
    t, x, _ = split(pts)
    err = lattice_error(net, pts, ramp(x[:, 0] - 0.5 * t) * np.exp(-t))
    elapsed = time.perf_counter() - t0
    assert verdict(record_property, 9, err <= eps, elapsed, 180, f"error {err:.2e}, N {cert.N}, W {net.num_weights}")


# 10 ---------------------------------------------------------------------------------

def mean_shear(D):
    # V(t, x, eta) = mean(eta), the parameter-averaged shear
    return VectorFieldProblem(
        n=1, D=D, T=1.0, V=lambda t, x, eta: eta.mean(axis=1, keepdims=True),
        div_V=lambda t, x, eta: np.zeros(x.shape[0]), u0=ramp_initial_condition(1), growth_C=1.0,
        ck_norms={j: 1.0 for j in range(16)}, K_box=(-2.0, 2.0), k=2 + D, name=f"mean-shear-{D}",
    )


def test_criterion_10_dimension_independence(record_property):
    eps = 1e-2
    t0 = time.perf_counter()
    sizes, errors = {}, {}
    for D in (1, 4, 8):
        problem = mean_shear(D)
        net, _ = build_homogeneous(problem, eps)
        pts = validation_lattice(problem, 11, 41, 5, max_points=60_000, seed=D)
        t, x, eta = split(pts)
        errors[D] = lattice_error(net, pts, ramp(x[:, 0] - eta.mean(axis=1) * t))
        sizes[D] = net.num_weights
    elapsed = time.perf_counter() - t0
    # direct rate eps^(-rho d) with rho the per-dimension slope fitted on the smooth targets
    rates = smooth_rates()
    rho = float(np.mean([slope / d for d, _, _, slope, _ in rates.values()]))
    direct = (1 / eps) ** (rho * ((2 + 8) - (2 + 1)))
    ratio = sizes[8] / sizes[1]
    ok = all(errors[D] <= eps for D in sizes) and ratio < direct
    detail = (f"W {sizes}, errors {[f'{errors[D]:.1e}' for D in sizes]}, "
              f"W(8)/W(1) {ratio:.2f} < direct-rate ratio {direct:.3g}")
    assert verdict(record_property, 10, ok, elapsed, 600, detail)
