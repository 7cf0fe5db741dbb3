"""Composite ReLU networks for parametric linear transport equations.

Every builder splits the target accuracy ``epsilon`` over its constituents,
builds each one, composes them with the exact calculus and returns the
network together with a :class:`BuildCertificate` that records the split,
the constants used and the sizes.

Constants that cannot be read from problem metadata (Lipschitz constants,
sup norms, Jacobian bounds, derivative bounds of the flow) are estimated by
sampling with a safety factor of 1.5.  Such certificates carry
``estimated=True``; the symbolic a priori bounds are recorded next to them.
Passing ``bounds="certified"`` uses only the symbolic bounds instead, which
is honest but usually far too large to build.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .calculus import (
    MulConfig,
    affine_net,
    linear_combination,
    multiply_nets,
    parallelize,
    selector_net,
    sparse_concat,
    sum_nets,
)
from .characteristics import (
    FlowMap,
    InitialCondition,
    VectorFieldProblem,
    ck_bound,
    estimate_lipschitz,
    hadamard_J_bound,
    reference_solution,
)
from .errors import BuildTooLarge, CapabilityError, ConfigError
from .network import AffineMap, Network, SizeReport, realize
from .quadrature import riemann_net
from .smooth import SmoothTarget, approx_smooth, approx_univariate_library
from .sampling import sobol_points

__all__ = [
    "BuildCertificate",
    "build_u0_net",
    "build_homogeneous",
    "build_weak",
    "build_source",
    "build_conservative",
    "build_damped",
    "piecewise_affine_initial_condition",
    "validation_lattice",
    "measure_error",
    "BUILDERS",
]

SAFETY = 1.5
FLOW_TOL = 1e-12
MAX_N = 20_000


@dataclass
class BuildCertificate:
    """Ledger of one composite construction."""

    theorem_id: str
    epsilon: float
    deltas: dict
    domain: dict
    sub_sizes: dict
    total: SizeReport
    constants_used: dict
    N: Optional[int] = None
    estimated: bool = False
    measured_error: Optional[float] = None
    validation_count: int = 0
    notes: list = field(default_factory=list)
    sub_certificates: dict = field(default_factory=dict)

    @property
    def passed(self) -> Optional[bool]:
        if self.measured_error is None:
            return None
        return bool(self.measured_error <= self.epsilon)

    def as_dict(self) -> dict:
        return {
            "theorem_id": self.theorem_id,
            "epsilon": self.epsilon,
            "deltas": dict(self.deltas),
            "N": self.N,
            "domain": self.domain,
            "sub_sizes": {k: v.as_dict() for k, v in self.sub_sizes.items()},
            "total": self.total.as_dict(),
            "constants_used": dict(self.constants_used),
            "estimated": self.estimated,
            "measured_error": self.measured_error,
            "validation_count": self.validation_count,
            "passed": self.passed,
            "notes": list(self.notes),
            "sub_certificates": self.sub_certificates,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, default=_json_default, **kwargs)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, SizeReport):
        return o.as_dict()
    return str(o)


# ---------------------------------------------------------------------------
# initial data

def piecewise_affine_initial_condition(breakpoints, values) -> InitialCondition:
    """Continuous 1-D interpolant of ``(breakpoints, values)``, constant outside, with its exact network."""
    b = np.asarray(breakpoints, dtype=float)
    v = np.asarray(values, dtype=float)
    if b.ndim != 1 or b.size < 2 or b.size != v.size or np.any(np.diff(b) <= 0):
        raise ConfigError("breakpoints must be increasing and match values")
    slopes = np.concatenate([[0.0], np.diff(v) / np.diff(b), [0.0]])
    jumps = np.diff(slopes)
    K = b.size
    l1 = AffineMap(np.ones((K, 1)), -b, (1,))
    l2 = AffineMap.from_triplets(np.zeros(K, dtype=int), 1 + np.arange(K), jumps, [v[0]], (1, K))
    net = Network(1, [l1, l2])
    return InitialCondition(
        kind="piecewise_affine",
        evaluator=lambda x: np.interp(x[:, 0], b, v),
        n=1,
        exact_net=net,
        lip=float(np.max(np.abs(slopes))),
        sup=float(np.max(np.abs(v))),
        name="piecewise_affine",
    )


def build_u0_net(u0: InitialCondition, delta: float, G: Optional[float] = None, **smooth_kwargs):
    """Network within ``delta`` of ``u0`` on the box ``[-G, G]^n``.

    Exactly representable data return their exact network.  Returns
    ``(Network, certificate-or-None)``.
    """
    if not (0 < delta < 1):
        raise ConfigError(f"delta must lie in (0, 1), got {delta}")
    if u0.exact_net is not None:
        return u0.exact_net, None
    if u0.kind != "smooth" or u0.s is None or u0.norm_bound is None:
        raise CapabilityError("smooth initial data need smoothness and norm metadata")
    if G is None:
        raise ConfigError("a working radius G is needed for smooth initial data")
    box = (np.full(u0.n, -G), np.full(u0.n, G))
    target = SmoothTarget(u0.n, box, u0.evaluator, u0.s, u0.norm_bound, derivative_oracle=u0.derivative_oracle,
                          name=u0.name)
    net, cert = approx_smooth(target, delta, **smooth_kwargs)
    return net, cert


# ---------------------------------------------------------------------------
# helpers

class _CachedFlow:
    """Flow evaluator that remembers its last batch (components share nodes)."""

    def __init__(self, fm: FlowMap, full: bool):
        self.fm = fm
        self.full = full
        self._key = None
        self._val = None

    def __call__(self, z):
        z = np.ascontiguousarray(z, dtype=float)
        key = (z.shape, hashlib.sha1(z.tobytes()).hexdigest())
        if key != self._key:
            p = self.fm.problem
            if self.full:
                s, z = z[:, 0], z[:, 1:]
            else:
                s = 0.0
            t, x, eta = z[:, 0], z[:, 1 : 1 + p.n], z[:, 1 + p.n :]
            self._val = self.fm.flow(s, t, x, eta)
            self._key = key
        return self._val


def _box_points(lo, hi, count, seed=0):
    return sobol_points(lo, hi, count, seed)


def _flow_nets(problem, fm, k, delta_component, bounds, full, smooth_kwargs, label, certs):
    """Per-component approximations of the flow, stacked into one network."""
    lo, hi = problem.domain_box()
    if full:
        lo = np.concatenate([[0.0], lo])
        hi = np.concatenate([[problem.T], hi])
    d = lo.size
    evaluator = _CachedFlow(fm, full)
    declared = ck_bound(problem, k)["Gk"] if k in problem.ck_norms else 1.0
    nets = []
    for i in range(problem.n):
        target = SmoothTarget(
            d, (lo, hi), (lambda z, i=i: evaluator(z)[:, i]), k, declared, noise=FLOW_TOL, name=f"{label}[{i}]"
        )
        net, cert = approx_smooth(
            target, delta_component, bounds="estimated" if bounds == "estimated" else "declared", **smooth_kwargs
        )
        certs[f"{label}[{i}]"] = cert.as_dict()
        nets.append(net)
    return parallelize(nets) if len(nets) > 1 else nets[0]


def _lipschitz_u0(problem, G, notes, constants):
    u0 = problem.u0
    lip = problem.lip.get("u0", u0.lip)
    estimated = False
    if lip is None:
        lip = estimate_lipschitz(u0.evaluator, np.full(u0.n, -G), np.full(u0.n, G))
        estimated = True
        notes.append("Lip_u0 estimated from sampled gradients (x1.5)")
    constants["Lip_u0"] = float(lip)
    return max(float(lip), 1e-12), estimated


def _sup_u0(problem, G, constants):
    u0 = problem.u0
    if u0.sup is not None:
        constants["sup_u0"] = float(u0.sup)
        return float(u0.sup), False
    pts = _box_points(np.full(u0.n, -G), np.full(u0.n, G), 4096)
    val = SAFETY * float(np.max(np.abs(u0(pts))))
    constants["sup_u0"] = val
    return val, True


def _resolve(problem, bounds, k):
    if bounds not in ("estimated", "certified"):
        raise ConfigError("bounds must be 'estimated' or 'certified'")
    if k < 1:
        raise ConfigError("k must be positive")


def _domain(problem):
    lo, hi = problem.K_box
    return {"T": problem.T, "K_lo": lo.tolist(), "K_hi": hi.tolist(), "D": problem.D, "n": problem.n}


def _check_eps(epsilon):
    if not (np.isfinite(epsilon) and 0 < epsilon < 1):
        raise ConfigError(f"epsilon must lie in (0, 1), got {epsilon}")


def _composite_u0_flow(problem, fm, delta1, delta2, k, bounds, smooth_kwargs, certs, sub_sizes, G):
    u0net, u0cert = build_u0_net(problem.u0, delta1, G=G + delta2, **smooth_kwargs)
    if u0cert is not None:
        certs["u0"] = u0cert.as_dict()
    flow_net = _flow_nets(problem, fm, k, delta2 / math.sqrt(problem.n), bounds, False, smooth_kwargs, "X0", certs)
    sub_sizes["u0"] = u0net.size()
    sub_sizes["flow"] = flow_net.size()
    return sparse_concat(u0net, flow_net)


# ---------------------------------------------------------------------------
# validation

def validation_lattice(problem: VectorFieldProblem, n_t=41, n_x=41, n_eta=9, max_points=100_000, seed=0):
    """Tensor lattice over ``[0, T] x K x [0, 1]^D`` or, above ``max_points``, Sobol points."""
    lo, hi = problem.domain_box()
    counts = [n_t] + [n_x] * problem.n + [n_eta] * problem.D
    total = float(np.prod(np.asarray(counts, dtype=float)))
    if total <= max_points:
        axes = [np.linspace(lo[i], hi[i], c) for i, c in enumerate(counts)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lo.size)
    return _box_points(lo, hi, int(max_points), seed)


def measure_error(net: Network, problem: VectorFieldProblem, variant: str, points, fm: Optional[FlowMap] = None,
                  chunk: int = 20_000) -> float:
    """Sup over ``points`` of ``|net - reference_solution|``."""
    t, x, eta = problem.split(points)
    ref = reference_solution(problem, variant, t, x, eta, fm=fm)
    worst = 0.0
    for start in range(0, points.shape[0], chunk):
        out = realize(net, points[start : start + chunk])[:, 0]
        worst = max(worst, float(np.max(np.abs(out - ref[start : start + chunk]))))
    return worst


def _finish(net, cert, problem, variant, validate, lattice):
    cert.total = net.size()
    if validate:
        pts = lattice if lattice is not None else validation_lattice(problem)
        cert.measured_error = measure_error(net, problem, variant, pts)
        cert.validation_count = int(pts.shape[0])
    return net, cert


# ---------------------------------------------------------------------------
# builders

def build_homogeneous(problem: VectorFieldProblem, epsilon: float, *, bounds: str = "estimated", k: Optional[int] = None,
                      validate: bool = False, lattice=None, smooth_kwargs: Optional[dict] = None,
                      _theorem: str = "T4.5"):
    """``u0 o X(0, .)``: split ``delta1 = eps/2`` for ``u0`` and ``delta2 = eps/(2 Lip_u0)`` for the flow."""
    _check_eps(epsilon)
    k = problem.k if k is None else k
    _resolve(problem, bounds, k)
    smooth_kwargs = dict(smooth_kwargs or {"max_validation": 20_000})
    fm = FlowMap(problem, atol=FLOW_TOL, rtol=FLOW_TOL)
    notes, constants, certs, sub_sizes = [], {}, {}, {}
    G0 = ck_bound(problem, 1)["G0"]
    constants["G0"] = G0
    lip, est = _lipschitz_u0(problem, G0, notes, constants)
    delta1 = epsilon / 2.0
    delta2 = epsilon / (2.0 * lip)
    net = _composite_u0_flow(problem, fm, delta1, min(delta2, 0.5), k, bounds, smooth_kwargs, certs, sub_sizes, G0)
    cert = BuildCertificate(
        theorem_id=_theorem, epsilon=epsilon, deltas={"delta1": delta1, "delta2": delta2}, domain=_domain(problem),
        sub_sizes=sub_sizes, total=net.size(), constants_used=constants,
        estimated=bounds == "estimated" or est, notes=notes, sub_certificates=certs,
    )
    return _finish(net, cert, problem, "homogeneous", validate, lattice)


def build_weak(problem: VectorFieldProblem, epsilon: float, **kwargs):
    """Same construction for Lipschitz (ramp or piecewise-affine) initial data."""
    if problem.u0.kind not in ("ramp", "piecewise_affine"):
        raise CapabilityError("build_weak expects ramp or piecewise-affine initial data")
    return build_homogeneous(problem, epsilon, _theorem="T4.6", **kwargs)


def _integrand_meta(problem, which):
    fun = problem.f if which == "f" else problem.a
    meta = problem.f_bounds if which == "f" else problem.a_bounds
    return fun, meta


def _integral_net(problem, fm, which, sign, eps_param, k, bounds, smooth_kwargs, certs, sub_sizes, constants, notes):
    """``sign * T * I_N(g o X_full) o A``: approximates ``sign * int_0^t g(tau, X(tau, t, x, eta), eta) dtau``.

    The constants follow the source-term ledger for accuracy ``eps_param``;
    the resulting error is at most ``eps_param / 2``.
    """
    g, meta = _integrand_meta(problem, which)
    T = problem.T
    eps_eff = eps_param / max(1.0, T) ** 2
    bnd = ck_bound(problem, 1)
    G0, G1 = bnd["G0"], bnd["G1"]
    n, D = problem.n, problem.D
    # box of the integrand: [0, T] x [-G0, G0]^n x [0, 1]^D
    g_lo = np.concatenate([[0.0], np.full(n, -G0), np.zeros(D)])
    g_hi = np.concatenate([[T], np.full(n, G0), np.ones(D)])

    def g_eval(z):
        return np.asarray(g(z[:, 0], z[:, 1 : 1 + n], z[:, 1 + n :]), dtype=float).reshape(-1) * np.ones(z.shape[0])

    lip_g = problem.lip.get(which)
    if lip_g is None:
        lip_g = estimate_lipschitz(g_eval, g_lo, g_hi)
        notes.append(f"Lip_{which} estimated from sampled gradients (x1.5)")
    sup_g = meta.get("sup")
    if sup_g is None:
        sup_g = SAFETY * float(np.max(np.abs(g_eval(_box_points(g_lo, g_hi, 4096)))))
        notes.append(f"sup|{which}| estimated from samples (x1.5)")
    c1_g = meta.get("c1", max(sup_g, lip_g))
    lip_u0 = constants["Lip_u0"]
    delta2 = eps_eff / (12.0 * max(lip_u0, lip_g, 1e-12))
    delta3 = eps_eff / 12.0
    gX_c1 = c1_g * (1.0 + G1)
    raw_N = 15.0 / eps_eff * max(gX_c1, 1.0 + sup_g)
    if not raw_N <= MAX_N:
        raise BuildTooLarge(f"quadrature count N={raw_N:.4g} exceeds the limit {MAX_N}")
    N = math.ceil(raw_N)
    tag = which
    constants.update({f"Lip_{tag}": float(lip_g), f"sup_{tag}": float(sup_g), f"{tag}X_C1_estimate": gX_c1, "G1": G1})
    # integrand network on the padded box
    pad = delta2
    k_g = int(meta.get("k", k))
    g_target = SmoothTarget(
        1 + n + D, (g_lo - np.r_[0.0, np.full(n, pad), np.zeros(D)], g_hi + np.r_[0.0, np.full(n, pad), np.zeros(D)]),
        g_eval, k_g, float(meta.get("ck", max(sup_g, lip_g, 1e-12))), name=which,
    )
    g_net, g_cert = approx_smooth(g_target, delta3, bounds="estimated" if bounds == "estimated" else "declared",
                                  **smooth_kwargs)
    certs[f"{which}_net"] = g_cert.as_dict()
    flow_full = _flow_nets(problem, fm, k, delta2 / math.sqrt(n), bounds, True, smooth_kwargs, "X_full", certs)
    d_full = 2 + n + D
    full = parallelize([selector_net(d_full, [0]), flow_full, selector_net(d_full, list(range(2 + n, d_full)))]) \
        if D > 0 else parallelize([selector_net(d_full, [0]), flow_full])
    phi = sparse_concat(g_net, full)
    a_bar = float(sup_g) + delta3
    I_net, rcert = riemann_net(phi, N, T, a_bar)
    # duplicate t: (t, x, eta) -> (t, t, x, eta), then scale by sign * T
    dup = np.zeros((d_full, d_full - 1))
    dup[0, 0] = 1.0
    dup[1:, :] = np.eye(d_full - 1)
    anti = sparse_concat(linear_combination(I_net, [[sign * T]]), affine_net(dup))
    sub_sizes[f"{which}_net"] = g_net.size()
    sub_sizes["flow_full"] = flow_full.size()
    sub_sizes[f"{which}_integral"] = anti.size()
    ledger = {"delta2": delta2, "delta3": delta3, "a_bar": a_bar}
    return anti, N, ledger, rcert


def build_source(problem: VectorFieldProblem, epsilon: float, *, bounds: str = "estimated", k: Optional[int] = None,
                 validate: bool = False, lattice=None, smooth_kwargs: Optional[dict] = None):
    """``u0 o X(0, .) + int_0^t f``: deltas ``eps/6``, ``eps/(12 max Lip)``, ``eps/12`` and the ``15/eps`` quadrature count."""
    _check_eps(epsilon)
    if problem.f is None:
        raise CapabilityError("build_source needs a source term f")
    k = problem.k if k is None else k
    _resolve(problem, bounds, k)
    smooth_kwargs = dict(smooth_kwargs or {"max_validation": 20_000})
    fm = FlowMap(problem, atol=FLOW_TOL, rtol=FLOW_TOL)
    notes, constants, certs, sub_sizes = [], {}, {}, {}
    G0 = ck_bound(problem, 1)["G0"]
    constants["G0"] = G0
    lip_u0, est = _lipschitz_u0(problem, G0, notes, constants)
    anti, N, ledger, rcert = _integral_net(problem, fm, "f", 1.0, epsilon, k, bounds, smooth_kwargs, certs,
                                           sub_sizes, constants, notes)
    eps_eff = epsilon / max(1.0, problem.T) ** 2
    delta1 = eps_eff / 6.0
    delta2 = ledger["delta2"]
    if problem.T > 1:
        notes.append(f"horizon T={problem.T} > 1: ledger run at eps/T^2 = {eps_eff:.3g}")
    notes.append("integral net carries an exact output factor T")
    hom = _composite_u0_flow(problem, fm, delta1, delta2, k, bounds, smooth_kwargs, certs, sub_sizes, G0)
    net = sum_nets(hom, anti)
    cert = BuildCertificate(
        theorem_id="T4.9", epsilon=epsilon,
        deltas={"delta1": delta1, "delta2": delta2, "delta3": ledger["delta3"]},
        domain=_domain(problem), sub_sizes=sub_sizes, total=net.size(),
        constants_used={**constants, "a_bar": ledger["a_bar"], "c3": rcert.c3}, N=N,
        estimated=True, notes=notes, sub_certificates=certs,
    )
    return _finish(net, cert, problem, "source", validate, lattice)


def _jacobian_bound(problem, fm, bounds, constants, notes):
    symbolic = hadamard_J_bound(problem)
    constants["G_J_symbolic"] = symbolic
    if bounds == "certified":
        constants["G_J"] = symbolic
        return symbolic
    lo, hi = problem.domain_box()
    pts = _box_points(lo, hi, 1024)
    t, x, eta = problem.split(pts)
    sampled = float(np.max(np.abs(fm.jacobian_factor(0.0, t, x, eta))))
    G_J = max(SAFETY * sampled, 1e-12)
    constants["G_J"] = G_J
    notes.append("G_J estimated as 1.5 x sampled sup|J|; symbolic Hadamard bound recorded as G_J_symbolic")
    return G_J


def build_conservative(problem: VectorFieldProblem, epsilon: float, *, bounds: str = "estimated",
                       k: Optional[int] = None, validate: bool = False, lattice=None,
                       smooth_kwargs: Optional[dict] = None):
    """``(u0 o X(0, .)) * J(0, .)`` with the four-quarter split of ``epsilon``."""
    _check_eps(epsilon)
    k = problem.k if k is None else k
    _resolve(problem, bounds, k)
    if k < 2:
        raise CapabilityError("the Jacobian factor needs k >= 2")
    smooth_kwargs = dict(smooth_kwargs or {"max_validation": 20_000})
    fm = FlowMap(problem, atol=FLOW_TOL, rtol=FLOW_TOL)
    notes, constants, certs, sub_sizes = [], {}, {}, {}
    G0 = ck_bound(problem, 1)["G0"]
    constants["G0"] = G0
    lip, est = _lipschitz_u0(problem, G0, notes, constants)
    sup_u0, _ = _sup_u0(problem, G0, constants)
    G_J = _jacobian_bound(problem, fm, bounds, constants, notes)
    delta1 = epsilon / (8.0 * G_J)
    delta2 = epsilon / (8.0 * lip * G_J)
    delta3 = epsilon / (4.0 * max(sup_u0, 1e-12))
    mul_eps = epsilon / 4.0
    hom = _composite_u0_flow(problem, fm, min(delta1, 0.5), min(delta2, 0.5), k, bounds, smooth_kwargs, certs,
                             sub_sizes, G0)
    # Jacobian factor J(0, t, x, eta), one order less smooth than the flow
    lo, hi = problem.domain_box()

    def J_eval(z):
        t, x, eta = problem.split(z)
        return fm.jacobian_factor(0.0, t, x, eta)

    J_target = SmoothTarget(lo.size, (lo, hi), J_eval, k - 1, max(G_J, 1e-12), noise=FLOW_TOL, name="J")
    J_net, J_cert = approx_smooth(J_target, min(delta3, 0.5),
                                  bounds="estimated" if bounds == "estimated" else "declared", **smooth_kwargs)
    certs["J"] = J_cert.as_dict()
    sub_sizes["J"] = J_net.size()
    M = max(1.0, sup_u0 + delta1 + lip * delta2, G_J + delta3)
    net = multiply_nets(hom, J_net, MulConfig(mul_eps, M))
    cert = BuildCertificate(
        theorem_id="T4.11", epsilon=epsilon,
        deltas={"delta1": delta1, "delta2": delta2, "delta3": delta3, "mul": mul_eps},
        domain=_domain(problem), sub_sizes=sub_sizes, total=net.size(),
        constants_used={**constants, "M": M}, estimated=bounds == "estimated" or est, notes=notes,
        sub_certificates=certs,
    )
    return _finish(net, cert, problem, "conservative", validate, lattice)


def build_damped(problem: VectorFieldProblem, epsilon: float, *, bounds: str = "estimated", k: Optional[int] = None,
                 validate: bool = False, lattice=None, smooth_kwargs: Optional[dict] = None):
    """``(u0 o X(0, .)) * exp(-int_0^t a)``.

    Split: product gadget ``eps/4``, homogeneous part ``eps/8`` (divided by
    the largest damping factor), exponential factor ``eps/2`` (divided by
    ``sup|u0|``), of which one fifth goes to the exponential network and the
    rest to the integral network.
    """
    _check_eps(epsilon)
    if problem.a is None:
        raise CapabilityError("build_damped needs a damping coefficient a")
    k = problem.k if k is None else k
    _resolve(problem, bounds, k)
    smooth_kwargs = dict(smooth_kwargs or {"max_validation": 20_000})
    fm = FlowMap(problem, atol=FLOW_TOL, rtol=FLOW_TOL)
    notes, constants, certs, sub_sizes = [], {}, {}, {}
    G0 = ck_bound(problem, 1)["G0"]
    constants["G0"] = G0
    lip, est = _lipschitz_u0(problem, G0, notes, constants)
    sup_u0, _ = _sup_u0(problem, G0, constants)
    T = problem.T
    _, meta = _integrand_meta(problem, "a")
    sup_a = meta.get("sup")
    if sup_a is None:
        lo, hi = problem.domain_box()
        a_lo = np.concatenate([[0.0], np.full(problem.n, -G0), np.zeros(problem.D)])
        a_hi = np.concatenate([[T], np.full(problem.n, G0), np.ones(problem.D)])
        z = _box_points(a_lo, a_hi, 4096)
        sup_a = SAFETY * float(np.max(np.abs(problem.a(z[:, 0], z[:, 1 : 1 + problem.n], z[:, 1 + problem.n :]))))
    nonneg = bool(meta.get("nonnegative", False))
    top = 0.0 if nonneg else sup_a * T
    damp_max = math.exp(top)
    mul_eps = epsilon / 4.0
    e_hom = epsilon / (8.0 * damp_max)
    e_exp_total = epsilon / (2.0 * max(sup_u0, 1.0))
    delta_e = e_exp_total / 5.0
    # the integral error is amplified by the exponential's Lipschitz constant on its domain
    delta_I = 0.8 * e_exp_total / math.exp(top + 0.5 * e_exp_total)
    anti, N, ledger, rcert = _integral_net(problem, fm, "a", -1.0, 2.0 * delta_I, k, bounds, smooth_kwargs, certs,
                                           sub_sizes, constants, notes)
    exp_lo, exp_hi = -sup_a * T - delta_I, top + delta_I
    exp_net, exp_cert = approx_univariate_library("exp", (exp_lo, exp_hi), delta_e, **{
        kk: vv for kk, vv in smooth_kwargs.items() if kk in ("max_validation", "validate")})
    certs["exp"] = exp_cert.as_dict()
    sub_sizes["exp"] = exp_net.size()
    damping = sparse_concat(exp_net, anti)
    delta1 = e_hom / 2.0
    delta2 = e_hom / (2.0 * lip)
    hom = _composite_u0_flow(problem, fm, delta1, delta2, k, bounds, smooth_kwargs, certs, sub_sizes, G0)
    M = max(1.0, sup_u0 + e_hom, damp_max + e_exp_total)
    net = multiply_nets(hom, damping, MulConfig(mul_eps, M))
    cert = BuildCertificate(
        theorem_id="EXT-damped", epsilon=epsilon,
        deltas={"delta1": delta1, "delta2": delta2, "delta_integral": delta_I, "delta_exp": delta_e, "mul": mul_eps},
        domain=_domain(problem), sub_sizes=sub_sizes, total=net.size(),
        constants_used={**constants, "sup_a": sup_a, "exp_domain": [exp_lo, exp_hi], "M": M, "a_bar": ledger["a_bar"]},
        N=N, estimated=True, notes=notes, sub_certificates=certs,
    )
    return _finish(net, cert, problem, "damped", validate, lattice)


BUILDERS = {
    "homogeneous": build_homogeneous,
    "weak": build_weak,
    "source": build_source,
    "conservative": build_conservative,
    "damped": build_damped,
}
