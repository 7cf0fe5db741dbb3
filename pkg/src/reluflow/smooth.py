"""ReLU approximation of smooth functions on boxes with a certified sup error.

Construction
------------
The box is mapped affinely onto the unit cube, which is split into ``n`` cells
per axis and triangulated by the Freudenthal (Kuhn) rule.  The nodal hat of
grid node ``m`` is

    phi_m(y) = relu(1 - max(0, z_1..z_d) + min(0, z_1..z_d)),   z = n y - m,

and the running max/min are ReLU chains ``r_j = relu(z_j - sum_{i<j} r_i)``
whose prefixes are shared between nodes.  The hats are exactly a partition of
unity, and ``sum_m phi_m v_m`` is the piecewise-linear interpolant of nodal
values ``v_m``.

* Orders ``k <= 2`` use plain nodal interpolation, which needs no products.
* Orders ``k >= 3`` blend local Taylor polynomials ``P_m`` of degree
  ``q = k - 1`` (capped).  Writing ``sum_m phi_m P_m = sum_beta y^beta g_beta``
  in the monomial basis turns every coefficient ``g_beta`` into an exact
  piecewise-linear field, so products are needed once per monomial, not once
  per node.

Error ledger for the Taylor route: remainder ``3/8 eps``, coefficient
simplification ``1/8 eps``, product gadgets ``1/2 eps``.  Every network is
checked a posteriori on a validation set and the grid is refined if the
measured error exceeds ``eps``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .calculus import (
    MulConfig,
    affine_net,
    constant_net,
    linear_combination,
    multiply_nets,
    parallelize,
    selector_net,
    sparse_concat,
    sum_nets,
)
from .errors import BuildTooLarge, ConfigError
from .network import AffineMap, Network, SizeReport, realize
from .sampling import sobol_points

__all__ = [
    "SmoothTarget",
    "ApproxCertificate",
    "approx_smooth",
    "approx_univariate_library",
    "partition_of_unity_net",
    "grid_nodes",
    "multi_indices",
    "fd_weights",
    "partial_derivatives",
    "estimate_derivative_bounds",
    "monomial_net",
    "validation_points",
]

TAYLOR_CAP = 3
SAFETY = 1.5


@dataclass
class SmoothTarget:
    """A smooth function on an axis-aligned box.

    Parameters
    ----------
    dim : int
        Input dimension ``d``.
    box : (array_like, array_like)
        Lower and upper corners.
    evaluator : callable
        Vectorized ``f``: points of shape ``(B, d)`` to values of shape ``(B,)``.
        It must also be defined slightly outside the box (finite differences).
    k : int
        Smoothness order used by the construction.
    norm_bound : float
        Bound on all partial derivatives of order ``<= k`` over the box.
    derivative_oracle : callable, optional
        ``oracle(points, alpha)`` returning ``D^alpha f`` in box coordinates.
    derivative_bounds : dict, optional
        Map from multi-indices of the remainder order to sup bounds of the
        corresponding derivative; overrides ``norm_bound`` in the remainder.
    noise : float
        Relative noise level of ``evaluator``; sets finite-difference steps.
    """

    dim: int
    box: tuple
    evaluator: Callable
    k: int
    norm_bound: float
    derivative_oracle: Optional[Callable] = None
    derivative_bounds: Optional[dict] = None
    noise: float = 1e-15
    name: str = "f"

    def __post_init__(self):
        lo, hi = (np.asarray(b, dtype=float).reshape(-1) for b in self.box)
        if lo.size == 1 and self.dim > 1:
            lo, hi = np.full(self.dim, lo[0]), np.full(self.dim, hi[0])
        if lo.size != self.dim or hi.size != self.dim:
            raise ConfigError("box corners must have length dim")
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)) or np.any(hi <= lo):
            raise ConfigError("box must be finite and nondegenerate")
        if self.k < 1:
            raise ConfigError("k must be at least 1")
        if not (self.norm_bound > 0):
            raise ConfigError("norm_bound must be positive")
        self.box = (lo, hi)

    @property
    def lo(self):
        return self.box[0]

    @property
    def hi(self):
        return self.box[1]

    def __call__(self, x):
        return np.asarray(self.evaluator(np.atleast_2d(x)), dtype=float).reshape(-1)


@dataclass
class ApproxCertificate:
    """Record of how a network was built and how accurate it measured."""

    epsilon: float
    grid_n: int
    taylor_order: int
    mul_budget: float
    size: SizeReport
    route: str = "nodal"
    remainder_constant: float = 0.0
    constant_source: str = "norm_bound"
    measured_error: float = float("nan")
    validation_count: int = 0
    attempts: int = 1
    fields: int = 0
    products: int = 0
    simplification_error: float = 0.0
    estimated: bool = False
    warnings: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.measured_error <= self.epsilon)

    def as_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "size"}
        out["size"] = self.size.as_dict()
        out["passed"] = self.passed
        return out


# ---------------------------------------------------------------------------
# multi-indices and finite differences

def multi_indices(d: int, order: int, exact: bool = True):
    """Multi-indices of ``d`` variables with ``|alpha| == order`` (or ``<=`` if not exact)."""
    orders = [order] if exact else range(order + 1)
    out = []
    for p in orders:
        for combo in itertools.combinations_with_replacement(range(d), p):
            a = [0] * d
            for i in combo:
                a[i] += 1
            out.append(tuple(a))
    return out


def _factorial(alpha) -> float:
    return float(np.prod([math.factorial(a) for a in alpha]))


def fd_weights(order: int) -> tuple:
    """Central finite-difference weights of second-order accuracy.

    Returns ``(offsets, weights)`` such that
    ``f^(order)(x) ~ sum_j w_j f(x + o_j h) / h**order``.
    """
    if order == 0:
        return np.array([0]), np.array([1.0])
    radius = (order + 1) // 2
    offs = np.arange(-radius, radius + 1)
    V = np.vander(offs.astype(float), increasing=True).T
    rhs = np.zeros(offs.size)
    rhs[order] = math.factorial(order)
    w = np.linalg.solve(V, rhs)
    w[np.abs(w) < 1e-12] = 0.0
    keep = w != 0.0
    return offs[keep], w[keep]


def _stencil(alpha):
    parts = [fd_weights(a) for a in alpha]
    offsets = np.array(list(itertools.product(*[p[0] for p in parts])), dtype=float)
    weights = np.array([np.prod(c) for c in itertools.product(*[p[1] for p in parts])])
    return offsets, weights


def partial_derivatives(fun, points, alphas, lo, hi, noise=1e-15, oracle=None, chunk_evals=2_000_000):
    """Partial derivatives ``D^alpha f`` at ``points`` for every ``alpha`` in ``alphas``.

    Uses ``oracle`` when given, else central differences whose step for a
    derivative of total order ``p`` is ``noise**(1/(p+2))`` times the box width.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = {}
    if oracle is not None:
        for a in alphas:
            out[tuple(a)] = np.asarray(oracle(points, tuple(a)), dtype=float).reshape(-1)
        return out
    widths = np.asarray(hi, dtype=float) - np.asarray(lo, dtype=float)
    by_order = {}
    for a in alphas:
        by_order.setdefault(sum(a), []).append(tuple(a))
    M, d = points.shape
    for p, group in by_order.items():
        h = (noise ** (1.0 / (p + 2)) if p > 0 else 1.0) * widths
        stencils = [_stencil(a) for a in group]
        union = np.unique(np.concatenate([s[0] for s in stencils]), axis=0)
        lookup = {tuple(o): i for i, o in enumerate(union)}
        S = union.shape[0]
        vals = np.empty((M, S))
        step = max(1, chunk_evals // S)
        for start in range(0, M, step):
            blk = points[start : start + step]
            q = (blk[:, None, :] + union[None, :, :] * h[None, None, :]).reshape(-1, d)
            vals[start : start + step] = np.asarray(fun(q), dtype=float).reshape(blk.shape[0], S)
        for a, (offs, w) in zip(group, stencils):
            idx = [lookup[tuple(o)] for o in offs]
            scale = np.prod(h ** np.asarray(a, dtype=float))
            out[a] = vals[:, idx] @ w / scale
    return out


def estimate_derivative_bounds(fun, lo, hi, order, samples=64, noise=1e-15, oracle=None, seed=0):
    """Sampled sup of ``|D^alpha f|`` for every ``|alpha| == order`` (no safety factor)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = lo.size
    pts = sobol_points(lo, hi, samples, seed)
    # include the corners of the box where cheap, derivative peaks often sit there
    if d <= 6:
        corners = np.array(list(itertools.product(*zip(lo, hi))))
        pts = np.vstack([pts, corners])
    alphas = multi_indices(d, order)
    ders = partial_derivatives(fun, pts, alphas, lo, hi, noise=noise, oracle=oracle)
    return {a: float(np.max(np.abs(v))) for a, v in ders.items()}


# ---------------------------------------------------------------------------
# partition of unity

def grid_nodes(d: int, n: int) -> np.ndarray:
    """All nodes ``{0..n}^d`` as integer rows, last axis fastest."""
    axes = [np.arange(n + 1)] * d
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)


def partition_of_unity_net(lo, hi, n: int, nodes=None, values=None) -> Network:
    """Network of Freudenthal hats on the grid with ``n`` cells per axis of the box.

    Parameters
    ----------
    nodes : ndarray of int, shape (M, d), optional
        Grid nodes whose hats are built (default: all).
    values : ndarray, shape (F, M), optional
        Output ``values @ phi``; by default the hats themselves are the outputs.
    """
    lo = np.asarray(lo, dtype=float).reshape(-1)
    hi = np.asarray(hi, dtype=float).reshape(-1)
    d = lo.size
    if nodes is None:
        nodes = grid_nodes(d, n)
    nodes = np.asarray(nodes, dtype=np.int64)
    Mn = nodes.shape[0]
    if values is None:
        values = sp.identity(Mn, format="csr")
    values = sp.csr_matrix(values) if sp.issparse(values) else sp.csr_matrix(np.atleast_2d(values))
    if values.shape[1] != Mn:
        raise ConfigError("values must have one column per node")
    scale = n / (hi - lo)
    widths = [d]
    layers = []
    # prefix index of every node at each level, and column of r/s neurons per prefix
    inv_levels = []
    r_col = []
    s_col = []
    for j in range(1, d + 1):
        prefixes, inv = np.unique(nodes[:, :j], axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        c = prefixes.shape[0]
        rep = np.zeros(c, dtype=np.int64)
        rep[inv] = np.arange(Mn)
        base = sum(widths)
        rows, cols, vals = [], [], []
        ax = j - 1
        pr = np.arange(c)
        # r_j = relu(z_j - sum_{i<j} r_i), s_j = relu(-z_j - sum_{i<j} s_i)
        rows += [pr, c + pr]
        cols += [np.full(c, ax), np.full(c, ax)]
        vals += [np.full(c, scale[ax]), np.full(c, -scale[ax])]
        for i in range(j - 1):
            anc = inv_levels[i][rep]
            rows += [pr, c + pr]
            cols += [r_col[i][anc], s_col[i][anc]]
            vals += [-np.ones(c), -np.ones(c)]
        shift = -scale[ax] * lo[ax] - prefixes[:, ax]
        bias = np.concatenate([shift, -shift])
        layers.append(AffineMap.from_triplets(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), bias, widths))
        inv_levels.append(inv)
        r_col.append(base + np.arange(c))
        s_col.append(base + c + np.arange(c))
        widths.append(2 * c)
    # hats
    rows, cols = [], []
    for j in range(d):
        rows += [np.arange(Mn), np.arange(Mn)]
        cols += [r_col[j][inv_levels[j]], s_col[j][inv_levels[j]]]
    rows = np.concatenate(rows)
    layers.append(AffineMap.from_triplets(rows, np.concatenate(cols), -np.ones(rows.size), np.ones(Mn), widths))
    hat_base = sum(widths)
    widths.append(Mn)
    out = values.tocoo()
    layers.append(
        AffineMap.from_triplets(out.row, hat_base + out.col, out.data, np.zeros(values.shape[0]), widths)
    )
    return Network(d, layers)


# ---------------------------------------------------------------------------
# monomials

def _unit_coordinate(d, lo, hi, i) -> Network:
    row = np.zeros(d)
    row[i] = 1.0 / (hi[i] - lo[i])
    return affine_net(row[None, :], [-lo[i] / (hi[i] - lo[i])])


def monomial_net(lo, hi, beta, eps: float, _cache=None) -> Network:
    """Approximate ``prod_i y_i**beta_i`` with ``y = (x - lo)/(hi - lo)`` to within ``eps`` on the box.

    Factors are multiplied along a balanced binary tree of product gadgets.
    Degree one monomials are exact.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = lo.size
    factors = [i for i, b in enumerate(beta) for _ in range(b)]
    if not factors:
        return constant_net(d, 1.0)
    key = (tuple(beta), eps)
    if _cache is not None and key in _cache:
        return _cache[key]
    gadgets = len(factors) - 1
    e_gate = eps / (2.0 * max(gadgets, 1))
    cfg = MulConfig(min(e_gate, 0.5), 1.0 + eps)

    def build(fs):
        if len(fs) == 1:
            return _unit_coordinate(d, lo, hi, fs[0])
        half = len(fs) // 2
        return multiply_nets(build(fs[:half]), build(fs[half:]), cfg)

    net = build(factors)
    if _cache is not None:
        _cache[key] = net
    return net


# ---------------------------------------------------------------------------
# validation

def validation_points(lo, hi, n: int, max_points: int = 200_000, seed: int = 0) -> np.ndarray:
    """Lattice of ``20 n + 1`` points per axis (d <= 3, thinned to ``max_points``) or Sobol points (d > 3)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = lo.size
    if d <= 3:
        per_axis = 20 * n + 1
        per_axis = max(2, min(per_axis, int(max_points ** (1.0 / d))))
        axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(d)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    return sobol_points(lo, hi, min(max_points, 100_000), seed)


# ---------------------------------------------------------------------------
# main construction

def _remainder_constant(target: SmoothTarget, order: int, bounds: str, samples: int, seed: int):
    """Constant ``C`` with Taylor remainder ``<= C h**order`` in unit coordinates."""
    widths = target.hi - target.lo
    alphas = multi_indices(target.dim, order)
    if target.derivative_bounds is not None:
        missing = [a for a in alphas if a not in target.derivative_bounds]
        if not missing:
            C = sum(target.derivative_bounds[a] * np.prod(widths ** np.array(a)) / _factorial(a) for a in alphas)
            return float(C), "derivative_bounds", False
    if bounds == "estimated":
        est = estimate_derivative_bounds(
            target.evaluator, target.lo, target.hi, order, samples=samples, noise=target.noise,
            oracle=target.derivative_oracle, seed=seed,
        )
        C = sum(SAFETY * est[a] * np.prod(widths ** np.array(a)) / _factorial(a) for a in alphas)
        return float(C), "estimated", True
    C = target.norm_bound * float(widths.sum()) ** order / math.factorial(order)
    return float(C), "norm_bound", False


def _metadata_warnings(target: SmoothTarget, order: int, samples: int, seed: int) -> list:
    warnings = []
    for p in range(1, min(order, 2) + 1):
        est = estimate_derivative_bounds(
            target.evaluator, target.lo, target.hi, p, samples=samples, noise=target.noise,
            oracle=target.derivative_oracle, seed=seed,
        )
        worst = max(est.values())
        if worst > 2.0 * target.norm_bound:
            warnings.append(
                f"inconsistent metadata: sampled order-{p} derivative {worst:.3g} exceeds twice norm_bound {target.norm_bound:.3g}"
            )
    return warnings


def _affine_fit(nodes_box, values):
    A = np.hstack([nodes_box, np.ones((nodes_box.shape[0], 1))])
    coef, *_ = np.linalg.lstsq(A, values, rcond=None)
    resid = np.max(np.abs(A @ coef - values))
    return coef, resid


def _nodal_network(target, n, max_nodes):
    d = target.dim
    if (n + 1) ** d > max_nodes:
        raise BuildTooLarge(f"grid with {(n + 1) ** d} nodes exceeds the limit of {max_nodes}")
    nodes = grid_nodes(d, n)
    pts = target.lo + nodes / n * (target.hi - target.lo)
    vals = target(pts)
    coef, resid = _affine_fit(pts, vals)
    if resid <= 1e-12 * (1.0 + np.max(np.abs(vals))):
        coef[np.abs(coef) < 1e-14 * (1.0 + np.max(np.abs(coef)))] = 0.0
        return affine_net(coef[None, :d], [coef[d]]), 0
    keep = vals != 0.0
    return partition_of_unity_net(target.lo, target.hi, n, nodes[keep], vals[keep][None, :]), 0


def _taylor_network(target, n, q, eps, max_nodes):
    """Blend of degree-``q`` Taylor polynomials; returns (network, stats)."""
    d = target.dim
    lo, hi = target.lo, target.hi
    widths = hi - lo
    if (n + 1) ** d > max_nodes:
        raise BuildTooLarge(f"grid with {(n + 1) ** d} nodes exceeds the limit of {max_nodes}")
    nodes = grid_nodes(d, n)
    ynodes = nodes / n
    pts = lo + ynodes * widths
    alphas = multi_indices(d, q, exact=False)
    ders = partial_derivatives(target.evaluator, pts, alphas, lo, hi, noise=target.noise, oracle=target.derivative_oracle)
    # Taylor coefficients in unit coordinates
    coeff = {a: ders[a] * np.prod(widths ** np.array(a)) / _factorial(a) for a in alphas}
    # expand sum_alpha c_alpha (y - m)^alpha in the monomial basis
    fields = {b: np.zeros(nodes.shape[0]) for b in alphas}
    for a in alphas:
        for b in alphas:
            if all(bi <= ai for bi, ai in zip(b, a)):
                binom = np.prod([math.comb(ai, bi) for ai, bi in zip(a, b)])
                power = np.prod((-ynodes) ** (np.array(a) - np.array(b)), axis=1)
                fields[b] += coeff[a] * binom * power
    # simplification: collapse near-constant fields, drop negligible ones
    # first drop negligible fields (half the budget), then collapse near-constant ones
    budget = eps / 8.0
    decided = {}
    spent = 0.0
    for b in sorted(fields, key=lambda b: np.max(np.abs(fields[b]))):
        cost = float(np.max(np.abs(fields[b])))
        if spent + cost > budget / 2.0:
            break
        decided[b] = ("drop", 0.0)
        spent += cost
    for b in sorted((b for b in fields if b not in decided), key=lambda b: np.ptp(fields[b])):
        v = fields[b]
        cost = 0.5 * float(v.max() - v.min())
        if spent + cost > budget:
            break
        decided[b] = ("collapse", 0.5 * float(v.max() + v.min()))
        spent += cost
    const_part = {b: decided[b][1] for b in alphas if b in decided and decided[b][1] != 0.0}
    live = [b for b in alphas if b not in decided]
    # product terms: live fields with |beta| >= 1 and constant monomials of degree >= 2
    terms = [b for b in live if sum(b) >= 1] + [b for b in const_part if sum(b) >= 2]
    e_term = (eps / 2.0) / max(len(terms), 1)

    unit_rows = np.diag(1.0 / widths)
    unit_shift = -lo / widths
    # exact affine part: constants and degree-one monomials with constant coefficients
    lin = np.zeros(d)
    c0 = 0.0
    for b, c in const_part.items():
        if sum(b) == 0:
            c0 += c
        elif sum(b) == 1:
            i = b.index(1)
            lin += c * unit_rows[i]
            c0 += c * unit_shift[i]

    cache = {}
    F = len(live)
    z_dim = d + F
    pieces = [affine_net(np.concatenate([lin, np.zeros(F)])[None, :], [c0])]
    live_index = {b: d + j for j, b in enumerate(live)}
    zero_field = tuple([0] * d)
    if zero_field in live_index:
        pieces.append(selector_net(z_dim, [live_index[zero_field]]))
    lo_z = np.concatenate([lo, np.zeros(F)])
    hi_z = np.concatenate([hi, np.ones(F)])
    for b in terms:
        bz = tuple(b) + (0,) * F
        if b in live_index:
            G = float(np.max(np.abs(fields[b])))
            if sum(b) == 1:
                mono = _unit_coordinate(z_dim, lo_z, hi_z, b.index(1))
                M = max(1.0, G)
                pieces.append(multiply_nets(selector_net(z_dim, [live_index[b]]), mono, MulConfig(min(e_term, 0.5), M)))
            else:
                e_mono = e_term / (2.0 * max(G, 1.0))
                mono = monomial_net(lo_z, hi_z, bz, e_mono, cache)
                M = max(G, 1.0 + e_mono)
                pieces.append(
                    multiply_nets(selector_net(z_dim, [live_index[b]]), mono, MulConfig(min(e_term / 2.0, 0.5), M))
                )
        else:
            c = const_part[b]
            mono = monomial_net(lo_z, hi_z, bz, e_term / abs(c), cache)
            pieces.append(linear_combination(mono, [[c]]))
    combiner = sum_nets(pieces) if len(pieces) > 1 else pieces[0]
    stats = {"fields": F, "products": len(terms), "simplification_error": spent}
    if F == 0:
        return combiner, stats
    values = np.stack([fields[b] for b in live])
    H = partition_of_unity_net(lo, hi, n, nodes, values)
    inner = parallelize([affine_net(np.eye(d)), H])
    return sparse_concat(combiner, inner), stats


def approx_smooth(target: SmoothTarget, epsilon: float, *, bounds: str = "declared", taylor_cap: int = TAYLOR_CAP,
                  validate: bool = True, max_validation: int = 200_000, max_nodes: int = 250_000,
                  max_refinements: int = 4, samples: int = 64, seed: int = 0):
    """Build a ReLU network within ``epsilon`` of ``target`` on its box.

    Parameters
    ----------
    bounds : {"declared", "estimated"}
        Source of the Taylor remainder constant when ``target.derivative_bounds``
        is absent: the declared ``norm_bound`` or sampled finite differences
        times a safety factor of 1.5 (flagged in the certificate).
    taylor_cap : int
        Largest Taylor degree used.  Orders above ``taylor_cap + 1`` are
        treated as ``taylor_cap + 1``.
    validate : bool
        Measure the error on a validation set and refine the grid on failure.

    Returns
    -------
    (Network, ApproxCertificate)
    """
    if not (np.isfinite(epsilon) and 0 < epsilon < 1):
        raise ConfigError(f"epsilon must lie in (0, 1), got {epsilon}")
    if bounds not in ("declared", "estimated"):
        raise ConfigError("bounds must be 'declared' or 'estimated'")
    order = min(target.k, taylor_cap + 1)
    q = order - 1
    route = "nodal" if order <= 2 else "taylor"
    C, source, estimated = _remainder_constant(target, order, bounds, samples, seed)
    if not np.isfinite(C):
        raise BuildTooLarge(f"the {source} remainder constant is not finite")
    warnings = _metadata_warnings(target, order, min(samples, 32), seed) if target.derivative_oracle is None else []
    if target.k > order:
        warnings.append(f"smoothness order {target.k} capped at {order}")
    remainder_budget = epsilon / 2.0 if route == "nodal" else 3.0 * epsilon / 8.0
    n = max(1, math.ceil((C / remainder_budget) ** (1.0 / order) - 1e-12)) if C > 0 else 1
    attempts = 0
    while True:
        attempts += 1
        if route == "nodal":
            net, _ = _nodal_network(target, n, max_nodes)
            stats = {"fields": 1, "products": 0, "simplification_error": 0.0}
        else:
            net, stats = _taylor_network(target, n, q, epsilon, max_nodes)
        measured, count = float("nan"), 0
        if validate:
            pts = validation_points(target.lo, target.hi, n, max_validation, seed)
            measured = float(np.max(np.abs(realize(net, pts)[:, 0] - target(pts))))
            count = pts.shape[0]
        if not validate or measured <= epsilon or attempts > max_refinements:
            break
        warnings.append(f"measured error {measured:.3g} above target at n={n}; refining")
        n = math.ceil(1.5 * n)
    cert = ApproxCertificate(
        epsilon=epsilon, grid_n=n, taylor_order=q, mul_budget=0.0 if route == "nodal" else epsilon / 2.0,
        size=net.size(), route=route, remainder_constant=C, constant_source=source, measured_error=measured,
        validation_count=count, attempts=attempts, fields=stats["fields"], products=stats["products"],
        simplification_error=stats["simplification_error"], estimated=estimated, warnings=warnings,
    )
    return net, cert


_LIBRARY = {
    "exp": (lambda x: np.exp(x[:, 0]), lambda x, a: np.exp(x[:, 0]), lambda lo, hi: math.exp(hi)),
    "exp_neg": (lambda x: np.exp(-x[:, 0]), lambda x, a: (-1.0) ** a[0] * np.exp(-x[:, 0]), lambda lo, hi: math.exp(-lo)),
}


def approx_univariate_library(name: str, domain, epsilon: float, k: int = 3, **kwargs):
    """Network for ``exp`` or ``exp_neg`` (``t -> e^{-t}``) on an interval.

    Returns ``(Network, ApproxCertificate)``; a degenerate interval gives a
    constant network with zero error.
    """
    if name not in _LIBRARY:
        raise ConfigError(f"unknown library function '{name}'")
    lo, hi = (float(v) for v in domain)
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi < lo:
        raise ConfigError("library domain must be a finite interval")
    fun, oracle, bound = _LIBRARY[name]
    if not (0 < epsilon < 1):
        raise ConfigError(f"epsilon must lie in (0, 1), got {epsilon}")
    if hi == lo:
        net = constant_net(1, float(fun(np.array([[lo]]))[0]))
        cert = ApproxCertificate(epsilon=epsilon, grid_n=1, taylor_order=0, mul_budget=0.0, size=net.size(),
                                 route="constant", measured_error=0.0)
        return net, cert
    target = SmoothTarget(1, ([lo], [hi]), fun, k, max(bound(lo, hi), 1e-300), derivative_oracle=oracle, name=name)
    return approx_smooth(target, epsilon, **kwargs)
