"""Randomized property suites for the exact calculus, the quadrature networks and the flows.

Each suite returns a list of :class:`PropertyResult`; a suite passes when every
entry passes.  The suites are used by the ``props`` command and by the
acceptance tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .calculus import constant_net, parallelize, sparse_concat, sum_nets
from .characteristics import FlowMap, builtin_problem, ck_bound
from .network import AffineMap, Network, deserialize, realize, serialize
from .quadrature import clip_net, indicator_net, left_riemann, riemann_net, shift_net

__all__ = ["PropertyResult", "random_network", "calculus_suite", "quadrature_suite", "flow_suite", "SUITES"]


@dataclass
class PropertyResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}  {self.detail}"


def random_network(rng, input_dim, output_dim, depth, width, density=0.6) -> Network:
    """Random sparse skip-connection network with weights of moderate scale."""
    widths = [input_dim]
    layers = []
    for ell in range(depth):
        rows = output_dim if ell == depth - 1 else int(rng.integers(1, width + 1))
        cols = sum(widths)
        A = rng.normal(size=(rows, cols)) / math.sqrt(cols)
        A[rng.random(size=A.shape) > density] = 0.0
        b = rng.normal(size=rows) * 0.5
        b[rng.random(size=rows) > density] = 0.0
        layers.append(AffineMap(A, b, widths))
        widths.append(rows)
    return Network(input_dim, layers)


def _close(a, b, tol):
    return float(np.max(np.abs(a - b) / (1.0 + np.abs(b)))) if np.size(a) else 0.0


def _concat_weight_count(outer: Network, inner: Network) -> int:
    last = inner.layers[-1]
    from_input = sum(int(layer.block(0).nnz) for layer in outer.layers)
    return inner.num_weights + last.nnz + outer.num_weights + from_input


def calculus_suite(pairs: int = 200, seed: int = 0, points: int = 64, tol: float = 1e-12):
    """Composition, parallelization and sum identities on random network pairs.

    Realizations are compared against direct evaluation of the operands; the
    size relations are checked as exact counts where the construction fixes
    them and as inequalities otherwise.
    """
    rng = np.random.default_rng(seed)
    worst = {"concat": 0.0, "parallel": 0.0, "sum": 0.0}
    failures = {"concat_size": 0, "parallel_size": 0, "sum_size": 0, "serialize": 0}
    for _ in range(pairs):
        d = int(rng.integers(1, 5))
        m = int(rng.integers(1, 4))
        out = int(rng.integers(1, 3))
        inner = random_network(rng, d, m, int(rng.integers(1, 5)), 6)
        outer = random_network(rng, m, out, int(rng.integers(1, 5)), 6)
        other = random_network(rng, d, out, int(rng.integers(1, 5)), 6)
        x = rng.normal(size=(points, d))
        # composition
        comp = sparse_concat(outer, inner)
        worst["concat"] = max(worst["concat"], _close(realize(comp, x), realize(outer, realize(inner, x)), tol))
        if not (comp.num_layers == outer.num_layers + inner.num_layers
                and comp.num_weights == _concat_weight_count(outer, inner)
                and comp.num_weights <= 2 * outer.num_weights + 2 * inner.num_weights):
            failures["concat_size"] += 1
        # parallelization
        first = sparse_concat(outer, inner)
        par = parallelize([first, other])
        ref = np.hstack([realize(first, x), realize(other, x)])
        worst["parallel"] = max(worst["parallel"], _close(realize(par, x), ref, tol))
        if not (par.num_weights == first.num_weights + other.num_weights
                and par.num_layers == max(first.num_layers, other.num_layers)
                and par.num_neurons == first.num_neurons + other.num_neurons - d):
            failures["parallel_size"] += 1
        # sum
        s = sum_nets(first, other)
        worst["sum"] = max(worst["sum"], _close(realize(s, x), realize(first, x) + realize(other, x), tol))
        if not (s.num_weights <= first.num_weights + other.num_weights
                and s.num_layers == max(first.num_layers, other.num_layers)):
            failures["sum_size"] += 1
        back = deserialize(serialize(comp))
        if not np.array_equal(realize(back, x), realize(comp, x)):
            failures["serialize"] += 1
    results = [
        PropertyResult(f"{k} realization", v <= tol, f"max rel deviation {v:.2e} over {pairs} pairs")
        for k, v in worst.items()
    ]
    results += [PropertyResult(k, v == 0, f"{v} violations") for k, v in failures.items()]
    results.append(_piecewise_affine_property(rng, pairs))
    return results


def _piecewise_affine_property(rng, trials):
    """Along a segment a one-hidden-layer network has at most ``N_1 + 1`` affine pieces."""
    bad = 0
    for _ in range(max(1, trials // 4)):
        d = int(rng.integers(1, 4))
        net = random_network(rng, d, 1, 2, 8, density=1.0)
        a, b = rng.normal(size=d), rng.normal(size=d)
        lam = np.linspace(0, 1, 2049)
        vals = realize(net, a + lam[:, None] * (b - a))[:, 0]
        second = np.abs(np.diff(vals, 2))
        kinks = int(np.sum(second > 1e-9 * (1 + np.abs(vals).max())))
        if kinks > 2 * net.widths[1]:
            bad += 1
    return PropertyResult("piecewise affine along segments", bad == 0, f"{bad} violations")


def quadrature_suite(seed: int = 0, counts=(4, 16, 64), grid: int = 1000):
    """Riemann-sum network bound, indicator and clip properties."""
    rng = np.random.default_rng(seed)
    results = []
    t = np.linspace(0.0, 1.0, grid)
    one = constant_net(2, 1.0)
    for N in counts:
        net, cert = riemann_net(one, N, 1.0, 1.0)
        val = realize(net, np.c_[t, rng.uniform(-1, 1, grid)])[:, 0]
        dev = float(np.max(np.abs(val - np.ceil(t * N) / N)))
        bound = 62 * N + 8 * one.num_weights * N + 8 * 2 * N
        results.append(PropertyResult(f"riemann constant N={N}", dev <= cert.c3 / N + 1e-12,
                                      f"max deviation {dev:.3e} <= {cert.c3 / N:.3e}"))
        results.append(PropertyResult(f"riemann weights N={N}", net.num_weights <= bound,
                                      f"W={net.num_weights} <= {bound}"))
    # indicator values
    N, T = 8, 2.0
    ok = True
    for i in range(N):
        ind = indicator_net(i, N, T, 3)
        ti, tn = i * T / N, (i + 1) * T / N
        pts = np.array([[ti, 0.3, -1.0], [tn, 0.3, -1.0], [0.5 * (ti + tn), 0.0, 0.0]])
        ok &= bool(np.allclose(realize(ind, pts)[:, 0], [0.0, 1.0, 0.5], atol=1e-12))
        ok &= ind.num_weights == (7 if i > 0 else 6) and ind.num_layers == 3
    results.append(PropertyResult("indicator ramp", ok, f"N={N}, T={T}"))
    # clip properties on random networks
    bad_below = bad_above = bad_band = 0
    worst_above = 0.0
    for trial in range(3):
        phi = random_network(rng, 3, 1, int(rng.integers(1, 5)), 5)
        x = rng.uniform(-1, 1, size=(200, 2))
        # the shifted summand only reads the nodes t_i
        tt = np.arange(N) * T / N
        grid_pts = np.array([[a, *b] for a in tt for b in x])
        a_bar = 1.5 * float(np.max(np.abs(realize(phi, grid_pts)))) + 1e-3
        for i in (0, 3, N - 1):
            clip = clip_net(phi, i, N, T, a_bar)
            ti, tn = i * T / N, (i + 1) * T / N
            below = np.c_[rng.uniform(0, ti, 200) if i > 0 else np.zeros(200), x]
            above = np.c_[rng.uniform(tn, T, 200), x]
            band = np.c_[rng.uniform(ti, tn, 200), x]
            frozen = realize(phi, np.c_[np.full(200, ti), x])[:, 0]
            bad_below += int(np.any(realize(clip, below)[:, 0] != 0.0))
            dev = float(np.max(np.abs(realize(clip, above)[:, 0] - frozen)))
            worst_above = max(worst_above, dev)
            bad_above += int(dev > 1e-12 * (1 + np.abs(frozen).max()))
            bad_band += int(np.any(np.abs(realize(clip, band)[:, 0]) > 2 * a_bar))
    results.append(PropertyResult("clip zero below t_i", bad_below == 0, f"{bad_below} violations"))
    results.append(PropertyResult("clip frozen above t_i+1", bad_above == 0, f"max deviation {worst_above:.2e}"))
    results.append(PropertyResult("clip bounded in band", bad_band == 0, f"{bad_band} violations"))
    # shift freezes time
    phi = random_network(rng, 3, 1, 3, 5)
    sh = shift_net(phi, 2, N, T)
    x = rng.uniform(-1, 1, size=(50, 2))
    same = np.array_equal(realize(sh, np.c_[np.zeros(50), x]), realize(sh, np.c_[np.full(50, 1.7), x]))
    direct = _close(realize(sh, np.c_[np.zeros(50), x]), realize(phi, np.c_[np.full(50, 2 * T / N), x]), 0)
    results.append(PropertyResult("shift freezes time", same and direct <= 1e-12, f"deviation {direct:.1e}"))
    # bridge to the numeric left Riemann sum
    worst = 0.0
    ok = True
    for _ in range(3):
        phi = random_network(rng, 2, 1, int(rng.integers(1, 5)), 5)
        tt, xx = np.meshgrid(np.linspace(0, 1, 101), np.linspace(-1, 1, 11), indexing="ij")
        pts = np.c_[tt.ravel(), xx.ravel()]
        sup = float(np.max(np.abs(realize(phi, pts))))
        a_bar = sup + 1e-9
        net, _ = riemann_net(phi, 8, 1.0, a_bar)
        oracle = left_riemann(lambda tau, x: realize(phi, np.c_[tau, x])[:, 0], 8, 1.0, pts[:, 0], pts[:, 1:])
        dev = float(np.max(np.abs(realize(net, pts)[:, 0] - oracle)))
        worst = max(worst, dev / max(a_bar, 1e-300))
        ok &= dev <= 3 * a_bar / 8 + 1e-12
        ok &= bool(np.all(realize(net, np.c_[np.zeros(11), np.linspace(-1, 1, 11)])[:, 0] == 0.0))
    results.append(PropertyResult("riemann net vs left sum", ok, f"max deviation {worst:.3f} a_bar (bound 0.375)"))
    return results


def flow_fields():
    """The four shipped test fields, with parameters used by the suites."""
    return {
        "const": builtin_problem("const", c=0.5),
        "linear": builtin_problem("linear", lam=0.5),
        "rotation": builtin_problem("rotation", omega=1.0, n=2, K_box=(-1.0, 1.0)),
        "param-shear": builtin_problem("param-shear", D=2),
    }


def _fd_determinant(fm, s, t, x, eta, h=1e-4):
    n = x.shape[1]
    jac = np.empty((x.shape[0], n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        jac[:, :, j] = (fm.flow(s, t, x + e, eta) - fm.flow(s, t, x - e, eta)) / (2 * h)
    return np.linalg.det(jac)


def flow_suite(tuples: int = 1000, seed: int = 0, tol: float = 1e-7, det_tol: float = 1e-5):
    """Semigroup, inverse consistency, growth bound and Liouville checks for the shipped fields."""
    rng = np.random.default_rng(seed)
    results = []
    for name, p in flow_fields().items():
        fm = FlowMap(p)
        lo, hi = p.K_box
        B = tuples
        x = rng.uniform(lo, hi, size=(B, p.n))
        eta = rng.uniform(0, 1, size=(B, p.D))
        s1, s2, t = (rng.uniform(0, p.T, B) for _ in range(3))
        mid = fm.flow(s1, t, x, eta)
        semi = float(np.max(np.abs(fm.flow(s2, s1, mid, eta) - fm.flow(s2, t, x, eta))))
        back = float(np.max(np.abs(fm.flow(t, 0.0, fm.flow(0.0, t, x, eta), eta) - x)))
        anchor = float(np.max(np.abs(fm.flow(t, t, x, eta) - x)))
        results.append(PropertyResult(f"{name} semigroup", semi <= tol, f"max deviation {semi:.2e}"))
        results.append(PropertyResult(f"{name} inverse", back <= tol and anchor == 0.0, f"max deviation {back:.2e}"))
        G0 = ck_bound(p, 1)["G0"]
        reach = float(np.max(np.linalg.norm(mid, axis=1)))
        results.append(PropertyResult(f"{name} growth bound", reach <= G0, f"sup|X| {reach:.3f} <= G0 {G0:.3f}"))
        tight = FlowMap(p, atol=1e-12, rtol=1e-12)
        m = min(B, 200)
        J = tight.jacobian_factor(s1[:m], t[:m], x[:m], eta[:m])
        det = _fd_determinant(tight, s1[:m], t[:m], x[:m], eta[:m])
        dev = float(np.max(np.abs(J - det)))
        results.append(PropertyResult(f"{name} Liouville vs determinant", dev <= det_tol, f"max deviation {dev:.2e}"))
    return results


SUITES = {"calculus": calculus_suite, "quadrature": quadrature_suite, "flow": flow_suite}
