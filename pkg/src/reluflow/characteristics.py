"""Characteristic flows of parametric transport equations.

For a velocity field ``V(t, x, eta)`` the characteristic curve through
``(t, x)`` solves ``gamma'(s) = V(s, gamma(s), eta)``, ``gamma(t) = x``, and the
flow is ``X(s, t, x, eta) = gamma(s)``.  Solutions of the four transport
variants are expressed through ``X``, the Jacobian factor
``J = det D_x X`` and running integrals along the curves.

All evaluators are vectorized: ``t`` has shape ``(B,)``, ``x`` has shape
``(B, n)`` and ``eta`` has shape ``(B, D)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import CapabilityError, ConfigError
from .network import AffineMap, Network
from .ode import integrate
from .sampling import sobol_points

__all__ = [
    "InitialCondition",
    "VectorFieldProblem",
    "FlowMap",
    "flow",
    "jacobian_factor",
    "reference_solution",
    "ck_bound",
    "hadamard_J_bound",
    "hadamard_from_G1",
    "estimate_lipschitz",
    "ramp_initial_condition",
    "smooth_initial_condition",
    "builtin_problem",
    "BUILTIN_FIELDS",
    "VARIANTS",
]

VARIANTS = ("homogeneous", "weak", "source", "conservative", "damped")


@dataclass
class InitialCondition:
    """Initial datum ``u0`` of a transport problem.

    ``kind`` is one of ``ramp``, ``piecewise_affine`` or ``smooth``.  Exactly
    representable data carry ``exact_net``; smooth data carry their
    smoothness ``s`` and a bound ``norm_bound`` on their ``C^s`` norm.
    """

    kind: str
    evaluator: Callable
    n: int = 1
    exact_net: Optional[Network] = None
    s: Optional[int] = None
    norm_bound: Optional[float] = None
    r: Optional[float] = None
    lip: Optional[float] = None
    sup: Optional[float] = None
    derivative_oracle: Optional[Callable] = None
    name: str = "u0"

    def __post_init__(self):
        if self.kind not in ("ramp", "piecewise_affine", "smooth"):
            raise ConfigError(f"unknown initial condition kind '{self.kind}'")
        if self.kind == "smooth" and (self.s is None or self.norm_bound is None):
            raise ConfigError("smooth initial conditions need s and norm_bound")
        if self.r is None:
            self.r = (self.s / self.n) if self.kind == "smooth" else float("inf")
        if not self.r > 0:
            raise ConfigError("approximability exponent r must be positive")

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.asarray(self.evaluator(x), dtype=float).reshape(-1)


def ramp_initial_condition(n: int = 1) -> InitialCondition:
    """``u0(x) = max(0, 1 - |x|_1)`` with its exact three-layer network."""
    rows, cols, vals = [], [], []
    for i in range(n):
        rows += [2 * i, 2 * i + 1]
        cols += [i, i]
        vals += [1.0, -1.0]
    l1 = AffineMap.from_triplets(rows, cols, vals, np.zeros(2 * n), (n,))
    l2 = AffineMap.from_triplets([0] * (2 * n), n + np.arange(2 * n), -np.ones(2 * n), [1.0], (n, 2 * n))
    l3 = AffineMap.from_triplets([0], [3 * n], [1.0], [0.0], (n, 2 * n, 1))
    net = Network(n, [l1, l2, l3])
    return InitialCondition(
        kind="ramp",
        evaluator=lambda x: np.maximum(0.0, 1.0 - np.abs(x).sum(axis=1)),
        n=n,
        exact_net=net,
        lip=math.sqrt(n),
        sup=1.0,
        name="ramp",
    )


def smooth_initial_condition(evaluator, n, s, norm_bound, lip=None, sup=None, derivative_oracle=None, name="u0"):
    return InitialCondition(
        kind="smooth", evaluator=evaluator, n=n, s=s, norm_bound=norm_bound, lip=lip, sup=sup,
        derivative_oracle=derivative_oracle, name=name,
    )


@dataclass
class VectorFieldProblem:
    """Parametric transport problem on ``[0, T] x R^n x [0, 1]^D``.

    ``ck_norms`` maps an order ``j`` to a bound on the ``C^j`` norm of ``V``
    over the working domain; ``growth_C`` is the constant in
    ``|V(t, x, eta)| <= C (1 + |x|)``.  ``lip`` may hold Lipschitz constants
    under the keys ``u0``, ``f`` and ``a``; missing ones are estimated.
    ``f_bounds`` and ``a_bounds`` may hold ``sup`` and ``ck`` (a ``C^k`` bound).
    """

    n: int
    D: int
    T: float
    V: Callable
    u0: InitialCondition
    growth_C: float
    ck_norms: dict
    K_box: tuple
    k: int = 2
    div_V: Optional[Callable] = None
    f: Optional[Callable] = None
    a: Optional[Callable] = None
    lip: dict = field(default_factory=dict)
    f_bounds: dict = field(default_factory=dict)
    a_bounds: dict = field(default_factory=dict)
    allow_fd_divergence: bool = True
    name: str = "problem"

    def __post_init__(self):
        if self.n < 1 or self.D < 0:
            raise ConfigError("need n >= 1 and D >= 0")
        if not self.T > 0:
            raise ConfigError("horizon T must be positive")
        if not self.growth_C > 0:
            raise ConfigError("growth constant must be positive")
        if self.k < 1:
            raise ConfigError("smoothness k must be at least 1")
        lo, hi = (np.asarray(b, dtype=float).reshape(-1) for b in self.K_box)
        if lo.size == 1 and self.n > 1:
            lo, hi = np.full(self.n, lo[0]), np.full(self.n, hi[0])
        if lo.size != self.n or hi.size != self.n or np.any(hi <= lo):
            raise ConfigError("K_box must be a nondegenerate box in R^n")
        self.K_box = (lo, hi)
        if self.u0.n != self.n:
            raise ConfigError("initial condition dimension does not match n")

    @property
    def K_radius(self) -> float:
        """Largest Euclidean norm of a point of ``K_box``."""
        lo, hi = self.K_box
        return float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))

    @property
    def input_dim(self) -> int:
        """Dimension of ``(t, x, eta)``."""
        return 1 + self.n + self.D

    def domain_box(self):
        """Lower and upper corners of ``[0, T] x K x [0, 1]^D``."""
        lo = np.concatenate([[0.0], self.K_box[0], np.zeros(self.D)])
        hi = np.concatenate([[self.T], self.K_box[1], np.ones(self.D)])
        return lo, hi

    def split(self, z):
        """Split points ``(B, 1 + n + D)`` into ``t, x, eta``."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return z[:, 0], z[:, 1 : 1 + self.n], z[:, 1 + self.n :]

    def ck_norm(self, j: int) -> float:
        if j not in self.ck_norms:
            raise CapabilityError(f"no bound on the C^{j} norm of V")
        return float(self.ck_norms[j])


def _divergence_fd(V, t, x, eta):
    h = 1e-6 * (1.0 + np.abs(x))
    div = np.zeros(x.shape[0])
    for i in range(x.shape[1]):
        e = np.zeros_like(x)
        e[:, i] = h[:, i]
        div += (V(t, x + e, eta)[:, i] - V(t, x - e, eta)[:, i]) / (2 * h[:, i])
    return div


class FlowMap:
    """Numerical characteristic flow of a :class:`VectorFieldProblem`.

    Evaluation is stateless apart from the problem handles, so a single
    instance may be shared between threads.
    """

    def __init__(self, problem: VectorFieldProblem, atol: float = 1e-10, rtol: float = 1e-8):
        self.problem = problem
        self.atol = atol
        self.rtol = rtol

    def _broadcast(self, s, t, x, eta):
        p = self.problem
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != p.n and x.shape[0] == p.n and x.shape[1] != p.n:
            x = x.T
        B = x.shape[0]
        s = np.broadcast_to(np.asarray(s, dtype=float), (B,)).copy()
        t = np.broadcast_to(np.asarray(t, dtype=float), (B,)).copy()
        eta = np.asarray(eta, dtype=float)
        if eta.ndim < 2:
            eta = np.broadcast_to(eta.reshape(1, -1) if eta.size else np.zeros((1, p.D)), (B, p.D))
        if eta.shape != (B, p.D):
            raise ConfigError(f"eta must have shape ({B}, {p.D})")
        return s, t, x, np.ascontiguousarray(eta)

    def _velocity(self, tau, y, eta):
        p = self.problem
        v = np.asarray(p.V(tau, y, eta), dtype=float)
        return np.broadcast_to(v.reshape(y.shape[0], -1), y.shape)

    def integrate(self, s, t, x, eta, extras=()):
        """Flow from time ``t`` to time ``s`` with augmented running integrals.

        ``extras`` lists scalar integrands ``g(tau, y, eta)``; for each the
        integral ``int_t^s g(tau, X(tau, t, x, eta), eta) dtau`` is returned.

        Returns
        -------
        (X, integrals) with shapes ``(B, n)`` and ``(B, len(extras))``.
        """
        s, t, x, eta = self._broadcast(s, t, x, eta)
        n = self.problem.n
        span = (s - t)[:, None]

        def rhs(sigma, y):
            tau = t + sigma * (s - t)
            pos = y[:, :n]
            out = np.empty_like(y)
            out[:, :n] = span * self._velocity(tau, pos, eta)
            for j, g in enumerate(extras):
                out[:, n + j] = (s - t) * np.asarray(g(tau, pos, eta), dtype=float).reshape(-1)
            return out

        y0 = np.concatenate([x, np.zeros((x.shape[0], len(extras)))], axis=1)
        y = integrate(rhs, y0, atol=self.atol, rtol=self.rtol)
        return y[:, :n], y[:, n:]

    def divergence(self):
        p = self.problem
        if p.div_V is not None:
            return lambda tau, y, eta: p.div_V(tau, y, eta)
        if not p.allow_fd_divergence:
            raise CapabilityError("div_V is missing and the finite-difference fallback is disabled")
        return lambda tau, y, eta: _divergence_fd(p.V, tau, y, eta)

    def flow(self, s, t, x, eta):
        X, _ = self.integrate(s, t, x, eta)
        return X

    def jacobian_factor(self, s, t, x, eta):
        _, integ = self.integrate(s, t, x, eta, extras=(self.divergence(),))
        return np.exp(integ[:, 0])


def flow(fm: FlowMap, s, t, x, eta) -> np.ndarray:
    """Characteristic flow ``X(s, t, x, eta)``, shape ``(B, n)``."""
    return fm.flow(s, t, x, eta)


def jacobian_factor(fm: FlowMap, s, t, x, eta) -> np.ndarray:
    """``det D_x X(s, t, x, eta)`` from the Liouville formula, shape ``(B,)``."""
    return fm.jacobian_factor(s, t, x, eta)


def reference_solution(problem: VectorFieldProblem, variant: str, t, x, eta, fm: Optional[FlowMap] = None):
    """Ground-truth solution of a transport variant at points ``(t, x, eta)``."""
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant '{variant}'")
    fm = fm or FlowMap(problem)
    extras = []
    if variant == "source":
        if problem.f is None:
            raise CapabilityError("the source variant needs f")
        extras.append(problem.f)
    elif variant == "damped":
        if problem.a is None:
            raise CapabilityError("the damped variant needs a")
        extras.append(problem.a)
    elif variant == "conservative":
        extras.append(fm.divergence())
    X0, integ = fm.integrate(0.0, t, x, eta, extras=tuple(extras))
    base = problem.u0(X0)
    if variant in ("homogeneous", "weak"):
        return base
    # integrals run from t down to 0, hence the sign flips
    if variant == "source":
        return base - integ[:, 0]
    return base * np.exp(integ[:, 0])


# ---------------------------------------------------------------------------
# a priori bounds

def ck_bound(problem: VectorFieldProblem, k: int) -> dict:
    """Bounds ``G0 >= sup |X|``, ``G1`` (first order) and ``Gk`` (order ``k``).

    ``T`` and the norms of ``V`` are clamped to at least one, the convention
    under which the growth estimates are derived.
    """
    C, T, K = problem.growth_C, problem.T, problem.K_radius
    G0 = (K + C * T) * _exp(C * T)
    Tc = max(T, 1.0)
    v1 = max(problem.ck_norm(1), 1.0)
    G1 = max(G0, v1 * _exp(Tc * v1))
    vk = max(problem.ck_norm(k), 1.0)
    try:
        poly = 2.0**k * Tc ** (k - 1) * vk ** (2 * k - 1)
    except OverflowError:
        poly = math.inf
    Gk = max(G0, poly * _exp((2 * k - 1) * Tc * v1))
    return {"G0": G0, "G1": G1, "Gk": Gk}


def _exp(x: float) -> float:
    # bounds may legitimately be astronomically large; report them as infinite
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def hadamard_from_G1(n: int, G1: float) -> float:
    """``n^(n/2) G1^n``: bound on a determinant whose entries are at most ``G1``."""
    try:
        return float(n ** (n / 2) * G1**n)
    except OverflowError:
        return math.inf


def hadamard_J_bound(problem: VectorFieldProblem) -> float:
    """Bound on ``|J|`` from Hadamard's inequality and a first-order flow bound."""
    G0 = ck_bound(problem, 1)["G0"]
    Tc = max(problem.T, 1.0)
    v1 = max(problem.ck_norm(1), 1.0)
    G1 = G0 + 3.0 * v1 * _exp(Tc * v1)
    return hadamard_from_G1(problem.n, G1)


def estimate_lipschitz(fun, lo, hi, samples: int = 10_000, safety: float = 1.5, seed: int = 0) -> float:
    """Largest sampled gradient norm of a scalar function on a box, times ``safety``.

    Gradients are central differences at scrambled Sobol points.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = lo.size
    pts = sobol_points(lo, hi, samples, seed)
    h = 1e-6 * np.maximum(hi - lo, 1e-12)
    grad = np.zeros_like(pts)
    for i in range(d):
        e = np.zeros(d)
        e[i] = h[i]
        grad[:, i] = (np.asarray(fun(pts + e)).reshape(-1) - np.asarray(fun(pts - e)).reshape(-1)) / (2 * h[i])
    return float(safety * np.max(np.linalg.norm(grad, axis=1)))


# ---------------------------------------------------------------------------
# built-in fields

def _const_field(c=0.5, n=1, **_):
    c = float(c)
    return dict(
        V=lambda t, x, eta: np.full(x.shape, c),
        div_V=lambda t, x, eta: np.zeros(x.shape[0]),
        growth_C=max(abs(c), 1e-12),
        norms=lambda G0: {j: abs(c) for j in range(0, 12)},
        n=n,
    )


def _linear_field(lam=1.0, n=1, **_):
    lam = float(lam)
    return dict(
        V=lambda t, x, eta: lam * x,
        div_V=lambda t, x, eta: np.full(x.shape[0], lam * x.shape[1]),
        growth_C=abs(lam),
        # sup of |V| over the reachable ball, derivatives are constant
        norms=lambda G0: {j: abs(lam) * max(G0, 1.0) for j in range(0, 12)},
        n=n,
    )


def _rotation_field(omega=1.0, n=2, **_):
    if n != 2:
        raise ConfigError("the rotation field is planar (n = 2)")
    omega = float(omega)
    return dict(
        V=lambda t, x, eta: omega * np.stack([-x[:, 1], x[:, 0]], axis=1),
        div_V=lambda t, x, eta: np.zeros(x.shape[0]),
        growth_C=abs(omega),
        norms=lambda G0: {j: abs(omega) * max(G0, 1.0) for j in range(0, 12)},
        n=2,
    )


def _param_shear_field(n=1, **_):
    return dict(
        V=lambda t, x, eta: np.repeat(eta.mean(axis=1, keepdims=True), x.shape[1], axis=1),
        div_V=lambda t, x, eta: np.zeros(x.shape[0]),
        growth_C=1.0,
        norms=lambda G0: {j: 1.0 for j in range(0, 12)},
        n=n,
    )


BUILTIN_FIELDS = {
    "const": _const_field,
    "linear": _linear_field,
    "rotation": _rotation_field,
    "param-shear": _param_shear_field,
}


def builtin_problem(name: str, *, n: int = 1, D: int = 1, T: float = 1.0, K_box=(-2.0, 2.0), k: int = 2,
                    u0: Optional[InitialCondition] = None, f=None, a=None, f_bounds=None, a_bounds=None,
                    lip=None, **params) -> VectorFieldProblem:
    """Problem with one of the named velocity fields ``const``, ``linear``, ``rotation``, ``param-shear``.

    Extra keyword arguments (``c``, ``lam``, ``omega``) parametrize the field.
    """
    if name not in BUILTIN_FIELDS:
        raise ConfigError(f"unknown built-in field '{name}'; choose from {sorted(BUILTIN_FIELDS)}")
    spec = BUILTIN_FIELDS[name](n=n, **params)
    n = spec["n"]
    if name == "param-shear" and D < 1:
        raise ConfigError("param-shear needs D >= 1")
    lo, hi = (np.asarray(b, dtype=float).reshape(-1) for b in K_box)
    if lo.size == 1:
        lo, hi = np.full(n, lo[0]), np.full(n, hi[0])
    K = float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))
    C = spec["growth_C"]
    G0 = (K + C * T) * math.exp(C * T)
    return VectorFieldProblem(
        n=n, D=D, T=T, V=spec["V"], div_V=spec["div_V"], u0=u0 or ramp_initial_condition(n),
        growth_C=C, ck_norms=spec["norms"](G0), K_box=(lo, hi), k=k, f=f, a=a,
        f_bounds=dict(f_bounds or {}), a_bounds=dict(a_bounds or {}), lip=dict(lip or {}), name=name,
    )
