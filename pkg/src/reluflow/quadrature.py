"""Networks emulating a running left Riemann sum in the time variable.

For a network ``phi`` with input ``(t, x)`` and nodes ``t_i = i T / N`` the
network :func:`riemann_net` realizes, up to ``3 a_bar / N``,

    (1/N) * sum_{i : t_i < t} phi(t_i, x).

Each summand is switched on by a clipped indicator: below ``t_i`` it
contributes nothing, above ``t_{i+1}`` it contributes the frozen value
``phi(t_i, x)``, and in between it stays bounded by ``2 a_bar``.

The sum carries the weight ``1/N`` regardless of ``T``; callers that want the
integral ``int_0^t`` fold an extra factor ``T`` into the output layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .calculus import affine_net, linear_combination, parallelize, sparse_concat
from .errors import ConfigError, ShapeMismatch
from .network import AffineMap, Network

__all__ = [
    "RiemannNetCertificate",
    "indicator_net",
    "shift_net",
    "clip_net",
    "riemann_net",
    "left_riemann",
    "left_riemann_integral",
]


@dataclass(frozen=True)
class RiemannNetCertificate:
    N: int
    a_bar: float
    c3: float
    T: float

    def as_dict(self) -> dict:
        return {"N": self.N, "a_bar": self.a_bar, "c3": self.c3, "T": self.T}


def _check_index(i, N):
    if not (isinstance(N, (int, np.integer)) and N >= 1):
        raise ConfigError(f"N must be a positive integer, got {N}")
    if not (0 <= i <= N - 1):
        raise ConfigError(f"index {i} outside 0..{N - 1}")


def indicator_net(i: int, N: int, T: float, input_dim: int) -> Network:
    """Ramp from 0 at ``t <= t_i`` to 1 at ``t >= t_{i+1}``, reading the first input.

    Three layers: ``relu(t)``, then ``relu(t - t_i)`` and ``relu(t - t_{i+1})``,
    then their scaled difference.  Seven weights (six when ``t_i = 0``).
    """
    _check_index(i, N)
    t_i, t_next = i * T / N, (i + 1) * T / N
    slope = N / T
    d = input_dim
    l1 = AffineMap.from_triplets([0], [0], [1.0], [0.0], (d,))
    l2 = AffineMap.from_triplets([0, 1], [d, d], [1.0, 1.0], [-t_i, -t_next], (d, 1))
    l3 = AffineMap.from_triplets([0, 0], [d + 1, d + 2], [slope, -slope], [0.0], (d, 1, 2))
    return Network(d, [l1, l2, l3])


def shift_net(phi: Network, i: int, N: int, T: float) -> Network:
    """``(t, x) -> phi(t_i, x)``: the time input is replaced by the constant ``t_i``."""
    _check_index(i, N)
    d = phi.input_dim
    A = sp.diags(np.r_[0.0, np.ones(d - 1)], format="csr")
    b = np.zeros(d)
    b[0] = i * T / N
    return sparse_concat(phi, affine_net(A, b))


def clip_net(phi: Network, i: int, N: int, T: float, a_bar: float, _shift=None) -> Network:
    """Summand ``relu(2a ind + shift - a) - relu(2a ind - a)`` with ``a = a_bar``.

    Equals 0 for ``t <= t_i`` and ``phi(t_i, x)`` for ``t >= t_{i+1}``
    whenever ``|phi| <= a_bar``; in between it is bounded by ``2 a_bar``.
    """
    if phi.output_dim != 1:
        raise ShapeMismatch("clip_net needs a scalar network")
    if not a_bar > 0:
        raise ConfigError("a_bar must be positive")
    shifted = _shift if _shift is not None else shift_net(phi, i, N, T)
    ind = indicator_net(i, N, T, phi.input_dim)
    a = float(a_bar)
    l1 = AffineMap(np.array([[2 * a, 1.0], [2 * a, 0.0]]), [-a, -a], (2,))
    l2 = AffineMap.from_triplets([0, 0], [2, 3], [1.0, -1.0], [0.0], (2, 2))
    gate = Network(2, [l1, l2])
    return sparse_concat(gate, parallelize([ind, shifted]))


def riemann_net(phi: Network, N: int, T: float, a_bar: float):
    """Network whose realization tracks ``(1/N) sum_{t_i < t} phi(t_i, x)`` within ``3 a_bar / N``.

    Returns ``(Network, RiemannNetCertificate)``.
    """
    if not (isinstance(N, (int, np.integer)) and N >= 1):
        raise ConfigError(f"N must be a positive integer, got {N}")
    if not T > 0:
        raise ConfigError("T must be positive")
    clips = [clip_net(phi, i, N, T, a_bar) for i in range(N)]
    total = linear_combination(parallelize(clips), np.full((1, N), 1.0 / N))
    return total, RiemannNetCertificate(N=int(N), a_bar=float(a_bar), c3=3.0 * float(a_bar), T=float(T))


def left_riemann(f, N: int, T: float, t, x=None):
    """``(1/N) sum_{i : t_i < t} f(t_i, x)`` with ``t_i = i T / N``.

    ``f`` takes ``(tau, x)`` with ``tau`` of shape ``(B,)``; when ``x`` is
    ``None`` it is called as ``f(tau)``.  ``t`` may be a scalar or an array.
    """
    return _riemann(f, N, T, t, x, 1.0 / N)


def left_riemann_integral(f, N: int, T: float, t, x=None):
    """Time-step weighted sum ``(T/N) sum_{i : t_i < t} f(t_i, x)``, a quadrature for ``int_0^t f``."""
    return _riemann(f, N, T, t, x, T / N)


def _riemann(f, N, T, t, x, weight):
    if not (isinstance(N, (int, np.integer)) and N >= 1):
        raise ConfigError(f"N must be a positive integer, got {N}")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    total = np.zeros(t.shape[0])
    for i in range(N):
        t_i = i * T / N
        active = t_i < t
        if not np.any(active):
            continue
        tau = np.full(t.shape[0], t_i)
        vals = np.asarray(f(tau) if x is None else f(tau, x), dtype=float).reshape(-1)
        vals = np.broadcast_to(vals, total.shape)
        total += np.where(active, vals, 0.0)
    return weight * total
