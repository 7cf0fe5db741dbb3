"""Exact and approximate calculus on skip-connection ReLU networks.

Exact operations (no approximation error):

* :func:`sparse_concat` -- composition through a sign-split layer,
* :func:`parallelize` -- stacking outputs of networks sharing an input,
* :func:`sum_nets` / :func:`linear_combination` -- affine post-processing,
* :func:`affine_net`, :func:`selector_net`, :func:`const_shift_net`, :func:`identity_net`.

Approximate operation:

* :func:`multiply_nets` -- product of two scalar networks through a sawtooth
  squaring gadget with guaranteed uniform error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, ShapeMismatch
from .network import AffineMap, Network

__all__ = [
    "MulConfig",
    "affine_net",
    "selector_net",
    "const_shift_net",
    "identity_net",
    "constant_net",
    "sparse_concat",
    "parallelize",
    "sum_nets",
    "linear_combination",
    "multiply_gadget",
    "multiply_nets",
    "squaring_levels",
]


def _coo(matrix: sp.csr_matrix):
    c = matrix.tocoo()
    return c.row.astype(np.int64), c.col.astype(np.int64), c.data


def _offsets(widths: Sequence[int]) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(widths)]).astype(np.int64)


# ---------------------------------------------------------------------------
# one-layer networks

def affine_net(matrix, bias=None) -> Network:
    """Single affine layer ``x -> A x + b``."""
    A = sp.csr_matrix(np.atleast_2d(matrix)) if not sp.issparse(matrix) else sp.csr_matrix(matrix)
    rows, cols = A.shape
    b = np.zeros(rows) if bias is None else np.broadcast_to(np.asarray(bias, dtype=float), (rows,))
    return Network(cols, [AffineMap(A, b, (cols,))])


def selector_net(input_dim: int, indices) -> Network:
    """Exact coordinate selection ``x -> x[indices]``."""
    idx = np.atleast_1d(np.asarray(indices, dtype=np.int64))
    if idx.size == 0 or idx.min() < 0 or idx.max() >= input_dim:
        raise ShapeMismatch(f"indices {idx.tolist()} invalid for input dimension {input_dim}")
    A = sp.csr_matrix((np.ones(idx.size), (np.arange(idx.size), idx)), shape=(idx.size, input_dim))
    return affine_net(A)


def const_shift_net(input_dim: int, row, offset: float) -> Network:
    """Scalar affine function ``x -> <row, x> + offset``."""
    r = np.asarray(row, dtype=float).reshape(1, -1)
    if r.shape[1] != input_dim:
        raise ShapeMismatch("row length must equal input dimension")
    return affine_net(r, [offset])


def identity_net(input_dim: int) -> Network:
    return selector_net(input_dim, np.arange(input_dim))


def constant_net(input_dim: int, values) -> Network:
    """Network with zero weights and the given constant output(s)."""
    v = np.atleast_1d(np.asarray(values, dtype=float))
    return affine_net(sp.csr_matrix((v.size, input_dim)), v)


# ---------------------------------------------------------------------------
# exact calculus

def sparse_concat(outer: Network, inner: Network) -> Network:
    """Realize ``outer(inner(x))`` exactly.

    The last layer of ``inner`` is duplicated with opposite signs and passed
    through the ReLU, so that ``y = relu(y) - relu(-y)`` feeds ``outer``.
    The result has ``L = L_outer + L_inner`` and ``W <= 2 W_outer + 2 W_inner``.
    """
    if outer.input_dim != inner.output_dim:
        raise ShapeMismatch(
            f"cannot compose: outer expects {outer.input_dim} inputs, inner produces {inner.output_dim}"
        )
    m = inner.output_dim
    layers = list(inner.layers[:-1])
    last = inner.layers[-1]
    split = AffineMap(sp.vstack([last.matrix, -last.matrix], format="csr"), np.concatenate([last.bias, -last.bias]), last.prior_widths)
    layers.append(split)
    base_widths = list(inner.widths[:-1]) + [2 * m]
    base_cols = sum(base_widths)
    pm_start = base_cols - 2 * m

    for layer in outer.layers:
        r, c, v = _coo(layer.matrix)
        from_input = c < m
        # input entries are split into the positive and negative halves
        r_in, c_in, v_in = r[from_input], c[from_input], v[from_input]
        r_h, c_h, v_h = r[~from_input], c[~from_input], v[~from_input]
        rows = np.concatenate([r_in, r_in, r_h])
        cols = np.concatenate([pm_start + c_in, pm_start + m + c_in, base_cols + c_h - m])
        vals = np.concatenate([v_in, -v_in, v_h])
        widths = base_widths + list(layer.prior_widths[1:])
        layers.append(AffineMap.from_triplets(rows, cols, vals, layer.bias, widths))
    return Network(inner.input_dim, layers)


def parallelize(nets: Sequence[Network]) -> Network:
    """Stack the outputs of networks that share the same input.

    Shallower networks keep their depth: their output rows are placed in the
    final layer, which reads their hidden neurons through skip connections.
    The result has ``W = sum W_i`` and ``L = max L_i``.
    """
    nets = list(nets)
    if not nets:
        raise ShapeMismatch("parallelize needs at least one network")
    d = nets[0].input_dim
    if any(n.input_dim != d for n in nets):
        raise ShapeMismatch("parallelized networks must share the input dimension")
    if len(nets) == 1:
        return nets[0]
    depth = max(n.num_layers for n in nets)
    # hidden layer ell of the composite holds hidden layer ell of every net deeper than ell
    hidden_widths = [sum(n.widths[ell] for n in nets if n.num_layers > ell) for ell in range(1, depth)]
    # column offset of net i's block inside composite hidden layer ell
    block_start = []
    running = [0] * max(depth - 1, 0)
    for n in nets:
        block_start.append(list(running))
        for ell in range(1, n.num_layers):
            running[ell - 1] += n.widths[ell]
    composite_widths = [d] + hidden_widths
    comp_off = _offsets(composite_widths)

    def remap(i: int, layer: AffineMap):
        r, c, v = _coo(layer.matrix)
        own = _offsets(layer.prior_widths)
        blk = np.searchsorted(own, c, side="right") - 1
        new_c = np.empty_like(c)
        for k in range(len(layer.prior_widths)):
            sel = blk == k
            if k == 0:
                new_c[sel] = c[sel]
            else:
                new_c[sel] = comp_off[k] + block_start[i][k - 1] + (c[sel] - own[k])
        return r, new_c, v

    layers = []
    for ell in range(1, depth + 1):
        rows, cols, vals, bias = [], [], [], []
        row0 = 0
        for i, n in enumerate(nets):
            if ell < depth:
                if n.num_layers <= ell:
                    continue
                layer = n.layers[ell - 1]
            else:
                layer = n.layers[-1]
            r, c, v = remap(i, layer)
            rows.append(r + row0)
            cols.append(c)
            vals.append(v)
            bias.append(layer.bias)
            row0 += layer.rows
        layers.append(
            AffineMap.from_triplets(
                np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), np.concatenate(bias), composite_widths[:ell]
            )
        )
    return Network(d, layers)


def linear_combination(net: Network, coeffs, offset=None) -> Network:
    """Replace the output ``y`` of ``net`` by ``C y + c0`` (exact, folded into the last layer)."""
    C = sp.csr_matrix(np.atleast_2d(np.asarray(coeffs, dtype=float))) if not sp.issparse(coeffs) else sp.csr_matrix(coeffs)
    if C.shape[1] != net.output_dim:
        raise ShapeMismatch(f"coefficient matrix has {C.shape[1]} columns, network has {net.output_dim} outputs")
    last = net.layers[-1]
    bias = C @ last.bias
    if offset is not None:
        bias = bias + np.broadcast_to(np.asarray(offset, dtype=float), bias.shape)
    new_last = AffineMap(C @ last.matrix, bias, last.prior_widths)
    return Network(net.input_dim, list(net.layers[:-1]) + [new_last])


def sum_nets(*nets: Network) -> Network:
    """Exact sum of networks with equal input and output dimensions."""
    if len(nets) == 1 and not isinstance(nets[0], Network):
        nets = tuple(nets[0])
    if not nets:
        raise ShapeMismatch("sum_nets needs at least one network")
    out = nets[0].output_dim
    if any(n.output_dim != out for n in nets):
        raise ShapeMismatch("summed networks must have equal output dimension")
    stacked = parallelize(nets)
    C = sp.hstack([sp.identity(out, format="csr")] * len(nets), format="csr")
    return linear_combination(stacked, C)


# ---------------------------------------------------------------------------
# approximate multiplication

@dataclass(frozen=True)
class MulConfig:
    """Accuracy ``epsilon`` and input bound ``M`` of a product gadget."""

    epsilon: float
    M: float

    def __post_init__(self):
        if not (np.isfinite(self.epsilon) and 0 < self.epsilon < 1):
            raise ConfigError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not (np.isfinite(self.M) and self.M > 0):
            raise ConfigError(f"M must be positive, got {self.M}")


def squaring_levels(epsilon: float, M: float) -> tuple:
    """Sawtooth levels ``(m_sum, m_abs)`` for the squarings of ``|x + y|`` and of ``|x|, |y|``.

    The interpolant of ``u -> u^2`` on ``2^m + 1`` dyadic nodes lies above
    the square by at most ``4**-(m+1)``.  In the product identity the first
    squaring enters with a plus sign and the other two with minus signs, so
    the error is at most ``2 M**2 max(E_sum, 2 E_abs)``.
    """
    m_sum = max(1, math.ceil(math.log(M * M / (2.0 * epsilon), 4)))
    m_abs = max(1, math.ceil(math.log(M * M / epsilon, 4)))
    return m_sum, m_abs


def multiply_gadget(cfg: MulConfig) -> Network:
    """Network ``R^2 -> R`` with ``|out(x, y) - x y| <= epsilon`` for ``|x|, |y| <= M``.

    Uses ``x y = 2 M^2 (s(|x + y| / 2M) - s(|x| / 2M) - s(|y| / 2M))`` where
    ``s`` is the piecewise-linear interpolant of ``u -> u^2`` on dyadic
    nodes, written as ``u - sum_s g_s(u) / 4^s`` with the tooth
    ``g(w) = 2 w - 4 relu(w - 1/2)`` iterated ``s`` times.  Each level of a
    chain holds ``a = relu(w)`` and ``b = relu(w - 1/2)``, so ``g = 2a - 4b``.
    """
    m_sum, m_abs = squaring_levels(cfg.epsilon, cfg.M)
    levels = (m_sum, m_abs, m_abs)
    M = float(cfg.M)
    widths = [2, 6]
    # layer 1: relu(+-(x+y)), relu(+-x), relu(+-y)
    l1 = AffineMap(
        np.array([[1, 1], [-1, -1], [1, 0], [-1, 0], [0, 1], [0, -1]], dtype=float), np.zeros(6), (2,)
    )
    layers = [l1]
    scale = 1.0 / (2.0 * M)
    # columns holding (a, b) of the previous level of each chain; level 0 is the abs-value pair
    prev = [[2 + 2 * j, 3 + 2 * j] for j in range(3)]
    placed = [[] for _ in range(3)]
    for level in range(1, max(levels) + 1):
        rows, cols, vals, bias = [], [], [], []
        base = sum(widths)
        row = 0
        for j in range(3):
            if level > levels[j]:
                continue
            coef = [scale, scale] if level == 1 else [2.0, -4.0]
            for shift in (0.0, -0.5):
                rows += [row, row]
                cols += prev[j]
                vals += coef
                bias.append(shift)
                row += 1
            prev[j] = [base + row - 2, base + row - 1]
            placed[j].append(prev[j])
        layers.append(AffineMap.from_triplets(rows, cols, vals, bias, widths))
        widths.append(row)
    # output: s(u) = u - sum_s (2 a_s - 4 b_s) / 4^s, combined with signs (+, -, -)
    out_cols, out_vals = [], []
    for j, sign in enumerate((1.0, -1.0, -1.0)):
        c = 2.0 * M * M * sign
        out_cols += [2 + 2 * j, 3 + 2 * j]
        out_vals += [c * scale, c * scale]
        for level, (ca, cb) in enumerate(placed[j], start=1):
            w = c / 4.0**level
            out_cols += [ca, cb]
            out_vals += [-2.0 * w, 4.0 * w]
    layers.append(AffineMap.from_triplets(np.zeros(len(out_cols), dtype=int), out_cols, out_vals, [0.0], widths))
    return Network(2, layers)


def multiply_nets(first: Network, second: Network, cfg: MulConfig) -> Network:
    """Approximate product of two scalar networks sharing an input.

    If both realizations are bounded by ``cfg.M`` in absolute value, the
    result is within ``cfg.epsilon`` of their product everywhere.
    """
    if first.output_dim != 1 or second.output_dim != 1:
        raise ShapeMismatch("multiply_nets needs scalar-valued networks")
    if first.input_dim != second.input_dim:
        raise ShapeMismatch("multiplied networks must share the input dimension")
    return sparse_concat(multiply_gadget(cfg), parallelize([first, second]))
