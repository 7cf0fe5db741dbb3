"""Sparse ReLU networks with skip connections.

A network maps ``x0 in R^d`` through layers ``1..L``.  Layer ``l`` reads the
concatenation ``[x0; x1; ...; x_{l-1}]`` of the input and all earlier hidden
layers, applies an affine map, and (for ``l < L``) the ReLU.  The last layer is
purely affine.

Size is measured as

* ``W`` -- number of nonzero matrix entries plus nonzero bias entries,
* ``N`` -- input dimension plus the widths of all layers,
* ``L`` -- number of affine layers.
"""

from __future__ import annotations

import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ParseError, ShapeMismatch

__all__ = [
    "AffineMap",
    "Network",
    "SizeReport",
    "realize",
    "size",
    "serialize",
    "deserialize",
    "save",
    "load",
]

FORMAT_TAG = "relunet-v1"

# largest number of state entries (neurons x batch) held at once during realization
_STATE_BUDGET = 20_000_000


def _as_csr(matrix, shape=None) -> sp.csr_matrix:
    if sp.issparse(matrix):
        out = sp.csr_matrix(matrix, dtype=np.float64, copy=True)
    else:
        dense = np.asarray(matrix, dtype=np.float64)
        if dense.ndim != 2:
            raise ShapeMismatch(f"layer matrix must be 2-D, got shape {dense.shape}")
        out = sp.csr_matrix(dense)
    if shape is not None and out.shape != tuple(shape):
        raise ShapeMismatch(f"layer matrix has shape {out.shape}, expected {tuple(shape)}")
    out.sum_duplicates()
    out.eliminate_zeros()
    out.sort_indices()
    return out


class AffineMap:
    """One layer ``z -> A z + b`` acting on the concatenation of earlier blocks.

    Parameters
    ----------
    matrix : array_like or scipy.sparse matrix
        Weight matrix of shape ``(rows, sum(prior_widths))``.
    bias : array_like
        Bias vector of length ``rows``.
    prior_widths : sequence of int
        Widths of the blocks ``[x0, x1, ..., x_{l-1}]`` this layer reads.
    """

    __slots__ = ("matrix", "bias", "prior_widths")

    def __init__(self, matrix, bias, prior_widths: Sequence[int]):
        prior = tuple(int(w) for w in prior_widths)
        if not prior or any(w < 0 for w in prior):
            raise ShapeMismatch(f"invalid prior widths {prior}")
        b = np.array(bias, dtype=np.float64).reshape(-1)
        A = _as_csr(matrix, (b.size, sum(prior)))
        b.setflags(write=False)
        self.matrix = A
        self.bias = b
        self.prior_widths = prior

    @classmethod
    def from_triplets(cls, rows, cols, vals, bias, prior_widths):
        """Build a layer from coordinate lists ``(row, col, value)``."""
        b = np.asarray(bias, dtype=np.float64).reshape(-1)
        shape = (b.size, int(sum(prior_widths)))
        A = sp.coo_matrix(
            (np.asarray(vals, dtype=np.float64), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
            shape=shape,
        )
        return cls(A, b, prior_widths)

    @property
    def rows(self) -> int:
        return self.bias.size

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    @property
    def nnz(self) -> int:
        """Nonzero weights plus nonzero biases."""
        return int(self.matrix.nnz + np.count_nonzero(self.bias))

    def block(self, index: int) -> sp.csr_matrix:
        """Columns of the matrix acting on block ``index`` of the input."""
        start = sum(self.prior_widths[:index])
        return self.matrix[:, start : start + self.prior_widths[index]]

    def __repr__(self):
        return f"AffineMap(rows={self.rows}, prior_widths={self.prior_widths}, nnz={self.nnz})"


@dataclass(frozen=True)
class SizeReport:
    """Size triple of a network."""

    weights: int
    neurons: int
    layers: int

    def as_dict(self) -> dict:
        return {"W": self.weights, "N": self.neurons, "L": self.layers}


class Network:
    """Immutable ReLU network with skip connections.

    Parameters
    ----------
    input_dim : int
        Dimension ``d`` of the input.
    layers : sequence of AffineMap
        Layers ``1..L``; layer ``l`` must read blocks of widths
        ``(d, N_1, ..., N_{l-1})``.
    """

    __slots__ = ("input_dim", "layers", "_widths")

    def __init__(self, input_dim: int, layers: Iterable[AffineMap]):
        input_dim = int(input_dim)
        layers = tuple(layers)
        if input_dim < 1:
            raise ShapeMismatch("input dimension must be positive")
        if not layers:
            raise ShapeMismatch("a network needs at least one layer")
        widths = [input_dim]
        for ell, layer in enumerate(layers, start=1):
            if not isinstance(layer, AffineMap):
                raise TypeError(f"layer {ell} is not an AffineMap")
            if layer.prior_widths != tuple(widths):
                raise ShapeMismatch(
                    f"layer {ell} reads blocks {layer.prior_widths}, but earlier widths are {tuple(widths)}"
                )
            if layer.rows < 1:
                raise ShapeMismatch(f"layer {ell} has no neurons")
            widths.append(layer.rows)
        self.input_dim = input_dim
        self.layers = layers
        self._widths = tuple(widths)

    @property
    def widths(self) -> tuple:
        """``(d, N_1, ..., N_L)``."""
        return self._widths

    @property
    def output_dim(self) -> int:
        return self._widths[-1]

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def num_weights(self) -> int:
        return sum(layer.nnz for layer in self.layers)

    @property
    def num_neurons(self) -> int:
        return sum(self._widths)

    def size(self) -> SizeReport:
        return SizeReport(self.num_weights, self.num_neurons, self.num_layers)

    def __call__(self, x):
        return realize(self, x)

    def __repr__(self):
        s = self.size()
        return f"Network(d={self.input_dim}, out={self.output_dim}, W={s.weights}, N={s.neurons}, L={s.layers})"


def size(net: Network) -> SizeReport:
    """Return ``(W, N, L)`` of ``net``."""
    return net.size()


def _thread_count() -> int:
    raw = os.environ.get("RELU_TRANSPORT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _realize_chunk(net: Network, xT: np.ndarray) -> np.ndarray:
    # xT has shape (d, B); hidden state is stacked block by block in one buffer
    hidden = sum(net.widths[1:-1])
    batch = xT.shape[1]
    state = np.empty((net.input_dim + hidden, batch), dtype=np.float64)
    state[: net.input_dim] = xT
    filled = net.input_dim
    last = net.num_layers - 1
    for ell, layer in enumerate(net.layers):
        pre = layer.matrix @ state[:filled]
        pre += layer.bias[:, None]
        if ell == last:
            return pre
        np.maximum(pre, 0.0, out=pre)
        state[filled : filled + layer.rows] = pre
        filled += layer.rows
    raise AssertionError("unreachable")


def realize(net: Network, x) -> np.ndarray:
    """Evaluate ``net`` on one point (shape ``(d,)``) or a batch (shape ``(B, d)``).

    Returns an array of shape ``(out,)`` or ``(B, out)`` respectively.
    """
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != net.input_dim:
        raise ShapeMismatch(f"expected points of dimension {net.input_dim}, got array of shape {np.shape(x)}")
    batch = arr.shape[0]
    out = np.empty((batch, net.output_dim), dtype=np.float64)
    if batch == 0:
        return out[0] if single else out
    per_point = net.num_neurons
    chunk = max(1, min(batch, _STATE_BUDGET // max(per_point, 1)))
    starts = list(range(0, batch, chunk))

    def work(start):
        stop = min(start + chunk, batch)
        out[start:stop] = _realize_chunk(net, np.ascontiguousarray(arr[start:stop].T)).T

    threads = _thread_count()
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, starts))
    else:
        for start in starts:
            work(start)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# text serialization

def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def serialize(net: Network) -> bytes:
    """Encode ``net`` in the line-oriented ``relunet-v1`` text format.

    Values are written with 17 significant digits, so a round trip through
    :func:`deserialize` reproduces every weight bit for bit.
    """
    buf = io.StringIO()
    buf.write(f"{FORMAT_TAG}\n")
    buf.write(f"input_dim {net.input_dim}\n")
    buf.write(f"layers {net.num_layers}\n")
    for ell, layer in enumerate(net.layers, start=1):
        buf.write(f"layer {ell} rows {layer.rows}\n")
        coo = layer.matrix.tocoo()
        buf.write(f"A {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            buf.write(f"{r} {c} {_fmt(v)}\n")
        nz = np.flatnonzero(layer.bias)
        buf.write(f"b {nz.size}\n")
        for i in nz:
            buf.write(f"{i} {_fmt(layer.bias[i])}\n")
    buf.write("end\n")
    return buf.getvalue().encode("ascii")


class _Lines:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self, what: str) -> list:
        while self.pos < len(self.lines):
            self.pos += 1
            raw = self.lines[self.pos - 1].strip()
            if raw and not raw.startswith("#"):
                return raw.split()
        raise ParseError(f"unexpected end of input while reading {what}", self.pos + 1)

    def fail(self, message: str):
        raise ParseError(message, self.pos)


def _expect(lines: _Lines, key: str, nargs: int) -> list:
    tok = lines.next(key)
    if tok[0] != key or len(tok) != nargs + 1:
        lines.fail(f"expected '{key}' with {nargs} value(s), got '{' '.join(tok)}'")
    return tok[1:]


def _int(lines: _Lines, s: str) -> int:
    try:
        return int(s)
    except ValueError:
        lines.fail(f"expected an integer, got '{s}'")


def _float(lines: _Lines, s: str) -> float:
    try:
        return float(s)
    except ValueError:
        lines.fail(f"expected a number, got '{s}'")


def deserialize(data) -> Network:
    """Inverse of :func:`serialize`.  Accepts ``bytes`` or ``str``.

    Raises
    ------
    ParseError
        On any malformed content; ``offset`` is the line number.
    """
    if isinstance(data, (bytes, bytearray)):
        try:
            text = bytes(data).decode("ascii")
        except UnicodeDecodeError as exc:
            raise ParseError(f"non-ascii content at byte {exc.start}", None) from exc
    else:
        text = str(data)
    lines = _Lines(text)
    header = lines.next("header")
    if header != [FORMAT_TAG]:
        lines.fail(f"missing '{FORMAT_TAG}' header")
    d = _int(lines, _expect(lines, "input_dim", 1)[0])
    count = _int(lines, _expect(lines, "layers", 1)[0])
    if d < 1 or count < 1:
        lines.fail("input_dim and layers must be positive")
    widths = [d]
    layers = []
    for ell in range(1, count + 1):
        tok = lines.next("layer header")
        if len(tok) != 4 or tok[0] != "layer" or tok[2] != "rows" or _int(lines, tok[1]) != ell:
            lines.fail(f"expected 'layer {ell} rows <n>'")
        rows = _int(lines, tok[3])
        if rows < 1:
            lines.fail("layer must have at least one row")
        cols = sum(widths)
        nnz = _int(lines, _expect(lines, "A", 1)[0])
        r = np.empty(nnz, dtype=np.int64)
        c = np.empty(nnz, dtype=np.int64)
        v = np.empty(nnz, dtype=np.float64)
        for j in range(nnz):
            tok = lines.next("matrix entry")
            if len(tok) != 3:
                lines.fail("matrix entry must be 'row col value'")
            r[j], c[j], v[j] = _int(lines, tok[0]), _int(lines, tok[1]), _float(lines, tok[2])
            if not (0 <= r[j] < rows and 0 <= c[j] < cols):
                lines.fail(f"entry ({r[j]}, {c[j]}) outside a {rows}x{cols} matrix")
        bias = np.zeros(rows)
        nb = _int(lines, _expect(lines, "b", 1)[0])
        for _ in range(nb):
            tok = lines.next("bias entry")
            if len(tok) != 2:
                lines.fail("bias entry must be 'index value'")
            i = _int(lines, tok[0])
            if not 0 <= i < rows:
                lines.fail(f"bias index {i} out of range")
            bias[i] = _float(lines, tok[1])
        layers.append(AffineMap.from_triplets(r, c, v, bias, widths))
        widths.append(rows)
    if lines.next("end") != ["end"]:
        lines.fail("expected 'end'")
    return Network(d, layers)


def save(net: Network, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(net))


def load(path) -> Network:
    with open(path, "rb") as fh:
        return deserialize(fh.read())
