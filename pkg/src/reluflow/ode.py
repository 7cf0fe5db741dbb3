"""Batched explicit Runge--Kutta integration with Dormand--Prince 5(4) pairs.

The whole batch shares one step sequence, and the error is controlled in the
max norm over every component of every trajectory.  The integration variable
is a rescaled time ``sigma`` running over ``[0, 1]``, so trajectories with
different physical intervals can be advanced together.
"""

from __future__ import annotations

import numpy as np

from .errors import StiffnessError

# Butcher tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def integrate(rhs, y0: np.ndarray, atol: float = 1e-10, rtol: float = 1e-8, h0: float = 0.05,
              h_min: float = 1e-10, max_steps: int = 200_000) -> np.ndarray:
    """Integrate ``dy/dsigma = rhs(sigma, y)`` from ``sigma = 0`` to ``1``.

    Parameters
    ----------
    rhs : callable
        ``rhs(sigma, y)`` with ``y`` of shape ``(B, m)`` returning the same shape.
    y0 : ndarray, shape (B, m)
        Initial states.

    Returns
    -------
    ndarray
        States at ``sigma = 1``.

    Raises
    ------
    StiffnessError
        If the step size drops below ``h_min`` or ``max_steps`` is exceeded.
        The exception carries the last accepted state.
    """
    y = np.array(y0, dtype=np.float64)
    if y.size == 0:
        return y
    sigma = 0.0
    h = min(h0, 1.0)
    k = [None] * 7
    k[0] = rhs(sigma, y)
    steps = 0
    while sigma < 1.0:
        if steps >= max_steps:
            raise StiffnessError(f"exceeded {max_steps} steps at sigma={sigma:.6g}", state=y, sigma=sigma)
        h = min(h, 1.0 - sigma)
        for i in range(1, 7):
            inc = sum(a * k[j] for j, a in enumerate(_A[i]) if a != 0.0)
            k[i] = rhs(sigma + _C[i] * h, y + h * inc)
        y_new = y + h * sum(b * k[j] for j, b in enumerate(_B5) if b != 0.0)
        err_vec = h * sum(e * k[j] for j, e in enumerate(_E) if e != 0.0)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale)) if err_vec.size else 0.0
        if not np.isfinite(err):
            err = np.inf
        if err <= 1.0:
            sigma += h
            y = y_new
            k[0] = k[6]  # first-same-as-last
            steps += 1
            factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        else:
            factor = max(0.1, 0.9 * err ** -0.2) if np.isfinite(err) else 0.1
        h *= factor
        if h < h_min and sigma < 1.0:
            raise StiffnessError(f"step size collapsed to {h:.3g} at sigma={sigma:.6g}", state=y, sigma=sigma)
    return y
