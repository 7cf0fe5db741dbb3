"""Parameter dimension versus network size.

The ramp is carried by the mean of D parameters.  The input dimension is
2 + D, yet the weight count grows roughly linearly in D because the flow
is as smooth as it is high dimensional.  A direct approximation of a
Lipschitz function of 2 + D variables would need about eps^-(2 + D).

    python3 demos/dimension_independence.py
"""

import numpy as np

from reluflow.characteristics import VectorFieldProblem, ramp_initial_condition
from reluflow.network import realize
from reluflow.transport import build_homogeneous, validation_lattice

eps = 1e-2
print(f"{'D':>3} {'inputs':>6} {'W':>7} {'error':>9}")
for D in (1, 2, 4, 8):
    problem = VectorFieldProblem(
        n=1, D=D, T=1.0, V=lambda t, x, eta: eta.mean(axis=1, keepdims=True),
        div_V=lambda t, x, eta: np.zeros(x.shape[0]), u0=ramp_initial_condition(1), growth_C=1.0,
        ck_norms={j: 1.0 for j in range(16)}, K_box=(-2.0, 2.0), k=2 + D,
    )
    net, cert = build_homogeneous(problem, eps)
    pts = validation_lattice(problem, 11, 41, 5, max_points=40_000, seed=D)
    ref = np.maximum(0.0, 1.0 - np.abs(pts[:, 1] - pts[:, 2:].mean(axis=1) * pts[:, 0]))
    err = np.max(np.abs(realize(net, pts)[:, 0] - ref))
    print(f"{D:3d} {2 + D:6d} {net.num_weights:7d} {err:9.2e}")
