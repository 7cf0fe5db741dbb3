"""Size of smooth-function approximants as the accuracy tightens.

For x^2 on [0, 1] and sin(pi x) sin(pi y) / pi^2 on the unit square the
weight count should grow like eps^(-d/k) with k = 2, up to logarithmic
factors.  The script prints the table and the two fitted slopes.

    python3 demos/smooth_rates.py
"""

import numpy as np

from reluflow.harness import fit_scaling
from reluflow.smooth import SmoothTarget, approx_smooth

targets = [
    SmoothTarget(1, ([0.0], [1.0]), lambda x: x[:, 0] ** 2, 2, 2.0, name="x^2"),
    SmoothTarget(2, ([0.0, 0.0], [1.0, 1.0]),
                 lambda x: np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]) / np.pi**2, 2, 1.0, name="sin sin"),
]
eps_list = [2.0**-j for j in range(3, 9)]

for target in targets:
    print(f"\n{target.name} (d={target.dim}, k={target.k}, expected slope {target.dim / target.k:g})")
    print(f"{'eps':>10} {'measured':>10} {'W':>7} {'grid n':>7}")
    pairs = []
    for eps in eps_list:
        net, cert = approx_smooth(target, eps)
        pairs.append((eps, net.num_weights))
        print(f"{eps:10.4g} {cert.measured_error:10.2e} {net.num_weights:7d} {cert.grid_n:7d}")
    fit = fit_scaling(pairs)
    print(f"slope {fit.slope:.3f} after removing the log factor, raw slope {fit.raw_slope:.3f}")
