"""Transport surrogates end to end.

Builds the homogeneous, source and damped surrogates for a ramp carried at
speed 1/2, checks each against the closed-form solution on a lattice and
prints the tolerance split recorded in the certificate.

    python3 demos/transport_end_to_end.py
"""

import numpy as np

from reluflow.characteristics import builtin_problem
from reluflow.network import realize
from reluflow.transport import build_damped, build_homogeneous, build_source, validation_lattice


def ramp(x):
    return np.maximum(0.0, 1.0 - np.abs(x))


one = lambda t, x, eta: np.ones(x.shape[0])
cases = [
    ("homogeneous", build_homogeneous, {}, lambda t, x: ramp(x - 0.5 * t)),
    ("source f=1", build_source, dict(f=one, f_bounds={"sup": 1.0, "c1": 1.0}, lip={"f": 0.0}),
     lambda t, x: ramp(x - 0.5 * t) + t),
    ("damping a=1", build_damped, dict(a=one, a_bounds={"sup": 1.0, "c1": 1.0, "nonnegative": True}, lip={"a": 0.0}),
     lambda t, x: ramp(x - 0.5 * t) * np.exp(-t)),
]
eps = 0.05
for label, builder, extra, exact in cases:
    problem = builtin_problem("const", n=1, D=0, K_box=(-2.0, 2.0), k=3, c=0.5, **extra)
    net, cert = builder(problem, eps)
    pts = validation_lattice(problem, 41, 81)
    err = np.max(np.abs(realize(net, pts)[:, 0] - exact(pts[:, 0], pts[:, 1])))
    deltas = ", ".join(f"{k}={v:.3g}" for k, v in cert.deltas.items())
    print(f"{label:<12} error {err:.2e} (target {eps})  W={net.num_weights}  N={cert.N}")
    print(f"{'':<12} split: {deltas}")
