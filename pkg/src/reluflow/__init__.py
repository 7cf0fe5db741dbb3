"""Sparse ReLU network surrogates for parametric transport equations.

The package builds skip-connection ReLU networks that approximate solutions
of linear transport equations ``u_t + V . grad u = ...`` by composing
approximations of the initial datum with approximations of the
characteristic flow.  Submodules:

``network``          storage, realization and serialization
``calculus``         exact composition, parallelization, sums; product gadget
``smooth``           approximation of smooth functions on boxes
``characteristics``  flows, Jacobian factors, reference solutions, a priori bounds
``quadrature``       running Riemann sums emulated inside a network
``transport``        composite builders with error ledgers
``harness``          configuration files, sweeps, scaling fits, reports
"""

from .errors import (
    BuildTooLarge,
    CapabilityError,
    ConfigError,
    DegenerateSweep,
    ParseError,
    ReluFlowError,
    ShapeMismatch,
    StiffnessError,
)
from .network import AffineMap, Network, SizeReport, deserialize, load, realize, save, serialize, size
from .calculus import (
    MulConfig,
    affine_net,
    constant_net,
    identity_net,
    linear_combination,
    multiply_gadget,
    multiply_nets,
    parallelize,
    selector_net,
    sparse_concat,
    sum_nets,
)
from .smooth import ApproxCertificate, SmoothTarget, approx_smooth, approx_univariate_library
from .characteristics import (
    FlowMap,
    InitialCondition,
    VectorFieldProblem,
    builtin_problem,
    ck_bound,
    hadamard_J_bound,
    ramp_initial_condition,
    reference_solution,
    smooth_initial_condition,
)
from .quadrature import clip_net, indicator_net, left_riemann, riemann_net, shift_net
from .transport import (
    BuildCertificate,
    build_conservative,
    build_damped,
    build_homogeneous,
    build_source,
    build_u0_net,
    build_weak,
    measure_error,
    validation_lattice,
)
from .harness import ExperimentConfig, ExperimentResult, fit_scaling, run_sweep

__version__ = "0.1.0"

__all__ = [
    "BuildTooLarge",
    "CapabilityError",
    "ConfigError",
    "DegenerateSweep",
    "ParseError",
    "ReluFlowError",
    "ShapeMismatch",
    "StiffnessError",
    "AffineMap",
    "Network",
    "SizeReport",
    "deserialize",
    "load",
    "realize",
    "save",
    "serialize",
    "size",
    "MulConfig",
    "affine_net",
    "constant_net",
    "identity_net",
    "linear_combination",
    "multiply_gadget",
    "multiply_nets",
    "parallelize",
    "selector_net",
    "sparse_concat",
    "sum_nets",
    "ApproxCertificate",
    "SmoothTarget",
    "approx_smooth",
    "approx_univariate_library",
    "FlowMap",
    "InitialCondition",
    "VectorFieldProblem",
    "builtin_problem",
    "ck_bound",
    "hadamard_J_bound",
    "ramp_initial_condition",
    "reference_solution",
    "smooth_initial_condition",
    "clip_net",
    "indicator_net",
    "left_riemann",
    "riemann_net",
    "shift_net",
    "BuildCertificate",
    "build_conservative",
    "build_damped",
    "build_homogeneous",
    "build_source",
    "build_u0_net",
    "build_weak",
    "measure_error",
    "validation_lattice",
    "ExperimentConfig",
    "ExperimentResult",
    "fit_scaling",
    "run_sweep",
    "__version__",
]
