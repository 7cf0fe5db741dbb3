"""Experiment driver: configuration files, epsilon sweeps, scaling fits and reports.

A configuration is an INI file.  The ``[experiment]`` section fixes the
variant, the epsilon list, the validation grid and the output location; the
``[problem]`` section names a built-in field or gives one inline; a
``[target]`` section describes a plain function for the ``smooth`` variant.
See the README for the full key list.

Reports written by :func:`write_reports` are byte-identical for a fixed
configuration: wall-clock timings go to a separate ``timings.json``.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .characteristics import (
    BUILTIN_FIELDS,
    VARIANTS,
    FlowMap,
    VectorFieldProblem,
    builtin_problem,
    ck_bound,
    ramp_initial_condition,
    reference_solution,
    smooth_initial_condition,
)
from .errors import ConfigError, DegenerateSweep
from .network import Network, realize
from .props import calculus_suite
from .sampling import sobol_points
from .smooth import SmoothTarget, approx_smooth
from .transport import (
    BUILDERS,
    build_u0_net,
    piecewise_affine_initial_condition,
    validation_lattice,
)

__all__ = [
    "ExperimentConfig",
    "SweepRow",
    "ScalingFit",
    "ExperimentResult",
    "compile_expression",
    "build_one",
    "validation_set",
    "measure",
    "run_sweep",
    "fit_scaling",
    "write_reports",
    "csv_text",
    "gnuplot_text",
    "check_network",
    "CSV_HEADER",
    "EXTRA_VARIANTS",
]

# plain-function approximation and the initial datum alone
EXTRA_VARIANTS = ("smooth", "initial")

CSV_HEADER = ("epsilon", "measured_sup_error", "weights", "neurons", "layers", "passed", "certificate", "config_hash")

_NAMESPACE = {
    name: getattr(np, name)
    for name in (
        "sin", "cos", "tan", "exp", "log", "log1p", "expm1", "sqrt", "abs", "tanh", "sinh", "cosh",
        "arctan", "maximum", "minimum", "where", "clip", "sum", "mean", "prod", "ones_like", "zeros_like",
    )
}
_NAMESPACE.update({"pi": math.pi, "e": math.e, "np": np})


def compile_expression(expr: str, variables: tuple):
    """Compile a numpy expression over the named variables into a callable.

    Only numpy functions and the variables are in scope.  Array variables
    with two axes also expose their columns, so ``x0`` is ``x[:, 0]``.
    """
    try:
        code = compile(expr.strip(), f"<{expr.strip()}>", "eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression '{expr}': {exc.msg}") from None

    def fun(*args):
        scope = dict(_NAMESPACE)
        batch = 1
        for name, val in zip(variables, args):
            val = np.asarray(val, dtype=float)
            scope[name] = val
            if val.ndim == 2:
                batch = val.shape[0]
                for j in range(val.shape[1]):
                    scope[f"{name}{j}"] = val[:, j]
            elif val.ndim == 1:
                batch = val.shape[0]
        try:
            out = eval(code, {"__builtins__": {}}, scope)
        except Exception as exc:  # user expressions fail in many ways
            raise ConfigError(f"evaluating '{expr}' failed: {exc}") from None
        return np.broadcast_to(np.asarray(out, dtype=float), (batch,)).copy()

    return fun


def _vector_expression(text: str, variables: tuple, n: int):
    parts = [p for p in text.split(";") if p.strip()]
    if len(parts) != n:
        raise ConfigError(f"expected {n} ';'-separated components, got {len(parts)}")
    comps = [compile_expression(p, variables) for p in parts]
    return lambda *args: np.stack([c(*args) for c in comps], axis=1)


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"expected numbers, got '{text}'") from None


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "yes", "true", "on"):
        return True
    if v in ("0", "no", "false", "off"):
        return False
    raise ConfigError(f"expected a boolean, got '{text}'")


@dataclass
class ExperimentConfig:
    """Parsed experiment configuration.

    ``sections`` keeps the raw key/value text of every section; the hash of
    its canonical form identifies the experiment in every artifact.
    """

    variant: str
    epsilons: tuple
    sections: dict
    name: str = "experiment"
    seed: int = 0
    bounds: str = "estimated"
    grid_t: int = 41
    grid_x: int = 41
    grid_eta: int = 9
    max_points: int = 100_000
    output_dir: str = "out"
    gnuplot: bool = True
    props_pairs: int = 50
    base_dir: str = "."

    def __post_init__(self):
        if self.variant not in VARIANTS + EXTRA_VARIANTS:
            raise ConfigError(f"unknown variant '{self.variant}'")
        eps = tuple(float(e) for e in self.epsilons)
        if not eps:
            raise ConfigError("the epsilon list is empty")
        if any(not (0.0 < e < 1.0) for e in eps):
            raise ConfigError("epsilon values must lie in (0, 1)")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("epsilon values must be strictly decreasing")
        self.epsilons = eps
        if self.bounds not in ("estimated", "certified"):
            raise ConfigError("bounds must be 'estimated' or 'certified'")
        if min(self.grid_t, self.grid_x, self.grid_eta) < 2:
            raise ConfigError("grid densities must be at least 2")

    # -- parsing ---------------------------------------------------------
    @classmethod
    def from_string(cls, text: str, base_dir: str = ".") -> "ExperimentConfig":
        # V components are ';'-separated, so only '#' starts an inline comment
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed configuration: {exc}") from None
        sections = {s: {k: v.strip() for k, v in parser[s].items()} for s in parser.sections()}
        return cls.from_sections(sections, base_dir=base_dir)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc.strerror}") from None
        return cls.from_string(text, base_dir=str(path.parent))

    @classmethod
    def from_sections(cls, sections: dict, base_dir: str = ".") -> "ExperimentConfig":
        exp = dict(sections.get("experiment", {}))
        if "variant" not in exp:
            raise ConfigError("[experiment] needs a variant")
        if "epsilons" not in exp:
            raise ConfigError("[experiment] needs an epsilons list")
        kwargs = dict(
            variant=exp["variant"],
            epsilons=tuple(_floats(exp["epsilons"])),
            sections={s: dict(v) for s, v in sections.items()},
            base_dir=base_dir,
        )
        ints = ("seed", "grid_t", "grid_x", "grid_eta", "max_points", "props_pairs")
        for key in ints:
            if key in exp:
                try:
                    kwargs[key] = int(exp[key])
                except ValueError:
                    raise ConfigError(f"{key} must be an integer") from None
        for key in ("name", "bounds", "output_dir"):
            if key in exp:
                kwargs[key] = exp[key]
        if "gnuplot" in exp:
            kwargs["gnuplot"] = _bool(exp["gnuplot"])
        return cls(**kwargs)

    # -- identity --------------------------------------------------------
    def canonical(self) -> dict:
        return {s: dict(sorted(v.items())) for s, v in sorted(self.sections.items())}

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def output_root(self) -> Path:
        out = Path(self.output_dir)
        return out if out.is_absolute() else (Path(self.base_dir) / out).resolve()

    # -- problem construction -------------------------------------------
    def problem(self) -> VectorFieldProblem:
        """The transport problem of the ``[problem]`` section."""
        sec = dict(self.sections.get("problem", {}))
        if not sec:
            raise ConfigError("missing [problem] section")
        get = sec.get
        name = get("field", "param-shear")
        n = int(get("n", 2 if name == "rotation" else 1))
        D = int(get("d", 1 if name == "param-shear" else 0))
        T = float(get("t", 1.0))
        k = int(get("k", 2))
        K = _floats(get("k_box", "-2, 2"))
        if len(K) != 2:
            raise ConfigError("k_box takes two numbers: lower, upper")
        u0 = self._initial_condition(sec, n)
        tx = ("t", "x", "eta")
        f = compile_expression(get("f"), tx) if "f" in sec else None
        a = compile_expression(get("a"), tx) if "a" in sec else None
        f_bounds, a_bounds, lip = {}, {}, {}
        for prefix, store in (("f", f_bounds), ("a", a_bounds)):
            for key in ("sup", "c1", "ck"):
                if f"{prefix}_{key}" in sec:
                    store[key] = float(sec[f"{prefix}_{key}"])
            if f"{prefix}_k" in sec:
                store["k"] = int(sec[f"{prefix}_k"])
            if f"{prefix}_lip" in sec:
                lip[prefix] = float(sec[f"{prefix}_lip"])
        if "a_nonnegative" in sec:
            a_bounds["nonnegative"] = _bool(sec["a_nonnegative"])
        if "u0_lip" in sec:
            lip["u0"] = float(sec["u0_lip"])
        if name in BUILTIN_FIELDS:
            params = {p: float(sec[p]) for p in ("c", "lam", "omega") if p in sec}
            return builtin_problem(name, n=n, D=D, T=T, K_box=tuple(K), k=k, u0=u0, f=f, a=a,
                                   f_bounds=f_bounds, a_bounds=a_bounds, lip=lip, **params)
        if name != "inline":
            raise ConfigError(f"unknown problem key '{name}'; choose from {sorted(BUILTIN_FIELDS)} or 'inline'")
        for key in ("v", "growth_c", "ck_norm"):
            if key not in sec:
                raise ConfigError(f"an inline field needs '{key}'")
        V = _vector_expression(sec["v"], tx, n)
        div_V = compile_expression(sec["div_v"], tx) if "div_v" in sec else None
        norm = float(sec["ck_norm"])
        return VectorFieldProblem(
            n=n, D=D, T=T, V=V, u0=u0, growth_C=float(sec["growth_c"]),
            ck_norms={j: norm for j in range(0, 12)}, K_box=(K[0], K[1]), k=k, div_V=div_V, f=f, a=a,
            lip=lip, f_bounds=f_bounds, a_bounds=a_bounds, name="inline",
        )

    @staticmethod
    def _initial_condition(sec, n):
        kind = sec.get("u0", "ramp")
        if kind == "ramp":
            return ramp_initial_condition(n)
        if kind == "piecewise":
            if n != 1:
                raise ConfigError("piecewise initial data are one-dimensional")
            return piecewise_affine_initial_condition(_floats(sec.get("u0_breakpoints", "")),
                                                      _floats(sec.get("u0_values", "")))
        for key in ("u0_s", "u0_norm"):
            if key not in sec:
                raise ConfigError(f"an inline initial condition needs '{key}'")
        fun = compile_expression(kind, ("x",))
        return smooth_initial_condition(
            fun, n, int(sec["u0_s"]), float(sec["u0_norm"]),
            lip=float(sec["u0_lip"]) if "u0_lip" in sec else None,
            sup=float(sec["u0_sup"]) if "u0_sup" in sec else None, name="u0",
        )

    def target(self) -> SmoothTarget:
        """The plain function of the ``[target]`` section (``smooth`` variant)."""
        sec = dict(self.sections.get("target", {}))
        for key in ("f", "dim", "k", "norm_bound"):
            if key not in sec:
                raise ConfigError(f"[target] needs '{key}'")
        dim = int(sec["dim"])
        lo = _floats(sec.get("lo", "0"))
        hi = _floats(sec.get("hi", "1"))
        lo = lo * dim if len(lo) == 1 else lo
        hi = hi * dim if len(hi) == 1 else hi
        fun = compile_expression(sec["f"], ("x",))
        return SmoothTarget(dim, (np.array(lo), np.array(hi)), fun, int(sec["k"]), float(sec["norm_bound"]),
                            name=sec.get("name", "target"))


@dataclass
class SweepRow:
    epsilon: float
    measured_sup_error: float
    weights: int
    neurons: int
    layers: int
    build_ms: float
    eval_ms: float
    certificate: dict = field(repr=False, default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.measured_sup_error <= self.epsilon)

    @property
    def digest(self) -> str:
        blob = json.dumps(self.certificate, sort_keys=True, default=_json_default).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class ScalingFit:
    """Least-squares fit of ``log W`` against ``log(1/eps)``.

    ``slope`` is fitted after dividing ``W`` by ``ln(1/eps) + 1``;
    ``raw_slope`` is the plain fit.  Residuals are root-mean-square in
    ``log W``.
    """

    slope: float
    intercept: float
    residual: float
    raw_slope: float
    raw_intercept: float
    raw_residual: float
    points: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    fit: Optional[ScalingFit] = None
    fit_note: str = ""
    props: list = field(default_factory=list)
    run_dir: Optional[Path] = None

    @property
    def props_passed(self) -> bool:
        return all(p.passed for p in self.props)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows) and self.props_passed

    def report(self) -> dict:
        """Structured report without wall-clock data."""
        return {
            "config_hash": self.config.config_hash,
            "config": self.config.canonical(),
            "variant": self.config.variant,
            "rows": [
                {
                    "epsilon": r.epsilon,
                    "measured_sup_error": r.measured_sup_error,
                    "weights": r.weights,
                    "neurons": r.neurons,
                    "layers": r.layers,
                    "passed": r.passed,
                    "certificate_digest": r.digest,
                }
                for r in self.rows
            ],
            "fit": self.fit.as_dict() if self.fit else None,
            "fit_note": self.fit_note,
            "props": [{"name": p.name, "passed": p.passed, "detail": p.detail} for p in self.props],
            "passed": self.passed,
        }


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "as_dict"):
        return o.as_dict()
    return str(o)


# ---------------------------------------------------------------------------
# building and measuring

def build_one(config: ExperimentConfig, epsilon: float):
    """Build the network of ``config`` at accuracy ``epsilon``.

    Returns ``(Network, certificate dict)``.
    """
    smooth_kwargs = {"max_validation": 20_000, "seed": config.seed}
    smooth_bounds = "estimated" if config.bounds == "estimated" else "declared"
    if config.variant == "smooth":
        net, cert = approx_smooth(config.target(), epsilon, bounds=smooth_bounds, seed=config.seed,
                                  max_validation=config.max_points)
        return net, cert.as_dict()
    problem = config.problem()
    if config.variant == "initial":
        G = ck_bound(problem, 1)["G0"]
        kw = {"bounds": smooth_bounds, "seed": config.seed} if problem.u0.exact_net is None else {}
        net, cert = build_u0_net(problem.u0, epsilon, G, **kw)
        return net, ({"exact": True} if cert is None else cert.as_dict()) | {"G": G}
    builder = BUILDERS[config.variant]
    net, cert = builder(problem, epsilon, bounds=config.bounds, smooth_kwargs=smooth_kwargs)
    return net, cert.as_dict()


def validation_set(config: ExperimentConfig):
    """Validation points and the matching reference values."""
    if config.variant == "smooth":
        target = config.target()
        d = target.dim
        if d <= 3:
            per_axis = max(2, min(config.grid_x, int(config.max_points ** (1.0 / d))))
            axes = [np.linspace(target.lo[i], target.hi[i], per_axis) for i in range(d)]
            pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        else:
            pts = sobol_points(target.lo, target.hi, config.max_points, config.seed)
        return pts, target(pts)
    problem = config.problem()
    if config.variant == "initial":
        G = ck_bound(problem, 1)["G0"]
        n = problem.n
        if n <= 3:
            axes = [np.linspace(-G, G, config.grid_x)] * n
            pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        else:
            pts = sobol_points(np.full(n, -G), np.full(n, G), config.max_points, config.seed)
        return pts, problem.u0(pts)
    pts = validation_lattice(problem, config.grid_t, config.grid_x, config.grid_eta, config.max_points, config.seed)
    t, x, eta = problem.split(pts)
    return pts, reference_solution(problem, config.variant, t, x, eta, fm=FlowMap(problem))


def measure(net: Network, points, reference, chunk: int = 20_000) -> float:
    """Sup of ``|net - reference|`` over the points."""
    if net.input_dim != points.shape[1]:
        raise ConfigError(f"network expects {net.input_dim} inputs, validation points have {points.shape[1]}")
    worst = 0.0
    for s in range(0, points.shape[0], chunk):
        out = realize(net, points[s : s + chunk])[:, 0]
        worst = max(worst, float(np.max(np.abs(out - reference[s : s + chunk]))))
    return worst


def _sweep_one(config: ExperimentConfig, epsilon: float, points=None, reference=None) -> SweepRow:
    if points is None:
        points, reference = validation_set(config)
    t0 = time.perf_counter()
    net, cert = build_one(config, epsilon)
    t1 = time.perf_counter()
    err = measure(net, points, reference)
    t2 = time.perf_counter()
    cert = dict(cert)
    cert["measured_error"] = err
    cert["validation_count"] = int(points.shape[0])
    rep = net.size()
    return SweepRow(epsilon, err, rep.weights, rep.neurons, rep.layers, 1e3 * (t1 - t0), 1e3 * (t2 - t1), cert)


def _worker_count() -> int:
    raw = os.environ.get("RELU_TRANSPORT_THREADS")
    cap = os.cpu_count() or 1
    if raw:
        try:
            cap = max(1, int(raw))
        except ValueError:
            pass
    return cap


def run_sweep(config: ExperimentConfig, *, write: bool = True, parallel: bool = False, props: bool = True,
              out_dir=None) -> ExperimentResult:
    """Build and validate one network per epsilon, fit the size scaling and write reports.

    Builds run in order of decreasing epsilon; ``parallel`` distributes them
    over processes (capped by ``RELU_TRANSPORT_THREADS``).
    """
    if config.variant not in EXTRA_VARIANTS and "problem" not in config.sections:
        raise ConfigError("missing [problem] section")
    root = Path(out_dir) if out_dir is not None else config.output_root()
    if write:
        _check_writable(root)
    if parallel and len(config.epsilons) > 1:
        with ProcessPoolExecutor(max_workers=min(_worker_count(), len(config.epsilons))) as pool:
            rows = list(pool.map(_sweep_one, [config] * len(config.epsilons), config.epsilons))
    else:
        points, reference = validation_set(config)
        rows = [_sweep_one(config, eps, points, reference) for eps in config.epsilons]
    result = ExperimentResult(config=config, rows=rows)
    try:
        result.fit = fit_scaling(result)
    except DegenerateSweep as exc:
        result.fit_note = str(exc)
    if props and config.props_pairs > 0:
        result.props = calculus_suite(pairs=config.props_pairs, seed=config.seed)
    if write:
        write_reports(result, root)
    return result


def fit_scaling(result) -> ScalingFit:
    """Slopes of ``log W`` against ``log(1/eps)``; needs at least four sweep points.

    ``result`` is an :class:`ExperimentResult` or a sequence of
    ``(epsilon, weights)`` pairs.
    """
    pairs = [(r.epsilon, r.weights) for r in result.rows] if isinstance(result, ExperimentResult) else list(result)
    if len(pairs) < 4:
        raise DegenerateSweep(f"a scaling fit needs at least 4 sweep points, got {len(pairs)}")
    eps = np.array([p[0] for p in pairs], dtype=float)
    W = np.array([p[1] for p in pairs], dtype=float)
    if np.unique(eps).size < 2 or np.any(W <= 0):
        raise DegenerateSweep("the sweep needs distinct epsilons and positive sizes")
    u = np.log(1.0 / eps)

    def line(y):
        slope, intercept = np.polyfit(u, y, 1)
        resid = float(np.sqrt(np.mean((y - (slope * u + intercept)) ** 2)))
        return float(slope), float(intercept), resid

    s, c, r = line(np.log(W) - np.log(u + 1.0))
    rs, rc, rr = line(np.log(W))
    return ScalingFit(s, c, r, rs, rc, rr, len(pairs))


# ---------------------------------------------------------------------------
# reports

def _check_writable(root: Path):
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {root}: {exc.strerror}") from None
    if not os.access(root, os.W_OK):
        raise ConfigError(f"output directory {root} is not writable")


def _new_run_dir(base: Path) -> Path:
    base.mkdir(parents=True, exist_ok=True)
    index = 1 + max((int(p.name[4:]) for p in base.glob("run-[0-9][0-9][0-9]*") if p.name[4:].isdigit()), default=0)
    while True:
        path = base / f"run-{index:03d}"
        try:
            path.mkdir()
            return path
        except FileExistsError:
            index += 1


def csv_text(result: ExperimentResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    h = result.config.config_hash
    for r in result.rows:
        w.writerow([repr(r.epsilon), repr(r.measured_sup_error), r.weights, r.neurons, r.layers,
                    int(r.passed), r.digest, h])
    return buf.getvalue()


def gnuplot_text(result: ExperimentResult) -> str:
    lines = [f"# config_hash {result.config.config_hash}",
             "# epsilon log(1/epsilon) weights log(weights) measured_sup_error layers"]
    for r in result.rows:
        lines.append(f"{r.epsilon!r} {math.log(1 / r.epsilon)!r} {r.weights} {math.log(r.weights)!r} "
                     f"{r.measured_sup_error!r} {r.layers}")
    return "\n".join(lines) + "\n"


def write_reports(result: ExperimentResult, root) -> Path:
    """Write CSV, JSON report, certificates, timings and (optionally) gnuplot data to a fresh run directory.

    The directory is ``root/<config hash>/run-NNN``; earlier runs are never
    touched.
    """
    root = Path(root)
    _check_writable(root)
    cfg = result.config
    run = _new_run_dir(root / cfg.config_hash)
    (run / "results.csv").write_text(csv_text(result))
    (run / "report.json").write_text(json.dumps(result.report(), sort_keys=True, indent=2, default=_json_default) + "\n")
    certs = run / "certificates"
    certs.mkdir()
    for i, r in enumerate(result.rows):
        doc = {"config_hash": cfg.config_hash, "epsilon": r.epsilon, "certificate": r.certificate}
        (certs / f"eps-{i:02d}.json").write_text(json.dumps(doc, sort_keys=True, indent=2, default=_json_default) + "\n")
    if cfg.gnuplot:
        (run / "sweep.dat").write_text(gnuplot_text(result))
    timings = {"config_hash": cfg.config_hash,
               "rows": [{"epsilon": r.epsilon, "build_ms": r.build_ms, "eval_ms": r.eval_ms} for r in result.rows]}
    (run / "timings.json").write_text(json.dumps(timings, indent=2) + "\n")
    result.run_dir = run
    return run


def check_network(config: ExperimentConfig, net: Network):
    """Check that ``net`` takes the inputs the configuration's validation set provides."""
    expected = config.target().dim if config.variant == "smooth" else (
        config.problem().n if config.variant == "initial" else config.problem().input_dim)
    if net.input_dim != expected:
        raise ConfigError(f"network takes {net.input_dim} inputs, the configuration needs {expected}")
    return net

