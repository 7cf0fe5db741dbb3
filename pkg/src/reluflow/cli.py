"""Command-line interface: ``reluflow build|eval|verify|sweep|props``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ReluFlowError
from .harness import (
    ExperimentConfig,
    build_one,
    check_network,
    measure,
    run_sweep,
    validation_set,
)
from .network import load, realize, save
from .props import SUITES

EXIT_FAIL = 1
EXIT_ERROR = 2


def _cmd_build(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    eps = args.epsilon if args.epsilon is not None else cfg.epsilons[0]
    net, cert = build_one(cfg, eps)
    if args.validate:
        pts, ref = validation_set(cfg)
        cert["measured_error"] = measure(net, pts, ref)
        cert["validation_count"] = int(pts.shape[0])
    save(net, args.out)
    cert_path = Path(args.certificate) if args.certificate else Path(str(args.out) + ".cert.json")
    doc = {"config_hash": cfg.config_hash, "epsilon": eps, "certificate": cert}
    cert_path.write_text(json.dumps(doc, sort_keys=True, indent=2, default=_default) + "\n")
    rep = net.size()
    print(f"wrote {args.out}: W={rep.weights} N={rep.neurons} L={rep.layers}; certificate {cert_path}")
    if args.validate:
        ok = cert["measured_error"] <= eps
        print(f"measured sup error {cert['measured_error']:.3e} ({'PASS' if ok else 'FAIL'} at eps={eps:g})")
        return 0 if ok else EXIT_FAIL
    return 0


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _read_points(path, dim):
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    rows = [line.replace(",", " ").split() for line in text.splitlines()]
    rows = [r for r in rows if r and not r[0].startswith("#")]
    try:
        pts = np.array([[float(v) for v in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ReluFlowError(f"points file: {exc}") from None
    pts = pts.reshape(-1, dim) if pts.size else np.zeros((0, dim))
    return pts


def _cmd_eval(args) -> int:
    net = load(args.net)
    pts = _read_points(args.points, net.input_dim)
    out = realize(net, pts) if pts.shape[0] else np.zeros((0, net.output_dim))
    lines = "\n".join(" ".join(f"{v:.17g}" for v in row) for row in out)
    if args.out:
        Path(args.out).write_text(lines + "\n")
    else:
        print(lines)
    return 0


def _cmd_verify(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    net = check_network(cfg, load(args.net))
    eps = args.epsilon if args.epsilon is not None else cfg.epsilons[0]
    pts, ref = validation_set(cfg)
    err = measure(net, pts, ref)
    ok = err <= eps
    print(json.dumps({"config_hash": cfg.config_hash, "epsilon": eps, "measured_sup_error": err,
                      "validation_count": int(pts.shape[0]), "passed": ok}, sort_keys=True))
    return 0 if ok else EXIT_FAIL


def _cmd_sweep(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    res = run_sweep(cfg, parallel=args.parallel, props=not args.no_props, out_dir=args.out_dir)
    print(f"config {cfg.config_hash}  variant {cfg.variant}")
    print(f"{'epsilon':>10} {'error':>11} {'W':>9} {'N':>8} {'L':>5} {'build ms':>10}  status")
    for r in res.rows:
        print(f"{r.epsilon:10.3g} {r.measured_sup_error:11.3e} {r.weights:9d} {r.neurons:8d} {r.layers:5d} "
              f"{r.build_ms:10.0f}  {'PASS' if r.passed else 'FAIL'}")
    if res.fit:
        f = res.fit
        print(f"slope (log-factor removed) {f.slope:.3f}  residual {f.residual:.3f}; "
              f"raw slope {f.raw_slope:.3f}  residual {f.raw_residual:.3f}")
    else:
        print(f"no scaling fit: {res.fit_note}")
    if res.props:
        print(f"calculus properties: {'PASS' if res.props_passed else 'FAIL'}")
    print(f"reports in {res.run_dir}")
    return 0 if res.passed else EXIT_FAIL


def _cmd_props(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    ok = True
    for name in names:
        kwargs = {"seed": args.seed}
        if name == "calculus" and args.pairs is not None:
            kwargs["pairs"] = args.pairs
        for r in SUITES[name](**kwargs):
            print(f"[{name}] {r.line()}")
            ok &= r.passed
    return 0 if ok else EXIT_FAIL


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reluflow", description="ReLU network surrogates for parametric transport equations.")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build one network and write it with its certificate")
    b.add_argument("--config", required=True)
    b.add_argument("--epsilon", type=float, help="accuracy (default: first value of the config)")
    b.add_argument("--out", required=True, help="network file to write")
    b.add_argument("--certificate", help="certificate file (default: <out>.cert.json)")
    b.add_argument("--validate", action="store_true", help="measure the error on the validation grid")
    b.set_defaults(func=_cmd_build)

    e = sub.add_parser("eval", help="apply a serialized network to a points file")
    e.add_argument("--net", required=True)
    e.add_argument("--points", required=True, help="whitespace or comma separated rows, '-' for stdin")
    e.add_argument("--out")
    e.set_defaults(func=_cmd_eval)

    v = sub.add_parser("verify", help="measure a network's error against the configured reference")
    v.add_argument("--config", required=True)
    v.add_argument("--net", required=True)
    v.add_argument("--epsilon", type=float)
    v.set_defaults(func=_cmd_verify)

    s = sub.add_parser("sweep", help="epsilon sweep with scaling fits and reports")
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir", help="override the configured output directory")
    s.add_argument("--parallel", action="store_true", help="build epsilon values in parallel processes")
    s.add_argument("--no-props", action="store_true", help="skip the calculus property suite")
    s.set_defaults(func=_cmd_sweep)

    q = sub.add_parser("props", help="run randomized property suites")
    q.add_argument("--suite", choices=["all", *SUITES], default="all")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--pairs", type=int, help="random network pairs for the calculus suite")
    q.set_defaults(func=_cmd_props)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except ReluFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
