"""Command line front end: ``rwrs <subcommand> ...``.

Exit codes: 0 when every check passes (or nothing is checked), 1 when any
check fails, 2 for configuration or usage errors.
"""

import argparse
import csv
import json
import sys

from . import complexity, exact_kernels, limit_laws
from .errors import ConfigurationError, DomainError, ResourceError, UsageError
from .experiment import load_config, run_config
from .reports import FAIL, emit_report
from .trajectory import run_trajectory
from .walk_models import build_model

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _ints(text):
    return [int(float(x)) for x in text.replace(",", " ").split()]


def _floats(text):
    return [float(x) for x in text.replace(",", " ").split()]


def _vector(text):
    v = _ints(text)
    return v[0] if len(v) == 1 else tuple(v)


def build_parser():
    p = argparse.ArgumentParser(prog="rwrs", description="Random walk in random scenery lab")
    sub = p.add_subparsers(dest="command", required=True)

    mi = sub.add_parser("model", help="model utilities")
    mi_sub = mi.add_subparsers(dest="action", required=True)
    info = mi_sub.add_parser("info", help="print model constants as JSON")
    info.add_argument("name")

    sim = sub.add_parser("simulate", help="simulate one trajectory, print snapshot records")
    sim.add_argument("--model", required=True)
    sim.add_argument("--n", type=lambda s: int(float(s)), required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--checkpoints", type=_ints)
    sim.add_argument("--powers", type=_ints, default=[0, 1, 2])
    sim.add_argument("--shift", type=_vector, action="append", default=[])

    chk = sub.add_parser("check", help="run one limit-law check")
    chk.add_argument("name", choices=["range_law", "localtime_law", "moment", "shifted_moment",
                                      "variance_scaling", "folner", "smb"])
    chk.add_argument("--model", required=True)
    chk.add_argument("--n-list", type=_ints, required=True)
    chk.add_argument("--replicas", type=int, default=8)
    chk.add_argument("--seed", type=int, default=0)
    chk.add_argument("--k-list", type=_ints, default=[2, 3])
    chk.add_argument("--k", type=int, default=2)
    chk.add_argument("--alpha", type=int, default=1)
    chk.add_argument("--w", type=_vector)
    chk.add_argument("--allow-periodic", action="store_true")
    chk.add_argument("--m-samples", type=lambda s: int(float(s)), default=100_000)
    chk.add_argument("--probs", type=_floats, default=[0.5, 0.5])
    chk.add_argument("--workers", type=int, default=1)
    chk.add_argument("--format", choices=["csv", "json", "svg"], default="json")
    chk.add_argument("--out")

    orc = sub.add_parser("oracle", help="evaluate an exact kernel (CSV output)")
    orc.add_argument("kernel", choices=["return_prob", "green", "resolvent",
                                        "resolvent_series", "srw_return"])
    orc.add_argument("--model", default="zeta1d")
    orc.add_argument("--m", type=_ints, default=[2])
    orc.add_argument("--w", type=_vector)
    orc.add_argument("--n", type=lambda s: int(float(s)), default=1000)
    orc.add_argument("--lam", type=float, default=0.99)
    orc.add_argument("--method", choices=["quadrature", "convolution_dp"])

    cx = sub.add_parser("complexity", help="normalized log Phi along one trajectory")
    cx.add_argument("--model", default="srw2d")
    cx.add_argument("--probs", type=_floats, default=[0.5, 0.5])
    cx.add_argument("--eps", type=float, default=0.1)
    cx.add_argument("--n-list", type=_ints, default=[10**4, 10**5, 10**6])
    cx.add_argument("--seed", type=int, default=0)

    rep = sub.add_parser("report", help="run every check in an INI config")
    rep.add_argument("config")
    rep.add_argument("--no-cache", action="store_true")
    rep.add_argument("--format", choices=["csv", "json", "svg"], default="csv",
                     help="format echoed to stdout (all three are written to output_dir)")
    return p


def _model_info(args):
    print(json.dumps(build_model(args.name).info(), indent=2))
    return EXIT_OK


def _simulate(args):
    model = build_model(args.model)
    run = run_trajectory(model, args.n, args.seed, checkpoints=args.checkpoints,
                         powers=args.powers, shifts=args.shift)
    for s in run.stats:
        print(json.dumps(s.to_record(model.name, args.seed), sort_keys=True))
    return EXIT_OK


def _check(args):
    model = build_model(args.model)
    w = args.w if args.w is not None else (1 if model.dimension == 1 else (1, 0))
    common = dict(workers=args.workers)
    name = args.name
    if name == "range_law":
        rep = limit_laws.range_law_check(model, args.n_list, args.replicas, args.seed, **common)
    elif name == "localtime_law":
        rep = limit_laws.localtime_law_check(model, args.n_list, args.m_samples, seed=args.seed)
    elif name == "moment":
        rep = limit_laws.moment_check(model, args.n_list, args.k_list, args.replicas,
                                      args.seed, **common)
    elif name == "shifted_moment":
        rep = limit_laws.shifted_moment_check(model, args.n_list, args.alpha, w, args.replicas,
                                              args.seed, allow_periodic=args.allow_periodic,
                                              **common)
    elif name == "variance_scaling":
        rep = limit_laws.variance_scaling_check(model, args.n_list, args.k, args.replicas,
                                                args.seed, **common)
    elif name == "folner":
        rep = limit_laws.folner_check(model, args.n_list, w, args.replicas, args.seed, **common)
    else:
        rep = complexity.smb_check(model, args.probs, args.n_list, args.replicas, args.seed)
    sys.stdout.write(emit_report([rep], args.format, args.out))
    return EXIT_FAIL if rep.verdict == FAIL else EXIT_OK


def _oracle(args):
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["method", "parameter", "value", "est_error"])
    if args.kernel == "resolvent":
        results = [exact_kernels.resolvent_integral(build_model("zeta1d"), args.lam)]
    elif args.kernel == "resolvent_series":
        value, bound = exact_kernels.resolvent_series(args.lam, 10**9)
        results = [exact_kernels.KernelResult(args.lam, value, "legendre_series", bound)]
    elif args.kernel == "srw_return":
        results = [exact_kernels.KernelResult(m, exact_kernels.srw_return_exact(m),
                                              "closed_form", 0.0) for m in args.m]
    elif args.kernel == "green":
        results = [exact_kernels.green_fn(build_model(args.model), args.n)]
    else:
        model = build_model(args.model)
        results = [exact_kernels.return_prob(model, m, args.w, method=args.method)
                   for m in args.m]
    for r in results:
        writer.writerow([r.method, r.parameter, repr(r.value), repr(r.est_error)])
    return EXIT_OK


def _complexity(args):
    reps, check = complexity.complexity_check(args.model, args.probs, args.n_list, args.eps,
                                              args.seed)
    for r in reps:
        print(json.dumps(r.to_dict(), sort_keys=True))
    print(check.to_json())
    return EXIT_FAIL if check.verdict == FAIL else EXIT_OK


def _report(args):
    cfg = load_config(args.config)
    reports, code = run_config(cfg, use_cache=not args.no_cache)
    sys.stdout.write((cfg.output_dir / f"reports.{args.format}").read_text())
    return code


COMMANDS = {"model": _model_info, "simulate": _simulate, "check": _check, "oracle": _oracle,
            "complexity": _complexity, "report": _report}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, UsageError, DomainError, ResourceError) as exc:
        print(f"rwrs: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
