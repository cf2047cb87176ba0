"""Command-line front end.

Exit codes: 0 on success, 1 when a verification tolerance is exceeded,
2 on usage errors (unknown flags, missing or malformed files, shape
mismatches), so `skn verify` can gate CI runs. The environment variable
``SKN_SEED`` overrides the default seed of seeded commands.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import construct, fitting, harness, serialize
from .core import kernel_shape
from .evaluate import full_kernel


def _default_seed() -> int:
    return int(os.environ.get("SKN_SEED", "0"))


def _bounds_line(k: int, n: int) -> str:
    b = construct.hidden_unit_bounds(k, n)
    free = "-" if b.upper_free is None else str(b.upper_free)
    return (f"bounds(k={k}, n={n}): lower_fixed={b.lower_fixed} upper_fixed={b.upper_fixed} "
            f"lower_free={b.lower_free} upper_free={free}")


def _cmd_compile(args) -> int:
    target = serialize.load_kernel(args.target)
    k, n = kernel_shape(target)
    if args.theorem == 1:
        net = construct.compile_fixed_output(target, alpha=args.alpha, eta=args.eta)
        residuals = None
    else:
        net, report = construct.compile_free_output(target, alpha=args.alpha, eta=args.eta)
        residuals = report
    print(f"compiled construction {args.theorem}: m={net.m} hidden units for (k={k}, n={n})")
    print(_bounds_line(k, n))
    if args.out:
        serialize.save_params(args.out, net)
        print(f"wrote {args.out}")
    if residuals is not None:
        payload = {
            "per_input_tv": [float(x) for x in residuals.per_input_tv],
            "max_tv": residuals.max_tv,
        }
        res_path = args.residuals or (args.out + ".residuals.json" if args.out else None)
        if res_path:
            with open(res_path, "w") as fh:
                json.dump(payload, fh, indent=2)
                fh.write("\n")
            print(f"wrote {res_path}")
        else:
            print(f"idealized residual max_tv={residuals.max_tv!r}")
    return 0


def _cmd_eval(args) -> int:
    net = serialize.load_params(args.params)
    realized = full_kernel(net, args.evaluator)
    if args.out:
        serialize.save_kernel(args.out, realized)
        print(f"wrote {args.out}")
    else:
        for row in realized:
            print(" ".join(repr(float(x)) for x in row))
    return 0


def _cmd_verify(args) -> int:
    net = serialize.load_params(args.params)
    target = serialize.load_kernel(args.target)
    report = harness.verify(target, net, args.evaluator, seed=args.seed)
    if args.out:
        harness.write_report_csv(args.out, [report])
        print(f"wrote {args.out}")
    worst = report.max_tv if args.metric == "tv" else report.max_kl
    print(f"max-row {args.metric} = {worst!r} (tolerance {args.tol!r})")
    return 0 if worst <= args.tol else 1


def _cmd_sweep(args) -> int:
    target = serialize.load_kernel(args.target)
    alphas = [float(a) for a in args.alphas.split(",")]
    construction = "fixed" if args.theorem == 1 else "free"
    reports = harness.alpha_sweep(target, alphas, construction=construction,
                                  eta=args.eta, seed=args.seed)
    harness.write_report_csv(args.out, reports, per_input=False)
    print(f"wrote {args.out} ({len(reports)} rows)")
    if args.summary:
        harness.write_summary_json(args.summary, harness.summarize_reports(reports))
        print(f"wrote {args.summary}")
    return 0


def _cmd_fit(args) -> int:
    target = serialize.load_kernel(args.target)
    cfg = fitting.FitConfig(step_size=args.step, iterations=args.iters,
                            restarts=args.restarts, seed=args.seed)
    net, trace = fitting.fit(target, args.m, cfg)
    print(f"fit m={args.m}: objective {trace[0]!r} -> {trace[-1]!r} "
          f"({len(trace) - 1} accepted steps)")
    if args.out:
        serialize.save_params(args.out, net)
        print(f"wrote {args.out}")
    return 0


def _cmd_bounds(args) -> int:
    print(_bounds_line(args.k, args.n))
    return 0


def _cmd_probe(args) -> int:
    report = harness.pairing_probe(args.k, args.n, args.seed, args.trials,
                                   alpha=args.alpha, refine=not args.no_refine)
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skn",
        description="Compile, evaluate, and verify shallow binary stochastic networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile a target kernel into network weights")
    p.add_argument("--target", required=True, help="target kernel JSON file")
    p.add_argument("--theorem", type=int, choices=(1, 2), required=True,
                   help="1: fixed output layer; 2: tuned output layer")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--eta", type=float, default=construct.DEFAULT_ETA)
    p.add_argument("--out", default=None, help="parameter JSON output path")
    p.add_argument("--residuals", default=None, help="residual report path (construction 2)")
    p.set_defaults(func=_cmd_compile)

    p = sub.add_parser("eval", help="evaluate the realized kernel of saved parameters")
    p.add_argument("--params", required=True)
    p.add_argument("--evaluator", choices=("naive", "blockwise"), default="naive")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("verify", help="compare realized kernel against a target")
    p.add_argument("--params", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--metric", choices=("tv", "kl"), default="tv")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--evaluator", choices=("naive", "blockwise"), default="naive")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out", default=None, help="per-input CSV report path")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("sweep", help="compile and verify across a sharpness sweep")
    p.add_argument("--target", required=True)
    p.add_argument("--alphas", required=True, help="comma-separated increasing values")
    p.add_argument("--theorem", type=int, choices=(1, 2), default=1)
    p.add_argument("--eta", type=float, default=construct.DEFAULT_ETA)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out", required=True, help="summary CSV path (one row per alpha)")
    p.add_argument("--summary", default=None, help="optional JSON summary path")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("fit", help="gradient-fit network weights to a target")
    p.add_argument("--target", required=True)
    p.add_argument("--m", type=int, required=True, help="hidden units")
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("bounds", help="print hidden-unit bounds for a shape")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("probe", help="measure splitter-sharing residuals per target class")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--alpha", type=float, default=30.0)
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_probe)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
