"""Command-line entry point: ``rwqc {report,figures,sweep,estimate,selftest}``.

Exit status: 0 success, 1 invalid input, 2 numerical fault or failed
self-test, 3 fit did not converge.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

from . import estimate, measures, selftest, sweep
from .errors import NumericalFault, RWQCError, ValidationError
from .spectrum import CosmologyParams, ModeParams

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_NOT_CONVERGED = 0, 1, 2, 3


def _common_flags(parser, suppress):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--tol", type=float, default=default(measures.DEFAULT_TOL),
                        help="series truncation tolerance, in (0, 1e-2]")
    parser.add_argument("--cutoff-cap", type=int, default=default(512),
                        help="largest Fock cutoff the oracle may use, in [8, 4096]")
    parser.add_argument("--seed", type=int, default=default(0))
    parser.add_argument("--output", default=default(None),
                        help="output file (report, sweep, estimate) or directory (figures)")
    parser.add_argument("--format", choices=sweep.FORMATS, default=default(None),
                        help="report defaults to json, sweep to csv")
    parser.add_argument("--pretty", action="store_true", default=default(False))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rwqc", description=__doc__.splitlines()[0])
    _common_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _common_flags(common, suppress=True)

    p = sub.add_parser("report", parents=[common], help="all measures at one parameter point")
    p.add_argument("--epsilon", type=float, default=10.0)
    p.add_argument("--rho", type=float, default=10.0)
    p.add_argument("--mass", type=float, default=1.0)
    p.add_argument("--momentum", type=float, default=1.0)
    p.add_argument("--chi", type=float, default=1 / math.sqrt(2))

    p = sub.add_parser("figures", parents=[common], help="data grids behind figures 1-8")
    p.add_argument("figures", nargs="*", type=int, help="figure ids (default: all)")

    p = sub.add_parser("sweep", parents=[common], help="custom grid sweep")
    p.add_argument("--axis", action="append", required=True, metavar="NAME:MIN:MAX:COUNT[:log|linear]")
    p.add_argument("--fixed", action="append", default=[], metavar="NAME=VALUE")

    p = sub.add_parser("estimate", parents=[common], help="fit (epsilon, rho) to observations")
    p.add_argument("--observations", help="CSV with header k,value,kind")
    p.add_argument("--mass", type=float, required=True)
    p.add_argument("--chi", type=float, default=1 / math.sqrt(2))
    p.add_argument("--init", type=float, nargs=2, default=(1.0, 1.0), metavar=("EPS0", "RHO0"))
    p.add_argument("--noise", type=float, default=None, help="relative noise scale of the data")
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--synthesize", action="store_true", help="generate observations from --truth")
    p.add_argument("--truth", type=float, nargs=2, metavar=("EPS", "RHO"))
    p.add_argument("--momenta", type=float, nargs="+", default=[0.2, 0.5, 1.0, 2.0, 5.0])
    p.add_argument("--kind", choices=estimate.KINDS, default="gamma_sq")
    p.add_argument("--save-observations", help="write the synthesized observations here")

    p = sub.add_parser("selftest", parents=[common], help="oracle comparison and invariant checks")
    p.add_argument("--points", type=int, default=20, help="randomised oracle comparison points")
    return parser


def _emit(text: str, path):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _finite(obj):
    # strict JSON has no Infinity/NaN
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _table(d: dict) -> str:
    width = max(len(k) for k in d)
    return "".join(f"{k:<{width}}  {v}\n" for k, v in d.items())


def cmd_report(args, config) -> int:
    mode = ModeParams(args.mass, args.momentum, args.chi)
    cosmo = CosmologyParams(args.epsilon, args.rho)
    rep = measures.report(mode, cosmo, config.tol)
    if args.format == "csv":
        row = tuple(rep.to_dict()[c] for c in sweep.COLUMNS)
        _emit(sweep.to_csv([row], f"report; tol={config.tol!r}; terms_used={rep.terms_used}; "
                                  f"tail_bound={rep.tail_bound!r}"), config.output)
    elif args.pretty:
        _emit(_table(rep.to_dict()), config.output)
    else:
        _emit(json.dumps(rep.to_dict()) + "\n", config.output)
    return EXIT_OK


def cmd_figures(args, config) -> int:
    ids = args.figures or list(range(1, 9))
    for f in ids:
        sweep.figure_specs(f)
    outdir = config.output or "figures"
    for f in ids:
        for path in sweep.write_figure(f, outdir, config):
            print(path)
    return EXIT_OK


def _parse_fixed(items) -> dict:
    fixed = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"--fixed {item!r}: expected NAME=VALUE")
        try:
            fixed[name.strip()] = float(value)
        except ValueError:
            raise ValidationError(f"--fixed {item!r}: non-numeric value") from None
    return fixed


def cmd_sweep(args, config) -> int:
    spec = sweep.SweepSpec([sweep.Axis.parse(a) for a in args.axis], _parse_fixed(args.fixed),
                           config.output, args.format or "csv")
    rows = sweep.run_sweep(spec, config)
    comment = sweep.header_comment(spec, config, rows)
    if spec.format == "csv":
        _emit(sweep.to_csv(rows, comment), config.output)
    else:
        _emit(sweep.to_json(rows, comment, args.pretty), config.output)
    return EXIT_OK


def cmd_estimate(args, config) -> int:
    truth = None
    if args.synthesize:
        if args.truth is None:
            raise ValidationError("--synthesize needs --truth EPS RHO")
        truth = CosmologyParams(*args.truth)
        obs = estimate.synthesize(truth, args.mass, args.momenta, args.kind, args.chi,
                                  noise=args.noise or 0.0, seed=config.seed)
        if args.save_observations:
            estimate.write_observations(obs, args.save_observations,
                                        comment=f"truth epsilon={truth.epsilon!r} rho={truth.rho!r} "
                                                f"mass={args.mass!r} noise={args.noise} seed={config.seed}")
    elif args.observations:
        obs = estimate.read_observations(args.observations, args.mass, args.chi, args.noise)
    else:
        raise ValidationError("estimate needs --observations FILE or --synthesize")

    res = estimate.fit_parameters(obs, tuple(args.init), max_iter=args.max_iter)
    out = res.to_dict()
    cosmo_hat = None
    if math.isfinite(res.epsilon_hat) and math.isfinite(res.rho_hat):
        cosmo_hat = CosmologyParams(res.epsilon_hat, res.rho_hat)
    out["spectral_rho"] = estimate.spectral_rho(obs, cosmo_hat)
    if truth is not None:
        out["truth"] = {"epsilon": truth.epsilon, "rho": truth.rho}
        out["relative_error"] = {"epsilon": res.epsilon_hat / truth.epsilon - 1.0,
                                 "rho": res.rho_hat / truth.rho - 1.0}
    _emit(json.dumps(_finite(out), indent=2 if args.pretty else None) + "\n", config.output)
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_selftest(args, config) -> int:
    if args.points < 1:
        raise ValidationError(f"--points must be >= 1, got {args.points}")
    checks = selftest.run(args.points, config.seed, config.tol, config.cutoff_cap)
    lines = [line for c in checks for line in c.lines()]
    failed = sum(not c.passed for c in checks)
    lines.append(f"{len(checks) - failed}/{len(checks)} checks passed (seed {config.seed}, "
                 f"{args.points} oracle points)")
    _emit("\n".join(lines) + "\n", config.output)
    return EXIT_OK if failed == 0 else EXIT_NUMERICAL


COMMANDS = {
    "report": cmd_report,
    "figures": cmd_figures,
    "sweep": cmd_sweep,
    "estimate": cmd_estimate,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = sweep.RunConfig(args.tol, args.cutoff_cap, args.output, args.seed)
        return COMMANDS[args.command](args, config)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalFault as exc:
        print(f"numerical fault: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except RWQCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
