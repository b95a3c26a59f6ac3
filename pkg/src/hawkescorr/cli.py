"""Command-line front end.

    hawkescorr resolvent --kernel exp.json --step 0.001 --horizon 10 --out psi.csv
    hawkescorr moments   --kernel exp.json --mu 1 --quantity cov_intensity --s 1 --t 1
    hawkescorr surface   --kernel exp.json --mu 1 --s-nodes 0.5,1 --t-nodes 0.5,1,2 --out cov.csv
    hawkescorr simulate  --kernel exp.json --mu 1 --T 5 --paths 10 --seed 1 --out paths.csv
    hawkescorr validate  --kernel exp.json --mu 1 --s 1 --t 2 --paths 10000 --seed 7
    hawkescorr chaos     --kernel exp.json --mu 1 --t 1 --zeta one --N 8

Exit codes: 0 ok, 1 validation failure (some |z| > 4), 2 bad input,
3 stability violation, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import contextmanager

from . import malliavin, moments, simulate
from ._csv import fmt, write_rows
from .errors import NumericalError, StabilityError
from .kernel import ModelParams, load_kernel
from .resolvent import Grid, resolvent, write_resolvent_csv

EXIT_OK, EXIT_VALIDATION, EXIT_INPUT, EXIT_STABILITY, EXIT_NUMERICAL = 0, 1, 2, 3, 4
Z_THRESHOLD = 4.0

log = logging.getLogger("hawkescorr")


class InputError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text!r}")
    return v


def _kernel(args):
    try:
        return load_kernel(args.kernel)
    except FileNotFoundError:
        raise InputError(f"kernel file not found: {args.kernel}")
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed kernel JSON in {args.kernel}: {exc}")
    except StabilityError:
        raise
    except ValueError as exc:
        raise InputError(str(exc))


def _params(args) -> ModelParams:
    kernel = _kernel(args)
    try:
        return ModelParams(args.mu, kernel)
    except ValueError as exc:
        raise InputError(str(exc))


def _table(kernel, horizon, step):
    return resolvent(kernel, Grid.covering(horizon, step))


@contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def cmd_resolvent(args) -> int:
    kernel = _kernel(args)
    table = _table(kernel, args.horizon, args.step)
    if args.out in (None, "-"):
        write_rows(sys.stdout, ("t", "psi", "cum"), zip(table.nodes, table.psi, table.cum))
    else:
        write_resolvent_csv(table, args.out)
    log.info("cum[last] = %s (limit %s)", fmt(table.cum[-1]), fmt(table.psi_l1_limit))
    return EXIT_OK


def _order(s, t):
    if s < 0 or t < 0:
        raise InputError("times must be nonnegative")
    return (s, t) if s <= t else (t, s)


def cmd_moments(args) -> int:
    params = _params(args)
    s, t = _order(args.s, args.t)
    table = _table(params.kernel, args.horizon or t, args.step)
    names = moments.QUANTITIES if args.quantity == "all" else (args.quantity,)
    rows = [(q, s, t, moments.evaluate(moments.MomentRequest(params, s, t, q), table)) for q in names]
    write_rows(sys.stdout, ("quantity", "s", "t", "value"), rows)
    return EXIT_OK


def cmd_surface(args) -> int:
    params = _params(args)
    top = max(max(args.s_nodes), max(args.t_nodes))
    table = _table(params.kernel, args.horizon or top, args.step)
    surface = moments.cov_surface(params, table, args.s_nodes, args.t_nodes, args.quantity)
    with _output(args.out) as fh:
        write_rows(fh, ("s", "t", "value"), surface.rows())
    return EXIT_OK


def cmd_simulate(args) -> int:
    params = _params(args)
    forced = args.forced or []
    paths = []
    for i in range(args.paths):
        if forced:
            p = simulate.simulate_shifted(params, args.T, forced, args.seed, i)
        elif args.method == "thinning":
            p = simulate.simulate_thinning(params, args.T, args.seed, i)
        else:
            p = simulate.simulate_hawkes(params, args.T, args.seed, i)
        paths.append(p)
    with _output(args.out) as fh:
        write_rows(fh, ("path_id", "event_time", "forced"),
                   ((pid, e, int(f)) for pid, p in enumerate(paths)
                    for e, f in zip(p.events, p.forced)))
    return EXIT_OK


def validation_rows(params, s, t, n_paths, seed, step=None, method="branching"):
    """(quantity, s, t, mc, se, analytic, |z|) for every Monte Carlo quantity."""
    table = _table(params.kernel, t, step)
    est = simulate.mc_moment_estimates(params, t, s, t, n_paths, seed, method=method)
    rows = []
    for q in simulate.MC_QUANTITIES:
        analytic = moments.evaluate(moments.MomentRequest(params, s, t, q), table)
        e = est[q]
        qs = t if q.startswith("mean") else s
        rows.append((q, qs, t, e.value, e.std_error, analytic, e.z_score(analytic)))
    return rows


def cmd_validate(args) -> int:
    params = _params(args)
    s, t = _order(args.s, args.t)
    if t <= 0:
        raise InputError("t must be positive")
    rows = validation_rows(params, s, t, args.paths, args.seed, args.step, args.method)
    with _output(args.out) as fh:
        simulate.write_estimates_csv(rows, fh)
    failed = [r[0] for r in rows if r[-1] > Z_THRESHOLD]
    for r in rows:
        log.info("%-20s |z| = %.2f %s", r[0], r[-1], "FAIL" if r[-1] > Z_THRESHOLD else "ok")
    if failed:
        log.error("validation failed for: %s", ", ".join(failed))
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_chaos(args) -> int:
    params = _params(args)
    grid = Grid.covering(args.t, args.step)
    exp = malliavin.expectation_via_chaos(params, args.t, args.zeta, args.N, grid)
    table = resolvent(params.kernel, grid)
    if args.zeta == "one":
        analytic = moments.mean_count(params, table, args.t)
    else:
        analytic = moments.mean_intensity(params, table, args.t) - params.mu
    write_rows(sys.stdout, ("zeta", "t", "N", "value", "truncation_bound", "analytic", "abs_error"),
               [(args.zeta, args.t, args.N, exp.value, exp.truncation_bound, analytic,
                 abs(exp.value - analytic))])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hawkescorr",
        description="Exact moments and covariances of Hawkes processes, with Monte Carlo validation.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, mu=True):
        p.add_argument("--kernel", required=True, help="kernel JSON file")
        if mu:
            p.add_argument("--mu", type=float, default=1.0, help="baseline intensity (default 1)")
        p.add_argument("--step", type=_positive, default=None,
                       help="grid step (default min(1e-3, horizon/1e4))")

    p = sub.add_parser("resolvent", help="tabulate Psi and its cumulative integral")
    common(p, mu=False)
    p.add_argument("--horizon", type=_positive, required=True)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_resolvent)

    p = sub.add_parser("moments", help="closed-form moment at (s, t)")
    common(p)
    p.add_argument("--quantity", choices=moments.QUANTITIES + ("all",), default="all")
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--horizon", type=_positive, default=None)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("surface", help="closed-form moment on an (s, t) grid")
    common(p)
    p.add_argument("--quantity", choices=moments.QUANTITIES, default="cov_count")
    p.add_argument("--s-nodes", type=_floats, required=True)
    p.add_argument("--t-nodes", type=_floats, required=True)
    p.add_argument("--horizon", type=_positive, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("simulate", help="write simulated event times")
    common(p)
    p.add_argument("--T", type=_positive, required=True)
    p.add_argument("--paths", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--forced", type=_floats, default=None, help="comma-separated forced atom times")
    p.add_argument("--method", choices=("branching", "thinning"), default="branching")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="Monte Carlo vs closed form for all covariances")
    common(p)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--paths", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=("branching", "thinning"), default="branching")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("chaos", help="truncated chaos expansion of E[H_t] or E[lambda_t] - mu")
    common(p)
    p.add_argument("--t", type=_positive, required=True)
    p.add_argument("--zeta", choices=("one", "phi"), default="one")
    p.add_argument("--N", type=int, default=8)
    p.set_defaults(func=cmd_chaos)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    if getattr(args, "paths", 2) < 1 or (args.command == "validate" and args.paths < 2):
        print("error: --paths too small", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except StabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STABILITY
    except NumericalError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
