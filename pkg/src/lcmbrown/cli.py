"""Command-line experiment runner.

Every verification is a subcommand. The report is written as JSON (canonical)
or CSV; the exit status is 0 when every metric passes, 1 when some metric
fails (the report is still written), and 2 for usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

from . import __version__
from .experiments import EXACT_QUANTITIES, EXPERIMENTS, ConfigError, ExperimentConfig, RunReport, run

THREADS_ENV = "LCMBROWN_THREADS"

# subcommand -> (n, m, replicas) defaults
DEFAULTS = {
    "exact": (10, 2, 1),
    "verify-tau": (100, 20, 100_000),
    "verify-subset-uniformity": (5, 2, 100_000),
    "verify-cesaro": (1_000_000, 2, 1_000_000),
    "clt": (1_000_000, 1000, 10_000),
    "clt-subset": (1_000_000, 1000, 10_000),
    "gap": (1_000_000, 1000, 2_000),
    "geom-model": (1_000_000, 1000, 10_000),
    "fixed-m": (1_000_000, 2, 100_000),
    "oracle-check": (8, 3, 100_000),
    "log-moments": (1_000_000, 1, 1_000_000),
    "lipschitz": (10_000, 100, 1_000),
}

HELP = {
    "exact": "evaluate a closed-form quantity",
    "verify-tau": "coupon-collector stopping time moments",
    "verify-subset-uniformity": "chi-square test that coupon-path subsets are uniform",
    "verify-cesaro": "mean of 1/gcd of two uniforms",
    "clt": "Brownian limit of the iid log-lcm process",
    "clt-subset": "Brownian limit of the random-subset process via coupon coupling",
    "gap": "paired gap between Y and its indicator version Z",
    "geom-model": "variance of the geometric-multiplicity model against b_n and a_n",
    "fixed-m": "fixed-m limit law against finite-n simulation",
    "oracle-check": "Monte Carlo against exhaustive enumeration",
    "log-moments": "central moments of log U against the exponential limit",
    "lipschitz": "pathwise increment bound |k - l| log n in exact arithmetic",
}


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        v = int(raw)
    except ValueError:
        return 1
    return max(v, 1)


def _grid(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from err


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lcmbrown", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in EXPERIMENTS:
        n, m, reps = DEFAULTS[name]
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--n", type=int, default=n)
        p.add_argument("--m", type=int, default=m)
        p.add_argument("--t", type=_grid, default=(1.0,), help="grid times, e.g. '0.5 1 2' or 0.5,1,2")
        p.add_argument("--replicas", type=int, default=reps)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=None, help=f"worker threads (default ${THREADS_ENV} or 1)")
        p.add_argument("--out", default=None, help="report path (default stdout)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--case", choices=("auto", "A", "B"), default="auto")
        if name == "exact":
            p.add_argument("--what", choices=EXACT_QUANTITIES, required=True)
            p.add_argument("--y", type=float, default=None)
            p.add_argument("--theta", type=float, default=None)
        if name == "fixed-m":
            p.add_argument("--p-max", type=int, default=100_000)
    return parser


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    return ExperimentConfig(
        subcommand=ns.subcommand,
        n=ns.n,
        m=ns.m,
        grid=tuple(ns.t),
        replicas=ns.replicas,
        seed=ns.seed,
        threads=ns.threads if ns.threads is not None else default_threads(),
        out=ns.out,
        format=ns.format,
        case=ns.case,
        what=getattr(ns, "what", None),
        y=getattr(ns, "y", None),
        theta=getattr(ns, "theta", None),
        p_max=getattr(ns, "p_max", 100_000),
    )


def render_json(report: RunReport) -> str:
    return json.dumps(report.to_dict(), indent=2) + "\n"


def render_csv(report: RunReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "t", "estimate", "target", "tolerance", "pass"])
    for m in report.metrics:
        w.writerow(
            [
                m.metric,
                "" if m.t is None else repr(m.t),
                repr(m.estimate),
                "" if m.target is None else repr(float(m.target)),
                "" if m.tolerance is None else repr(float(m.tolerance)),
                "true" if m.passed else "false",
            ]
        )
    return buf.getvalue()


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    cfg = config_from_args(ns)
    try:
        report = run(cfg)
    except ConfigError as err:
        parser.error(str(err))  # exits with status 2
    text = render_json(report) if cfg.format == "json" else render_csv(report)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for m in report.metrics:
        at = "" if m.t is None else f" t={m.t:g}"
        print(f"{'PASS' if m.passed else 'FAIL'} {m.metric}{at}: {m.estimate:.6g}", file=sys.stderr)
    return 0 if report.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
