"""Command-line front end: ``run``, ``bounds``, ``schedule`` and ``zeta``."""

from __future__ import annotations

import argparse
import dataclasses
import io
import json
import math
import sys
import time
from pathlib import Path

from . import __version__, bounds, config
from .estimators import corollary_schedule
from .experiments import ConfigError, fit_rate, run_study

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_BOUNDS = 4

ERROR_HEADER = ("level", "k", "h", "kappa", "error_mean", "error_std", "n_used")


def fmt(x) -> str:
    """Shortest round-trip text for a number; integers stay integers."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, (tuple, list)):
        return ";".join(fmt(v) for v in x)
    if isinstance(x, str):
        return x
    return repr(float(x))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _write(path: Path, text: str):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)


def error_table_csv(rows) -> str:
    return _csv(ERROR_HEADER, [[getattr(r, f) for f in ERROR_HEADER] for r in rows])


def bounds_report_csv(report) -> str:
    header = [f.name for f in dataclasses.fields(report[0])] if report else []
    return _csv(header, [dataclasses.astuple(r) for r in report])


def _err(msg: str):
    print(f"error: {msg}", file=sys.stderr)


# --- run ----------------------------------------------------------------------

def cmd_run(args) -> int:
    try:
        file_values = config.load_file(args.config) if args.config else None
        cfg = config.build_config(args.preset, args.testbed, args.study, file_values,
                                  args.set or (), args.seed)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    if args.threads < 1:
        _err("--threads must be >= 1")
        return EXIT_CONFIG

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        rows, report = run_study(cfg, workers=args.threads)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except ArithmeticError as exc:
        _err(f"numerical failure: {exc}")
        return EXIT_NUMERIC
    elapsed = time.perf_counter() - t0

    stem = config.STUDY_FILE_NAMES[cfg.study]
    outputs = {"table": f"{stem}.csv", "rates": "rates.csv"}
    _write(out / outputs["table"], error_table_csv(rows))

    finite = all(math.isfinite(r.error_mean) and math.isfinite(r.error_std) for r in rows)
    slope = intercept = float("nan")
    if finite and len(rows) >= 2:
        try:
            slope, intercept = fit_rate(rows, cfg.fit_skip_last)
        except ValueError:
            pass
    fitted = len(rows) - cfg.fit_skip_last
    _write(out / outputs["rates"], _csv(("study", "testbed", "levels_fitted", "slope", "intercept"),
                                        [(cfg.study.value, cfg.testbed.value, fitted, slope, intercept)]))

    violated = False
    if report is not None:
        outputs["bounds"] = "bounds_report.csv"
        _write(out / outputs["bounds"], bounds_report_csv(report))
        violated = not all(r.inside for r in report)

    manifest = {
        "artifact_version": __version__,
        "master_seed": cfg.master_seed,
        "threads": args.threads,
        "wall_clock_seconds": elapsed,
        "outputs": outputs,
        "config": config.to_mapping(cfg),
    }
    _write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    for r in rows:
        print(f"level {r.level}: error {r.error_mean:.6g} (std {r.error_std:.3g})", file=sys.stderr)
    print(f"fitted slope {slope:.4f}", file=sys.stderr)

    if not finite:
        _err("non-finite error estimates")
        return EXIT_NUMERIC
    if violated:
        for r in report:
            if not r.inside:
                print(f"bound violated: {r.estimator} level {r.level} rms {r.empirical_rms:.4g} "
                      f"not in [{r.lower:.4g}, {r.upper:.4g}]", file=sys.stderr)
        if args.strict:
            return EXIT_BOUNDS
    return EXIT_OK


# --- bounds / schedule --------------------------------------------------------

def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"not a comma-separated list of numbers: {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"not a comma-separated list of integers: {text!r}") from None


def _print_pair(name: str, pair) -> None:
    print(_csv(("lower", "upper"), [(pair.lower, pair.upper)]), end="")
    print(f"{name}: lower={pair.lower:.6g} upper={pair.upper:.6g}", file=sys.stderr)


def cmd_bounds(args) -> int:
    try:
        kind = args.kind
        if kind == "lln":
            rms = bounds.lln_rms(args.var, args.n)
            print(_csv(("rms",), [(rms,)]), end="")
            print(f"rms={rms:.6g}", file=sys.stderr)
        elif kind == "type1":
            _print_pair(kind, bounds.type1_bounds(args.bias, args.var, args.n))
        elif kind == "type2":
            _print_pair(kind, bounds.type2_bounds(args.bias, args.var, args.n))
        elif kind == "mlmc1":
            _print_pair(kind, bounds.mlmc_type1_bounds(args.bias, args.var_first, _floats(args.level_vars),
                                                       _ints(args.schedule)))
        elif kind == "mlmc2":
            _print_pair(kind, bounds.mlmc_type2_bounds(args.bias, args.var_first, _floats(args.level_vars),
                                                       _ints(args.schedule)))
        elif kind == "corollary":
            lo, hi = bounds.corollary_constants(args.var_y0, args.eps)
            print(_csv(("c_low", "c_high"), [(lo, hi)]), end="")
            print(f"c_low={lo:.6f} c_high={hi:.6f}", file=sys.stderr)
        elif kind == "zeta":
            return cmd_zeta(args)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    return EXIT_OK


def cmd_zeta(args) -> int:
    try:
        z = bounds.riemann_zeta(args.s)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    print(_csv(("zeta",), [(z,)]), end="")
    print(f"zeta({args.s:g}) = {z:.10f}", file=sys.stderr)
    return EXIT_OK


def cmd_schedule(args) -> int:
    try:
        variances = _floats(args.variances) if args.variances else []
        sched = corollary_schedule(args.bias, variances, args.eps)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    print(",".join(str(n) for n in sched.counts))
    return EXIT_OK


# --- parser -------------------------------------------------------------------

def _bound_args(p: argparse.ArgumentParser, kind: str):
    if kind == "lln":
        p.add_argument("--var", type=float, required=True)
        p.add_argument("--n", type=int, required=True)
    elif kind in ("type1", "type2"):
        p.add_argument("--bias", type=float, required=True)
        p.add_argument("--var", type=float, required=True, help="variance of Y_n (type1) or Y - Y_n (type2)")
        p.add_argument("--n", type=int, required=True)
    elif kind in ("mlmc1", "mlmc2"):
        first = "--var-y0" if kind == "mlmc1" else "--var-y-minus-y0"
        p.add_argument("--bias", type=float, required=True)
        p.add_argument(first, dest="var_first", type=float, required=True)
        p.add_argument("--level-vars", required=True, help="comma-separated level-difference variances")
        p.add_argument("--schedule", required=True, help="comma-separated sample counts N_0,...,N_L")
    elif kind == "corollary":
        p.add_argument("--var-y0", type=float, required=True)
        p.add_argument("--eps", type=float, default=1.0)
    elif kind == "zeta":
        p.add_argument("--s", type=float, required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlmc-weak", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an error study and write CSV tables")
    run.add_argument("--config", help="YAML/JSON config file or a previous manifest.json")
    run.add_argument("--preset", choices=config.PRESET_NAMES)
    run.add_argument("--testbed", help="gbm, heat-g1 or heat-g2")
    run.add_argument("--study", help="strong, weak1, weak2, mlmc1, mlmc2 or bounds")
    run.add_argument("--out", default="out", help="output directory (default: out)")
    run.add_argument("--seed", type=int, help="master seed; wins over the config and MLMC_SEED")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--strict", action="store_true", help="exit 4 when a bound check fails")
    run.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override a config value, e.g. --set n_samples=500 --set heat.eta=3")
    run.set_defaults(func=cmd_run)

    b = sub.add_parser("bounds", help="evaluate a single sampling-error bound")
    bsub = b.add_subparsers(dest="kind", required=True)
    for kind in ("lln", "type1", "type2", "mlmc1", "mlmc2", "corollary", "zeta"):
        _bound_args(bsub.add_parser(kind), kind)
    b.set_defaults(func=cmd_bounds)

    z = sub.add_parser("zeta", help="Riemann zeta at real s > 1")
    _bound_args(z, "zeta")
    z.set_defaults(func=cmd_zeta)

    s = sub.add_parser("schedule", help="bias-driven multilevel sample counts")
    s.add_argument("--bias", type=float, required=True)
    s.add_argument("--variances", default="", help="comma-separated level variances V_1,...,V_L")
    s.add_argument("--eps", type=float, default=1.0)
    s.set_defaults(func=cmd_schedule)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
