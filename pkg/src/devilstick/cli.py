"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 simulation/runtime error,
4 comparison failure. The output directory for artifacts is --out when
given, else the DEVILSTICK_OUT_DIR environment variable, else the current
directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources

from .errors import ConfigError, DevilstickError
from .scenario import OUT_DIR_ENV, compare_report, parse_scenario, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_COMPARE = 4


def _resolve_out(explicit, config_path=None, multi=False):
    base = explicit or os.environ.get(OUT_DIR_ENV) or "."
    if multi and config_path is not None:
        stem = os.path.splitext(os.path.basename(config_path))[0]
        return os.path.join(base, stem)
    return base


def _resolve_config(path: str) -> str:
    if os.path.exists(path):
        return path
    name = path if path.endswith(".json") else path + ".json"
    bundled = resources.files("devilstick") / "configs" / name
    if bundled.is_file():
        return str(bundled)
    raise ConfigError(f"config file not found: {path}")


def _simulate_one(args_tuple):
    config_path, out_dir, jobs, want_plots = args_tuple
    cfg = parse_scenario(config_path)
    report = run_scenario(cfg, out_dir=out_dir, jobs=jobs)
    figures = []
    csv_path = os.path.join(out_dir, "trajectory.csv")
    if want_plots and os.path.exists(csv_path):
        from .plots import render_run_figures

        figures = render_run_figures(
            csv_path,
            out_dir,
            crossings_path=os.path.join(out_dir, "crossings.json"),
            circle_radius=cfg.vhc.radius,
        )
    return report, figures


def _cmd_simulate(args) -> int:
    multi = len(args.config) > 1
    tasks = [
        (_resolve_config(path), _resolve_out(args.out, path, multi),
         args.jobs if not multi else 1, not args.no_plots)
        for path in args.config
    ]
    if multi and args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_simulate_one, tasks))
    else:
        results = [_simulate_one(t) for t in tasks]
    for (path, out_dir, _, _), (report, figures) in zip(tasks, results):
        print(f"{path}: mode={report['mode']} -> {out_dir}")
        if "final_energy" in report:
            print(f"  duration = {report['duration']:.4f} s, "
                  f"final E = {report['final_energy']:.4f}")
        for fig in figures:
            print(f"  figure: {fig}")
    return EXIT_OK


def _cmd_linearize(args) -> int:
    out_dir = _resolve_out(args.out)
    report = run_scenario(parse_scenario(_resolve_config(args.config)),
                          out_dir=out_dir, jobs=args.jobs)
    print(json.dumps({k: report[k] for k in
                      ("z_star", "fixed_point_residual", "linearization")
                      if k in report}, indent=2))
    return EXIT_OK


def _cmd_gain(args) -> int:
    out_dir = _resolve_out(args.out)
    report = run_scenario(parse_scenario(_resolve_config(args.config)),
                          out_dir=out_dir, jobs=args.jobs)
    print(json.dumps(report.get("gains", {}), indent=2))
    return EXIT_OK


def _resolve_reference(path: str) -> str:
    if os.path.exists(path):
        return path
    bundled = resources.files("devilstick") / "references" / path
    if bundled.is_file():
        return str(bundled)
    raise ConfigError(f"reference file not found: {path}")


def _cmd_compare(args) -> int:
    reference = _resolve_reference(args.reference)
    passed, rows, warnings = compare_report(args.report, reference)
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    width = max((len(r["name"]) for r in rows), default=4)
    for row in rows:
        status = "PASS" if row["passed"] else "FAIL"
        detail = row.get("error")
        if detail is None:
            if "max_error" in row:
                detail = (f"max error {row['max_error']:.3e} "
                          f"(allowed {row['allowed']:.3e})")
            else:
                detail = f"{row['got']:.6g} {row['op']} {row['bound']:.6g}"
        print(f"{status}  {row['name']:<{width}}  {detail}")
    return EXIT_OK if passed else EXIT_COMPARE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="devilstick",
        description="Simulate and stabilize rotary devil-stick motion "
                    "driven by a single normal force.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario config")
    sim.add_argument("--config", action="append", required=True,
                     help="scenario JSON path or bundled name "
                          "(periodic, continuous-only, aperiodic); "
                          "repeat to batch several")
    sim.add_argument("--out", default=None,
                     help=f"output directory (default ${OUT_DIR_ENV} or .)")
    sim.add_argument("--jobs", type=int, default=1,
                     help="parallel processes for batches or linearization")
    sim.add_argument("--no-plots", action="store_true",
                     help="skip PNG figure rendering")
    sim.set_defaults(func=_cmd_simulate)

    lin = sub.add_parser("linearize", help="linearize the return map")
    lin.add_argument("--config", required=True)
    lin.add_argument("--out", default=None)
    lin.add_argument("--jobs", type=int, default=1)
    lin.set_defaults(func=_cmd_linearize)

    gain = sub.add_parser("gain", help="synthesize the impulse gain")
    gain.add_argument("--config", required=True)
    gain.add_argument("--out", default=None)
    gain.add_argument("--jobs", type=int, default=1)
    gain.set_defaults(func=_cmd_gain)

    cmp_ = sub.add_parser("compare", help="check a report against a reference")
    cmp_.add_argument("--report", required=True)
    cmp_.add_argument("--reference", required=True,
                      help="path, or the name of a bundled reference")
    cmp_.set_defaults(func=_cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DevilstickError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
