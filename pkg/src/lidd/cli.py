"""Command line front end: ``lidd run|converge|plot|cache|config``."""

import argparse
import json
import logging
import os
import sys

from .config import default_config, load_config
from .pipeline import (KNOBS, STAGE_CODES, WORKERS_ENV, PipelineError, cache_entries, clear_cache,
                       convergence_study, run, write_csv)
from .plots import emit_plot_scripts

SCHEMAS = f"""
output files (CSV, header row, SI units unless suffixed):
  fig2_left.csv   tf_radius_um, y_um, potential_Hz
                  potential cut along y through the cloud centre, flash angle 0
  fig2_right.csv  tf_radius_um, atom_number, max_acceleration_m_s2,
                  line_a_m_s2, line_b_m_s2, center_potential_Hz,
                  center_depth_Hz, peak_abs_potential_y_Hz, pancakes_per_side
  fig3.csv        angle_deg, sigma_<a>_coherent, sigma_<a>_incoherent,
                  sigma_<a>_total for a in x y z, residual_<a>, flagged_<a>,
                  raman_nath_ratio, peak_abs_potential_y_Hz
                  widths are Gaussian sigmas in recoils of the flash beam;
                  flagged 1 = poor fit or width at the momentum-window edge
  raman_nath.json ratio of kinetic energy gained to max |V| per angle
  manifest.json   unit-keyed config, resolved SI values, derived quantities,
                  seeds and library versions; accepted back by --config

environment:
  {WORKERS_ENV}    overrides the worker count for sweep points

exit codes: 0 ok, 1 other, 2 usage, """ + ", ".join(f"{v} {k}" for k, v in STAGE_CODES.items())


def parse_args(argv=None):
    parser = argparse.ArgumentParser(prog="lidd", description="Light-induced dipole-dipole simulator",
                                     epilog=SCHEMAS, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the full pipeline", epilog=SCHEMAS,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-c", "--config", help="TOML config or a previous manifest.json")
    p.add_argument("-o", "--output", help="output directory (overrides config)")
    p.add_argument("--only", choices=("fig2", "fig3"), help="run a single sweep")
    p.add_argument("--no-plots", action="store_true", help="skip writing plot scripts")

    p = sub.add_parser("converge", help="convergence study over one knob")
    p.add_argument("knob", choices=KNOBS)
    p.add_argument("values", nargs="+", type=float,
                   help="knob values: spacing in m, pad factor, pancakes per side, or dtau in s")
    p.add_argument("-c", "--config")
    p.add_argument("-o", "--output", help="CSV path for the report")
    p.add_argument("--tol", type=float, default=1e-2)

    p = sub.add_parser("plot", help="write plot scripts for an output directory")
    p.add_argument("directory")

    p = sub.add_parser("cache", help="inspect or clear cached ground states")
    p.add_argument("action", choices=("inspect", "clear"))
    p.add_argument("-c", "--config")

    sub.add_parser("config", help="print the default config as TOML")
    return parser.parse_args(argv)


def _config(path):
    return load_config(path) if path else default_config()


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "config":
            print(default_config().to_toml())
            return 0
        try:
            cfg = _config(getattr(args, "config", None))
        except (OSError, ValueError, KeyError) as exc:
            raise PipelineError("config", exc) from exc
        if args.command == "run":
            out = run(cfg, args.output, do_fig2=args.only in (None, "fig2"),
                      do_fig3=args.only in (None, "fig3"))
            if not args.no_plots and args.only is None:
                try:
                    emit_plot_scripts(out.directory)
                except OSError as exc:
                    raise PipelineError("plot", exc) from exc
            for name, path in out.files.items():
                print(f"{name}: {path}")
        elif args.command == "converge":
            values = [int(v) for v in args.values] if args.knob == "stack_M" else args.values
            rep = convergence_study(cfg, args.knob, values, args.tol)
            keys = sorted({k for r in rep["rows"] for k in r} - {"value"})
            rows = [[r["value"]] + [r.get(k, float("nan")) for k in keys] for r in rep["rows"]]
            if args.output:
                write_csv(args.output, ["value"] + keys, rows)
            print(json.dumps(rep, indent=2))
            if not rep["converged"]:
                print(f"warning: {args.knob} not converged to {args.tol}", file=sys.stderr)
        elif args.command == "plot":
            try:
                for path in emit_plot_scripts(args.directory):
                    print(path)
            except FileNotFoundError as exc:
                raise PipelineError("plot", exc) from exc
        elif args.command == "cache":
            d = cfg.output["cache_dir"]
            if args.action == "inspect":
                print(json.dumps(cache_entries(d), indent=2))
            else:
                print(f"removed {clear_cache(d)} files from {os.path.abspath(d)}")
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
