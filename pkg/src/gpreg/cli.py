"""Command-line entry point.

Subcommands: ``run``, ``compare``, ``validate``, ``presets``.  Exit codes:
0 on success, 2 on validation failure, 3 on integration failure.
"""

from __future__ import annotations

import argparse
import sys

from .experiment import (EXIT_INTEGRATION, EXIT_OK, EXIT_VALIDATION,
                         ConfigError, compare, load_config, run_experiment,
                         validate_config)
from .hybrid import IntegrationError
from .presets import format_presets


def _load_validated(path):
    cfg = load_config(path)
    errors = validate_config(cfg)
    if errors:
        for err in errors:
            print(f"error: {err}", file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION)
    return cfg


def _cmd_run(args) -> int:
    cfg = _load_validated(args.config)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    try:
        _, summary = run_experiment(cfg)
    except IntegrationError as exc:
        print(f"integration failure: {exc} (t={exc.t})", file=sys.stderr)
        return EXIT_INTEGRATION
    for key, value in summary.as_items():
        print(f"{key} = {value}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    if args.against != "baseline":
        print(f"error: unsupported comparison target {args.against!r}; "
              "only 'baseline' shares the required settings", file=sys.stderr)
        return EXIT_VALIDATION
    cfg = _load_validated(args.config)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    try:
        gp_summary, base_summary, ratio = compare(cfg)
    except IntegrationError as exc:
        print(f"integration failure: {exc} (t={exc.t})", file=sys.stderr)
        return EXIT_INTEGRATION
    print(f"tail_sup_e_gp = {gp_summary.tail_sup_e}")
    print(f"tail_sup_e_baseline = {base_summary.tail_sup_e}")
    print(f"ratio = {ratio}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    errors = validate_config(cfg)
    if errors:
        for err in errors:
            print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"{args.config}: OK (exosystem={cfg.exosystem}, preset={cfg.preset}, "
          f"regulator={cfg.regulator}, t_end={cfg.t_end})")
    return EXIT_OK


def _cmd_presets(_args) -> int:
    print(format_presets())
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gpreg-sim",
        description="Closed-loop simulations of the learning internal-model regulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=None)
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="run the GP loop against a twin")
    p_cmp.add_argument("config")
    p_cmp.add_argument("--against", required=True)
    p_cmp.add_argument("--output-dir", default=None)
    p_cmp.set_defaults(func=_cmd_compare)

    p_val = sub.add_parser("validate", help="check a configuration file")
    p_val.add_argument("config")
    p_val.set_defaults(func=_cmd_validate)

    p_pre = sub.add_parser("presets", help="print the named parameter presets")
    p_pre.set_defaults(func=_cmd_presets)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
