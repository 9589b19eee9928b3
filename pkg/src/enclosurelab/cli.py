"""Command-line front end.

Verbs:
    run <config>            execute an experiment, write artifacts
    figure <artifact_dir>   render figure.svg from persisted tables
    compare <artifact_dir>  pipeline agreement report (needs pipelines="both")
    validate <config>       parse and validate a config, print the resolution

Exit codes: 0 success, 2 config/usage error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="enclosurelab",
        description="Enclosure-method laboratory: probe sweeps, indicator "
                    "functionals, and convex-hull reconstruction.")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug-level logging")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config", help="path to a TOML experiment config")
    p_run.add_argument("--out", default=None,
                       help="override the output directory from the config")

    p_fig = sub.add_parser("figure", help="render figure.svg from a run directory")
    p_fig.add_argument("artifact_dir")

    p_cmp = sub.add_parser("compare", help="pipeline agreement report")
    p_cmp.add_argument("artifact_dir")

    p_val = sub.add_parser("validate", help="validate a config without running")
    p_val.add_argument("config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        if args.verb == "run":
            return _cmd_run(args)
        if args.verb == "figure":
            return _cmd_figure(args)
        if args.verb == "compare":
            return _cmd_compare(args)
        return _cmd_validate(args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _cmd_run(args) -> int:
    from .runner import run_experiment
    try:
        result = run_experiment(args.config, out_dir=args.out)
    except Exception as exc:  # solver-level faults escalate as numeric failure
        if isinstance(exc, (ConfigError, FileNotFoundError)):
            raise
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"artifacts written to {result.out_dir}")
    if result.exit_code != 0:
        print(f"{result.n_failed} direction(s) failed; partial results persisted",
              file=sys.stderr)
    return result.exit_code


def _cmd_figure(args) -> int:
    from .figure import emit_figure
    path = emit_figure(args.artifact_dir)
    print(f"figure written to {path}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    from .runner import compare_pipelines
    try:
        report = compare_pipelines(args.artifact_dir)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(report.text)
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    scene = cfg.scene
    print("config OK")
    print(f"  domain {scene.rect}, m={scene.m}, mu={scene.mu}, "
          f"{len(scene.inclusions)} inclusion(s)")
    print(f"  grid n={cfg.grid_n}, oracle n={cfg.oracle_n}")
    print(f"  probes: J={cfg.j_policy!r}, {len(cfg.h_values)} h values, "
          f"{cfg.directions} directions, method={cfg.method}")
    print(f"  run: pipelines={cfg.pipelines}, workers={cfg.workers}, "
          f"out_dir={cfg.out_dir}")
    if cfg.ladder.enabled:
        print(f"  ladder: m values {list(cfg.ladder.m_values)}, "
              f"{len(cfg.ladder.amplitudes)} amplitudes")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
