"""Command-line interface.

Subcommands: `run` (execute a sweep from a YAML config), `validate`
(check a config and echo the fully resolved version), `replay`
(reproduce a finished sweep from its manifest alone).

Exit codes: 0 success, 1 configuration error, 2 simulation failure,
3 fit/analysis failure.
"""

from __future__ import annotations

import argparse
import sys

import yaml

from . import __version__
from .errors import AnalysisError, ConfigError, SimulationError
from .sweep import replay, run_sweep, validate_config


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sisycool",
        description="Sisyphus-cooling Monte-Carlo sweeps in a 2D lin-perp-lin lattice.")
    parser.add_argument("--version", action="version", version=f"sisycool {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a parameter sweep from a YAML config")
    p_run.add_argument("config", help="path to the YAML sweep config")
    p_run.add_argument("--out", default="sisycool-out", help="output directory (default: %(default)s)")
    p_run.add_argument("--seed", type=int, default=None, help="override the master seed")
    p_run.add_argument("--threads", type=int, default=None, help="worker threads (results are identical for any value)")

    p_val = sub.add_parser("validate", help="validate a config and print the resolved version")
    p_val.add_argument("config", help="path to the YAML sweep config")

    p_rep = sub.add_parser("replay", help="reproduce a sweep byte-for-byte from its manifest")
    p_rep.add_argument("manifest", help="path to a manifest.json written by `run`")
    p_rep.add_argument("--out", default="sisycool-replay", help="output directory (default: %(default)s)")
    p_rep.add_argument("--threads", type=int, default=None, help="worker threads")
    return parser


def _summarize(result) -> None:
    for point in result.points:
        note = "" if not point.errors else " | " + "; ".join(point.errors)
        print(f"point {point.index} (value={point.value!r}): {point.status}{note}")
    print(f"results: {result.results_path}")
    print(f"manifest: {result.manifest_path}")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors; that slot means
        # "simulation failure" here, so remap usage problems to 1
        return 0 if exc.code in (0, None) else 1

    try:
        if args.command == "validate":
            spec = validate_config(args.config)
            print(yaml.safe_dump(spec.resolved, sort_keys=True, default_flow_style=False), end="")
            print("OK")
            return 0
        if args.command == "run":
            spec = validate_config(args.config, seed=args.seed, threads=args.threads)
            result = run_sweep(spec, args.out)
            _summarize(result)
            return result.exit_code
        if args.command == "replay":
            result = replay(args.manifest, args.out, threads=args.threads)
            _summarize(result)
            return result.exit_code
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return 2
    except AnalysisError as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
