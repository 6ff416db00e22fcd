from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import NoReturn, Optional

from . import api
from .config import ConfigError, load_config, resolve_threads
from .errors import FloquetLieError
from .selftest import run_selftest

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PIPELINE = 1
EXIT_CONFIG = 2


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="floquet-lie", description="Floquet analysis of periodic Lie systems")
    parser.add_argument("--verbose", "-v", action="store_true", help="log at DEBUG level")
    verbs = parser.add_subparsers(dest="verb", required=True)
    for verb, text in (
        ("analyze", "monodromy and phase split, written to report.json"),
        ("sweep", "per-s phase table, written to sweep.csv"),
        ("rigidbody", "rigid-body reconstruction phases with orbit CSVs"),
    ):
        sub = verbs.add_parser(verb, help=text)
        sub.add_argument("--config", required=True, type=Path, help="JSON analysis config")
        sub.add_argument("--out", type=Path, default=None, help="output directory (overrides output.directory)")
        sub.add_argument("--threads", type=int, default=None, help="worker threads, 0 = one per CPU")
        sub.add_argument(
            "--tolerance-override",
            action="append",
            default=[],
            metavar="KEY=VAL",
            help="override one tolerance, e.g. splitting=1e-7",
        )
    selftest = verbs.add_parser("selftest", help="run the invariant suite")
    selftest.add_argument("--quick", action="store_true", help="skip the full pipeline run")
    return parser


def _out_dir(args: argparse.Namespace) -> Optional[Path]:
    if args.out is not None:
        return args.out
    try:
        return Path(load_config(args.config).output.directory)
    except FloquetLieError:
        return None


def run(*args: str) -> int:
    """Run one CLI verb and return its exit code.

    ``0`` on success, ``1`` on a pipeline error and ``2`` on a configuration error. Both
    error kinds also leave an ``error.json`` in the output directory when one is known.
    """
    parsed = _parser().parse_args(list(args))
    logging.basicConfig(
        level=logging.DEBUG if parsed.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    if parsed.verb == "selftest":
        results = run_selftest(quick=parsed.quick)
        return EXIT_OK if all(r.passed for r in results) else EXIT_PIPELINE

    commands = {"analyze": api.run_analyze, "sweep": api.run_sweep, "rigidbody": api.run_rigidbody}
    try:
        threads = resolve_threads(parsed.threads)
        commands[parsed.verb](parsed.config, parsed.out, threads, parsed.tolerance_override)
    except ConfigError as exc:
        logger.error("%s", exc)
        _record(parsed, exc)
        return EXIT_CONFIG
    except FloquetLieError as exc:
        logger.error("%s", exc)
        _record(parsed, exc)
        return EXIT_PIPELINE
    return EXIT_OK


def _record(parsed: argparse.Namespace, exc: FloquetLieError) -> None:
    out_dir = _out_dir(parsed)
    if out_dir is not None:
        api.write_error(out_dir, exc)


def entrypoint() -> NoReturn:
    sys.exit(run(*sys.argv[1:]))
