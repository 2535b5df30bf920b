"""``wqed`` command line: one subcommand per task, JSON config in, CSV tables out."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings

from . import __version__
from .config import TASKS, config_to_dict, load_config
from .errors import NumericError, WqedError
from .output import write_outputs
from .sweep import SweepFailed, run_task

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

log = logging.getLogger("wqed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wqed", description="Polariton-phonon waveguide-QED numerics.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="task", required=True, metavar="TASK")
    for task in TASKS:
        p = sub.add_parser(task, help=f"run the {task} task")
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides output_dir in the config)")
        p.add_argument("--force", action="store_true", help="overwrite existing output files")
        p.add_argument("--threads", type=int, help="worker threads for sweeps (default: $WQED_THREADS or 1)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _threads(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("WQED_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer WQED_THREADS=%r", env)
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="wqed: %(message)s")
    warnings.simplefilter("default")
    try:
        cfg = load_config(args.config, args.task)
        out_dir = args.out or cfg.output_dir
        echo = config_to_dict(cfg)
        try:
            tables = run_task(cfg, _threads(args.threads))
        except SweepFailed as exc:
            write_outputs(exc.tables, echo, out_dir, __version__, args.force)
            raise
        paths = write_outputs(tables, echo, out_dir, __version__, args.force)
    except NumericError as exc:
        print(f"wqed: numeric error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except WqedError as exc:
        print(f"wqed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for path in paths:
        log.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
