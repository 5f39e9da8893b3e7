"""Command line entry point: ``biflow run <config>``, ``biflow selftest``, ``biflow report <dir>``.

Exit status: 0 when every check passes, 1 when a check fails or an
experiment raises, 2 for usage and configuration errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import tempfile
import time
import traceback
from dataclasses import replace
from pathlib import Path

from . import __version__, kernels
from .config import ExperimentConfig, config_hash, parse_config, serialize
from .errors import BiflowError, ConfigParseError
from .experiments import Recorder, run_experiment

log = logging.getLogger("biflow")

SUMMARY = "summary.json"


def run(cfg: ExperimentConfig) -> int:
    """Run one experiment, write its CSVs and ``summary.json``; return the exit status."""
    out = Path(cfg.output_dir)
    rec = Recorder(out)
    (out / "config.txt").write_text(serialize(cfg), encoding="utf-8")
    error = None
    start = time.perf_counter()
    try:
        run_experiment(cfg, rec)
    except BiflowError as exc:
        error = f"{type(exc).__name__}: {exc}"
        log.error("%s", error)
    except Exception as exc:  # keep partial reports and say what broke
        error = f"{type(exc).__name__}: {exc}"
        log.error("%s", traceback.format_exc())
    passed = error is None and rec.passed
    summary = {
        "kind": cfg.kind,
        "version": __version__,
        "config_sha256": config_hash(cfg),
        "passed": passed,
        "error": error,
        "checks": rec.checks,
        "constants": rec.constants,
        "tables": rec.tables,
    }
    (out / SUMMARY).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    log.info("%s: %s in %.1f s (backend %s)", cfg.kind, "PASS" if passed else "FAIL",
             time.perf_counter() - start, kernels.BACKEND)
    return 0 if passed else 1


def _cmd_run(args) -> int:
    path = Path(args.config)
    if not path.is_file():
        print(f"biflow: config file not found: {path}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(path)
    except ConfigParseError as exc:
        print(f"biflow: {path}: {exc}", file=sys.stderr)
        return 2
    if args.output:
        cfg = replace(cfg, output_dir=args.output)
    return run(cfg)


def _cmd_selftest(args) -> int:
    out = args.output or tempfile.mkdtemp(prefix="biflow-selftest-")
    cfg = ExperimentConfig(kind="operator-selftest", N=args.N, output_dir=out)
    status = run(cfg)
    print(format_report(Path(out)))
    return status


def format_report(directory: Path) -> str:
    summary = json.loads((directory / SUMMARY).read_text(encoding="utf-8"))
    lines = [f"{summary['kind']}  version {summary['version']}  config {summary['config_sha256'][:12]}"]
    for name, check in sorted(summary["checks"].items()):
        lines.append(f"  {'PASS' if check['passed'] else 'FAIL'}  {name}")
    for name, value in sorted(summary["constants"].items()):
        lines.append(f"  {name} = {value}")
    if summary.get("error"):
        lines.append(f"  error: {summary['error']}")
    lines.append("PASS" if summary["passed"] else "FAIL")
    return "\n".join(lines)


def _cmd_report(args) -> int:
    directory = Path(args.directory)
    if not (directory / SUMMARY).is_file():
        print(f"biflow: no {SUMMARY} in {directory}", file=sys.stderr)
        return 2
    print(format_report(directory))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="biflow", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"biflow {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run the experiment described by a config file")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="override the output directory")
    p.set_defaults(func=_cmd_run)
    p = sub.add_parser("selftest", help="operator self-test")
    p.add_argument("-N", type=int, default=9)
    p.add_argument("-o", "--output")
    p.set_defaults(func=_cmd_selftest)
    p = sub.add_parser("report", help="print the summary of a finished run")
    p.add_argument("directory")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
