"""Command-line entry point.

Exit status: 0 success, 2 invalid configuration, 3 numerical failure
(including failed rate fits), 4 a figure check failed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

import yaml

from . import __version__
from .config import apply_overrides, make_config
from .errors import DecoherenceError, ValidationError
from .io import SeriesOutput, write_output
from .runner import FIGURES, exit_code, reproduce, run

log = logging.getLogger("decoherence")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 2, 3, 4


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("-c", "--config", type=Path, help="YAML run configuration")
    p.add_argument(
        "-s",
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config entry, e.g. model.h=2 or numerics.dt=0.025 (repeatable)",
    )
    p.add_argument("-o", "--out", type=Path, default=Path("."), help="output directory (default: .)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="decoherence", description="Gaussian entropy of open quantum systems.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "qm-run": "oscillator bath: exact and master-equation entropies",
        "qft-stationary": "self-mass, spectral function and stationary entropy",
        "qft-evolve": "two-time evolution of one field mode",
        "rate-fit": "fit the approach of the phase-space area to its asymptote",
        "sweep": "run a parameter grid of another mode",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        if name == "rate-fit":
            p.add_argument("input", nargs="?", help="qft-evolve CSV file (or model.input in the config)")
        if name == "sweep":
            p.add_argument("-j", "--workers", type=int, help="worker threads")
        _add_common(p)
    rp = sub.add_parser("reproduce", help="run a canned figure recipe and check it")
    rp.add_argument("figure", choices=FIGURES)
    rp.add_argument("-o", "--out", type=Path, default=Path("."), help="output directory (default: .)")
    return parser


def _raw_config(args: argparse.Namespace) -> dict:
    raw: dict = {}
    if args.config is not None:
        try:
            raw = yaml.safe_load(args.config.read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ValidationError("configuration must be a mapping")
        if raw.get("mode", args.command) != args.command:
            raise ValidationError(f"config is for mode {raw['mode']!r}, not {args.command!r}")
    raw["mode"] = args.command
    overrides = list(args.overrides)
    if getattr(args, "input", None):
        overrides.append(f"model.input={args.input}")
    if getattr(args, "workers", None) is not None:
        overrides.append(f"numerics.workers={args.workers}")
    return apply_overrides(raw, overrides)


def _report(out: SeriesOutput, path: Path) -> None:
    print(f"wrote {path} ({out.data.shape[0]} rows, {out.wall_time:.2f} s)")
    for key, value in out.summary.items():
        if isinstance(value, float):
            print(f"  {key} = {value:.10g}")
        elif not isinstance(value, dict):
            print(f"  {key} = {value}")


def _run_mode(args: argparse.Namespace) -> int:
    cfg = make_config(_raw_config(args))
    out_dir: Path = args.out
    sink = None
    if cfg.mode == "sweep":
        stem = Path(cfg.output_name).stem

        def sink(i: int, part: SeriesOutput) -> None:
            write_output(part, out_dir, f"{stem}_point_{i:04d}.csv")
            log.info("sweep point %d done", i)

    out = run(cfg, sink=sink)
    _report(out, write_output(out, out_dir))
    if cfg.mode == "sweep" and out.summary["n_failed"]:
        for i, msg in out.summary["failures"].items():
            print(f"  point {i} failed: {msg}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _reproduce(args: argparse.Namespace) -> int:
    def writer(out: SeriesOutput) -> Path:
        path = write_output(out, args.out)
        _report(out, path)
        return path

    _, checks = reproduce(args.figure, writer)
    for check in checks:
        print(check.line())
    failed = [c.name for c in checks if not c.passed]
    if failed:
        print(f"{args.figure}: failed checks: {', '.join(failed)}", file=sys.stderr)
        return EXIT_ACCEPTANCE
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _reproduce(args) if args.command == "reproduce" else _run_mode(args)
    except DecoherenceError as exc:
        code = exit_code(exc)
        if code == 1:
            raise
        label = "invalid configuration" if code == EXIT_VALIDATION else "numerical failure"
        print(f"decoherence: {label}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
