"""Command line: ``plstomo {state-tomo,process-tomo,verify-designs,bound,sweep}``."""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import asdict
from pathlib import Path

from .config import ConfigError, load_config
from .experiment import bound_report, run_experiment, scaling_sweep, verify_designs
from .export import export, summary_text

EXIT_OK = 0
EXIT_ACCEPTANCE = 1
EXIT_CONFIG = 2

_MODE = {"state-tomo": "state", "process-tomo": "process", "verify-designs": "verify-designs", "bound": "bound", "sweep": "state"}


def _u64(text: str) -> int:
    val = int(text, 0)
    if not 0 <= val < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return val


def _n_list(text: str) -> list[int]:
    try:
        return [int(float(x)) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad N list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plstomo", description="Projected least-squares tomography experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _MODE:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--seed", type=_u64)
        p.add_argument("--trials", type=int)
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--workers", type=int)
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
        if name == "sweep":
            p.add_argument("--n-list", type=_n_list, default=[1000, 3000, 10000, 30000, 100000])
    return parser


def _cmd_experiment(cfg, out) -> int:
    result = run_experiment(cfg)
    text = summary_text(result.summary)
    if out:
        export(result.records, result.summary, out)
    sys.stdout.write(text)
    return EXIT_OK if result.passed else EXIT_ACCEPTANCE


def _cmd_verify(cfg, out) -> int:
    rows = verify_designs(seed=cfg.seed)
    print(f"{'design':<10} {'2-design dev':>13} {'mean dev':>10} {'E[X^2] dev':>11}  result")
    for row in rows:
        label = f"{row.family}-{row.size}"
        verdict = "PASS" if row.passed else "FAIL"
        print(f"{label:<10} {row.two_design:13.3e} {row.mean_deviation:10.3e} {row.second_moment_deviation:11.3e}  {verdict}")
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        with open(Path(out) / "designs.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(asdict(rows[0])), lineterminator="\n")
            writer.writeheader()
            writer.writerows(asdict(r) for r in rows)
    return EXIT_OK if all(r.passed for r in rows) else EXIT_ACCEPTANCE


def _cmd_bound(cfg, out) -> int:
    report = bound_report(cfg)
    text = summary_text(report)
    sys.stdout.write(text)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "bound.txt").write_text(text, encoding="utf-8")
    return EXIT_OK if report["freedman_tail"] <= cfg.delta else EXIT_ACCEPTANCE


def _cmd_sweep(cfg, out, n_list) -> int:
    result = scaling_sweep(cfg, n_list)
    for row in result.rows():
        print(f"N = {row['N']:>8d}  median spectral error = {row['median_spectral_error']!r}")
    print(f"slope = {result.slope!r}")
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        with open(Path(out) / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["N", "median_spectral_error"])
            writer.writerows((r["N"], repr(r["median_spectral_error"])) for r in result.rows())
    return EXIT_OK if -0.6 <= result.slope <= -0.4 else EXIT_ACCEPTANCE


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(
            args.config,
            args.override,
            seed=args.seed,
            trials=args.trials,
            out=args.out,
            workers=args.workers,
            mode=None if args.command == "bound" else _MODE[args.command],
        )
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command in ("state-tomo", "process-tomo"):
            return _cmd_experiment(cfg, cfg.out)
        if args.command == "verify-designs":
            return _cmd_verify(cfg, cfg.out)
        if args.command == "bound":
            return _cmd_bound(cfg, cfg.out)
        return _cmd_sweep(cfg, cfg.out, args.n_list)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
