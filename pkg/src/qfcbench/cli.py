"""qfcbench command line.

    qfcbench <experiment> [--config FILE | --preset NAME] [--seed N] [--out DIR]
    qfcbench --print-defaults

Exit codes: 0 success, 2 invalid config or unwritable output, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import analysis
from .channel import DegenerateChannelError
from .config import EXPERIMENTS, PRESETS, ConfigError, parse_config, preset_text, print_defaults
from .io import counts_to_csv, to_json
from .pipelines import NumericalFailure, run_experiment

log = logging.getLogger("qfcbench")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

NUMERICAL_ERRORS = (
    NumericalFailure,
    DegenerateChannelError,
    analysis.IllPosedFitError,
    analysis.UnstableEstimateError,
    analysis.InsufficientDataError,
    analysis.InconsistentBudgetError,
)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qfcbench", description="Simulate and analyse the polarization-preserving frequency converter.")
    p.add_argument("experiment", nargs="?", choices=EXPERIMENTS)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="flat key = value config file (empty file = published preset)")
    src.add_argument("--preset", choices=PRESETS, help="use a shipped preset instead of a file")
    p.add_argument("--seed", type=int, help="override run.master_seed")
    p.add_argument("--out", type=Path, help="override run.output_dir")
    p.add_argument("--print-defaults", action="store_true", help="print the default config and exit")
    p.add_argument("--workers", type=int, default=None, help="worker cap (default: QFCBENCH_THREADS, 0 = auto)")
    return p


def _write_outputs(out_dir: Path, files: dict[str, str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        for name, text in files.items():
            path = out_dir / name
            path.write_text(text, encoding="utf-8")
            written.append(path)
    except OSError:
        for path in written:
            path.unlink(missing_ok=True)
        raise


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    if args.print_defaults:
        sys.stdout.write(print_defaults())
        return EXIT_OK
    if args.experiment is None:
        log.error("an experiment is required (one of %s)", ", ".join(EXPERIMENTS))
        return EXIT_CONFIG

    try:
        if args.preset:
            text = preset_text(args.preset)
        else:
            text = args.config.read_text(encoding="utf-8") if args.config else ""
        cfg = parse_config(text, args.experiment)
        if args.seed is not None:
            cfg = cfg.with_values(run__master_seed=args.seed)
        if args.out is not None:
            cfg = cfg.with_values(run__output_dir=str(args.out))
    except (ConfigError, OSError, UnicodeDecodeError) as exc:
        log.error("config: %s", exc)
        return EXIT_CONFIG

    try:
        output = run_experiment(cfg, args.workers)
    except NUMERICAL_ERRORS as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL

    header = [f"qfcbench {cfg.experiment}  seed={cfg.seed}", ""]
    files = {
        "counts.csv": counts_to_csv(output.records),
        "result.json": to_json({"experiment": cfg.experiment, "seed": cfg.seed, **output.result}),
        "report.txt": "\n".join(header + output.report) + "\n",
        **output.extra_files,
    }
    out_dir = Path(cfg["run.output_dir"])
    try:
        _write_outputs(out_dir, files)
    except OSError as exc:
        log.error("cannot write outputs to %s: %s", out_dir, exc)
        return EXIT_CONFIG
    for line in output.report:
        log.info("%s", line)
    log.info("wrote %s", ", ".join(str(out_dir / n) for n in files))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
