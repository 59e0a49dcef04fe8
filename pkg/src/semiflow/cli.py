"""Command line: ``semiflow <experiment> --config FILE --out DIR [--seed N]``.

Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import config as cfg
from .errors import ConfigError, ConfigurationRejected
from .experiments import execute

log = logging.getLogger("semiflow")

PLOT_KINDS = {
    "minimax.csv": "minimax",
    "recurrence.csv": "recurrence",
    "profile.csv": "profile",
    "stability.csv": "stability",
}


def run(config: cfg.ExperimentConfig, figures: bool = False) -> int:
    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory {out} is not writable: {exc}", file=sys.stderr)
        return 2
    try:
        rep = execute(config.experiment, config.params, out, config.seed, config.source)
    except ConfigurationRejected as exc:
        print(f"error: configuration rejected: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: cannot write artifacts: {exc}", file=sys.stderr)
        return 2
    if figures:
        from .plotting import render

        for name in list(rep.artifacts):
            kind = PLOT_KINDS.get(name, "trajectory")
            png = render(out / name, kind)
            if png is not None:
                rep.artifacts.append(png.name)
    (out / "report.txt").write_text(rep.text())
    for name, ok in rep.pass_vector():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return 0 if rep.passed else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="semiflow", description="Run a semiflow experiment and write its report and CSVs.")
    ap.add_argument("experiment", choices=cfg.EXPERIMENTS)
    ap.add_argument("--config", type=Path, default=None, help="flat key = value file (defaults if omitted)")
    ap.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--figures", action="store_true", help="also render PNG figures next to the CSVs")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        conf = cfg.load(args.experiment, args.config, args.out, args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run(conf, figures=args.figures)


if __name__ == "__main__":
    sys.exit(main())
