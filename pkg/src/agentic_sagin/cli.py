"""Command line entry point: ``sagin run`` and ``sagin compare``."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from typing import Sequence

from .config import ConfigError
from .harness import ALL_METHODS, ExperimentPlan, compare, run
from .orchestrator import PlannerChoice


def _seeds(text: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers: {text!r}") from exc
    if not seeds:
        raise argparse.ArgumentTypeError("at least one seed is required")
    return seeds


def _methods(text: str) -> tuple[PlannerChoice, ...]:
    try:
        return tuple(PlannerChoice.parse(m.strip()) for m in text.split(",") if m.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sagin", description="Intent-driven SAGIN offloading experiments")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train all requested methods and write CSVs")
    p_run.add_argument("--config", help="TOML scenario/agent config (defaults built in)")
    p_run.add_argument(
        "--methods", type=_methods, default=ALL_METHODS,
        help="comma-separated subset of " + ",".join(m.value for m in PlannerChoice),
    )
    p_run.add_argument("--episodes", type=int, default=1000)
    p_run.add_argument("--seeds", type=_seeds, default=(0, 1, 2, 3, 4), help="e.g. 0,1,2,3,4")
    p_run.add_argument("--out", default="results", help="output directory")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel (method, seed) workers")
    p_run.add_argument("--trace", action="store_true", help="also write per-step JSONL traces")

    p_cmp = sub.add_parser("compare", help="rank methods from a summary.csv")
    p_cmp.add_argument("--summary", required=True)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "run":
            plan = ExperimentPlan(
                methods=args.methods, episodes=args.episodes, seeds=args.seeds,
                config_path=args.config, out_dir=args.out, jobs=args.jobs, trace=args.trace,
            )
            t0 = time.perf_counter()
            paths = run(plan)
            for name, path in paths.items():
                print(f"{name}: {path}")
            print(f"elapsed: {time.perf_counter() - t0:.1f}s")
        else:
            print(compare(args.summary).render())
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
