"""Command line: ``simqos run | map | validate``.

Exit codes: 0 success, 1 validation failure, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import stdmap
from .errors import InvalidScenario, SimQosError
from .scenario import parse_scenario, validate_scenario
from .sim import Simulation

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
DEFAULT_OUT = "out"


def parse_seeds(text: str) -> list[int]:
    """``42``, ``1..5`` (inclusive) or ``1,3,7``."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo_i, hi_i = int(lo), int(hi)
            if hi_i < lo_i:
                raise argparse.ArgumentTypeError(f"empty seed range {part!r}")
            seeds.extend(range(lo_i, hi_i + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError("no seeds given")
    return seeds


def _seed_arg(text):
    try:
        return parse_seeds(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None


def simulate(text: str, seed: int, trace: bool = False) -> dict[str, str]:
    """Run one seed and return ``{filename: contents}`` for every output file."""
    cfg = parse_scenario(text)
    sim = Simulation(cfg, seed, trace=trace)
    report = sim.run()
    files = {"flows.csv": report.flows_csv(), "classes.csv": report.classes_csv()}
    if report.connections:
        files["connections.csv"] = report.connections_csv()
    if report.actions:
        files["actions.csv"] = report.actions_csv()
    if trace:
        files["trace.csv"] = sim.trace_text()
        files["marks.csv"] = sim.marks_text()
    return files


def _write(outdir: Path, files: dict[str, str]) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    for name, content in files.items():
        with open(outdir / name, "w", encoding="utf-8", newline="") as fh:
            fh.write(content)


def cmd_run(args) -> int:
    try:
        text = Path(args.scenario).read_text(encoding="utf-8")
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    errors = validate_scenario(text)
    if errors:
        for e in errors:
            print(e, file=sys.stderr)
        return EXIT_INVALID
    out = Path(args.out or os.environ.get("SIMQOS_OUT") or DEFAULT_OUT)
    if out.exists() and any(out.iterdir()) and not args.force:
        print(f"error: {out} is not empty; pass --force to overwrite", file=sys.stderr)
        return EXIT_RUNTIME
    seeds = args.seed
    try:
        if args.jobs > 1 and len(seeds) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(simulate, [text] * len(seeds), seeds,
                                        [args.trace] * len(seeds)))
        else:
            results = [simulate(text, s, args.trace) for s in seeds]
    except (SimQosError, InvalidScenario) as e:
        print(f"runtime failure: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    for seed, files in zip(seeds, results):
        target = out if len(seeds) == 1 else out / f"seed-{seed}"
        _write(target, files)
        print(f"seed {seed}: wrote {', '.join(sorted(files))} to {target}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        text = Path(args.scenario).read_text(encoding="utf-8")
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    errors = validate_scenario(text)
    for e in errors:
        print(e, file=sys.stderr)
    if errors:
        return EXIT_INVALID
    print("ok")
    return EXIT_OK


def cmd_map(args) -> int:
    try:
        primary = tuple(int(x) for x in args.primary.split(",")) if args.primary else \
            stdmap.DEFAULT_PRIMARY_QCIS
        rows = stdmap.qci_table(primary)
    except (ValueError, SimQosError) as e:
        print(f"error: bad --primary list: {e}", file=sys.stderr)
        return EXIT_INVALID
    if args.format == "csv":
        sys.stdout.write(stdmap.table_csv(rows))
    else:
        sys.stdout.write(stdmap.table_text(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simqos", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a scenario and write CSV results")
    p.add_argument("scenario")
    p.add_argument("--seed", type=_seed_arg, required=True,
                   help="seed, inclusive range a..b, or comma list")
    p.add_argument("--out", help=f"output directory (default $SIMQOS_OUT or ./{DEFAULT_OUT})")
    p.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")
    p.add_argument("--trace", action="store_true", help="write per-node and marking traces")
    p.add_argument("--jobs", type=int, default=1, help="concurrent runs for a seed list")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="check a scenario without running it")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("map", help="print the QCI / PHB / EDCA / UP mapping table")
    p.add_argument("--format", choices=("csv", "text"), default="csv")
    p.add_argument("--primary", help="comma list of QCIs flagged as primary classes")
    p.set_defaults(func=cmd_map)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)
