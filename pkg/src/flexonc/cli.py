"""Command line: ``flexonc run | analyze | list``.

Exit status is 0 on success, 2 for unusable input (bad scenario, bad
override, bad grid) and 1 when a run itself fails or the inequality check
reports a violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__, analysis
from .errors import ConfigurationError
from .metrics import CSV_COLUMNS, summary_row, write_csv
from .scenario import BUNDLED, ScenarioError, config_hash, dumps, parse_value, resolve
from .sim import run as run_config

log = logging.getLogger("flexonc")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def _parse_set(items: Sequence[str]):
    out = []
    for item in items:
        path, sep, raw = item.partition("=")
        if not sep or not path.strip():
            raise ConfigurationError(f"expected key=value, got {item!r}", "--set")
        out.append((path.strip(), parse_value(raw.strip())))
    return out


def _run_cell(item):
    key, config = item
    return key, run_config(config)


def _execute(cells, jobs: int):
    if os.environ.get("FLEXONC_JOBS") == "1":
        jobs = 1
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_cell, cells))
    return [_run_cell(c) for c in cells]


def cmd_run(args) -> int:
    try:
        overrides = _parse_set(args.set or [])
        if args.seed is not None:
            overrides.append(("seeds", [args.seed]))
        scn = resolve(args.scenario, overrides)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    cells = list(scn.runs())
    log.info("%s: %d runs", scn.name, len(cells))
    try:
        results = _execute(cells, args.jobs)
    except Exception as exc:  # noqa: BLE001 - any failure inside a run is a runtime error
        print(f"error: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    out = Path(args.out or scn.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    lead = ["scenario", "scheme", "seed", *scn.axis_names]
    rows, manifest_runs, nested = [], [], {}
    for (key, config), (_, record) in zip(cells, results):
        row = {"scenario": scn.name, **key, **summary_row(record)}
        rows.append(row)
        label = ",".join(f"{k}={v}" for k, v in key.items())
        nested[label] = record.to_dict()
        manifest_runs.append({**key, "config_hash": config_hash(config), "trace_hash": record.trace_hash})
    if args.format == "csv":
        target = out / f"{scn.name}.csv"
        with target.open("w", newline="") as fh:
            write_csv(rows, fh, lead)
    else:
        target = out / f"{scn.name}.json"
        target.write_text(json.dumps(nested, indent=1, sort_keys=True))
    manifest = {
        "tool": "flexonc",
        "version": __version__,
        "scenario": scn.name,
        "scenario_hash": config_hash(dumps(scn)),
        "scenario_toml": dumps(scn),
        "columns": lead + list(CSV_COLUMNS),
        "runs": manifest_runs,
    }
    (out / f"{scn.name}.manifest.json").write_text(json.dumps(manifest, indent=1))
    print(f"wrote {target} ({len(rows)} runs)")
    return EXIT_OK


def cmd_analyze(args) -> int:
    if args.trials < 1:
        print("error: --trials must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        grid = analysis.parse_grid(args.grid)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    rows = analysis.oracle_table(grid, trials=args.trials, seed=args.seed)
    report = analysis.verify_inequality([q for q in grid if q.H >= 2])

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "p", "N", "H", "m", "closed_form", "monte_carlo", "stderr", "trials", "agrees"])
    for r in rows:
        q = r.params
        writer.writerow([r.model, f"{q.p:g}", q.N, q.H, q.m, f"{r.exact:.6g}", f"{r.estimate.value:.6g}",
                         f"{r.estimate.stderr:.6g}", r.estimate.trials, int(r.ok)])
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "analysis.csv").write_text(buf.getvalue())
        (out / "inequality.txt").write_text(report.summary() + "\n")
    else:
        sys.stdout.write(buf.getvalue())
    disagree = sum(1 for r in rows if not r.ok)
    print(f"{len(rows)} oracle rows, {disagree} outside 3 standard errors", file=sys.stderr)
    print(report.summary(), file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_RUNTIME


def cmd_list(args) -> int:
    width = max(map(len, BUNDLED))
    for name, text in BUNDLED.items():
        print(f"{name:<{width}}  {text}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flexonc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run every cell of a scenario")
    p.add_argument("scenario", help="bundled scenario name or path to a .toml file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="dotted override, e.g. channel.ber=1e-5 or flows.interval=0.1")
    p.add_argument("--seed", type=int, help="run this single seed instead of the scenario's list")
    p.add_argument("--out", help="output directory (default: the scenario's output.dir)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--jobs", type=int, default=1, help="parallel runs (FLEXONC_JOBS=1 forces serial)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="closed forms vs Monte Carlo, and the inequality check")
    p.add_argument("--grid", help='e.g. "p=0.6,0.9;N=1,2;H=3,5;m=1,2"')
    p.add_argument("--trials", type=int, default=10 ** 6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write analysis.csv and inequality.txt here instead of stdout")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("list", help="list bundled scenarios")
    p.set_defaults(func=cmd_list)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
