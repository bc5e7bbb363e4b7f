"""Command-line front end.

    causal-mesh run    --scenario fig2_violation --protocol rbroadcast --out out/fig2
    causal-mesh sweep  --scenario sec4_sweep --protocol pc,rbroadcast --ramp 0,1000,2500,5000 --reps 5
    causal-mesh verify out/fig2/trace.jsonl

Exit status: 0 clean, 1 protocol violations found, 2 configuration or I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from . import __version__
from .metrics import CSV_COLUMNS, format_cell
from .oracle import TraceError, verify
from .scenario import PROTOCOLS, LatencyRamp, Scenario, ScenarioError, bundled_names, load_scenario
from .sim import run as simulate
from .trace import TraceFormatError, read_trace, write_trace

EXIT_CLEAN, EXIT_VIOLATIONS, EXIT_ERROR = 0, 1, 2
SEED_ENV = "CAUSAL_MESH_SEED"

log = logging.getLogger("causal_mesh")


class UsageError(Exception):
    pass


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def resolve_seed(cli_seed: Optional[int], scenario: Scenario) -> int:
    if cli_seed is not None:
        return cli_seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None
    return scenario.seed


def _prepare(out: Path, names: Sequence[str], force: bool) -> None:
    """Refuse to overwrite earlier results unless forced."""
    clash = [n for n in names if (out / n).exists()]
    if clash and not force:
        raise UsageError(f"{out}: would overwrite {', '.join(clash)} (use --force)")
    out.mkdir(parents=True, exist_ok=True)


def _scenario(args: argparse.Namespace) -> Scenario:
    sc = load_scenario(args.scenario)
    if getattr(args, "protocol", None) and "," not in args.protocol:
        sc = sc.replace(protocol=args.protocol)
    return sc


# -- run -------------------------------------------------------------------------

def _run_one(sc: Scenario, out: Path, emit_trace: bool) -> Dict[str, Any]:
    result = simulate(sc)
    files = ["metrics.csv", "verdict.json"]
    (out / "metrics.csv").write_text(result.report.to_csv(), encoding="utf-8")
    verdict = result.verdict.to_dict()
    verdict["outcome"] = result.outcome
    (out / "verdict.json").write_text(_dump(verdict), encoding="utf-8")
    if emit_trace:
        with open(out / "trace.jsonl", "w", encoding="utf-8", newline="\n") as fh:
            write_trace(result.trace, fh)
        files.append("trace.jsonl")
    return {
        "seed": sc.seed,
        "configHash": sc.config_hash(),
        "outcome": result.outcome,
        "quiescent": result.quiescent,
        "endTimeMs": result.end_time,
        "totals": result.report.totals,
        "ops": result.ops,
        "files": files,
    }


def cmd_run(args: argparse.Namespace) -> int:
    sc = _scenario(args)
    seed = resolve_seed(args.seed, sc)
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    out = Path(args.out)
    seeds = [seed + i for i in range(args.reps)]
    dirs = [out] if args.reps == 1 else [out / f"seed-{s}" for s in seeds]
    outputs = ["metrics.csv", "verdict.json", "manifest.json"] + (["trace.jsonl"] if args.emit_trace else [])
    for d in dirs:
        _prepare(d, outputs, args.force)
    runs = []
    worst = EXIT_CLEAN
    for s, d in zip(seeds, dirs):
        cell = sc.replace(seed=s)
        info = _run_one(cell, d, args.emit_trace)
        if d != out:
            info["dir"] = d.name
        runs.append(info)
        if info["outcome"] != "clean":
            worst = EXIT_VIOLATIONS
        t = info["totals"]
        print(f"{sc.name} protocol={sc.protocol} seed={s}: {info['outcome']} "
              f"(violations={t['violations']} duplicates={t['duplicates']} "
              f"missing={t['missing']} safe_link_breaches={t['safe_link_breaches']})")
    manifest = {
        "tool": "causal-mesh",
        "version": __version__,
        "command": "run",
        "scenario": sc.name,
        "protocol": sc.protocol,
        "seed": seed,
        "seeds": seeds,
        "configHash": sc.replace(seed=seed).config_hash(),
        "scenarioConfig": sc.replace(seed=seed).to_dict(),
        "runs": runs,
    }
    (out / "manifest.json").write_text(_dump(manifest), encoding="utf-8")
    return worst


# -- sweep -----------------------------------------------------------------------

def with_ramp(sc: Scenario, level: float) -> Scenario:
    """Same scenario with the latency ramp rescaled to end at ``level`` ms."""
    lr = sc.latency_ramp
    start = lr.start_ms * level / lr.end_ms if lr.end_ms else 0.0
    return sc.replace(latency_ramp=LatencyRamp(
        start_ms=start, end_ms=float(level), duration_ms=lr.duration_ms, spread=lr.spread,
        jitter=lr.jitter, links=dict(lr.links), default_ms=lr.default_ms))


def _sweep_cell(cell: Tuple[Scenario, int, str, int, float]) -> Dict[str, Any]:
    base, n, proto, seed, level = cell
    try:
        sc = with_ramp(base.replace(process_count=n, protocol=proto, seed=seed), level)
        result = simulate(sc)
    except Exception as exc:  # a failing cell is reported, the sweep goes on
        return {"error": f"{type(exc).__name__}: {exc}"}
    return {
        "rows": result.report.rows,
        "outcome": result.outcome,
        "totals": result.report.totals,
        "configHash": sc.config_hash(),
    }


def _floats(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_sweep(args: argparse.Namespace) -> int:
    base = load_scenario(args.scenario)
    protocols = [p.strip() for p in (args.protocol or base.protocol).split(",") if p.strip()]
    for p in protocols:
        if p not in PROTOCOLS:
            raise UsageError(f"unknown protocol {p!r}")
    ramps = _floats(args.ramp) if args.ramp else [base.latency_ramp.end_ms]
    sizes = [int(x) for x in _floats(args.n)] if args.n else [base.process_count]
    seed = resolve_seed(args.seed, base)
    seeds = [seed + i for i in range(args.reps)]
    out = Path(args.out)
    _prepare(out, ["sweep.csv", "manifest.json"], args.force)

    cells = [(base, n, proto, s, level)
             for n in sizes for level in ramps for proto in protocols for s in seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(sc) for sc in cells]

    lines = [",".join(CSV_COLUMNS)]
    entries = []
    status = EXIT_CLEAN
    for (_, n, proto, s, level), res in zip(cells, results):
        entry: Dict[str, Any] = {"protocol": proto, "n": n, "rampMs": level, "seed": s}
        if "error" in res:
            entry["error"] = res["error"]
            status = EXIT_ERROR
            log.error("cell %s failed: %s", entry, res["error"])
        else:
            entry.update(firstRow=len(lines) - 1, rowCount=len(res["rows"]),
                         outcome=res["outcome"], totals=res["totals"],
                         configHash=res["configHash"])
            for row in res["rows"]:
                lines.append(",".join(format_cell(row[c]) for c in CSV_COLUMNS))
            if res["outcome"] != "clean" and status == EXIT_CLEAN:
                status = EXIT_VIOLATIONS
        entries.append(entry)
    (out / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    manifest = {
        "tool": "causal-mesh",
        "version": __version__,
        "command": "sweep",
        "scenario": base.name,
        "configHash": base.config_hash(),
        "protocols": protocols,
        "ramps": ramps,
        "sizes": sizes,
        "seeds": seeds,
        "cells": entries,
    }
    (out / "manifest.json").write_text(_dump(manifest), encoding="utf-8")
    failed = sum("error" in e for e in entries)
    print(f"sweep {base.name}: {len(entries)} cells, {failed} failed, rows={len(lines) - 1}")
    return status


# -- verify ----------------------------------------------------------------------

def cmd_verify(args: argparse.Namespace) -> int:
    path = Path(args.trace)
    try:
        with open(path, encoding="utf-8") as fh:
            trace = read_trace(fh)
        verdict = verify(trace)
    except (TraceFormatError, TraceError) as exc:
        report = {"error": "corrupt trace", "detail": str(exc)}
        if isinstance(exc, TraceError):
            report["eventIndex"] = exc.index
        sys.stderr.write(_dump(report))
        return EXIT_ERROR
    text = _dump(verdict.to_dict())
    if args.out:
        out = Path(args.out)
        if out.exists() and not args.force:
            raise UsageError(f"{out} exists (use --force)")
        out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_CLEAN if verdict.clean else EXIT_VIOLATIONS


# -- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="causal-mesh", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, out_default: str) -> None:
        p.add_argument("--scenario", required=True,
                       help=f"scenario file or bundled name ({', '.join(bundled_names())})")
        p.add_argument("--seed", type=int, default=None,
                       help=f"seed (falls back to ${SEED_ENV}, then the scenario's own)")
        p.add_argument("--out", default=out_default, help="output directory")
        p.add_argument("--reps", type=int, default=1, help="replications with consecutive seeds")
        p.add_argument("--force", action="store_true", help="overwrite existing output files")

    p = sub.add_parser("run", help="simulate one scenario")
    common(p, "results")
    p.add_argument("--protocol", choices=PROTOCOLS, help="override the scenario's protocol")
    p.add_argument("--emit-trace", action="store_true", help="also write trace.jsonl")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="replicate a scenario over latency levels, sizes and seeds")
    common(p, "sweep")
    p.add_argument("--protocol", help="comma-separated protocols")
    p.add_argument("--ramp", help="comma-separated final latency ceilings in ms")
    p.add_argument("--n", help="comma-separated process counts")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="re-check a trace written with --emit-trace")
    p.add_argument("trace")
    p.add_argument("--out", help="write the verdict here instead of stdout")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, UsageError, OSError) as exc:
        print(f"causal-mesh: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
