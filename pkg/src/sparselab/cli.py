"""Command line: run a config, replay a failure dump, list suites.

Exit codes: 0 success, 1 a suite or experiment failed, 2 invalid input.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .output import DumpError, read_dump, safe_name, write_dump, write_outputs
from .suites import SUITES, build_inputs, evaluate
from .verify import ConfigError, default_jobs, find_instance, load_config, run_experiment


def _jobs(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("jobs must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sparselab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the suites and experiments of a JSON config")
    run.add_argument("config", help="path to a JSON config")
    run.add_argument("--out", help="output directory (default: runs/<config name>)")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--jobs", type=_jobs, help="worker processes (default: $SPARSELAB_JOBS or 1)")
    rep = sub.add_parser("replay", help="re-evaluate a failure dump")
    rep.add_argument("dump", help="dump directory written by a failing run")
    rep.add_argument("--cells", type=int, default=20, help="worst cells to print per pointwise form")
    sub.add_parser("list-suites", help="list registered inequality suites")
    return ap


def _fmt(x: float) -> str:
    return f"{x:.4g}" if math.isfinite(x) else str(x)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    if args.seed is not None:
        if args.seed < 0:
            print("error: --seed must be >= 0", file=sys.stderr)
            return 2
        cfg = cfg.with_seed(args.seed)
    jobs = args.jobs if args.jobs is not None else default_jobs()
    out = Path(args.out) if args.out else Path("runs") / safe_name(cfg.name)
    result = run_experiment(cfg, jobs)
    manifest = write_outputs(result, out)
    for name, rep in result.reports.items():
        status = "PASS" if rep.passed else "FAIL"
        print(f"{status} {name:16s} C={_fmt(rep.constant)} spread={_fmt(rep.spread)} records={len(rep.records)}")
    if result.decay is not None:
        for op, s in result.decay.summary.items():
            print(f"{'PASS' if s['ok'] else 'FAIL'} decay[{op}] shape={s['shape']} min_c2={_fmt(s['min_c2'])}")
    if result.buckley is not None:
        for b in result.buckley:
            print(f"{'PASS' if b.passed else 'FAIL'} buckley[p={b.p:g}] slope={b.slope:.3f} band={b.band}")
    if result.cp is not None:
        for c in result.cp:
            curve = " ".join(_fmt(v) for v in c.curve)
            print(f"{'PASS' if c.passed else 'FAIL'} cp[{c.label}] curve=({curve}) a1={_fmt(c.a1)} ainfty={_fmt(c.ainfty)}")
    print(f"wrote {len(manifest['files'])} files and manifest.json to {out}")
    if result.passed:
        return 0
    failure = result.first_failure()
    if failure is not None:
        suite, inst_id = failure
        inst = find_instance(cfg, inst_id)
        inputs = build_inputs(inst)
        outcomes = evaluate(inst, inputs)
        d = write_dump(out / "dump", inst, inputs, outcomes, cfg.digest)
        print(f"first violating instance {inst_id} dumped to {d}", file=sys.stderr)
    return 1


def cmd_replay(args) -> int:
    try:
        inst, inputs, meta = read_dump(args.dump)
        outcomes = evaluate(inst, inputs)
    except DumpError as e:
        print(f"error: {args.dump}: {e}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as e:
        print(f"error: {args.dump}: corrupted dump: {e}", file=sys.stderr)
        return 2
    recorded = {o["form"]: o for o in meta.get("outcomes", [])}
    print(f"instance {inst.id}")
    ok = True
    for o in outcomes:
        good = math.isfinite(o.ratio) and o.ok
        ok = ok and good
        was = recorded.get(o.form, {}).get("ratio")
        note = "" if was is None else f" recorded={was}"
        print(f"{'PASS' if good else 'FAIL'} {o.form}: lhs={_fmt(o.lhs)} rhs={_fmt(o.rhs)} ratio={_fmt(o.ratio)}{note}")
        if o.cells is not None:
            lhs, rhs = (np.asarray(a, dtype=float) for a in o.cells)
            with np.errstate(divide="ignore", invalid="ignore"):
                r = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1), np.where(lhs > 0, np.inf, 0.0))
            order = np.argsort(-r, kind="stable")[: max(0, args.cells)]
            for i in order:
                print(f"  cell {int(i)}: lhs={_fmt(float(lhs[i]))} rhs={_fmt(float(rhs[i]))} ratio={_fmt(float(r[i]))}")
    return 0 if ok else 1


def cmd_list_suites(args) -> int:
    width = max(len(n) for n in SUITES)
    for name, s in SUITES.items():
        print(f"{name:{width}s}  {s.summary}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "replay":
        return cmd_replay(args)
    return cmd_list_suites(args)


__all__ = ["main", "build_parser"]
