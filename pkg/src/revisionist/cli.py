"""Command line front end.

Subcommands::

    simulate   run the simulators on a zoo protocol, reconstruct and validate
    stress     seeded random worlds through the augmented snapshot and checkers
    checklin   run every linearizability check on a stored trace
    bounds     evaluate the counting formulas and space bounds
    transform  derive a deterministic machine from a nondeterministic one

Exit codes: 0 success, 1 a check failed, 2 the configuration was rejected,
3 a step budget ran out.  Artifacts are JSON-lines files; the same
configuration and seed always produce the same bytes.  ``REVISIONIST_SEED``
sets the default seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any

from . import bounds as bnd
from .codec import dumps, read_jsonl, write_jsonl
from .engine import SimulationSetup, max_a_allowed, simulate
from .errors import (BadMachine, BadParameters, LocalSimBudgetExceeded, MalformedTrace, ProtocolMisbehavior,
                     TooLarge)
from .lincheck import brute_force_linearizable, check_all, rule_based_verdict
from .ndst import (MachineProtocol, derive, det_to_dict, machine_from_dict, toy_protocol, verify_of)
from .reconstruct import rebuild_and_check
from .stress import stress_runs
from .trace import Trace
from .zoo import make

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3


def _default_seed() -> int:
    raw = os.environ.get("REVISIONIST_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        return 0


def _value(tok: str) -> Any:
    for cast in (int, float):
        try:
            return cast(tok)
        except ValueError:
            pass
    return tok


def _emit(obj: Any) -> None:
    print(dumps(obj))


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        entry = make(args.protocol, n=args.n, k=args.k, m=args.m, eps=args.eps)
        inputs = tuple(_value(t) for t in args.inputs.split(",")) if args.inputs else tuple(range(args.f))
        setup = SimulationSetup(entry.spec, args.f, args.d, inputs, local_budget=args.local_budget)
    except (BadParameters, TypeError) as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        run = simulate(setup, args.seed, budget=args.budget)
    except LocalSimBudgetExceeded as exc:
        print(f"budget: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ProtocolMisbehavior as exc:
        print(f"protocol misbehaved: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    report: dict = {
        "type": "report", "protocol": entry.describe(), "f": setup.f, "d": setup.d,
        "inputs": list(inputs), "seed": args.seed, "partition": [list(p) for p in setup.partition],
        "completed": run.completed, "steps": run.steps,
        "outputs": {str(i): y for i, y in sorted(run.outputs.items())},
        "sw_steps": run.sw_steps(), "block_updates": run.engine.bu_count,
        "revisions": len(run.revisions),
    }
    if setup.d == 0:
        report["bounds"] = {
            "b": {str(i): bnd.b(i, setup.m) for i in range(1, setup.f + 1)},
            "step_bound": bnd.step_bound(setup.f, setup.m),
            "max_a_ok": all(fr.max_a <= max_a_allowed(setup.m, fr.level) for fr in run.engine.frames),
        }
    code = EXIT_OK
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
        write_jsonl(out / "trace.jsonl", run.trace.to_records())
        write_jsonl(out / "revisions.jsonl", [
            {"type": "revision", "simulator": r.simulator, "process": r.process, "level": r.level,
             "source": r.source, "view": r.view, "trigger": r.trigger, "outcome": r.outcome,
             "steps": [[e.pid, e.kind, getattr(e.step, "component", None), getattr(e.step, "value", None)]
                       for e in r.steps]}
            for r in run.revisions])
    if not run.completed:
        report["verdict"] = "budget exhausted"
        code = EXIT_BUDGET
    else:
        rc = rebuild_and_check(run, entry.task)
        report["replay"] = rc.report.summary()
        report["replay"]["violations"] = len(rc.violations())
        report["task_valid"] = rc.report.task_valid
        report["verdict"] = "ok" if rc.ok else "replay failed"
        if not rc.ok:
            code = EXIT_VIOLATION
        if out:
            write_jsonl(out / "decomposition.jsonl", [
                {"type": "block", "t": t, "op": b.op, "alpha": [b.start, b.view_pos],
                 "gamma": [b.view_pos, b.beta_start], "beta": [b.beta_start, b.beta_end], "view": b.view}
                for t, b in enumerate(rc.decomposition.blocks, start=1)])
            write_jsonl(out / "sigma.jsonl", rc.sigma.lines())
    if out:
        write_jsonl(out / "report.jsonl", [report])
    _emit(report)
    return code


# ---------------------------------------------------------------------------
# stress / checklin


def cmd_stress(args: argparse.Namespace) -> int:
    totals: dict[str, int] = {}
    incomplete = 0
    first: str | None = None
    for run in stress_runs(args.runs, args.seed, f=args.f, m=args.m, max_ops=args.max_ops):
        if not run.completed:
            incomplete += 1
            continue
        for rep in check_all(run.trace):
            totals[rep.name] = totals.get(rep.name, 0) + len(rep.violations)
            if rep.violations and first is None:
                first = f"run {run.index} (seed {run.seed}): {rep.violations[0]}"
    violations = sum(totals.values())
    _emit({"type": "stress", "runs": args.runs, "seed": args.seed, "f": args.f, "m": args.m,
           "incomplete": incomplete, "violations": violations, "by_check": totals, "first": first})
    if violations:
        return EXIT_VIOLATION
    return EXIT_BUDGET if incomplete else EXIT_OK


def cmd_checklin(args: argparse.Namespace) -> int:
    try:
        trace = Trace.from_records(read_jsonl(args.path))
        reports = check_all(trace)
    except (MalformedTrace, OSError, json.JSONDecodeError) as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out: dict = {"type": "checklin", "path": str(args.path), "checks": [r.summary() for r in reports]}
    ok = all(r.ok for r in reports)
    try:
        brute = brute_force_linearizable(trace, limit=args.limit)
        out["oracle"] = brute
        out["oracle_agrees"] = brute == rule_based_verdict(trace)
        ok = ok and out["oracle_agrees"]
    except TooLarge:
        out["oracle"] = None
    _emit(out)
    return EXIT_OK if ok else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# bounds


def cmd_bounds(args: argparse.Namespace) -> int:
    try:
        results: list[dict] = []
        if args.m is not None and args.f is not None:
            rep = bnd.bounds(args.m, args.f)
            results.append({"bound": "counting", "m": args.m, "f": args.f, "a": rep.a, "b": rep.b,
                            "b_closed": rep.b_closed, "step_bound": rep.step_bound})
        task = args.task
        if task is None:
            task = "eps" if args.eps is not None else ("kset" if args.k is not None else None)
        if task in ("kset", "consensus"):
            k = 1 if task == "consensus" else args.k
            x = args.x if args.x is not None else 1
            if args.n is None or k is None:
                raise BadParameters("kset bounds need --n and --k")
            results.append({"bound": "kset", "n": args.n, "k": k, "x": x, "value": bnd.kset_bound(args.n, k, x)})
        elif task == "eps":
            if args.n is None or args.eps is None:
                raise BadParameters("eps bounds need --n and --eps")
            val = bnd.eps_bound(args.n, args.eps)
            results.append({"bound": "eps", "n": args.n, "eps": args.eps, "value": val, "vacuous": val == 0.0})
        if args.L is not None:
            if args.n is None or args.f is None:
                raise BadParameters("step-complexity bounds need --n, --f and --L")
            results.append({"bound": "steps", "n": args.n, "f": args.f, "L": args.L,
                            "value": bnd.step_lower_bound_bound(args.n, args.f, args.L)})
        if args.xof:
            if args.n is None or args.f is None or args.x is None:
                raise BadParameters("x-obstruction-free bounds need --n, --f and --x")
            results.append({"bound": "xof", "n": args.n, "f": args.f, "x": args.x,
                            "value": bnd.xof_bound(args.n, args.f, args.x)})
        if not results:
            raise BadParameters("nothing to evaluate; give --m/--f, --n/--k, --task eps or --L")
    except BadParameters as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for r in results:
        _emit(r)
    return EXIT_OK


# ---------------------------------------------------------------------------
# transform


def cmd_transform(args: argparse.Namespace) -> int:
    try:
        if args.machine:
            with open(args.machine, encoding="utf-8") as fh:
                raw = json.load(fh)
            machines = tuple(machine_from_dict(d) for d in raw["machines"])
            proto = MachineProtocol(raw.get("name", "machine"), machines)
        else:
            proto = toy_protocol()
    except (BadMachine, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    dets = tuple(derive(mc) for mc in proto.machines)
    report = verify_of(proto, dets, depth=args.depth)
    if args.out:
        write_jsonl(args.out, [{"type": "derived", "process": p, "machine": det_to_dict(d)}
                               for p, d in enumerate(dets, start=1)])
    _emit(dict(report.summary(), type="verify_of", depth=args.depth))
    return EXIT_OK if report.ok else EXIT_VIOLATION


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="revisionist", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    seed = _default_seed()

    sp = sub.add_parser("simulate", help="run the simulation on a zoo protocol")
    sp.add_argument("--protocol", required=True)
    sp.add_argument("--n", type=int)
    sp.add_argument("--k", type=int)
    sp.add_argument("--m", type=int)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--f", type=int, default=2)
    sp.add_argument("--d", type=int, default=0)
    sp.add_argument("--inputs", help="comma-separated inputs of q_1..q_f (default 0..f-1)")
    sp.add_argument("--seed", type=int, default=seed)
    sp.add_argument("--budget", type=int, default=200_000, help="base steps for the whole run")
    sp.add_argument("--local-budget", type=int, default=100_000, help="steps per local solo simulation")
    sp.add_argument("--out", help="directory for the JSON-lines artifacts")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("stress", help="seeded random worlds through all checks")
    sp.add_argument("--f", type=int)
    sp.add_argument("--m", type=int)
    sp.add_argument("--runs", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=seed)
    sp.add_argument("--max-ops", type=int, default=3)
    sp.set_defaults(func=cmd_stress)

    sp = sub.add_parser("checklin", help="check a stored trace")
    sp.add_argument("path")
    sp.add_argument("--limit", type=int, default=8, help="largest history handed to the brute-force oracle")
    sp.set_defaults(func=cmd_checklin)

    sp = sub.add_parser("bounds", help="evaluate bound formulas")
    sp.add_argument("--m", type=int)
    sp.add_argument("--f", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--k", type=int)
    sp.add_argument("--x", type=int)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--L", type=float)
    sp.add_argument("--task", choices=["consensus", "kset", "eps"])
    sp.add_argument("--xof", action="store_true", help="also print floor((n-x)/(f-x))+1")
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("transform", help="derive and verify a deterministic machine")
    sp.add_argument("--machine", help="JSON file with a 'machines' list (default: bundled toy)")
    sp.add_argument("--depth", type=int, default=10)
    sp.add_argument("--out", help="where to write the derived machines (JSON lines)")
    sp.set_defaults(func=cmd_transform)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
