"""Command line entry point: ``secadapt run|explore|check|project|typecheck``.

Exit status is 0 when every check passes, 1 on an invariant breach, a stuck
state or a type error, and 2 on usage or parse errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import (
    TraceFormatError,
    check_invariants,
    explore,
    format_trace,
    live_breaches,
    parse_trace,
    run,
    typecheck_scenario,
)
from .lattice import NotALattice
from .parser import InvariantViolation, ParseError, load_scenario
from .projection import UndefinedProjection, project
from .render import render_monitor
from .syntax import participants

OK, FAILED, USAGE = 0, 1, 2


def _load(path):
    sc = load_scenario(path)
    problems = typecheck_scenario(sc)
    return sc, problems


def cmd_run(args) -> int:
    sc, problems = _load(args.scenario)
    if problems:
        _report(problems)
        return FAILED
    live = []
    trace = run(sc, seed=args.seed, depth=args.depth,
                observer=lambda net, rec: live.extend(live_breaches(net, rec.index)))
    text = format_trace(trace)
    if args.trace:
        Path(args.trace).write_text(text)
    else:
        sys.stdout.write(text)
    breaches = check_invariants(trace).breaches + live
    print(f"{len(trace)} steps, {len(breaches)} invariant breaches", file=sys.stderr)
    _report(map(str, breaches))
    return FAILED if breaches else OK


def cmd_explore(args) -> int:
    sc, problems = _load(args.scenario)
    if problems:
        _report(problems)
        return FAILED
    rep = explore(sc, depth=args.depth, cap=args.cap)
    print(f"states {rep.states}")
    print(f"edges {rep.edges}")
    print(f"terminal {rep.terminals}")
    print(f"stuck {len(rep.stuck)}")
    print(f"depth {rep.depth_reached}")
    print(f"truncated {'yes' if rep.truncated else 'no'}")
    print(f"breaches {len(rep.breaches)}")
    _report(map(str, rep.breaches))
    return OK if rep.ok else FAILED


def cmd_check(args) -> int:
    trace = parse_trace(Path(args.trace).read_text())
    if trace.lattice is None:
        if trace.records:
            print("error: trace has no lattice header", file=sys.stderr)
            return USAGE
        print("0 records, no breaches")
        return OK
    report = check_invariants(trace)
    print(f"{report.records} records, {len(report.breaches)} breaches")
    _report(map(str, report.breaches))
    return OK if report.ok else FAILED


def cmd_project(args) -> int:
    sc = load_scenario(args.scenario)
    try:
        sg = sc.global_named(args.global_name)
    except KeyError:
        print(f"error: no global named {args.global_name}", file=sys.stderr)
        return USAGE
    try:
        for p in sorted(participants(sg.g)):
            print(f"{p}: {render_monitor(project(sg.g, p))}")
    except UndefinedProjection as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILED
    return OK


def cmd_typecheck(args) -> int:
    _, problems = _load(args.scenario)
    if problems:
        _report(problems)
        return FAILED
    print("ok")
    return OK


def _report(lines) -> None:
    for line in lines:
        print(line, file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="secadapt", description="Security-monitored adaptive choreographies.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a scenario once and print its trace")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--trace", help="write the trace here instead of stdout")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("explore", help="enumerate reachable networks breadth first")
    p.add_argument("scenario")
    p.add_argument("--depth", type=int)
    p.add_argument("--cap", type=int)
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("check", help="re-check the invariants of a trace file")
    p.add_argument("trace")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("project", help="print every participant's monitor")
    p.add_argument("scenario")
    p.add_argument("--global", dest="global_name", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("typecheck", help="check projections and repository types")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_typecheck)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, InvariantViolation, NotALattice, TraceFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
