"""Running scenarios: strategies, traces, invariant checking, exploration.

Trace format
------------
A trace is text with one record per line. When the trace is non-empty it
starts with a header line naming the lattice::

    # lattice elements=lo,hi edges=lo<hi

Each record is a sequence of shell-quoted ``key=value`` tokens in this order:
``index rule session actors message before after violation nonce`` followed
by ``monitor.<p>`` and ``process.<p>`` for every actor still live after the
step. Absent values are written ``-``. Levels are ``p:r/w`` entries joined by
commas, messages ``p>q:label(payload)`` and nonces ``#i``.
"""

from __future__ import annotations

import random
import re
import shlex
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, TextIO

from .lattice import Lattice
from .parser import parse_monitor, parse_process, parse_value
from .projection import well_formed
from .render import render_message, render_monitor, render_process, render_sgt, render_value
from .scenario import RULES, Scenario
from .semantics import Effect, Engine, Network, Step, level_of
from .syntax import Message, Nonce, SessionChannel, subst_channel
from .typesys import IllTyped, adequate, subtype, synthesize, type_errors

VIOLATION = {"InGlob": "read", "InLoc": "read", "OutGlob": "write", "OutLoc": "write"}


# -- trace records ----------------------------------------------------------


@dataclass(frozen=True)
class TraceRecord:
    index: int
    rule: str
    session: str
    actors: tuple[str, ...]
    message: Message | None = None
    before: tuple[tuple[str, str, str], ...] = ()
    after: tuple[tuple[str, str, str], ...] = ()
    violation: str | None = None
    nonce: int | None = None
    checkpoints: tuple[tuple[str, object, object], ...] = ()

    @classmethod
    def from_effect(cls, index: int, step: Step, effect: Effect) -> "TraceRecord":
        return cls(
            index, step.rule, effect.session, effect.actors, effect.message,
            effect.before, effect.after, VIOLATION.get(step.rule), effect.nonce, effect.checkpoints,
        )


@dataclass(frozen=True)
class Trace:
    records: tuple[TraceRecord, ...] = ()
    lattice: Lattice | None = field(default=None, compare=False)
    final: Network | None = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def rules(self) -> list[str]:
        return [r.rule for r in self.records]


def _levels_text(levels) -> str:
    return ",".join(f"{p}:{r}/{w}" for p, r, w in levels) or "-"


def format_record(rec: TraceRecord) -> str:
    fields = [
        ("index", str(rec.index)),
        ("rule", rec.rule),
        ("session", rec.session or "-"),
        ("actors", ",".join(rec.actors) or "-"),
        ("message", render_message(rec.message) if rec.message else "-"),
        ("before", _levels_text(rec.before)),
        ("after", _levels_text(rec.after)),
        ("violation", rec.violation or "-"),
        ("nonce", f"#{rec.nonce}" if rec.nonce is not None else "-"),
    ]
    for p, m, proc in rec.checkpoints:
        fields.append((f"monitor.{p}", render_monitor(m)))
        fields.append((f"process.{p}", render_process(proc)))
    return " ".join(shlex.quote(f"{k}={v}") for k, v in fields)


def format_header(lattice: Lattice) -> str:
    edges = ",".join(f"{a}<{b}" for a, b in lattice.edges)
    return f"# lattice elements={','.join(lattice.elements)} edges={edges or '-'}"


def format_trace(trace: Trace) -> str:
    if not trace.records:
        return ""
    lines = [format_header(trace.lattice)] if trace.lattice is not None else []
    lines.extend(format_record(r) for r in trace.records)
    return "\n".join(lines) + "\n"


def emit_trace(trace: Trace, sink: TextIO) -> None:
    sink.write(format_trace(trace))


class TraceFormatError(ValueError):
    pass


_MESSAGE = re.compile(r"^([^>]+)>([^:]+):([^(]+)\((.*)\)$")


def _parse_levels(text: str):
    if text == "-":
        return ()
    out = []
    for item in text.split(","):
        p, rw = item.split(":")
        r, w = rw.split("/")
        out.append((p, r, w))
    return tuple(out)


def _parse_message(text: str):
    if text == "-":
        return None
    m = _MESSAGE.match(text)
    if not m:
        raise TraceFormatError(f"malformed message {text!r}")
    return Message(m[1], m[2], m[3], parse_value(m[4]))


def parse_record(line: str) -> TraceRecord:
    try:
        tokens = [t.split("=", 1) for t in shlex.split(line)]
        kv = dict(tokens)
        checkpoints = []
        for k, v in tokens:
            if k.startswith("monitor."):
                p = k.split(".", 1)[1]
                checkpoints.append((p, parse_monitor(v), parse_process(kv[f"process.{p}"])))
        return TraceRecord(
            index=int(kv["index"]),
            rule=kv["rule"],
            session="" if kv["session"] == "-" else kv["session"],
            actors=() if kv["actors"] == "-" else tuple(kv["actors"].split(",")),
            message=_parse_message(kv["message"]),
            before=_parse_levels(kv["before"]),
            after=_parse_levels(kv["after"]),
            violation=None if kv["violation"] == "-" else kv["violation"],
            nonce=None if kv["nonce"] == "-" else int(kv["nonce"].lstrip("#")),
            checkpoints=tuple(checkpoints),
        )
    except (KeyError, ValueError) as exc:
        raise TraceFormatError(f"malformed record: {exc}") from exc


def parse_trace(text: str) -> Trace:
    lattice = None
    records = []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            m = re.match(r"#\s*lattice elements=(\S+) edges=(\S+)", line)
            if m:
                edges = [] if m[2] == "-" else [tuple(e.split("<")) for e in m[2].split(",")]
                lattice = Lattice(m[1].split(","), edges)
            continue
        records.append(parse_record(line))
    return Trace(tuple(records), lattice)


# -- invariant checking -----------------------------------------------------


class InvariantBreach(Exception):
    def __init__(self, index: int, clause: str, detail: str = ""):
        self.index = index
        self.clause = clause
        self.detail = detail
        super().__init__(f"record {index}: clause ({clause}) {detail}".rstrip())


@dataclass
class InvariantReport:
    records: int = 0
    breaches: list[InvariantBreach] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.breaches

    def by_clause(self, clause: str) -> list[InvariantBreach]:
        return [b for b in self.breaches if b.clause == clause]

    def raise_first(self) -> None:
        if self.breaches:
            raise self.breaches[0]


def subject_reduction_holds(monitor, process) -> bool:
    try:
        return adequate(synthesize(None, process), monitor)
    except IllTyped:
        return False


def record_breaches(rec: TraceRecord, lattice: Lattice) -> list[InvariantBreach]:
    """Check one record on its own: guards (a) and (b), subject reduction
    at its checkpoints (c) and level monotonicity within the step (d)."""
    out = []
    before = {p: (r, w) for p, r, w in rec.before}
    after = {p: (r, w) for p, r, w in rec.after}
    msg = rec.message
    if rec.violation != VIOLATION.get(rec.rule):
        out.append(InvariantBreach(rec.index, "flag", f"violation={rec.violation} for {rec.rule}"))
    if rec.rule == "In":
        if msg is None or msg.receiver not in before:
            out.append(InvariantBreach(rec.index, "a", "input record without receiver levels"))
        elif not lattice.leq(level_of(msg.payload, lattice), before[msg.receiver][0]):
            out.append(InvariantBreach(
                rec.index, "a", f"{render_value(msg.payload)} consumed at r={before[msg.receiver][0]}"))
    if rec.rule in ("Out", "OutGlob"):
        if msg is None or msg.sender not in before:
            out.append(InvariantBreach(rec.index, "b", "enqueue record without sender levels"))
        else:
            nonce = isinstance(msg.payload, Nonce)
            if rec.rule == "OutGlob" and not nonce:
                out.append(InvariantBreach(rec.index, "b", "value other than a nonce enqueued on a write violation"))
            w = before[msg.sender][1]
            if not nonce and not lattice.leq(w, msg.payload.level):
                out.append(InvariantBreach(rec.index, "b", f"{render_value(msg.payload)} enqueued at w={w}"))
    for p, m, proc in rec.checkpoints:
        if not subject_reduction_holds(m, proc):
            out.append(InvariantBreach(rec.index, "c", f"process of {p} not adequate for its monitor"))
    for p, (r1, w1) in before.items():
        if p in after:
            r2, w2 = after[p]
            if not lattice.leq(w1, w2):
                out.append(InvariantBreach(rec.index, "d", f"writing level of {p} fell from {w1} to {w2}"))
            if not lattice.leq(r2, r1):
                out.append(InvariantBreach(rec.index, "d", f"reading level of {p} rose from {r1} to {r2}"))
    return out


def check_invariants(trace: Trace, lattice: Lattice | None = None) -> InvariantReport:
    """Re-check a trace from its records alone, independently of the engine."""
    lattice = lattice or trace.lattice
    if lattice is None:
        raise ValueError("a lattice is needed to check a trace")
    report = InvariantReport(records=len(trace.records))
    last: dict[tuple[str, str], tuple[str, str]] = {}
    for i, rec in enumerate(trace.records):
        if rec.index != i:
            report.breaches.append(InvariantBreach(rec.index, "index", f"expected index {i}"))
        report.breaches.extend(record_breaches(rec, lattice))
        for p, r, w in rec.before:
            prev = last.get((rec.session, p))
            if prev is not None and prev != (r, w):
                report.breaches.append(InvariantBreach(
                    rec.index, "d", f"levels of {p} jumped from {prev[0]}/{prev[1]} to {r}/{w} between steps"))
        for p, r, w in rec.after:
            last[(rec.session, p)] = (r, w)
    return report


def live_breaches(net: Network, index: int = -1, sessions: Iterable[str] | None = None) -> list[InvariantBreach]:
    """Subject reduction for every live member of ``sessions`` (all by default)."""
    wanted = None if sessions is None else set(sessions)
    out = []
    for s in net.sessions:
        if wanted is not None and s.name not in wanted:
            continue
        for p, mp in s.members:
            if not subject_reduction_holds(mp.monitor, mp.process):
                out.append(InvariantBreach(index, "c", f"{s.name}[{p}] not adequate for its monitor"))
    return out


# -- static checks ----------------------------------------------------------


def typecheck_scenario(sc: Scenario) -> list[str]:
    """Problems preventing ``sc`` from running; empty when it is valid."""
    problems = []
    for name, sg in sc.globals:
        err = well_formed(sg)
        if err:
            problems.append(f"global {name}: {err}")
    for entry in sc.repo:
        errs = type_errors(entry.type)
        if errs:
            problems.append(f"type {entry.name}: {errs[0]}")
            continue
        try:
            t = synthesize(None, entry.process)
        except IllTyped as exc:
            problems.append(f"process {entry.name}: {exc.reason}")
            continue
        if not (subtype(t, entry.type) and subtype(entry.type, t)):
            problems.append(f"process {entry.name}: declared type does not match the process")
    return problems


# -- running ----------------------------------------------------------------


def _scripted_pick(steps: list[Step], priority: tuple[str, ...]) -> Step:
    rank = {rule: i for i, rule in enumerate(priority)}
    fallback = {rule: len(priority) + i for i, rule in enumerate(RULES)}
    return min(steps, key=lambda s: (rank.get(s.rule, fallback[s.rule]), s))


def run(
    sc: Scenario,
    seed: int | None = None,
    depth: int | None = None,
    kind: str | None = None,
    priority: tuple[str, ...] | None = None,
    observer: Callable[[Network, TraceRecord], None] | None = None,
) -> Trace:
    """One execution of ``sc``. Random runs pick uniformly among enabled
    steps with a generator seeded by ``seed``; scripted runs take the first
    enabled step in rule-priority order. Stops when nothing is enabled or
    after ``depth`` steps."""
    strat = sc.strategy
    seed = strat.seed if seed is None else seed
    depth = strat.depth if depth is None else depth
    kind = kind or ("random" if strat.kind == "exhaustive" else strat.kind)
    priority = strat.priority if priority is None else priority
    rng = random.Random(seed)
    engine = Engine.for_scenario(sc)
    net = Network(sc.initiators)
    records = []
    while len(records) < depth:
        steps = engine.enabled_steps(net)
        if not steps:
            break
        step = rng.choice(steps) if kind == "random" else _scripted_pick(steps, priority)
        net, effect = engine._fire(net, step)
        rec = TraceRecord.from_effect(len(records), step, effect)
        records.append(rec)
        if observer is not None:
            observer(net, rec)
    return Trace(tuple(records), sc.lattice, net)


def run_random(sc: Scenario, seed: int | None = None, depth: int | None = None, **kw) -> Trace:
    return run(sc, seed=seed, depth=depth, kind="random", **kw)


# -- exhaustive exploration -------------------------------------------------


class BudgetExceeded(Exception):
    pass


_NONCE = re.compile(r"#(\d+)")


def network_key(net: Network) -> str:
    """Canonical text of ``net`` up to session names, nonce names and the
    order of messages between different pairs."""
    parts = []
    for s in net.sessions:
        members = ";".join(
            f"{p}|{mp.reading}|{mp.writing}|{render_monitor(mp.monitor)}|"
            f"{render_process(subst_channel(mp.process, SessionChannel('*', p)))}"
            for p, mp in s.members
        )
        queue = sorted(enumerate(s.queue), key=lambda im: (im[1].sender, im[1].receiver, im[0]))
        origin = s.origin.name or render_sgt(s.origin) if s.origin is not None else "-"
        parts.append(f"{members}/{','.join(render_message(m) for _, m in queue)}/{origin}")
    parts.sort()
    inits = sorted(sg.name or render_sgt(sg) for sg in net.initiators)
    text = "init:" + ",".join(inits) + "||" + "||".join(parts)
    names: dict[str, str] = {}
    return _NONCE.sub(lambda m: "#" + names.setdefault(m[1], str(len(names))), text)


@dataclass
class ExplorationReport:
    states: int = 0
    edges: int = 0
    terminals: int = 0
    stuck: list[Network] = field(default_factory=list)
    depth_reached: int = 0
    truncated: bool = False
    budget: BudgetExceeded | None = None
    breaches: list[InvariantBreach] = field(default_factory=list)
    rules_seen: dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.breaches and not self.stuck


def explore(sc: Scenario, depth: int | None = None, cap: int | None = None, check: bool = True) -> ExplorationReport:
    """Breadth-first enumeration of the networks reachable from ``sc``'s
    initial network in at most ``depth`` steps, deduplicated by
    :func:`network_key`. Every traversed step is checked against the trace
    invariants and every reached network for subject reduction."""
    depth = sc.strategy.depth if depth is None else depth
    cap = sc.strategy.cap if cap is None else cap
    engine = Engine.for_scenario(sc)
    report = ExplorationReport()
    start = Network(sc.initiators)
    seen = {network_key(start)}
    frontier = deque([(start, 0)])
    report.states = 1
    while frontier:
        net, d = frontier.popleft()
        report.depth_reached = max(report.depth_reached, d)
        steps = engine.enabled_steps(net)
        if not steps:
            if net.empty:
                report.terminals += 1
            else:
                report.stuck.append(net)
            continue
        if d >= depth:
            continue
        for step in steps:
            nxt, effect = engine._fire(net, step)
            report.edges += 1
            report.rules_seen[step.rule] = report.rules_seen.get(step.rule, 0) + 1
            if check:
                rec = TraceRecord.from_effect(d, step, effect)
                report.breaches.extend(record_breaches(rec, sc.lattice))
            key = network_key(nxt)
            if key in seen:
                continue
            if len(seen) >= cap:
                report.truncated = True
                report.budget = BudgetExceeded(f"state cap {cap} reached")
                continue
            seen.add(key)
            report.states += 1
            if check:
                report.breaches.extend(live_breaches(nxt, d, [effect.session]))
            frontier.append((nxt, d + 1))
    return report
