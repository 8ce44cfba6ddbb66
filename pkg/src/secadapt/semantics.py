"""Monitored network reduction.

Networks are immutable values. :class:`Engine` enumerates the steps enabled
in a network and applies them, producing a new network together with an
:class:`Effect` describing what happened (used to build trace records).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

from .lattice import Lattice
from .scenario import RULES, PolicySpec, RepoEntry, Scenario
from .syntax import (
    BinOp,
    Cond,
    Lit,
    Message,
    MEnd,
    MIn,
    MOut,
    Nonce,
    NonceRef,
    Recv,
    SecurityGlobalType,
    Send,
    SessionChannel,
    Sum,
    UnOp,
    Value,
    Var,
    monitor_peers,
    process_nonces,
    subst_channel,
    subst_value,
    unfold_monitor,
    unfold_process,
)
from .projection import project
from .typesys import adequate, canonical_process


class EvalError(ValueError):
    pass


class NoSuchTransition(ValueError):
    pass


class NoSuchBranch(ValueError):
    pass


class InapplicableStep(ValueError):
    pass


# -- expressions ------------------------------------------------------------


def eval_expr(e, lattice: Lattice, bindings: Mapping | None = None):
    """Evaluate ``e`` to a value or a nonce.

    The level of a result is the join of the levels of everything it was
    computed from. Any operator applied to a nonce yields that nonce (the
    leftmost one when there are several). Subtraction is truncated at 0.
    """
    match e:
        case Lit(v):
            return v
        case NonceRef(i):
            return Nonce(i)
        case Var(x):
            if bindings is None or x not in bindings:
                raise EvalError(f"unbound variable {x}")
            return bindings[x]
        case UnOp("not", a):
            u = eval_expr(a, lattice, bindings)
            if isinstance(u, Nonce):
                return u
            if type(u.payload) is not bool:
                raise EvalError("'not' applied to a number")
            return Value(not u.payload, u.level)
        case BinOp(op, a, b):
            u = eval_expr(a, lattice, bindings)
            v = eval_expr(b, lattice, bindings)
            if isinstance(u, Nonce):
                return u
            if isinstance(v, Nonce):
                return v
            return Value(_apply(op, u.payload, v.payload), lattice.join(u.level, v.level))
    raise EvalError(f"cannot evaluate {e!r}")


def _apply(op, a, b):
    nat = type(a) is int and type(b) is int
    boolean = type(a) is bool and type(b) is bool
    if op == "+" and nat:
        return a + b
    if op == "-" and nat:
        return max(0, a - b)
    if op == "<" and nat:
        return a < b
    if op == "=" and (nat or boolean):
        return a == b
    if op == "and" and boolean:
        return a and b
    if op == "or" and boolean:
        return a or b
    raise EvalError(f"'{op}' applied to {a!r} and {b!r}")


def level_of(u, lattice: Lattice) -> str:
    return lattice.bottom if isinstance(u, Nonce) else u.level


# -- monitor and process transitions ----------------------------------------


def monitor_step(m, peer: str, direction: str, label: str):
    """Continuation of ``m`` after action ``peer?label`` or ``peer!label``."""
    m = unfold_monitor(m)
    kind = MIn if direction == "?" else MOut
    if isinstance(m, kind) and m.peer == peer:
        for lab, _, cont in m.branches:
            if lab == label:
                return cont
    raise NoSuchTransition(f"monitor offers no {peer}{direction}{label}")


def erase_input(m, sender: str, label: str):
    m = unfold_monitor(m)
    if isinstance(m, MIn) and m.peer == sender:
        for lab, _, cont in m.branches:
            if lab == label:
                return cont
    raise NoSuchBranch(f"no input {sender}?{label} at the head of the monitor")


@dataclass(frozen=True)
class Input:
    """A receive capability; any payload of the sort, or any nonce, fits."""

    chan: SessionChannel
    peer: str
    label: str
    var: str
    sort: str

    def accept(self, cont, payload):
        return subst_value(cont, self.var, payload)


@dataclass(frozen=True)
class Output:
    chan: SessionChannel
    peer: str
    label: str
    payload: object


@dataclass(frozen=True)
class LevelTag:
    level: str


@dataclass(frozen=True)
class Transition:
    action: object
    cont: object  # for Input, the continuation before the payload is bound


def process_transitions(p, lattice: Lattice) -> list[Transition]:
    p = unfold_process(p)
    match p:
        case Recv(c, peer, label, x, sort, cont):
            return [Transition(Input(c, peer, label, x, sort), cont)]
        case Send(c, peer, label, e, _, cont):
            return [Transition(Output(c, peer, label, eval_expr(e, lattice)), cont)]
        case Cond(test, a, b):
            u = eval_expr(test, lattice)
            if isinstance(u, Nonce):
                return []
            if type(u.payload) is not bool:
                raise EvalError("condition did not evaluate to a boolean")
            return [Transition(LevelTag(u.level), a if u.payload else b)]
        case Sum(a, b):
            out = []
            for t in process_transitions(a, lattice):
                out.append(Transition(t.action, Sum(t.cont, b)) if isinstance(t.action, LevelTag) else t)
            for t in process_transitions(b, lattice):
                out.append(Transition(t.action, Sum(a, t.cont)) if isinstance(t.action, LevelTag) else t)
            return out
    return []


# -- networks ---------------------------------------------------------------


@dataclass(frozen=True)
class MonitoredProcess:
    monitor: object
    reading: str
    writing: str
    process: object


@dataclass(frozen=True)
class Session:
    name: str
    members: tuple[tuple[str, MonitoredProcess], ...]
    queue: tuple[Message, ...] = ()
    origin: SecurityGlobalType | None = None

    def member(self, p: str) -> MonitoredProcess | None:
        for q, mp in self.members:
            if q == p:
                return mp
        return None

    def with_member(self, p: str, mp: MonitoredProcess) -> "Session":
        return replace(self, members=tuple((q, mp if q == p else old) for q, old in self.members))

    @property
    def member_map(self) -> dict[str, MonitoredProcess]:
        return dict(self.members)


@dataclass(frozen=True)
class NonceSupply:
    next_index: int = 0


def fresh_nonce(supply: NonceSupply) -> tuple[Nonce, NonceSupply]:
    return Nonce(supply.next_index), NonceSupply(supply.next_index + 1)


@dataclass(frozen=True)
class Network:
    initiators: tuple[SecurityGlobalType, ...] = ()
    sessions: tuple[Session, ...] = ()
    nonces: NonceSupply = NonceSupply()
    next_session: int = 0

    def session(self, name: str) -> Session:
        for s in self.sessions:
            if s.name == name:
                return s
        raise KeyError(name)

    @property
    def empty(self) -> bool:
        return not self.initiators and not self.sessions


def consumable(queue, receiver: str, sender: str) -> Message | None:
    """The first message from ``sender`` to ``receiver``: messages of other
    pairs can always be commuted out of its way."""
    for m in queue:
        if m.sender == sender and m.receiver == receiver:
            return m
    return None


def _without(queue, msg):
    i = queue.index(msg)
    return queue[:i] + queue[i + 1:]


def taint_set(members: Mapping[str, MonitoredProcess], queue, nonce_index: int) -> frozenset[str]:
    """Participants that hold nonce ``nonce_index`` or may communicate,
    directly or transitively, with one that does."""
    tainted = {p for p, mp in members.items() if nonce_index in process_nonces(mp.process)}
    tainted |= {
        m.receiver for m in queue
        if m.payload == Nonce(nonce_index) and m.receiver in members
    }
    changed = True
    while changed:
        changed = False
        for p, mp in members.items():
            if p not in tainted and monitor_peers(mp.monitor) & tainted:
                tainted.add(p)
                changed = True
    return frozenset(tainted)


def session_nonces(s: Session) -> set[int]:
    out = set()
    for _, mp in s.members:
        out |= process_nonces(mp.process)
    out |= {m.payload.index for m in s.queue if isinstance(m.payload, Nonce)}
    return out


# -- steps ------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Step:
    session: str
    rule: str
    actors: tuple[str, ...]
    label: str = ""
    choice: int = 0
    nonce: int = -1

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule}")


@dataclass(frozen=True)
class Effect:
    """What a step did, in terms a trace record needs."""

    session: str
    actors: tuple[str, ...]
    message: Message | None = None
    before: tuple[tuple[str, str, str], ...] = ()
    after: tuple[tuple[str, str, str], ...] = ()
    nonce: int | None = None
    checkpoints: tuple[tuple[str, object, object], ...] = ()


def _levels(session: Session, actors) -> tuple[tuple[str, str, str], ...]:
    out = []
    for p in actors:
        mp = session.member(p)
        if mp is not None:
            out.append((p, mp.reading, mp.writing))
    return tuple(out)


def _checkpoints(session: Session | None, actors) -> tuple:
    if session is None:
        return ()
    out = []
    for p in actors:
        mp = session.member(p)
        if mp is not None:
            out.append((p, mp.monitor, mp.process))
    return tuple(out)


@dataclass
class Engine:
    """Reduction for networks over ``lattice`` with repository ``repo`` and
    adaptation policy ``policy`` (templates are looked up in ``templates``)."""

    lattice: Lattice
    repo: tuple[RepoEntry, ...] = ()
    policy: PolicySpec = PolicySpec()
    templates: Mapping[str, SecurityGlobalType] = field(default_factory=dict)
    _lookup_cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def for_scenario(cls, sc: Scenario) -> "Engine":
        return cls(sc.lattice, sc.repo, sc.policy, dict(sc.globals))

    # repository

    def implementation(self, monitor):
        """First repository process adequate for ``monitor``, else the
        canonical process of ``monitor``."""
        hit = self._lookup_cache.get(monitor)
        if hit is None:
            for entry in self.repo:
                if adequate(entry.type, monitor):
                    hit = entry.process
                    break
            else:
                hit = canonical_process(monitor, self.lattice.bottom)[0]
            self._lookup_cache[monitor] = hit
        return hit

    def adapt(self, tainted: Mapping[str, MonitoredProcess], session: Session) -> tuple[SecurityGlobalType, ...]:
        """The adaptation function: a replacement choreography, if any."""
        kind = self.policy.kind
        if kind == "terminate":
            return ()
        if kind == "restart":
            return (session.origin,) if session.origin is not None else ()
        return (self.templates[self.policy.template],)

    # enumeration

    def enabled_steps(self, net: Network) -> list[Step]:
        steps = [Step("", "Init", (), choice=i) for i in range(len(net.initiators))]
        for s in net.sessions:
            steps.extend(self._session_steps(s))
        return sorted(steps)

    def _session_steps(self, s: Session) -> list[Step]:
        lat = self.lattice
        steps: list[Step] = []
        for p, mp in s.members:
            trans = process_transitions(mp.process, lat)
            for i, t in enumerate(trans):
                if isinstance(t.action, LevelTag):
                    steps.append(Step(s.name, "UpLev", (p,), choice=i))
            m = unfold_monitor(mp.monitor)
            if isinstance(m, MOut):
                labels = {b[0] for b in m.branches}
                for i, t in enumerate(trans):
                    a = t.action
                    if not (isinstance(a, Output) and a.peer == m.peer and a.label in labels):
                        continue
                    if isinstance(a.payload, Nonce) or lat.leq(mp.writing, a.payload.level):
                        steps.append(Step(s.name, "Out", (p,), a.label, i))
                    elif s.member(m.peer) is not None:
                        # both adaptations need the receiver's reading level
                        steps.append(Step(s.name, "OutGlob", (p,), a.label, i))
                        if self._can_skip(s, p, m.peer, a.label):
                            steps.append(Step(s.name, "OutLoc", (p, m.peer), a.label, i))
            elif isinstance(m, MIn):
                msg = consumable(s.queue, p, m.peer)
                if msg is None or msg.label not in {b[0] for b in m.branches}:
                    continue
                offer = next(
                    (i for i, t in enumerate(trans)
                     if isinstance(t.action, Input) and t.action.peer == m.peer and t.action.label == msg.label),
                    None,
                )
                if lat.leq(level_of(msg.payload, lat), mp.reading):
                    if offer is not None:
                        steps.append(Step(s.name, "In", (p,), msg.label, offer))
                else:
                    if offer is not None:
                        steps.append(Step(s.name, "InGlob", (p,), msg.label, offer))
                    steps.append(Step(s.name, "InLoc", (p,), msg.label))
        members = s.member_map
        for i in sorted(session_nonces(s)):
            tainted = taint_set(members, s.queue, i)
            if tainted:
                steps.append(Step(s.name, "Refresh", tuple(sorted(tainted)), nonce=i))
        return steps

    def _can_skip(self, s: Session, sender: str, receiver: str, label: str) -> bool:
        # the receiver must be waiting for exactly this input, with nothing
        # from the sender still in flight towards it
        rec = s.member(receiver)
        if rec is None or consumable(s.queue, receiver, sender) is not None:
            return False
        m = unfold_monitor(rec.monitor)
        return isinstance(m, MIn) and m.peer == sender and any(b[0] == label for b in m.branches)

    # application

    def apply_step(self, net: Network, step: Step) -> Network:
        return self.fire(net, step)[0]

    def fire(self, net: Network, step: Step) -> tuple[Network, Effect]:
        if step not in self.enabled_steps(net):
            raise InapplicableStep(f"{step} is not enabled")
        return self._fire(net, step)

    def _fire(self, net: Network, step: Step) -> tuple[Network, Effect]:
        if step.rule == "Init":
            return self._init(net, step.choice)
        s = net.session(step.session)
        handler = getattr(self, f"_rule_{step.rule}")
        new_s, nonces, effect, spawned = handler(s, step, net.nonces)
        new_s = _collect(new_s)
        sessions = tuple(
            x for x in (new_s if o.name == s.name else o for o in net.sessions) if x is not None
        )
        effect = replace(effect, checkpoints=_checkpoints(new_s, effect.actors))
        return Network(net.initiators + spawned, sessions, nonces, net.next_session), effect

    def _init(self, net: Network, index: int):
        sg = net.initiators[index]
        name = f"s{net.next_session}"
        members = []
        for p, level in sg.levels:
            m = project(sg.g, p)
            proc = subst_channel(self.implementation(m), SessionChannel(name, p))
            members.append((p, MonitoredProcess(m, level, self.lattice.bottom, proc)))
        session = _collect(Session(name, tuple(sorted(members)), (), sg))
        rest = net.initiators[:index] + net.initiators[index + 1:]
        sessions = net.sessions + ((session,) if session is not None else ())
        actors = tuple(p for p, _ in sg.levels)
        effect = Effect(
            name, actors,
            after=_levels(session, actors) if session else (),
            checkpoints=_checkpoints(session, actors),
        )
        return Network(rest, sessions, net.nonces, net.next_session + 1), effect

    def _transition(self, mp: MonitoredProcess, step: Step) -> Transition:
        return process_transitions(mp.process, self.lattice)[step.choice]

    def _rule_UpLev(self, s, step, nonces):
        (p,) = step.actors
        mp = s.member(p)
        t = self._transition(mp, step)
        new = replace(mp, writing=self.lattice.join(mp.writing, t.action.level), process=t.cont)
        s2 = s.with_member(p, new)
        return s2, nonces, Effect(s.name, (p,), before=_levels(s, (p,)), after=_levels(s2, (p,))), ()

    def _rule_Out(self, s, step, nonces):
        (p,) = step.actors
        mp = s.member(p)
        t = self._transition(mp, step)
        a = t.action
        msg = Message(p, a.peer, a.label, a.payload)
        new = replace(mp, monitor=monitor_step(mp.monitor, a.peer, "!", a.label), process=t.cont)
        s2 = replace(s.with_member(p, new), queue=s.queue + (msg,))
        lv = _levels(s, (p,))
        return s2, nonces, Effect(s.name, (p,), msg, lv, _levels(s2, (p,))), ()

    def _rule_In(self, s, step, nonces):
        (p,) = step.actors
        mp = s.member(p)
        m = unfold_monitor(mp.monitor)
        msg = consumable(s.queue, p, m.peer)
        t = self._transition(mp, step)
        new = replace(
            mp,
            monitor=monitor_step(m, m.peer, "?", msg.label),
            process=t.action.accept(t.cont, msg.payload),
        )
        s2 = replace(s.with_member(p, new), queue=_without(s.queue, msg))
        lv = _levels(s, (p,))
        return s2, nonces, Effect(s.name, (p,), msg, lv, _levels(s2, (p,))), ()

    def _rule_InGlob(self, s, step, nonces):
        (p,) = step.actors
        mp = s.member(p)
        m = unfold_monitor(mp.monitor)
        msg = consumable(s.queue, p, m.peer)
        t = self._transition(mp, step)
        n, nonces = fresh_nonce(nonces)
        new = replace(
            mp,
            monitor=monitor_step(m, m.peer, "?", msg.label),
            process=t.action.accept(t.cont, n),
        )
        s2 = replace(s.with_member(p, new), queue=_without(s.queue, msg))
        lv = _levels(s, (p,))
        return s2, nonces, Effect(s.name, (p,), msg, lv, _levels(s2, (p,)), n.index), ()

    def _rule_InLoc(self, s, step, nonces):
        (p,) = step.actors
        mp = s.member(p)
        m = unfold_monitor(mp.monitor)
        msg = consumable(s.queue, p, m.peer)
        cont = monitor_step(m, m.peer, "?", msg.label)
        proc = subst_channel(self.implementation(cont), SessionChannel(s.name, p))
        s2 = replace(s.with_member(p, replace(mp, monitor=cont, process=proc)), queue=_without(s.queue, msg))
        lv = _levels(s, (p,))
        return s2, nonces, Effect(s.name, (p,), msg, lv, _levels(s2, (p,))), ()

    def _rule_OutGlob(self, s, step, nonces):
        (p,) = step.actors
        mp = s.member(p)
        t = self._transition(mp, step)
        a = t.action
        n, nonces = fresh_nonce(nonces)
        msg = Message(p, a.peer, a.label, n)
        new = replace(
            mp,
            monitor=monitor_step(mp.monitor, a.peer, "!", a.label),
            reading=self.lattice.meet(mp.reading, s.member(a.peer).reading),
            process=t.cont,
        )
        s2 = replace(s.with_member(p, new), queue=s.queue + (msg,))
        lv = _levels(s, (p,))
        return s2, nonces, Effect(s.name, (p,), msg, lv, _levels(s2, (p,)), n.index), ()

    def _rule_OutLoc(self, s, step, nonces):
        p, q = step.actors
        mp = s.member(p)
        t = self._transition(mp, step)
        a = t.action
        rec = s.member(q)
        new = replace(
            mp,
            monitor=monitor_step(mp.monitor, q, "!", a.label),
            reading=self.lattice.meet(mp.reading, rec.reading),
            process=t.cont,
        )
        cont = erase_input(rec.monitor, p, a.label)
        proc = subst_channel(self.implementation(cont), SessionChannel(s.name, q))
        s2 = s.with_member(p, new).with_member(q, replace(rec, monitor=cont, process=proc))
        msg = Message(p, q, a.label, a.payload)
        return s2, nonces, Effect(s.name, (p, q), msg, _levels(s, (p, q)), _levels(s2, (p, q))), ()

    def _rule_Refresh(self, s, step, nonces):
        tainted = set(step.actors)
        removed = {p: mp for p, mp in s.members if p in tainted}
        s2 = replace(
            s,
            members=tuple((p, mp) for p, mp in s.members if p not in tainted),
            queue=tuple(m for m in s.queue if m.sender not in tainted and m.receiver not in tainted),
        )
        spawned = self.adapt(removed, s)
        effect = Effect(s.name, step.actors, before=_levels(s, step.actors), nonce=step.nonce)
        return s2, nonces, effect, spawned


def _collect(s: Session) -> Session | None:
    """Erase members whose monitor has ended; drop a session left empty."""
    members = tuple((p, mp) for p, mp in s.members if not isinstance(mp.monitor, MEnd))
    if not members:
        return None
    return s if len(members) == len(s.members) else replace(s, members=members)


def initial_network(sc: Scenario) -> Network:
    return Network(sc.initiators)


__all__ = [
    "EvalError", "NoSuchTransition", "NoSuchBranch", "InapplicableStep", "eval_expr", "level_of",
    "monitor_step", "erase_input", "Input", "Output", "LevelTag", "Transition", "process_transitions",
    "MonitoredProcess", "Session", "NonceSupply", "fresh_nonce", "Network", "consumable", "taint_set",
    "session_nonces", "Step", "Effect", "Engine", "initial_network",
]
