"""Tokenizer and recursive-descent parser for the concrete syntax.

Entry points: :func:`parse_scenario` for whole scenario files and
``parse_global`` / ``parse_monitor`` / ``parse_type`` / ``parse_process`` /
``parse_expr`` for single terms. The grammar is documented in README.md.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .lattice import Lattice, NotALattice
from .scenario import PolicySpec, RepoEntry, Scenario, Strategy
from .syntax import (
    SORTS,
    BinOp,
    Comm,
    Cond,
    GEnd,
    GRec,
    GVar,
    Lit,
    MEnd,
    MIn,
    MOut,
    MRec,
    MVar,
    Nil,
    Nonce,
    NonceRef,
    PRec,
    PVar,
    Recv,
    SecurityGlobalType,
    Send,
    SessionChannel,
    Sum,
    TAnd,
    TEnd,
    TIn,
    TOr,
    TOut,
    TRec,
    TVar,
    UnOp,
    UserChannel,
    Value,
    Var,
    participants,
    validate_global,
    validate_process,
)


class ParseError(ValueError):
    def __init__(self, location: tuple[int, int], expectation: str):
        self.location = location
        self.expectation = expectation
        super().__init__(f"line {location[0]}, column {location[1]}: {expectation}")


class InvariantViolation(ValueError):
    pass


@dataclass(frozen=True)
class Token:
    kind: str  # ident | num | sym | eof
    text: str
    line: int
    col: int


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym>->|[{}()\[\]:;,.?!@\#+\-<=&|])
    """,
    re.VERBOSE,
)

KEYWORDS = {"mu", "end", "if", "then", "else", "true", "false", "and", "or", "not"}


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError((line, pos - line_start + 1), f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            tokens.append(Token(kind, chunk, line, pos - line_start + 1))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class Parser:
    def __init__(self, text: str, lattice: Lattice | None = None, default_level: str | None = None):
        self.toks = tokenize(text)
        self.i = 0
        self.lattice = lattice
        self.default_level = default_level if default_level is not None else (lattice.bottom if lattice else None)
        self.sorts: dict[str, str] = {}

    # -- token helpers --

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def fail(self, expectation: str):
        t = self.tok
        found = t.text or "end of input"
        raise ParseError((t.line, t.col), f"expected {expectation}, found {found!r}")

    def at(self, text: str) -> bool:
        return self.tok.kind in ("sym", "ident") and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(repr(text))
        t = self.tok
        self.i += 1
        return t

    def ident(self, what: str = "identifier") -> str:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            self.fail(what)
        self.i += 1
        return t.text

    def number(self) -> int:
        t = self.tok
        if t.kind != "num":
            self.fail("number")
        self.i += 1
        return int(t.text)

    def sort(self) -> str:
        t = self.tok
        s = self.ident("sort")
        if s not in SORTS:
            raise ParseError((t.line, t.col), f"expected sort (nat or bool), found {s!r}")
        return s

    def level(self) -> str:
        t = self.tok
        lv = self.ident("security level")
        if self.lattice is not None and lv not in self.lattice:
            raise ParseError((t.line, t.col), f"level {lv!r} is not in the lattice")
        return lv

    def done(self):
        if self.tok.kind != "eof":
            self.fail("end of input")

    # -- global types --

    def global_type(self):
        if self.accept("mu"):
            t = self.ident("recursion variable")
            self.expect(".")
            return GRec(t, self.global_type())
        if self.accept("end"):
            return GEnd()
        name = self.ident("global type")
        if not self.accept("->"):
            return GVar(name)
        receiver = self.ident("receiver")
        self.expect(":")
        self.expect("{")
        branches = [self._gbranch()]
        while self.accept(","):
            branches.append(self._gbranch())
        self.expect("}")
        return Comm(name, receiver, tuple(branches))

    def _gbranch(self):
        label = self.ident("label")
        self.expect("(")
        s = self.sort()
        self.expect(")")
        self.expect(".")
        return (label, s, self.global_type())

    # -- monitors --

    def monitor(self):
        if self.accept("mu"):
            t = self.ident("recursion variable")
            self.expect(".")
            return MRec(t, self.monitor())
        if self.accept("end"):
            return MEnd()
        name = self.ident("monitor")
        if self.at("?") or self.at("!"):
            cls = MIn if self.tok.text == "?" else MOut
            self.i += 1
            self.expect("{")
            branches = [self._mbranch()]
            while self.accept(","):
                branches.append(self._mbranch())
            self.expect("}")
            return cls(name, tuple(branches))
        return MVar(name)

    def _mbranch(self):
        label = self.ident("label")
        self.expect("(")
        s = self.sort()
        self.expect(")")
        self.expect(".")
        return (label, s, self.monitor())

    # -- process types: '.' binds tighter than '&', which binds tighter than '|' --

    def ptype(self):
        if self.at("mu"):
            return self._tmu()
        ops = [self._tand()]
        while self.accept("|"):
            ops.append(self._tand())
        return ops[0] if len(ops) == 1 else TOr(tuple(ops))

    def _tmu(self):
        self.expect("mu")
        t = self.ident("recursion variable")
        self.expect(".")
        return TRec(t, self.ptype())

    def _tand(self):
        ops = [self._tatom()]
        while self.accept("&"):
            ops.append(self._tatom())
        return ops[0] if len(ops) == 1 else TAnd(tuple(ops))

    def _tatom(self):
        if self.accept("("):
            t = self.ptype()
            self.expect(")")
            return t
        if self.at("?") or self.at("!"):
            cls = TIn if self.tok.text == "?" else TOut
            self.i += 1
            peer = self.ident("participant")
            self.expect(":")
            label = self.ident("label")
            self.expect("(")
            s = self.sort()
            self.expect(")")
            self.expect(".")
            cont = self._tmu() if self.at("mu") else self._tatom()
            return cls(peer, label, s, cont)
        if self.accept("end"):
            return TEnd()
        if self.at("mu"):
            return self._tmu()
        return TVar(self.ident("type"))

    # -- expressions --

    def expr(self):
        e = self._and()
        while self.accept("or"):
            e = BinOp("or", e, self._and())
        return e

    def _and(self):
        e = self._not()
        while self.accept("and"):
            e = BinOp("and", e, self._not())
        return e

    def _not(self):
        if self.accept("not"):
            return UnOp("not", self._not())
        return self._cmp()

    def _cmp(self):
        e = self._add()
        if self.at("<") or self.at("="):
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self._add())
        return e

    def _add(self):
        e = self._atom()
        while self.at("+") or self.at("-"):
            # '+' is also process choice; only arithmetic inside expressions
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self._atom())
        return e

    def _atom(self):
        t = self.tok
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "num":
            self.i += 1
            return Lit(Value(int(t.text), self._lit_level()))
        if self.at("true") or self.at("false"):
            self.i += 1
            return Lit(Value(t.text == "true", self._lit_level()))
        if self.accept("#"):
            return NonceRef(self.number())
        return Var(self.ident("expression"))

    def _lit_level(self) -> str:
        if self.accept("@"):
            return self.level()
        if self.default_level is None:
            self.fail("'@level' annotation on literal")
        return self.default_level

    def value(self):
        t = self.tok
        e = self._atom()
        if isinstance(e, Lit):
            return e.value
        if isinstance(e, NonceRef):
            return Nonce(e.index)
        raise ParseError((t.line, t.col), "expected value or nonce")

    # -- processes: prefix binds tightest, then '+', then 'mu' --

    def process(self):
        if self.at("mu"):
            return self._pmu()
        p = self._prefixed()
        while self.accept("+"):
            p = Sum(p, self._prefixed())
        return p

    def _pmu(self):
        self.expect("mu")
        x = self.ident("process variable")
        self.expect(".")
        return PRec(x, self.process())

    def _prefixed_or_mu(self):
        return self._pmu() if self.at("mu") else self._prefixed()

    def _prefixed(self):
        t = self.tok
        if self.accept("("):
            p = self.process()
            self.expect(")")
            return p
        if t.kind == "num" and t.text == "0":
            self.i += 1
            return Nil()
        if self.accept("if"):
            test = self.expr()
            self.expect("then")
            a = self._prefixed_or_mu()
            self.expect("else")
            b = self._prefixed_or_mu()
            return Cond(test, a, b)
        if self.at("mu"):
            return self._pmu()
        name = self.ident("process")
        if self.at("["):
            self.i += 1
            part = self.ident("participant")
            self.expect("]")
            chan = SessionChannel(name, part)
            if not (self.at("?") or self.at("!")):
                self.fail("'?' or '!' after session channel")
        elif self.at("?") or self.at("!"):
            chan = UserChannel(name)
        else:
            return PVar(name)
        inbound = self.tok.text == "?"
        self.i += 1
        peer = self.ident("participant")
        self.expect(":")
        label = self.ident("label")
        self.expect("(")
        if inbound:
            var = self.ident("variable")
        else:
            e = self.expr()
        sort = self.sort() if self.accept(":") else self.sorts.get(label)
        self.expect(")")
        self.expect(".")
        cont = self._prefixed_or_mu()
        if inbound:
            return Recv(chan, peer, label, var, sort, cont)
        return Send(chan, peer, label, e, sort, cont)

    # -- scenarios --

    def scenario(self, name: str | None = None) -> Scenario:
        if not self.at("lattice"):
            self.fail("'lattice' block")
        lattice = self._lattice_block()
        self.lattice = lattice
        self.default_level = lattice.bottom

        gtypes: dict[str, object] = {}
        levels: dict[str, dict[str, str]] = {}
        processes: dict[str, tuple] = {}
        types: dict[str, object] = {}
        policy = PolicySpec()
        strategy = Strategy()
        start: list[str] | None = None

        while self.tok.kind != "eof":
            t = self.tok
            head = self.ident("statement keyword")
            if head == "global":
                gname = self.ident("global name")
                if gname in gtypes:
                    raise InvariantViolation(f"global {gname} declared twice")
                self.expect("=")
                gtypes[gname] = self.global_type()
            elif head == "levels":
                gname = self.ident("global name")
                self.expect("=")
                self.expect("{")
                lmap: dict[str, str] = {}
                while not self.at("}"):
                    part = self.ident("participant")
                    self.expect(":")
                    lmap[part] = self.level()
                    if not self.accept(","):
                        break
                self.expect("}")
                levels[gname] = lmap
            elif head == "process":
                pname = self.ident("process name")
                if pname in processes:
                    raise InvariantViolation(f"process {pname} declared twice")
                sorts: dict[str, str] = {}
                if self.accept("["):
                    while not self.at("]"):
                        label = self.ident("label")
                        self.expect(":")
                        sorts[label] = self.sort()
                        if not self.accept(","):
                            break
                    self.expect("]")
                self.expect("=")
                self.sorts = sorts
                processes[pname] = (self.process(), tuple(sorts.items()))
                self.sorts = {}
            elif head == "type":
                pname = self.ident("process name")
                self.expect("=")
                types[pname] = self.ptype()
            elif head == "policy":
                kind = self.ident("policy")
                if kind == "template":
                    self.accept(":")
                    policy = PolicySpec("template", self.ident("global name"))
                elif kind in ("terminate", "restart"):
                    policy = PolicySpec(kind)
                else:
                    raise ParseError((t.line, t.col), f"unknown policy {kind!r}")
            elif head == "strategy":
                strategy = self._strategy()
            elif head == "start":
                start = [self.ident("global name")]
                while self.accept(","):
                    start.append(self.ident("global name"))
            else:
                raise ParseError((t.line, t.col), f"unknown statement {head!r}")
            self.accept(";")

        return _assemble(lattice, gtypes, levels, processes, types, policy, strategy, start, name)

    def _lattice_block(self) -> Lattice:
        t = self.tok
        self.expect("lattice")
        self.expect("{")
        self.expect("elements")
        elements = [self.ident("level")]
        while self.accept(","):
            elements.append(self.ident("level"))
        self.accept(";")
        edges = []
        if self.accept("edges"):
            while self.at("("):
                self.expect("(")
                lo = self.ident("level")
                self.expect(",")
                hi = self.ident("level")
                self.expect(")")
                edges.append((lo, hi))
                if not self.accept(","):
                    break
            self.accept(";")
        self.expect("}")
        self.accept(";")
        try:
            return Lattice(elements, edges)
        except NotALattice as exc:
            raise ParseError((t.line, t.col), f"a lattice ({exc})") from None

    def _strategy(self) -> Strategy:
        t = self.tok
        kind = self.ident("strategy kind")
        opts: dict = {}
        if kind == "scripted":
            self.expect("[")
            prio = []
            while not self.at("]"):
                prio.append(self.ident("rule name"))
                if not self.accept(","):
                    break
            self.expect("]")
            opts["priority"] = tuple(prio)
        while self.at("seed") or self.at("depth") or self.at("cap"):
            key = self.tok.text
            self.i += 1
            opts[key] = self.number()
        try:
            return Strategy(kind=kind, **opts)
        except ValueError as exc:
            raise ParseError((t.line, t.col), str(exc)) from None


def _assemble(lattice, gtypes, levels, processes, types, policy, strategy, start, name) -> Scenario:
    problems: list[str] = []
    globals_ = []
    for gname, g in gtypes.items():
        for err in validate_global(g):
            problems.append(f"global {gname}{err}")
        if gname not in levels:
            problems.append(f"global {gname} has no levels declaration")
            continue
        parts = participants(g)
        lmap = levels[gname]
        if set(lmap) != set(parts):
            missing = sorted(set(parts) - set(lmap))
            extra = sorted(set(lmap) - set(parts))
            problems.append(f"levels {gname}: incomplete L (missing {missing}, extra {extra})")
        globals_.append((gname, SecurityGlobalType.of(g, lmap, gname)))
    for lname in levels:
        if lname not in gtypes:
            problems.append(f"levels for undeclared global {lname}")

    repo = []
    for pname, (proc, sorts) in processes.items():
        for err in validate_process(proc):
            problems.append(f"process {pname}{err}")
        if pname not in types:
            problems.append(f"process {pname} has no declared type")
            continue
        repo.append(RepoEntry(pname, proc, types[pname], sorts))
    for tname in types:
        if tname not in processes:
            problems.append(f"type for undeclared process {tname}")

    if policy.kind == "template" and policy.template not in gtypes:
        problems.append(f"policy template {policy.template} is not a declared global")
    if start is None:
        start = [g for g in gtypes if g != policy.template]
    for s in start:
        if s not in gtypes:
            problems.append(f"start names undeclared global {s}")
    if problems:
        raise InvariantViolation("; ".join(problems))
    return Scenario(lattice, tuple(globals_), tuple(repo), policy, strategy, tuple(start), name)


def _parse_with(method: str, text: str, lattice=None, default_level=None, **kw):
    p = Parser(text, lattice, default_level)
    for k, v in kw.items():
        setattr(p, k, v)
    result = getattr(p, method)()
    p.done()
    return result


def parse_global(text: str):
    g = _parse_with("global_type", text)
    errors = validate_global(g)
    if errors:
        raise InvariantViolation("; ".join(errors))
    return g


def parse_monitor(text: str):
    return _parse_with("monitor", text)


def parse_type(text: str):
    return _parse_with("ptype", text)


def parse_expr(text: str, lattice: Lattice | None = None, default_level: str | None = None):
    return _parse_with("expr", text, lattice, default_level)


def parse_value(text: str):
    return _parse_with("value", text)


def parse_process(text: str, sorts: dict[str, str] | None = None, lattice: Lattice | None = None,
                  default_level: str | None = None):
    return _parse_with("process", text, lattice, default_level, sorts=dict(sorts or {}))


def parse_scenario(text: str, name: str | None = None) -> Scenario:
    p = Parser(text)
    return p.scenario(name)


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), path.stem)
