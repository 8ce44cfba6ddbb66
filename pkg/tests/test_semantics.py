import random

import pytest
from hypothesis import given, settings, strategies as st

from gen import gen_taint_config
from oracles import taint_by_reachability
from secadapt.lattice import two_point
from secadapt.parser import parse_expr, parse_global, parse_monitor, parse_process
from secadapt.scenario import PolicySpec
from secadapt.semantics import (
    Engine,
    EvalError,
    InapplicableStep,
    Input,
    LevelTag,
    Message,
    MonitoredProcess,
    Network,
    NonceSupply,
    NoSuchBranch,
    NoSuchTransition,
    Output,
    Session,
    Step,
    consumable,
    erase_input,
    eval_expr,
    fresh_nonce,
    monitor_step,
    process_transitions,
    taint_set,
)
from secadapt.syntax import MEnd, Nil, Nonce, SecurityGlobalType, SessionChannel, Value

LAT = two_point()


def proc(text, **sorts):
    return parse_process(text, sorts or None, LAT)


def test_monitor_steps():
    m2 = parse_monitor("r!{x(nat).end}")
    m = parse_monitor("p?{a(nat).end, b(bool).r!{x(nat).end}}")
    assert monitor_step(m, "p", "?", "b") == m2
    assert monitor_step(parse_monitor("q!{a(nat).end}"), "q", "!", "a") == MEnd()
    with pytest.raises(NoSuchTransition):
        monitor_step(parse_monitor("q!{a(nat).end}"), "q", "!", "b")
    assert monitor_step(parse_monitor("mu t. q!{a(nat).t}"), "q", "!", "a") == parse_monitor("mu t. q!{a(nat).t}")


def test_erase_input():
    m1, m2 = parse_monitor("q!{c(nat).end}"), parse_monitor("r?{d(nat).end}")
    m = parse_monitor("p?{a(nat).q!{c(nat).end}, b(bool).r?{d(nat).end}}")
    assert erase_input(m, "p", "a") == m1
    assert erase_input(m, "p", "b") == m2
    assert erase_input(parse_monitor("p?{a(nat).end}"), "p", "a") == MEnd()
    with pytest.raises(NoSuchBranch):
        erase_input(parse_monitor("p?{a(nat).end}"), "p", "b")


def test_evaluation():
    assert eval_expr(parse_expr("#3"), LAT) == Nonce(3)
    assert eval_expr(parse_expr("4@lo < 7@hi"), LAT) == Value(True, "hi")
    assert eval_expr(parse_expr("x"), LAT, {"x": Nonce(0)}) == Nonce(0)
    assert eval_expr(parse_expr("2@lo + 3@hi"), LAT) == Value(5, "hi")
    assert eval_expr(parse_expr("2@lo - 3@lo"), LAT) == Value(0, "lo")
    assert eval_expr(parse_expr("1@lo + #2 + #1"), LAT) == Nonce(2)
    assert eval_expr(parse_expr("not (true@lo and false@hi)"), LAT) == Value(True, "hi")
    with pytest.raises(EvalError):
        eval_expr(parse_expr("true@lo + 1@lo"), LAT)
    with pytest.raises(EvalError):
        eval_expr(parse_expr("x"), LAT)


def test_output_transition():
    (t,) = process_transitions(proc("s[p]!q:l(2@lo + 3@hi).0", l="nat"), LAT)
    assert t.action == Output(SessionChannel("s", "p"), "q", "l", Value(5, "hi"))
    assert t.cont == Nil()


def test_conditional_transition():
    (t,) = process_transitions(proc("if true@hi then s[p]!q:a(1@lo).0 else 0", a="nat"), LAT)
    assert t.action == LevelTag("hi")
    assert t.cont == proc("s[p]!q:a(1@lo).0", a="nat")
    assert process_transitions(proc("if #0 then 0 else 0"), LAT) == []


def test_sum_input_discards_other_summand():
    p = proc("s[p]?q:a(x).s[p]!q:c(x).0 + s[p]?q:b(x).0", a="nat", b="nat", c="nat")
    ts = process_transitions(p, LAT)
    assert [t.action.label for t in ts] == ["a", "b"]
    first = ts[0]
    assert isinstance(first.action, Input)
    assert first.action.accept(first.cont, Value(7, "lo")) == proc("s[p]!q:c(7@lo).0", c="nat")


def test_sum_level_step_stays_in_place():
    p = proc("(if true@hi then s[p]!q:a(1@lo).0 else s[p]!q:b(1@lo).0) + s[p]?q:c(x).0", a="nat", b="nat", c="nat")
    (tag, _) = process_transitions(p, LAT)
    assert tag.action == LevelTag("hi")
    assert tag.cont == proc("s[p]!q:a(1@lo).0 + s[p]?q:c(x).0", a="nat", c="nat")


def test_recursion_unfolds():
    p = proc("mu X. s[p]?q:a(x).X", a="nat")
    (t,) = process_transitions(p, LAT)
    assert t.action.accept(t.cont, Value(1, "lo")) == p


def m(p, q, l, v):
    return Message(p, q, l, v)


def test_consumable():
    one, two = Value(1, "lo"), Value(2, "lo")
    assert consumable((m("p", "q", "a", one), m("p", "q", "b", two)), "q", "p") == m("p", "q", "a", one)
    assert consumable((m("r", "q", "a", one), m("p", "q", "b", two)), "q", "p") == m("p", "q", "b", two)
    assert consumable((m("p", "r", "a", one),), "q", "p") is None


def test_fresh_nonces():
    supply = NonceSupply()
    n0, supply = fresh_nonce(supply)
    n1, supply = fresh_nonce(supply)
    assert (n0, n1) == (Nonce(0), Nonce(1))
    assert LAT.bottom == "lo"  # nonces sit at the bottom level


def mp(monitor, r, w, process, **sorts):
    return MonitoredProcess(parse_monitor(monitor), r, w, proc(process, **sorts))


def net_of(*members, queue=(), name="s0"):
    return Network((), (Session(name, tuple(sorted(members)), tuple(queue)),), NonceSupply(), 1)


def rules(engine, net):
    return sorted(s.rule for s in engine.enabled_steps(net))


def test_init_is_the_only_step():
    sg = SecurityGlobalType.of(parse_global("p -> q : { l(nat). end }"), {"p": "hi", "q": "lo"})
    engine = Engine(LAT)
    net = Network((sg,))
    assert rules(engine, net) == ["Init"]
    after = engine.apply_step(net, engine.enabled_steps(net)[0])
    (s,) = after.sessions
    assert s.member("p").reading == "hi" and s.member("p").writing == "lo"
    assert s.member("q").process.chan == SessionChannel("s0", "q")


def test_init_of_end_leaves_nothing():
    sg = SecurityGlobalType.of(parse_global("end"), {})
    engine = Engine(LAT)
    net = engine.apply_step(Network((sg,)), Step("", "Init", ()))
    assert net.empty


def test_write_violation_offers_adaptation():
    engine = Engine(LAT)
    net = net_of(
        ("p", mp("q!{l(nat).end}", "hi", "hi", "s0[p]!q:l(5@lo).0", l="nat")),
        ("q", mp("p?{l(nat).end}", "lo", "lo", "s0[q]?p:l(x).0", l="nat")),
    )
    assert rules(engine, net) == ["OutGlob", "OutLoc"]


def test_read_violation_offers_adaptation():
    engine = Engine(LAT)
    net = net_of(
        ("p", mp("q?{l(nat).end}", "lo", "lo", "s0[p]?q:l(x).0", l="nat")),
        queue=[m("q", "p", "l", Value(5, "hi"))],
    )
    assert rules(engine, net) == ["InGlob", "InLoc"]


def test_out_then_in():
    engine = Engine(LAT)
    net = net_of(
        ("p", mp("q!{l(nat).end}", "hi", "lo", "s0[p]!q:l(5@hi).0", l="nat")),
        ("q", mp("p?{l(nat).end}", "hi", "lo", "s0[q]?p:l(x).0", l="nat")),
    )
    (out,) = engine.enabled_steps(net)
    net, eff = engine.fire(net, out)
    (s,) = net.sessions
    assert s.queue == (m("p", "q", "l", Value(5, "hi")),)
    assert eff.before == eff.after == (("p", "hi", "lo"),)
    (inp,) = engine.enabled_steps(net)
    assert inp.rule == "In"
    net = engine.apply_step(net, inp)
    assert net.empty


def test_out_glob_downgrades_reading_level():
    engine = Engine(LAT)
    net = net_of(
        ("p", mp("q!{l(nat).end}", "hi", "hi", "s0[p]!q:l(5@lo).s0[p]?q:k(y).0", l="nat", k="nat")),
        ("q", mp("p?{l(nat).end}", "lo", "lo", "s0[q]?p:l(x).0", l="nat")),
    )
    step = next(s for s in engine.enabled_steps(net) if s.rule == "OutGlob")
    net, eff = engine.fire(net, step)
    s = net.sessions[0]
    assert s.queue == (m("p", "q", "l", Nonce(0)),)
    assert eff.after == (("p", "lo", "hi"),)
    assert net.nonces == NonceSupply(1)


def test_out_loc_skips_the_exchange():
    engine = Engine(LAT)
    net = net_of(
        ("p", mp("q!{l(nat).q?{k(nat).end}}", "hi", "hi", "s0[p]!q:l(5@lo).s0[p]?q:k(y).0", l="nat", k="nat")),
        ("q", mp("p?{l(nat).p!{k(nat).end}}", "lo", "lo", "s0[q]?p:l(x).s0[q]!p:k(x).0", l="nat", k="nat")),
    )
    step = next(s for s in engine.enabled_steps(net) if s.rule == "OutLoc")
    net, eff = engine.fire(net, step)
    s = net.sessions[0]
    assert s.queue == ()
    assert s.member("q").monitor == parse_monitor("p!{k(nat).end}")
    assert s.member("q").process == proc("s0[q]!p:k(0@lo).0", k="nat")
    assert s.member("p").reading == "lo"


def test_out_loc_waits_for_pending_messages():
    engine = Engine(LAT)
    net = net_of(
        ("p", mp("q!{l(nat).end}", "hi", "hi", "s0[p]!q:l(5@lo).0", l="nat")),
        ("q", mp("p?{k(nat).p?{l(nat).end}}", "lo", "lo", "s0[q]?p:k(x).s0[q]?p:l(x).0", l="nat", k="nat")),
        queue=[m("p", "q", "k", Value(1, "lo"))],
    )
    assert "OutLoc" not in rules(engine, net)


def test_in_glob_delivers_a_nonce():
    engine = Engine(LAT)
    net = net_of(
        ("p", mp("q?{l(nat).r!{m(nat).end}}", "lo", "lo", "s0[p]?q:l(x).s0[p]!r:m(x).0", l="nat", m="nat")),
        ("r", mp("p?{m(nat).end}", "hi", "lo", "s0[r]?p:m(x).0", m="nat")),
        queue=[m("q", "p", "l", Value(5, "hi"))],
    )
    step = next(s for s in engine.enabled_steps(net) if s.rule == "InGlob")
    net, eff = engine.fire(net, step)
    s = net.sessions[0]
    assert s.queue == ()
    assert s.member("p").process == proc("s0[p]!r:m(#0).0", m="nat")
    assert eff.nonce == 0


def test_in_loc_replaces_the_process():
    engine = Engine(LAT)
    net = net_of(
        ("p", mp("q?{l(nat).r!{m(nat).end}}", "lo", "lo", "s0[p]?q:l(x).s0[p]!r:m(x).0", l="nat", m="nat")),
        queue=[m("q", "p", "l", Value(5, "hi"))],
    )
    step = next(s for s in engine.enabled_steps(net) if s.rule == "InLoc")
    net = engine.apply_step(net, step)
    s = net.sessions[0]
    assert s.member("p").process == proc("s0[p]!r:m(0@lo).0", m="nat")
    assert s.member("p").monitor == parse_monitor("r!{m(nat).end}")


def test_refresh_isolates_tainted_members():
    replacement = SecurityGlobalType.of(parse_global("p -> q : { z(nat). end }"), {"p": "lo", "q": "lo"}, "Z")
    engine = Engine(LAT, policy=PolicySpec("template", "Z"), templates={"Z": replacement})
    net = net_of(
        ("p", mp("q!{a(nat).end}", "lo", "lo", "s0[p]!q:a(#0).0", a="nat")),
        ("q", mp("p?{a(nat).end}", "lo", "lo", "s0[q]?p:a(x).0", a="nat")),
        ("r", mp("t!{b(nat).end}", "lo", "lo", "s0[r]!t:b(1@lo).0", b="nat")),
        queue=[m("p", "q", "x", Value(1, "lo")), m("r", "t", "y", Value(2, "lo"))],
    )
    step = next(s for s in engine.enabled_steps(net) if s.rule == "Refresh")
    assert step.actors == ("p", "q") and step.nonce == 0
    net = engine.apply_step(net, step)
    (s,) = net.sessions
    assert [p for p, _ in s.members] == ["r"]
    assert s.queue == (m("r", "t", "y", Value(2, "lo")),)
    assert net.initiators == (replacement,)


def test_terminate_policy_adds_nothing():
    engine = Engine(LAT)
    net = net_of(("p", mp("q!{a(nat).end}", "lo", "lo", "s0[p]!q:a(#0).0", a="nat")))
    step = next(s for s in engine.enabled_steps(net) if s.rule == "Refresh")
    assert engine.apply_step(net, step).empty


def test_uplev_raises_writing_level():
    engine = Engine(LAT)
    net = net_of(("p", mp("q!{a(nat).end}", "hi", "lo",
                          "if 1@hi < 2@lo then s0[p]!q:a(1@hi).0 else s0[p]!q:a(2@hi).0", a="nat")))
    assert rules(engine, net) == ["UpLev"]
    net, eff = engine.fire(net, engine.enabled_steps(net)[0])
    assert eff.after == (("p", "hi", "hi"),)


def test_inapplicable_step():
    engine = Engine(LAT)
    net = net_of(("p", mp("q!{a(nat).end}", "lo", "lo", "s0[p]!q:a(1@lo).0", a="nat")))
    with pytest.raises(InapplicableStep):
        engine.fire(net, Step("s0", "In", ("p",), "a"))


def test_taint_examples():
    lo = "lo"
    members = {
        "p": MonitoredProcess(parse_monitor("q!{a(nat).end}"), lo, lo, proc("s0[p]!q:a(#0).0", a="nat")),
        "q": MonitoredProcess(parse_monitor("p?{a(nat).r!{b(nat).end}}"), lo, lo, proc("s0[q]?p:a(x).0", a="nat")),
        "r": MonitoredProcess(parse_monitor("q?{b(nat).end}"), lo, lo, proc("s0[r]?q:b(x).0", b="nat")),
        "u": MonitoredProcess(parse_monitor("v!{c(nat).end}"), lo, lo, proc("s0[u]!v:c(1@lo).0", c="nat")),
    }
    assert taint_set(members, (), 1) == frozenset()
    assert taint_set(members, (), 0) == {"p", "q", "r"}
    clean = {k: v for k, v in members.items() if k != "p"}
    queue = (m("p", "q", "a", Nonce(0)),)
    assert taint_set(clean, queue, 0) == {"q", "r"}


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_taint_matches_oracle(seed):
    members, queue, i = gen_taint_config(random.Random(seed))
    assert set(taint_set(members, queue, i)) == taint_by_reachability(members, queue, i)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_taint_monotone_in_seed(seed):
    members, queue, i = gen_taint_config(random.Random(seed))
    extra = queue + tuple(m(p, q, "a", Nonce(i)) for p in members for q in members if p != q)[:1]
    assert taint_set(members, queue, i) <= taint_set(members, extra, i)
