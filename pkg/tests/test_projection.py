import random

import pytest
from hypothesis import given, settings, strategies as st

from secadapt.parser import parse_global, parse_monitor
from secadapt.projection import UndefinedProjection, project, project_all, well_formed
from secadapt.syntax import (
    Comm,
    GEnd,
    GRec,
    GVar,
    MEnd,
    SecurityGlobalType,
    alpha_monitor,
    participants,
    unfold_global,
    unfold_monitor,
    validate_monitor,
)


def test_single_communication():
    g = parse_global("p -> q : { l(nat). end }")
    assert project(g, "p") == parse_monitor("q!{l(nat).end}")
    assert project(g, "q") == parse_monitor("p?{l(nat).end}")


def test_uninvolved_participant_with_equal_branches():
    g = parse_global("p -> q : { a(nat). q -> r : { m(bool). end }, b(nat). q -> r : { m(bool). end } }")
    assert project(g, "r") == parse_monitor("q?{m(bool).end}")


def test_uninvolved_participant_with_different_branches():
    g = parse_global("p -> q : { a(nat). q -> r : { m(bool). end }, b(nat). end }")
    with pytest.raises(UndefinedProjection) as info:
        project(g, "r")
    assert info.value.participant == "r"


def test_recursion_not_involving_participant_collapses():
    g = parse_global("p -> q : { go(nat). mu t. q -> r : { m(nat). t } }")
    assert project(g, "p") == parse_monitor("q!{go(nat).end}")
    assert project(g, "r") == parse_monitor("mu t. q?{m(nat).t}")


def test_absent_participant_gets_end():
    assert project(parse_global("p -> q : { l(nat). end }"), "z") == MEnd()


def test_well_formed():
    ok = SecurityGlobalType.of(parse_global("p -> q : { l(nat). end }"), {"p": "hi", "q": "lo"})
    assert well_formed(ok) is None
    bad = SecurityGlobalType.of(
        parse_global("p -> q : { a(nat). q -> r : { m(bool). end }, b(nat). end }"),
        {"p": "lo", "q": "lo", "r": "lo"},
    )
    assert "r" in well_formed(bad)
    partial = SecurityGlobalType.of(parse_global("p -> q : { l(nat). end }"), {"p": "hi"})
    assert "incomplete L" in well_formed(partial)


def gen_global(rng, depth, parts=("p", "q", "r"), ready=(), fresh=None):
    fresh = fresh if fresh is not None else iter(range(100))
    roll = rng.random()
    if depth == 0 or roll < 0.15:
        return GVar(rng.choice(ready)) if ready and rng.random() < 0.5 else GEnd()
    if roll < 0.3:
        t = f"t{next(fresh)}"
        body = _comm(rng, depth - 1, parts, ready + (t,), fresh)
        return GRec(t, body)
    return _comm(rng, depth, parts, ready, fresh)


def _comm(rng, depth, parts, ready, fresh):
    p, q = rng.sample(parts, 2)
    labels = rng.sample(["a", "b", "c"], rng.randint(1, 2))
    # every branch shares one continuation so the projection stays defined
    cont = gen_global(rng, depth - 1, parts, ready, fresh)
    return Comm(p, q, tuple((l, "nat", cont) for l in labels))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_projections_are_valid_monitors(seed):
    g = gen_global(random.Random(seed), 4)
    for m in project_all(g).values():
        assert validate_monitor(m) == []


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_projection_commutes_with_unfolding(seed):
    g = gen_global(random.Random(seed), 4)
    for p in participants(g) | {"z"}:
        left = alpha_monitor(unfold_monitor(project(unfold_global(g), p)))
        right = alpha_monitor(unfold_monitor(project(g, p)))
        assert left == right
