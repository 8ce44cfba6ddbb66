import pytest

from secadapt import scenarios
from secadapt.cli import main


def test_run_writes_trace_and_check_accepts_it(tmp_path, capsys):
    out = tmp_path / "t.trace"
    assert main(["run", str(scenarios.path("shop")), "--seed", "42", "--trace", str(out)]) == 0
    assert out.read_text().startswith("# lattice")
    assert main(["check", str(out)]) == 0
    assert "0 breaches" in capsys.readouterr().out


def test_check_flags_forged_trace(tmp_path):
    out = tmp_path / "bad.trace"
    out.write_text(
        "# lattice elements=lo,hi edges=lo<hi\n"
        "index=0 rule=In session=s0 actors=p message='q>p:l(5@hi)' before=p:lo/lo after=p:lo/lo "
        "violation=- nonce=-\n"
    )
    assert main(["check", str(out)]) == 1


def test_run_to_stdout(capsys):
    assert main(["run", str(scenarios.path("two-party-ok")), "--seed", "1"]) == 0
    assert "rule=Init" in capsys.readouterr().out


def test_explore(capsys):
    assert main(["explore", str(scenarios.path("two-party-ok")), "--depth", "30"]) == 0
    out = capsys.readouterr().out
    assert "terminal 1" in out and "stuck 0" in out


def test_project(capsys):
    assert main(["project", str(scenarios.path("leak-read")), "--global", "Forward"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out == ["p: q!{l(nat).end}", "q: p?{l(nat).r!{m(nat).end}}", "r: q?{m(nat).end}"]
    assert main(["project", str(scenarios.path("leak-read")), "--global", "Nope"]) == 2


def test_typecheck(tmp_path, capsys):
    assert main(["typecheck", str(scenarios.path("refresh-chain"))]) == 0
    bad = tmp_path / "bad.scn"
    bad.write_text(
        "lattice { elements lo, hi; edges (lo, hi) }\n"
        "global G = p -> q : { l(nat). end };\nlevels G = { p: lo, q: lo };\n"
        "process P [l: nat] = y!q:l(1@lo).0;\ntype P = ?q:l(nat).end;\n"
    )
    assert main(["typecheck", str(bad)]) == 1


def test_parse_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.scn"
    bad.write_text("lattice { elements lo; edges }\nglobal G = p -> \n")
    assert main(["typecheck", str(bad)]) == 2
    assert main(["run", str(tmp_path / "missing.scn")]) == 2


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2
