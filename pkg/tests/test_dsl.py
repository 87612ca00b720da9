import random

import pytest

from aglens.cert.boolean import certify_machine
from aglens.cert.plfun import PLFun
from aglens.core import FiniteSet, Interface
from aglens.dsl import (
    DOCUMENT_KINDS,
    CertPart,
    CertSpec,
    Document,
    ParseError,
    SimulationSpec,
    TrueSet,
    bind_interface_certificate,
    bind_machine_certificate,
    load_document,
    parse_document,
    parse_machine,
    print_document,
    wiring_lens,
)
from aglens.expr import Var
from aglens.ode import LyapunovCandidate
from aglens.test_utils import random_document
from aglens.wiring import make_cascade

FIXTURES = [
    "ok_go.machine",
    "ok_go.cert",
    "cascade.wiring",
    "par.wiring",
    "par.cert",
    "ident.wiring",
    "ident.cert",
    "ident.sim",
    "linear.ode",
    "unstable.ode",
    "quad.cand",
    "ident.qlens",
]


@pytest.mark.parametrize("name", FIXTURES)
def test_fixtures_are_canonical(fixture_dir, name):
    path = fixture_dir / name
    document = load_document(path)
    assert print_document(document) == path.read_text()
    assert parse_document(print_document(document)) == document


@pytest.mark.parametrize("seed", range(1000))
def test_random_round_trip(seed):
    document = random_document(random.Random(seed))
    assert parse_document(print_document(document)) == document


KINDS = ["machine", "wiring", "bool-cert", "quant-cert", "ode"]


@pytest.mark.parametrize("kind", KINDS)
def test_random_round_trip_per_kind(kind):
    rng = random.Random(kind)
    for _ in range(5):
        document = random_document(rng, kind)
        assert document.kind == kind
        assert parse_document(print_document(document)) == document


def test_machine_fixture(fixture_dir, ok_go_machine, linear_ode, quadratic_candidate):
    assert load_document(fixture_dir / "ok_go.machine").body == ok_go_machine
    text = print_document(Document("ode", "linear", linear_ode))
    assert text == (fixture_dir / "linear.ode").read_text()
    text = print_document(Document("quant-cert", "quad", quadratic_candidate))
    assert text == (fixture_dir / "quad.cand").read_text()


def test_cascade_recipe(fixture_dir):
    lens = wiring_lens(load_document(fixture_dir / "cascade.wiring"))
    expected = make_cascade(
        FiniteSet.of("a"),
        FiniteSet.of("u"),
        FiniteSet.of("m0", "m1"),
        FiniteSet.of("v0", "v1"),
    )
    assert lens == expected


def test_simulation_spec(fixture_dir):
    spec = load_document(fixture_dir / "ident.sim").body
    assert isinstance(spec, SimulationSpec)
    assert spec.source == spec.target == "ok_go.machine"
    assert spec.push == ((("ok", "go"), "go"), (("err", "go"), "go"))
    assert spec.map == (("s0", "s0"), ("s1", "s1"))


def test_bind_machine_certificate(fixture_dir, ok_go_machine):
    spec = load_document(fixture_dir / "ok_go.cert").body
    cert = bind_machine_certificate(spec, ok_go_machine)
    assert cert.phi.true_set() == ("s0",)
    assert cert.icert.alpha(("ok", "go"))
    assert not cert.icert.alpha(("err", "go"))
    assert certify_machine(ok_go_machine, cert)


def test_missing_alpha_follows_gamma():
    iface = Interface.simple(["ok", "err"], ["go", "stop"])
    spec = parse_document("bool-cert c\ngamma: ok\n").body
    icert = bind_interface_certificate(spec.part(), iface)
    assert icert.alpha(("ok", "stop"))
    assert not icert.alpha(("err", "go"))
    everything = parse_document("bool-cert c\nphi: *\n").body.part()
    assert everything.phi.is_all and everything.gamma is None
    bar = parse_document("bool-cert c\ngamma: ok err\nalpha-bar: stop\n").body.part()
    icert = bind_interface_certificate(bar, iface)
    assert icert.alpha(("err", "stop"))
    assert not icert.alpha(("ok", "go"))


def test_certificate_parts():
    spec = parse_document(
        "bool-cert c\nouter.gamma: *\ninner.gamma:\nalpha:\n  ok -> *\ngamma: ok\n"
    ).body
    assert [prefix for prefix, _ in spec.parts] == ["", "inner", "outer"]
    expected = CertPart(gamma=TrueSet(("ok",)), alpha=(("ok", TrueSet(None)),))
    assert spec.part("") == expected
    assert spec.part("inner").gamma == TrueSet(())
    with pytest.raises(ValueError, match="no 'middle' certificate"):
        CertSpec(spec.parts).part("middle")


def test_nondeterministic_machine():
    text = (
        "machine coin nondeterministic\n"
        "states: h t\n"
        "interface:\n"
        "  up -> flip\n"
        "view:\n"
        "  h -> up\n"
        "  t -> up\n"
        "update:\n"
        "  h flip -> {h t}\n"
        "  t flip -> {}\n"
    )
    machine = parse_machine(text).body
    assert machine.update[("h", "flip")] == frozenset({"h", "t"})
    assert machine.update[("t", "flip")] == frozenset()
    assert print_document(parse_machine(text)) == text


def test_ill_formed_certificate():
    text = "bool-cert bad\ngamma: ok\nalpha:\n  err -> go\n"
    with pytest.raises(ParseError, match="Ill-formed certificate") as info:
        parse_document(text, "bad.cert")
    assert (info.value.span.line, info.value.span.column) == (4, 3)
    assert str(info.value).startswith("bad.cert:4:3: Ill-formed certificate")


def test_expression_spans():
    text = "ode bad\nfield:\n  -x1 +\ndomain:\n  x1 -1 1\n"
    with pytest.raises(ParseError) as info:
        parse_document(text, "bad.ode")
    assert str(info.value).startswith("bad.ode:3:8: Unexpected 'end of input'")
    assert "variable" in info.value.expected
    text = "quant-cert c\ncandidate:\n  phi: x1^\n"
    with pytest.raises(ParseError, match="integer literals") as info:
        parse_document(text)
    assert (info.value.span.line, info.value.span.column) == (3, 11)
    assert info.value.expected == ("integer",)


@pytest.mark.parametrize(
    "text, message, line, column",
    [
        ("widget m\n", "Unknown document kind", 1, 1),
        ("machine\n", "Expected a document name", 1, 8),
        ("machine m\nstates: s0\nbogus: x\n", "Unknown section 'bogus'", 3, 1),
        ("machine m\nstates: s0\n", "Missing section 'interface'", 1, 1),
        ("machine m\nstates: s0 s0\n", "Duplicate symbol 's0'", 2, 12),
        ("machine m\nstates: (s0\n", "Malformed symbol", 2, 9),
        ("machine m weird\n", "Unknown machine kind", 1, 1),
        ("wiring w parallel\nfirst-obs: a\n", "Missing section 'first-actions'", 1, 1),
        ("ode o\nfield:\n  x1\ndomain:\n  x2 -1 1\n", "Expected bounds of x1", 5, 3),
        ("bool-cert c\n", "Empty certificate file", 1, 1),
        ("  machine m\n", "The header must start at column 1", 1, 3),
        ("", "Empty document", 1, 1),
        (
            "machine m\nstates:\ninterface:\n  ok -> go\nview:\nupdate:\n",
            "Section 'states' lists no state",
            2,
            1,
        ),
        (
            "machine m\nstates: s0\ninterface:\nview:\nupdate:\n",
            "Section 'interface' lists no observation",
            3,
            1,
        ),
        (
            "wiring w lens\nsource:\ntarget:\n  ok -> go\nforward:\nbackward:\n",
            "Section 'source' lists no observation",
            2,
            1,
        ),
        (
            "wiring w cascade\nactions: a\nfirst: u\nmiddle:\nsecond: v\n",
            "Section 'middle' lists no symbol",
            4,
            1,
        ),
    ],
)
def test_parse_errors(text, message, line, column):
    with pytest.raises(ParseError, match=message) as info:
        parse_document(text)
    assert (info.value.span.line, info.value.span.column) == (line, column)


def test_invariant_violation():
    text = (
        "machine m\n"
        "states: s0\n"
        "interface:\n"
        "  ok -> go\n"
        "view:\n"
        "  s0 -> bad\n"
        "update:\n"
        "  s0 go -> s0\n"
    )
    message = "Invariant violation: View sends 's0'"
    with pytest.raises(ParseError, match=message) as info:
        parse_document(text)
    assert info.value.span.line == 1


def test_kind_mismatch(fixture_dir):
    with pytest.raises(ParseError, match="Expected a machine document, got 'ode'"):
        parse_machine((fixture_dir / "linear.ode").read_text())
    assert "simulation" in DOCUMENT_KINDS


def test_candidate_defaults():
    body = parse_document("quant-cert c\ncandidate:\n  phi: x1^2\n").body
    assert body == LyapunovCandidate(Var("x1") ** 2)
    assert body.lam == PLFun.zero()


def test_empty_carrier_expectation():
    with pytest.raises(ParseError) as info:
        parse_document("machine void\nstates:\ninterface:\nview:\nupdate:\n")
    assert info.value.expected == ("state",)
    assert info.value.span.length == len("states")
