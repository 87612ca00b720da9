import random

import pytest

from aglens.core import (
    Chart,
    FiniteSet,
    Interface,
    InterfaceMismatch,
    Lens,
    NonSimpleInterface,
    WellFormednessError,
    compose_chart,
    compose_lens,
    identity_chart,
    identity_lens,
    lens_equal_up_to_relabel,
    parallel_interface,
    parallel_lens,
    swap_lens,
)
from aglens.symbols import (
    flatten_symbol,
    format_symbol,
    nest,
    parse_symbol,
    rebracket,
    sorted_symbols,
    unnest,
)
from aglens.test_utils import random_interface, random_lens

SEEDS = range(20)
LAW_SEEDS = range(1000)


def test_finite_set():
    assert FiniteSet.of("a", "b") == FiniteSet.of("b", "a")
    assert list(FiniteSet.of("b", "a")) == ["b", "a"]
    assert "a" in FiniteSet.of("a")
    assert FiniteSet.of("a", "b").product(FiniteSet.of("c")).elements == (
        ("a", "c"),
        ("b", "c"),
    )
    with pytest.raises(WellFormednessError, match="Duplicate symbol 'a'"):
        FiniteSet.of("a", "b", "a")


def test_interface():
    iface = Interface.simple(["ok", "err"], ["go"])
    assert iface.is_simple
    assert iface.constant_actions() == FiniteSet.of("go")
    assert list(iface.pairs()) == [("ok", "go"), ("err", "go")]

    dependent = Interface(FiniteSet.of("ok", "err"), {"ok": ["go"], "err": ["stop"]})
    assert not dependent.is_simple
    with pytest.raises(NonSimpleInterface):
        dependent.constant_actions()

    with pytest.raises(WellFormednessError, match="No action set"):
        Interface(FiniteSet.of("ok", "err"), {"ok": ["go"]})
    with pytest.raises(WellFormednessError, match="unknown observation"):
        Interface(FiniteSet.of("ok"), {"ok": ["go"], "err": ["go"]})


def test_interface_equality_ignores_order():
    left = Interface.simple(["ok", "err"], ["go", "stop"])
    right = Interface.simple(["err", "ok"], ["stop", "go"])
    assert left == right
    other = Interface.simple(["ok", "err"], ["go"])
    assert left != other


def test_lens_well_formedness():
    src = Interface.simple(["ok", "err"], ["go"])
    dst = Interface.simple(["up"], ["x", "y"])
    fwd = {"ok": "up", "err": "up"}
    bwd = {(o, a): "go" for o in ["ok", "err"] for a in ["x", "y"]}
    assert Lens(src, dst, fwd, bwd) == Lens.from_functions(
        src, dst, lambda o: "up", lambda o, a: "go"
    )
    with pytest.raises(WellFormednessError, match="Forward map sends 'ok'"):
        Lens(src, dst, {"ok": "down", "err": "up"}, {})
    with pytest.raises(WellFormednessError, match="outside the fiber of 'ok'"):
        Lens.from_functions(src, dst, lambda o: "up", lambda o, a: "stop")
    with pytest.raises(WellFormednessError, match="Backward map undefined"):
        Lens(src, dst, fwd, {})
    with pytest.raises(WellFormednessError, match="outside the fiber-compatible"):
        Lens(src, dst, fwd, {**bwd, ("err", "z"): "go"})


def test_compose_lens_tables():
    a = Interface.simple(["p", "q"], ["u", "v"])
    b = Interface.simple(["r"], ["w"])
    c = Interface.simple(["s"], ["x", "y"])
    w = Lens.from_functions(
        a, b, lambda o: "r", lambda o, act: "u" if o == "p" else "v"
    )
    t = Lens.from_functions(b, c, lambda o: "s", lambda o, act: "w")
    composite = compose_lens(t, w)
    assert dict(composite.fwd) == {"p": "s", "q": "s"}
    assert composite.bwd[("p", "x")] == "u"
    assert composite.bwd[("q", "y")] == "v"
    assert (w | t) == composite

    with pytest.raises(InterfaceMismatch, match="compose_lens"):
        compose_lens(w, t)


@pytest.mark.parametrize("seed", LAW_SEEDS)
def test_lens_category_laws(seed):
    rng = random.Random(seed)
    a, b, c, d = (random_interface(rng, prefix=p) for p in "abcd")
    f = random_lens(rng, a, b)
    g = random_lens(rng, b, c)
    h = random_lens(rng, c, d)
    assert compose_lens(h, compose_lens(g, f)) == compose_lens(compose_lens(h, g), f)
    assert compose_lens(identity_lens(b), f) == f
    assert compose_lens(f, identity_lens(a)) == f


@pytest.mark.parametrize("seed", SEEDS)
def test_parallel_lens_laws(seed):
    rng = random.Random(seed)
    a, b, c, d = (random_interface(rng, 2, 2, prefix=p) for p in "abcd")
    f, g = random_lens(rng, a, b), random_lens(rng, b, c)
    h, k = random_lens(rng, c, d), random_lens(rng, d, a)

    # Interchange law
    left = parallel_lens(compose_lens(g, f), compose_lens(k, h))
    right = compose_lens(parallel_lens(g, k), parallel_lens(f, h))
    assert left == right

    # Associativity, up to the bracketing of pair symbols
    nested = parallel_lens(parallel_lens(f, g), h)
    assert nested == parallel_lens(f, g, h)
    right_nested = parallel_lens(f, parallel_lens(g, h))
    assert lens_equal_up_to_relabel(right_nested, nested, rebracket, rebracket)

    # Symmetry
    assert swap_lens(swap_lens(parallel_lens(f, g))) == parallel_lens(f, g)
    assert swap_lens(parallel_lens(f, g)) == parallel_lens(g, f)


def test_parallel_interface():
    first = Interface.simple(["ok"], ["go", "stop"])
    second = Interface(FiniteSet.of("x", "y"), {"x": ["a"], "y": ["b", "c"]})
    product = parallel_interface(first, second)
    assert product.obs.elements == (("ok", "x"), ("ok", "y"))
    assert product.actions[("ok", "y")].elements == (
        ("go", "b"),
        ("go", "c"),
        ("stop", "b"),
        ("stop", "c"),
    )
    assert parallel_interface(first) == first
    with pytest.raises(TypeError):
        parallel_interface()


@pytest.mark.parametrize("seed", SEEDS)
def test_chart_category_laws(seed):
    rng = random.Random(seed)
    a, b, c = (random_interface(rng, simple=True, prefix=p) for p in "abc")

    def chart(src, dst):
        return Chart.from_functions(
            src,
            dst,
            lambda o: rng.choice(dst.obs.elements),
            lambda o, act: rng.choice(dst.constant_actions().elements),
        )

    f, g = chart(a, b), chart(b, c)
    h = chart(c, a)
    left = compose_chart(h, compose_chart(g, f))
    assert left == compose_chart(compose_chart(h, g), f)
    assert compose_chart(identity_chart(b), f) == f
    assert compose_chart(f, identity_chart(a)) == f
    assert (f | g) == compose_chart(g, f)


def test_chart_well_formedness():
    src = Interface.simple(["ok"], ["go"])
    dst = Interface.simple(["up"], ["x"])
    with pytest.raises(WellFormednessError, match="not total at 'ok'"):
        Chart.from_functions(src, dst, lambda o: "down", lambda o, a: "x")
    with pytest.raises(WellFormednessError, match="outside the fiber of 'up'"):
        Chart.from_functions(src, dst, lambda o: "up", lambda o, a: "y")


def test_symbols():
    symbol = (("a", "b"), "c")
    assert format_symbol(symbol) == "((a,b),c)"
    assert parse_symbol("((a,b),c)") == symbol
    assert unnest(symbol, 3) == ["a", "b", "c"]
    assert nest(["a", "b", "c"]) == symbol
    assert nest(["a"]) == "a"
    assert flatten_symbol(("a", ("b", "c"))) == ("a", "b", "c")
    assert rebracket(("a", ("b", "c"))) == symbol
    assert sorted_symbols([("a", "b"), "z", "a"]) == ["a", "z", ("a", "b")]


@pytest.mark.parametrize(
    "text, offset",
    [("(a,b", 4), ("(a b)", 2), ("a)", 1), ("", 0), ("(,b)", 1)],
)
def test_parse_symbol_errors(text, offset):
    with pytest.raises(ValueError, match=f"offset {offset}"):
        parse_symbol(text)
