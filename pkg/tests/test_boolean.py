import itertools
import random

import pytest

from aglens.cert import boolean
from aglens.cert.boolean import (
    InterfaceCertificate,
    MachineCertificate,
    PremiseError,
    Predicate,
    SoundnessError,
    cascade_conditions,
    certify_lens,
    certify_machine,
    comp_rule,
    conjoin_predicates,
    largest_invariant,
    lift_predicate,
    parallel_certificate,
    pullback_certificate,
    simple_certificate,
    subst_rule,
)
from aglens.core import (
    Chart,
    FiniteSet,
    Interface,
    NonSimpleInterface,
    WellFormednessError,
    compose_chart,
    identity_chart,
    identity_lens,
)
from aglens.machines import (
    DETERMINISTIC,
    NONDETERMINISTIC,
    Machine,
    Simulation,
    couple,
    identity_simulation,
)
from aglens.test_utils import (
    random_comp_instance,
    random_interface,
    random_interface_certificate,
    random_lens,
    random_simulation,
)
from aglens.wiring import make_cascade

SEEDS = range(25)
SOUNDNESS_SEEDS = range(500)


def all_predicates(carrier):
    for bits in itertools.product([False, True], repeat=len(carrier)):
        yield Predicate(carrier, dict(zip(carrier, bits)))


def test_predicate():
    carrier = FiniteSet.of("a", "b", "c")
    p = Predicate.of_true(carrier, ["a", "b"])
    q = Predicate.of_true(carrier, ["b", "c"])
    assert (p & q).true_set() == ("b",)
    assert Predicate.constant(carrier, True).true_set() == ("a", "b", "c")
    with pytest.raises(WellFormednessError, match="not in the carrier"):
        Predicate.of_true(carrier, ["d"])
    with pytest.raises(WellFormednessError, match="undefined at 'c'"):
        Predicate(carrier, {"a": True, "b": False})


def test_simple_certificate():
    iface = Interface.simple(["ok", "err"], ["go", "stop"])
    actions = iface.constant_actions()

    everything = simple_certificate(
        iface, Predicate.constant(iface.obs, True), Predicate.constant(actions, True)
    )
    assert everything.alpha.true_set() == iface.pair_set().elements

    nothing = simple_certificate(
        iface, Predicate.constant(iface.obs, False), Predicate.constant(actions, True)
    )
    assert nothing.alpha.true_set() == ()

    cert = simple_certificate(
        iface, Predicate.of_true(iface.obs, ["ok"]), Predicate.of_true(actions, ["go"])
    )
    assert cert.alpha.true_set() == (("ok", "go"),)

    other = Interface(FiniteSet.of("ok", "err"), {"ok": ["go"], "err": ["stop"]})
    with pytest.raises(NonSimpleInterface):
        simple_certificate(
            other,
            Predicate.constant(other.obs, True),
            Predicate.constant(FiniteSet.of("go"), True),
        )


def test_ill_formed_certificate():
    iface = Interface.simple(["ok", "err"], ["go"])
    with pytest.raises(WellFormednessError, match="alpha holds at \\(err, go\\)"):
        InterfaceCertificate(
            iface,
            Predicate.of_true(iface.obs, ["ok"]),
            Predicate.constant(iface.pair_set(), True),
        )


def test_lift_predicate():
    phi = Predicate.of_true(FiniteSet.of("s0", "s1"), ["s0"])
    assert lift_predicate(phi, DETERMINISTIC)("s0")
    assert not lift_predicate(phi, DETERMINISTIC)("s1")
    lifted = lift_predicate(phi, NONDETERMINISTIC)
    assert lifted(frozenset())
    assert lifted(frozenset({"s0"}))
    assert not lifted(frozenset({"s0", "s1"}))


def test_certify_machine(ok_go_machine, ok_go_certificate):
    assert certify_machine(ok_go_machine, ok_go_certificate)

    vacuous = MachineCertificate(
        ok_go_machine,
        Predicate.constant(ok_go_machine.states, False),
        ok_go_certificate.icert,
    )
    assert certify_machine(ok_go_machine, vacuous)

    wrong = MachineCertificate(
        ok_go_machine,
        Predicate.constant(ok_go_machine.states, True),
        ok_go_certificate.icert,
    )
    verdict = certify_machine(ok_go_machine, wrong)
    assert verdict.failed == "guarantee"
    assert verdict.counterexample == ("s1", None)


def test_certify_nondeterministic_machine(ok_go_machine, ok_go_certificate):
    machine = Machine(
        ok_go_machine.states,
        ok_go_machine.iface,
        NONDETERMINISTIC,
        ok_go_machine.view,
        {("s0", "go"): {"s0", "s1"}, ("s1", "go"): {"s0"}},
    )
    cert = MachineCertificate(machine, ok_go_certificate.phi, ok_go_certificate.icert)
    verdict = certify_machine(machine, cert)
    assert not verdict
    assert verdict.failed == "assumption"
    assert verdict.counterexample == ("s0", "go")


def test_largest_invariant(ok_go_machine, ok_go_certificate):
    cert = largest_invariant(ok_go_machine, ok_go_certificate.icert)
    assert cert.phi.true_set() == ("s0",)
    assert certify_machine(ok_go_machine, cert)


def test_certify_lens_identity():
    rng = random.Random(0)
    iface = random_interface(rng)
    cert = random_interface_certificate(rng, iface)
    assert certify_lens(identity_lens(iface), cert, cert)


@pytest.mark.parametrize("seed", SEEDS)
def test_certify_lens_jobs(seed):
    rng = random.Random(seed)
    src, dst = random_interface(rng, prefix="i"), random_interface(rng)
    lens = random_lens(rng, src, dst)
    inner = random_interface_certificate(rng, src)
    outer = random_interface_certificate(rng, dst)
    assert certify_lens(lens, inner, outer) == certify_lens(lens, inner, outer, jobs=4)


def test_pullback_certificate(ok_go_certificate):
    icert = ok_go_certificate.icert
    assert pullback_certificate(identity_chart(icert.iface), icert) == icert

    src = Interface.simple(["good", "bad"], ["run"])
    chart = Chart.from_functions(
        src,
        icert.iface,
        lambda o: "ok" if o == "good" else "err",
        lambda o, a: "go",
    )
    pulled = pullback_certificate(chart, icert)
    assert pulled.gamma.true_set() == ("good",)
    assert pulled.alpha.true_set() == (("good", "run"),)

    point = Interface.simple(["pt"], ["go"])
    trivial = simple_certificate(
        point,
        Predicate.constant(point.obs, True),
        Predicate.constant(point.constant_actions(), True),
    )
    to_point = Chart.from_functions(icert.iface, point, lambda o: "pt", lambda o, a: a)
    assert pullback_certificate(to_point, trivial).gamma.true_set() == ("ok", "err")


@pytest.mark.parametrize("seed", SEEDS)
def test_pullback_functoriality(seed):
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
    cert = random_interface_certificate(rng, c)
    assert pullback_certificate(compose_chart(g, f), cert) == pullback_certificate(
        f, pullback_certificate(g, cert)
    )


def test_conjoin_predicates():
    states = FiniteSet.of("s0", "s1")
    others = FiniteSet.of("t0", "t1")
    product = states.product(others)
    phi1 = Predicate.of_true(states, ["s0"])
    phi2 = Predicate.of_true(others, ["t1"])

    def first(x):
        return x[0]

    def second(x):
        return x[1]

    assert conjoin_predicates(phi1, phi2, product, first, second).true_set() == (
        ("s0", "t1"),
    )
    everywhere = Predicate.constant(others, True)
    nowhere = Predicate.constant(others, False)
    assert conjoin_predicates(phi1, everywhere, product, first, second).true_set() == (
        ("s0", "t0"),
        ("s0", "t1"),
    )
    assert conjoin_predicates(phi1, nowhere, product, first, second).true_set() == ()


def test_comp_single_machine(ok_go_machine, ok_go_certificate):
    icert = ok_go_certificate.icert
    wiring = identity_lens(ok_go_machine.iface)
    result = comp_rule(wiring, (icert, icert), [ok_go_certificate])
    assert result == ok_go_certificate


@pytest.mark.parametrize("seed", SOUNDNESS_SEEDS)
@pytest.mark.parametrize("kind", ["deterministic", "nondeterministic"])
def test_comp_soundness(seed, kind):
    rng = random.Random(seed)
    wiring, wcert, certified = random_comp_instance(rng, 3, kind)
    result = comp_rule(wiring, wcert, certified)
    assert result.machine == couple([c.machine for c in certified], wiring)
    assert result.icert == wcert[1]
    # Independent exhaustive check of the conclusion
    phi, icert = result.phi, result.icert
    machine = result.machine
    for s in machine.states:
        if not phi(s):
            continue
        o = machine.view[s]
        assert icert.gamma(o)
        for a in machine.iface.actions[o]:
            if icert.alpha((o, a)):
                assert machine.change.lift(phi)(machine.update[(s, a)])


def test_comp_premises(ok_go_machine, ok_go_certificate):
    icert = ok_go_certificate.icert
    iface = icert.iface
    wiring = identity_lens(iface)

    broken = MachineCertificate(
        ok_go_machine, Predicate.of_true(ok_go_machine.states, ["s1"]), icert
    )
    with pytest.raises(PremiseError, match="component 0 is not certified"):
        comp_rule(wiring, (icert, icert), [broken])

    loose = InterfaceCertificate(
        iface,
        Predicate.constant(iface.obs, True),
        Predicate.constant(iface.pair_set(), False),
    )
    with pytest.raises(PremiseError, match="not the conjunction") as info:
        comp_rule(wiring, (loose, icert), [ok_go_certificate])
    assert info.value.verdict.counterexample == ("err", None)

    strict = InterfaceCertificate(
        iface,
        Predicate.constant(iface.obs, False),
        Predicate.constant(iface.pair_set(), False),
    )
    with pytest.raises(PremiseError, match="wiring certificate does not hold") as info:
        comp_rule(wiring, (icert, strict), [ok_go_certificate])
    assert info.value.rule == "COMP"
    assert info.value.verdict.counterexample == ("ok", None)


def test_comp_soundness_error(monkeypatch, ok_go_certificate):
    # A wrong conjunction must be caught by the final re-verification
    monkeypatch.setattr(
        boolean,
        "product_predicate",
        lambda *predicates: Predicate.constant(predicates[0].carrier, True),
    )
    icert = ok_go_certificate.icert
    wiring = identity_lens(icert.iface)
    with pytest.raises(SoundnessError, match="COMP: conclusion failed"):
        comp_rule(wiring, (icert, icert), [ok_go_certificate])


def test_subst_identity(ok_go_machine, ok_go_certificate):
    sim = identity_simulation(ok_go_machine)
    assert subst_rule(sim, ok_go_certificate) == ok_go_certificate


@pytest.mark.parametrize("seed", SOUNDNESS_SEEDS)
@pytest.mark.parametrize("kind", ["deterministic", "nondeterministic"])
def test_subst_soundness(seed, kind):
    sim, target = random_simulation(random.Random(seed), kind)
    result = subst_rule(sim, target)
    assert result.machine == sim.src
    assert certify_machine(sim.src, result)
    for s in sim.src.states:
        assert result.phi(s) == target.phi(sim.map[s])


def test_subst_quotient():
    iface = Interface.simple(["ok"], ["go"])
    src = Machine(
        FiniteSet.of("s0", "s1"),
        iface,
        DETERMINISTIC,
        {"s0": "ok", "s1": "ok"},
        {("s0", "go"): "s1", ("s1", "go"): "s0"},
    )
    dst = Machine(
        FiniteSet.of("t0"), iface, DETERMINISTIC, {"t0": "ok"}, {("t0", "go"): "t0"}
    )
    icert = simple_certificate(
        iface,
        Predicate.constant(iface.obs, True),
        Predicate.constant(iface.constant_actions(), True),
    )
    target = MachineCertificate(dst, Predicate.constant(dst.states, True), icert)
    sim = Simulation(src, dst, identity_chart(iface), {"s0": "t0", "s1": "t0"})
    result = subst_rule(sim, target)
    assert result.phi.true_set() == ("s0", "s1")

    broken_dst = Machine(
        FiniteSet.of("t0", "t1"),
        iface,
        DETERMINISTIC,
        {"t0": "ok", "t1": "ok"},
        {("t0", "go"): "t1", ("t1", "go"): "t1"},
    )
    state_map = {"s0": "t0", "s1": "t0"}
    broken = Simulation(src, broken_dst, identity_chart(iface), state_map)
    target = MachineCertificate(
        broken_dst, Predicate.constant(broken_dst.states, True), icert
    )
    with pytest.raises(PremiseError, match="square does not commute") as info:
        subst_rule(broken, target)
    assert info.value.verdict.counterexample == ("s0", "go")


def test_cascade_equivalence():
    actions = FiniteSet.of("a")
    middle = FiniteSet.of("m0", "m1")
    o1m = FiniteSet.of("u").product(middle)
    o2 = FiniteSet.of("v0", "v1")
    o12 = FiniteSet.of("u").product(o2)
    lens = make_cascade(actions, ["u"], middle, o2)
    i1 = Interface.simple(o1m, actions)
    i2 = Interface.simple(o2, middle.product(actions))
    checked = 0
    for gamma1, gamma2, gamma3 in itertools.product(
        all_predicates(o1m), all_predicates(o2), all_predicates(o12)
    ):
        for alpha_bar1, alpha_bar2, alpha_bar3 in itertools.product(
            all_predicates(actions),
            all_predicates(middle.product(actions)),
            all_predicates(actions),
        ):
            inner = parallel_certificate(
                simple_certificate(i1, gamma1, alpha_bar1),
                simple_certificate(i2, gamma2, alpha_bar2),
            )
            outer = simple_certificate(lens.dst, gamma3, alpha_bar3)
            generic = bool(certify_lens(lens, inner, outer))
            specialized = bool(
                cascade_conditions(
                    gamma1, alpha_bar1, gamma2, alpha_bar2, gamma3, alpha_bar3
                )
            )
            if specialized:
                assert generic
            if gamma1.true_set() and gamma2.true_set():
                assert generic == specialized
            checked += 1
    assert checked == 4 * 4 * 4 * 2 * 4 * 2


def test_cascade_conditions_counterexample():
    actions = FiniteSet.of("a")
    middle = FiniteSet.of("m0", "m1")
    o1m = FiniteSet.of("u").product(middle)
    o2 = FiniteSet.of("v")
    verdict = cascade_conditions(
        Predicate.constant(o1m, True),
        Predicate.constant(actions, True),
        Predicate.constant(o2, True),
        Predicate.of_true(middle.product(actions), [("m0", "a")]),
        Predicate.constant(FiniteSet.of("u").product(o2), True),
        Predicate.constant(actions, True),
    )
    assert verdict.failed == "second-assumption"
    assert verdict.counterexample == (("u", "m1"), "a")
