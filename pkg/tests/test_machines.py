import random

import pytest

from aglens.core import (
    Chart,
    FiniteSet,
    Interface,
    InterfaceMismatch,
    WellFormednessError,
    compose_lens,
    identity_lens,
    parallel_interface,
)
from aglens.machines import (
    DETERMINISTIC,
    NONDETERMINISTIC,
    ChangeStructureMismatch,
    Machine,
    Simulation,
    TraceError,
    change_structure,
    check_simulation,
    couple,
    identity_simulation,
    parallel_machines,
    run_trace,
    traces,
)
from aglens.test_utils import (
    random_interface,
    random_lens,
    random_machine,
    random_simulation,
)
from aglens.wiring import make_cascade


def toggle():
    iface = Interface.simple(["on", "off"], ["flip"])
    return Machine(
        FiniteSet.of("s0", "s1"),
        iface,
        DETERMINISTIC,
        {"s0": "off", "s1": "on"},
        {("s0", "flip"): "s1", ("s1", "flip"): "s0"},
    )


def one_state(name, obs, actions, kind=DETERMINISTIC):
    update = name if kind is DETERMINISTIC else frozenset([name])
    return Machine.from_functions(
        FiniteSet.of(name),
        Interface.simple(obs, actions),
        kind,
        lambda s: obs[0],
        lambda s, a: update,
    )


def test_machine_validation():
    iface = Interface.simple(["ok"], ["go"])
    with pytest.raises(WellFormednessError, match="View undefined at state 's1'"):
        Machine(FiniteSet.of("s0", "s1"), iface, DETERMINISTIC, {"s0": "ok"}, {})
    with pytest.raises(WellFormednessError, match="not a deterministic change"):
        Machine(
            FiniteSet.of("s0"),
            iface,
            DETERMINISTIC,
            {"s0": "ok"},
            {("s0", "go"): "s9"},
        )
    with pytest.raises(WellFormednessError, match="not a nondeterministic change"):
        Machine(
            FiniteSet.of("s0"),
            iface,
            NONDETERMINISTIC,
            {"s0": "ok"},
            {("s0", "go"): {"s0", "s9"}},
        )
    with pytest.raises(ValueError, match="Unknown change structure"):
        change_structure("stochastic")


def test_couple_identity(ok_go_machine):
    wiring = identity_lens(ok_go_machine.iface)
    assert couple([ok_go_machine], wiring) == ok_go_machine
    assert (ok_go_machine | wiring) == ok_go_machine


def test_couple_cascade():
    wiring = make_cascade(["a"], ["u"], ["lo", "hi"], ["v"])
    first = one_state("p", [("u", "lo"), ("u", "hi")], ["a"])
    second = one_state("q", ["v"], [("lo", "a"), ("hi", "a")])
    machine = couple([first, second], wiring)
    assert machine.states == FiniteSet.of(("p", "q"))
    assert machine.view[("p", "q")] == ("u", "v")
    assert machine.update[(("p", "q"), "a")] == ("p", "q")

    with pytest.raises(InterfaceMismatch, match="couple"):
        couple([second, first], wiring)


def test_parallel_machines():
    machine = parallel_machines(toggle(), toggle())
    assert len(machine.states) == 4
    assert machine.update[(("s0", "s1"), ("flip", "flip"))] == ("s1", "s0")
    assert machine.view[("s0", "s1")] == ("off", "on")


def test_parallel_nondeterministic_machines():
    iface = Interface.simple(["o"], ["a"])
    first = Machine(
        FiniteSet.of("s0", "s1"),
        iface,
        NONDETERMINISTIC,
        {"s0": "o", "s1": "o"},
        {("s0", "a"): {"s0", "s1"}, ("s1", "a"): set()},
    )
    second = one_state("t0", ["p"], ["b"], NONDETERMINISTIC)
    machine = parallel_machines(first, second)
    assert machine.update[(("s0", "t0"), ("a", "b"))] == frozenset(
        {("s0", "t0"), ("s1", "t0")}
    )
    assert machine.update[(("s1", "t0"), ("a", "b"))] == frozenset()

    with pytest.raises(ChangeStructureMismatch):
        parallel_machines(first, toggle())


def quotient(perturbed=False):
    iface = Interface.simple(["ok"], ["go"])
    src = Machine(
        FiniteSet.of("s0", "s1"),
        iface,
        DETERMINISTIC,
        {"s0": "ok", "s1": "ok"},
        {("s0", "go"): "s1", ("s1", "go"): "s0"},
    )
    dst_states = FiniteSet.of("t0", "t1") if perturbed else FiniteSet.of("t0")
    dst = Machine.from_functions(
        dst_states,
        iface,
        DETERMINISTIC,
        lambda t: "ok",
        lambda t, a: "t1" if perturbed else "t0",
    )
    chart = Chart.from_functions(iface, iface, lambda o: o, lambda o, a: a)
    return Simulation(src, dst, chart, {"s0": "t0", "s1": "t0"})


def test_check_simulation(ok_go_machine):
    assert check_simulation(identity_simulation(ok_go_machine))
    assert check_simulation(quotient())

    verdict = check_simulation(quotient(perturbed=True))
    assert not verdict
    assert verdict.failed == "update"
    assert verdict.counterexample == ("s0", "go")


def test_simulation_view_failure(ok_go_machine):
    # Swap the state map: the view equation breaks at s0 first
    sim = Simulation(
        ok_go_machine,
        ok_go_machine,
        Chart.from_functions(
            ok_go_machine.iface, ok_go_machine.iface, lambda o: o, lambda o, a: a
        ),
        {"s0": "s1", "s1": "s0"},
    )
    verdict = check_simulation(sim)
    assert verdict.failed == "view"
    assert verdict.counterexample == ("s0", None)


def test_simulation_construction_errors(ok_go_machine):
    chart = Chart.from_functions(
        ok_go_machine.iface, ok_go_machine.iface, lambda o: o, lambda o, a: a
    )
    with pytest.raises(WellFormednessError, match="State map undefined at 's1'"):
        Simulation(ok_go_machine, ok_go_machine, chart, {"s0": "s0"})
    with pytest.raises(WellFormednessError, match="outside the target states"):
        Simulation(ok_go_machine, ok_go_machine, chart, {"s0": "s0", "s1": "s9"})


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("kind", ["deterministic", "nondeterministic"])
def test_random_simulations(seed, kind):
    sim, _ = random_simulation(random.Random(seed), kind)
    assert check_simulation(sim)
    assert check_simulation(sim, jobs=3)


@pytest.mark.parametrize("seed", range(200))
@pytest.mark.parametrize("kind", ["deterministic", "nondeterministic"])
def test_couple_along_composite_wiring(seed, kind):
    rng = random.Random(seed)
    ifaces = [random_interface(rng, 2, 2, prefix=p) for p in "pq"]
    machines = [
        random_machine(rng, iface, 2, kind, prefix=f"s{i}")
        for i, iface in enumerate(ifaces)
    ]
    middle = random_interface(rng, prefix="m")
    outer = random_interface(rng)
    first = random_lens(rng, parallel_interface(*ifaces), middle)
    second = random_lens(rng, middle, outer)
    stepwise = couple([couple(machines, first)], second)
    assert stepwise == couple(machines, compose_lens(second, first))
    assert stepwise == couple(machines, first | second)

def test_run_trace():
    machine = toggle()
    assert run_trace(machine, "s0", []) == ["s0"]
    assert run_trace(machine, "s0", ["flip"] * 3) == ["s0", "s1", "s0", "s1"]
    constant = one_state("t", ["ok"], ["go", "stop"])
    assert run_trace(constant, "t", ["go", "stop", "go"]) == ["t"] * 4

    with pytest.raises(TraceError, match="Step 1") as info:
        run_trace(machine, "s0", ["flip", "stop"])
    assert info.value.step == 1
    with pytest.raises(ValueError, match="Unknown initial state"):
        run_trace(machine, "s9", [])


def test_traces():
    machine = one_state("t", ["ok"], ["go", "stop"])
    found = list(traces(machine, "t", 3))
    assert len(found) == 8
    assert all(states == ["t"] * 4 for _, states in found)


def test_traces_need_determinism():
    iface = random_interface(random.Random(0))
    machine = random_machine(random.Random(0), iface, kind="nondeterministic")
    with pytest.raises(ValueError, match="deterministic machines"):
        list(traces(machine, machine.states.elements[0], 1))
