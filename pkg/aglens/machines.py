"""Generalized Moore machines, coupling by wiring and simulations."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import reduce
from types import MappingProxyType
from typing import Any, Callable, Iterable, Iterator, Mapping, Sequence

from .core import (
    AglensError,
    Chart,
    FiniteSet,
    Interface,
    Lens,
    WellFormednessError,
    check_interfaces,
    identity_chart,
    identity_lens,
    parallel_interface,
    parallel_lens,
)
from .sweep import first_failure
from .symbols import Symbol, format_symbol, nest, unnest
from .verdict import Verdict

__all__ = [
    "ChangeStructure",
    "Deterministic",
    "Nondeterministic",
    "DETERMINISTIC",
    "NONDETERMINISTIC",
    "change_structure",
    "ChangeStructureMismatch",
    "TraceError",
    "Machine",
    "Simulation",
    "couple",
    "parallel_machines",
    "check_simulation",
    "identity_simulation",
    "run_trace",
    "traces",
]


# Exceptions


class ChangeStructureMismatch(AglensError, TypeError):
    """Raised when machines with different change structures are combined."""


class TraceError(AglensError, ValueError):
    """Raised when an action does not belong to the current fiber."""

    def __init__(self, step: int, action: Symbol, observation: Symbol) -> None:
        self.step = step
        self.action = action
        self.observation = observation
        super().__init__(
            f"Step {step}: action {format_symbol(action)!r} is not available "
            f"at observation {format_symbol(observation)!r}"
        )


# Change structures


class ChangeStructure(ABC):
    """How a machine update describes its next state."""

    kind: str

    @abstractmethod
    def validate(self, change: Any, states: FiniteSet) -> bool:
        """Check that ``change`` is a change of ``states``."""

    @abstractmethod
    def pair(self, first: Any, second: Any) -> Any:
        """Turn a pair of changes into a change of a pair."""

    @abstractmethod
    def push(self, sigma: Callable[[Symbol], Symbol], change: Any) -> Any:
        """Push a change forward along a state map."""

    @abstractmethod
    def lift(self, predicate: Callable[[Symbol], bool]) -> Callable[[Any], bool]:
        """Lift a state predicate to a predicate on changes."""

    def normalize(self, change: Any) -> Any:
        return change

    def __repr__(self) -> str:
        return f"<{self.kind} change structure>"


class Deterministic(ChangeStructure):
    """Changes are states."""

    kind = "deterministic"

    def validate(self, change: Any, states: FiniteSet) -> bool:
        return change in states

    def pair(self, first: Symbol, second: Symbol) -> Symbol:
        return (first, second)

    def push(self, sigma: Callable[[Symbol], Symbol], change: Symbol) -> Symbol:
        return sigma(change)

    def lift(self, predicate: Callable[[Symbol], bool]) -> Callable[[Symbol], bool]:
        return predicate


class Nondeterministic(ChangeStructure):
    """Changes are sets of possible next states."""

    kind = "nondeterministic"

    def validate(self, change: Any, states: FiniteSet) -> bool:
        return isinstance(change, frozenset) and all(s in states for s in change)

    def normalize(self, change: Any) -> frozenset[Symbol]:
        return frozenset(change)

    def pair(
        self, first: frozenset[Symbol], second: frozenset[Symbol]
    ) -> frozenset[Symbol]:
        return frozenset((x, y) for x in first for y in second)

    def push(
        self, sigma: Callable[[Symbol], Symbol], change: frozenset[Symbol]
    ) -> frozenset[Symbol]:
        return frozenset(sigma(s) for s in change)

    def lift(
        self, predicate: Callable[[Symbol], bool]
    ) -> Callable[[frozenset[Symbol]], bool]:
        def lifted(change: frozenset[Symbol]) -> bool:
            return all(predicate(s) for s in change)

        return lifted


DETERMINISTIC = Deterministic()
NONDETERMINISTIC = Nondeterministic()

_CHANGE_STRUCTURES = {cs.kind: cs for cs in (DETERMINISTIC, NONDETERMINISTIC)}


def change_structure(kind: str) -> ChangeStructure:
    try:
        return _CHANGE_STRUCTURES[kind]
    except KeyError:
        raise ValueError(f"Unknown change structure {kind!r}") from None


# Machines


@dataclass(frozen=True, eq=False)
class Machine:
    """A Moore machine over a change structure.

    ``view`` maps each state to an observation, and ``update`` maps each
    ``(s, a)`` with ``a`` in the fiber of ``view[s]`` to a change.
    """

    states: FiniteSet
    iface: Interface
    change: ChangeStructure
    view: Mapping[Symbol, Symbol]
    update: Mapping[tuple[Symbol, Symbol], Any]

    def __post_init__(self) -> None:
        if not isinstance(self.states, FiniteSet):
            object.__setattr__(self, "states", FiniteSet(tuple(self.states)))
        view = dict(self.view)
        update = {k: self.change.normalize(v) for k, v in self.update.items()}
        object.__setattr__(self, "view", MappingProxyType(view))
        object.__setattr__(self, "update", MappingProxyType(update))
        self.validate()

    def validate(self) -> None:
        """Check the totality and range of the view and update tables."""
        for s in self.states:
            if s not in self.view:
                raise WellFormednessError(
                    f"View undefined at state {format_symbol(s)!r}"
                )
            if self.view[s] not in self.iface.obs:
                raise WellFormednessError(
                    f"View sends {format_symbol(s)!r} outside the observations"
                )
        if len(self.view) != len(self.states):
            raise WellFormednessError("View defined outside the states")
        expected = 0
        for s, a in self.domain():
            expected += 1
            if (s, a) not in self.update:
                raise WellFormednessError(
                    f"Update undefined at {format_symbol(s)!r}, {format_symbol(a)!r}"
                )
            if not self.change.validate(self.update[(s, a)], self.states):
                raise WellFormednessError(
                    f"Update at {format_symbol(s)!r}, {format_symbol(a)!r} "
                    f"is not a {self.change.kind} change"
                )
        if len(self.update) != expected:
            raise WellFormednessError(
                "Update defined outside the fiber-compatible pairs"
            )

    @classmethod
    def from_functions(
        cls,
        states: FiniteSet,
        iface: Interface,
        change: ChangeStructure,
        view: Callable[[Symbol], Symbol],
        update: Callable[[Symbol, Symbol], Any],
    ) -> Machine:
        view_table = {s: view(s) for s in states}
        update_table = {
            (s, a): update(s, a) for s in states for a in iface.actions[view_table[s]]
        }
        return cls(states, iface, change, view_table, update_table)

    def domain(self) -> Iterator[tuple[Symbol, Symbol]]:
        """Enumerate the fiber-compatible ``(s, a)`` pairs."""
        for s in self.states:
            for a in self.iface.actions[self.view[s]]:
                yield (s, a)

    @property
    def is_deterministic(self) -> bool:
        return self.change.kind == DETERMINISTIC.kind

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Machine):
            return NotImplemented
        return (
            self.states == other.states
            and self.iface == other.iface
            and self.change.kind == other.change.kind
            and dict(self.view) == dict(other.view)
            and dict(self.update) == dict(other.update)
        )

    __hash__ = None  # type: ignore[assignment]

    def __or__(self, wiring: Lens) -> Machine:
        if not isinstance(wiring, Lens):
            return NotImplemented
        return couple([self], wiring)


def couple(machines: Sequence[Machine], wiring: Lens) -> Machine:
    """Couple machines through a wiring lens.

    The states are the left-nested product of the component states. The
    view is the wiring forward map after the product of the views, and the
    update feeds the wiring backward map into the component updates,
    pairing their changes.
    """
    if not machines:
        raise TypeError("At least one machine is required")
    change = machines[0].change
    for machine in machines[1:]:
        if machine.change.kind != change.kind:
            raise ChangeStructureMismatch(
                f"Cannot couple {change.kind} and {machine.change.kind} machines"
            )
    inner = parallel_interface(*(m.iface for m in machines))
    check_interfaces(inner, wiring.src, "couple")
    n = len(machines)
    states = reduce(FiniteSet.product, (m.states for m in machines))

    def inner_view(s: Symbol) -> Symbol:
        return nest([m.view[p] for m, p in zip(machines, unnest(s, n))])

    def view(s: Symbol) -> Symbol:
        return wiring.fwd[inner_view(s)]

    def update(s: Symbol, a: Symbol) -> Any:
        parts = unnest(s, n)
        acts = unnest(wiring.bwd[(inner_view(s), a)], n)
        changes = [m.update[(p, q)] for m, p, q in zip(machines, parts, acts)]
        return reduce(change.pair, changes)

    return Machine.from_functions(states, wiring.dst, change, view, update)


def parallel_machines(*machines: Machine) -> Machine:
    """Run machines side by side without interaction."""
    wiring = parallel_lens(*(identity_lens(m.iface) for m in machines))
    return couple(machines, wiring)


# Simulations


@dataclass(frozen=True, eq=False)
class Simulation:
    """A candidate simulation ``(chart, map)`` from ``src`` to ``dst``.

    Construction only checks that the pieces fit together;
    `check_simulation` decides whether the square commutes.
    """

    src: Machine
    dst: Machine
    chart: Chart
    map: Mapping[Symbol, Symbol]

    def __post_init__(self) -> None:
        check_interfaces(self.chart.src, self.src.iface, "simulation chart source")
        check_interfaces(self.chart.dst, self.dst.iface, "simulation chart target")
        if self.src.change.kind != self.dst.change.kind:
            raise ChangeStructureMismatch(
                "A simulation relates machines with the same change structure"
            )
        table = dict(self.map)
        for s in self.src.states:
            if s not in table:
                raise WellFormednessError(
                    f"State map undefined at {format_symbol(s)!r}"
                )
            if table[s] not in self.dst.states:
                raise WellFormednessError(
                    f"State map sends {format_symbol(s)!r} outside the target states"
                )
        if len(table) != len(self.src.states):
            raise WellFormednessError("State map defined outside the source states")
        object.__setattr__(self, "map", MappingProxyType(table))


def identity_simulation(machine: Machine) -> Simulation:
    return Simulation(
        machine, machine, identity_chart(machine.iface), {s: s for s in machine.states}
    )


def _simulation_cases(sim: Simulation) -> Iterator[tuple[Symbol, Symbol | None]]:
    for s in sim.src.states:
        yield (s, None)
        for a in sim.src.iface.actions[sim.src.view[s]]:
            yield (s, a)


def check_simulation(sim: Simulation, jobs: int | None = None) -> Verdict:
    """Check the view and update equations of a simulation.

    For every state ``s`` and action ``a`` of the source::

        v2(sigma(s)) == f(v1(s))
        u2(sigma(s), f#(v1(s), a)) == T sigma(u1(s, a))

    The counterexample is ``(s, None)`` for a view failure and ``(s, a)``
    for an update failure.
    """
    src, dst, chart, sigma = sim.src, sim.dst, sim.chart, sim.map
    change = src.change

    def check(case: tuple[Symbol, Symbol | None]) -> Verdict | None:
        s, a = case
        o1 = src.view[s]
        if a is None:
            if dst.view[sigma[s]] != chart.fwd[o1]:
                return Verdict.failure(case, "view")
            return None
        key = (sigma[s], chart.push[(o1, a)])
        if key not in dst.update:
            return Verdict.failure(case, "update")
        pushed = change.push(sigma.__getitem__, src.update[(s, a)])
        if dst.update[key] != pushed:
            return Verdict.failure(case, "update")
        return None

    failure = first_failure(_simulation_cases(sim), check, jobs)
    return failure if failure is not None else Verdict.success()


# Traces


def run_trace(machine: Machine, s0: Symbol, actions: Iterable[Symbol]) -> list[Symbol]:
    """Run a deterministic machine and return the visited states."""
    if not machine.is_deterministic:
        raise ValueError("Traces are only defined for deterministic machines")
    if s0 not in machine.states:
        raise ValueError(f"Unknown initial state {format_symbol(s0)!r}")
    visited = [s0]
    state = s0
    for step, action in enumerate(actions):
        observation = machine.view[state]
        if action not in machine.iface.actions[observation]:
            raise TraceError(step, action, observation)
        state = machine.update[(state, action)]
        visited.append(state)
    return visited


def traces(
    machine: Machine, s0: Symbol, length: int
) -> Iterator[tuple[list[Symbol], list[Symbol]]]:
    """Enumerate every ``(actions, states)`` trace with ``length`` steps."""
    if not machine.is_deterministic:
        raise ValueError("Traces are only defined for deterministic machines")
    if length < 0:
        raise ValueError("The trace length must be nonnegative")

    def extend(actions: list[Symbol], states: list[Symbol]) -> Iterator[Any]:
        if len(actions) == length:
            yield list(actions), list(states)
            return
        state = states[-1]
        for a in machine.iface.actions[machine.view[state]]:
            yield from extend(actions + [a], states + [machine.update[(state, a)]])

    yield from extend([], [s0])
