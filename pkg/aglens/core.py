"""Core objects for finite interfaces, lenses and charts."""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import (
    Callable,
    Iterable,
    Iterator,
    Mapping,
    Tuple,
)

from typing_extensions import TypeAlias

from .symbols import Symbol, format_symbol, nest, unnest

__all__ = [
    "AglensError",
    "InterfaceMismatch",
    "WellFormednessError",
    "NonSimpleInterface",
    "FiniteSet",
    "Interface",
    "Lens",
    "Chart",
    "interface_mismatch",
    "check_interfaces",
    "compose_lens",
    "identity_lens",
    "parallel_interface",
    "parallel_lens",
    "swap_lens",
    "relabel_lens",
    "lens_equal_up_to_relabel",
    "compose_chart",
    "identity_chart",
]


ActionPair: TypeAlias = Tuple[Symbol, Symbol]


# Exceptions


class AglensError(Exception):
    """Base class for all the errors raised by aglens."""


class InterfaceMismatch(AglensError):
    """Raised when two interfaces were expected to be equal."""

    def __init__(self, detail: str, context: str = "") -> None:
        self.detail = detail
        self.context = context
        prefix = f"{context}: " if context else ""
        super().__init__(f"{prefix}interface mismatch, {detail}")


class WellFormednessError(AglensError, ValueError):
    """Raised when a table or predicate breaks a structural invariant."""


class NonSimpleInterface(AglensError, ValueError):
    """Raised when a constant action set was required."""


# Finite sets


@dataclass(frozen=True, eq=False)
class FiniteSet:
    """An ordered collection of distinct symbols.

    Equality and hashing ignore the order, iteration follows it.
    """

    elements: tuple[Symbol, ...]
    _members: frozenset[Symbol] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        elements = tuple(self.elements)
        members = frozenset(elements)
        if len(members) != len(elements):
            seen: set[Symbol] = set()
            for element in elements:
                if element in seen:
                    raise WellFormednessError(
                        f"Duplicate symbol {format_symbol(element)!r}"
                    )
                seen.add(element)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "_members", members)

    @classmethod
    def of(cls, *elements: Symbol) -> FiniteSet:
        return cls(tuple(elements))

    def __iter__(self) -> Iterator[Symbol]:
        return iter(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, symbol: object) -> bool:
        return symbol in self._members

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FiniteSet):
            return NotImplemented
        return self._members == other._members

    def __hash__(self) -> int:
        return hash(self._members)

    def __repr__(self) -> str:
        inner = ", ".join(format_symbol(x) for x in self.elements)
        return f"FiniteSet({{{inner}}})"

    def index(self, symbol: Symbol) -> int:
        return self.elements.index(symbol)

    def product(self, other: FiniteSet) -> FiniteSet:
        """Cartesian product with pair symbols, first factor major."""
        return FiniteSet(tuple((x, y) for x in self for y in other))


def _as_finite_set(value: FiniteSet | Iterable[Symbol]) -> FiniteSet:
    if isinstance(value, FiniteSet):
        return value
    return FiniteSet(tuple(value))


# Interfaces


@dataclass(frozen=True, eq=False)
class Interface:
    """An observation set together with an action set for each observation."""

    obs: FiniteSet
    actions: Mapping[Symbol, FiniteSet]

    def __post_init__(self) -> None:
        obs = _as_finite_set(self.obs)
        actions = {o: _as_finite_set(a) for o, a in self.actions.items()}
        for o in obs:
            if o not in actions:
                raise WellFormednessError(
                    f"No action set declared for observation {format_symbol(o)!r}"
                )
        for o in actions:
            if o not in obs:
                raise WellFormednessError(
                    f"Action set declared for unknown observation {format_symbol(o)!r}"
                )
        ordered = {o: actions[o] for o in obs}
        object.__setattr__(self, "obs", obs)
        object.__setattr__(self, "actions", MappingProxyType(ordered))

    @classmethod
    def simple(
        cls,
        obs: FiniteSet | Iterable[Symbol],
        actions: FiniteSet | Iterable[Symbol],
    ) -> Interface:
        """Build an interface whose action set does not depend on observations."""
        obs = _as_finite_set(obs)
        actions = _as_finite_set(actions)
        return cls(obs, {o: actions for o in obs})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Interface):
            return NotImplemented
        return interface_mismatch(self, other) is None

    __hash__ = None  # type: ignore[assignment]

    @property
    def is_simple(self) -> bool:
        fibers = list(self.actions.values())
        return all(fiber == fibers[0] for fiber in fibers[1:])

    def constant_actions(self) -> FiniteSet:
        """Return the shared action set of a simple interface."""
        if not self.is_simple:
            raise NonSimpleInterface("The interface has observation-dependent actions")
        if not self.obs:
            return FiniteSet(())
        return self.actions[self.obs.elements[0]]

    def fiber(self, o: Symbol) -> FiniteSet:
        return self.actions[o]

    def pairs(self) -> Iterator[ActionPair]:
        """Enumerate ``(o, a)`` with ``a`` in the fiber of ``o``."""
        for o in self.obs:
            for a in self.actions[o]:
                yield (o, a)

    def pair_set(self) -> FiniteSet:
        return FiniteSet(tuple(self.pairs()))


def interface_mismatch(left: Interface, right: Interface) -> str | None:
    """Describe the first difference between two interfaces, if any."""
    for o in left.obs:
        if o not in right.obs:
            return f"observation {format_symbol(o)!r} is missing on the right"
    for o in right.obs:
        if o not in left.obs:
            return f"observation {format_symbol(o)!r} is missing on the left"
    for o in left.obs:
        if left.actions[o] != right.actions[o]:
            return (
                f"action sets differ at {format_symbol(o)!r}: "
                f"{left.actions[o]!r} != {right.actions[o]!r}"
            )
    return None


def check_interfaces(left: Interface, right: Interface, context: str) -> None:
    detail = interface_mismatch(left, right)
    if detail is not None:
        raise InterfaceMismatch(detail, context)


def parallel_interface(*interfaces: Interface) -> Interface:
    """Product of interfaces, with left-nested pair symbols."""
    if not interfaces:
        raise TypeError("At least one interface is required")
    result = interfaces[0]
    for iface in interfaces[1:]:
        obs = result.obs.product(iface.obs)
        actions = {
            (o1, o2): result.actions[o1].product(iface.actions[o2])
            for o1, o2 in obs  # type: ignore[misc]
        }
        result = Interface(obs, actions)
    return result


# Lenses


@dataclass(frozen=True, eq=False)
class Lens:
    """A lens between two interfaces, stored as explicit tables.

    ``fwd`` maps source observations to target observations and ``bwd``
    maps ``(o1, a2)`` with ``a2`` in the fiber of ``fwd[o1]`` back to an
    action in the fiber of ``o1``.

    Lenses compose with the pipe operator, in diagrammatic order::

        wiring | outer  # same as compose_lens(outer, wiring)
    """

    src: Interface
    dst: Interface
    fwd: Mapping[Symbol, Symbol]
    bwd: Mapping[ActionPair, Symbol]

    def __post_init__(self) -> None:
        fwd = dict(self.fwd)
        bwd = dict(self.bwd)
        for o1 in self.src.obs:
            if o1 not in fwd:
                raise WellFormednessError(
                    f"Forward map undefined at {format_symbol(o1)!r}"
                )
            if fwd[o1] not in self.dst.obs:
                raise WellFormednessError(
                    f"Forward map sends {format_symbol(o1)!r} "
                    f"outside the target observations"
                )
        if len(fwd) != len(self.src.obs):
            raise WellFormednessError("Forward map defined outside the source")
        expected = 0
        for o1 in self.src.obs:
            for a2 in self.dst.actions[fwd[o1]]:
                expected += 1
                key = (o1, a2)
                if key not in bwd:
                    raise WellFormednessError(
                        f"Backward map undefined at {format_symbol(key)!r}"
                    )
                if bwd[key] not in self.src.actions[o1]:
                    raise WellFormednessError(
                        f"Backward map sends {format_symbol(key)!r} outside "
                        f"the fiber of {format_symbol(o1)!r}"
                    )
        if len(bwd) != expected:
            raise WellFormednessError(
                "Backward map defined outside the fiber-compatible pairs"
            )
        object.__setattr__(self, "fwd", MappingProxyType(fwd))
        object.__setattr__(self, "bwd", MappingProxyType(bwd))

    @classmethod
    def from_functions(
        cls,
        src: Interface,
        dst: Interface,
        fwd: Callable[[Symbol], Symbol],
        bwd: Callable[[Symbol, Symbol], Symbol],
    ) -> Lens:
        """Tabulate a lens from python callables."""
        fwd_table = {o1: fwd(o1) for o1 in src.obs}
        bwd_table = {
            (o1, a2): bwd(o1, a2)
            for o1 in src.obs
            for a2 in dst.actions[fwd_table[o1]]
        }
        return cls(src, dst, fwd_table, bwd_table)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Lens):
            return NotImplemented
        return (
            self.src == other.src
            and self.dst == other.dst
            and dict(self.fwd) == dict(other.fwd)
            and dict(self.bwd) == dict(other.bwd)
        )

    __hash__ = None  # type: ignore[assignment]

    def __or__(self, other: Lens) -> Lens:
        if not isinstance(other, Lens):
            return NotImplemented
        return compose_lens(other, self)


def compose_lens(t: Lens, w: Lens) -> Lens:
    """Compose ``w`` then ``t``.

    The forward map is ``t.fwd`` after ``w.fwd`` and the backward map
    threads actions through ``t.bwd`` then ``w.bwd``.
    """
    check_interfaces(w.dst, t.src, "compose_lens")
    fwd = {o1: t.fwd[w.fwd[o1]] for o1 in w.src.obs}
    bwd = {}
    for o1 in w.src.obs:
        o2 = w.fwd[o1]
        for a3 in t.dst.actions[fwd[o1]]:
            bwd[(o1, a3)] = w.bwd[(o1, t.bwd[(o2, a3)])]
    return Lens(w.src, t.dst, fwd, bwd)


def identity_lens(iface: Interface) -> Lens:
    return Lens.from_functions(iface, iface, lambda o: o, lambda o, a: a)


def parallel_lens(*lenses: Lens) -> Lens:
    """Componentwise product of lenses, with left-nested pair symbols."""
    if not lenses:
        raise TypeError("At least one lens is required")
    n = len(lenses)
    src = parallel_interface(*(lens.src for lens in lenses))
    dst = parallel_interface(*(lens.dst for lens in lenses))

    def fwd(o: Symbol) -> Symbol:
        parts = unnest(o, n)
        return nest([lens.fwd[p] for lens, p in zip(lenses, parts)])

    def bwd(o: Symbol, a: Symbol) -> Symbol:
        obs = unnest(o, n)
        acts = unnest(a, n)
        return nest([lens.bwd[(p, q)] for lens, p, q in zip(lenses, obs, acts)])

    return Lens.from_functions(src, dst, fwd, bwd)


def relabel_lens(
    lens: Lens,
    obs_map: Callable[[Symbol], Symbol],
    action_map: Callable[[Symbol], Symbol],
) -> Lens:
    """Rename every observation and action symbol of a lens.

    Both maps must be injective on the symbols they meet.
    """

    def relabel(iface: Interface) -> Interface:
        return Interface(
            FiniteSet(tuple(obs_map(o) for o in iface.obs)),
            {
                obs_map(o): FiniteSet(tuple(action_map(a) for a in iface.actions[o]))
                for o in iface.obs
            },
        )

    fwd = {obs_map(o): obs_map(p) for o, p in lens.fwd.items()}
    bwd = {
        (obs_map(o), action_map(a)): action_map(b) for (o, a), b in lens.bwd.items()
    }
    return Lens(relabel(lens.src), relabel(lens.dst), fwd, bwd)


def lens_equal_up_to_relabel(
    left: Lens,
    right: Lens,
    obs_map: Callable[[Symbol], Symbol],
    action_map: Callable[[Symbol], Symbol],
) -> bool:
    """Whether relabelling ``left`` gives ``right``, up to symbol order."""
    return relabel_lens(left, obs_map, action_map) == right


def swap_lens(lens: Lens) -> Lens:
    """Swap the components of a binary parallel lens."""

    def swap(symbol: Symbol) -> Symbol:
        left, right = symbol  # type: ignore[misc]
        return (right, left)

    return relabel_lens(lens, swap, swap)


# Charts


@dataclass(frozen=True, eq=False)
class Chart:
    """A map of interfaces, covariant on both observations and actions."""

    src: Interface
    dst: Interface
    fwd: Mapping[Symbol, Symbol]
    push: Mapping[ActionPair, Symbol]

    def __post_init__(self) -> None:
        fwd = dict(self.fwd)
        push = dict(self.push)
        for o1 in self.src.obs:
            if o1 not in fwd or fwd[o1] not in self.dst.obs:
                raise WellFormednessError(
                    f"Chart observation map is not total at {format_symbol(o1)!r}"
                )
            for a1 in self.src.actions[o1]:
                key = (o1, a1)
                if key not in push:
                    raise WellFormednessError(
                        f"Chart action map undefined at {format_symbol(key)!r}"
                    )
                if push[key] not in self.dst.actions[fwd[o1]]:
                    raise WellFormednessError(
                        f"Chart action map sends {format_symbol(key)!r} outside "
                        f"the fiber of {format_symbol(fwd[o1])!r}"
                    )
        if len(fwd) != len(self.src.obs):
            raise WellFormednessError(
                "Chart observation map defined outside the source"
            )
        if len(push) != sum(len(self.src.actions[o]) for o in self.src.obs):
            raise WellFormednessError("Chart action map defined outside the source")
        object.__setattr__(self, "fwd", MappingProxyType(fwd))
        object.__setattr__(self, "push", MappingProxyType(push))

    @classmethod
    def from_functions(
        cls,
        src: Interface,
        dst: Interface,
        fwd: Callable[[Symbol], Symbol],
        push: Callable[[Symbol, Symbol], Symbol],
    ) -> Chart:
        fwd_table = {o: fwd(o) for o in src.obs}
        push_table = {(o, a): push(o, a) for o, a in src.pairs()}
        return cls(src, dst, fwd_table, push_table)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Chart):
            return NotImplemented
        return (
            self.src == other.src
            and self.dst == other.dst
            and dict(self.fwd) == dict(other.fwd)
            and dict(self.push) == dict(other.push)
        )

    __hash__ = None  # type: ignore[assignment]

    def __or__(self, other: Chart) -> Chart:
        if not isinstance(other, Chart):
            return NotImplemented
        return compose_chart(other, self)


def compose_chart(g: Chart, f: Chart) -> Chart:
    """Compose ``f`` then ``g``."""
    check_interfaces(f.dst, g.src, "compose_chart")
    return Chart.from_functions(
        f.src,
        g.dst,
        lambda o: g.fwd[f.fwd[o]],
        lambda o, a: g.push[(f.fwd[o], f.push[(o, a)])],
    )


def identity_chart(iface: Interface) -> Chart:
    return Chart.from_functions(iface, iface, lambda o: o, lambda o, a: a)
