"""Wiring diagrams as lenses: parallel, cascade and feedback patterns."""

from __future__ import annotations

from typing import Iterable, Union

from .core import FiniteSet, Interface, Lens, NonSimpleInterface, parallel_interface
from .symbols import Symbol

__all__ = ["make_parallel", "make_cascade", "make_feedback"]


Carrier = Union[FiniteSet, Interface, Iterable[Symbol]]


def _carrier(value: Carrier, role: str) -> FiniteSet:
    # A simple interface given as a carrier stands for its observation set
    if isinstance(value, Interface):
        if not value.is_simple:
            raise NonSimpleInterface(f"The {role} interface must be simple")
        return value.obs
    if isinstance(value, FiniteSet):
        return value
    return FiniteSet(tuple(value))


def _simple(value: Interface, role: str) -> Interface:
    if not value.is_simple:
        raise NonSimpleInterface(f"The {role} interface must be simple")
    return value


def make_parallel(first: Interface, second: Interface) -> Lens:
    """Both boxes run side by side without interacting.

    The wiring is the identity on the product interface::

        <A1|O1> || <A2|O2>  ->  <A1 x A2|O1 x O2>
    """
    first = _simple(first, "first")
    second = _simple(second, "second")
    src = parallel_interface(first, second)
    dst = Interface.simple(
        first.obs.product(second.obs),
        first.constant_actions().product(second.constant_actions()),
    )
    return Lens.from_functions(src, dst, lambda o: o, lambda o, a: a)


def make_cascade(
    actions: Carrier,
    first_obs: Carrier,
    middle: Carrier,
    second_obs: Carrier,
) -> Lens:
    """Feed the outer action and the first box's ``m`` output into the second box.

    Shape::

        <A|O1 x M> || <M x A|O2>  ->  <A|O1 x O2>

    with ``((o1,m),o2) -> (o1,o2)`` forward and
    ``(((o1,m),o2),a) -> (a,(m,a))`` backward.
    """
    a_set = _carrier(actions, "action")
    o1_set = _carrier(first_obs, "first observation")
    m_set = _carrier(middle, "middle")
    o2_set = _carrier(second_obs, "second observation")
    src = parallel_interface(
        Interface.simple(o1_set.product(m_set), a_set),
        Interface.simple(o2_set, m_set.product(a_set)),
    )
    dst = Interface.simple(o1_set.product(o2_set), a_set)

    def fwd(o: Symbol) -> Symbol:
        (o1, _), o2 = o  # type: ignore[misc]
        return (o1, o2)

    def bwd(o: Symbol, a: Symbol) -> Symbol:
        (_, m), _ = o  # type: ignore[misc]
        return (a, (m, a))

    return Lens.from_functions(src, dst, fwd, bwd)


def make_feedback(actions: Carrier, middle: Carrier, obs: Carrier) -> Lens:
    """Loop the ``m`` output of a box back into its own input.

    Shape ``<A x M|M x O> -> <A|O>`` with ``(m,o) -> o`` forward and
    ``((m,o),a) -> (a,m)`` backward.
    """
    a_set = _carrier(actions, "action")
    m_set = _carrier(middle, "middle")
    o_set = _carrier(obs, "observation")
    src = Interface.simple(m_set.product(o_set), a_set.product(m_set))
    dst = Interface.simple(o_set, a_set)

    def fwd(o: Symbol) -> Symbol:
        _, out = o  # type: ignore[misc]
        return out

    def bwd(o: Symbol, a: Symbol) -> Symbol:
        m, _ = o  # type: ignore[misc]
        return (a, m)

    return Lens.from_functions(src, dst, fwd, bwd)
