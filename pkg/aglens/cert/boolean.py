"""Boolean assume-guarantee certificates and the composition rules.

A certificate on an interface is a pair ``(gamma, alpha)``: the guarantee
``gamma`` on observations and the assumption ``alpha`` on fiber-compatible
``(o, a)`` pairs, with ``alpha(o, a)`` implying ``gamma(o)``. A machine
certificate adds a state predicate ``phi``.

Example::

    iface = Interface.simple(["ok", "err"], ["go", "stop"])
    cert = simple_certificate(
        iface,
        Predicate.of_true(iface.obs, ["ok"]),
        Predicate.of_true(iface.constant_actions(), ["go"]),
    )
    verdict = certify_machine(machine, MachineCertificate(machine, phi, cert))
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from types import MappingProxyType
from typing import Any, Callable, Iterable, Iterator, Mapping, Sequence

from ..core import (
    AglensError,
    Chart,
    FiniteSet,
    Interface,
    InterfaceMismatch,
    Lens,
    NonSimpleInterface,
    WellFormednessError,
    check_interfaces,
    parallel_interface,
)
from ..machines import ChangeStructure, Machine, Simulation, check_simulation, couple
from ..sweep import first_failure
from ..symbols import Symbol, format_symbol, unnest
from ..verdict import Verdict

__all__ = [
    "PremiseError",
    "SoundnessError",
    "Predicate",
    "InterfaceCertificate",
    "MachineCertificate",
    "simple_certificate",
    "lift_predicate",
    "conjoin_predicates",
    "product_predicate",
    "parallel_certificate",
    "pullback_certificate",
    "certify_lens",
    "certify_machine",
    "largest_invariant",
    "comp_rule",
    "subst_rule",
    "cascade_conditions",
]

logger = logging.getLogger(__name__)


# Exceptions


class PremiseError(AglensError):
    """Raised when a premise of a proof rule does not hold."""

    def __init__(self, rule: str, premise: str, verdict: Verdict | None = None) -> None:
        self.rule = rule
        self.premise = premise
        self.verdict = verdict
        message = f"{rule}: premise failed, {premise}"
        if verdict is not None and verdict.counterexample is not None:
            message += f" (counterexample {_describe(verdict.counterexample)})"
        super().__init__(message)


class SoundnessError(AglensError):
    """Raised when the conclusion of a proof rule fails re-verification."""

    def __init__(self, rule: str, verdict: Verdict) -> None:
        self.rule = rule
        self.verdict = verdict
        super().__init__(
            f"{rule}: conclusion failed re-verification "
            f"({verdict.failed} at {_describe(verdict.counterexample)})"
        )


def _describe(counterexample: Any) -> str:
    if isinstance(counterexample, tuple):
        return ", ".join(
            "-" if x is None else format_symbol(x) for x in counterexample
        )
    return format_symbol(counterexample)


# Predicates


@dataclass(frozen=True, eq=False)
class Predicate:
    """A total boolean function on a finite carrier."""

    carrier: FiniteSet
    truth: Mapping[Symbol, bool]

    def __post_init__(self) -> None:
        truth = {k: bool(v) for k, v in self.truth.items()}
        for x in self.carrier:
            if x not in truth:
                raise WellFormednessError(
                    f"Predicate undefined at {format_symbol(x)!r}"
                )
        if len(truth) != len(self.carrier):
            raise WellFormednessError("Predicate defined outside its carrier")
        object.__setattr__(self, "truth", MappingProxyType(truth))

    @classmethod
    def from_function(
        cls, carrier: FiniteSet, func: Callable[[Symbol], bool]
    ) -> Predicate:
        return cls(carrier, {x: func(x) for x in carrier})

    @classmethod
    def of_true(cls, carrier: FiniteSet, true_symbols: Iterable[Symbol]) -> Predicate:
        """Build the predicate holding exactly on ``true_symbols``."""
        trues = set(true_symbols)
        for x in trues:
            if x not in carrier:
                raise WellFormednessError(
                    f"Symbol {format_symbol(x)!r} is not in the carrier"
                )
        return cls.from_function(carrier, trues.__contains__)

    @classmethod
    def constant(cls, carrier: FiniteSet, value: bool) -> Predicate:
        return cls.from_function(carrier, lambda x: value)

    def __call__(self, x: Symbol) -> bool:
        return self.truth[x]

    def true_set(self) -> tuple[Symbol, ...]:
        return tuple(x for x in self.carrier if self.truth[x])

    def __and__(self, other: Predicate) -> Predicate:
        if self.carrier != other.carrier:
            raise WellFormednessError("Cannot conjoin predicates on different carriers")
        return Predicate.from_function(self.carrier, lambda x: self(x) and other(x))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Predicate):
            return NotImplemented
        return self.carrier == other.carrier and dict(self.truth) == dict(other.truth)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        inner = ", ".join(format_symbol(x) for x in self.true_set())
        return f"Predicate({{{inner}}} of {len(self.carrier)})"


def lift_predicate(phi: Predicate, change: ChangeStructure) -> Callable[[Any], bool]:
    """Extend a state predicate to changes of state.

    Deterministic changes are states, so the lifting is ``phi`` itself. A
    nondeterministic change satisfies the lifting iff every possible next
    state satisfies ``phi``; in particular the empty change always does.
    """
    return change.lift(phi)


def conjoin_predicates(
    p: Predicate,
    q: Predicate,
    carrier: FiniteSet,
    p_map: Callable[[Symbol], Symbol],
    q_map: Callable[[Symbol], Symbol],
) -> Predicate:
    """Reindex ``p`` and ``q`` along maps out of ``carrier`` and conjoin them."""
    return Predicate.from_function(carrier, lambda x: p(p_map(x)) and q(q_map(x)))


def product_predicate(*predicates: Predicate) -> Predicate:
    """Conjunction over the left-nested product of the carriers."""
    if not predicates:
        raise TypeError("At least one predicate is required")
    n = len(predicates)
    carrier = predicates[0].carrier
    for predicate in predicates[1:]:
        carrier = carrier.product(predicate.carrier)

    def truth(x: Symbol) -> bool:
        return all(p(part) for p, part in zip(predicates, unnest(x, n)))

    return Predicate.from_function(carrier, truth)


# Certificates


@dataclass(frozen=True, eq=False)
class InterfaceCertificate:
    """A guarantee on observations and an assumption on actions."""

    iface: Interface
    gamma: Predicate
    alpha: Predicate

    def __post_init__(self) -> None:
        if self.gamma.carrier != self.iface.obs:
            raise WellFormednessError(
                "The guarantee must be a predicate on observations"
            )
        if self.alpha.carrier != self.iface.pair_set():
            raise WellFormednessError(
                "The assumption must be a predicate on observation/action pairs"
            )
        for o, a in self.iface.pairs():
            if self.alpha((o, a)) and not self.gamma(o):
                raise WellFormednessError(
                    "Ill-formed certificate: alpha_o(a) => gamma(o) is required, "
                    f"but alpha holds at ({format_symbol(o)}, {format_symbol(a)}) "
                    "where gamma does not"
                )

    def assumes(self, o: Symbol, a: Symbol) -> bool:
        return self.alpha((o, a))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, InterfaceCertificate):
            return NotImplemented
        return (
            self.iface == other.iface
            and self.gamma == other.gamma
            and self.alpha == other.alpha
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class MachineCertificate:
    """A state predicate certified against an interface certificate."""

    machine: Machine
    phi: Predicate
    icert: InterfaceCertificate

    def __post_init__(self) -> None:
        if self.phi.carrier != self.machine.states:
            raise WellFormednessError("The state predicate must range over the states")
        check_interfaces(self.icert.iface, self.machine.iface, "machine certificate")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MachineCertificate):
            return NotImplemented
        return (
            self.machine == other.machine
            and self.phi == other.phi
            and self.icert == other.icert
        )

    __hash__ = None  # type: ignore[assignment]


def simple_certificate(
    iface: Interface, gamma_bar: Predicate, alpha_bar: Predicate
) -> InterfaceCertificate:
    """Certificate whose assumption is ``gamma(o) and alpha_bar(a)``."""
    if not iface.is_simple:
        raise NonSimpleInterface("Simple certificates need a simple interface")
    if alpha_bar.carrier != iface.constant_actions():
        raise WellFormednessError("alpha_bar must be a predicate on the action set")
    alpha = Predicate.from_function(
        iface.pair_set(),
        lambda pair: gamma_bar(pair[0]) and alpha_bar(pair[1]),  # type: ignore[index]
    )
    return InterfaceCertificate(iface, gamma_bar, alpha)


def parallel_certificate(*certs: InterfaceCertificate) -> InterfaceCertificate:
    """Componentwise conjunction of certificates on the parallel interface."""
    if not certs:
        raise TypeError("At least one certificate is required")
    n = len(certs)
    iface = parallel_interface(*(c.iface for c in certs))

    def gamma(o: Symbol) -> bool:
        return all(c.gamma(p) for c, p in zip(certs, unnest(o, n)))

    def alpha(pair: Symbol) -> bool:
        o, a = pair  # type: ignore[misc]
        return all(
            c.alpha((p, q)) for c, p, q in zip(certs, unnest(o, n), unnest(a, n))
        )

    return InterfaceCertificate(
        iface,
        Predicate.from_function(iface.obs, gamma),
        Predicate.from_function(iface.pair_set(), alpha),
    )


def pullback_certificate(
    chart: Chart, cert: InterfaceCertificate
) -> InterfaceCertificate:
    """Pull a certificate on ``chart.dst`` back to ``chart.src``.

    The guarantee becomes ``gamma o f`` and the assumption
    ``(o, a) -> alpha(f(o), f#(o, a))``.
    """
    check_interfaces(cert.iface, chart.dst, "pullback_certificate")
    src = chart.src
    gamma = Predicate.from_function(src.obs, lambda o: cert.gamma(chart.fwd[o]))
    alpha = Predicate.from_function(
        src.pair_set(),
        lambda pair: cert.alpha(
            (chart.fwd[pair[0]], chart.push[pair])  # type: ignore[index]
        ),
    )
    return InterfaceCertificate(src, gamma, alpha)


# Checkers


def _lens_cases(lens: Lens) -> Iterator[tuple[Symbol, Symbol | None]]:
    for o1 in lens.src.obs:
        yield (o1, None)
        for a2 in lens.dst.actions[lens.fwd[o1]]:
            yield (o1, a2)


def certify_lens(
    lens: Lens,
    inner: InterfaceCertificate,
    outer: InterfaceCertificate,
    jobs: int | None = None,
) -> Verdict:
    """Check that a lens carries the inner certificate to the outer one.

    For every ``o1`` and every ``a2`` in the fiber of ``w(o1)``::

        guarantee:  gamma1(o1) => gamma2(w(o1))
        assumption: gamma1(o1) and alpha2(w(o1), a2) => alpha1(o1, w#(o1, a2))

    The counterexample is ``(o1, None)`` for the guarantee and
    ``(o1, a2)`` for the assumption.
    """
    check_interfaces(inner.iface, lens.src, "certify_lens inner certificate")
    check_interfaces(outer.iface, lens.dst, "certify_lens outer certificate")

    def check(case: tuple[Symbol, Symbol | None]) -> Verdict | None:
        o1, a2 = case
        if not inner.gamma(o1):
            return None
        o2 = lens.fwd[o1]
        if a2 is None:
            if not outer.gamma(o2):
                return Verdict.failure(case, "guarantee")
            return None
        if outer.alpha((o2, a2)) and not inner.alpha((o1, lens.bwd[(o1, a2)])):
            return Verdict.failure(case, "assumption")
        return None

    failure = first_failure(_lens_cases(lens), check, jobs)
    return failure if failure is not None else Verdict.success()


def _machine_cases(machine: Machine) -> Iterator[tuple[Symbol, Symbol | None]]:
    for s in machine.states:
        yield (s, None)
        for a in machine.iface.actions[machine.view[s]]:
            yield (s, a)


def certify_machine(
    machine: Machine, cert: MachineCertificate, jobs: int | None = None
) -> Verdict:
    """Check a machine certificate exhaustively.

    For every state ``s`` and every ``a`` in the fiber of ``v(s)``::

        guarantee:  phi(s) => gamma(v(s))
        assumption: phi(s) and alpha(v(s), a) => Lift phi(u(s, a))
    """
    if cert.machine != machine:
        raise WellFormednessError("The certificate was issued for another machine")
    phi = cert.phi
    icert = cert.icert
    lifted = lift_predicate(phi, machine.change)

    def check(case: tuple[Symbol, Symbol | None]) -> Verdict | None:
        s, a = case
        if not phi(s):
            return None
        o = machine.view[s]
        if a is None:
            if not icert.gamma(o):
                return Verdict.failure(case, "guarantee")
            return None
        if icert.alpha((o, a)) and not lifted(machine.update[(s, a)]):
            return Verdict.failure(case, "assumption")
        return None

    failure = first_failure(_machine_cases(machine), check, jobs)
    return failure if failure is not None else Verdict.success()


def largest_invariant(
    machine: Machine, icert: InterfaceCertificate
) -> MachineCertificate:
    """Return the weakest state predicate certifying ``machine`` against ``icert``.

    Starts from the states whose view satisfies the guarantee and removes
    states with an assumed action escaping the set, until stable.
    """
    check_interfaces(icert.iface, machine.iface, "largest_invariant")
    safe = {s for s in machine.states if icert.gamma(machine.view[s])}
    changed = True
    while changed:
        changed = False
        lifted = machine.change.lift(safe.__contains__)
        for s in list(safe):
            o = machine.view[s]
            for a in machine.iface.actions[o]:
                if icert.alpha((o, a)) and not lifted(machine.update[(s, a)]):
                    safe.discard(s)
                    changed = True
                    break
    phi = Predicate.of_true(machine.states, safe)
    return MachineCertificate(machine, phi, icert)


# Proof rules


def _first_difference(
    left: InterfaceCertificate, right: InterfaceCertificate
) -> tuple[Symbol, Symbol | None] | None:
    for o in left.iface.obs:
        if left.gamma(o) != right.gamma(o):
            return (o, None)
    for o, a in left.iface.pairs():
        if left.alpha((o, a)) != right.alpha((o, a)):
            return (o, a)
    return None


def comp_rule(
    wiring: Lens,
    wcert: tuple[InterfaceCertificate, InterfaceCertificate],
    certified: Sequence[MachineCertificate],
    jobs: int | None = None,
) -> MachineCertificate:
    """Certify the coupling of certified machines by a certified wiring.

    The premises are checked in order: every component certificate, the
    inner wiring certificate being the conjunction of the component
    interface certificates, and the wiring certificate itself. The
    returned certificate is ``(phi1 and ... and phin, outer)`` on the
    coupled machine, re-verified before being returned.
    """
    inner, outer = wcert
    if not certified:
        raise TypeError("At least one certified machine is required")
    for index, cert in enumerate(certified):
        verdict = certify_machine(cert.machine, cert, jobs)
        if not verdict:
            raise PremiseError("COMP", f"component {index} is not certified", verdict)
    expected = parallel_certificate(*(c.icert for c in certified))
    try:
        check_interfaces(expected.iface, inner.iface, "COMP inner certificate")
    except InterfaceMismatch as exc:
        raise PremiseError("COMP", str(exc)) from exc
    difference = _first_difference(expected, inner)
    if difference is not None:
        raise PremiseError(
            "COMP",
            "the inner wiring certificate is not the conjunction of the components",
            Verdict.failure(difference, "conjunction"),
        )
    verdict = certify_lens(wiring, inner, outer, jobs)
    if not verdict:
        raise PremiseError("COMP", "the wiring certificate does not hold", verdict)
    machine = couple([c.machine for c in certified], wiring)
    phi = product_predicate(*(c.phi for c in certified))
    result = MachineCertificate(machine, phi, outer)
    check = certify_machine(machine, result, jobs)
    if not check:
        raise SoundnessError("COMP", check)
    logger.debug(
        "COMP: certified coupling of %d machines (%d states)",
        len(certified),
        len(machine.states),
    )
    return result


def subst_rule(
    sim: Simulation, target: MachineCertificate, jobs: int | None = None
) -> MachineCertificate:
    """Transport a certificate backwards along a simulation.

    The source certificate is ``(phi o sigma, pullback of the interface
    certificate along the chart)``, re-verified before being returned.
    """
    if target.machine != sim.dst:
        raise WellFormednessError(
            "The target certificate is not about the simulation target"
        )
    verdict = check_simulation(sim, jobs)
    if not verdict:
        raise PremiseError("SUBST", "the simulation square does not commute", verdict)
    verdict = certify_machine(sim.dst, target, jobs)
    if not verdict:
        raise PremiseError("SUBST", "the target certificate does not hold", verdict)
    phi = Predicate.from_function(sim.src.states, lambda s: target.phi(sim.map[s]))
    icert = pullback_certificate(sim.chart, target.icert)
    result = MachineCertificate(sim.src, phi, icert)
    check = certify_machine(sim.src, result, jobs)
    if not check:
        raise SoundnessError("SUBST", check)
    logger.debug("SUBST: pulled back certificate on %d states", len(sim.src.states))
    return result


def cascade_conditions(
    gamma1: Predicate,
    alpha_bar1: Predicate,
    gamma2: Predicate,
    alpha_bar2: Predicate,
    gamma3: Predicate,
    alpha_bar3: Predicate,
) -> Verdict:
    """Check the specialized conditions for the cascade wiring.

    The carriers are ``O1 x M`` and ``A`` for the first box, ``O2`` and
    ``M x A`` for the second, ``O1 x O2`` and ``A`` for the outer box.
    The conditions, in order::

        alpha_bar3(a) => alpha_bar1(a)
        gamma1(o1, m) and alpha_bar3(a) => alpha_bar2(m, a)
        gamma1(o1, m) and gamma2(o2) => gamma3(o1, o2)

    They imply the generic lens check on the cascade lens, and are
    equivalent to it as soon as both inner guarantees are satisfiable.
    """
    actions = alpha_bar1.carrier
    if alpha_bar3.carrier != actions:
        raise WellFormednessError("The first and outer boxes must share their actions")

    def cases() -> Iterator[tuple[str, tuple[Symbol, ...]]]:
        for a in actions:
            yield ("first-assumption", (a,))
        for o1m in gamma1.carrier:
            for a in actions:
                yield ("second-assumption", (o1m, a))
        for o1m in gamma1.carrier:
            for o2 in gamma2.carrier:
                yield ("guarantee", (o1m, o2))

    def check(case: tuple[str, tuple[Symbol, ...]]) -> Verdict | None:
        name, args = case
        if name == "first-assumption":
            (a,) = args
            if alpha_bar3(a) and not alpha_bar1(a):
                return Verdict.failure(args, name)
        elif name == "second-assumption":
            o1m, a = args
            _, m = o1m  # type: ignore[misc]
            if gamma1(o1m) and alpha_bar3(a) and not alpha_bar2((m, a)):
                return Verdict.failure(args, name)
        else:
            o1m, o2 = args
            o1, _ = o1m  # type: ignore[misc]
            if gamma1(o1m) and gamma2(o2) and not gamma3((o1, o2)):
                return Verdict.failure(args, name)
        return None

    failure = first_failure(cases(), check)
    return failure if failure is not None else Verdict.success()
