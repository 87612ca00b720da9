"""Document formats for machines, wirings, certificates, ODEs and simulations.

Every document starts with a header ``<kind> <name> [variant]`` followed by
sections. The printers are canonical: ``parse_document(print_document(d))``
equals ``d``.

Example::

    machine toggle deterministic
    states: off on
    interface:
      ok -> go stop
    view:
      off -> ok
      on -> ok
    update:
      off go -> on
      off stop -> off
      on go -> on
      on stop -> off
"""

from __future__ import annotations

import re
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Sequence, Sized, Tuple, Union

from ..cert.boolean import (
    InterfaceCertificate,
    MachineCertificate,
    Predicate,
    simple_certificate,
)
from ..cert.plfun import parse_pl, print_pl
from ..cert.quant import CertifiedQuantLens, QuantCertificate, QuantLens
from ..core import AglensError, Chart, FiniteSet, Interface, Lens, WellFormednessError
from ..expr import Expr, format_expr, format_float, input_vars, state_vars
from ..grid import Axis, Box, SamplePlan
from ..machines import Machine, Simulation, change_structure
from ..ode import LyapunovCandidate, OpenODE
from ..symbols import Symbol, format_symbol, parse_symbol, sorted_symbols, symbol_key
from ..wiring import make_cascade, make_feedback, make_parallel
from .exprparse import parse_expr
from .lexer import Layout, Line, Section, split_sections, words
from .spans import ParseError, SourceSpan

__all__ = [
    "DOCUMENT_KINDS",
    "Document",
    "WiringRecipe",
    "TrueSet",
    "CertPart",
    "CertSpec",
    "SimulationSpec",
    "parse_document",
    "print_document",
    "load_document",
    "parse_machine",
    "parse_wiring",
    "parse_certificates",
    "parse_ode",
    "wiring_lens",
    "bind_interface_certificate",
    "bind_machine_certificate",
    "bind_lens_certificates",
    "bind_simulation",
    "certificate_part",
]

DOCUMENT_KINDS = ("machine", "wiring", "bool-cert", "quant-cert", "ode", "simulation")

NAME_PATTERN = re.compile(r"[A-Za-z0-9_.\-]+")


@dataclass(frozen=True)
class Document:
    kind: str
    name: str
    body: Any


# Document bodies


RECIPE_CARRIERS = {
    "cascade": ("actions", "first", "middle", "second"),
    "feedback": ("actions", "middle", "obs"),
    "parallel": ("first-obs", "first-actions", "second-obs", "second-actions"),
}


@dataclass(frozen=True)
class WiringRecipe:
    """A wiring lens given by one of the standard constructors."""

    kind: str
    carriers: tuple[tuple[Symbol, ...], ...]

    def lens(self) -> Lens:
        sets = [FiniteSet(c) for c in self.carriers]
        if self.kind == "cascade":
            return make_cascade(*sets)
        if self.kind == "feedback":
            return make_feedback(*sets)
        if self.kind == "parallel":
            first_obs, first_actions, second_obs, second_actions = sets
            return make_parallel(
                Interface.simple(first_obs, first_actions),
                Interface.simple(second_obs, second_actions),
            )
        raise ValueError(f"Unknown wiring constructor {self.kind!r}")


def wiring_lens(document: Document) -> Lens:
    body = document.body
    return body.lens() if isinstance(body, WiringRecipe) else body


@dataclass(frozen=True)
class TrueSet:
    """The symbols a predicate holds on; ``None`` stands for all of them."""

    symbols: tuple[Symbol, ...] | None

    def __post_init__(self) -> None:
        if self.symbols is not None:
            object.__setattr__(self, "symbols", tuple(sorted_symbols(self.symbols)))

    @property
    def is_all(self) -> bool:
        return self.symbols is None

    def predicate(self, carrier: FiniteSet) -> Predicate:
        if self.symbols is None:
            return Predicate.constant(carrier, True)
        return Predicate.of_true(carrier, self.symbols)


ALL = TrueSet(None)

AlphaTable = Tuple[Tuple[Symbol, TrueSet], ...]


@dataclass(frozen=True)
class CertPart:
    """One certificate of a certificate file.

    A missing guarantee or state predicate holds everywhere. A missing
    assumption holds exactly where the guarantee does.
    """

    phi: TrueSet | None = None
    gamma: TrueSet | None = None
    alpha: AlphaTable | None = None
    alpha_bar: TrueSet | None = None

    def __post_init__(self) -> None:
        if self.alpha is not None:
            table = sorted(self.alpha, key=lambda item: symbol_key(item[0]))
            object.__setattr__(self, "alpha", tuple(table))
        if self.alpha is not None and self.alpha_bar is not None:
            raise WellFormednessError("alpha and alpha-bar are exclusive")


@dataclass(frozen=True)
class CertSpec:
    """Certificate parts keyed by prefix: ``""``, ``"inner"`` or ``"outer"``."""

    parts: tuple[tuple[str, CertPart], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "parts", tuple(sorted(self.parts)))

    def part(self, prefix: str = "") -> CertPart:
        for key, part in self.parts:
            if key == prefix:
                return part
        label = f"{prefix!r} " if prefix else ""
        raise WellFormednessError(f"The certificate file has no {label}certificate")


@dataclass(frozen=True)
class SimulationSpec:
    """A simulation between the machines stored in two other documents."""

    source: str
    target: str
    forward: tuple[tuple[Symbol, Symbol], ...]
    push: tuple[tuple[tuple[Symbol, Symbol], Symbol], ...]
    map: tuple[tuple[Symbol, Symbol], ...]


# Binding


def bind_interface_certificate(
    part: CertPart, iface: Interface
) -> InterfaceCertificate:
    gamma = (part.gamma or ALL).predicate(iface.obs)
    if part.alpha_bar is not None:
        return simple_certificate(
            iface, gamma, part.alpha_bar.predicate(iface.constant_actions())
        )
    if part.alpha is None:

        def follows_gamma(pair: Symbol) -> bool:
            return gamma(pair[0])  # type: ignore[index]

        alpha = Predicate.from_function(iface.pair_set(), follows_gamma)
        return InterfaceCertificate(iface, gamma, alpha)
    table = dict(part.alpha)
    for o, trues in table.items():
        if o not in iface.obs:
            raise WellFormednessError(
                f"alpha names unknown observation {format_symbol(o)!r}"
            )
        for a in trues.symbols or ():
            if a not in iface.fiber(o):
                raise WellFormednessError(
                    f"alpha names {format_symbol(a)!r} "
                    f"outside the fiber of {format_symbol(o)!r}"
                )

    def alpha_truth(pair: Symbol) -> bool:
        o, a = pair  # type: ignore[misc]
        trues = table.get(o)
        return trues is not None and (trues.is_all or a in (trues.symbols or ()))

    alpha = Predicate.from_function(iface.pair_set(), alpha_truth)
    return InterfaceCertificate(iface, gamma, alpha)


def bind_machine_certificate(spec: CertSpec, machine: Machine) -> MachineCertificate:
    part = spec.part("")
    icert = bind_interface_certificate(part, machine.iface)
    phi = (part.phi or ALL).predicate(machine.states)
    return MachineCertificate(machine, phi, icert)


def bind_lens_certificates(
    spec: CertSpec, lens: Lens
) -> tuple[InterfaceCertificate, InterfaceCertificate]:
    return (
        bind_interface_certificate(spec.part("inner"), lens.src),
        bind_interface_certificate(spec.part("outer"), lens.dst),
    )


def bind_simulation(spec: SimulationSpec, src: Machine, dst: Machine) -> Simulation:
    chart = Chart(src.iface, dst.iface, dict(spec.forward), dict(spec.push))
    return Simulation(src, dst, chart, dict(spec.map))


def certificate_part(
    icert: InterfaceCertificate, phi: Predicate | None = None
) -> CertPart:
    """Describe a certificate by its true sets."""
    alpha = tuple(
        (o, TrueSet(tuple(a for a in icert.iface.fiber(o) if icert.alpha((o, a)))))
        for o in icert.iface.obs
        if any(icert.alpha((o, a)) for a in icert.iface.fiber(o))
    )
    return CertPart(
        phi=None if phi is None else TrueSet(phi.true_set()),
        gamma=TrueSet(icert.gamma.true_set()),
        alpha=alpha,
    )


# Parsing helpers


class _Reader:
    def __init__(self, layout: Layout, allowed: Iterable[str]) -> None:
        self.file = layout.file
        self.layout = layout
        self.sections: dict[str, Section] = {}
        allowed = tuple(allowed)
        for section in layout.sections:
            if section.name not in allowed:
                raise ParseError(
                    f"Unknown section {section.name!r}",
                    self.span(section.line, len(section.name)),
                    allowed,
                )
            if section.name in self.sections:
                raise ParseError(
                    f"Duplicate section {section.name!r}",
                    self.span(section.line, len(section.name)),
                )
            self.sections[section.name] = section

    def span(
        self, line: Line, length: int | None = None, column: int | None = None
    ) -> SourceSpan:
        column = line.column if column is None else column
        size = len(line.text) if length is None else length
        return SourceSpan(self.file, line.number, column, size)

    def section(self, name: str) -> Section | None:
        return self.sections.get(name)

    def require(self, name: str) -> Section:
        section = self.sections.get(name)
        if section is None:
            raise ParseError(
                f"Missing section {name!r}",
                self.span(self.layout.header),
                (f"{name}:",),
            )
        return section

    def symbol(self, word: str, line: Line, column: int) -> Symbol:
        try:
            return parse_symbol(word)
        except ValueError:
            raise ParseError(
                f"Malformed symbol {word!r}",
                SourceSpan(self.file, line.number, column, len(word)),
                ("symbol",),
            ) from None

    def symbols(self, section: Section) -> list[Symbol]:
        """The distinct symbols listed in a section."""
        result: list[Symbol] = []
        for line in section.all_entries():
            for word, column in words(line):
                symbol = self.symbol(word, line, column)
                if symbol in result:
                    raise ParseError(
                        f"Duplicate symbol {word!r}",
                        SourceSpan(self.file, line.number, column, len(word)),
                    )
                result.append(symbol)
        return result

    def arrow(
        self, line: Line, left: int, right: int | None
    ) -> tuple[list[Symbol], list[tuple[str, int]]]:
        """Split ``lhs -> rhs``; the left side has exactly ``left`` symbols
        and the right one ``right`` words unless ``right`` is None."""
        lhs, sep, rhs = line.text.partition("->")
        if not sep:
            raise ParseError("Missing arrow", self.span(line), ("->",))
        lhs_words = words(Line(line.number, line.column, lhs))
        if len(lhs_words) != left:
            raise ParseError(
                f"Expected {left} symbol(s) before '->', got {len(lhs_words)}",
                self.span(line, len(lhs)),
            )
        symbols = [self.symbol(w, line, c) for w, c in lhs_words]
        rhs_column = line.column + len(lhs) + 2
        rhs_words = words(Line(line.number, rhs_column, rhs))
        if right is not None and len(rhs_words) != right:
            raise ParseError(
                f"Expected {right} symbol(s) after '->', got {len(rhs_words)}",
                SourceSpan(self.file, line.number, rhs_column, len(rhs)),
            )
        return symbols, rhs_words

    def target(self, line: Line, items: list[tuple[str, int]]) -> Symbol:
        word, column = items[0]
        return self.symbol(word, line, column)

    def interface(self, section: Section) -> Interface:
        actions: dict[Symbol, FiniteSet] = {}
        for line in section.all_entries():
            (o,), items = self.arrow(line, 1, None)
            if o in actions:
                raise ParseError(
                    f"Duplicate observation {format_symbol(o)!r}", self.span(line)
                )
            fiber: list[Symbol] = []
            for word, column in items:
                a = self.symbol(word, line, column)
                if a in fiber:
                    raise ParseError(f"Duplicate action {word!r}", self.span(line))
                fiber.append(a)
            actions[o] = FiniteSet(tuple(fiber))
        self.nonempty(section, actions, "observation")
        return Interface(FiniteSet(tuple(actions)), actions)

    def nonempty(self, section: Section, items: Sized, what: str) -> None:
        """Reject an empty carrier."""
        if not items:
            raise ParseError(
                f"Section {section.name!r} lists no {what}",
                self.span(section.line, len(section.name)),
                (what,),
            )

    def keyed(
        self, section: Section, allowed: Sequence[str]
    ) -> dict[str, tuple[Line, str, int]]:
        """Entries ``key: value`` as ``key -> (line, value, value column)``."""
        result: dict[str, tuple[Line, str, int]] = {}
        for line in section.all_entries():
            key, colon, value = line.text.partition(":")
            key = key.strip()
            if not colon:
                raise ParseError("Expected 'key: value'", self.span(line), (":",))
            if key not in allowed:
                raise ParseError(
                    f"Unknown key {key!r}", self.span(line, len(key)), tuple(allowed)
                )
            if key in result:
                raise ParseError(f"Duplicate key {key!r}", self.span(line, len(key)))
            column = line.column + len(line.text) - len(value.lstrip())
            result[key] = (line, value.strip(), column)
        return result

    def expr(self, line: Line, text: str, column: int) -> Expr:
        return parse_expr(text, self.file, line.number, column)

    def exprs(self, line: Line, text: str, column: int) -> tuple[Expr, ...]:
        """Expressions separated by ``;``."""
        if not text.strip():
            return ()
        result = []
        offset = 0
        for part in text.split(";"):
            lead = len(part) - len(part.lstrip())
            if not part.strip():
                raise ParseError(
                    "Empty expression",
                    SourceSpan(self.file, line.number, column + offset, 1),
                    ("expression",),
                )
            result.append(self.expr(line, part.strip(), column + offset + lead))
            offset += len(part) + 1
        return tuple(result)

    def number(self, word: str, line: Line, column: int) -> float:
        try:
            return float(word)
        except ValueError:
            raise ParseError(
                f"Malformed number {word!r}",
                SourceSpan(self.file, line.number, column, len(word)),
                ("number",),
            ) from None

    @contextmanager
    def checked(self, line: Line) -> Iterator[None]:
        """Report invariant violations of the built objects at ``line``."""
        try:
            yield
        except ParseError:
            raise
        except (AglensError, ValueError, TypeError) as exc:
            raise ParseError(f"Invariant violation: {exc}", self.span(line)) from exc


# Machines


def _parse_machine(reader: _Reader, variant: list[str]) -> Machine:
    header = reader.layout.header
    kind = variant[0] if variant else "deterministic"
    if len(variant) > 1 or kind not in ("deterministic", "nondeterministic"):
        raise ParseError(
            f"Unknown machine kind {' '.join(variant)!r}",
            reader.span(header),
            ("deterministic", "nondeterministic"),
        )
    states_section = reader.require("states")
    states = reader.symbols(states_section)
    reader.nonempty(states_section, states, "state")
    iface = reader.interface(reader.require("interface"))
    view: dict[Symbol, Symbol] = {}
    for line in reader.require("view").all_entries():
        (s,), items = reader.arrow(line, 1, 1)
        if s in view:
            raise ParseError(
                f"Duplicate view entry for {format_symbol(s)!r}", reader.span(line)
            )
        view[s] = reader.target(line, items)
    update: dict[tuple[Symbol, Symbol], Any] = {}
    for line in reader.require("update").all_entries():
        (s, a), items = reader.arrow(line, 2, None)
        if (s, a) in update:
            raise ParseError("Duplicate update entry", reader.span(line))
        update[(s, a)] = _parse_change(reader, line, items, kind)
    with reader.checked(header):
        return Machine(
            FiniteSet(tuple(states)), iface, change_structure(kind), view, update
        )


def _parse_change(
    reader: _Reader, line: Line, items: list[tuple[str, int]], kind: str
) -> Any:
    if kind == "deterministic":
        if len(items) != 1:
            raise ParseError("Expected one target state", reader.span(line), ("state",))
        return reader.target(line, items)
    if not items:
        raise ParseError("Expected a set of states", reader.span(line), ("{",))
    start = items[0][1] - line.column
    end = items[-1][1] - line.column + len(items[-1][0])
    text = line.text[start:end]
    if not (text.startswith("{") and text.endswith("}")):
        raise ParseError("Expected a set of states", reader.span(line), ("{",))
    inner = words(Line(line.number, line.column + start + 1, text[1:-1]))
    return frozenset(reader.symbol(word, line, column) for word, column in inner)


def _print_machine(machine: Machine) -> list[str]:
    lines = [_inline("states", machine.states), "interface:"]
    lines += _interface_lines(machine.iface)
    lines.append("view:")
    lines += [
        f"  {format_symbol(s)} -> {format_symbol(machine.view[s])}"
        for s in machine.states
    ]
    lines.append("update:")
    for s, a in machine.domain():
        change = machine.update[(s, a)]
        if machine.is_deterministic:
            target = format_symbol(change)
        else:
            members = " ".join(format_symbol(t) for t in machine.states if t in change)
            target = "{" + members + "}"
        lines.append(f"  {format_symbol(s)} {format_symbol(a)} -> {target}")
    return lines


def _inline(name: str, symbols: Iterable[Symbol]) -> str:
    text = " ".join(format_symbol(s) for s in symbols)
    return f"{name}: {text}" if text else f"{name}:"


def _interface_lines(iface: Interface) -> list[str]:
    lines = []
    for o in iface.obs:
        fiber = " ".join(format_symbol(a) for a in iface.fiber(o))
        lines.append(f"  {format_symbol(o)} -> {fiber}".rstrip())
    return lines


# Wirings


def _parse_wiring(reader: _Reader, variant: list[str]) -> Union[Lens, WiringRecipe]:
    header = reader.layout.header
    kind = variant[0] if variant else "lens"
    if len(variant) > 1 or kind not in ("lens", *RECIPE_CARRIERS):
        raise ParseError(
            f"Unknown wiring kind {' '.join(variant)!r}",
            reader.span(header),
            ("lens", *RECIPE_CARRIERS),
        )
    if kind in RECIPE_CARRIERS:
        carriers = tuple(
            tuple(reader.symbols(reader.require(n))) for n in RECIPE_CARRIERS[kind]
        )
        for name, carrier in zip(RECIPE_CARRIERS[kind], carriers):
            reader.nonempty(reader.require(name), carrier, "symbol")
        recipe = WiringRecipe(kind, carriers)
        with reader.checked(header):
            recipe.lens()
        return recipe
    src = reader.interface(reader.require("source"))
    dst = reader.interface(reader.require("target"))
    fwd = {}
    for line in reader.require("forward").all_entries():
        (o,), items = reader.arrow(line, 1, 1)
        if o in fwd:
            raise ParseError("Duplicate forward entry", reader.span(line))
        fwd[o] = reader.target(line, items)
    bwd = {}
    for line in reader.require("backward").all_entries():
        (o, b), items = reader.arrow(line, 2, 1)
        if (o, b) in bwd:
            raise ParseError("Duplicate backward entry", reader.span(line))
        bwd[(o, b)] = reader.target(line, items)
    with reader.checked(header):
        return Lens(src, dst, fwd, bwd)


def _print_wiring(body: Union[Lens, WiringRecipe]) -> tuple[str, list[str]]:
    if isinstance(body, WiringRecipe):
        names = RECIPE_CARRIERS[body.kind]
        return body.kind, [_inline(n, c) for n, c in zip(names, body.carriers)]
    lines = ["source:", *_interface_lines(body.src)]
    lines += ["target:", *_interface_lines(body.dst)]
    lines.append("forward:")
    lines += [
        f"  {format_symbol(o)} -> {format_symbol(body.fwd[o])}" for o in body.src.obs
    ]
    lines.append("backward:")
    for o in body.src.obs:
        for b in body.dst.fiber(body.fwd[o]):
            target = format_symbol(body.bwd[(o, b)])
            lines.append(f"  {format_symbol(o)} {format_symbol(b)} -> {target}")
    return "lens", lines


# Boolean certificates


CERT_FIELDS = ("phi", "gamma", "alpha", "alpha-bar")
CERT_PREFIXES = ("", "inner", "outer")


def _cert_sections() -> list[str]:
    return [
        f"{prefix}.{name}" if prefix else name
        for prefix in CERT_PREFIXES
        for name in CERT_FIELDS
    ]


def _true_set(reader: _Reader, section: Section) -> TrueSet:
    entries = section.all_entries()
    if len(entries) == 1 and entries[0].text == "*":
        return ALL
    return TrueSet(tuple(reader.symbols(section)))


def _parse_bool_cert(reader: _Reader, variant: list[str]) -> CertSpec:
    if variant:
        raise ParseError("Unexpected header words", reader.span(reader.layout.header))
    parts = []
    for prefix in CERT_PREFIXES:
        fields: dict[str, Any] = {}
        for name in CERT_FIELDS:
            section = reader.section(f"{prefix}.{name}" if prefix else name)
            if section is None:
                continue
            if name == "alpha":
                fields["alpha"] = _alpha_table(reader, section)
            else:
                fields[name.replace("-", "_")] = _true_set(reader, section)
        if not fields:
            continue
        if "alpha" in fields and "alpha_bar" in fields:
            section = reader.require(f"{prefix}.alpha-bar" if prefix else "alpha-bar")
            raise ParseError(
                "alpha and alpha-bar are exclusive",
                reader.span(section.line, len(section.name)),
            )
        _check_alpha_gamma(reader, prefix, fields)
        parts.append((prefix, CertPart(**fields)))
    if not parts:
        raise ParseError(
            "Empty certificate file",
            reader.span(reader.layout.header),
            tuple(_cert_sections()),
        )
    return CertSpec(tuple(parts))


def _alpha_table(reader: _Reader, section: Section) -> AlphaTable:
    table: dict[Symbol, TrueSet] = {}
    for line in section.all_entries():
        (o,), items = reader.arrow(line, 1, None)
        if o in table:
            raise ParseError(
                f"Duplicate alpha entry for {format_symbol(o)!r}", reader.span(line)
            )
        if [w for w, _ in items] == ["*"]:
            table[o] = ALL
            continue
        actions: list[Symbol] = []
        for word, column in items:
            a = reader.symbol(word, line, column)
            if a in actions:
                raise ParseError(f"Duplicate action {word!r}", reader.span(line))
            actions.append(a)
        table[o] = TrueSet(tuple(actions))
    return tuple(table.items())


def _check_alpha_gamma(reader: _Reader, prefix: str, fields: dict[str, Any]) -> None:
    gamma: TrueSet | None = fields.get("gamma")
    alpha: AlphaTable | None = fields.get("alpha")
    if alpha is None or gamma is None or gamma.is_all:
        return
    section = reader.require(f"{prefix}.alpha" if prefix else "alpha")
    for line in section.all_entries():
        (o,), _ = reader.arrow(line, 1, None)
        trues = dict(alpha)[o]
        if (trues.is_all or trues.symbols) and o not in (gamma.symbols or ()):
            raise ParseError(
                "Ill-formed certificate: alpha_o(a) => gamma(o) is required, "
                f"but alpha assumes actions at {format_symbol(o)} "
                "where gamma does not hold",
                reader.span(line),
            )


def _print_true_set(name: str, trues: TrueSet) -> str:
    return f"{name}: *" if trues.is_all else _inline(name, trues.symbols or ())


def _print_bool_cert(spec: CertSpec) -> list[str]:
    lines = []
    for prefix, part in spec.parts:
        label = f"{prefix}." if prefix else ""
        if part.phi is not None:
            lines.append(_print_true_set(f"{label}phi", part.phi))
        if part.gamma is not None:
            lines.append(_print_true_set(f"{label}gamma", part.gamma))
        if part.alpha is not None:
            lines.append(f"{label}alpha:")
            for o, trues in part.alpha:
                if trues.is_all:
                    rhs = "*"
                else:
                    rhs = " ".join(format_symbol(a) for a in trues.symbols or ())
                lines.append(f"  {format_symbol(o)} -> {rhs}".rstrip())
        if part.alpha_bar is not None:
            lines.append(_print_true_set(f"{label}alpha-bar", part.alpha_bar))
    return lines


# Quantitative certificates


CANDIDATE_KEYS = ("phi", "alpha", "gamma", "lambda")
QLENS_KEYS = (
    "source",
    "target",
    "forward",
    "backward",
    "source-gamma",
    "source-alpha",
    "target-gamma",
    "target-alpha",
    "slack",
)


def _pl(reader: _Reader, line: Line, text: str, column: int) -> Any:
    try:
        return parse_pl(text)
    except ValueError as exc:
        raise ParseError(
            str(exc),
            SourceSpan(reader.file, line.number, column, len(text)),
            ("pl [...] slope s",),
        ) from None


def _dims(reader: _Reader, line: Line, text: str, column: int) -> tuple[int, int]:
    parts = text.split()
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise ParseError(
            "Expected observation and action dimensions",
            SourceSpan(reader.file, line.number, column, len(text)),
            ("<obs> <actions>",),
        )
    return int(parts[0]), int(parts[1])


def _parse_plan(reader: _Reader, section: Section) -> SamplePlan:
    axes = []
    for line in section.all_entries():
        items = words(line)
        if len(items) not in (4, 5):
            raise ParseError(
                "Expected 'name lo hi step [anchor]'", reader.span(line), ("axis",)
            )
        name = items[0][0]
        lo, hi, step, *anchor = (reader.number(w, line, c) for w, c in items[1:])
        with reader.checked(line):
            axes.append(Axis(name, lo, hi, step, anchor[0] if anchor else 0.0))
    with reader.checked(section.line):
        return SamplePlan(tuple(axes))


def _parse_quant_cert(
    reader: _Reader, variant: list[str]
) -> Union[LyapunovCandidate, CertifiedQuantLens]:
    header = reader.layout.header
    if variant:
        raise ParseError("Unexpected header words", reader.span(header))
    if reader.section("candidate") is not None:
        if len(reader.sections) != 1:
            raise ParseError(
                "A candidate file has a single section",
                reader.span(header),
                ("candidate:",),
            )
        section = reader.require("candidate")
        keys = reader.keyed(section, CANDIDATE_KEYS)
        if "phi" not in keys:
            raise ParseError("Missing key 'phi'", reader.span(section.line), ("phi:",))
        fields: dict[str, Any] = {}
        for key in ("phi", "alpha", "gamma"):
            if key in keys:
                fields[key] = reader.expr(*keys[key])
        if "lambda" in keys:
            fields["lam"] = _pl(reader, *keys["lambda"])
        with reader.checked(section.line):
            return LyapunovCandidate(**fields)
    section = reader.require("qlens")
    keys = reader.keyed(section, QLENS_KEYS)
    missing = [k for k in QLENS_KEYS if k not in keys]
    if missing:
        raise ParseError(
            f"Missing key {missing[0]!r}",
            reader.span(section.line),
            (f"{missing[0]}:",),
        )
    src_dims = _dims(reader, *keys["source"])
    dst_dims = _dims(reader, *keys["target"])
    plan = _parse_plan(reader, reader.require("plan"))
    with reader.checked(section.line):
        lens = QuantLens(
            src_dims,
            dst_dims,
            reader.exprs(*keys["forward"]),
            reader.exprs(*keys["backward"]),
        )
        src = QuantCertificate(
            *src_dims,
            reader.expr(*keys["source-gamma"]),
            reader.expr(*keys["source-alpha"]),
        )
        dst = QuantCertificate(
            *dst_dims,
            reader.expr(*keys["target-gamma"]),
            reader.expr(*keys["target-alpha"]),
        )
        return CertifiedQuantLens(lens, src, dst, _pl(reader, *keys["slack"]), plan)


def _print_plan(plan: SamplePlan) -> list[str]:
    lines = []
    for axis in plan.axes:
        numbers = [axis.lo, axis.hi, axis.step] + ([axis.anchor] if axis.anchor else [])
        lines.append(f"  {axis.name} " + " ".join(format_float(v) for v in numbers))
    return lines


def _print_quant_cert(body: Union[LyapunovCandidate, CertifiedQuantLens]) -> list[str]:
    if isinstance(body, LyapunovCandidate):
        return [
            "candidate:",
            f"  phi: {format_expr(body.phi)}",
            f"  alpha: {format_expr(body.alpha)}",
            f"  gamma: {format_expr(body.gamma)}",
            f"  lambda: {print_pl(body.lam)}",
        ]
    lens = body.lens

    def entry(key: str, value: str) -> str:
        return f"  {key}: {value}".rstrip()

    return [
        "qlens:",
        entry("source", f"{lens.src_dims[0]} {lens.src_dims[1]}"),
        entry("target", f"{lens.dst_dims[0]} {lens.dst_dims[1]}"),
        entry("forward", "; ".join(format_expr(e) for e in lens.fwd)),
        entry("backward", "; ".join(format_expr(e) for e in lens.bwd)),
        entry("source-gamma", format_expr(body.src_cert.gamma)),
        entry("source-alpha", format_expr(body.src_cert.alpha)),
        entry("target-gamma", format_expr(body.dst_cert.gamma)),
        entry("target-alpha", format_expr(body.dst_cert.alpha)),
        entry("slack", print_pl(body.slack)),
        "plan:",
        *_print_plan(body.plan),
    ]


# ODEs


def _bounds(
    reader: _Reader, section: Section | None, names: Callable[[int], list[str]]
) -> Box:
    if section is None:
        return Box(())
    bounds = []
    entries = section.all_entries()
    expected = names(len(entries))
    for line, name in zip(entries, expected):
        items = words(line)
        if len(items) != 3 or items[0][0] != name:
            raise ParseError(
                f"Expected bounds of {name}", reader.span(line), (f"{name} lo hi",)
            )
        bounds.append(tuple(reader.number(w, line, c) for w, c in items[1:]))
    with reader.checked(section.line):
        return Box(tuple(bounds))  # type: ignore[arg-type]


def _parse_ode(reader: _Reader, variant: list[str]) -> OpenODE:
    header = reader.layout.header
    if variant:
        raise ParseError("Unexpected header words", reader.span(header))
    field = tuple(
        reader.expr(line, line.text, line.column)
        for line in reader.require("field").all_entries()
    )
    view_section = reader.section("view")
    view = () if view_section is None else tuple(
        reader.expr(line, line.text, line.column) for line in view_section.all_entries()
    )
    domain = _bounds(reader, reader.require("domain"), state_vars)
    inputs = _bounds(reader, reader.section("inputs"), input_vars)
    x0 = a0 = None
    equilibrium = reader.section("equilibrium")
    if equilibrium is not None:
        keys = reader.keyed(equilibrium, ("x", "a"))
        if "x" in keys:
            line, text, column = keys["x"]
            x0 = [reader.number(w, line, column) for w in text.split()]
        if "a" in keys:
            line, text, column = keys["a"]
            a0 = [reader.number(w, line, column) for w in text.split()]
    with reader.checked(header):
        return OpenODE(field, view, domain, inputs, x0, a0)


def _print_bounds(box: Box, names: list[str]) -> list[str]:
    return [
        f"  {name} {format_float(lo)} {format_float(hi)}"
        for name, (lo, hi) in zip(names, box.bounds)
    ]


def _print_ode(ode: OpenODE) -> list[str]:
    lines = ["field:", *(f"  {format_expr(e)}" for e in ode.field)]
    if ode.view:
        lines += ["view:", *(f"  {format_expr(e)}" for e in ode.view)]
    lines += ["domain:", *_print_bounds(ode.domain, state_vars(ode.state_dim))]
    if ode.input_dim:
        inputs = _print_bounds(ode.input_domain, input_vars(ode.input_dim))
        lines += ["inputs:", *inputs]
    lines.append("equilibrium:")
    lines.append(f"  x: {' '.join(format_float(v) for v in ode.x0 or ())}".rstrip())
    if ode.input_dim:
        lines.append(f"  a: {' '.join(format_float(v) for v in ode.a0 or ())}")
    return lines


# Simulations


def _parse_simulation(reader: _Reader, variant: list[str]) -> SimulationSpec:
    if variant:
        raise ParseError("Unexpected header words", reader.span(reader.layout.header))
    paths = []
    for name in ("source", "target"):
        section = reader.require(name)
        entries = section.all_entries()
        if len(entries) != 1 or len(words(entries[0])) != 1:
            raise ParseError(
                f"Expected one path for {name!r}",
                reader.span(section.line),
                ("path",),
            )
        paths.append(entries[0].text)
    forward = tuple(
        (k[0], v) for _, k, v in _arrows(reader, reader.require("forward"), 1)
    )
    push = tuple(
        ((k[0], k[1]), v) for _, k, v in _arrows(reader, reader.require("push"), 2)
    )
    mapping = tuple((k[0], v) for _, k, v in _arrows(reader, reader.require("map"), 1))
    return SimulationSpec(paths[0], paths[1], forward, push, mapping)


def _arrows(
    reader: _Reader, section: Section, left: int
) -> Iterator[tuple[Line, tuple[Symbol, ...], Symbol]]:
    seen = set()
    for line in section.all_entries():
        lhs, items = reader.arrow(line, left, 1)
        if tuple(lhs) in seen:
            raise ParseError("Duplicate entry", reader.span(line))
        seen.add(tuple(lhs))
        yield line, tuple(lhs), reader.target(line, items)


def _print_simulation(spec: SimulationSpec) -> list[str]:
    lines = [f"source: {spec.source}", f"target: {spec.target}", "forward:"]
    lines += [f"  {format_symbol(o)} -> {format_symbol(p)}" for o, p in spec.forward]
    lines.append("push:")
    lines += [
        f"  {format_symbol(o)} {format_symbol(a)} -> {format_symbol(b)}"
        for (o, a), b in spec.push
    ]
    lines.append("map:")
    lines += [f"  {format_symbol(s)} -> {format_symbol(t)}" for s, t in spec.map]
    return lines


# Entry points


_SECTIONS = {
    "machine": ("states", "interface", "view", "update"),
    "wiring": (
        "source",
        "target",
        "forward",
        "backward",
        *sorted({n for names in RECIPE_CARRIERS.values() for n in names}),
    ),
    "bool-cert": tuple(_cert_sections()),
    "quant-cert": ("candidate", "qlens", "plan"),
    "ode": ("field", "view", "domain", "inputs", "equilibrium"),
    "simulation": ("source", "target", "forward", "push", "map"),
}

_PARSERS: dict[str, Callable[[_Reader, list[str]], Any]] = {
    "machine": _parse_machine,
    "wiring": _parse_wiring,
    "bool-cert": _parse_bool_cert,
    "quant-cert": _parse_quant_cert,
    "ode": _parse_ode,
    "simulation": _parse_simulation,
}


def parse_document(text: str, file: str = "<string>") -> Document:
    """Parse any document, dispatching on the header keyword."""
    layout = split_sections(text, file)
    header = words(layout.header)
    kind, column = header[0]
    if kind not in DOCUMENT_KINDS:
        raise ParseError(
            f"Unknown document kind {kind!r}",
            SourceSpan(file, layout.header.number, column, len(kind)),
            DOCUMENT_KINDS,
        )
    if len(header) < 2 or not NAME_PATTERN.fullmatch(header[1][0]):
        raise ParseError(
            "Expected a document name",
            SourceSpan(file, layout.header.number, column + len(kind), 1),
            ("name",),
        )
    reader = _Reader(layout, _SECTIONS[kind])
    body = _PARSERS[kind](reader, [w for w, _ in header[2:]])
    return Document(kind, header[1][0], body)


def _parse_kind(text: str, file: str, kinds: tuple[str, ...]) -> Document:
    document = parse_document(text, file)
    if document.kind not in kinds:
        layout = split_sections(text, file)
        raise ParseError(
            f"Expected a {' or '.join(kinds)} document, got {document.kind!r}",
            SourceSpan(file, layout.header.number, 1, len(document.kind)),
            kinds,
        )
    return document


def parse_machine(text: str, file: str = "<string>") -> Document:
    return _parse_kind(text, file, ("machine",))


def parse_wiring(text: str, file: str = "<string>") -> Document:
    return _parse_kind(text, file, ("wiring",))


def parse_certificates(text: str, file: str = "<string>") -> Document:
    return _parse_kind(text, file, ("bool-cert", "quant-cert"))


def parse_ode(text: str, file: str = "<string>") -> Document:
    return _parse_kind(text, file, ("ode",))


def load_document(path: str | Path) -> Document:
    path = Path(path)
    return parse_document(path.read_text(encoding="utf-8"), str(path))


def print_document(document: Document) -> str:
    """Canonical text of a document, ending with a newline."""
    kind, body = document.kind, document.body
    variant = ""
    if kind == "machine":
        variant = body.change.kind
        lines = _print_machine(body)
    elif kind == "wiring":
        variant, lines = _print_wiring(body)
    elif kind == "bool-cert":
        lines = _print_bool_cert(body)
    elif kind == "quant-cert":
        lines = _print_quant_cert(body)
    elif kind == "ode":
        lines = _print_ode(body)
    elif kind == "simulation":
        lines = _print_simulation(body)
    else:
        raise ValueError(f"Unknown document kind {kind!r}")
    header = f"{kind} {document.name} {variant}".rstrip()
    return "\n".join([header, *lines]) + "\n"
