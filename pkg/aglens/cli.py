"""Command line front end.

Every command reads documents, runs one checker or rule and prints its
result on stdout. The exit code is 0 when the checked property holds, 1
when it is violated and 2 on input errors. ``--report PATH`` writes a
JSON run report with the input hashes, the verdicts and the flags.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

from . import __version__
from .cert.boolean import (
    PremiseError,
    SoundnessError,
    certify_lens,
    certify_machine,
    comp_rule,
    parallel_certificate,
    subst_rule,
)
from .cert.plfun import parse_pl, print_pl
from .cert.quant import CertifiedQuantLens
from .core import AglensError
from .dsl import (
    CertSpec,
    Document,
    ParseError,
    bind_interface_certificate,
    bind_machine_certificate,
    bind_simulation,
    certificate_part,
    parse_document,
    parse_expr,
    print_document,
    wiring_lens,
)
from .grid import DEFAULT_GRID_STEP, TOL
from .machines import couple
from .ode import (
    ISS_TOL,
    InputSignal,
    LyapunovCandidate,
    OpenODE,
    certify_liss,
    check_iss_bound,
    falsify,
    k_approx,
    simulate,
)
from .sweep import JOBS_ENV, resolve_jobs
from .verdict import Verdict, jsonable

__all__ = ["REPORT_SCHEMA", "RunReport", "InputError", "build_parser", "main"]

logger = logging.getLogger(__name__)

REPORT_SCHEMA = 1

EXIT_HOLDS = 0
EXIT_VIOLATED = 1
EXIT_INPUT = 2


class InputError(AglensError):
    """Raised on unusable command line input."""


@dataclass
class RunReport:
    """What a run read, decided and how long it took.

    Two runs on identical inputs and flags give identical reports, up to
    ``timings``.
    """

    command: str
    flags: dict[str, Any] = field(default_factory=dict)
    inputs: list[dict[str, str]] = field(default_factory=list)
    verdicts: list[dict[str, Any]] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    version: str = __version__
    schema: int = REPORT_SCHEMA

    def add_input(self, path: Path, data: bytes) -> None:
        digest = hashlib.sha256(data).hexdigest()
        self.inputs.append({"path": str(path), "sha256": digest})

    def add_verdict(self, name: str, verdict: Verdict) -> None:
        self.verdicts.append({"name": name, **verdict.to_json()})

    def to_json(self) -> str:
        payload = {
            "schema": self.schema,
            "command": self.command,
            "flags": jsonable(self.flags),
            "inputs": self.inputs,
            "verdicts": self.verdicts,
            "timings": self.timings,
            "version": self.version,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


# Helpers


def _load(report: RunReport, path: Path, *kinds: str) -> Document:
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise InputError(f"Cannot read {path}: {exc.strerror}") from None
    report.add_input(path, data)
    document = parse_document(data.decode("utf-8"), str(path))
    if kinds and document.kind not in kinds:
        raise InputError(
            f"{path}: expected a {' or '.join(kinds)} document, got {document.kind!r}"
        )
    return document


def _write(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        try:
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise InputError(f"Cannot write {path}: {exc.strerror}") from None


def _emit(report: RunReport, name: str, verdict: Verdict) -> int:
    report.add_verdict(name, verdict)
    sys.stdout.write(json.dumps(verdict.to_json(), sort_keys=True, indent=2) + "\n")
    logger.info("%s: %s", name, "holds" if verdict else f"violated ({verdict.failed})")
    return EXIT_HOLDS if verdict else EXIT_VIOLATED


def _vector(text: str) -> list[float]:
    try:
        return [float(v) for v in re.split(r"[\s,]+", text.strip()) if v]
    except ValueError:
        raise InputError(f"Malformed vector {text!r}") from None


def _signal(text: str | None) -> InputSignal | None:
    """``start:v1,v2 start:v1,v2 ...`` segments of a piecewise constant input."""
    if text is None:
        return None
    segments = []
    for item in text.split():
        start, colon, value = item.partition(":")
        if not colon:
            raise InputError(
                f"Malformed input segment {item!r}, expected 'start:values'"
            )
        try:
            begin = float(start)
        except ValueError:
            raise InputError(f"Malformed segment start {start!r}") from None
        segments.append((begin, tuple(_vector(value))))
    return InputSignal(tuple(segments))


# Commands


def cmd_check_lens(args: argparse.Namespace, report: RunReport) -> int:
    lens_doc = _load(report, args.lens, "wiring", "quant-cert")
    report.flags.update(tol=args.tol)
    if lens_doc.kind == "quant-cert":
        if not isinstance(lens_doc.body, CertifiedQuantLens):
            raise InputError(f"{args.lens}: expected a qlens certificate")
        return _emit(report, "quant-lens", lens_doc.body.certify(args.tol, args.jobs))
    if args.cert is None:
        raise InputError("A boolean lens check needs a certificate file")
    spec = _load(report, args.cert, "bool-cert").body
    lens = wiring_lens(lens_doc)
    inner = bind_interface_certificate(spec.part("inner"), lens.src)
    outer = bind_interface_certificate(spec.part("outer"), lens.dst)
    return _emit(report, "lens", certify_lens(lens, inner, outer, args.jobs))


def cmd_check_machine(args: argparse.Namespace, report: RunReport) -> int:
    machine = _load(report, args.machine, "machine").body
    spec = _load(report, args.cert, "bool-cert").body
    cert = bind_machine_certificate(spec, machine)
    return _emit(report, "machine", certify_machine(machine, cert, args.jobs))


def cmd_compose(args: argparse.Namespace, report: RunReport) -> int:
    wiring = _load(report, args.wiring, "wiring")
    lens = wiring_lens(wiring)
    machines = [_load(report, path, "machine").body for path in args.machines]
    if not args.certs:
        composed = couple(machines, lens)
        _write(print_document(Document("machine", wiring.name, composed)), args.output)
        return EXIT_HOLDS
    if len(args.certs) != len(machines):
        raise InputError(
            f"Expected {len(machines)} certificate files, got {len(args.certs)}"
        )
    if args.wiring_cert is None:
        raise InputError("Composing certificates needs --wiring-cert")
    certified = [
        bind_machine_certificate(_load(report, path, "bool-cert").body, machine)
        for path, machine in zip(args.certs, machines)
    ]
    wspec: CertSpec = _load(report, args.wiring_cert, "bool-cert").body
    if any(prefix == "inner" for prefix, _ in wspec.parts):
        inner = bind_interface_certificate(wspec.part("inner"), lens.src)
    else:
        inner = parallel_certificate(*(c.icert for c in certified))
    outer = bind_interface_certificate(wspec.part("outer"), lens.dst)
    try:
        result = comp_rule(lens, (inner, outer), certified, args.jobs)
    except PremiseError as exc:
        return _premise(report, exc)
    report.add_verdict("comp", Verdict.success())
    machine_doc = Document("machine", wiring.name, result.machine)
    _write(print_document(machine_doc), args.output)
    part = certificate_part(result.icert, result.phi)
    cert_doc = Document("bool-cert", wiring.name, CertSpec((("", part),)))
    _write(print_document(cert_doc), args.cert_output)
    return EXIT_HOLDS


def cmd_subst(args: argparse.Namespace, report: RunReport) -> int:
    sim_doc = _load(report, args.simulation, "simulation")
    spec = sim_doc.body
    base = args.simulation.parent
    src = _load(report, base / spec.source, "machine").body
    dst = _load(report, base / spec.target, "machine").body
    sim = bind_simulation(spec, src, dst)
    target = bind_machine_certificate(_load(report, args.cert, "bool-cert").body, dst)
    try:
        result = subst_rule(sim, target, args.jobs)
    except PremiseError as exc:
        return _premise(report, exc)
    report.add_verdict("subst", Verdict.success())
    part = certificate_part(result.icert, result.phi)
    cert_doc = Document("bool-cert", sim_doc.name, CertSpec((("", part),)))
    _write(print_document(cert_doc), args.output)
    return EXIT_HOLDS


def _premise(report: RunReport, exc: PremiseError) -> int:
    verdict = exc.verdict
    if verdict is None:
        verdict = Verdict.failure(None, exc.premise)
    report.add_verdict(exc.rule.lower(), verdict)
    sys.stderr.write(f"{exc}\n")
    return EXIT_VIOLATED


def _ode_and_candidate(
    args: argparse.Namespace, report: RunReport
) -> tuple[OpenODE, LyapunovCandidate]:
    ode = _load(report, args.ode, "ode").body
    cand = _load(report, args.candidate, "quant-cert").body
    if not isinstance(cand, LyapunovCandidate):
        raise InputError(f"{args.candidate}: expected a candidate certificate")
    return ode, cand


def cmd_check_liss(args: argparse.Namespace, report: RunReport) -> int:
    ode, cand = _ode_and_candidate(args, report)
    report.flags.update(grid=args.grid, tol=args.tol, falsify=args.falsify)
    verdict = certify_liss(ode, cand, args.grid, args.tol, args.jobs)
    if args.falsify is not None and verdict:
        found = falsify(ode, cand, args.falsify, tol=args.tol, verdict=verdict)
        if found is not None:
            details = dict(verdict.details)
            details["falsification_evaluations"] = found.evaluations
            verdict = Verdict.failure(
                None,
                found.condition,
                worst_margin=found.margin,
                witness_point=found.point,
                grid=verdict.grid,
                tolerances=verdict.tolerances,
                gradient_check=verdict.gradient_check,
                details=details,
            )
    return _emit(report, "liss", verdict)


def cmd_kapprox(args: argparse.Namespace, report: RunReport) -> int:
    ode = _load(report, args.ode, "ode").body
    report.flags.update(phi=args.phi, radial_steps=args.radial_steps)
    phi = parse_expr(args.phi, "<--phi>")
    approx = k_approx(phi, ode.domain, ode.x0, args.radial_steps, jobs=args.jobs)
    classes = approx.classes()
    report.verdicts.append({"name": "kapprox", "holds": True, "classes": classes})
    text = f"upper: {print_pl(approx.upper)}\nlower: {print_pl(approx.lower)}\n"
    _write(text, args.output)
    return EXIT_HOLDS


def cmd_simulate(args: argparse.Namespace, report: RunReport) -> int:
    ode = _load(report, args.ode, "ode").body
    report.flags.update(x0=args.x0, input=args.input, tend=args.tend, h=args.h)
    signal = _signal(args.input)
    starts = [_vector(x) for x in args.x0] or [list(ode.x0)]
    trajectories = [simulate(ode, x, signal, args.tend, args.h) for x in starts]
    _write(_trajectories_csv(trajectories), args.output)
    if args.check_bound is None:
        return EXIT_HOLDS
    k1, k2, k3 = (parse_pl(text) for text in args.check_bound)
    report.flags.update(check_bound=[print_pl(k) for k in (k1, k2, k3)])
    verdict = check_iss_bound(trajectories, k1, k2, k3, ISS_TOL)
    report.add_verdict("iss-bound", verdict)
    logger.info("iss bound: %s", "holds" if verdict else "violated")
    if not verdict:
        sys.stderr.write(json.dumps(verdict.to_json(), sort_keys=True) + "\n")
    return EXIT_HOLDS if verdict else EXIT_VIOLATED


def _trajectories_csv(trajectories: Sequence[Any]) -> str:
    if len(trajectories) == 1:
        return str(trajectories[0].to_csv())
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    for run, traj in enumerate(trajectories):
        rows = list(csv.reader(io.StringIO(traj.to_csv())))
        if run == 0:
            writer.writerow(["run"] + rows[0])
        writer.writerows([str(run)] + row for row in rows[1:])
    return buffer.getvalue()


COMMANDS: dict[str, Callable[[argparse.Namespace, RunReport], int]] = {
    "check-lens": cmd_check_lens,
    "check-machine": cmd_check_machine,
    "compose": cmd_compose,
    "subst": cmd_subst,
    "check-liss": cmd_check_liss,
    "kapprox": cmd_kapprox,
    "simulate": cmd_simulate,
}


# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aglens", description="Compositional assume-guarantee verification."
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    parser.add_argument(
        "--jobs",
        type=int,
        default=None,
        help=f"worker threads (default: ${JOBS_ENV} or 1)",
    )
    parser.add_argument("--report", type=Path, help="write a JSON run report")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("check-lens", help="check a certified lens")
    sub.add_argument("lens", type=Path)
    sub.add_argument("cert", type=Path, nargs="?")
    sub.add_argument("--tol", type=float, default=TOL)

    sub = commands.add_parser("check-machine", help="check a machine certificate")
    sub.add_argument("machine", type=Path)
    sub.add_argument("cert", type=Path)

    sub = commands.add_parser("compose", help="couple machines through a wiring")
    sub.add_argument("wiring", type=Path)
    sub.add_argument("machines", type=Path, nargs="+")
    sub.add_argument("--certs", type=Path, nargs="+", default=[])
    sub.add_argument("--wiring-cert", type=Path)
    sub.add_argument("-o", "--output", type=Path)
    sub.add_argument("--cert-output", type=Path)

    sub = commands.add_parser(
        "subst", help="pull a certificate back along a simulation"
    )
    sub.add_argument("simulation", type=Path)
    sub.add_argument("cert", type=Path)
    sub.add_argument("-o", "--output", type=Path)

    sub = commands.add_parser("check-liss", help="check a LISS Lyapunov certificate")
    sub.add_argument("ode", type=Path)
    sub.add_argument("candidate", type=Path)
    sub.add_argument("--grid", type=float, default=DEFAULT_GRID_STEP)
    sub.add_argument("--tol", type=float, default=TOL)
    sub.add_argument("--falsify", type=int, metavar="BUDGET")

    sub = commands.add_parser("kapprox", help="sandwich a storage function")
    sub.add_argument("ode", type=Path)
    sub.add_argument("--phi", required=True)
    sub.add_argument("--radial-steps", type=int, default=200)
    sub.add_argument("-o", "--output", type=Path)

    sub = commands.add_parser("simulate", help="integrate trajectories")
    sub.add_argument("ode", type=Path)
    sub.add_argument("--x0", action="append", default=[])
    sub.add_argument("--input", help="segments 'start:v1,v2 ...'")
    sub.add_argument("--tend", type=float, default=1.0)
    sub.add_argument("--h", type=float, default=0.01)
    sub.add_argument("--check-bound", nargs=3, metavar=("K1", "K2", "K3"))
    sub.add_argument("-o", "--output", type=Path)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(
        stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s"
    )
    report = RunReport(args.command)
    start = time.perf_counter()
    try:
        args.jobs = resolve_jobs(args.jobs)
        report.flags["jobs"] = args.jobs
        code = COMMANDS[args.command](args, report)
    except SoundnessError as exc:
        logger.error("%s", exc)
        report.add_verdict(exc.rule.lower(), exc.verdict)
        code = EXIT_VIOLATED
    except (ParseError, AglensError, ValueError, TypeError) as exc:
        sys.stderr.write(f"aglens: {exc}\n")
        code = EXIT_INPUT
    report.timings["total_s"] = round(time.perf_counter() - start, 6)
    if args.report is not None:
        try:
            args.report.write_text(report.to_json(), encoding="utf-8")
        except OSError as exc:
            sys.stderr.write(f"aglens: Cannot write {args.report}: {exc.strerror}\n")
            code = EXIT_INPUT
    return code


if __name__ == "__main__":
    raise SystemExit(main())
