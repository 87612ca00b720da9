"""Quantitative certificates on real interfaces.

A quantitative lens between ``R^p``-observation and ``R^q``-observation
interfaces is given by expressions: ``fwd`` over ``o1..op`` and ``bwd``
over ``o1..op`` and the target actions ``a1..am``. A certificate is a
pair of expressions ``(gamma, alpha)``, and a lens is certified with slack
``kappa`` when, at every sample of a plan::

    alpha2(w(o), a) + kappa(gamma1(o)) >= alpha1(o, w#(o, a))
    gamma1(o) >= gamma2(w(o))

Composing certified lenses adds their slacks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..core import AglensError, InterfaceMismatch
from ..expr import (
    Const,
    Expr,
    Var,
    eval_array,
    free_variables,
    input_vars,
    obs_vars,
    rename,
    substitute,
)
from ..grid import TOL, TOL_DEF, SamplePlan, grid_verdict, slice_env
from ..sweep import map_chunks
from ..verdict import Verdict
from .boolean import PremiseError
from .plfun import ComparisonClass, PLFun, pl_add, require_class

__all__ = [
    "TIE_EPS",
    "CertificationError",
    "LexPair",
    "lex_leq",
    "lex_geq",
    "QuantLens",
    "QuantCertificate",
    "CertifiedQuantLens",
    "compose_quant_lens",
    "identity_quant_lens",
    "certify_quant_lens",
    "check_quant_certificate",
    "compose_quant_cert",
    "identity_certified_lens",
    "sum_bundle_predicates",
    "zero_certificate",
    "sequential_lens",
    "sequential_certificate",
]

logger = logging.getLogger(__name__)

TIE_EPS = 1e-9


class CertificationError(AglensError):
    """Raised when a composite fails re-verification on its grid."""

    def __init__(self, message: str, verdict: Verdict) -> None:
        self.verdict = verdict
        super().__init__(f"{message} (worst margin {verdict.worst_margin})")


# Lexicographic order


@dataclass(frozen=True)
class LexPair:
    """A value together with an infinitesimal displacement."""

    base: float
    tangent: float

    def __ge__(self, other: LexPair) -> bool:
        return lex_geq(self, other)

    def __le__(self, other: LexPair) -> bool:
        return lex_geq(other, self)


def lex_geq(p: LexPair, q: LexPair, eps: float = TIE_EPS) -> bool:
    """Whether ``p`` dominates ``q``: ``p.base > q.base``, or a tie on the
    base (within ``eps``) and ``p.tangent >= q.tangent``."""
    if abs(p.base - q.base) <= eps:
        return p.tangent >= q.tangent
    return p.base > q.base


def lex_leq(p: LexPair, q: LexPair, eps: float = TIE_EPS) -> bool:
    """Decide ``(a, a') >= (b, b')`` for ``p = (a, a')`` and ``q = (b, b')``.

    The name follows the reading "q lies below p"; the base component
    dominates and the tangents only break ties.
    """
    return lex_geq(p, q, eps)


# Lenses and certificates


def _check_scope(exprs: Sequence[Expr], allowed: set[str], what: str) -> None:
    for expr in exprs:
        extra = free_variables(expr) - allowed
        if extra:
            raise InterfaceMismatch(
                f"{what} uses undeclared variable(s) {', '.join(sorted(extra))}"
            )


@dataclass(frozen=True)
class QuantLens:
    """An expression lens between real interfaces.

    ``src_dims`` and ``dst_dims`` are ``(observation, action)`` dimensions.
    """

    src_dims: tuple[int, int]
    dst_dims: tuple[int, int]
    fwd: tuple[Expr, ...]
    bwd: tuple[Expr, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "src_dims", tuple(self.src_dims))
        object.__setattr__(self, "dst_dims", tuple(self.dst_dims))
        object.__setattr__(self, "fwd", tuple(self.fwd))
        object.__setattr__(self, "bwd", tuple(self.bwd))
        p, n = self.src_dims
        q, m = self.dst_dims
        if len(self.fwd) != q:
            raise InterfaceMismatch(
                f"forward map has {len(self.fwd)} components, expected {q}"
            )
        if len(self.bwd) != n:
            raise InterfaceMismatch(
                f"backward map has {len(self.bwd)} components, expected {n}"
            )
        _check_scope(self.fwd, set(obs_vars(p)), "forward map")
        _check_scope(self.bwd, set(obs_vars(p)) | set(input_vars(m)), "backward map")


def identity_quant_lens(obs_dim: int, act_dim: int) -> QuantLens:
    return QuantLens(
        (obs_dim, act_dim),
        (obs_dim, act_dim),
        tuple(Var(o) for o in obs_vars(obs_dim)),
        tuple(Var(a) for a in input_vars(act_dim)),
    )


def compose_quant_lens(t: QuantLens, w: QuantLens) -> QuantLens:
    """Compose ``w`` then ``t`` by substitution."""
    if w.dst_dims != t.src_dims:
        raise InterfaceMismatch(f"dimensions {w.dst_dims} != {t.src_dims}")
    through_w = dict(zip(obs_vars(t.src_dims[0]), w.fwd))
    fwd = tuple(substitute(e, through_w) for e in t.fwd)
    inner = tuple(substitute(e, through_w) for e in t.bwd)
    through_t = dict(zip(input_vars(w.dst_dims[1]), inner))
    bwd = tuple(substitute(e, through_t) for e in w.bwd)
    return QuantLens(w.src_dims, t.dst_dims, fwd, bwd)


@dataclass(frozen=True)
class QuantCertificate:
    """A guarantee over ``o1..ok`` and an assumption over ``o1..ok, a1..am``."""

    obs_dim: int
    act_dim: int
    gamma: Expr
    alpha: Expr

    def __post_init__(self) -> None:
        _check_scope([self.gamma], set(obs_vars(self.obs_dim)), "guarantee")
        _check_scope(
            [self.alpha],
            set(obs_vars(self.obs_dim)) | set(input_vars(self.act_dim)),
            "assumption",
        )

    @property
    def dims(self) -> tuple[int, int]:
        return (self.obs_dim, self.act_dim)


def zero_certificate(obs_dim: int, act_dim: int) -> QuantCertificate:
    return QuantCertificate(obs_dim, act_dim, Const(0.0), Const(0.0))


def sum_bundle_predicates(
    c1: QuantCertificate, c2: QuantCertificate
) -> QuantCertificate:
    """Componentwise sum on the product space.

    The variables of ``c2`` are shifted after those of ``c1``.
    """
    shift = {o: f"o{c1.obs_dim + i}" for i, o in enumerate(obs_vars(c2.obs_dim), 1)}
    shift.update(
        {a: f"a{c1.act_dim + i}" for i, a in enumerate(input_vars(c2.act_dim), 1)}
    )
    return QuantCertificate(
        c1.obs_dim + c2.obs_dim,
        c1.act_dim + c2.act_dim,
        c1.gamma + rename(c2.gamma, shift),
        c1.alpha + rename(c2.alpha, shift),
    )


@dataclass(frozen=True)
class CertifiedQuantLens:
    """A quantitative lens with its certificates, slack and sample plan.

    The plan samples the source observations ``o1..op`` and the target
    actions ``a1..am``.
    """

    lens: QuantLens
    src_cert: QuantCertificate
    dst_cert: QuantCertificate
    slack: PLFun
    plan: SamplePlan

    def certify(self, tol: float = TOL, jobs: int | None = None) -> Verdict:
        return certify_quant_lens(
            self.lens, self.src_cert, self.dst_cert, self.slack, self.plan, tol, jobs
        )


def _lens_margins(
    lens: QuantLens,
    c1: QuantCertificate,
    c2: QuantCertificate,
    kappa: PLFun,
    env: Mapping[str, np.ndarray],
    size: int,
) -> tuple[np.ndarray, np.ndarray]:
    p, _ = lens.src_dims
    q, m = lens.dst_dims
    w = [eval_array(e, env, size) for e in lens.fwd]
    wsharp = [eval_array(e, env, size) for e in lens.bwd]
    gamma1 = eval_array(c1.gamma, env, size)
    outer_env = dict(zip(obs_vars(q), w))
    outer_env.update({a: env[a] for a in input_vars(m)})
    inner_env = {o: env[o] for o in obs_vars(p)}
    inner_env.update(zip(input_vars(len(wsharp)), wsharp))
    alpha2 = eval_array(c2.alpha, outer_env, size)
    alpha1 = eval_array(c1.alpha, inner_env, size)
    gamma2 = eval_array(c2.gamma, outer_env, size)
    slack = kappa.evaluate(np.maximum(gamma1, 0.0))
    return alpha2 + slack - alpha1, gamma1 - gamma2


def certify_quant_lens(
    lens: QuantLens,
    c1: QuantCertificate,
    c2: QuantCertificate,
    kappa: PLFun,
    plan: SamplePlan,
    tol: float = TOL,
    jobs: int | None = None,
) -> Verdict:
    """Check both certification inequalities at every sample of ``plan``.

    The failing verdict reports the worst sample, ties going to the
    lowest sample index.
    """
    require_class(kappa, ComparisonClass.KINF0, "The slack")
    if c1.dims != lens.src_dims:
        raise InterfaceMismatch(
            f"source certificate dimensions {c1.dims} != {lens.src_dims}"
        )
    if c2.dims != lens.dst_dims:
        raise InterfaceMismatch(
            f"target certificate dimensions {c2.dims} != {lens.dst_dims}"
        )
    needed = set(obs_vars(lens.src_dims[0])) | set(input_vars(lens.dst_dims[1]))
    missing = needed - set(plan.names)
    if missing:
        raise ValueError(f"The sample plan misses {', '.join(sorted(missing))}")
    points = plan.points()
    size = plan.size

    def margins(part: slice) -> tuple[np.ndarray, np.ndarray]:
        env = slice_env(points, part)
        return _lens_margins(lens, c1, c2, kappa, env, part.stop - part.start)

    chunks = map_chunks(margins, size, jobs)
    assumption = np.concatenate([c[0] for c in chunks])
    guarantee = np.concatenate([c[1] for c in chunks])
    return grid_verdict(
        {"assumption": assumption, "guarantee": guarantee},
        plan,
        {"tol": tol},
        tol,
    )


def check_quant_certificate(
    cert: QuantCertificate,
    plan: SamplePlan,
    tol: float = TOL,
    tol_def: float = TOL_DEF,
) -> Verdict:
    """Check the base point values and the definiteness of the guarantee.

    ``gamma`` and ``alpha`` must vanish at the origin, and ``gamma`` must
    exceed ``tol_def`` on every sample away from it.
    """
    origin = {v: 0.0 for v in obs_vars(cert.obs_dim) + input_vars(cert.act_dim)}
    for name, expr in (("guarantee", cert.gamma), ("assumption", cert.alpha)):
        value = float(eval_array(expr, {k: np.zeros(1) for k in origin}, 1)[0])
        if abs(value) > tol:
            return Verdict.failure(
                None,
                f"{name} base point",
                worst_margin=-abs(value),
                witness_point=origin,
            )
    obs_plan = plan.restrict(obs_vars(cert.obs_dim))
    points = obs_plan.points()
    size = obs_plan.size
    gamma = eval_array(cert.gamma, points, size)
    radius = np.zeros(size)
    for values in points.values():
        radius = np.maximum(radius, np.abs(values))
    away = radius > 0
    margin = np.where(away, gamma - tol_def, np.inf)
    tolerances = {"tol": tol, "tol_def": tol_def}
    if size and np.min(margin) < 0:
        index = int(np.argmin(margin))
        return Verdict.failure(
            None,
            "definiteness",
            worst_margin=float(margin[index]),
            witness_point=obs_plan.point(index),
            grid=obs_plan.describe(),
            tolerances=tolerances,
        )
    return Verdict.success(grid=obs_plan.describe(), tolerances=tolerances)


def _same_certificate(c1: QuantCertificate, c2: QuantCertificate) -> bool:
    return c1.dims == c2.dims and c1.gamma == c2.gamma and c1.alpha == c2.alpha


def compose_quant_cert(
    outer: CertifiedQuantLens,
    inner: CertifiedQuantLens,
    tol: float = TOL,
    jobs: int | None = None,
) -> CertifiedQuantLens:
    """Compose ``inner`` then ``outer``, adding their slacks.

    Both premises are checked on their own plans. The composite is
    checked on the plan sampling the inner source observations and the
    outer target actions.
    """
    if not _same_certificate(inner.dst_cert, outer.src_cert):
        raise InterfaceMismatch("the inner target and outer source certificates differ")
    for name, certified in (("inner", inner), ("outer", outer)):
        verdict = certified.certify(tol, jobs)
        if not verdict:
            raise PremiseError("compose", f"the {name} lens is not certified", verdict)
    lens = compose_quant_lens(outer.lens, inner.lens)
    plan = inner.plan.restrict(obs_vars(lens.src_dims[0])) + outer.plan.restrict(
        input_vars(lens.dst_dims[1])
    )
    result = CertifiedQuantLens(
        lens, inner.src_cert, outer.dst_cert, pl_add(inner.slack, outer.slack), plan
    )
    verdict = result.certify(tol, jobs)
    if not verdict:
        raise CertificationError("The composite lens failed re-verification", verdict)
    logger.debug("Composed certified lenses, slack %s", result.slack)
    return result


def identity_certified_lens(
    cert: QuantCertificate, plan: SamplePlan
) -> CertifiedQuantLens:
    return CertifiedQuantLens(
        identity_quant_lens(*cert.dims), cert, cert, PLFun.zero(), plan
    )


# Sequential composition


def sequential_lens(m_dim: int = 1, o_dim: int = 1, a_dim: int = 1) -> QuantLens:
    """Wire a first system's output ``m`` into a second system's input.

    The source observations are ``(m, o)`` and the source actions
    ``(a, m)``: the outer action goes to the first system and ``m`` is
    fed to the second. The outer box observes ``o`` and acts with ``a``.
    """
    fwd = tuple(Var(f"o{m_dim + i}") for i in range(1, o_dim + 1))
    bwd = tuple(Var(a) for a in input_vars(a_dim)) + tuple(
        Var(o) for o in obs_vars(m_dim)
    )
    return QuantLens((m_dim + o_dim, a_dim + m_dim), (o_dim, a_dim), fwd, bwd)


def sequential_certificate(
    gamma1: Expr,
    alpha1: Expr,
    gamma2: Expr,
    alpha2: Expr,
    kappa: PLFun,
    plan: SamplePlan,
    m_dim: int = 1,
    o_dim: int = 1,
    a_dim: int = 1,
) -> CertifiedQuantLens:
    """Certify the sequential lens from the two systems' certificates.

    ``gamma1`` is over the first system's outputs ``o1..`` (the signal
    ``m``), ``alpha1`` over its inputs ``a1..``, ``gamma2`` over the second
    system's outputs and ``alpha2`` over its inputs (again ``m``). The
    composite certificate is ``(gamma1(m) + gamma2(o), alpha1(a) +
    alpha2(m))`` and the outer one ``(gamma2(o), alpha1(a))``.

    The slack must dominate the second system's assumption fed by the
    first system's guarantee, ``kappa(gamma1(m)) >= alpha2(m)``; the
    returned bundle is not checked, call `CertifiedQuantLens.certify`.
    """
    lens = sequential_lens(m_dim, o_dim, a_dim)
    shift_o = {o: f"o{m_dim + i}" for i, o in enumerate(obs_vars(o_dim), 1)}
    shift_m = {a: f"a{a_dim + i}" for i, a in enumerate(input_vars(m_dim), 1)}
    src = QuantCertificate(
        m_dim + o_dim,
        a_dim + m_dim,
        gamma1 + rename(gamma2, shift_o),
        alpha1 + rename(alpha2, shift_m),
    )
    dst = QuantCertificate(o_dim, a_dim, gamma2, alpha1)
    return CertifiedQuantLens(lens, src, dst, kappa, plan)
