"""Open ODEs and their LISS Lyapunov certificates.

An open ODE ``dx/dt = f(x, a)`` with observation ``o = v(x)`` lives on a box
of states and a box of inputs, and rests at an equilibrium ``(x0, a0)``.
A Lyapunov candidate ``(phi, alpha, gamma, lam)`` certifies it when, at
every sample of the state and input grid::

    alpha(a) >= grad phi(x) . f(x, a) + (id - lam)(phi(x))
    phi(x)   >= gamma(v(x))

The module also approximates storage functions by comparison functions,
integrates trajectories with the classical Runge-Kutta scheme and checks
the ISS bound on them.

Example::

    ode = OpenODE(
        field=[-Var("x1") + Var("a1")],
        view=[Var("x1") / 2],
        domain=Box.cube(1, 2.0),
        input_domain=Box.cube(1, 1.0),
    )
    cand = LyapunovCandidate(Var("x1")**2, Var("a1")**2, Var("o1")**2)
    assert certify_liss(ode, cand)
"""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .cert.plfun import (
    ComparisonClass,
    PLFun,
    classify,
    id_minus_in_kinf,
    require_class,
)
from .core import AglensError, WellFormednessError
from .expr import (
    Const,
    Expr,
    as_expr,
    eval_array,
    evaluate,
    free_variables,
    grad_expr,
    input_vars,
    obs_vars,
    rename,
    state_vars,
)
from .grid import (
    DEFAULT_GRID_STEP,
    TOL,
    TOL_DEF,
    Box,
    SamplePlan,
    grid_verdict,
    slice_env,
)
from .sweep import map_chunks
from .verdict import Verdict

__all__ = [
    "GRADIENT_RTOL",
    "FD_STEP",
    "ISS_TOL",
    "EQUILIBRIUM_TOL",
    "CandidateError",
    "GradientMismatch",
    "SimulationError",
    "StorageError",
    "OpenODE",
    "LyapunovCandidate",
    "parallel_odes",
    "check_storage",
    "check_gradient",
    "certify_liss",
    "KApproximation",
    "k_approx",
    "InputSignal",
    "Trajectory",
    "simulate",
    "check_iss_bound",
    "lyapunov_decrease_bound",
    "Falsification",
    "falsify",
]

logger = logging.getLogger(__name__)

GRADIENT_RTOL = 1e-4
FD_STEP = 1e-5
ISS_TOL = 1e-5
EQUILIBRIUM_TOL = 1e-9

GROWTH_SCALES = (1.0, 2.0, 4.0, 8.0, 16.0)


# Exceptions


class CandidateError(AglensError, ValueError):
    """Raised when a Lyapunov candidate does not fit its system."""


class GradientMismatch(AglensError):
    """Raised when the symbolic gradient disagrees with finite differences."""

    def __init__(self, error: float, point: Mapping[str, float]) -> None:
        self.error = error
        self.point = dict(point)
        where = ", ".join(f"{k}={v:g}" for k, v in self.point.items())
        super().__init__(
            f"Symbolic and finite-difference gradients differ by {error:.3g} at {where}"
        )


class SimulationError(AglensError):
    """Raised when an integration step produces a non-finite state."""

    def __init__(self, step: int) -> None:
        self.step = step
        super().__init__(f"Non-finite state at step {step}")


class StorageError(AglensError):
    """Raised when a function is not a storage function on its domain."""

    def __init__(self, verdict: Verdict) -> None:
        self.verdict = verdict
        super().__init__(
            f"Not a storage function: {verdict.failed} fails at {verdict.witness_point}"
        )


# Systems


def _scope(exprs: Iterable[Expr], allowed: Iterable[str], what: str) -> None:
    allowed = set(allowed)
    for expr in exprs:
        extra = free_variables(expr) - allowed
        if extra:
            raise WellFormednessError(
                f"{what} uses undeclared variable(s) {', '.join(sorted(extra))}"
            )


def _point(value: Sequence[float] | None, dim: int, what: str) -> tuple[float, ...]:
    if value is None:
        return (0.0,) * dim
    point = tuple(float(v) for v in value)
    if len(point) != dim:
        raise WellFormednessError(
            f"{what} has {len(point)} coordinates, expected {dim}"
        )
    return point


@dataclass(frozen=True)
class OpenODE:
    """``dx/dt = field(x, a)`` observed through ``view(x)``.

    ``field`` has one expression per state over ``x1..xn, a1..am`` and
    ``view`` one expression per observation over ``x1..xn``. The state
    and input spaces are the boxes ``domain`` and ``input_domain``.
    ``(x0, a0)`` defaults to the origin and must be an equilibrium.
    """

    field: tuple[Expr, ...]
    view: tuple[Expr, ...]
    domain: Box
    input_domain: Box = Box(())
    x0: tuple[float, ...] | None = None
    a0: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "field", tuple(as_expr(e) for e in self.field))
        object.__setattr__(self, "view", tuple(as_expr(e) for e in self.view))
        n, m = self.domain.dim, self.input_domain.dim
        if len(self.field) != n:
            raise WellFormednessError(
                f"The vector field has {len(self.field)} components for {n} states"
            )
        _scope(self.field, state_vars(n) + input_vars(m), "The vector field")
        _scope(self.view, state_vars(n), "The view")
        object.__setattr__(self, "x0", _point(self.x0, n, "The equilibrium state"))
        object.__setattr__(self, "a0", _point(self.a0, m, "The equilibrium input"))
        if not self.domain.contains(self.x0):
            raise WellFormednessError(f"The domain does not contain x0 = {self.x0}")
        if not self.input_domain.contains(self.a0):
            raise WellFormednessError(
                f"The input domain does not contain a0 = {self.a0}"
            )
        rest = self.vector_field(self.x0, self.a0)
        if not np.all(np.abs(rest) <= EQUILIBRIUM_TOL):
            raise WellFormednessError(
                f"(x0, a0) is not an equilibrium, the field is {rest.tolist()} there"
            )

    @property
    def state_dim(self) -> int:
        return self.domain.dim

    @property
    def input_dim(self) -> int:
        return self.input_domain.dim

    @property
    def obs_dim(self) -> int:
        return len(self.view)

    def env(self, x: Sequence[float], a: Sequence[float] = ()) -> dict[str, float]:
        env = dict(zip(state_vars(self.state_dim), map(float, x)))
        env.update(zip(input_vars(self.input_dim), map(float, a)))
        return env

    def vector_field(self, x: Sequence[float], a: Sequence[float] = ()) -> np.ndarray:
        env = self.env(x, a)
        with np.errstate(over="ignore", invalid="ignore"):
            return np.array([float(evaluate(e, env)) for e in self.field])

    def observe(self, x: Sequence[float]) -> np.ndarray:
        env = self.env(x)
        return np.array([float(evaluate(e, env)) for e in self.view])

    def state_plan(self, step: float = DEFAULT_GRID_STEP) -> SamplePlan:
        return SamplePlan.over(self.domain, state_vars(self.state_dim), step, self.x0)

    def input_plan(self, step: float = DEFAULT_GRID_STEP) -> SamplePlan:
        return SamplePlan.over(
            self.input_domain, input_vars(self.input_dim), step, self.a0
        )


def parallel_odes(first: OpenODE, second: OpenODE) -> OpenODE:
    """Run two systems side by side, the second one's variables shifted."""
    n, m, k = first.state_dim, first.input_dim, first.obs_dim
    shift = {x: f"x{n + i}" for i, x in enumerate(state_vars(second.state_dim), 1)}
    inputs = enumerate(input_vars(second.input_dim), 1)
    shift.update({a: f"a{m + i}" for i, a in inputs})
    logger.debug(
        "Parallel product of %d+%d states, %d+%d observations",
        n,
        second.state_dim,
        k,
        second.obs_dim,
    )
    return OpenODE(
        field=first.field + tuple(rename(e, shift) for e in second.field),
        view=first.view + tuple(rename(e, shift) for e in second.view),
        domain=first.domain + second.domain,
        input_domain=first.input_domain + second.input_domain,
        x0=first.x0 + second.x0,
        a0=first.a0 + second.a0,
    )


# Candidates


@dataclass(frozen=True)
class LyapunovCandidate:
    """A storage function ``phi`` over states, an assumption ``alpha``
    over inputs only, a guarantee ``gamma`` over observations and a rate
    ``lam`` with ``id - lam`` of class Kinf."""

    phi: Expr
    alpha: Expr = Const(0.0)
    gamma: Expr = Const(0.0)
    lam: PLFun = field(default_factory=PLFun.zero)

    def __post_init__(self) -> None:
        for name in ("phi", "alpha", "gamma"):
            object.__setattr__(self, name, as_expr(getattr(self, name)))
        if any(v.startswith("x") for v in free_variables(self.alpha)):
            raise CandidateError("The assumption alpha depends on the state")
        if any(not v.startswith("x") for v in free_variables(self.phi)):
            raise CandidateError("The storage function phi may only use states")
        if any(not v.startswith("o") for v in free_variables(self.gamma)):
            raise CandidateError("The guarantee gamma may only use observations")
        if not id_minus_in_kinf(self.lam):
            raise CandidateError(
                f"id - lambda is not of class Kinf for lambda = {self.lam}"
            )


def _fit_candidate(ode: OpenODE, cand: LyapunovCandidate) -> None:
    checks = (
        (cand.phi, state_vars(ode.state_dim), "phi"),
        (cand.alpha, input_vars(ode.input_dim), "alpha"),
        (cand.gamma, obs_vars(ode.obs_dim), "gamma"),
    )
    for expr, allowed, name in checks:
        extra = free_variables(expr) - set(allowed)
        if extra:
            raise CandidateError(
                f"{name} uses {', '.join(sorted(extra))}, not a variable of the system"
            )


def _base_values(ode: OpenODE, cand: LyapunovCandidate) -> dict[str, float]:
    env = ode.env(ode.x0, ode.a0)
    obs = dict(zip(obs_vars(ode.obs_dim), ode.observe(ode.x0)))
    return {
        "phi": float(evaluate(cand.phi, env)),
        "alpha": float(evaluate(cand.alpha, env)),
        "gamma": float(evaluate(cand.gamma, obs)),
    }


# Storage functions


def check_storage(
    phi: Expr,
    domain: Box,
    x0: Sequence[float] | None = None,
    step: float = DEFAULT_GRID_STEP,
    tol: float = TOL,
    tol_def: float = TOL_DEF,
    r_excl: float | None = None,
    jobs: int | None = None,
) -> Verdict:
    """Check that ``phi`` vanishes at ``x0`` and is positive elsewhere.

    Samples closer to ``x0`` than ``r_excl`` (one grid step by default)
    are not checked for definiteness.
    """
    x0 = np.asarray(_point(x0, domain.dim, "The base point"))
    r_excl = step if r_excl is None else r_excl
    names = state_vars(domain.dim)
    tolerances = {"tol": tol, "tol_def": tol_def, "r_excl": r_excl}
    base = float(evaluate(phi, dict(zip(names, x0.tolist()))))
    if abs(base) > tol:
        return Verdict.failure(
            None,
            "base point",
            worst_margin=-abs(base),
            witness_point=dict(zip(names, x0.tolist())),
            tolerances=tolerances,
        )
    plan = SamplePlan.over(domain, names, step, x0.tolist())
    points = plan.points()

    def margins(part: slice) -> np.ndarray:
        env = slice_env(points, part)
        size = part.stop - part.start
        values = eval_array(phi, env, size)
        radius = np.sqrt(sum((env[x] - c) ** 2 for x, c in zip(names, x0)))
        return np.where(radius >= r_excl * (1 - 1e-9), values - tol_def, np.inf)

    definiteness = np.concatenate(map_chunks(margins, plan.size, jobs))
    # Strict positivity: a zero margin already fails.
    verdict = grid_verdict({"definiteness": definiteness}, plan, tolerances, 0.0)
    if verdict.holds and verdict.worst_margin is not None and verdict.worst_margin <= 0:
        return Verdict.failure(
            None,
            "definiteness",
            worst_margin=verdict.worst_margin,
            witness_point=verdict.witness_point,
            grid=verdict.grid,
            tolerances=tolerances,
        )
    return verdict


# LISS certificates


def check_gradient(
    phi: Expr,
    grad: Sequence[Expr],
    plan: SamplePlan,
    h: float = FD_STEP,
    rtol: float = GRADIENT_RTOL,
    jobs: int | None = None,
) -> dict[str, Any]:
    """Compare ``grad`` with central differences of ``phi`` on ``plan``.

    Raises `GradientMismatch` when the relative error exceeds ``rtol``
    anywhere, and returns the statistics of the comparison otherwise.
    """
    points = plan.points()

    def errors(part: slice) -> np.ndarray:
        env = slice_env(points, part)
        size = part.stop - part.start
        worst = np.zeros(size)
        for name, g in zip(plan.names, grad):
            symbolic = eval_array(g, env, size)
            up = {**env, name: env[name] + h}
            down = {**env, name: env[name] - h}
            difference = eval_array(phi, up, size) - eval_array(phi, down, size)
            numeric = difference / (2 * h)
            error = np.abs(symbolic - numeric) / np.maximum(1.0, np.abs(symbolic))
            worst = np.maximum(worst, np.where(np.isnan(error), np.inf, error))
        return worst

    relative = np.concatenate(map_chunks(errors, plan.size, jobs))
    index = int(np.argmax(relative))
    stats = {
        "max_rel_error": float(relative[index]),
        "samples": plan.size,
        "fd_step": h,
        "rtol": rtol,
    }
    if relative[index] > rtol:
        raise GradientMismatch(float(relative[index]), plan.point(index))
    return stats


def _liss_margins(
    ode: OpenODE,
    cand: LyapunovCandidate,
    grad: Sequence[Expr],
    env: Mapping[str, np.ndarray],
    size: int,
) -> tuple[np.ndarray, np.ndarray]:
    phi = eval_array(cand.phi, env, size)
    lie = np.zeros(size)
    for g, f in zip(grad, ode.field):
        lie += eval_array(g, env, size) * eval_array(f, env, size)
    stored = np.maximum(phi, 0.0)
    decay = stored - cand.lam.evaluate(stored)
    alpha = eval_array(cand.alpha, env, size)
    obs = {o: eval_array(v, env, size) for o, v in zip(obs_vars(ode.obs_dim), ode.view)}
    gamma = eval_array(cand.gamma, obs, size)
    return alpha - lie - decay, phi - gamma


def _grows(values: Sequence[float]) -> bool:
    values = np.asarray(values, dtype=float)
    return bool(np.all(np.isfinite(values)) and np.all(np.diff(values) > 0))


def _global_capable(ode: OpenODE, cand: LyapunovCandidate) -> bool:
    """Sampled evidence that the certificate extends to the whole space.

    The guarantee must keep growing along every observation axis, and the
    view must keep growing along some state axis, over scaled boxes.
    """
    k = ode.obs_dim
    if k == 0:
        return False
    radius = max((hi - lo) / 2 for lo, hi in ode.domain.bounds) or 1.0
    zero = {o: 0.0 for o in obs_vars(k)}
    with np.errstate(all="ignore"):
        for j in range(k):
            for sign in (1.0, -1.0):
                name = f"o{j + 1}"
                along = [
                    float(evaluate(cand.gamma, {**zero, name: sign * s * radius}))
                    for s in GROWTH_SCALES
                ]
                if not _grows(along):
                    return False
        origin = ode.observe(ode.x0)
        for i in range(ode.state_dim):
            for sign in (1.0, -1.0):
                sizes = []
                for s in GROWTH_SCALES:
                    x = np.array(ode.x0)
                    x[i] += sign * s * radius
                    sizes.append(float(np.linalg.norm(ode.observe(x) - origin)))
                if _grows(sizes):
                    return True
    return False


def certify_liss(
    ode: OpenODE,
    cand: LyapunovCandidate,
    step: float = DEFAULT_GRID_STEP,
    tol: float = TOL,
    jobs: int | None = None,
) -> Verdict:
    """Check a LISS Lyapunov certificate on the state and input grid.

    The verdict names the failing condition, ``"decrease"`` or
    ``"guarantee"``, and reports the worst sample. The symbolic gradient
    of ``phi`` is cross-checked against finite differences first; a
    disagreement raises `GradientMismatch`.
    """
    _fit_candidate(ode, cand)
    tolerances = {"tol": tol, "gradient_rtol": GRADIENT_RTOL}
    base = _base_values(ode, cand)
    for name, value in base.items():
        if abs(value) > tol:
            logger.info("%s does not vanish at its base point (%g)", name, value)
            return Verdict.failure(
                None,
                "base point",
                worst_margin=-abs(value),
                witness_point=ode.env(ode.x0, ode.a0),
                tolerances=tolerances,
                details={"base_values": base},
            )
    grad = grad_expr(cand.phi, state_vars(ode.state_dim))
    gradient = check_gradient(cand.phi, grad, ode.state_plan(step), jobs=jobs)
    plan = ode.state_plan(step) + ode.input_plan(step)
    points = plan.points()

    def margins(part: slice) -> tuple[np.ndarray, np.ndarray]:
        env = slice_env(points, part)
        return _liss_margins(ode, cand, grad, env, part.stop - part.start)

    chunks = map_chunks(margins, plan.size, jobs)
    verdict = grid_verdict(
        {
            "decrease": np.concatenate([c[0] for c in chunks]),
            "guarantee": np.concatenate([c[1] for c in chunks]),
        },
        plan,
        tolerances,
        tol,
        gradient_check=gradient,
        details={"global_capable": _global_capable(ode, cand)},
    )
    logger.debug("LISS check over %d samples: %s", plan.size, verdict.holds)
    return verdict


# Comparison function approximation


@dataclass(frozen=True)
class KApproximation:
    """Radial envelopes ``lower(|x - x0|) <= phi(x) <= upper(|x - x0|)``."""

    upper: PLFun
    lower: PLFun
    unbounded: bool
    samples: int
    sandwich_violation: float

    def classes(self) -> dict[str, str]:
        return {
            "upper": classify(self.upper).value,
            "lower": classify(self.lower).value,
        }


def _phi_grows(phi: Expr, domain: Box, x0: np.ndarray) -> bool:
    radius = max((hi - lo) / 2 for lo, hi in domain.bounds) or 1.0
    names = state_vars(domain.dim)
    with np.errstate(all="ignore"):
        for i in range(domain.dim):
            for sign in (1.0, -1.0):
                values = []
                for s in GROWTH_SCALES:
                    x = x0.copy()
                    x[i] += sign * s * radius
                    values.append(float(evaluate(phi, dict(zip(names, x.tolist())))))
                if not _grows(values):
                    return False
    return True


def k_approx(
    phi: Expr,
    domain: Box,
    x0: Sequence[float] | None = None,
    radial_steps: int = 200,
    tol: float = TOL,
    jobs: int | None = None,
) -> KApproximation:
    """Sandwich a storage function between two radial envelopes.

    ``upper(r)`` is the largest sampled value at radius at most ``r`` and
    ``lower(r)`` the smallest at radius at least ``r``; both have a
    breakpoint at every sampled radius. The grid step is the largest
    radius over ``radial_steps``. When ``phi`` keeps growing beyond the
    domain, the envelopes are extended linearly instead of flat.

    Raises `StorageError` when ``phi`` is not a storage function.
    """
    if radial_steps < 1:
        raise ValueError("At least one radial step is required")
    x0 = np.asarray(_point(x0, domain.dim, "The base point"))
    reach = float(np.linalg.norm(np.maximum(domain.upper - x0, x0 - domain.lower)))
    if reach == 0:
        raise ValueError("The domain is a single point")
    step = reach / radial_steps
    storage = check_storage(phi, domain, x0.tolist(), step, tol, jobs=jobs)
    if not storage:
        raise StorageError(storage)
    names = state_vars(domain.dim)
    plan = SamplePlan.over(domain, names, step, x0.tolist())
    points = plan.points()

    def sample(part: slice) -> tuple[np.ndarray, np.ndarray]:
        env = slice_env(points, part)
        size = part.stop - part.start
        radius = np.sqrt(sum((env[x] - c) ** 2 for x, c in zip(names, x0)))
        return radius, eval_array(phi, env, size)

    chunks = map_chunks(sample, plan.size, jobs)
    radius = np.concatenate([c[0] for c in chunks])
    values = np.concatenate([c[1] for c in chunks])
    radii, group = np.unique(np.round(radius, 12), return_inverse=True)
    highest = np.full(len(radii), -np.inf)
    lowest = np.full(len(radii), np.inf)
    np.maximum.at(highest, group, values)
    np.minimum.at(lowest, group, values)
    upper_values = np.maximum.accumulate(highest)
    lower_values = np.minimum.accumulate(lowest[::-1])[::-1]
    upper_values[0] = lower_values[0] = 0.0
    unbounded = _phi_grows(phi, domain, x0)
    last = float(radii[-1])

    def envelope(ys: np.ndarray) -> PLFun:
        slope = ys[-1] / last if unbounded and last > 0 else 0.0
        return PLFun.from_points(list(zip(radii.tolist(), ys.tolist())), slope)

    upper, lower = envelope(upper_values), envelope(lower_values)
    violation = float(
        max(
            np.max(values - upper.evaluate(radius)),
            np.max(lower.evaluate(radius) - values),
        )
    )
    logger.debug("Radial envelopes over %d samples, %d radii", plan.size, len(radii))
    return KApproximation(upper, lower, unbounded, plan.size, violation)


# Trajectories


@dataclass(frozen=True)
class InputSignal:
    """A piecewise-constant input: ``(start time, value)`` segments.

    The first segment starts at time 0 and each value holds until the
    next start.
    """

    segments: tuple[tuple[float, tuple[float, ...]], ...]

    def __post_init__(self) -> None:
        segments = tuple(
            (float(t), tuple(float(v) for v in value)) for t, value in self.segments
        )
        if not segments or segments[0][0] != 0:
            raise ValueError("An input signal starts with a segment at time 0")
        if any(t1 <= t0 for (t0, _), (t1, _) in zip(segments, segments[1:])):
            raise ValueError("Segment start times must be strictly increasing")
        if len({len(value) for _, value in segments}) != 1:
            raise ValueError("All segments must have the same dimension")
        object.__setattr__(self, "segments", segments)

    @classmethod
    def constant(cls, value: Sequence[float]) -> InputSignal:
        return cls(((0.0, tuple(value)),))

    @property
    def dim(self) -> int:
        return len(self.segments[0][1])

    def value_at(self, t: float) -> tuple[float, ...]:
        current = self.segments[0][1]
        for start, value in self.segments:
            if start > t:
                break
            current = value
        return current

    def sup_norm(self, t_end: float, origin: Sequence[float] | None = None) -> float:
        """Largest distance to ``origin`` reached on ``[0, t_end]``."""
        if origin is None:
            origin = np.zeros(self.dim)
        origin = np.asarray(origin, dtype=float)
        return max(
            (
                float(np.linalg.norm(np.asarray(value) - origin))
                for start, value in self.segments
                if start <= t_end
            ),
            default=0.0,
        )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples of a simulated trajectory.

    ``exit_step`` is the step at which the state left the domain; the
    samples stop before it.
    """

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    signal: InputSignal
    origin: np.ndarray
    input_origin: np.ndarray
    step: float
    exit_step: int | None = None

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        n, m = self.states.shape[1], self.inputs.shape[1]
        writer.writerow(["t"] + state_vars(n) + input_vars(m))
        for t, x, a in zip(self.times, self.states, self.inputs):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in (*x, *a)])
        return buffer.getvalue()


def simulate(
    ode: OpenODE,
    x_init: Sequence[float],
    signal: InputSignal | None = None,
    t_end: float = 1.0,
    h: float = 0.01,
) -> Trajectory:
    """Integrate with the classical fourth-order Runge-Kutta scheme.

    The input is held at its value at the start of each step. When
    ``t_end`` is not a multiple of ``h`` the last step is shortened to land
    on ``t_end``. The simulation stops early when the state leaves the
    domain.
    """
    if not h > 0:
        raise ValueError("The integration step must be positive")
    if t_end < 0:
        raise ValueError("The final time must be nonnegative")
    x = np.asarray(x_init, dtype=float)
    if not ode.domain.contains(x):
        raise ValueError(f"The initial state {x.tolist()} is outside the domain")
    signal = InputSignal.constant(ode.a0) if signal is None else signal
    if signal.dim != ode.input_dim:
        raise ValueError(
            f"The input signal has dimension {signal.dim}, expected {ode.input_dim}"
        )
    f: Callable[[np.ndarray, tuple[float, ...]], np.ndarray] = ode.vector_field
    times, states, inputs = [0.0], [x], [signal.value_at(0.0)]
    exit_step = None
    count = round(t_end / h)
    if not math.isclose(count * h, t_end, rel_tol=1e-9, abs_tol=1e-12):
        count = math.ceil(t_end / h)
    for k in range(count):
        t = k * h
        dt = t_end - t if k == count - 1 else h
        a = signal.value_at(t)
        k1 = f(x, a)
        k2 = f(x + dt / 2 * k1, a)
        k3 = f(x + dt / 2 * k2, a)
        k4 = f(x + dt * k3, a)
        x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise SimulationError(k + 1)
        if not ode.domain.contains(x):
            exit_step = k + 1
            logger.debug("Trajectory left the domain at step %d", exit_step)
            break
        t_next = t_end if k == count - 1 else (k + 1) * h
        times.append(t_next)
        states.append(x)
        inputs.append(signal.value_at(t_next))
    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        inputs=np.array(inputs, dtype=float).reshape(len(times), ode.input_dim),
        signal=signal,
        origin=np.array(ode.x0),
        input_origin=np.array(ode.a0),
        step=h,
        exit_step=exit_step,
    )


def check_iss_bound(
    trajectories: Sequence[Trajectory],
    k1: PLFun,
    k2: PLFun,
    k3: PLFun,
    tol: float = ISS_TOL,
) -> Verdict:
    """Check ``|x(t)| <= k1(k2(|x(0)|) e^-t) + k3(|a|_inf)`` on every sample.

    Distances are taken from the equilibrium. The counterexample is the
    pair ``(trajectory index, sample index)`` of the worst sample.
    """
    require_class(k1, ComparisonClass.KINF, "k1")
    require_class(k2, ComparisonClass.KINF, "k2")
    require_class(k3, ComparisonClass.KINF0, "k3")
    worst: tuple[float, int, int] | None = None
    for index, traj in enumerate(trajectories):
        distance = np.linalg.norm(traj.states - traj.origin, axis=1)
        drive = traj.signal.sup_norm(float(traj.times[-1]), traj.input_origin)
        bound = k1.evaluate(k2(float(distance[0])) * np.exp(-traj.times)) + k3(drive)
        margins = bound - distance
        sample = int(np.argmin(margins))
        if worst is None or margins[sample] < worst[0]:
            worst = (float(margins[sample]), index, sample)
    tolerances = {"tol": tol}
    if worst is None:
        return Verdict.success(tolerances=tolerances)
    margin, index, sample = worst
    point = {"trajectory": index, "t": float(trajectories[index].times[sample])}
    if margin < -tol:
        return Verdict.failure(
            (index, sample),
            "iss bound",
            worst_margin=margin,
            witness_point=point,
            tolerances=tolerances,
        )
    return Verdict.success(
        worst_margin=margin, witness_point=point, tolerances=tolerances
    )


def lyapunov_decrease_bound(
    ode: OpenODE, cand: LyapunovCandidate, traj: Trajectory
) -> np.ndarray:
    """Residuals of the discrete decrease estimate along a trajectory.

    Entry ``j`` is ``phi(x[j+1]) - phi(x[j]) - dt (alpha(a[j]) -
    (id - lam)(phi(x[j])))`` with ``dt = t[j+1] - t[j]``; on a certified
    system no entry exceeds ``O(h^2)``.
    """
    size = len(traj.times)
    env = {x: traj.states[:, i] for i, x in enumerate(state_vars(ode.state_dim))}
    env.update({a: traj.inputs[:, j] for j, a in enumerate(input_vars(ode.input_dim))})
    phi = eval_array(cand.phi, env, size)
    alpha = eval_array(cand.alpha, env, size)
    stored = np.maximum(phi, 0.0)
    rate = alpha - (stored - cand.lam.evaluate(stored))
    return phi[1:] - phi[:-1] - np.diff(traj.times) * rate[:-1]


# Falsification


@dataclass(frozen=True)
class Falsification:
    point: Mapping[str, float]
    margin: float
    condition: str
    evaluations: int


def falsify(
    ode: OpenODE,
    cand: LyapunovCandidate,
    budget: int = 100,
    step: float = 0.1,
    tol: float = TOL,
    verdict: Verdict | None = None,
    grid_step: float = DEFAULT_GRID_STEP,
) -> Falsification | None:
    """Search for a point strictly violating the certificate.

    The search starts at the worst grid sample of ``verdict`` (computed
    when not given) and descends one coordinate at a time, halving its
    step when no move improves. Each margin evaluation counts against
    ``budget``.
    """
    if budget <= 0:
        warnings.warn("Falsification budget is 0, no point is evaluated", stacklevel=2)
        return None
    _fit_candidate(ode, cand)
    grad = grad_expr(cand.phi, state_vars(ode.state_dim))
    names = state_vars(ode.state_dim) + input_vars(ode.input_dim)
    bounds = dict(zip(names, (ode.domain + ode.input_domain).bounds))
    if verdict is None:
        verdict = certify_liss(ode, cand, grid_step, tol)
    start = verdict.witness_point or ode.env(ode.x0, ode.a0)
    point = {name: float(start.get(name, 0.0)) for name in names}

    def evaluate_at(candidate: dict[str, float]) -> tuple[float, str]:
        env = {name: np.array([value]) for name, value in candidate.items()}
        decrease, guarantee = _liss_margins(ode, cand, grad, env, 1)
        if decrease[0] <= guarantee[0]:
            return float(decrease[0]), "decrease"
        return float(guarantee[0]), "guarantee"

    best, condition = evaluate_at(point)
    evaluations = 1
    delta = step
    while best >= -tol and evaluations < budget and delta > 1e-12:
        improved = False
        for name in names:
            lo, hi = bounds[name]
            for sign in (1.0, -1.0):
                if evaluations >= budget or best < -tol:
                    break
                moved = min(max(point[name] + sign * delta, lo), hi)
                if moved == point[name]:
                    continue
                candidate = {**point, name: moved}
                margin, failed = evaluate_at(candidate)
                evaluations += 1
                if margin < best:
                    point, best, condition = candidate, margin, failed
                    improved = True
        if not improved:
            delta /= 2
    logger.debug("Falsification used %d evaluations, best margin %g", evaluations, best)
    if best < -tol and math.isfinite(best):
        return Falsification(point, best, condition, evaluations)
    return None
