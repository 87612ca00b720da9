"""Compositional assume-guarantee verification with lenses.

The main modules are:
- core: finite interfaces, lenses and charts
- wiring: the parallel, cascade and feedback wiring lenses
- machines: generalized Moore machines, coupling and simulations
- cert: boolean and quantitative certificates, and comparison functions
- ode: open ODEs, LISS Lyapunov certificates and trajectories
- dsl: parsers and printers of the document formats

Some utility modules are also provided:
- expr: arithmetic expressions, evaluation and differentiation
- grid: sample plans over boxes
- sweep: partitioned enumeration and grid evaluation
- verdict: the outcome of every check
- test_utils: fixtures and generators for testing (require pytest)
"""

from . import cert, dsl
from .core import (
    AglensError,
    Chart,
    FiniteSet,
    Interface,
    InterfaceMismatch,
    Lens,
    WellFormednessError,
    compose_chart,
    compose_lens,
    identity_chart,
    identity_lens,
    parallel_interface,
    parallel_lens,
)
from .machines import Machine, Simulation, check_simulation, couple
from .ode import LyapunovCandidate, OpenODE, certify_liss, k_approx, simulate
from .verdict import Verdict
from .wiring import make_cascade, make_feedback, make_parallel

__version__ = "0.1.0"

__all__ = [
    "cert",
    "dsl",
    "AglensError",
    "InterfaceMismatch",
    "WellFormednessError",
    "FiniteSet",
    "Interface",
    "Lens",
    "Chart",
    "compose_lens",
    "compose_chart",
    "identity_lens",
    "identity_chart",
    "parallel_interface",
    "parallel_lens",
    "make_parallel",
    "make_cascade",
    "make_feedback",
    "Machine",
    "Simulation",
    "couple",
    "check_simulation",
    "OpenODE",
    "LyapunovCandidate",
    "certify_liss",
    "k_approx",
    "simulate",
    "Verdict",
    "__version__",
]
