from aglens.test_utils import (
    fixture_dir,
    linear_ode,
    ok_go_certificate,
    ok_go_machine,
    quadratic_candidate,
    unstable_ode,
)

__all__ = [
    "fixture_dir",
    "ok_go_machine",
    "ok_go_certificate",
    "linear_ode",
    "unstable_ode",
    "quadratic_candidate",
]
