"""Verdicts returned by every checker."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

from .symbols import format_symbol

__all__ = ["Verdict", "jsonable"]


@dataclass(frozen=True)
class Verdict:
    """Outcome of a check.

    A verdict is truthy iff the checked property holds. Failing verdicts
    carry the first counterexample in enumeration order (finite checks) or
    the worst sample (grid checks), and ``failed`` names the condition
    that broke.
    """

    holds: bool
    counterexample: Any = None
    failed: str | None = None
    worst_margin: float | None = None
    witness_point: Mapping[str, float] | None = None
    grid: Mapping[str, Any] | None = None
    tolerances: Mapping[str, float] | None = None
    gradient_check: Mapping[str, Any] | None = None
    details: Mapping[str, Any] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.holds

    @classmethod
    def success(cls, **kwargs: Any) -> Verdict:
        return cls(True, **kwargs)

    @classmethod
    def failure(cls, counterexample: Any, failed: str, **kwargs: Any) -> Verdict:
        return cls(False, counterexample=counterexample, failed=failed, **kwargs)

    def to_json(self) -> dict[str, Any]:
        """Plain JSON-compatible mapping, symbols in their text form."""
        result: dict[str, Any] = {"holds": self.holds}
        if isinstance(self.counterexample, tuple):
            result["counterexample"] = [jsonable(x) for x in self.counterexample]
        elif self.counterexample is not None:
            result["counterexample"] = jsonable(self.counterexample)
        if self.failed is not None:
            result["failed"] = self.failed
        for name in (
            "worst_margin",
            "witness_point",
            "grid",
            "tolerances",
            "gradient_check",
        ):
            value = getattr(self, name)
            if value is not None:
                result[name] = jsonable(value)
        if self.details:
            result["details"] = jsonable(self.details)
        return result


def jsonable(value: Any) -> Any:
    """Convert symbols, tuples and numpy scalars into JSON values."""
    if isinstance(value, tuple):
        if len(value) == 2 and all(_is_symbol(v) for v in value):
            return format_symbol(value)
        return [jsonable(v) for v in value]
    if isinstance(value, (list, frozenset, set)):
        items = [jsonable(v) for v in value]
        if isinstance(value, (frozenset, set)):
            items.sort(key=str)
        return items
    if isinstance(value, Mapping):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, int):
        return int(value)
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, float):
        if not math.isfinite(value):
            return repr(value)
        return value
    return value


def _is_symbol(value: Any) -> bool:
    if isinstance(value, str):
        return True
    if isinstance(value, tuple) and len(value) == 2:
        return all(_is_symbol(v) for v in value)
    return False
