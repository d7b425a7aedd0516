"""Bound report container shared by the transport and bounds modules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Tuple


@dataclass(frozen=True)
class BoundReport:
    """A bound value and its itemized contributions.

    ``combine`` is ``"sum"`` (value is the sum of terms) or ``"max"`` (value is
    the largest term).
    """

    value: float
    terms: Tuple[Tuple[str, float], ...]
    params: Dict[str, Any] = field(default_factory=dict)
    combine: str = "sum"

    def recombined(self) -> float:
        vals = [v for _, v in self.terms]
        if self.combine == "max":
            return max(vals)
        return math.fsum(vals)

    def consistent(self, rel: float = 1e-12) -> bool:
        rec = self.recombined()
        return abs(rec - self.value) <= rel * max(abs(self.value), abs(rec), 1e-300)

    def term(self, name: str) -> float:
        for key, v in self.terms:
            if key == name:
                return v
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "combine": self.combine,
            "terms": [[k, v] for k, v in self.terms],
            "params": _jsonable(self.params),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def make_report(terms, params=None, combine="sum") -> BoundReport:
    terms = tuple((str(k), float(v)) for k, v in terms)
    vals = [v for _, v in terms]
    value = max(vals) if combine == "max" else math.fsum(vals)
    return BoundReport(value, terms, dict(params or {}), combine)
