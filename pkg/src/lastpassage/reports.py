"""The record every check produces, and its JSON form."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict

import numpy as np


class Verdict(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    INCONCLUSIVE = "INCONCLUSIVE"


def to_plain(value: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values.

    NaN and infinities become strings (``"nan"``, ``"inf"``, ``"-inf"``) so the
    document stays valid JSON and still round-trips the information.
    """
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def _from_plain_float(value):
    if isinstance(value, str) and value in ("nan", "inf", "-inf"):
        return float(value)
    return value


@dataclass
class TestReport:
    """Outcome of a single statistical or numerical check.

    ``statistic`` is the test statistic (KS distance, z-score, slope...), and
    ``p_value_or_error`` carries either a p-value or an error norm depending on
    the check; ``metadata`` records the threshold that produced ``verdict``.
    """

    __test__ = False  # keep pytest from collecting this class

    name: str
    statistic: float
    p_value_or_error: float
    n: int
    verdict: Verdict
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == Verdict.PASS

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "statistic": to_plain(self.statistic),
            "p_value_or_error": to_plain(self.p_value_or_error),
            "n": int(self.n),
            "verdict": Verdict(self.verdict).value,
            "metadata": to_plain(self.metadata),
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TestReport":
        return cls(
            name=data["name"],
            statistic=_from_plain_float(data["statistic"]),
            p_value_or_error=_from_plain_float(data["p_value_or_error"]),
            n=int(data["n"]),
            verdict=Verdict(data["verdict"]),
            metadata=dict(data.get("metadata", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> "TestReport":
        return cls.from_dict(json.loads(text))


def combine_verdicts(verdicts) -> Verdict:
    """FAIL beats INCONCLUSIVE beats PASS."""
    verdicts = [Verdict(v) for v in verdicts]
    if any(v == Verdict.FAIL for v in verdicts):
        return Verdict.FAIL
    if any(v == Verdict.INCONCLUSIVE for v in verdicts):
        return Verdict.INCONCLUSIVE
    return Verdict.PASS
