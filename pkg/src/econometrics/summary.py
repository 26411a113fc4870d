"""Comparison of fitted coefficient signs with the expected sign pattern per exchange kind."""

from dataclasses import dataclass
from typing import Dict, List

from .design import ExchangeKind
from .ols import RegressionResult

# +1: positively correlated with volatility, -1: negatively correlated.
EXPECTED_SIGNS: Dict[ExchangeKind, Dict[str, int]] = {
    ExchangeKind.CEX: {
        "expected_volume": 1,
        "unexpected_volume": 1,
        "expected_oi_short": -1,
        "unexpected_oi_short": -1,
    },
    ExchangeKind.ORACLE: {
        "expected_volume": 1,
        "unexpected_volume": 1,
        "expected_oi_long": -1,
        "unexpected_oi_long": -1,
        "expected_oi_short": -1,
        "unexpected_oi_short": -1,
    },
    ExchangeKind.VAMM: {
        "expected_volume": 1,
        "unexpected_volume": 1,
        "expected_oi_long": 1,
        "expected_oi_short": -1,
        "unexpected_oi_long": 1,
        "unexpected_oi_short": 1,
    },
}


@dataclass(frozen=True)
class SignCheck:
    variable: str
    expected: int
    coefficient: float
    t_stat: float

    @property
    def observed(self) -> int:
        return (self.coefficient > 0) - (self.coefficient < 0)

    @property
    def agrees(self) -> bool:
        return self.observed == self.expected


def compare_signs(result: RegressionResult, exchange_kind) -> List[SignCheck]:
    """
    Check each coefficient with an expected sign against the fitted value.

    Variables absent from ``result`` (long OI on a CEX) are skipped.
    """
    expected = EXPECTED_SIGNS[ExchangeKind(exchange_kind)]
    return [
        SignCheck(name, sign, result.coefficient(name), result.t_stat(name))
        for name, sign in expected.items()
        if name in result.names
    ]


def agreement_rate(checks: List[SignCheck]) -> float:
    if not checks:
        return 0.0
    return sum(check.agrees for check in checks) / len(checks)
