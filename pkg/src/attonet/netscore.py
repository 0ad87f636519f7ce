"""The universal efficiency score and the accuracy feasibility indicator.

The score balances accuracy against architectural and computational
complexity on a decibel-style scale:

    score = 20 * log10(accuracy^alpha / (params^beta * mult_adds^gamma))

with accuracy in percent, params in millions, and mult-adds in billions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import MetricDomainError

__all__ = ["MetricInputs", "MetricConfig", "netscore", "indicator"]


@dataclass(frozen=True)
class MetricInputs:
    """Measured model figures: top-1 accuracy (percent), parameter count in
    millions, multiply-add count in billions."""

    accuracy: float
    params_millions: float
    mult_adds_billions: float

    def __post_init__(self):
        if not (0 < self.accuracy <= 100):
            raise MetricDomainError(f"accuracy must be in (0, 100], got {self.accuracy}")
        if self.params_millions <= 0:
            raise MetricDomainError(f"params_millions must be > 0, got {self.params_millions}")
        if self.mult_adds_billions <= 0:
            raise MetricDomainError(
                f"mult_adds_billions must be > 0, got {self.mult_adds_billions}")

    @staticmethod
    def from_raw_counts(accuracy: float, params: int, mult_adds: int) -> "MetricInputs":
        """Build inputs from raw counts (parameters and mult-adds as plain
        integers), converting to millions/billions internally."""
        return MetricInputs(accuracy, params / 1e6, mult_adds / 1e9)


@dataclass(frozen=True)
class MetricConfig:
    """Score exponents and the feasibility floor (accuracy weighs twice as
    much as either complexity term by default)."""

    alpha: float = 2.0
    beta: float = 0.5
    gamma: float = 0.5
    accuracy_floor: float = 65.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise MetricDomainError("alpha, beta, gamma must be non-negative")


DEFAULT_CONFIG = MetricConfig()


def netscore(inputs: MetricInputs, cfg: MetricConfig = DEFAULT_CONFIG) -> float:
    """Efficiency score in points; higher is better.

    Strictly increasing in accuracy and strictly decreasing in each
    complexity input (for positive exponents).
    """
    return 20.0 * (cfg.alpha * math.log10(inputs.accuracy)
                   - cfg.beta * math.log10(inputs.params_millions)
                   - cfg.gamma * math.log10(inputs.mult_adds_billions))


def indicator(accuracy: float, cfg: MetricConfig = DEFAULT_CONFIG) -> bool:
    """Hard feasibility constraint: top-1 accuracy at or above the floor."""
    if not (0 <= accuracy <= 100):
        raise MetricDomainError(f"accuracy must be in [0, 100], got {accuracy}")
    return accuracy >= cfg.accuracy_floor
