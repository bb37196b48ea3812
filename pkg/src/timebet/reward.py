"""Rejection-time reward functions.

A reward function maps the rejection round t (1-based; t = 0 is also
defined) to a nonnegative value and never increases with t; a test that
never rejects earns 0.  Solvers truncate at an effective horizon beyond
which the reward is below a tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError

__all__ = [
    "HardDeadline",
    "Logistic",
    "ExponentialDecay",
    "Table",
    "RewardSpec",
    "evaluate",
    "evaluate_array",
    "effective_horizon",
]


@dataclass(frozen=True)
class HardDeadline:
    """Reward 1 for rejecting at or before the deadline, 0 afterwards."""

    deadline: int

    def __post_init__(self) -> None:
        if not (isinstance(self.deadline, int) and self.deadline >= 1):
            raise DomainError(f"deadline must be a positive integer, got {self.deadline!r}")


@dataclass(frozen=True)
class Logistic:
    """Smooth deadline: reward 1/(1 + exp((t - center)/scale))."""

    center: float
    scale: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.center) and self.center > 0.0):
            raise DomainError(f"logistic center must be positive, got {self.center}")
        if not (math.isfinite(self.scale) and self.scale > 0.0):
            raise DomainError(f"logistic scale must be positive, got {self.scale}")


@dataclass(frozen=True)
class ExponentialDecay:
    """Reward exp(-t / timescale)."""

    timescale: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.timescale) and self.timescale > 0.0):
            raise DomainError(
                f"exponential timescale must be positive, got {self.timescale}"
            )


@dataclass(frozen=True)
class Table:
    """Explicit finite list of values for t = 0, 1, ...; zero afterwards."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) == 0:
            raise DomainError("table reward needs at least one value")
        vals = tuple(float(v) for v in self.values)
        if any(not math.isfinite(v) or v < 0.0 for v in vals):
            raise DomainError("table values must be finite and nonnegative")
        if any(b > a for a, b in zip(vals, vals[1:])):
            raise DomainError("table values must be non-increasing")
        object.__setattr__(self, "values", vals)


RewardSpec = Union[HardDeadline, Logistic, ExponentialDecay, Table]


def evaluate(spec: RewardSpec, t: float) -> float:
    """Reward for rejecting at round t; t may be math.inf (never), worth 0."""
    if t != math.inf and not (float(t).is_integer() and t >= 0):
        raise DomainError(f"rejection round must be a nonnegative integer or inf, got {t!r}")
    if t == math.inf:
        return 0.0
    t = int(t)
    if isinstance(spec, HardDeadline):
        return 1.0 if t <= spec.deadline else 0.0
    if isinstance(spec, Logistic):
        # Guard the exp against overflow for huge t; the value is then 0.
        z = (t - spec.center) / spec.scale
        if z > 700.0:
            return 0.0
        return 1.0 / (1.0 + math.exp(z))
    if isinstance(spec, ExponentialDecay):
        return math.exp(-t / spec.timescale)
    if t < len(spec.values):
        return spec.values[t]
    return 0.0


def evaluate_array(spec: RewardSpec, rounds: np.ndarray) -> np.ndarray:
    """Vectorized :func:`evaluate` over an integer array of rounds."""
    t = np.asarray(rounds)
    if isinstance(spec, HardDeadline):
        return (t <= spec.deadline).astype(float)
    if isinstance(spec, Logistic):
        z = np.clip((t - spec.center) / spec.scale, None, 700.0)
        return 1.0 / (1.0 + np.exp(z))
    if isinstance(spec, ExponentialDecay):
        return np.exp(-t / spec.timescale)
    vals = np.asarray(spec.values + (0.0,))
    return vals[np.minimum(t, len(spec.values))]


def effective_horizon(spec: RewardSpec, epsilon: float = 1e-6) -> int:
    """Smallest round H with evaluate(spec, t) < epsilon for every t >= H.

    Hard deadlines return the deadline itself regardless of epsilon.
    """
    if not (epsilon > 0.0):
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if isinstance(spec, HardDeadline):
        return spec.deadline
    if isinstance(spec, Table):
        h = len(spec.values)
        while h > 0 and spec.values[h - 1] < epsilon:
            h -= 1
        return h
    # Monotone non-increasing: bracket by doubling, then bisect for the
    # first round below epsilon.
    if evaluate(spec, 0) < epsilon:
        return 0
    hi = 1
    while evaluate(spec, hi) >= epsilon:
        hi *= 2
        if hi > 2**62:
            raise DomainError("effective horizon overflow; epsilon too small")
    lo = hi // 2  # evaluate(lo) >= epsilon
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if evaluate(spec, mid) < epsilon:
            hi = mid
        else:
            lo = mid
    return hi
