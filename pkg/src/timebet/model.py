"""Distributions, betting-action families, and information quantities.

A testing problem is simple versus simple: observations are drawn i.i.d.
from either a known null or a known alternative distribution.  A bettor
multiplies wealth by ``payoff(action, x)`` each round; every in-range
action has null expectation <= 1 (exactly 1 for the Bernoulli and Gaussian
families), so wealth is a nonnegative supermartingale under the null and
crossing ``1/alpha`` is an anytime-valid rejection rule.

Conventions used throughout the package:

- Rounds are 1-based and wealth starts at 1.
- ``BernoulliBet`` actions ``a`` in [0, 1] pay ``a/p0`` on x = 1 and
  ``(1-a)/(1-p0)`` on x = 0.
- ``GaussianShift`` actions ``a`` pay ``exp(a (x - c)/sigma^2 - a^2/(2 sigma^2))``
  where ``c`` is the null mean; this is the likelihood ratio of
  N(c + a, sigma^2) against N(c, sigma^2).
- ``CoinBet`` actions pay ``1 + a (x - m)`` for a null mean of ``m``; the
  family is included for completeness and is not accepted by the solvers.
- ``log_growth`` may return ``-inf`` (payoff zero on an outcome the
  alternative charges); callers must guard with ``math.isinf`` before doing
  arithmetic with it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    DomainError,
    InfiniteDivergenceError,
    VariantMismatchError,
)

__all__ = [
    "Bernoulli",
    "Gaussian",
    "Distribution",
    "TestingProblem",
    "BernoulliBet",
    "GaussianShift",
    "CoinBet",
    "ActionFamily",
    "canonical_family",
    "action_interval",
    "payoff",
    "payoff_pair",
    "null_mean_check",
    "log_growth",
    "kl",
    "renyi",
    "tilt",
    "gauss_hermite",
]


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Bernoulli:
    """Bernoulli distribution on {0, 1} with success probability ``p``."""

    p: float

    def __post_init__(self) -> None:
        if not (isinstance(self.p, (int, float)) and math.isfinite(self.p)):
            raise DomainError(f"Bernoulli p must be a finite number, got {self.p!r}")
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"Bernoulli p must lie in [0, 1], got {self.p}")

    @property
    def mean(self) -> float:
        return float(self.p)


@dataclass(frozen=True)
class Gaussian:
    """Normal distribution with the given mean and standard deviation."""

    mean: float
    sigma: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.mean):
            raise DomainError(f"Gaussian mean must be finite, got {self.mean!r}")
        if not (math.isfinite(self.sigma) and self.sigma > 0.0):
            raise DomainError(f"Gaussian sigma must be positive, got {self.sigma!r}")


Distribution = Union[Bernoulli, Gaussian]


def _variant(dist: Distribution) -> str:
    if isinstance(dist, Bernoulli):
        return "bernoulli"
    if isinstance(dist, Gaussian):
        return "gaussian"
    raise DomainError(f"not a distribution: {dist!r}")


@dataclass(frozen=True)
class TestingProblem:
    """A simple-vs-simple testing problem with rejection level ``alpha``.

    Invariants enforced here: both distributions share the variant, the
    alternative differs from the null and is absolutely continuous with
    respect to it, and Gaussian pairs share sigma (the solvers' closed
    forms are all equal-variance; unequal-variance pairs are out of scope).
    """

    __test__ = False  # keep pytest from collecting this as a test class

    null: Distribution
    alternative: Distribution
    alpha: float

    def __post_init__(self) -> None:
        v0, v1 = _variant(self.null), _variant(self.alternative)
        if v0 != v1:
            raise VariantMismatchError(
                f"null is {v0} but alternative is {v1}; variants must match"
            )
        if not (0.0 < self.alpha < 1.0):
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.null == self.alternative:
            raise DomainError("alternative must differ from the null")
        if v0 == "bernoulli":
            p0, p1 = self.null.p, self.alternative.p
            if (p0 == 0.0 and p1 > 0.0) or (p0 == 1.0 and p1 < 1.0):
                raise InfiniteDivergenceError(
                    "alternative is not absolutely continuous w.r.t. the null "
                    f"(p0={p0}, p1={p1})"
                )
        else:
            if self.null.sigma != self.alternative.sigma:
                raise DomainError(
                    "Gaussian problems must share sigma between null and "
                    f"alternative (got {self.null.sigma} and {self.alternative.sigma})"
                )

    @property
    def variant(self) -> str:
        return _variant(self.null)

    @property
    def p0(self) -> float:
        if self.variant != "bernoulli":
            raise VariantMismatchError("p0 is only defined for Bernoulli problems")
        return float(self.null.p)

    @property
    def p1(self) -> float:
        if self.variant != "bernoulli":
            raise VariantMismatchError("p1 is only defined for Bernoulli problems")
        return float(self.alternative.p)

    @property
    def delta(self) -> float:
        """Mean shift of the alternative relative to the null (Gaussian only)."""
        if self.variant != "gaussian":
            raise VariantMismatchError("delta is only defined for Gaussian problems")
        return float(self.alternative.mean - self.null.mean)

    @property
    def sigma(self) -> float:
        if self.variant != "gaussian":
            raise VariantMismatchError("sigma is only defined for Gaussian problems")
        return float(self.null.sigma)


# ---------------------------------------------------------------------------
# Action families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BernoulliBet:
    """Bets against a Bernoulli(p0) null; action a is the mass put on x = 1."""

    p0: float

    def __post_init__(self) -> None:
        if not 0.0 < self.p0 < 1.0:
            raise DomainError(f"BernoulliBet requires p0 in (0, 1), got {self.p0}")


@dataclass(frozen=True)
class GaussianShift:
    """Mean-shift bets against an N(center, sigma^2) null.

    The action interval defaults to [0, 4]; widen it explicitly when a
    solver needs a more aggressive shift.
    """

    sigma: float
    center: float = 0.0
    a_min: float = 0.0
    a_max: float = 4.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sigma) and self.sigma > 0.0):
            raise DomainError(f"GaussianShift sigma must be positive, got {self.sigma}")
        if not math.isfinite(self.center):
            raise DomainError("GaussianShift center must be finite")
        if not (self.a_min <= self.a_max and math.isfinite(self.a_min)):
            raise DomainError(
                f"invalid action interval [{self.a_min}, {self.a_max}]"
            )


@dataclass(frozen=True)
class CoinBet:
    """Coin-betting payoffs 1 + a (x - m) against nulls with mean m.

    Valid for m in [0, 1); the action interval is [1/(m-1), 1/m] with an
    unbounded upper end at m = 0.  Not accepted by the dynamic-programming
    or stationary-tilt solvers.
    """

    m: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.m < 1.0:
            raise DomainError(f"CoinBet requires m in [0, 1), got {self.m}")


ActionFamily = Union[BernoulliBet, GaussianShift, CoinBet]


def canonical_family(problem: TestingProblem, a_max: float = 4.0) -> ActionFamily:
    """The natural action family for a problem's null.

    Bernoulli nulls get :class:`BernoulliBet`; Gaussian nulls get
    :class:`GaussianShift` centred at the null mean.
    """
    if problem.variant == "bernoulli":
        return BernoulliBet(problem.p0)
    return GaussianShift(sigma=problem.sigma, center=problem.null.mean, a_max=a_max)


def action_interval(family: ActionFamily) -> tuple[float, float]:
    """Closed interval of valid actions for the family."""
    if isinstance(family, BernoulliBet):
        return (0.0, 1.0)
    if isinstance(family, GaussianShift):
        return (family.a_min, family.a_max)
    if isinstance(family, CoinBet):
        hi = math.inf if family.m == 0.0 else 1.0 / family.m
        return (1.0 / (family.m - 1.0), hi)
    raise DomainError(f"not an action family: {family!r}")


def _check_action(family: ActionFamily, action: float) -> None:
    lo, hi = action_interval(family)
    if not (lo <= action <= hi):
        raise DomainError(
            f"action {action} outside the valid interval [{lo}, {hi}] "
            f"of {type(family).__name__}"
        )


def payoff(family: ActionFamily, action: float, outcome: float) -> float:
    """Wealth multiplier phi(action, outcome); always >= 0.

    The outcome must lie in the support implied by the family's null
    (``{0, 1}`` for Bernoulli bets; any real for Gaussian shifts; for coin
    bets, any outcome that keeps the payoff nonnegative).
    """
    _check_action(family, action)
    if isinstance(family, BernoulliBet):
        if outcome == 1:
            return action / family.p0
        if outcome == 0:
            return (1.0 - action) / (1.0 - family.p0)
        raise DomainError(f"Bernoulli outcome must be 0 or 1, got {outcome!r}")
    if isinstance(family, GaussianShift):
        s2 = family.sigma * family.sigma
        z = outcome - family.center
        return math.exp(action * z / s2 - action * action / (2.0 * s2))
    value = 1.0 + action * (outcome - family.m)
    if value < 0.0:
        raise DomainError(
            f"coin-bet payoff is negative for action {action} at outcome {outcome}"
        )
    return value


def payoff_pair(family: BernoulliBet, action: float) -> tuple[float, float]:
    """(phi(a, 0), phi(a, 1)) for a Bernoulli bet."""
    _check_action(family, action)
    return ((1.0 - action) / (1.0 - family.p0), action / family.p0)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


def gauss_hermite(mean: float, sigma: float, nodes: int = 41) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights so that E[f(X)] ~= sum(w * f(x)) for X ~ N(mean, sigma^2).

    Weights are normalized to sum to 1.
    """
    if nodes < 1:
        raise DomainError(f"need at least one quadrature node, got {nodes}")
    t, w = np.polynomial.hermite.hermgauss(nodes)
    x = mean + math.sqrt(2.0) * sigma * t
    return x, w / math.sqrt(math.pi)


# ---------------------------------------------------------------------------
# Diagnostics on families and problems
# ---------------------------------------------------------------------------


def _mean(dist: Distribution) -> float:
    return dist.mean if isinstance(dist, Bernoulli) else float(dist.mean)


def null_mean_check(
    family: ActionFamily,
    action: float,
    null: Distribution,
    tolerance: float = 1e-9,
    nodes: int = 41,
) -> bool:
    """True when E_null[payoff(action, x)] <= 1 + tolerance.

    The Bernoulli check is closed form, the Gaussian one integrates the
    payoff by Gauss-Hermite quadrature, and the coin-bet check uses
    ``E[1 + a (x - m)] = 1 + a (mean - m)``.
    """
    _check_action(family, action)
    if isinstance(family, BernoulliBet):
        if not isinstance(null, Bernoulli):
            raise VariantMismatchError("BernoulliBet requires a Bernoulli null")
        if null.p != family.p0:
            raise DomainError(
                f"family p0={family.p0} does not match the null p={null.p}"
            )
        e0, e1 = payoff_pair(family, action)
        mean_value = null.p * e1 + (1.0 - null.p) * e0
    elif isinstance(family, GaussianShift):
        if not isinstance(null, Gaussian):
            raise VariantMismatchError("GaussianShift requires a Gaussian null")
        if null.sigma != family.sigma or null.mean != family.center:
            raise DomainError("GaussianShift must be centred on the null")
        x, w = gauss_hermite(null.mean, null.sigma, nodes)
        s2 = family.sigma * family.sigma
        mean_value = float(
            np.dot(w, np.exp(action * (x - family.center) / s2 - action * action / (2.0 * s2)))
        )
    else:
        mean_value = 1.0 + action * (_mean(null) - family.m)
    return mean_value <= 1.0 + tolerance


def _check_family(problem: TestingProblem, family: ActionFamily) -> None:
    if isinstance(family, BernoulliBet):
        if problem.variant != "bernoulli" or family.p0 != problem.p0:
            raise VariantMismatchError(
                "family must bet against the problem's null (BernoulliBet p0 mismatch)"
            )
    elif isinstance(family, GaussianShift):
        if (
            problem.variant != "gaussian"
            or family.sigma != problem.sigma
            or family.center != problem.null.mean
        ):
            raise VariantMismatchError(
                "family must bet against the problem's null (GaussianShift mismatch)"
            )
    else:
        raise DomainError("coin bets are not supported by problem-level operations")


def log_growth(problem: TestingProblem, family: ActionFamily, action: float) -> float:
    """Expected log payoff per round under the alternative.

    Returns ``-inf`` when the payoff is zero on an outcome of positive
    alternative mass (Bernoulli a in {0, 1}); the caller must check
    ``math.isinf`` before using the value in arithmetic.
    """
    _check_family(problem, family)
    _check_action(family, action)
    if problem.variant == "bernoulli":
        p0, p1 = problem.p0, problem.p1
        if (action == 0.0 and p1 > 0.0) or (action == 1.0 and p1 < 1.0):
            return -math.inf
        total = 0.0
        if p1 > 0.0:
            total += p1 * math.log(action / p0)
        if p1 < 1.0:
            total += (1.0 - p1) * math.log((1.0 - action) / (1.0 - p0))
        return total
    s2 = problem.sigma * problem.sigma
    # E_pi1[a (x - c)/s2 - a^2/(2 s2)] with E_pi1[x - c] = delta.
    return action * problem.delta / s2 - action * action / (2.0 * s2)


# ---------------------------------------------------------------------------
# Divergences and tilts
# ---------------------------------------------------------------------------


def kl(alternative: Distribution, null: Distribution) -> float:
    """KL(alternative || null) in nats; raises when infinite."""
    va, vn = _variant(alternative), _variant(null)
    if va != vn:
        raise VariantMismatchError("KL requires distributions of one variant")
    if va == "bernoulli":
        p1, p0 = alternative.p, null.p
        if (p0 == 0.0 and p1 > 0.0) or (p0 == 1.0 and p1 < 1.0):
            raise InfiniteDivergenceError(
                f"KL(Ber({p1}) || Ber({p0})) is infinite"
            )
        total = 0.0
        if p1 > 0.0:
            total += p1 * math.log(p1 / p0)
        if p1 < 1.0:
            total += (1.0 - p1) * math.log((1.0 - p1) / (1.0 - p0))
        return total
    d = alternative.mean - null.mean
    s0, s1 = null.sigma, alternative.sigma
    return math.log(s0 / s1) + (s1 * s1 + d * d) / (2.0 * s0 * s0) - 0.5


def renyi(order: float, alternative: Distribution, null: Distribution) -> float:
    """Renyi divergence D_order(alternative || null) for order > 1."""
    if not (math.isfinite(order) and order > 1.0):
        raise DomainError(f"Renyi order must be a finite number > 1, got {order}")
    va, vn = _variant(alternative), _variant(null)
    if va != vn:
        raise VariantMismatchError("Renyi divergence requires one variant")
    if va == "bernoulli":
        p1, p0 = alternative.p, null.p
        if (p0 == 0.0 and p1 > 0.0) or (p0 == 1.0 and p1 < 1.0):
            raise InfiniteDivergenceError("Renyi moment is infinite (support mismatch)")
        total = 0.0
        if p1 > 0.0:
            total += math.exp(order * math.log(p1) + (1.0 - order) * math.log(p0))
        if p1 < 1.0:
            total += math.exp(
                order * math.log(1.0 - p1) + (1.0 - order) * math.log(1.0 - p0)
            )
        return math.log(total) / (order - 1.0)
    if alternative.sigma != null.sigma:
        raise DomainError("Renyi closed form requires equal sigmas")
    d = alternative.mean - null.mean
    return order * d * d / (2.0 * null.sigma * null.sigma)


def tilt(problem: TestingProblem, eta: float) -> Distribution:
    """Exponential tilt of the null toward the alternative at exponent eta.

    The tilt reweights the null by ``(d pi1 / d pi0)^(1/(1-eta))`` and
    renormalizes; eta = 0 returns the alternative itself.  For equal-sigma
    Gaussians this is a mean shift of ``delta/(1-eta)`` from the null mean.
    """
    if not (0.0 <= eta < 1.0):
        raise DomainError(f"tilt exponent must lie in [0, 1), got {eta}")
    if eta == 0.0:
        return problem.alternative
    q = 1.0 / (1.0 - eta)
    if problem.variant == "bernoulli":
        p0, p1 = problem.p0, problem.p1
        if p1 == 0.0 or p1 == 1.0:
            # Degenerate alternative: every positive tilt is the alternative.
            return Bernoulli(p1)
        l1 = q * math.log(p1 / p0)
        l0 = q * math.log((1.0 - p1) / (1.0 - p0))
        m = max(l1, l0)
        w1 = p0 * math.exp(l1 - m)
        w0 = (1.0 - p0) * math.exp(l0 - m)
        return Bernoulli(w1 / (w1 + w0))
    return Gaussian(problem.null.mean + q * problem.delta, problem.sigma)
