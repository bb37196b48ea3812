"""Stationary tilted strategies for exponentially decaying rewards.

For the reward exp(-t/T), the optimal constant strategy bets a tilted
alternative: reweight the null by ``(d pi1 / d pi0)^(1/(1-eta))`` and pick
the exponent ``eta_star`` in (0, 1) so that the per-round growth

    g(eta) = (1 - eta) * log E_pi0[(d pi1 / d pi0)^(1/(1-eta))]

equals ``1/T``.  The optimal expected reward starting from rescaled wealth
z = alpha * w then behaves like z^eta_star, which gives computable bounds
``(alpha/Phi)^eta_star <= E[exp(-tau/T)] <= alpha^eta_star`` with Phi a
bound on the tilted payoff (Phi exists for Bernoulli, not for Gaussian
shifts).

The same module hosts the growth/power diagnostics for arbitrary constant
actions: the expected log payoff ``gamma`` decides whether the strategy
rejects with probability one, and when ``gamma < 0`` the exponent kappa
solving ``E_pi1[payoff^kappa] = 1`` bounds the total rejection probability
by ``(alpha w / Phi)^kappa <= P <= (alpha w)^kappa``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import model
from .errors import DomainError, NoSolutionError, SolverError
from .model import (
    ActionFamily,
    Bernoulli,
    BernoulliBet,
    Distribution,
    Gaussian,
    GaussianShift,
    TestingProblem,
)

__all__ = [
    "EdoSolution",
    "PowerExponent",
    "solve",
    "solve_gaussian",
    "solve_bernoulli",
    "stationary_rate",
    "value_bounds",
    "power_exponent",
    "is_power_one",
    "gro_action",
]

_ETA_BRACKET = (1e-9, 1.0 - 1e-9)
_ETA_TOL = 1e-12
_KAPPA_BRACKET = (1e-9, 64.0)
_KAPPA_CEILING = 2.0**40


@dataclass(frozen=True)
class PowerExponent:
    """Power diagnostics for a constant action whose drift is negative.

    ``kappa`` solves E_pi1[payoff^kappa] = 1; the total rejection
    probability from wealth w lies in [lower(w), upper(w)].  ``lower`` is
    None when the payoff is unbounded (Gaussian shifts).
    """

    kappa: float
    payoff_bound: float | None
    alpha: float

    def bounds(self, wealth: float = 1.0) -> tuple[float | None, float]:
        z = self.alpha * wealth
        upper = min(1.0, z**self.kappa)
        if self.payoff_bound is None:
            return (None, upper)
        return (min(1.0, (z / self.payoff_bound) ** self.kappa), upper)


@dataclass(frozen=True)
class EdoSolution:
    """Solution of the stationary-tilt equation for one problem/timescale."""

    problem: TestingProblem
    timescale: float
    eta_star: float
    renyi_order: float
    action: float
    tilted: Distribution
    payoff_bound: float | None
    gamma: float
    power_one: bool
    kappa: float | None

    def value_bounds(self, wealth: float = 1.0) -> tuple[float | None, float]:
        return value_bounds(self, wealth=wealth)

    def power_bounds(self, wealth: float = 1.0) -> tuple[float | None, float] | None:
        if self.kappa is None:
            return None
        pe = PowerExponent(self.kappa, self.payoff_bound, self.problem.alpha)
        return pe.bounds(wealth)


def _check_timescale(timescale: float) -> None:
    if not (math.isfinite(timescale) and timescale > 0.0):
        raise DomainError(f"timescale must be positive and finite, got {timescale}")


def stationary_rate(problem: TestingProblem, eta: float) -> float:
    """g(eta) = (1 - eta) log E_pi0[(d pi1/d pi0)^(1/(1-eta))].

    Strictly increasing in eta with g(0+) -> 0; the stationary tilt solves
    g(eta) = 1/T.
    """
    if not (0.0 < eta < 1.0):
        raise DomainError(f"eta must lie in (0, 1), got {eta}")
    q = 1.0 / (1.0 - eta)
    if problem.variant == "bernoulli":
        p0, p1 = problem.p0, problem.p1
        t1 = math.log(p0) + q * math.log(p1 / p0) if p1 > 0.0 else -math.inf
        t0 = (
            math.log(1.0 - p0) + q * math.log((1.0 - p1) / (1.0 - p0))
            if p1 < 1.0
            else -math.inf
        )
        return (1.0 - eta) * np.logaddexp(t1, t0)
    # Equal-sigma Gaussian: E_pi0[L_eta] = exp(q(q-1) delta^2/(2 s^2)) and
    # (1-eta) q = 1, so g(eta) = (q-1) delta^2 / (2 s^2).
    d, s2 = problem.delta, problem.sigma**2
    return (q - 1.0) * d * d / (2.0 * s2)


def solve(problem: TestingProblem, timescale: float) -> EdoSolution:
    """Dispatch to the closed-form Gaussian or numeric Bernoulli solver."""
    if problem.variant == "gaussian":
        return solve_gaussian(problem, timescale)
    return solve_bernoulli(problem, timescale)


def solve_gaussian(problem: TestingProblem, timescale: float) -> EdoSolution:
    """Closed-form stationary tilt for equal-sigma Gaussian problems."""
    if problem.variant != "gaussian":
        raise DomainError("solve_gaussian needs a Gaussian problem")
    _check_timescale(timescale)
    d = problem.delta
    if d == 0.0:
        raise DomainError("degenerate alternative: zero mean shift")
    s2 = problem.sigma**2
    eta = 2.0 * s2 / (d * d * timescale + 2.0 * s2)
    order = 1.0 + 2.0 * s2 / (d * d * timescale)
    action = d + 2.0 * s2 / (d * timescale)
    tilted = Gaussian(problem.null.mean + action, problem.sigma)
    gamma = action * d / s2 - action * action / (2.0 * s2)
    power_one = timescale >= 2.0 * s2 / (d * d)
    kappa = None if power_one else 1.0 - 2.0 * d / action
    return EdoSolution(
        problem=problem,
        timescale=timescale,
        eta_star=eta,
        renyi_order=order,
        action=action,
        tilted=tilted,
        payoff_bound=None,
        gamma=gamma,
        power_one=power_one,
        kappa=kappa,
    )


def solve_bernoulli(problem: TestingProblem, timescale: float) -> EdoSolution:
    """Numeric stationary tilt for Bernoulli problems.

    Solves g(eta) = 1/T by bracketed root finding on [1e-9, 1-1e-9] to a
    1e-12 tolerance on eta; raises :class:`NoSolutionError` naming the
    feasible timescale range when 1/T is at or above sup g.
    """
    if problem.variant != "bernoulli":
        raise DomainError("solve_bernoulli needs a Bernoulli problem")
    _check_timescale(timescale)
    p0, p1 = problem.p0, problem.p1
    if p1 in (0.0, 1.0):
        raise DomainError("degenerate alternative: p1 must lie in (0, 1)")
    target = 1.0 / timescale
    lo, hi = _ETA_BRACKET
    if stationary_rate(problem, hi) <= target:
        # sup over eta of g, estimated on a log-spaced scan toward 1.
        etas = 1.0 - np.logspace(-9, -0.05, 120)
        sup_rate = max(stationary_rate(problem, float(e)) for e in etas)
        raise NoSolutionError(
            f"1/T = {target:.6g} is not below the growth ceiling "
            f"{sup_rate:.6g}; the tilt equation needs timescale "
            f"T > {1.0 / sup_rate:.6g}"
        )
    eta = float(
        brentq(lambda e: stationary_rate(problem, e) - target, lo, hi, xtol=_ETA_TOL)
    )
    tilted = model.tilt(problem, eta)
    if tilted.p in (0.0, 1.0):
        # Root sits where the tilted action saturates double precision, so
        # the solution is unrepresentable: report the numeric floor instead.
        lo_e, hi_e = _ETA_BRACKET
        for _ in range(100):
            mid = 0.5 * (lo_e + hi_e)
            if model.tilt(problem, mid).p in (0.0, 1.0):
                hi_e = mid
            else:
                lo_e = mid
        floor = stationary_rate(problem, lo_e)
        raise NoSolutionError(
            f"the stationary tilt at 1/T = {target:.6g} rounds to a "
            f"degenerate action in double precision; needs timescale "
            f"T > {1.0 / floor:.6g}"
        )
    family = BernoulliBet(p0)
    e0, e1 = model.payoff_pair(family, tilted.p)
    phi_bound = max(e0, e1)
    gamma = model.log_growth(problem, family, tilted.p)
    assert not math.isinf(gamma)  # interior action keeps both payoffs positive
    power_one = is_power_one(problem, family, tilted.p)
    kappa = None
    if gamma < 0.0:
        kappa = _kappa_root(p1, e0, e1)
    return EdoSolution(
        problem=problem,
        timescale=timescale,
        eta_star=eta,
        renyi_order=1.0 / (1.0 - eta),
        action=tilted.p,
        tilted=tilted,
        payoff_bound=phi_bound,
        gamma=gamma,
        power_one=power_one,
        kappa=kappa,
    )


def value_bounds(
    solution: EdoSolution, alpha: float | None = None, wealth: float = 1.0
) -> tuple[float | None, float]:
    """Sandwich on the optimal expected reward from wealth w.

    Returns ``((alpha w / Phi)^eta_star, (alpha w)^eta_star)``; the lower
    bound is None when no payoff bound exists (Gaussian shifts).
    """
    a = solution.problem.alpha if alpha is None else alpha
    if not (0.0 < a < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {a}")
    z = a * wealth
    if not (0.0 < z <= 1.0):
        raise DomainError(f"rescaled wealth alpha*w must lie in (0, 1], got {z}")
    upper = z**solution.eta_star
    if solution.payoff_bound is None:
        return (None, upper)
    return ((z / solution.payoff_bound) ** solution.eta_star, upper)


# ---------------------------------------------------------------------------
# Power diagnostics for constant actions
# ---------------------------------------------------------------------------


def _moment_bernoulli(p1: float, e0: float, e1: float, kappa: float) -> float:
    """E_pi1[payoff^kappa] for a two-point payoff; zero payoffs contribute 0."""
    total = 0.0
    if p1 > 0.0 and e1 > 0.0:
        total += p1 * math.exp(kappa * math.log(e1))
    if p1 < 1.0 and e0 > 0.0:
        total += (1.0 - p1) * math.exp(kappa * math.log(e0))
    return total


def _kappa_root(p1: float, e0: float, e1: float) -> float:
    """Positive root of E_pi1[payoff^kappa] = 1 for a drifting-down bet."""
    lo, hi = _KAPPA_BRACKET
    if _moment_bernoulli(p1, e0, e1, lo) >= 1.0:
        raise SolverError(
            f"kappa bracket failure: moment at {lo} is already >= 1 "
            "(drift is barely negative; no resolvable root above the bracket floor)"
        )
    while _moment_bernoulli(p1, e0, e1, hi) <= 1.0:
        hi *= 2.0
        if hi > _KAPPA_CEILING:
            raise SolverError(
                f"kappa root not bracketed below {_KAPPA_CEILING}; "
                "the payoff moment never recrosses 1"
            )
    return float(
        brentq(lambda k: _moment_bernoulli(p1, e0, e1, k) - 1.0, lo, hi, xtol=1e-13)
    )


def is_power_one(problem: TestingProblem, family: ActionFamily, action: float) -> bool:
    """True when the constant action rejects eventually with probability one.

    Criterion: positive expected log payoff under the alternative, or zero
    drift with positive alternative mass on log payoff > 0.
    """
    gamma = model.log_growth(problem, family, action)
    if math.isinf(gamma):
        return False
    if gamma > 0.0:
        return True
    if gamma < 0.0:
        return False
    if isinstance(family, BernoulliBet):
        e0, e1 = model.payoff_pair(family, action)
        p1 = problem.p1
        return (p1 > 0.0 and e1 > 1.0) or (p1 < 1.0 and e0 > 1.0)
    # Gaussian shift: any nonzero action puts mass on both signs of log payoff.
    return action != 0.0


def power_exponent(
    problem: TestingProblem, family: ActionFamily, action: float
) -> PowerExponent | None:
    """Kappa solving E_pi1[payoff^kappa] = 1 for a negative-drift action.

    Returns None when the drift is nonnegative (the exponent is not
    applicable; consult :func:`is_power_one` for the power-one verdict).
    """
    model._check_family(problem, family)
    gamma = model.log_growth(problem, family, action)
    if not math.isinf(gamma) and gamma >= 0.0:
        return None
    if isinstance(family, BernoulliBet):
        e0, e1 = model.payoff_pair(family, action)
        if max(e0, e1) <= 1.0:
            raise SolverError("no rejection is ever possible for this action")
        kappa = _kappa_root(problem.p1, e0, e1)
        return PowerExponent(kappa, max(e0, e1), problem.alpha)
    # Gaussian shift with gamma < 0: exact exponent 1 - 2 delta / a.
    d = problem.delta
    kappa = 1.0 - 2.0 * d / action
    if kappa <= 0.0:
        raise SolverError("inconsistent drift sign for Gaussian power exponent")
    return PowerExponent(kappa, None, problem.alpha)


def gro_action(problem: TestingProblem) -> float:
    """Action of the growth-rate-optimal bet: the likelihood ratio itself.

    Bernoulli problems bet a = p1; Gaussian problems shift by the mean
    difference.  Its expected log payoff equals KL(pi1 || pi0).
    """
    if problem.variant == "bernoulli":
        return problem.p1
    return problem.delta
