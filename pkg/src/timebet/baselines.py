"""Horizon-aware heuristic betting strategies for Bernoulli deadlines.

Two simulated baselines that know the deadline but not the alternative:
a target-recalculating rule and a schedule-mixed empirical Kelly rule.
Both recompute their bet each round from the observed outcomes and the
rounds left, and both remain valid tests for free: every bet they place
is a probability q on the next outcome being one, and the payoff pair
(q / p0 on a one, (1 - q) / (1 - p0) on a zero) has null mean exactly
one no matter how q was chosen.  A boundary-capped constant bet
completes the set.

The exact stake formulas below are frozen artifact choices; the rules
are specified at recipe level only, so fidelity to their sources is
qualitative (curve shape), not numeric.

Target-recalculating rule (star-bets).  Before round t with wealth W,
c ones seen among the n = t - 1 outcomes so far, and r = T - n rounds
left, the rule targets the per-round log growth g = log(1/(alpha W))/r
needed to reach the rejection boundary by the deadline.  It uses the
add-half mean estimate m = (c + 1/2)/(n + 1), the stake edge
b = m - p0, and the second-moment proxy
v = min(avg((x - p0)^2) + p0(1 - p0) r/T, p0(1 - p0)), whose
horizon-dependent bonus starts at the null variance and decays as the
deadline nears, handing over to the data.  When the quadratic growth
proxy b*s - v*s^2/2 can reach g, it bets the smallest root; when it
cannot, it bets s = sqrt(2 g / v), the stake maximising the normal
approximation of the probability of reaching the boundary by the
deadline.  The two branches meet at the vertex b/v, so the stake is
continuous in the state and grows as the deadline approaches with
wealth lagging.  Both yield to an exact one-step check: whenever some
valid stake reaches the boundary on a favourable outcome, the rule
strikes, betting just past that stake (the maximal one in the final
round, where failing leaves nothing worth protecting).  Stakes are
clipped to [0, 1/p0].  Wealth at or past the boundary, or rounds past
the deadline, bet nothing.

Schedule-mixed Kelly (schedule-mix).  Six parallel wealth processes
share one outcome stream.  Each bets a convex mix of the empirical
Kelly action (the add-half mean estimate, clipped to [p0, 1]) and the
maximal action 1, with a mixing weight that ramps from 0 at its onset
round to 1 at the deadline, linearly or quadratically, for onsets at
0.25 T, 0.5 T and 0.75 T.  Rejection uses the average of the six
wealth processes, itself a valid e-process since each factor has null
mean one.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError
from .model import TestingProblem, canonical_family
from .simulate import CappedConstantBet

__all__ = [
    "SCHEDULES",
    "schedule_weights",
    "star_bets_action",
    "schedule_mix_actions",
    "StarBetsStrategy",
    "ScheduleMixStrategy",
    "capped_constant",
]

# (ramp shape, onset as a fraction of the deadline) for the six mixing
# schedules, in a fixed order so wealth columns line up across calls.
SCHEDULES = (
    ("linear", 0.25),
    ("linear", 0.5),
    ("linear", 0.75),
    ("quadratic", 0.25),
    ("quadratic", 0.5),
    ("quadratic", 0.75),
)

_TINY = 1e-300
# Strike bets overshoot the boundary by this relative margin.
_MARGIN = 1.0 + 1e-9


def _check_round(t: int) -> int:
    if not (isinstance(t, (int, np.integer)) and t >= 1):
        raise DomainError(f"round must be a positive integer, got {t!r}")
    return int(t)


def _check_deadline(deadline: int) -> int:
    if not (isinstance(deadline, (int, np.integer)) and deadline >= 1):
        raise DomainError(f"deadline must be a positive integer, got {deadline!r}")
    return int(deadline)


def _check_p0(p0: float) -> float:
    p0 = float(p0)
    if not 0.0 < p0 < 1.0:
        raise DomainError(f"p0 must lie in (0, 1), got {p0}")
    return p0


def _check_bernoulli(problem: TestingProblem, what: str) -> None:
    if problem.variant != "bernoulli":
        raise DomainError(f"{what} is defined for Bernoulli problems only")


def _star_actions(
    t: int,
    deadline: int,
    wealth: np.ndarray,
    ones: np.ndarray,
    p0: float,
    alpha: float,
) -> np.ndarray:
    """Round-t actions of the target-recalculating rule, elementwise.

    ``wealth`` and ``ones`` describe each path after t - 1 rounds.
    Returns canonical actions in [p0, 1]; p0 means no bet.
    """
    wealth = np.asarray(wealth, dtype=np.float64)
    ones = np.asarray(ones, dtype=np.float64)
    flat = np.full(wealth.shape, p0)
    seen = t - 1
    remaining = deadline - seen
    if remaining <= 0:
        return flat
    null_var = p0 * (1.0 - p0)
    mean = (ones + 0.5) / (seen + 1.0)
    if seen > 0:
        proxy = (ones * (1.0 - p0) ** 2 + (seen - ones) * p0**2) / seen
    else:
        proxy = np.zeros(wealth.shape)
    var = np.minimum(proxy + null_var * remaining / deadline, null_var)
    z = alpha * wealth
    # A broke path has z = 0; the guarded log keeps the goal finite
    # instead of producing NaNs, and the clip below bounds its stake.
    goal = -np.log(np.maximum(z, _TINY)) / remaining
    edge = mean - p0
    disc = edge**2 - 2.0 * var * goal
    root = (edge - np.sqrt(np.maximum(disc, 0.0))) / var
    bold = np.sqrt(2.0 * np.maximum(goal, 0.0) / var)
    stake = np.where(disc >= 0.0, root, bold)
    # Exact one-step feasibility overrides the proxy: when some valid
    # stake reaches the boundary on a one, strike.  The margin keeps
    # the crossing strict under float rounding; the final round plays
    # the maximal stake instead, since its zero branch is worthless.
    needed = (_MARGIN / np.maximum(z, _TINY) - 1.0) / (1.0 - p0)
    strike = np.full(wealth.shape, 1.0 / p0) if remaining == 1 else needed
    stake = np.where(needed <= 1.0 / p0, strike, stake)
    stake = np.clip(stake, 0.0, 1.0 / p0)
    # Wealth already at the boundary: the game is over, stop betting.
    return np.where(z < 1.0, p0 + stake * null_var, flat)


def star_bets_action(
    t: int, deadline: int, wealth: float, ones: int, p0: float, alpha: float
) -> float:
    """Canonical action the target-recalculating rule bets at round t.

    ``wealth`` is the current e-value and ``ones`` the count of ones
    among the t - 1 outcomes observed so far.  See the module docstring
    for the frozen stake formula.
    """
    t = _check_round(t)
    deadline = _check_deadline(deadline)
    p0 = _check_p0(p0)
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    wealth = float(wealth)
    if not (np.isfinite(wealth) and wealth >= 0.0):
        raise DomainError(f"wealth must be finite and nonnegative, got {wealth}")
    if not 0 <= int(ones) <= t - 1:
        raise DomainError(f"ones count must lie in 0..{t - 1}, got {ones}")
    out = _star_actions(
        t, deadline, np.array([wealth]), np.array([int(ones)]), p0, alpha
    )
    return float(out[0])


def schedule_weights(t: int, deadline: int) -> np.ndarray:
    """Mixing weights of the six schedules for the round-t bet.

    Zero through the onset round, one at the deadline, ramping linearly
    or with the square of the elapsed fraction in between.
    """
    t = _check_round(t)
    deadline = _check_deadline(deadline)
    weights = np.empty(len(SCHEDULES))
    for i, (ramp, fraction) in enumerate(SCHEDULES):
        onset = fraction * deadline
        x = min(max((t - onset) / (deadline - onset), 0.0), 1.0)
        weights[i] = x * x if ramp == "quadratic" else x
    return weights


def schedule_mix_actions(t: int, deadline: int, ones: int, p0: float) -> np.ndarray:
    """The six mixed canonical actions for round t.

    Each entry blends the empirical Kelly action (add-half mean of the
    t - 1 outcomes seen, clipped to [p0, 1]) toward the maximal action 1
    by its schedule's weight.
    """
    p0 = _check_p0(p0)
    weights = schedule_weights(t, deadline)
    if not 0 <= int(ones) <= t - 1:
        raise DomainError(f"ones count must lie in 0..{t - 1}, got {ones}")
    mean = (int(ones) + 0.5) / t
    kelly = min(max(mean, p0), 1.0)
    return (1.0 - weights) * kelly + weights


class StarBetsStrategy:
    """Finite-horizon target-recalculating bets against a Bernoulli null.

    Recomputes the stake every round from the wealth still missing to
    the rejection boundary and the rounds left; see the module
    docstring for the formula.  Past the deadline it stops betting, so
    wealth freezes.
    """

    state_kind = "path"

    def __init__(self, problem: TestingProblem, deadline: int, label: str | None = None):
        _check_bernoulli(problem, "the target-recalculating rule")
        self.problem = problem
        self.deadline = _check_deadline(deadline)
        self.label = label if label is not None else f"star-bets[{self.deadline}]"
        self._p0 = problem.p0
        self._alpha = problem.alpha

    def initial_columns(self, paths: int) -> dict[str, np.ndarray]:
        return {
            "w": np.ones(paths, dtype=np.float64),
            "ones": np.zeros(paths, dtype=np.int64),
        }

    def advance(self, t: int, outcomes: np.ndarray, columns: dict[str, np.ndarray]) -> None:
        actions = _star_actions(
            t, self.deadline, columns["w"], columns["ones"], self._p0, self._alpha
        )
        up = outcomes > 0.5
        pay = np.where(up, actions / self._p0, (1.0 - actions) / (1.0 - self._p0))
        columns["w"] *= pay
        columns["ones"] += up

    def evidence(self, t: int, columns: dict[str, np.ndarray]) -> np.ndarray:
        return columns["w"]


class ScheduleMixStrategy:
    """Six schedule-mixed Kelly wealth processes judged by their average.

    Every schedule sees the same outcomes but bets its own blend of the
    empirical Kelly action and the all-in action; rejection uses the
    average wealth, a valid e-process because each factor has null mean
    one.  Past the deadline all six freeze.
    """

    state_kind = "path"

    def __init__(self, problem: TestingProblem, deadline: int, label: str | None = None):
        _check_bernoulli(problem, "schedule mixing")
        self.problem = problem
        self.deadline = _check_deadline(deadline)
        self.label = label if label is not None else f"schedule-mix[{self.deadline}]"
        self._p0 = problem.p0

    def initial_columns(self, paths: int) -> dict[str, np.ndarray]:
        return {
            "w": np.ones((paths, len(SCHEDULES)), dtype=np.float64),
            "ones": np.zeros(paths, dtype=np.int64),
        }

    def advance(self, t: int, outcomes: np.ndarray, columns: dict[str, np.ndarray]) -> None:
        up = outcomes > 0.5
        if t <= self.deadline:
            p0 = self._p0
            mean = (columns["ones"] + 0.5) / t
            kelly = np.clip(mean, p0, 1.0)
            weights = schedule_weights(t, self.deadline)
            actions = (1.0 - weights) * kelly[:, None] + weights
            pay = np.where(
                up[:, None], actions / p0, (1.0 - actions) / (1.0 - p0)
            )
            columns["w"] *= pay
        columns["ones"] += up

    def evidence(self, t: int, columns: dict[str, np.ndarray]) -> np.ndarray:
        return columns["w"].mean(axis=1)


def capped_constant(problem: TestingProblem, action: float, label: str | None = None):
    """Constant canonical bet with payoffs capped at the boundary.

    Builds the problem's canonical Bernoulli family and wraps the
    action in :class:`~timebet.simulate.CappedConstantBet`, which cuts
    any payoff that would overshoot rescaled wealth 1 and moves the
    saved null mass to the other outcome.
    """
    _check_bernoulli(problem, "capping")
    return CappedConstantBet(problem, canonical_family(problem), action, label=label)
