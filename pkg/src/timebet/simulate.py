"""Monte Carlo evaluation of betting strategies and their stopping times.

The engine advances simulated paths through per-round outcome blocks,
asks the strategy for its evidence value after each round, and records
the first round where evidence reaches 1/alpha.  Outcome draws for
round t come from a counter-based generator keyed by (seed, t) and path
i always reads element i of the block, so the stream seen by a path is
a deterministic function of (master seed, path index): results do not
depend on batch size, execution order, or worker count, and strategies
evaluated under the same seed share outcomes (common random numbers).

Strategies are duck-typed.  A strategy owns named state columns, one
entry per path, and must implement::

    label            display name, unique within a comparison
    state_kind       "integer" if the columns are small integers that
                     determine all future behaviour (exact sweeps can
                     then merge equal rows), "path" otherwise
    initial_columns(paths)        -> dict of fresh per-path arrays
    advance(t, outcomes, columns)    update rows in place, elementwise
    evidence(t, columns)          -> current e-values, one per path

``advance`` must act row by row: entry i of every column describes path
i and ``outcomes[i]`` is its round-t observation.  Keeping all state in
the columns makes strategy objects reusable and lets the exact
enumeration engine drive them over prefix states instead of paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Protocol

import numpy as np
from scipy.special import ndtri

from .bellman import MarkovPolicy, StationarySolution
from .errors import DomainError
from .model import TestingProblem, _check_family, action_interval, payoff_pair
from .reward import RewardSpec, evaluate, evaluate_array

__all__ = [
    "PATH_PRESETS",
    "SimConfig",
    "StoppingDistribution",
    "RewardEstimate",
    "StrategyOutcome",
    "Strategy",
    "ConstantBet",
    "CappedConstantBet",
    "PolicyStrategy",
    "run",
    "expected_reward",
    "wilson_interval",
    "compare",
    "comparison_records",
]

# Path-count presets for quick checks, routine runs, and final figures.
PATH_PRESETS = {"quick": 5_000, "standard": 20_000, "full": 300_000}

_BELOW_ONE = float(np.nextafter(1.0, 0.0))


class Strategy(Protocol):
    """Structural interface for betting strategies; see the module docstring."""

    label: str
    state_kind: str

    def initial_columns(self, paths: int) -> dict[str, np.ndarray]: ...

    def advance(
        self, t: int, outcomes: np.ndarray, columns: dict[str, np.ndarray]
    ) -> None: ...

    def evidence(self, t: int, columns: dict[str, np.ndarray]) -> np.ndarray: ...


# ---------------------------------------------------------------------------
# Configuration and results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    """Engine parameters: horizon, path count, seed, measure, bookkeeping."""

    horizon: int
    paths: int = PATH_PRESETS["standard"]
    seed: int = 0
    measure: str = "alternative"
    crn: bool = True
    truncation: str = "zero"
    wealth_rounds: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise DomainError(f"horizon must be >= 1, got {self.horizon}")
        if self.paths < 1:
            raise DomainError(f"path count must be >= 1, got {self.paths}")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must fit in an unsigned 64-bit integer")
        if self.measure not in ("null", "alternative"):
            raise DomainError(f"measure must be 'null' or 'alternative', got {self.measure!r}")
        # Paths still running at the horizon contribute reward zero; their
        # largest possible contribution is reported as a separate bound.
        if self.truncation != "zero":
            raise DomainError(f"unsupported truncation policy {self.truncation!r}")
        rounds = tuple(int(t) for t in self.wealth_rounds)
        if any(t < 1 or t > self.horizon for t in rounds):
            raise DomainError("wealth_rounds entries must lie in 1..horizon")
        object.__setattr__(self, "wealth_rounds", rounds)


@dataclass(frozen=True, eq=False)
class StoppingDistribution:
    """Law of the rejection round tau over rounds 1..horizon.

    ``masses[t]`` is the probability of first crossing at round t
    (index 0 is identically zero); whatever is missing from the total
    never rejects within the horizon.  Exact distributions carry zero
    standard errors, Monte Carlo ones the usual binomial per-bin SE.
    """

    horizon: int
    masses: np.ndarray
    estimator: str
    paths: int | None = None
    measure: str = "alternative"
    label: str = ""
    stopped_wealth: Mapping[int, tuple[float, float]] | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise DomainError(f"horizon must be >= 1, got {self.horizon}")
        if self.estimator not in ("exact", "monte-carlo"):
            raise DomainError(f"estimator must be 'exact' or 'monte-carlo', got {self.estimator!r}")
        if self.estimator == "monte-carlo" and (self.paths is None or self.paths < 1):
            raise DomainError("monte-carlo distributions need the path count")
        if self.measure not in ("null", "alternative"):
            raise DomainError(f"measure must be 'null' or 'alternative', got {self.measure!r}")
        masses = np.asarray(self.masses, dtype=np.float64).copy()
        if masses.shape != (self.horizon + 1,):
            raise DomainError("masses must have one entry per round 0..horizon")
        if not np.all(np.isfinite(masses)):
            raise DomainError("masses must be finite")
        if masses[0] != 0.0:
            raise DomainError("round 0 carries no rejection mass")
        if masses.min() < -1e-12:
            raise DomainError("masses must be nonnegative")
        np.maximum(masses, 0.0, out=masses)
        if masses.sum() > 1.0 + 1e-9:
            raise DomainError("masses must sum to at most 1")
        masses.flags.writeable = False
        object.__setattr__(self, "masses", masses)

    @property
    def cdf(self) -> np.ndarray:
        out = self._cache.get("cdf")
        if out is None:
            out = np.cumsum(self.masses)
            out.flags.writeable = False
            self._cache["cdf"] = out
        return out

    @property
    def never_reject(self) -> float:
        return max(0.0, 1.0 - float(self.cdf[-1]))

    @property
    def standard_errors(self) -> np.ndarray:
        """Per-bin SEs: zero for exact laws, binomial for Monte Carlo."""
        if self.estimator == "exact":
            return np.zeros(self.horizon + 1)
        m = self.masses
        return np.sqrt(m * (1.0 - m) / self.paths)

    def rejection_by(self, t: int) -> float:
        """P(tau <= t); rounds past the horizon see the final CDF value."""
        if t < 0:
            raise DomainError(f"round must be nonnegative, got {t}")
        return float(self.cdf[min(t, self.horizon)])


@dataclass(frozen=True)
class RewardEstimate:
    """Expected reward with its SE and the unobserved-tail bound."""

    estimate: float
    standard_error: float
    truncation_bound: float


@dataclass(frozen=True)
class StrategyOutcome:
    """One row of a comparison: a strategy's law of tau plus rewards."""

    label: str
    distribution: StoppingDistribution
    rewards: tuple[tuple[RewardSpec, RewardEstimate], ...] = ()


# ---------------------------------------------------------------------------
# Outcome streams
# ---------------------------------------------------------------------------


def _round_block(seed: int, t: int, paths: int, normal: bool) -> np.ndarray:
    generator = np.random.Generator(
        np.random.Philox(key=np.array([seed, t], dtype=np.uint64))
    )
    if normal:
        return generator.standard_normal(paths)
    return generator.random(paths)


def _outcome_block(
    problem: TestingProblem, measure: str, seed: int, t: int, paths: int
) -> np.ndarray:
    """Round-t observations for every path under the requested measure.

    The null and alternative transform the same base draws, so runs
    under the two measures are coupled as tightly as the strategies are.
    """
    if problem.variant == "bernoulli":
        uniforms = _round_block(seed, t, paths, normal=False)
        p = problem.p1 if measure == "alternative" else problem.p0
        return (uniforms < p).astype(np.float64)
    draws = _round_block(seed, t, paths, normal=True)
    dist = problem.alternative if measure == "alternative" else problem.null
    return dist.mean + dist.sigma * draws


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------


def _require_interval(family, action: float) -> float:
    lo, hi = action_interval(family)
    if not lo <= action <= hi:
        raise DomainError(f"action {action} outside the family interval [{lo}, {hi}]")
    return float(action)


class ConstantBet:
    """Bet the same action every round."""

    def __init__(self, problem: TestingProblem, family, action: float, label: str | None = None):
        _check_family(problem, family)
        self.problem = problem
        self.family = family
        self.action = _require_interval(family, action)
        self.label = label if label is not None else f"constant[{self.action:g}]"
        if problem.variant == "bernoulli":
            # Wealth is a function of the running count of ones, so exact
            # sweeps can merge states; recompute it canonically per round.
            self.state_kind = "integer"
            self._e0, self._e1 = payoff_pair(family, self.action)
        else:
            self.state_kind = "path"
            sigma2 = family.sigma**2
            self._center = family.center
            self._scale = self.action / sigma2
            self._drift = self.action**2 / (2.0 * sigma2)

    def initial_columns(self, paths: int) -> dict[str, np.ndarray]:
        if self.state_kind == "integer":
            return {"ones": np.zeros(paths, dtype=np.int64)}
        return {"logw": np.zeros(paths, dtype=np.float64)}

    def advance(self, t: int, outcomes: np.ndarray, columns: dict[str, np.ndarray]) -> None:
        if self.state_kind == "integer":
            columns["ones"] += outcomes > 0.5
        else:
            columns["logw"] += self._scale * (outcomes - self._center) - self._drift

    def evidence(self, t: int, columns: dict[str, np.ndarray]) -> np.ndarray:
        # Overflow to inf only happens on paths that crossed long ago.
        with np.errstate(over="ignore"):
            if self.state_kind == "integer":
                ones = columns["ones"].astype(np.float64)
                return np.power(self._e1, ones) * np.power(self._e0, t - ones)
            return np.exp(columns["logw"])


class CappedConstantBet:
    """Constant Bernoulli bet with payoffs capped at the rejection boundary.

    Whenever the pending payoff would carry rescaled wealth past 1, it
    is cut so the path lands exactly on the boundary and the saved null
    mass moves to the other outcome, keeping the null mean at 1.  The
    boundary landing writes 1/alpha directly, so crossings are exact.
    """

    state_kind = "path"

    def __init__(self, problem: TestingProblem, family, action: float, label: str | None = None):
        _check_family(problem, family)
        if problem.variant != "bernoulli":
            raise DomainError("capping is defined for Bernoulli bets only")
        self.problem = problem
        self.family = family
        self.action = _require_interval(family, action)
        self.label = label if label is not None else f"capped[{self.action:g}]"
        self._e0, self._e1 = payoff_pair(family, self.action)
        self._p0 = problem.p0
        self._alpha = problem.alpha
        self._threshold = 1.0 / problem.alpha

    def initial_columns(self, paths: int) -> dict[str, np.ndarray]:
        return {"w": np.ones(paths, dtype=np.float64)}

    def advance(self, t: int, outcomes: np.ndarray, columns: dict[str, np.ndarray]) -> None:
        w = columns["w"]
        z = self._alpha * w
        # A dead path (wealth 0 after an all-or-nothing bet) divides by
        # zero here, but neither cap can fire for it.
        with np.errstate(divide="ignore"):
            inv = 1.0 / z
        p0 = self._p0
        cap1 = z * self._e1 >= 1.0
        e0 = np.where(cap1, (1.0 - p0 * inv) / (1.0 - p0), self._e0)
        e1 = np.where(cap1, inv, self._e1)
        cap0 = z * e0 >= 1.0
        e1 = np.where(cap0, (1.0 - (1.0 - p0) * inv) / p0, e1)
        e0 = np.where(cap0, inv, e0)
        ones = outcomes > 0.5
        hit = np.where(ones, cap1, cap0)
        w[:] = np.where(hit, self._threshold, w * np.where(ones, e1, e0))

    def evidence(self, t: int, columns: dict[str, np.ndarray]) -> np.ndarray:
        return columns["w"]


class PolicyStrategy:
    """Play a solver policy table, interpolating actions in log wealth.

    Accepts a finite-horizon ``MarkovPolicy`` or a ``StationarySolution``.
    Off-grid wealth reads the action row linearly in log z, clamped at
    the end nodes.  Rounds past a finite table place flat bets.  Capped
    policies replay the same payoff capping used while solving, landing
    exactly on the boundary.
    """

    state_kind = "path"

    def __init__(self, problem: TestingProblem, policy, label: str | None = None):
        if not isinstance(policy, (MarkovPolicy, StationarySolution)):
            raise DomainError("policy must be a MarkovPolicy or StationarySolution")
        _check_family(problem, policy.family)
        self.problem = problem
        self.policy = policy
        self._stationary = isinstance(policy, StationarySolution)
        self.label = label if label is not None else (
            "stationary-policy" if self._stationary else "policy"
        )
        self._capped = bool(policy.capped)
        if self._capped and problem.variant != "bernoulli":
            raise DomainError("capping is defined for Bernoulli bets only")
        self._log_nodes = policy.grid.log_nodes
        self._alpha = problem.alpha
        self._threshold = 1.0 / problem.alpha
        if problem.variant == "bernoulli":
            self._p0 = problem.p0
        else:
            self._sigma2 = policy.family.sigma**2
            self._center = policy.family.center

    def _action_row(self, t: int) -> np.ndarray | None:
        """Action row governing round t, i.e. the bet placed after t-1 rounds."""
        if self._stationary:
            return self.policy.actions
        if t - 1 >= self.policy.horizon:
            return None
        return self.policy.actions[t - 1]

    def initial_columns(self, paths: int) -> dict[str, np.ndarray]:
        return {"w": np.ones(paths, dtype=np.float64)}

    def advance(self, t: int, outcomes: np.ndarray, columns: dict[str, np.ndarray]) -> None:
        row = self._action_row(t)
        if row is None:
            return
        w = columns["w"]
        z = self._alpha * w
        lookup = np.clip(z, 1e-300, _BELOW_ONE)
        actions = np.interp(np.log(lookup), self._log_nodes, row)
        if self.problem.variant != "bernoulli":
            g = actions * (outcomes - self._center) - actions**2 / 2.0
            w *= np.exp(g / self._sigma2)
            return
        p0 = self._p0
        e1 = actions / p0
        e0 = (1.0 - actions) / (1.0 - p0)
        ones = outcomes > 0.5
        if not self._capped:
            w *= np.where(ones, e1, e0)
            return
        with np.errstate(divide="ignore"):
            inv = 1.0 / z
        cap1 = z * e1 >= 1.0
        e0 = np.where(cap1, (1.0 - p0 * inv) / (1.0 - p0), e0)
        e1 = np.where(cap1, inv, e1)
        cap0 = z * e0 >= 1.0
        e1 = np.where(cap0, (1.0 - (1.0 - p0) * inv) / p0, e1)
        e0 = np.where(cap0, inv, e0)
        hit = np.where(ones, cap1, cap0)
        w[:] = np.where(hit, self._threshold, w * np.where(ones, e1, e0))

    def evidence(self, t: int, columns: dict[str, np.ndarray]) -> np.ndarray:
        return columns["w"]


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------

_STRATEGY_ATTRS = ("label", "state_kind", "initial_columns", "advance", "evidence")


def _check_strategy(strategy) -> None:
    for name in _STRATEGY_ATTRS:
        if not hasattr(strategy, name):
            raise DomainError(
                f"unknown strategy kind: {type(strategy).__name__} lacks {name!r}"
            )


def run(problem: TestingProblem, strategy, config: SimConfig) -> StoppingDistribution:
    """Monte Carlo law of the first round where evidence reaches 1/alpha.

    Deterministic for fixed inputs: outcome blocks are keyed by
    (seed, round) and every reduction is a fixed-order numpy operation.
    """
    _check_strategy(strategy)
    paths, horizon = config.paths, config.horizon
    threshold = 1.0 / problem.alpha
    columns = strategy.initial_columns(paths)
    alive = np.ones(paths, dtype=bool)
    stop_round = np.zeros(paths, dtype=np.int64)
    frozen = np.zeros(paths, dtype=np.float64)
    wanted = set(config.wealth_rounds)
    checkpoints: dict[int, tuple[float, float]] = {}

    def record(t: int, current: np.ndarray) -> None:
        mean = float(current.mean())
        se = float(current.std(ddof=1) / math.sqrt(paths)) if paths > 1 else 0.0
        checkpoints[t] = (mean, se)

    for t in range(1, horizon + 1):
        outcomes = _outcome_block(problem, config.measure, config.seed, t, paths)
        strategy.advance(t, outcomes, columns)
        evidence = np.asarray(strategy.evidence(t, columns), dtype=np.float64)
        crossed = alive & (evidence >= threshold)
        if crossed.any():
            stop_round[crossed] = t
            frozen[crossed] = evidence[crossed]
            alive &= ~crossed
        if t in wanted:
            record(t, np.where(alive, evidence, frozen))
        if not alive.any():
            # Stopped wealth is frozen, so any later checkpoint sees the
            # same vector; fill them and skip the remaining rounds.
            for s in sorted(r for r in wanted if r > t):
                record(s, frozen)
            break
    counts = np.bincount(stop_round, minlength=horizon + 1).astype(np.float64)
    counts[0] = 0.0
    return StoppingDistribution(
        horizon=horizon,
        masses=counts / paths,
        estimator="monte-carlo",
        paths=paths,
        measure=config.measure,
        label=strategy.label,
        stopped_wealth=checkpoints or None,
    )


def expected_reward(dist: StoppingDistribution, reward: RewardSpec) -> RewardEstimate:
    """E[R(tau)] under the distribution, counting unstopped paths as 0.

    The truncation bound R(horizon + 1) * (unstopped mass) is the
    largest contribution the unobserved tail could add.
    """
    key = ("reward", reward)
    cached = dist._cache.get(key)
    if cached is not None:
        return cached
    rounds = np.arange(1, dist.horizon + 1)
    values = evaluate_array(reward, rounds)
    m = dist.masses[1:]
    estimate = float(m @ values)
    if dist.estimator == "exact":
        se = 0.0
    else:
        second = float(m @ (values * values))
        se = math.sqrt(max(0.0, second - estimate * estimate) / dist.paths)
    bound = evaluate(reward, dist.horizon + 1) * dist.never_reject
    result = RewardEstimate(estimate, se, bound)
    dist._cache[key] = result
    return result


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    if not 0 <= successes <= trials:
        raise DomainError(f"successes must lie in 0..{trials}, got {successes}")
    if not 0.0 < confidence < 1.0:
        raise DomainError(f"confidence must lie in (0, 1), got {confidence}")
    z = float(ndtri(0.5 * (1.0 + confidence)))
    n = float(trials)
    phat = successes / n
    denom = 1.0 + z * z / n
    centre = (phat + z * z / (2.0 * n)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n)) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


def _derived_seed(seed: int, index: int) -> int:
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return int(sequence.generate_state(1, np.uint64)[0])


def compare(
    problem: TestingProblem,
    strategies,
    config: SimConfig,
    rewards: tuple[RewardSpec, ...] = (),
) -> list[StrategyOutcome]:
    """Evaluate several strategies on shared outcome streams.

    With ``config.crn`` set (the default) every strategy sees identical
    outcomes, so comparing a strategy with itself reproduces the same
    distribution bitwise.  With CRN off each strategy gets an
    independent stream derived from the master seed and its position.
    """
    strategies = list(strategies)
    if not strategies:
        raise DomainError("compare needs at least one strategy")
    labels = []
    for strategy in strategies:
        _check_strategy(strategy)
        if strategy.label in labels:
            raise DomainError(f"duplicate strategy label {strategy.label!r}")
        labels.append(strategy.label)
    outcomes = []
    for index, strategy in enumerate(strategies):
        cfg = config if config.crn else replace(config, seed=_derived_seed(config.seed, index))
        dist = run(problem, strategy, cfg)
        pairs = tuple((reward, expected_reward(dist, reward)) for reward in rewards)
        outcomes.append(StrategyOutcome(strategy.label, dist, pairs))
    return outcomes


def comparison_records(outcomes) -> list[dict]:
    """Long-format rows (strategy, t, mass, cdf, se) for CSV emission."""
    rows = []
    for outcome in outcomes:
        dist = outcome.distribution
        cdf = dist.cdf
        se = dist.standard_errors
        for t in range(1, dist.horizon + 1):
            rows.append(
                {
                    "strategy": outcome.label,
                    "t": t,
                    "mass": float(dist.masses[t]),
                    "cdf": float(cdf[t]),
                    "se": float(se[t]),
                }
            )
    return rows
