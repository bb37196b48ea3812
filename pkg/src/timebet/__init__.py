"""Time-sensitive sequential testing by betting.

Solvers and simulators for anytime-valid tests whose value is judged by a
non-increasing reward on the rejection round: stationary-tilt (EDO)
strategies for exponential rewards, dynamic-programming policies for
general rewards, exact deadline-optimal procedures, Monte Carlo and exact
stopping-time evaluation, and heuristic baselines.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .baselines import (
    SCHEDULES,
    ScheduleMixStrategy,
    StarBetsStrategy,
    capped_constant,
    schedule_mix_actions,
    schedule_weights,
    star_bets_action,
)
from .bellman import (
    MarkovPolicy,
    StationarySolution,
    ValueTable,
    WealthGrid,
    apply_capping,
    backward_induction,
    default_action_grid,
    interpolate_value,
    stationary_value_iteration,
)
from .edo import (
    EdoSolution,
    PowerExponent,
    gro_action,
    is_power_one,
    power_exponent,
    stationary_rate,
)
from .hard_deadline import (
    EXACT_SEARCH_CAP,
    PATH_ENUMERATION_CAP,
    BernoulliDoobStrategy,
    DoobTrace,
    GaussianDoob,
    NPEventBernoulli,
    UpperTailDoob,
    bernoulli_doob_value,
    bernoulli_np_exact,
    bernoulli_np_greedy,
    bernoulli_upper_tail_approx,
    distribution_records,
    doob_trace,
    event_record,
    exact_stopping_distribution,
    gaussian_np,
)
from .errors import (
    DomainError,
    InfiniteDivergenceError,
    IntractableError,
    NoSolutionError,
    SolverError,
    TimebetError,
    VariantMismatchError,
)
from .model import (
    ActionFamily,
    Bernoulli,
    BernoulliBet,
    CoinBet,
    Distribution,
    Gaussian,
    GaussianShift,
    TestingProblem,
    action_interval,
    canonical_family,
    gauss_hermite,
    kl,
    log_growth,
    null_mean_check,
    payoff,
    payoff_pair,
    renyi,
    tilt,
)
from .reward import (
    ExponentialDecay,
    HardDeadline,
    Logistic,
    RewardSpec,
    Table,
    effective_horizon,
    evaluate,
    evaluate_array,
)
from .simulate import (
    PATH_PRESETS,
    CappedConstantBet,
    ConstantBet,
    PolicyStrategy,
    RewardEstimate,
    SimConfig,
    StoppingDistribution,
    Strategy,
    StrategyOutcome,
    compare,
    comparison_records,
    expected_reward,
    run,
    wilson_interval,
)

__all__ = [
    "__version__",
    "TimebetError",
    "DomainError",
    "VariantMismatchError",
    "InfiniteDivergenceError",
    "NoSolutionError",
    "SolverError",
    "IntractableError",
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
    "HardDeadline",
    "Logistic",
    "ExponentialDecay",
    "Table",
    "RewardSpec",
    "evaluate",
    "evaluate_array",
    "effective_horizon",
    "EdoSolution",
    "PowerExponent",
    "stationary_rate",
    "gro_action",
    "is_power_one",
    "power_exponent",
    "WealthGrid",
    "ValueTable",
    "MarkovPolicy",
    "StationarySolution",
    "backward_induction",
    "stationary_value_iteration",
    "interpolate_value",
    "apply_capping",
    "default_action_grid",
    "EXACT_SEARCH_CAP",
    "PATH_ENUMERATION_CAP",
    "NPEventBernoulli",
    "GaussianDoob",
    "UpperTailDoob",
    "BernoulliDoobStrategy",
    "DoobTrace",
    "gaussian_np",
    "bernoulli_np_greedy",
    "bernoulli_np_exact",
    "bernoulli_doob_value",
    "bernoulli_upper_tail_approx",
    "doob_trace",
    "exact_stopping_distribution",
    "event_record",
    "distribution_records",
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
    "SCHEDULES",
    "StarBetsStrategy",
    "ScheduleMixStrategy",
    "star_bets_action",
    "schedule_mix_actions",
    "schedule_weights",
    "capped_constant",
]
