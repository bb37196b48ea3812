"""Grid dynamic programming for reward-at-rejection objectives.

Rescaled wealth z = alpha * w lives on a logarithmic grid in (0, 1], with
z >= 1 the absorbing rejection boundary.  Backward induction solves

    V[t](z) = max_a E_pi1[ R(t+1) 1{z phi >= 1} + V[t+1](z phi) 1{z phi < 1} ]

with exact two-point expectations for Bernoulli bets and fixed-node
Gauss-Hermite quadrature for Gaussian shifts; a quadrature node counts as
a rejection exactly when z * phi(a, x_node) >= 1, with no sub-node
boundary splitting.  Off-grid continuation values interpolate linearly in
log z; below the lowest node the value follows the local power law; a
destination of exactly zero wealth is worth 0 (no bet recovers it).

For the exponential reward exp(-t/T) the recursion is time-homogeneous
and value iteration on v(z) = e^{-1/T} sup_a E[1{reject} + v(z phi)]
replaces the time index.

Everything is vectorized over (wealth node, action) pairs and fully
deterministic: expectations accumulate in a fixed branch order and the
argmax breaks ties toward the lowest action.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SolverError
from .model import (
    ActionFamily,
    BernoulliBet,
    GaussianShift,
    TestingProblem,
    _check_family,
    action_interval,
    gauss_hermite,
)
from .reward import RewardSpec, effective_horizon, evaluate

__all__ = [
    "WealthGrid",
    "ValueTable",
    "MarkovPolicy",
    "StationarySolution",
    "backward_induction",
    "stationary_value_iteration",
    "interpolate_value",
    "apply_capping",
    "default_action_grid",
    "long_records",
    "value_records",
]

QUADRATURE_NODES = 41


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(array, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class WealthGrid:
    """Sorted rescaled-wealth nodes z = alpha * w in (0, 1].

    The last node at or below 1 is the interpolation endpoint; z = 1
    itself is the rejection boundary and may be (and by default is) a
    node, where the optimal value is the next round's reward.
    """

    nodes: np.ndarray

    def __post_init__(self) -> None:
        nodes = _frozen(np.atleast_1d(np.asarray(self.nodes, dtype=float)))
        if nodes.ndim != 1 or nodes.size < 2:
            raise DomainError("wealth grid needs at least two nodes")
        if not np.all(np.diff(nodes) > 0.0):
            raise DomainError("wealth grid nodes must be strictly increasing")
        if nodes[0] <= 0.0 or nodes[-1] > 1.0:
            raise DomainError("wealth grid nodes must lie in (0, 1]")
        log_nodes = np.log(nodes)
        if not np.all(np.diff(log_nodes) > 0.0):
            raise DomainError("adjacent wealth nodes too close to separate in log space")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "log_nodes", _frozen(log_nodes))

    @classmethod
    def logarithmic(cls, z_min: float = 1e-8, count: int = 401) -> "WealthGrid":
        """`count` log-spaced nodes from z_min up to exactly 1."""
        if not (0.0 < z_min < 1.0):
            raise DomainError(f"z_min must lie in (0, 1), got {z_min}")
        if count < 2:
            raise DomainError(f"need at least two nodes, got {count}")
        return cls(np.logspace(math.log10(z_min), 0.0, count))

    @property
    def z_min(self) -> float:
        return float(self.nodes[0])

    def __len__(self) -> int:
        return self.nodes.size


@dataclass(frozen=True, eq=False)
class ValueTable:
    """Optimal expected reward V[t][i] over rounds 0..H and grid nodes.

    Row H is identically zero: with the reward truncated at the horizon,
    a process still running after H rounds earns nothing.
    """

    grid: WealthGrid
    reward: RewardSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = _frozen(self.values)
        if vals.ndim != 2 or vals.shape[1] != len(self.grid) or vals.shape[0] < 1:
            raise DomainError("value table must be (horizon + 1) x len(grid)")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0.0):
            raise DomainError("values must be finite and nonnegative")
        if np.any(vals[-1] != 0.0):
            raise DomainError("final value row must be identically zero")
        object.__setattr__(self, "values", vals)

    @property
    def horizon(self) -> int:
        return self.values.shape[0] - 1

    def interpolate(self, t: int, z: float) -> float:
        if not 0 <= t <= self.horizon:
            raise DomainError(f"round {t} outside table range 0..{self.horizon}")
        return interpolate_value(self.values[t], self.grid, z)


@dataclass(frozen=True, eq=False)
class MarkovPolicy:
    """Grid actions a[t][i] over rounds 0..H-1; entries stay in the family's interval."""

    grid: WealthGrid
    family: ActionFamily
    actions: np.ndarray
    capped: bool = False

    def __post_init__(self) -> None:
        acts = _frozen(self.actions)
        if acts.ndim != 2 or acts.shape[1] != len(self.grid):
            raise DomainError("policy must be horizon x len(grid)")
        lo, hi = action_interval(self.family)
        if np.any(acts < lo) or np.any(acts > hi):
            raise DomainError("policy contains actions outside the family interval")
        object.__setattr__(self, "actions", acts)

    @property
    def horizon(self) -> int:
        return self.actions.shape[0]


@dataclass(frozen=True, eq=False)
class StationarySolution:
    """Fixed point of the exponential-reward Bellman operator on a grid."""

    grid: WealthGrid
    family: ActionFamily
    timescale: float
    values: np.ndarray
    actions: np.ndarray
    iterations: int
    residual: float
    capped: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _frozen(self.values))
        object.__setattr__(self, "actions", _frozen(self.actions))

    def interpolate(self, z: float) -> float:
        return interpolate_value(self.values, self.grid, z)


# ---------------------------------------------------------------------------
# Interpolation
# ---------------------------------------------------------------------------


def _tail_values(row: np.ndarray, grid: WealthGrid, z: np.ndarray) -> np.ndarray:
    """Power-law extrapolation below the lowest node, slope clamped >= 0."""
    v0 = float(row[0])
    if v0 <= 0.0:
        return np.zeros(z.shape)
    v1 = float(row[1])
    if v1 <= v0:
        slope = 0.0
    else:
        slope = (math.log(v1) - math.log(v0)) / float(
            grid.log_nodes[1] - grid.log_nodes[0]
        )
    return v0 * (z / grid.nodes[0]) ** slope


def interpolate_value(row: np.ndarray, grid: WealthGrid, z: float) -> float:
    """Continuation value at z in (0, 1): linear in log z, clamped to [0, max].

    Below the lowest node the value keeps the local log-log slope, so a
    power-law row extrapolates as the same power law.  z >= 1 is the
    rejection boundary and must be handled before interpolation.
    """
    row = np.asarray(row, dtype=float)
    if row.shape != grid.nodes.shape:
        raise DomainError("row length must match the wealth grid")
    if not (0.0 < z < 1.0):
        raise DomainError(f"interpolation point must lie in (0, 1), got {z}")
    if z < grid.nodes[0]:
        val = float(_tail_values(row, grid, np.array([z]))[0])
    else:
        val = float(np.interp(math.log(z), grid.log_nodes, row))
    return float(min(max(val, 0.0), row.max()))


class _Branch:
    """One outcome branch of the one-step expectation, fully precomputed.

    Holds the flattened destination pattern of z' = z * phi over the
    (node, action) grid: which entries reject, which interpolate between
    which neighbours, and which fall below the grid.  Only the value row
    changes between backward-induction steps, so each step reduces to
    gathers against these fixed index arrays.
    """

    __slots__ = (
        "weight",
        "size",
        "reject",
        "mid",
        "gidx",
        "gidx1",
        "lam",
        "below",
        "log_ratio",
        "dlog0",
    )

    def __init__(self, weight: float, destinations: np.ndarray, grid: WealthGrid):
        flat = destinations.ravel()
        self.weight = float(weight)
        self.size = flat.size
        self.reject = np.flatnonzero(flat >= 1.0).astype(np.int64)
        interior = (flat > 0.0) & (flat < 1.0)
        below_mask = interior & (flat < grid.nodes[0])
        mid_mask = interior & ~below_mask
        self.mid = np.flatnonzero(mid_mask).astype(np.int64)
        logs = np.log(flat[self.mid])
        g = np.searchsorted(grid.log_nodes, logs, side="right") - 1
        np.clip(g, 0, len(grid) - 2, out=g)
        self.gidx = g
        self.gidx1 = g + 1
        span = grid.log_nodes[g + 1] - grid.log_nodes[g]
        self.lam = (logs - grid.log_nodes[g]) / span
        self.below = np.flatnonzero(below_mask).astype(np.int64)
        self.log_ratio = np.log(flat[self.below] / grid.nodes[0])
        self.dlog0 = float(grid.log_nodes[1] - grid.log_nodes[0])

    def accumulate(self, objective: np.ndarray, row: np.ndarray, reward_next: float) -> None:
        lo = row[self.gidx]
        hi = row[self.gidx1]
        objective[self.mid] += self.weight * (lo + self.lam * (hi - lo))
        if self.below.size:
            v0 = float(row[0])
            if v0 > 0.0:
                v1 = float(row[1])
                if v1 > v0:
                    slope = (math.log(v1) - math.log(v0)) / self.dlog0
                    vals = v0 * np.exp(slope * self.log_ratio)
                else:
                    vals = v0
                objective[self.below] += self.weight * vals
        if reward_next != 0.0 and self.reject.size:
            objective[self.reject] += self.weight * reward_next


def _validated_actions(family: ActionFamily, action_grid: np.ndarray) -> np.ndarray:
    actions = np.atleast_1d(np.asarray(action_grid, dtype=float))
    if actions.ndim != 1 or actions.size < 1:
        raise DomainError("action grid must be a nonempty 1-D array")
    if actions.size > 1 and not np.all(np.diff(actions) > 0.0):
        raise DomainError("action grid must be strictly increasing")
    lo, hi = action_interval(family)
    if actions[0] < lo or actions[-1] > hi:
        raise DomainError(
            f"action grid extends outside the family interval [{lo}, {hi}]"
        )
    return actions


def default_action_grid(family: ActionFamily, count: int = 401) -> np.ndarray:
    """Uniform grid over the family's full action interval."""
    if count < 1:
        raise DomainError(f"need at least one action, got {count}")
    lo, hi = action_interval(family)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise DomainError("cannot grid an unbounded action interval")
    return np.linspace(lo, hi, count)


def _capped_matrices(
    p0: float, e0: np.ndarray, e1: np.ndarray, z: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Overshoot-capped payoff matrices over the (node, action) grid.

    Whichever payoff would carry z past 1 is capped at exactly 1/z and the
    saved mass moves to the other outcome, preserving null mean 1.  At
    most one side can overshoot for z <= 1.
    """
    n, m = z.size, e1.size
    inv = 1.0 / z[:, None]
    E1 = np.broadcast_to(e1, (n, m)).copy()
    E0 = np.broadcast_to(e0, (n, m)).copy()
    cap1 = z[:, None] * E1 > 1.0
    E0 = np.where(cap1, (1.0 - p0 * inv) / (1.0 - p0), E0)
    E1 = np.where(cap1, inv, E1)
    cap0 = z[:, None] * E0 > 1.0
    E1 = np.where(cap0, (1.0 - (1.0 - p0) * inv) / p0, E1)
    E0 = np.where(cap0, inv, E0)
    # Cap triggers only when z exceeds the favourable-outcome null mass,
    # which keeps the shifted payoff nonnegative.
    assert E0.min() >= 0.0 and E1.min() >= 0.0
    return E0, E1


def apply_capping(
    problem: TestingProblem, payoffs: tuple[float, float], z: float
) -> tuple[float, float]:
    """Cap a Bernoulli payoff pair (e0, e1) so z * phi never overshoots 1.

    If z * e1 > 1, the favourable payoff is cut to exactly 1/z and the
    remainder moves to outcome 0 (and symmetrically when e0 overshoots);
    the null mean stays 1 and no payoff decreases below its partner's
    gain.  Requires z in (0, 1).
    """
    if problem.variant != "bernoulli":
        raise DomainError("capping is defined for Bernoulli bets only")
    if not (0.0 < z < 1.0):
        raise DomainError(f"capping needs rescaled wealth z in (0, 1), got {z}")
    e0, e1 = float(payoffs[0]), float(payoffs[1])
    if e0 < 0.0 or e1 < 0.0:
        raise DomainError("payoffs must be nonnegative")
    p0 = problem.p0
    if abs(p0 * e1 + (1.0 - p0) * e0 - 1.0) > 1e-9:
        raise DomainError("payoff pair must have null mean 1")
    if z * e1 > 1.0:
        e1c = 1.0 / z
        e0c = (1.0 - p0 * e1c) / (1.0 - p0)
        assert e0c >= 0.0
        return (e0c, e1c)
    if z * e0 > 1.0:
        e0c = 1.0 / z
        e1c = (1.0 - (1.0 - p0) * e0c) / p0
        assert e1c >= 0.0
        return (e0c, e1c)
    return (e0, e1)


def _build_branches(
    problem: TestingProblem,
    family: ActionFamily,
    grid: WealthGrid,
    actions: np.ndarray,
    capping: bool,
    quadrature_nodes: int = QUADRATURE_NODES,
) -> list[_Branch]:
    z = grid.nodes
    if isinstance(family, BernoulliBet):
        p0, p1 = problem.p0, problem.p1
        e1 = actions / p0
        e0 = (1.0 - actions) / (1.0 - p0)
        if capping:
            E0, E1 = _capped_matrices(p0, e0, e1, z)
        else:
            n, m = z.size, actions.size
            E1 = np.broadcast_to(e1, (n, m))
            E0 = np.broadcast_to(e0, (n, m))
        return [
            _Branch(p1, z[:, None] * E1, grid),
            _Branch(1.0 - p1, z[:, None] * E0, grid),
        ]
    if capping:
        raise DomainError("capping is defined for Bernoulli bets only")
    x, w = gauss_hermite(problem.alternative.mean, problem.sigma, quadrature_nodes)
    s2 = problem.sigma**2
    log_phi = (
        actions[:, None] * (x[None, :] - family.center) / s2
        - actions[:, None] ** 2 / (2.0 * s2)
    )
    phi = np.exp(log_phi)
    return [
        _Branch(w[k], z[:, None] * phi[:, k][None, :], grid) for k in range(x.size)
    ]


def _step(
    branches: list[_Branch],
    row: np.ndarray,
    reward_next: float,
    shape: tuple[int, int],
) -> tuple[np.ndarray, np.ndarray]:
    objective = np.zeros(shape[0] * shape[1])
    for branch in branches:
        branch.accumulate(objective, row, reward_next)
    objective = objective.reshape(shape)
    # argmax returns the first maximum: ties break toward the lowest action.
    best = objective.argmax(axis=1)
    return objective[np.arange(shape[0]), best], best


def _check_solver_inputs(
    problem: TestingProblem, family: ActionFamily, action_grid: np.ndarray
) -> np.ndarray:
    _check_family(problem, family)
    return _validated_actions(family, action_grid)


def _boundary_action(problem: TestingProblem, actions: np.ndarray) -> float | None:
    """Canonical policy entry for the z = 1 node of capped solves.

    With capping, every action at the boundary node pins both payoffs to
    1 and rejects immediately, so the argmax tie there is arbitrary.
    Record the smallest action whose favourable payoff reaches the
    boundary; it continues the p0/z trend of the neighbouring nodes, so
    interpolating the row near z = 1 still produces capping bets.
    """
    i = int(np.searchsorted(actions, problem.p0))
    if i >= actions.size:
        return None
    return float(actions[i])


def backward_induction(
    problem: TestingProblem,
    family: ActionFamily,
    reward: RewardSpec,
    wealth_grid: WealthGrid,
    action_grid: np.ndarray,
    horizon: int | None = None,
    capping: bool = False,
    quadrature_nodes: int = QUADRATURE_NODES,
) -> tuple[ValueTable, MarkovPolicy]:
    """Finite-horizon optimal values and Markov policy on the grids.

    The horizon defaults to the reward's effective horizon at 1e-6; a
    shorter explicit horizon truncates the objective and undercounts the
    value by at most the reward mass beyond it.  `quadrature_nodes` only
    affects Gaussian problems, whose branch expectations use that many
    Gauss-Hermite nodes.
    """
    actions = _check_solver_inputs(problem, family, action_grid)
    if horizon is None:
        horizon = effective_horizon(reward, 1e-6)
        horizon = max(horizon, 1)
    if not (isinstance(horizon, (int, np.integer)) and horizon >= 1):
        raise DomainError(f"horizon must be a positive integer, got {horizon!r}")
    branches = _build_branches(
        problem, family, wealth_grid, actions, capping, quadrature_nodes
    )
    boundary = None
    if capping and wealth_grid.nodes[-1] == 1.0:
        boundary = _boundary_action(problem, actions)
    n = len(wealth_grid)
    shape = (n, actions.size)
    values = np.zeros((horizon + 1, n))
    policy = np.empty((horizon, n))
    row = values[horizon]
    for t in range(horizon - 1, -1, -1):
        vals, best = _step(branches, row, evaluate(reward, t + 1), shape)
        values[t] = vals
        policy[t] = actions[best]
        if boundary is not None:
            policy[t, -1] = boundary
        row = vals
    table = ValueTable(wealth_grid, reward, values)
    markov = MarkovPolicy(wealth_grid, family, policy, capped=capping)
    return table, markov


def stationary_value_iteration(
    problem: TestingProblem,
    family: ActionFamily,
    timescale: float,
    wealth_grid: WealthGrid,
    action_grid: np.ndarray,
    tolerance: float = 1e-10,
    capping: bool = False,
    max_iterations: int = 200_000,
    quadrature_nodes: int = QUADRATURE_NODES,
) -> StationarySolution:
    """Fixed point of v = e^{-1/T} sup_a E[1{reject} + v(z phi) 1{continue}].

    Stops when the contraction bound beta/(1-beta) * residual certifies a
    sup-norm error at most `tolerance`; raises SolverError carrying the
    last residual on non-convergence.
    """
    actions = _check_solver_inputs(problem, family, action_grid)
    if not (math.isfinite(timescale) and timescale > 0.0):
        raise DomainError(f"timescale must be positive and finite, got {timescale}")
    if not (tolerance > 0.0):
        raise DomainError(f"tolerance must be positive, got {tolerance}")
    beta = math.exp(-1.0 / timescale)
    branches = _build_branches(
        problem, family, wealth_grid, actions, capping, quadrature_nodes
    )
    boundary = None
    if capping and wealth_grid.nodes[-1] == 1.0:
        boundary = _boundary_action(problem, actions)
    n = len(wealth_grid)
    shape = (n, actions.size)
    v = np.zeros(n)
    best = np.zeros(n, dtype=np.int64)
    for iteration in range(1, max_iterations + 1):
        vals, best = _step(branches, v, 1.0, shape)
        vals *= beta
        residual = float(np.max(np.abs(vals - v)))
        v = vals
        if residual * beta / (1.0 - beta) <= tolerance:
            chosen = actions[best]
            if boundary is not None:
                chosen[-1] = boundary
            return StationarySolution(
                grid=wealth_grid,
                family=family,
                timescale=timescale,
                values=v,
                actions=chosen,
                iterations=iteration,
                residual=residual,
                capped=capping,
            )
    raise SolverError(
        f"stationary value iteration did not converge within {max_iterations} "
        f"iterations (last residual {residual:.3e})"
    )


def long_records(table: ValueTable, policy: MarkovPolicy) -> list[dict]:
    """Rows {t, z, value, action} for t = 0..H-1, the heatmap export format."""
    if policy.horizon != table.horizon or policy.grid is not table.grid:
        if not np.array_equal(policy.grid.nodes, table.grid.nodes):
            raise DomainError("table and policy must share a wealth grid")
        if policy.horizon != table.horizon:
            raise DomainError("table and policy must share a horizon")
    rows = []
    for t in range(table.horizon):
        for i, z in enumerate(table.grid.nodes):
            rows.append(
                {
                    "t": t,
                    "z": float(z),
                    "value": float(table.values[t, i]),
                    "action": float(policy.actions[t, i]),
                }
            )
    return rows


def value_records(table: ValueTable) -> list[dict]:
    """Rows {t, z, value} for every table entry including the zero final row."""
    return [
        {"t": t, "z": float(z), "value": float(table.values[t, i])}
        for t in range(table.horizon + 1)
        for i, z in enumerate(table.grid.nodes)
    ]
