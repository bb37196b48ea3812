"""Exact deadline-optimal procedures: terminal events and Doob processes.

With a hard deadline, the most powerful valid procedure rejects on a
terminal event whose null mass is at most alpha, and the matching
e-process is the Doob martingale of the event's conditional null
probability.  This module constructs those events (closed-form Gaussian
threshold; exact rational integer programme for Bernoulli), evaluates
their Doob processes exactly, exposes them as betting strategies, and
computes exact stopping-time laws of Bernoulli strategies by sweeping
prefix states round by round.

Bernoulli events select, within each level {S_T = k}, the
lexicographically first strings, where 1 sorts before 0 on the leftmost
differing bit.  All boundary-string counting is combinatorial (ranks
within a level), never by enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import DomainError, IntractableError
from .model import TestingProblem
from .simulate import StoppingDistribution, _check_strategy

__all__ = [
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
]

# Largest deadline for the exact Bernoulli event search.
EXACT_SEARCH_CAP = 30
# Largest horizon enumerable for strategies with per-path state.
PATH_ENUMERATION_CAP = 25

_BELOW_ONE = float(np.nextafter(1.0, 0.0))


def _float_below_one(value: Fraction) -> float:
    """Float a conditional mass, keeping values < 1 strictly below 1.0.

    A mass within half an ulp of 1 would round to exactly 1.0 and make
    the simulation engine reject before membership is actually forced;
    the largest double below 1 is at least as accurate a representation.
    """
    out = float(value)
    if out >= 1.0 and value < 1:
        return _BELOW_ONE
    return out


def _decimal_fraction(value, name: str) -> Fraction:
    """Read a probability as the rational its decimal literal denotes."""
    out = Fraction(str(Fraction(value))) if isinstance(value, Fraction) else Fraction(str(float(value)))
    if not 0 < out < 1:
        raise DomainError(f"{name} must lie in (0, 1), got {value}")
    return out


def _alpha_fraction(alpha, allow_one: bool = False) -> Fraction:
    out = Fraction(str(Fraction(alpha))) if isinstance(alpha, Fraction) else Fraction(str(float(alpha)))
    top = 1 if allow_one else None
    if out <= 0 or out > 1 or (not allow_one and out == 1):
        limit = "(0, 1]" if allow_one else "(0, 1)"
        raise DomainError(f"alpha must lie in {limit}, got {alpha}")
    return out


def _check_deadline(deadline) -> int:
    if not (isinstance(deadline, (int, np.integer)) and deadline >= 1):
        raise DomainError(f"deadline must be a positive integer, got {deadline!r}")
    return int(deadline)


def _binom_tail(length: int, start: int, p: Fraction) -> Fraction:
    """Exact P(Binomial(length, p) >= start)."""
    if start > length:
        return Fraction(0)
    q = 1 - p
    return sum(
        (math.comb(length, j) * p**j * q ** (length - j) for j in range(max(start, 0), length + 1)),
        Fraction(0),
    )


def _check_bits(prefix, deadline: int) -> list[int]:
    if isinstance(prefix, str):
        raw = list(prefix)
        bits = []
        for ch in raw:
            if ch not in "01":
                raise DomainError(f"prefix characters must be 0 or 1, got {ch!r}")
            bits.append(int(ch))
    else:
        bits = []
        for b in np.asarray(prefix).ravel().tolist():
            if b not in (0, 1, 0.0, 1.0, False, True):
                raise DomainError(f"prefix entries must be 0 or 1, got {b!r}")
            bits.append(int(b))
    if len(bits) > deadline:
        raise DomainError(
            f"prefix of length {len(bits)} exceeds the deadline {deadline}"
        )
    return bits


def _prefix_start_rank(bits: list[int], total: int, level: int) -> int:
    """Rank of the first level-`level` string extending the prefix.

    Rank is 0-based within the level, ordering strings so that 1 beats 0
    at the leftmost differing bit.  Every string with a 1 where the
    prefix has a 0 comes earlier; summing those choices gives the rank
    of the block of extensions, which is contiguous.
    """
    rank = 0
    ones = 0
    for i, b in enumerate(bits):
        if b:
            ones += 1
        else:
            need = level - ones - 1
            remaining = total - i - 1
            if 0 <= need <= remaining:
                rank += math.comb(remaining, need)
    return rank


@dataclass(frozen=True, eq=False)
class NPEventBernoulli:
    """Deterministic terminal rejection event for Bernoulli sequences.

    ``level_counts[k]`` strings are selected at level {S_T = k}, always
    the lexicographically first ones.  When the selection is all levels
    above a cut plus a partial boundary level, ``threshold`` and
    ``boundary_count`` describe it compactly; both are None for other
    shapes (which exact search can produce when neither probability is
    on the favourable side of 1/2).
    """

    deadline: int
    p0: Fraction
    p1: Fraction
    alpha: Fraction
    level_counts: tuple[int, ...]
    threshold: int | None = field(init=False)
    boundary_count: int | None = field(init=False)
    null_mass: Fraction = field(init=False)
    power: Fraction = field(init=False)

    def __post_init__(self) -> None:
        T = _check_deadline(self.deadline)
        p0 = _decimal_fraction(self.p0, "p0")
        p1 = _decimal_fraction(self.p1, "p1")
        if p1 <= p0:
            raise DomainError("the alternative must satisfy p1 > p0")
        alpha = _alpha_fraction(self.alpha, allow_one=True)
        counts = tuple(int(m) for m in self.level_counts)
        if len(counts) != T + 1:
            raise DomainError("need one level count per level 0..deadline")
        null_mass = Fraction(0)
        power = Fraction(0)
        for k, m in enumerate(counts):
            if not 0 <= m <= math.comb(T, k):
                raise DomainError(f"level {k} count {m} outside 0..C({T},{k})")
            null_mass += m * p0**k * (1 - p0) ** (T - k)
            power += m * p1**k * (1 - p1) ** (T - k)
        if null_mass > alpha:
            raise DomainError("event null mass exceeds alpha")
        # Compact description when the shape is full-levels-plus-boundary.
        k = T + 1
        while k > 0 and counts[k - 1] == math.comb(T, k - 1):
            k -= 1
        threshold: int | None
        boundary: int | None
        if k == 0:
            threshold, boundary = 0, 0
        elif all(counts[j] == 0 for j in range(k - 1)):
            threshold, boundary = k, counts[k - 1]
        else:
            threshold, boundary = None, None
        object.__setattr__(self, "deadline", T)
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "level_counts", counts)
        object.__setattr__(self, "threshold", threshold)
        object.__setattr__(self, "boundary_count", boundary)
        object.__setattr__(self, "null_mass", null_mass)
        object.__setattr__(self, "power", power)

    @property
    def is_threshold(self) -> bool:
        return self.threshold is not None

    def includes(self, string) -> bool:
        """Membership of a full outcome string."""
        bits = _check_bits(string, self.deadline)
        if len(bits) != self.deadline:
            raise DomainError("membership needs a full-length string")
        level = sum(bits)
        m = self.level_counts[level]
        if m == math.comb(self.deadline, level):
            return m > 0
        return _prefix_start_rank(bits, self.deadline, level) < m


def bernoulli_doob_value(event: NPEventBernoulli, prefix) -> Fraction:
    """Exact conditional null mass of the event given an outcome prefix.

    The completions of a prefix occupy a contiguous rank block within
    every level, so the selected count per level is a clamped overlap
    with the lexicographic initial segment; no strings are enumerated.
    """
    bits = _check_bits(prefix, event.deadline)
    T = event.deadline
    t = len(bits)
    s = sum(bits)
    L = T - t
    p0 = event.p0
    q0 = 1 - p0
    total = Fraction(0)
    for level, m in enumerate(event.level_counts):
        if m == 0:
            continue
        j = level - s
        if j < 0 or j > L:
            continue
        size = math.comb(L, j)
        if m == math.comb(T, level):
            cnt = size
        else:
            start = _prefix_start_rank(bits, T, level)
            cnt = min(max(m - start, 0), size)
        if cnt:
            total += cnt * p0**j * q0 ** (L - j)
    return total


# ---------------------------------------------------------------------------
# Event construction
# ---------------------------------------------------------------------------


def bernoulli_np_greedy(p0, p1, deadline, alpha) -> NPEventBernoulli:
    """Most powerful terminal event of threshold-plus-boundary shape.

    Takes every full level above the cut and fills the remaining budget
    with boundary strings.  Valid for p0 <= 1/2 (lower levels are never
    lighter, so nothing below the boundary can fit) and optimal among
    all events when additionally p1 >= 1/2.
    """
    T = _check_deadline(deadline)
    p0 = _decimal_fraction(p0, "p0")
    p1 = _decimal_fraction(p1, "p1")
    if p0 > Fraction(1, 2):
        raise DomainError("the greedy construction requires p0 <= 1/2")
    if p1 <= p0:
        raise DomainError("the alternative must satisfy p1 > p0")
    alpha = _alpha_fraction(alpha, allow_one=True)
    k = 0
    while _binom_tail(T, k, p0) > alpha:
        k += 1
    counts = [0] * (T + 1)
    for j in range(k, T + 1):
        counts[j] = math.comb(T, j)
    if k >= 1:
        weight = p0 ** (k - 1) * (1 - p0) ** (T - k + 1)
        counts[k - 1] = int((alpha - _binom_tail(T, k, p0)) / weight)
    return NPEventBernoulli(T, p0, p1, alpha, tuple(counts))


def _knapsack_level_counts(
    weights: list[Fraction], benefits: list[Fraction], caps: list[int], budget: Fraction
) -> list[int]:
    """Exact bounded knapsack over levels by depth-first branch and bound.

    Levels are visited in decreasing benefit-per-weight order; the bound
    is the fractional relaxation, and within a level the count only
    decreases the bound, so the count loop breaks at the first prune.
    """
    order = sorted(range(len(weights)), key=lambda i: benefits[i] / weights[i], reverse=True)
    w = [weights[i] for i in order]
    b = [benefits[i] for i in order]
    c = [caps[i] for i in order]
    n = len(order)

    def greedy(start: int, remaining: Fraction) -> tuple[Fraction, list[int]]:
        value = Fraction(0)
        taken = []
        for i in range(start, n):
            m = min(c[i], int(remaining / w[i]))
            taken.append(m)
            value += m * b[i]
            remaining -= m * w[i]
        return value, taken

    def fractional_bound(start: int, remaining: Fraction) -> Fraction:
        value = Fraction(0)
        for i in range(start, n):
            cost = c[i] * w[i]
            if cost <= remaining:
                value += c[i] * b[i]
                remaining -= cost
            else:
                value += remaining / w[i] * b[i]
                break
        return value

    best_value, best_tail = greedy(0, budget)
    best = list(best_tail)

    prefix: list[int] = []

    def search(i: int, remaining: Fraction, value: Fraction) -> None:
        nonlocal best_value, best
        if i == n:
            if value > best_value:
                best_value = value
                best = list(prefix)
            return
        top = min(c[i], int(remaining / w[i]))
        for m in range(top, -1, -1):
            child_value = value + m * b[i]
            child_remaining = remaining - m * w[i]
            if child_value + fractional_bound(i + 1, child_remaining) <= best_value:
                # Smaller counts only lower the bound further.
                break
            prefix.append(m)
            search(i + 1, child_remaining, child_value)
            prefix.pop()

    search(0, budget, Fraction(0))
    counts = [0] * len(weights)
    for pos, i in enumerate(order):
        counts[i] = best[pos] if pos < len(best) else 0
    return counts


def bernoulli_np_exact(p0, p1, deadline, alpha, exact_cap: int = EXACT_SEARCH_CAP) -> NPEventBernoulli:
    """Most powerful deterministic terminal event, exactly.

    Maximises the hit mass over per-level selection counts subject to
    the null-mass budget, in rational arithmetic.  When p0 <= 1/2 <= p1
    higher levels dominate lower ones pointwise and the greedy threshold
    shape is optimal; otherwise this is a genuine bounded knapsack and a
    branch-and-bound search is used.
    """
    T = _check_deadline(deadline)
    if T > exact_cap:
        raise IntractableError(
            f"exact event search is capped at deadline {exact_cap} "
            f"(got {T}); use bernoulli_upper_tail_approx instead"
        )
    p0 = _decimal_fraction(p0, "p0")
    p1 = _decimal_fraction(p1, "p1")
    if p1 <= p0:
        raise DomainError("the alternative must satisfy p1 > p0")
    alpha = _alpha_fraction(alpha, allow_one=True)
    half = Fraction(1, 2)
    if p0 <= half <= p1:
        return bernoulli_np_greedy(p0, p1, T, alpha)
    weights = [p0**k * (1 - p0) ** (T - k) for k in range(T + 1)]
    benefits = [p1**k * (1 - p1) ** (T - k) for k in range(T + 1)]
    caps = [math.comb(T, k) for k in range(T + 1)]
    counts = _knapsack_level_counts(weights, benefits, caps, alpha)
    return NPEventBernoulli(T, p0, p1, alpha, tuple(counts))


def gaussian_np(sigma, deadline, alpha) -> "GaussianDoob":
    """Deadline test rejecting when the Gaussian sum reaches its threshold."""
    sigma = float(sigma)
    if not (math.isfinite(sigma) and sigma > 0.0):
        raise DomainError(f"sigma must be positive and finite, got {sigma}")
    T = _check_deadline(deadline)
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    c = sigma * math.sqrt(T) * float(ndtri(1.0 - alpha))
    return GaussianDoob(sigma=sigma, deadline=T, alpha=alpha, threshold=c)


# ---------------------------------------------------------------------------
# Doob processes as strategies
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GaussianDoob:
    """Doob e-process of the Gaussian terminal-threshold event.

    The event has null mass exactly alpha, so the event-mass and alpha
    scalings coincide: U_t = h_t(S_t) / alpha with h_t the conditional
    probability that the final sum reaches the threshold.  h_t < 1
    strictly before the deadline, so the process never rejects early.
    """

    sigma: float
    deadline: int
    alpha: float
    threshold: float
    label: str = "gaussian-doob"

    state_kind = "path"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sigma) and self.sigma > 0.0):
            raise DomainError(f"sigma must be positive and finite, got {self.sigma}")
        _check_deadline(self.deadline)
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not math.isfinite(self.threshold):
            raise DomainError("threshold must be finite")

    def h(self, t: int, s):
        """Conditional null probability of the terminal event given S_t = s.

        Strictly below 1 before the deadline: where the true value sits
        within half an ulp of 1 it is reported as the largest double
        below 1, so no finite sum can force a rejection early.
        """
        if not 0 <= t <= self.deadline:
            raise DomainError(f"round {t} outside 0..{self.deadline}")
        s = np.asarray(s, dtype=np.float64)
        if t == self.deadline:
            out = (s >= self.threshold).astype(np.float64)
        else:
            scale = self.sigma * math.sqrt(self.deadline - t)
            # Survival form: no cancellation for s far below the
            # threshold, where 1 - ndtr(...) would round to zero.
            out = np.minimum(ndtr((s - self.threshold) / scale), _BELOW_ONE)
        return out if out.ndim else float(out)

    def u_star(self, t: int, s):
        return self.h(t, s) / self.alpha

    def initial_columns(self, paths: int) -> dict[str, np.ndarray]:
        return {"s": np.zeros(paths, dtype=np.float64)}

    def advance(self, t: int, outcomes: np.ndarray, columns: dict[str, np.ndarray]) -> None:
        if t <= self.deadline:
            columns["s"] += outcomes

    def evidence(self, t: int, columns: dict[str, np.ndarray]) -> np.ndarray:
        u = np.asarray(self.u_star(min(t, self.deadline), columns["s"]))
        if t < self.deadline:
            # The ratio must stay below 1/alpha before the deadline even
            # if the division rounds up through it.
            u = np.minimum(u, np.nextafter(1.0 / self.alpha, 0.0))
        return u


class UpperTailDoob:
    """Doob strategy of the best count-measurable terminal tail event.

    The event {S_T >= k} with the smallest valid k ignores any partial
    boundary selection, so its conditional null mass depends only on
    (t, S_t); tables are exact rationals, floated once for simulation.
    """

    state_kind = "integer"

    def __init__(self, p0, p1, deadline, alpha, scale: str = "event-mass", label: str | None = None):
        T = _check_deadline(deadline)
        self.p0 = _decimal_fraction(p0, "p0")
        self.p1 = _decimal_fraction(p1, "p1")
        if self.p1 <= self.p0:
            raise DomainError("the alternative must satisfy p1 > p0")
        self.alpha = _alpha_fraction(alpha)
        if scale not in ("event-mass", "alpha"):
            raise DomainError(f"scale must be 'event-mass' or 'alpha', got {scale!r}")
        self.deadline = T
        self.scale = scale
        k = 0
        while _binom_tail(T, k, self.p0) > self.alpha:
            k += 1
        self.threshold = k
        self._h = tuple(
            tuple(_binom_tail(T - t, k - s, self.p0) for s in range(T + 1))
            for t in range(T + 1)
        )
        self.event_mass = self._h[0][0]
        self.power = _binom_tail(T, k, self.p1)
        self._hf = np.array([[_float_below_one(h) for h in row] for row in self._h])
        self._denom = float(self.event_mass if scale == "event-mass" else self.alpha)
        self.label = label if label is not None else (
            "upper-tail-doob" if scale == "event-mass" else "upper-tail-doob-alpha"
        )

    def h(self, t: int, s: int) -> Fraction:
        """Exact conditional null mass of {S_T >= k} given S_t = s."""
        if not 0 <= t <= self.deadline:
            raise DomainError(f"round {t} outside 0..{self.deadline}")
        if not 0 <= s <= t:
            raise DomainError(f"ones count {s} outside 0..{t}")
        return self._h[t][s]

    def action(self, t: int, s: int) -> tuple[Fraction, Fraction]:
        """Predictable round-t action as (mass on 1, mass on 0).

        Where the event is already unreachable (conditional mass zero)
        the action is arbitrary; the flat null bet is returned.
        """
        if not 1 <= t <= self.deadline:
            raise DomainError(f"round {t} outside 1..{self.deadline}")
        if not 0 <= s <= t - 1:
            raise DomainError(f"ones count {s} outside 0..{t - 1}")
        prev = self._h[t - 1][s]
        if prev == 0:
            return (self.p0, 1 - self.p0)
        return (
            self.p0 * self._h[t][s + 1] / prev,
            (1 - self.p0) * self._h[t][s] / prev,
        )

    def initial_columns(self, paths: int) -> dict[str, np.ndarray]:
        return {"s": np.zeros(paths, dtype=np.int64)}

    def advance(self, t: int, outcomes: np.ndarray, columns: dict[str, np.ndarray]) -> None:
        if t <= self.deadline:
            columns["s"] += outcomes > 0.5

    def evidence(self, t: int, columns: dict[str, np.ndarray]) -> np.ndarray:
        return self._hf[min(t, self.deadline), columns["s"]] / self._denom


def bernoulli_upper_tail_approx(p0, p1, deadline, alpha, scale: str = "event-mass") -> UpperTailDoob:
    """Doob strategy of the best count-threshold tail event.

    Drops any partial boundary level, so the conditional mass is Markov
    in the running count; power is at most the exact event's, equal
    exactly when the exact event has no boundary strings.
    """
    return UpperTailDoob(p0, p1, deadline, alpha, scale=scale)


class BernoulliDoobStrategy:
    """Doob e-process of an exact threshold-plus-boundary event.

    The boundary strings form a lexicographic initial segment of their
    level, so a prefix's selected completions are none, all, or (for
    exactly one prefix per round) a residual count.  State is therefore
    (ones count, mode), with the single frontier residual tracked per
    round; both Monte Carlo and the exact sweep stay polynomial.
    Modes: 0 = no boundary completions, 1 = all of them, 2 = frontier.
    """

    state_kind = "integer"

    def __init__(self, event: NPEventBernoulli, scale: str = "event-mass", label: str | None = None):
        if not isinstance(event, NPEventBernoulli):
            raise DomainError("event must be an NPEventBernoulli")
        if not event.is_threshold:
            raise DomainError(
                "the aggregated Doob strategy needs a threshold-plus-boundary "
                "event; evaluate general events with bernoulli_doob_value"
            )
        if scale not in ("event-mass", "alpha"):
            raise DomainError(f"scale must be 'event-mass' or 'alpha', got {scale!r}")
        if event.null_mass == 0:
            raise DomainError("empty event: the Doob process is identically zero")
        self.event = event
        self.scale = scale
        self.label = label if label is not None else (
            "np-doob" if scale == "event-mass" else "np-doob-alpha"
        )
        T = event.deadline
        k = event.threshold
        r = event.boundary_count
        q = k - 1
        p0 = event.p0
        self._deadline = T

        def tail(t: int, s: int) -> Fraction:
            return _binom_tail(T - t, k - s, p0)

        def boundary_weight(t: int, s: int) -> Fraction:
            j = q - s
            L = T - t
            if j < 0 or j > L:
                return Fraction(0)
            return p0**j * (1 - p0) ** (L - j)

        h_none = np.empty((T + 1, T + 1))
        h_all = np.empty((T + 1, T + 1))
        for t in range(T + 1):
            for s in range(T + 1):
                base = tail(t, s)
                h_none[t, s] = _float_below_one(base)
                j = q - s
                L = T - t
                extra = math.comb(L, j) * boundary_weight(t, s) if 0 <= j <= L else Fraction(0)
                h_all[t, s] = _float_below_one(base + extra)
        # Frontier chain: residual boundary count of the one straddling
        # prefix per round, plus the mode its children take.
        fs = np.full(T + 1, -1, dtype=np.int64)
        fb = np.zeros(T + 1, dtype=np.int64)
        fh = np.full(T + 1, np.nan)
        mode1 = np.full(T + 1, -1, dtype=np.int64)
        mode0 = np.full(T + 1, -1, dtype=np.int64)
        if k >= 1 and 0 < r < math.comb(T, q):
            fs[0], fb[0] = 0, r
        elif k >= 1 and r == math.comb(T, q):
            # A full boundary level would have been folded into the
            # threshold by the event constructor.
            raise DomainError("boundary count equals the full level")
        for t in range(T + 1):
            if fs[t] >= 0:
                fh[t] = _float_below_one(
                    tail(t, int(fs[t])) + int(fb[t]) * boundary_weight(t, int(fs[t]))
                )
        for t in range(1, T + 1):
            s_prev, b_prev = int(fs[t - 1]), int(fb[t - 1])
            if s_prev < 0:
                continue
            L = T - (t - 1)
            ones_block = math.comb(L - 1, q - s_prev - 1) if q - s_prev - 1 >= 0 else 0
            if b_prev < ones_block:
                mode1[t], mode0[t] = 2, 0
                fs[t], fb[t] = s_prev + 1, b_prev
            elif b_prev == ones_block:
                mode1[t], mode0[t] = 1, 0
            else:
                mode1[t], mode0[t] = 1, 2
                fs[t], fb[t] = s_prev, b_prev - ones_block
            if fs[t] >= 0:
                fh[t] = _float_below_one(
                    tail(t, int(fs[t])) + int(fb[t]) * boundary_weight(t, int(fs[t]))
                )
        self._h_none = h_none
        self._h_all = h_all
        self._fh = fh
        self._mode1 = mode1
        self._mode0 = mode0
        if k >= 1 and 0 < r:
            self._initial_mode = 2
        else:
            self._initial_mode = 1 if k == 0 else 0
        self._denom = float(event.null_mass if scale == "event-mass" else event.alpha)

    def initial_columns(self, paths: int) -> dict[str, np.ndarray]:
        return {
            "s": np.zeros(paths, dtype=np.int64),
            "mode": np.full(paths, self._initial_mode, dtype=np.int64),
        }

    def advance(self, t: int, outcomes: np.ndarray, columns: dict[str, np.ndarray]) -> None:
        if t > self._deadline:
            return
        ones = outcomes > 0.5
        mode = columns["mode"]
        frontier = mode == 2
        if frontier.any():
            mode[frontier] = np.where(ones[frontier], self._mode1[t], self._mode0[t])
        columns["s"] += ones

    def evidence(self, t: int, columns: dict[str, np.ndarray]) -> np.ndarray:
        tt = min(t, self._deadline)
        s = columns["s"]
        mode = columns["mode"]
        h = np.where(mode == 1, self._h_all[tt, s], self._h_none[tt, s])
        h = np.where(mode == 2, self._fh[tt], h)
        return h / self._denom


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DoobTrace:
    """E-process values U_0..U_n along one outcome path."""

    values: np.ndarray
    rejected: bool
    rejection_round: int | None


def doob_trace(source, outcomes, scale: str = "event-mass") -> DoobTrace:
    """Evaluate a Doob e-process along one path and flag its rejection.

    ``source`` is an NPEventBernoulli, an UpperTailDoob, or a
    GaussianDoob; rejection is the first round with U >= 1/alpha.  The
    alpha scaling divides by alpha instead of the event's null mass
    (identical for the Gaussian event, whose mass is exactly alpha).
    """
    if scale not in ("event-mass", "alpha"):
        raise DomainError(f"scale must be 'event-mass' or 'alpha', got {scale!r}")
    if isinstance(source, NPEventBernoulli):
        bits = _check_bits(outcomes, source.deadline)
        denom = source.null_mass if scale == "event-mass" else source.alpha
        if denom == 0:
            raise DomainError("empty event: the Doob process is identically zero")
        alpha = float(source.alpha)
        values = [
            float(bernoulli_doob_value(source, bits[:t]) / denom)
            for t in range(len(bits) + 1)
        ]
    elif isinstance(source, UpperTailDoob):
        bits = _check_bits(outcomes, source.deadline)
        denom = source.event_mass if scale == "event-mass" else source.alpha
        if denom == 0:
            raise DomainError("empty event: the Doob process is identically zero")
        alpha = float(source.alpha)
        s = 0
        values = [float(source.h(0, 0) / denom)]
        for t, b in enumerate(bits, start=1):
            s += b
            values.append(float(source.h(t, s) / denom))
    elif isinstance(source, GaussianDoob):
        draws = np.asarray(outcomes, dtype=np.float64).ravel()
        if draws.size > source.deadline:
            raise DomainError(
                f"path of length {draws.size} exceeds the deadline {source.deadline}"
            )
        alpha = source.alpha
        sums = np.concatenate([[0.0], np.cumsum(draws)])
        values = [source.u_star(t, sums[t]) for t in range(draws.size + 1)]
    else:
        raise DomainError(f"unsupported Doob source {type(source).__name__}")
    arr = np.asarray(values, dtype=np.float64)
    crossing = np.nonzero(arr >= 1.0 / alpha)[0]
    rejected = crossing.size > 0
    return DoobTrace(
        values=arr,
        rejected=rejected,
        rejection_round=int(crossing[0]) if rejected else None,
    )


# ---------------------------------------------------------------------------
# Exact stopping distributions
# ---------------------------------------------------------------------------


def exact_stopping_distribution(
    problem: TestingProblem, strategy, horizon: int, measure: str = "alternative"
) -> StoppingDistribution:
    """Exact law of the first round where evidence reaches 1/alpha.

    Sweeps prefix states round by round, splitting each row into its
    outcome-0 and outcome-1 children, dropping rows as soon as they
    cross, and merging identical integer-state rows so Markov strategies
    cost O(horizon^2) instead of O(2^horizon).
    """
    _check_strategy(strategy)
    if problem.variant != "bernoulli":
        raise DomainError("exact enumeration is defined for Bernoulli problems")
    if measure not in ("null", "alternative"):
        raise DomainError(f"measure must be 'null' or 'alternative', got {measure!r}")
    if not (isinstance(horizon, (int, np.integer)) and horizon >= 1):
        raise DomainError(f"horizon must be a positive integer, got {horizon!r}")
    horizon = int(horizon)
    if strategy.state_kind != "integer" and horizon > PATH_ENUMERATION_CAP:
        raise IntractableError(
            f"strategy with per-path state: enumerating 2^{horizon} prefixes "
            f"is refused above horizon {PATH_ENUMERATION_CAP}"
        )
    p = float(problem.p1 if measure == "alternative" else problem.p0)
    threshold = 1.0 / problem.alpha
    columns = strategy.initial_columns(1)
    weights = np.ones(1, dtype=np.float64)
    masses = np.zeros(horizon + 1)
    names = sorted(columns)
    for t in range(1, horizon + 1):
        n = weights.size
        columns = {name: np.concatenate([col, col]) for name, col in columns.items()}
        outcomes = np.concatenate([np.zeros(n), np.ones(n)])
        weights = np.concatenate([weights * (1.0 - p), weights * p])
        strategy.advance(t, outcomes, columns)
        evidence = np.asarray(strategy.evidence(t, columns), dtype=np.float64)
        crossed = evidence >= threshold
        if crossed.any():
            masses[t] = float(weights[crossed].sum())
            keep = ~crossed
            columns = {name: col[keep] for name, col in columns.items()}
            weights = weights[keep]
            if weights.size == 0:
                break
        if strategy.state_kind == "integer":
            key = np.stack([columns[name] for name in names], axis=1)
            uniq, inverse = np.unique(key, axis=0, return_inverse=True)
            if uniq.shape[0] < weights.size:
                weights = np.bincount(
                    inverse.reshape(-1), weights=weights, minlength=uniq.shape[0]
                )
                columns = {name: uniq[:, i].copy() for i, name in enumerate(names)}
    return StoppingDistribution(
        horizon=horizon,
        masses=masses,
        estimator="exact",
        measure=measure,
        label=strategy.label,
    )


# ---------------------------------------------------------------------------
# Export helpers
# ---------------------------------------------------------------------------


def event_record(event) -> dict:
    """JSON-ready description of a terminal event."""
    if isinstance(event, NPEventBernoulli):
        return {
            "kind": "bernoulli",
            "deadline": event.deadline,
            "threshold": event.threshold,
            "boundary_count": event.boundary_count,
            "level_counts": list(event.level_counts),
            "null_mass": float(event.null_mass),
            "null_mass_exact": str(event.null_mass),
            "power": float(event.power),
            "power_exact": str(event.power),
            "alpha": float(event.alpha),
            "p0": float(event.p0),
            "p1": float(event.p1),
        }
    if isinstance(event, GaussianDoob):
        return {
            "kind": "gaussian",
            "deadline": event.deadline,
            "threshold": event.threshold,
            "alpha": event.alpha,
            "sigma": event.sigma,
        }
    raise DomainError(f"unsupported event {type(event).__name__}")


def distribution_records(dist: StoppingDistribution) -> list[dict]:
    """Rows (round, mass, cdf) for CSV emission."""
    cdf = dist.cdf
    return [
        {"round": t, "mass": float(dist.masses[t]), "cdf": float(cdf[t])}
        for t in range(1, dist.horizon + 1)
    ]
