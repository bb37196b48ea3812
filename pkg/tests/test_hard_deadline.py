"""Deadline-optimal events, their Doob processes, and exact stopping laws.

Oracles are independent of the code under test: complete enumeration
over per-level count vectors (tiny deadlines), an exact Pareto-frontier
sweep over (null mass, hit mass) pairs (medium deadlines), explicit
lexicographic string sorts for all rank arithmetic, per-prefix rational
conditional masses by brute completion, a high-precision normal
quantile, and an all-paths walker for stopping laws.
"""

import itertools
import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from timebet import edo
from timebet.bellman import WealthGrid, backward_induction, default_action_grid
from timebet.errors import DomainError, IntractableError
from timebet.hard_deadline import (
    BernoulliDoobStrategy,
    DoobTrace,
    GaussianDoob,
    NPEventBernoulli,
    PATH_ENUMERATION_CAP,
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
from timebet.model import Bernoulli, Gaussian, TestingProblem, canonical_family, payoff_pair
from timebet.reward import HardDeadline
from timebet.simulate import CappedConstantBet, ConstantBet, PolicyStrategy, SimConfig, run

ALPHA = 0.05
BER = TestingProblem(Bernoulli(0.4), Bernoulli(0.6), ALPHA)
THRESHOLD = 1.0 / ALPHA


def fr(x) -> Fraction:
    return Fraction(str(x))


def level_weights(p, deadline: int) -> list[Fraction]:
    pf = fr(p)
    return [pf**k * (1 - pf) ** (deadline - k) for k in range(deadline + 1)]


def product_exhaustive_power(p0, p1, deadline, alpha) -> Fraction:
    """Best hit mass over every per-level count vector, by full product."""
    w = level_weights(p0, deadline)
    b = level_weights(p1, deadline)
    af = fr(alpha)
    best = Fraction(0)
    ranges = [range(math.comb(deadline, k) + 1) for k in range(deadline + 1)]
    for counts in itertools.product(*ranges):
        mass = sum(m * wk for m, wk in zip(counts, w))
        if mass <= af:
            value = sum(m * bk for m, bk in zip(counts, b))
            if value > best:
                best = value
    return best


def pareto_power(p0, p1, deadline, alpha) -> Fraction:
    """Best hit mass via a dominance-pruned exact (mass, value) frontier."""
    w = level_weights(p0, deadline)
    b = level_weights(p1, deadline)
    af = fr(alpha)
    frontier = {Fraction(0): Fraction(0)}
    for k in range(deadline + 1):
        cap = math.comb(deadline, k)
        merged: dict[Fraction, Fraction] = {}
        for mass, value in frontier.items():
            top = min(cap, int((af - mass) / w[k]))
            for m in range(top + 1):
                nm = mass + m * w[k]
                nv = value + m * b[k]
                if merged.get(nm, Fraction(-1)) < nv:
                    merged[nm] = nv
        frontier = {}
        best = Fraction(-1)
        for mass in sorted(merged):
            if merged[mass] > best:
                best = merged[mass]
                frontier[mass] = best
    return max(frontier.values())


def lex_level(deadline: int, level: int) -> list[tuple[int, ...]]:
    """All strings of one level, 1 before 0 at the leftmost differing bit."""
    return sorted(
        (bits for bits in itertools.product((0, 1), repeat=deadline) if sum(bits) == level),
        reverse=True,
    )


def oracle_includes(event: NPEventBernoulli, bits: tuple[int, ...], lex_cache: dict) -> bool:
    level = sum(bits)
    if level not in lex_cache:
        lex_cache[level] = {s: i for i, s in enumerate(lex_level(event.deadline, level))}
    return lex_cache[level][bits] < event.level_counts[level]


def oracle_doob_value(event: NPEventBernoulli, prefix: tuple[int, ...], lex_cache: dict) -> Fraction:
    """Conditional null mass by brute enumeration of completions."""
    rest = event.deadline - len(prefix)
    p0 = event.p0
    total = Fraction(0)
    for tail_bits in itertools.product((0, 1), repeat=rest):
        if oracle_includes(event, tuple(prefix) + tail_bits, lex_cache):
            s = sum(tail_bits)
            total += p0**s * (1 - p0) ** (rest - s)
    return total


def walk_all_paths(strategy, deadline: int):
    """Drive a strategy over every path; per-round evidence plus paths."""
    paths = np.array(list(itertools.product((0, 1), repeat=deadline)), dtype=np.float64)
    columns = strategy.initial_columns(paths.shape[0])
    evidence = []
    for t in range(1, deadline + 1):
        strategy.advance(t, paths[:, t - 1].copy(), columns)
        evidence.append(np.asarray(strategy.evidence(t, columns), dtype=np.float64).copy())
    return paths.astype(np.int64), evidence


def brute_stopping_masses(problem, strategy, deadline: int, measure: str):
    """Exact stopping masses from the all-paths walk (float crossings)."""
    p = fr(problem.p1 if measure == "alternative" else problem.p0)
    threshold = 1.0 / problem.alpha
    paths, evidence = walk_all_paths(strategy, deadline)
    first = np.full(paths.shape[0], -1)
    for t, ev in enumerate(evidence, start=1):
        hit = (ev >= threshold) & (first < 0)
        first[hit] = t
    masses = [Fraction(0)] * (deadline + 1)
    for i in range(paths.shape[0]):
        if first[i] > 0:
            s = int(paths[i].sum())
            masses[first[i]] += p**s * (1 - p) ** (deadline - s)
    return masses


class TestEventConstruction:
    def test_pinned_threshold_and_boundary_small(self):
        event = bernoulli_np_greedy(0.4, 0.6, 10, 0.05)
        assert event.threshold == 8
        assert event.boundary_count == 106
        assert event.null_mass <= fr(0.05)

    def test_pinned_threshold_and_boundary_large(self):
        event = bernoulli_np_greedy(0.4, 0.6, 20, 0.05)
        assert event.threshold == 13
        assert event.boundary_count == 102809

    def test_power_matches_direct_tail_formula(self):
        event = bernoulli_np_greedy(0.4, 0.6, 10, 0.05)
        tail = sum(math.comb(10, j) * 0.6**j * 0.4 ** (10 - j) for j in range(8, 11))
        boundary = 106 * 0.6**7 * 0.4**3
        assert float(event.power) == pytest.approx(tail + boundary, rel=1e-12)
        assert float(event.power) == pytest.approx(0.357198336, abs=1e-12)

    def test_maximality_one_more_boundary_string_breaks_budget(self):
        for deadline, alpha in ((10, 0.05), (20, 0.05), (7, 0.2)):
            event = bernoulli_np_greedy(0.4, 0.6, deadline, alpha)
            q = event.threshold - 1
            weight = event.p0**q * (1 - event.p0) ** (deadline - q)
            assert event.null_mass + weight > fr(alpha)

    def test_tiny_example_event_and_membership(self):
        event = bernoulli_np_exact(0.5, 0.75, 3, 0.25)
        assert event.level_counts == (0, 0, 1, 1)
        assert event.null_mass == Fraction(1, 4)
        assert event.power == Fraction(36, 64)
        members = {bits for bits in itertools.product((0, 1), repeat=3) if event.includes(bits)}
        assert members == {(1, 1, 1), (1, 1, 0)}

    def test_two_round_half_example(self):
        event = bernoulli_np_greedy(0.5, 0.7, 2, 0.25)
        assert event.level_counts == (0, 0, 1)
        assert event.power == fr(0.7) ** 2

    def test_all_ones_over_budget_gives_empty_event(self):
        event = bernoulli_np_greedy(0.4, 0.6, 3, 0.05)
        assert event.null_mass == 0
        assert event.power == 0
        assert all(m == 0 for m in event.level_counts)

    def test_greedy_rejects_large_p0(self):
        with pytest.raises(DomainError, match="p0 <= 1/2"):
            bernoulli_np_greedy(0.6, 0.8, 5, 0.05)

    def test_ordering_validation(self):
        with pytest.raises(DomainError, match="p1 > p0"):
            bernoulli_np_greedy(0.4, 0.4, 5, 0.05)
        with pytest.raises(DomainError, match="p1 > p0"):
            bernoulli_np_exact(0.5, 0.3, 5, 0.05)

    def test_constructor_rejects_bad_counts(self):
        with pytest.raises(DomainError, match="outside"):
            NPEventBernoulli(3, fr(0.4), fr(0.6), fr(0.5), (0, 4, 0, 0))
        with pytest.raises(DomainError, match="one level count per level"):
            NPEventBernoulli(3, fr(0.4), fr(0.6), fr(0.5), (0, 0, 0))

    def test_constructor_rejects_overweight_event(self):
        with pytest.raises(DomainError, match="exceeds alpha"):
            NPEventBernoulli(3, fr(0.4), fr(0.6), fr(0.05), (0, 0, 0, 1))

    def test_threshold_detection_shapes(self):
        full_top = NPEventBernoulli(3, fr(0.4), fr(0.6), fr(0.5), (0, 0, 2, 1))
        assert full_top.threshold == 3 and full_top.boundary_count == 2
        gap = NPEventBernoulli(3, fr(0.2), fr(0.6), fr(0.6), (1, 0, 0, 1))
        assert gap.threshold is None and gap.boundary_count is None
        assert not gap.is_threshold

    def test_membership_needs_full_string(self):
        event = bernoulli_np_greedy(0.4, 0.6, 5, 0.05)
        with pytest.raises(DomainError, match="full-length"):
            event.includes((1, 0))


class TestExactSolver:
    def test_greedy_counterexample_needs_knapsack(self):
        # With p1 < 1/2 the all-zeros string is heavier but more likely
        # under the alternative, so the greedy threshold shape loses.
        greedy = bernoulli_np_greedy(0.4, 0.45, 2, 0.37)
        exact = bernoulli_np_exact(0.4, 0.45, 2, 0.37)
        assert greedy.level_counts == (0, 0, 1)
        assert greedy.power == fr(0.45) ** 2
        assert exact.level_counts == (1, 0, 0)
        assert exact.power == fr(0.55) ** 2
        assert exact.power > greedy.power

    def test_matches_product_exhaustive_oracle(self):
        rng = np.random.default_rng(31)
        for _ in range(14):
            deadline = int(rng.integers(1, 6))
            p0 = round(float(rng.uniform(0.05, 0.9)), 3)
            p1 = round(float(rng.uniform(p0 + 0.02, 0.98)), 3)
            alpha = round(float(rng.uniform(0.01, 0.6)), 3)
            event = bernoulli_np_exact(p0, p1, deadline, alpha)
            assert event.power == product_exhaustive_power(p0, p1, deadline, alpha), (
                p0,
                p1,
                deadline,
                alpha,
            )

    @pytest.mark.parametrize(
        "p0,p1,deadline,alpha",
        [
            (0.55, 0.7, 8, 0.05),
            (0.6, 0.8, 8, 0.1),
            (0.35, 0.45, 8, 0.2),
            (0.7, 0.9, 7, 0.15),
            (0.45, 0.48, 9, 0.3),
        ],
    )
    def test_matches_pareto_frontier_oracle(self, p0, p1, deadline, alpha):
        event = bernoulli_np_exact(p0, p1, deadline, alpha)
        assert event.power == pareto_power(p0, p1, deadline, alpha)

    def test_greedy_is_optimal_on_its_provable_regime(self):
        # Pointwise domination needs p0 <= 1/2 <= p1; verify against the
        # independent frontier oracle rather than the solver fast path.
        for p0, p1, deadline, alpha in [
            (0.1, 0.5, 7, 0.05),
            (0.3, 0.6, 8, 0.2),
            (0.5, 0.9, 6, 0.37),
            (0.45, 0.55, 8, 0.01),
        ]:
            greedy = bernoulli_np_greedy(p0, p1, deadline, alpha)
            assert greedy.power == pareto_power(p0, p1, deadline, alpha)

    def test_alpha_one_selects_everything(self):
        event = bernoulli_np_exact(0.4, 0.6, 4, 1)
        assert event.power == 1
        assert event.null_mass == 1
        assert event.level_counts == tuple(math.comb(4, k) for k in range(5))

    def test_deadline_cap_refusal(self):
        with pytest.raises(IntractableError, match="upper_tail"):
            bernoulli_np_exact(0.6, 0.8, 31, 0.05)

    def test_large_p0_event_can_lack_threshold_shape(self):
        event = bernoulli_np_exact(0.6, 0.8, 30, 0.05)
        assert event.threshold is None
        assert event.null_mass <= fr(0.05)


class TestRankArithmetic:
    def test_membership_matches_lex_sort_everywhere(self):
        event = bernoulli_np_greedy(0.4, 0.6, 8, 0.05)
        cache: dict = {}
        for bits in itertools.product((0, 1), repeat=8):
            assert event.includes(bits) == oracle_includes(event, bits, cache)

    def test_prefix_completions_form_contiguous_blocks(self):
        deadline = 9
        rng = np.random.default_rng(5)
        for level in (3, 5, 7):
            ordered = lex_level(deadline, level)
            index = {s: i for i, s in enumerate(ordered)}
            for _ in range(25):
                t = int(rng.integers(0, deadline))
                prefix = tuple(int(b) for b in rng.integers(0, 2, size=t))
                ranks = sorted(
                    index[prefix + tail_bits]
                    for tail_bits in itertools.product((0, 1), repeat=deadline - t)
                    if sum(prefix) + sum(tail_bits) == level
                )
                if ranks:
                    assert ranks == list(range(ranks[0], ranks[0] + len(ranks)))


class TestDoobValue:
    def test_matches_brute_completion_oracle(self):
        event = bernoulli_np_greedy(0.4, 0.6, 6, 0.15)
        cache: dict = {}
        for t in range(7):
            for prefix in itertools.product((0, 1), repeat=t):
                assert bernoulli_doob_value(event, prefix) == oracle_doob_value(
                    event, prefix, cache
                )

    def test_general_event_matches_brute_oracle(self):
        # Non-threshold shape from the knapsack branch.
        event = NPEventBernoulli(5, fr(0.2), fr(0.6), fr(0.7), (1, 2, 0, 3, 1, 1))
        cache: dict = {}
        for t in range(6):
            for prefix in itertools.product((0, 1), repeat=t):
                assert bernoulli_doob_value(event, prefix) == oracle_doob_value(
                    event, prefix, cache
                )

    def test_empty_prefix_gives_event_mass(self):
        event = bernoulli_np_greedy(0.4, 0.6, 10, 0.05)
        assert bernoulli_doob_value(event, ()) == event.null_mass
        assert bernoulli_doob_value(event, "") == event.null_mass

    def test_exact_martingale_identity_all_prefixes(self):
        event = bernoulli_np_greedy(0.4, 0.6, 10, 0.05)
        p0 = event.p0
        for t in range(10):
            for prefix in itertools.product((0, 1), repeat=t):
                parent = bernoulli_doob_value(event, prefix)
                one = bernoulli_doob_value(event, prefix + (1,))
                zero = bernoulli_doob_value(event, prefix + (0,))
                assert p0 * one + (1 - p0) * zero == parent

    def test_forced_membership_is_exactly_one(self):
        event = bernoulli_np_greedy(0.4, 0.6, 10, 0.05)
        assert bernoulli_doob_value(event, (1,) * 8) == 1
        # e-process value at the forced prefix is 1/h0 >= 1/alpha
        assert 1 / float(event.null_mass) >= 1 / 0.05

    def test_tiny_example_forced_after_two_ones(self):
        event = bernoulli_np_exact(0.5, 0.75, 3, 0.25)
        assert bernoulli_doob_value(event, "11") == 1
        assert bernoulli_doob_value(event, "0") == 0

    def test_prefix_validation(self):
        event = bernoulli_np_greedy(0.4, 0.6, 4, 0.05)
        with pytest.raises(DomainError, match="exceeds the deadline"):
            bernoulli_doob_value(event, (1, 0, 1, 0, 1))
        with pytest.raises(DomainError, match="0 or 1"):
            bernoulli_doob_value(event, "10x")
        with pytest.raises(DomainError, match="0 or 1"):
            bernoulli_doob_value(event, (1, 2))


class TestUpperTail:
    def test_threshold_matches_greedy_cut(self):
        for deadline, alpha in ((10, 0.05), (20, 0.05), (7, 0.3)):
            tail = bernoulli_upper_tail_approx(0.4, 0.6, deadline, alpha)
            greedy = bernoulli_np_greedy(0.4, 0.6, deadline, alpha)
            assert tail.threshold == greedy.threshold

    def test_pinned_threshold(self):
        tail = bernoulli_upper_tail_approx(0.4, 0.6, 10, 0.05)
        assert tail.threshold == 8
        assert tail.event_mass == sum(
            math.comb(10, j) * fr(0.4) ** j * fr(0.6) ** (10 - j) for j in range(8, 11)
        )

    def test_power_dominated_by_exact_with_equality_iff_no_boundary(self):
        weaker = bernoulli_np_greedy(0.4, 0.6, 10, 0.05)
        tail = bernoulli_upper_tail_approx(0.4, 0.6, 10, 0.05)
        assert weaker.boundary_count > 0
        assert tail.power < weaker.power
        # An alpha exactly on a tail probability leaves no boundary room.
        exact_alpha = sum(math.comb(6, j) * fr(0.5) ** 6 for j in range(5, 7))
        event = bernoulli_np_greedy(0.5, 0.7, 6, exact_alpha)
        tail2 = bernoulli_upper_tail_approx(0.5, 0.7, 6, exact_alpha)
        assert event.boundary_count == 0
        assert tail2.power == event.power

    def test_h_table_is_binomial_survival(self):
        tail = bernoulli_upper_tail_approx(0.4, 0.6, 9, 0.05)
        k = tail.threshold
        p0 = fr(0.4)
        for t in range(10):
            for s in range(t + 1):
                rest = 9 - t
                below = sum(
                    math.comb(rest, j) * p0**j * (1 - p0) ** (rest - j)
                    for j in range(0, max(k - s, 0))
                )
                assert tail.h(t, s) == 1 - below

    def test_h_monotone_in_count_and_terminal_indicator(self):
        tail = bernoulli_upper_tail_approx(0.4, 0.6, 12, 0.05)
        for t in range(12):
            values = [tail.h(t, s) for s in range(t + 1)]
            assert all(b >= a for a, b in zip(values, values[1:]))
        for s in range(13):
            assert tail.h(12, s) == (1 if s >= tail.threshold else 0)

    def test_action_is_exact_probability_measure(self):
        tail = bernoulli_upper_tail_approx(0.4, 0.6, 9, 0.05)
        for t in range(1, 10):
            for s in range(t):
                mass_one, mass_zero = tail.action(t, s)
                assert mass_one + mass_zero == 1
                assert mass_one >= 0 and mass_zero >= 0

    def test_action_martingale_identity(self):
        tail = bernoulli_upper_tail_approx(0.3, 0.6, 8, 0.1)
        p0 = tail.p0
        for t in range(1, 9):
            for s in range(t):
                prev = tail.h(t - 1, s)
                assert p0 * tail.h(t, s + 1) + (1 - p0) * tail.h(t, s) == prev

    def test_unreachable_state_gets_flat_action(self):
        # alpha = p0^5 forces the cut to the top level; one early zero
        # kills the event, and the action there is the flat null bet.
        tail = bernoulli_upper_tail_approx(0.4, 0.6, 5, 0.4**5 + 1e-12)
        assert tail.threshold == 5
        assert tail.h(1, 0) == 0
        assert tail.action(2, 0) == (tail.p0, 1 - tail.p0)

    def test_validation(self):
        with pytest.raises(DomainError, match="p1 > p0"):
            bernoulli_upper_tail_approx(0.6, 0.5, 5, 0.05)
        with pytest.raises(DomainError, match="scale"):
            UpperTailDoob(0.4, 0.6, 5, 0.05, scale="both")
        tail = bernoulli_upper_tail_approx(0.4, 0.6, 5, 0.05)
        with pytest.raises(DomainError, match="outside"):
            tail.h(6, 0)
        with pytest.raises(DomainError, match="outside"):
            tail.h(2, 3)
        with pytest.raises(DomainError, match="outside"):
            tail.action(0, 0)


class TestBernoulliDoobStrategy:
    def test_evidence_matches_per_prefix_conditional_mass(self):
        event = bernoulli_np_greedy(0.4, 0.6, 10, 0.05)
        strategy = BernoulliDoobStrategy(event)
        denominator = float(event.null_mass)
        paths, evidence = walk_all_paths(strategy, 10)
        for t in range(1, 11):
            seen: dict[tuple[int, ...], float] = {}
            for i in range(paths.shape[0]):
                prefix = tuple(paths[i, :t])
                if prefix not in seen:
                    seen[prefix] = float(bernoulli_doob_value(event, prefix)) / denominator
                assert evidence[t - 1][i] == pytest.approx(seen[prefix], rel=1e-12, abs=1e-300)

    def test_terminal_evidence_is_membership_indicator(self):
        event = bernoulli_np_greedy(0.4, 0.6, 12, 0.05)
        strategy = BernoulliDoobStrategy(event)
        paths, evidence = walk_all_paths(strategy, 12)
        top = 1.0 / float(event.null_mass)
        for i in range(paths.shape[0]):
            member = event.includes(tuple(paths[i]))
            assert evidence[-1][i] == (top if member else 0.0)

    def test_rejects_exactly_the_members_and_attains_power(self):
        event = bernoulli_np_exact(0.4, 0.6, 12, 0.05)
        masses = brute_stopping_masses(BER, BernoulliDoobStrategy(event), 12, "alternative")
        assert sum(masses) == event.power
        null_masses = brute_stopping_masses(BER, BernoulliDoobStrategy(event), 12, "null")
        assert sum(null_masses) == event.null_mass

    def test_scalings_stop_identically_for_optimal_event(self):
        # For the exact optimum, a crossing below forced membership would
        # build a better valid terminal test than the optimum: impossible.
        event = bernoulli_np_exact(0.4, 0.6, 12, 0.05)
        base = brute_stopping_masses(BER, BernoulliDoobStrategy(event), 12, "alternative")
        alt = brute_stopping_masses(
            BER, BernoulliDoobStrategy(event, scale="alpha"), 12, "alternative"
        )
        assert base == alt

    def test_needs_threshold_shape(self):
        event = NPEventBernoulli(5, fr(0.2), fr(0.6), fr(0.7), (1, 2, 0, 3, 1, 1))
        with pytest.raises(DomainError, match="threshold"):
            BernoulliDoobStrategy(event)

    def test_rejects_empty_event_and_bad_scale(self):
        empty = bernoulli_np_greedy(0.4, 0.6, 3, 0.05)
        with pytest.raises(DomainError, match="empty"):
            BernoulliDoobStrategy(empty)
        event = bernoulli_np_greedy(0.4, 0.6, 6, 0.05)
        with pytest.raises(DomainError, match="scale"):
            BernoulliDoobStrategy(event, scale="mass")
        with pytest.raises(DomainError, match="NPEventBernoulli"):
            BernoulliDoobStrategy("event")

    def test_monte_carlo_agrees_with_exact_law(self):
        event = bernoulli_np_greedy(0.4, 0.6, 15, 0.05)
        strategy = BernoulliDoobStrategy(event)
        exact = exact_stopping_distribution(BER, strategy, 15)
        mc = run(BER, strategy, SimConfig(horizon=15, paths=40000, seed=3))
        se = mc.standard_errors
        for t in range(1, 16):
            slack = 4.0 * se[t] + 1e-9
            assert abs(mc.masses[t] - exact.masses[t]) < slack


class TestGaussianDoob:
    def test_threshold_matches_high_precision_quantile(self):
        doob = gaussian_np(1.0, 30, 0.05)
        mpmath.mp.dps = 40
        oracle = float(mpmath.sqrt(30) * mpmath.sqrt(2) * mpmath.erfinv(mpmath.mpf("0.9")))
        assert doob.threshold == pytest.approx(oracle, rel=1e-12)
        assert doob.threshold == pytest.approx(9.009234352755090, rel=1e-12)

    def test_event_mass_is_alpha(self):
        for sigma, deadline, alpha in ((1.0, 30, 0.05), (2.5, 7, 0.2), (0.3, 100, 0.01)):
            doob = gaussian_np(sigma, deadline, alpha)
            assert doob.h(0, 0.0) == pytest.approx(alpha, abs=1e-10)

    def test_h_strictly_inside_unit_interval_before_deadline(self):
        doob = gaussian_np(1.0, 30, 0.05)
        grid = np.linspace(-15.0, 40.0, 221)
        for t in (0, 1, 15, 29):
            values = doob.h(t, grid)
            assert np.all(values < 1.0)
            # Positivity is checkable only where the normal tail does
            # not underflow double precision.
            representable = (doob.threshold - grid) / math.sqrt(30 - t) < 35.0
            assert np.all(values[representable] > 0.0)
            assert np.all(np.diff(values) >= 0.0)

    def test_terminal_indicator(self):
        doob = gaussian_np(1.0, 30, 0.05)
        c = doob.threshold
        assert doob.h(30, c) == 1.0
        assert doob.h(30, c - 1e-9) == 0.0
        assert doob.u_star(30, c) == pytest.approx(1.0 / 0.05)

    def test_tower_property_via_quadrature(self):
        # Smooth rounds only: at the deadline h is a step function and
        # polynomial quadrature cannot integrate it (the identity there
        # is the definition of h at the previous round).
        doob = gaussian_np(1.3, 12, 0.1)
        nodes, weights = np.polynomial.hermite_e.hermegauss(80)
        weights = weights / np.sqrt(2.0 * np.pi)
        for t, s in ((0, 0.0), (3, 1.7), (5, 3.1), (8, -2.2), (10, 5.0)):
            mixed = float(np.sum(weights * doob.h(t + 1, s + 1.3 * nodes)))
            assert mixed == pytest.approx(doob.h(t, s), abs=1e-10)

    def test_never_rejects_before_deadline_even_far_above_threshold(self):
        doob = gaussian_np(1.0, 10, 0.05)
        columns = {"s": np.array([doob.threshold + 50.0])}
        for t in range(1, 10):
            assert doob.evidence(t, columns)[0] < THRESHOLD
        assert doob.evidence(10, columns)[0] >= THRESHOLD

    def test_simulated_law_concentrates_on_the_deadline(self):
        problem = TestingProblem(Gaussian(0.0, 1.0), Gaussian(0.6, 1.0), 0.05)
        doob = gaussian_np(1.0, 20, 0.05)
        out = run(problem, doob, SimConfig(horizon=25, paths=30000, seed=11, measure="null"))
        assert np.all(out.masses[:20] == 0.0)
        assert np.all(out.masses[21:] == 0.0)
        se = max(out.standard_errors[20], 1e-4)
        assert abs(out.masses[20] - 0.05) < 4.0 * se
        alt = run(problem, doob, SimConfig(horizon=20, paths=30000, seed=11))
        from scipy.special import ndtr

        power = 1.0 - float(ndtr((doob.threshold - 0.6 * 20) / math.sqrt(20)))
        assert abs(alt.masses[20] - power) < 4.0 * alt.standard_errors[20]

    def test_validation(self):
        with pytest.raises(DomainError, match="sigma"):
            gaussian_np(0.0, 10, 0.05)
        with pytest.raises(DomainError, match="alpha"):
            gaussian_np(1.0, 10, 1.0)
        with pytest.raises(DomainError, match="positive integer"):
            gaussian_np(1.0, 0, 0.05)
        doob = gaussian_np(1.0, 10, 0.05)
        with pytest.raises(DomainError, match="outside"):
            doob.h(11, 0.0)


class TestDoobTrace:
    def test_event_trace_starts_at_one_and_rejects_when_forced(self):
        event = bernoulli_np_exact(0.5, 0.75, 3, 0.25)
        trace = doob_trace(event, (1, 1, 0))
        assert trace.values[0] == 1.0
        assert trace.rejected
        assert trace.rejection_round == 2
        assert trace.values[2] == pytest.approx(1.0 / float(event.null_mass))
        dead = doob_trace(event, (0, 1, 1))
        assert not dead.rejected
        assert dead.rejection_round is None
        assert dead.values[1] == 0.0

    def test_trace_values_match_conditional_masses(self):
        event = bernoulli_np_greedy(0.4, 0.6, 10, 0.05)
        rng = np.random.default_rng(2)
        for _ in range(10):
            bits = tuple(int(b) for b in rng.integers(0, 2, size=10))
            trace = doob_trace(event, bits)
            assert len(trace.values) == 11
            for t in range(11):
                expected = float(bernoulli_doob_value(event, bits[:t]) / event.null_mass)
                assert trace.values[t] == pytest.approx(expected, rel=1e-12, abs=1e-300)

    def test_alpha_scale_starts_below_one_and_rejects_later_or_never(self):
        event = bernoulli_np_greedy(0.4, 0.6, 10, 0.05)
        rng = np.random.default_rng(8)
        for _ in range(20):
            bits = tuple(int(b) for b in rng.integers(0, 2, size=10))
            mass_scale = doob_trace(event, bits)
            alpha_scale = doob_trace(event, bits, scale="alpha")
            assert alpha_scale.values[0] == pytest.approx(
                float(event.null_mass / event.alpha), rel=1e-12
            )
            assert alpha_scale.values[0] <= 1.0
            if alpha_scale.rejected:
                assert mass_scale.rejected
                assert mass_scale.rejection_round <= alpha_scale.rejection_round

    def test_upper_tail_trace(self):
        tail = bernoulli_upper_tail_approx(0.4, 0.6, 10, 0.05)
        bits = (1,) * 8 + (0, 0)
        # The event-mass scaling can cross 1/alpha while membership is
        # still uncertain; the alpha scaling waits until it is forced.
        trace = doob_trace(tail, bits)
        assert trace.values[0] == 1.0
        assert trace.rejected
        assert trace.rejection_round == 5
        assert trace.values[4] < THRESHOLD <= trace.values[5]
        forced = doob_trace(tail, bits, scale="alpha")
        assert forced.rejected
        assert forced.rejection_round == 8
        assert float(tail.h(8, 8)) == 1.0
        partial = doob_trace(tail, bits[:4])
        assert len(partial.values) == 5

    def test_gaussian_trace(self):
        doob = gaussian_np(1.0, 10, 0.05)
        per_round = doob.threshold / 10.0
        hit = doob_trace(doob, [per_round] * 10)
        assert hit.rejected and hit.rejection_round == 10
        assert hit.values[0] == pytest.approx(1.0, rel=1e-8)
        miss = doob_trace(doob, [0.0] * 10)
        assert not miss.rejected

    def test_validation(self):
        event = bernoulli_np_greedy(0.4, 0.6, 5, 0.05)
        with pytest.raises(DomainError, match="scale"):
            doob_trace(event, (1, 0), scale="weird")
        with pytest.raises(DomainError, match="unsupported"):
            doob_trace(3.14, (1, 0))
        doob = gaussian_np(1.0, 5, 0.05)
        with pytest.raises(DomainError, match="exceeds the deadline"):
            doob_trace(doob, np.zeros(6))
        empty = bernoulli_np_greedy(0.4, 0.6, 3, 0.05)
        with pytest.raises(DomainError, match="empty"):
            doob_trace(empty, (1, 1, 1))


class TestExactStoppingEngine:
    def test_constant_bet_law_matches_direct_recursion(self):
        family = canonical_family(BER)
        gro = ConstantBet(BER, family, 0.6)
        dist = exact_stopping_distribution(BER, gro, 40)
        e0, e1 = payoff_pair(family, 0.6)
        p1 = fr(0.6)
        alive = {0: Fraction(1)}
        masses = np.zeros(41)
        for t in range(1, 41):
            merged: dict[int, Fraction] = {}
            for s, mass in alive.items():
                for bit, pr in ((1, p1), (0, 1 - p1)):
                    ns = s + bit
                    if np.power(e1, ns) * np.power(e0, t - ns) >= THRESHOLD:
                        masses[t] += float(mass * pr)
                    else:
                        merged[ns] = merged.get(ns, Fraction(0)) + mass * pr
            alive = merged
        assert np.abs(dist.masses - masses).max() < 1e-13
        assert dist.estimator == "exact"
        assert dist.label == gro.label
        assert dist.paths is None

    def test_exact_law_matches_monte_carlo(self):
        family = canonical_family(BER)
        gro = ConstantBet(BER, family, 0.6)
        exact = exact_stopping_distribution(BER, gro, 30)
        mc = run(BER, gro, SimConfig(horizon=30, paths=50000, seed=17))
        se = mc.standard_errors
        for t in range(1, 31):
            assert abs(exact.masses[t] - mc.masses[t]) < 4.0 * se[t] + 1e-9

    def test_null_bet_never_rejects(self):
        family = canonical_family(BER)
        flat = ConstantBet(BER, family, 0.4)
        dist = exact_stopping_distribution(BER, flat, 30)
        assert np.all(dist.masses == 0.0)
        assert dist.never_reject == 1.0

    def test_doob_and_upper_tail_brute_force_both_scales_and_measures(self):
        event = bernoulli_np_exact(0.4, 0.6, 12, 0.05)
        strategies = [
            BernoulliDoobStrategy(event),
            BernoulliDoobStrategy(event, scale="alpha"),
            UpperTailDoob(0.4, 0.6, 12, 0.05),
            UpperTailDoob(0.4, 0.6, 12, 0.05, scale="alpha"),
        ]
        for strategy in strategies:
            for measure in ("alternative", "null"):
                dist = exact_stopping_distribution(BER, strategy, 12, measure=measure)
                brute = brute_stopping_masses(BER, strategy, 12, measure)
                for t in range(13):
                    assert dist.masses[t] == pytest.approx(float(brute[t]), abs=1e-12)

    def test_upper_tail_alpha_scale_rejects_exactly_the_tail_event(self):
        tail = UpperTailDoob(0.4, 0.6, 14, 0.05, scale="alpha")
        alt = exact_stopping_distribution(BER, tail, 14)
        null = exact_stopping_distribution(BER, tail, 14, measure="null")
        assert alt.cdf[14] == pytest.approx(float(tail.power), abs=1e-12)
        assert null.cdf[14] == pytest.approx(float(tail.event_mass), abs=1e-12)

    def test_upper_tail_event_mass_lands_between_powers(self):
        event = bernoulli_np_exact(0.4, 0.6, 14, 0.05)
        tail = UpperTailDoob(0.4, 0.6, 14, 0.05)
        dist = exact_stopping_distribution(BER, tail, 14)
        assert float(tail.power) - 1e-12 < dist.cdf[14] < float(event.power) + 1e-12

    @pytest.mark.parametrize("p0,p1,alpha", [(0.4, 0.6, 0.05), (0.3, 0.55, 0.1), (0.5, 0.8, 0.2)])
    @pytest.mark.parametrize("deadline", [4, 6])
    def test_np_power_dominates_every_strategy(self, p0, p1, alpha, deadline):
        problem = TestingProblem(Bernoulli(p0), Bernoulli(p1), alpha)
        family = canonical_family(problem)
        event = bernoulli_np_exact(p0, p1, deadline, alpha)
        power = float(event.power)
        solution = edo.solve(problem, float(deadline))
        _, policy = backward_induction(
            problem,
            family,
            HardDeadline(deadline),
            WealthGrid.logarithmic(1e-4, 81),
            default_action_grid(family, 81),
            horizon=deadline,
        )
        strategies = [
            ConstantBet(problem, family, edo.gro_action(problem), label="gro"),
            ConstantBet(problem, family, solution.action, label="edo"),
            CappedConstantBet(problem, family, solution.action),
            PolicyStrategy(problem, policy),
            UpperTailDoob(p0, p1, deadline, alpha),
            BernoulliDoobStrategy(event),
        ]
        for strategy in strategies:
            cdf = exact_stopping_distribution(problem, strategy, deadline).cdf[deadline]
            assert cdf <= power + 1e-12, strategy.label
        doob_cdf = exact_stopping_distribution(
            problem, BernoulliDoobStrategy(event), deadline
        ).cdf[deadline]
        assert doob_cdf == pytest.approx(power, abs=1e-12)

    def test_null_rejection_within_budget_for_all_strategies(self):
        family = canonical_family(BER)
        event = bernoulli_np_greedy(0.4, 0.6, 20, 0.05)
        solution = edo.solve(BER, 20.0)
        strategies = [
            ConstantBet(BER, family, 0.6, label="gro"),
            ConstantBet(BER, family, solution.action, label="edo"),
            UpperTailDoob(0.4, 0.6, 20, 0.05),
            BernoulliDoobStrategy(event),
        ]
        for strategy in strategies:
            null = exact_stopping_distribution(BER, strategy, 20, measure="null")
            assert null.cdf[20] <= 0.05 + 1e-12, strategy.label

    def test_longer_horizon_freezes_after_the_deadline(self):
        event = bernoulli_np_greedy(0.4, 0.6, 10, 0.05)
        dist = exact_stopping_distribution(BER, BernoulliDoobStrategy(event), 16)
        assert np.all(dist.masses[11:] == 0.0)
        assert dist.cdf[16] == pytest.approx(float(event.power), abs=1e-12)

    def test_state_merging_keeps_large_horizons_cheap(self):
        tail = UpperTailDoob(0.4, 0.6, 60, 0.05)
        dist = exact_stopping_distribution(BER, tail, 60)
        assert dist.cdf[60] >= float(tail.power) - 1e-12
        null = exact_stopping_distribution(BER, tail, 60, measure="null")
        assert null.cdf[60] <= 0.05 + 1e-12

    def test_path_state_refusal_above_cap(self):
        family = canonical_family(BER)
        _, policy = backward_induction(
            problem=BER,
            family=family,
            reward=HardDeadline(30),
            wealth_grid=WealthGrid.logarithmic(1e-4, 41),
            action_grid=default_action_grid(family, 41),
            horizon=30,
        )
        strategy = PolicyStrategy(BER, policy)
        with pytest.raises(IntractableError, match=str(PATH_ENUMERATION_CAP)):
            exact_stopping_distribution(BER, strategy, PATH_ENUMERATION_CAP + 1)
        small = exact_stopping_distribution(BER, strategy, 6)
        assert small.masses.sum() <= 1.0 + 1e-12

    def test_capped_bet_exact_law_matches_brute_force(self):
        family = canonical_family(BER)
        capped = CappedConstantBet(BER, family, 0.7)
        dist = exact_stopping_distribution(BER, capped, 10)
        brute = brute_stopping_masses(BER, capped, 10, "alternative")
        for t in range(11):
            assert dist.masses[t] == pytest.approx(float(brute[t]), abs=1e-12)

    def test_validation(self):
        gauss = TestingProblem(Gaussian(0.0, 1.0), Gaussian(0.6, 1.0), 0.05)
        doob = gaussian_np(1.0, 10, 0.05)
        with pytest.raises(DomainError, match="Bernoulli"):
            exact_stopping_distribution(gauss, doob, 10)
        event = bernoulli_np_greedy(0.4, 0.6, 10, 0.05)
        strategy = BernoulliDoobStrategy(event)
        with pytest.raises(DomainError, match="measure"):
            exact_stopping_distribution(BER, strategy, 10, measure="both")
        with pytest.raises(DomainError, match="horizon"):
            exact_stopping_distribution(BER, strategy, 0)
        with pytest.raises(DomainError, match="unknown strategy kind"):
            exact_stopping_distribution(BER, object(), 10)


class TestRecords:
    def test_bernoulli_event_record(self):
        event = bernoulli_np_greedy(0.4, 0.6, 10, 0.05)
        record = event_record(event)
        assert record["kind"] == "bernoulli"
        assert record["threshold"] == 8
        assert record["boundary_count"] == 106
        assert record["level_counts"] == list(event.level_counts)
        assert record["null_mass"] == pytest.approx(float(event.null_mass))
        assert Fraction(record["null_mass_exact"]) == event.null_mass
        assert Fraction(record["power_exact"]) == event.power

    def test_gaussian_event_record(self):
        doob = gaussian_np(1.0, 30, 0.05)
        record = event_record(doob)
        assert record["kind"] == "gaussian"
        assert record["deadline"] == 30
        assert record["threshold"] == doob.threshold
        with pytest.raises(DomainError, match="unsupported"):
            event_record("event")

    def test_distribution_records_shape(self):
        event = bernoulli_np_greedy(0.4, 0.6, 10, 0.05)
        dist = exact_stopping_distribution(BER, BernoulliDoobStrategy(event), 10)
        rows = distribution_records(dist)
        assert len(rows) == 10
        assert rows[0].keys() == {"round", "mass", "cdf"}
        cdf = [row["cdf"] for row in rows]
        assert all(b >= a for a, b in zip(cdf, cdf[1:]))
        assert cdf[-1] == pytest.approx(float(event.power), abs=1e-12)
