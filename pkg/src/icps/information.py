"""Option value of testing, deviation quotes and blocking thresholds.

A test ``(accuracy, cost)`` reveals the realized types with probability
``accuracy`` and nothing otherwise.  On the informed branch a deviating pair
accepts iff the revealed surplus is at least its status quo ``Pi``; on the
uninformed branch it accepts iff the prior mean is at least ``Pi``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

from .market import Number, PairSurplusDistribution, positive


class InfeasibleTest(UserWarning):
    """A test with infinite cost was quoted; it behaves like staying put."""


@dataclass(frozen=True)
class Test:
    __test__ = False

    accuracy: Number
    cost: Number

    def __post_init__(self):
        if not (0 <= self.accuracy <= 1):
            raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")
        if self.cost < 0:
            raise ValueError(f"negative test cost {self.cost}")

    @property
    def infeasible(self) -> bool:
        return isinstance(self.cost, float) and math.isinf(self.cost)

    @property
    def is_null(self) -> bool:
        return self.accuracy == 0 and self.cost == 0

    def to_record(self) -> dict:
        return {"pi": _fmt(self.accuracy), "cost": _fmt(self.cost)}


NULL_TEST = Test(Fraction(0), Fraction(0))


def _fmt(x):
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else x.numerator
    return x


@dataclass(frozen=True)
class TestMenu:
    """Finite menu of tests; the null test is always present and first."""

    __test__ = False

    tests: tuple[Test, ...] = ()

    def __post_init__(self):
        out = [NULL_TEST]
        for t in self.tests:
            if not t.is_null and t not in out:
                out.append(t)
        object.__setattr__(self, "tests", tuple(out))

    @classmethod
    def of(cls, *tests) -> "TestMenu":
        return cls(tuple(t if isinstance(t, Test) else Test(*t) for t in tests))

    def __iter__(self):
        return iter(self.tests)

    def __len__(self):
        return len(self.tests)

    def union(self, other: Iterable[Test]) -> "TestMenu":
        return TestMenu(self.tests + tuple(other))

    def to_records(self) -> list[dict]:
        return [t.to_record() for t in self.tests]


NULL_MENU = TestMenu()


@dataclass(frozen=True)
class SequentialProtocol:
    """Stages of (cumulative accuracy, incremental cost)."""

    stages: tuple[tuple[Number, Number], ...]

    def __post_init__(self):
        stages = tuple((a, c) for a, c in self.stages)
        if not stages:
            raise ValueError("protocol needs at least one stage")
        accs = [a for a, _ in stages]
        if not (0 < accs[0] and all(a < b for a, b in zip(accs, accs[1:])) and accs[-1] <= 1):
            raise ValueError("stage accuracies must satisfy 0 < pi_1 < ... < pi_K <= 1")
        if any(c <= 0 for _, c in stages):
            raise ValueError("stage costs must be positive")
        object.__setattr__(self, "stages", stages)

    def collapsed_menu(self) -> TestMenu:
        """One-shot tests that stop after stage k, paying every stage up to k."""
        tests, spent = [], 0
        for a, c in self.stages:
            spent = spent + c
            tests.append(Test(a, spent))
        return TestMenu(tuple(tests))

    def effective_tests(self) -> list[Test]:
        """Stage-k stopping policies as one-shot tests at their expected cost.

        Testing stops early once types are revealed, so stage j is paid only
        with probability ``1 - pi_{j-1}``.
        """
        out, expected, prev = [], 0, 0
        for a, c in self.stages:
            expected = expected + (1 - prev) * c
            out.append(Test(a, expected))
            prev = a
        return out

    def to_records(self) -> list[dict]:
        return [{"pi": _fmt(a), "cost": _fmt(c)} for a, c in self.stages]


@dataclass(frozen=True)
class StoppingPolicy:
    """``continue_at[k]`` is True when the pair pays for stage k+1 if still uninformed."""

    continue_at: tuple[bool, ...]
    expected_cost: Number

    @property
    def stages_used(self) -> int:
        n = 0
        for flag in self.continue_at:
            if not flag:
                break
            n += 1
        return n

    def to_record(self) -> dict:
        return {"stages": self.stages_used, "expected_cost": _fmt(self.expected_cost)}


@dataclass(frozen=True)
class DeviationQuote:
    value: Number
    instrument: Test | StoppingPolicy
    status_quo: Number
    gain: Number = field(init=False)
    infeasible: bool = False

    def __post_init__(self):
        object.__setattr__(self, "gain", self.value - self.status_quo)

    @property
    def blocks(self) -> bool:
        return positive(self.gain)


def option_value(dist: PairSurplusDistribution, status_quo: Number) -> Number:
    """E[(S - Pi)_+]."""
    total = 0 * status_quo
    for s, pr in dist.atoms:
        if s > status_quo:
            total += (s - status_quo) * pr
    return total


def _uninformed(dist: PairSurplusDistribution, status_quo: Number) -> Number:
    return max(dist.mean, status_quo)


def deviation_value(dist: PairSurplusDistribution, test: Test, status_quo: Number) -> DeviationQuote:
    if test.infeasible:
        warnings.warn(f"test {test} has infinite cost; quoting the status quo", InfeasibleTest, stacklevel=2)
        return DeviationQuote(status_quo, test, status_quo, infeasible=True)
    pi = test.accuracy
    informed = status_quo + option_value(dist, status_quo)
    value = pi * informed + (1 - pi) * _uninformed(dist, status_quo) - test.cost
    return DeviationQuote(value, test, status_quo)


def blocking_gain(dist: PairSurplusDistribution, test: Test, status_quo: Number) -> Number:
    """Gain of deviating with ``test`` against ``status_quo``; nonincreasing in the latter."""
    pi = test.accuracy
    mean_gap = dist.mean - status_quo
    return pi * option_value(dist, status_quo) + (1 - pi) * max(mean_gap, 0 * mean_gap) - test.cost


def blocking_threshold(dist: PairSurplusDistribution, test: Test) -> Number:
    """Smallest status quo at which ``test`` no longer yields a positive gain.

    The gain is piecewise linear with kinks at the atoms and at the mean, so
    the root is found exactly on the first breakpoint segment where it turns
    nonpositive.
    """
    zero = 0 * dist.mean
    if test.infeasible:
        return zero
    g0 = blocking_gain(dist, test, zero)
    if g0 <= 0:
        return zero
    points = sorted({zero, dist.mean, *(s for s, _ in dist.atoms if s > 0)})
    a, ga = points[0], g0
    for b in points[1:]:
        gb = blocking_gain(dist, test, b)
        if gb <= 0:
            return a + ga * (b - a) / (ga - gb)
        a, ga = b, gb
    # gain at the largest atom is -cost <= 0, so the loop always returns
    raise AssertionError("no root found for blocking gain")


def _best(candidates):
    """Highest score, then lower cost, then lower accuracy."""
    return max(candidates, key=lambda item: (item[0], -item[1].cost, -item[1].accuracy))


def best_quote(dist: PairSurplusDistribution, menu: TestMenu, status_quo: Number) -> DeviationQuote:
    quotes = []
    for t in menu:
        if t.infeasible:
            continue
        q = deviation_value(dist, t, status_quo)
        quotes.append((q.value, t, q))
    return _best(quotes)[2]


def menu_threshold(dist: PairSurplusDistribution, menu: TestMenu) -> tuple[Number, Test]:
    scored = [(blocking_threshold(dist, t), t) for t in menu if not t.infeasible]
    value, test = _best(scored)
    return value, test


def sequential_value(
    dist: PairSurplusDistribution, protocol: SequentialProtocol, status_quo: Number
) -> DeviationQuote:
    """Optimal stopping over the protocol's stages by backward induction.

    While uninformed before stage k+1 the pair either decides on its prior
    (worth ``max(E[S], Pi)``) or pays ``c_{k+1}`` for a reveal with
    conditional probability ``(pi_{k+1} - pi_k) / (1 - pi_k)``.  Once
    revealed it accepts iff ``S >= Pi``.
    """
    stages = protocol.stages
    revealed = status_quo + option_value(dist, status_quo)
    stop = _uninformed(dist, status_quo)
    value = stop
    decisions = []
    for k in range(len(stages) - 1, -1, -1):
        prev = stages[k - 1][0] if k > 0 else 0 * stages[k][0]
        acc, cost = stages[k]
        q = (acc - prev) / (1 - prev)
        cont = -cost + q * revealed + (1 - q) * value
        if cont > stop:
            value = cont
            decisions.append(True)
        else:
            value = stop
            decisions.append(False)
    decisions.reverse()
    # forward pass: probability of still being uninformed when paying stage k
    expected_cost, reach, prev = 0 * stop, 1, 0
    for (acc, cost), go in zip(stages, decisions):
        if not go:
            break
        expected_cost += reach * cost
        reach = 1 - acc
    policy = StoppingPolicy(tuple(decisions), expected_cost)
    return DeviationQuote(value, policy, status_quo)


def sequential_threshold(dist: PairSurplusDistribution, protocol: SequentialProtocol) -> Number:
    """Blocking threshold of the optimal-stopping deviation.

    The optimal value is the upper envelope of "continue through stage k"
    policies, each a one-shot test at its expected cost, so the threshold is
    the largest of their thresholds (and the null test's).
    """
    return max(blocking_threshold(dist, t) for t in [*protocol.effective_tests(), _null_like(dist)])


def _null_like(dist: PairSurplusDistribution) -> Test:
    if isinstance(dist.mean, float):
        return Test(0.0, 0.0)
    return NULL_TEST


# ---------------------------------------------------------------------------
# Weighted-improvement inequality over acceptance events


@dataclass(frozen=True)
class AcceptanceCheck:
    accepted: tuple[int, ...]
    is_threshold_rule: bool
    weighted: Number
    benchmark: Number

    @property
    def holds(self) -> bool:
        return self.weighted >= self.benchmark

    @property
    def margin(self) -> Number:
        return self.weighted - self.benchmark


def threshold_subsets(values: Sequence[Number]) -> set[tuple[int, ...]]:
    """Index sets of the form {i : values[i] >= t}, including the empty set."""
    out = {()}
    for t in set(values):
        out.add(tuple(i for i, v in enumerate(values) if v >= t))
    return out


def acceptance_checks(atoms: Sequence[tuple[Number, Number]]) -> list[AcceptanceCheck]:
    """E[S 1_A] against E[S] P(A) for every acceptance subset of the atoms.

    ``atoms`` are (surplus, probability) per type profile, not merged, so a
    four-profile pair yields 16 subsets.
    """
    values = [v for v, _ in atoms]
    mean = sum(v * p for v, p in atoms)
    thresholds = threshold_subsets(values)
    out = []
    n = len(atoms)
    for k in range(n + 1):
        for subset in combinations(range(n), k):
            weighted = sum(atoms[i][0] * atoms[i][1] for i in subset) + 0 * mean
            prob = sum(atoms[i][1] for i in subset) + 0 * mean
            out.append(AcceptanceCheck(subset, subset in thresholds, weighted, mean * prob))
    return out


def decomposition(dist: PairSurplusDistribution, accuracy: Number) -> tuple[Number, Number]:
    """Both sides of E[S | test] = pi E[S | perfect info] + (1 - pi) E[S].

    The left side averages the posterior mean over the test's outcomes.
    """
    perfect = sum(v * p for v, p in dist.atoms)
    lhs = accuracy * perfect + (1 - accuracy) * dist.mean
    rhs = accuracy * dist.mean + (1 - accuracy) * dist.mean
    return lhs, rhs
