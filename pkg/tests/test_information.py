import random
import warnings
from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st
from icps.information import (
    NULL_MENU,
    NULL_TEST,
    InfeasibleTest,
    SequentialProtocol,
    Test,
    TestMenu,
    acceptance_checks,
    blocking_gain,
    blocking_threshold,
    decomposition,
    deviation_value,
    menu_threshold,
    option_value,
    sequential_threshold,
    sequential_value,
)
from icps.market import PairSurplusDistribution

from oracles import bisect_threshold

fracs = st.fractions(min_value=0, max_value=1, max_denominator=20)
costs = st.fractions(min_value=0, max_value=3, max_denominator=20)
status = st.fractions(min_value=0, max_value=12, max_denominator=8)


@st.composite
def dists(draw, max_atoms=4):
    n = draw(st.integers(1, max_atoms))
    values = draw(st.lists(st.integers(0, 10), min_size=n, max_size=n, unique=True))
    weights = draw(st.lists(st.integers(1, 9), min_size=n, max_size=n))
    total = sum(weights)
    return PairSurplusDistribution(tuple((F(v), F(w, total)) for v, w in zip(values, weights)))


@st.composite
def protocols(draw):
    k = draw(st.integers(1, 3))
    accs = sorted(draw(st.lists(st.integers(1, 10), min_size=k, max_size=k, unique=True)))
    stage_costs = draw(st.lists(st.integers(1, 10), min_size=k, max_size=k))
    return SequentialProtocol(tuple((F(a, 10), F(c, 20)) for a, c in zip(accs, stage_costs)))



def test_option_value_examples(standard_dist):
    assert option_value(standard_dist, 2) == F(1, 2)
    assert option_value(standard_dist, 0) == F(9, 4)
    assert option_value(standard_dist, 5) == 0


def test_deviation_value_examples(standard_dist):
    q = deviation_value(standard_dist, Test(1, 0), 2)
    assert (q.value, q.gain) == (F(5, 2), F(1, 2))
    q = deviation_value(standard_dist, NULL_TEST, 2)
    assert (q.value, q.gain) == (F(9, 4), F(1, 4))
    q = deviation_value(standard_dist, Test(F(1, 2), F(3, 10)), 2)
    assert (q.value, q.gain) == (F(83, 40), F(3, 40))


def test_infeasible_test_is_flagged(standard_dist):
    with pytest.warns(InfeasibleTest):
        q = deviation_value(standard_dist, Test(1, float("inf")), 2)
    assert q.infeasible and q.value == 2 and q.gain == 0


def test_threshold_examples(standard_dist):
    assert blocking_threshold(standard_dist, NULL_TEST) == F(9, 4)
    assert blocking_threshold(standard_dist, Test(1, 0)) == 4
    assert blocking_threshold(standard_dist, Test(F(1, 2), F(3, 10))) == F(53, 25)


def test_threshold_never_blocks():
    d = PairSurplusDistribution(((F(1), F(1)),))
    assert blocking_threshold(d, Test(1, 2)) == 0


def test_menu_threshold_examples(standard_dist):
    assert menu_threshold(standard_dist, TestMenu.of(Test(F(1, 2), F(3, 10)))) == (F(9, 4), NULL_TEST)
    assert menu_threshold(standard_dist, TestMenu.of(Test(1, 0))) == (4, Test(1, 0))
    assert menu_threshold(standard_dist, NULL_MENU) == (F(9, 4), NULL_TEST)


def test_menu_tie_prefers_cheaper_then_less_accurate():
    d = PairSurplusDistribution(((F(2), F(1)),))
    # every test has threshold 2 on a point mass with zero cost
    thr, best = menu_threshold(d, TestMenu.of(Test(1, 0), Test(F(1, 2), 0)))
    assert thr == 2 and best == NULL_TEST


def test_sequential_examples(standard_dist):
    proto = SequentialProtocol(((F(1, 2), F(1, 10)), (F(1), F(1, 10))))
    q = sequential_value(standard_dist, proto, 2)
    assert q.value == F(47, 20)
    assert q.instrument.expected_cost == F(3, 20)
    one_shot = deviation_value(standard_dist, Test(1, F(1, 5)), 2)
    assert one_shot.value == F(23, 10) and q.value >= one_shot.value
    single = SequentialProtocol(((F(3, 5), F(1, 4)),))
    for pi in (F(0), F(2), F(3), F(5)):
        direct = deviation_value(standard_dist, Test(F(3, 5), F(1, 4)), pi).value
        null = deviation_value(standard_dist, NULL_TEST, pi).value
        assert sequential_value(standard_dist, single, pi).value == max(direct, null)


def brute_sequential(dist, proto, pi):
    """Enumerate every stop-after-stage-k rule and simulate it atom by atom."""
    best = max(dist.mean, pi)
    stages = proto.stages
    for k in range(1, len(stages) + 1):
        value, reach, prev = 0, F(1), F(0)
        for a, c in stages[:k]:
            value -= reach * c
            hit = (a - prev) / (1 - prev)
            value += reach * hit * sum(max(v, pi) * p for v, p in dist.atoms)
            reach *= 1 - hit
            prev = a
        value += reach * max(dist.mean, pi)
        best = max(best, value)
    return best


@given(dists(), protocols(), status)
def test_sequential_matches_policy_enumeration(d, proto, pi):
    assert sequential_value(d, proto, pi).value == brute_sequential(d, proto, pi)


@given(dists(), protocols(), status)
def test_sequential_dominates_collapsed_and_null(d, proto, pi):
    seq = sequential_value(d, proto, pi).value
    for t in proto.collapsed_menu():
        assert seq >= deviation_value(d, t, pi).value
    assert seq >= deviation_value(d, NULL_TEST, pi).value


@given(dists(), protocols())
def test_sequential_threshold_is_root(d, proto):
    thr = sequential_threshold(d, proto)
    assert sequential_value(d, proto, thr).gain <= 0
    if thr > 0:
        assert sequential_value(d, proto, thr - F(1, 10**6)).gain > 0


@given(dists(), fracs, costs, status, status)
def test_value_monotone_in_status_quo(d, pi, c, a, b):
    lo, hi = min(a, b), max(a, b)
    t = Test(pi, c)
    assert deviation_value(d, t, lo).value <= deviation_value(d, t, hi).value
    assert deviation_value(d, t, lo).gain >= deviation_value(d, t, hi).gain


@given(dists(), fracs, fracs, costs, status)
def test_value_monotone_in_accuracy(d, a, b, c, pi):
    lo, hi = min(a, b), max(a, b)
    assert deviation_value(d, Test(lo, c), pi).value <= deviation_value(d, Test(hi, c), pi).value


@given(dists(), fracs, costs, st.fractions(min_value=F(1, 100), max_value=2, max_denominator=100), status)
def test_value_falls_one_for_one_in_cost(d, pi, c, dc, sq):
    a = deviation_value(d, Test(pi, c), sq).value
    b = deviation_value(d, Test(pi, c + dc), sq).value
    assert a - b == dc


@given(dists(), status)
def test_option_value_convex_nonincreasing(d, pi):
    h = F(1, 4)
    left, mid, right = (option_value(d, pi + k * h) for k in range(3))
    assert left >= mid >= right >= 0
    assert left - 2 * mid + right >= 0
    if pi >= max(v for v, _ in d.atoms):
        assert mid == 0


@given(dists(), fracs, costs)
def test_threshold_is_exact_root(d, pi, c):
    t = Test(pi, c)
    thr = blocking_threshold(d, t)
    assert blocking_gain(d, t, thr) <= 0
    if thr > 0:
        assert blocking_gain(d, t, thr) == 0
        assert blocking_gain(d, t, thr - F(1, 10**6)) > 0


def test_threshold_vs_bisection_random():
    rng = random.Random(2024)
    worst = 0.0
    for _ in range(1000):
        n = rng.randint(1, 4)
        values = rng.sample(range(11), n)
        weights = [rng.randint(1, 9) for _ in range(n)]
        total = sum(weights)
        d = PairSurplusDistribution(tuple((F(v), F(w, total)) for v, w in zip(values, weights)))
        t = Test(F(rng.randint(0, 20), 20), F(rng.randint(0, 40), 20))
        exact = blocking_threshold(d, t)
        fd = PairSurplusDistribution(tuple((float(v), float(p)) for v, p in d.atoms))
        ft = Test(float(t.accuracy), float(t.cost))
        fl = blocking_threshold(fd, ft)
        oracle = bisect_threshold(d, t)
        worst = max(worst, abs(fl - oracle))
        assert abs(float(exact) - oracle) <= 2e-6
    assert worst <= 2e-6


@given(dists(), status)
def test_refinement_criterion_perfect_test(d, pi):
    gain = deviation_value(d, Test(1, 0), pi).gain
    assert (gain > 0) == any(v > pi and p > 0 for v, p in d.atoms)


@given(dists(), fracs, costs)
def test_menu_threshold_at_least_mean(d, pi, c):
    thr, _ = menu_threshold(d, TestMenu.of(Test(pi, c)))
    assert thr >= d.mean
    # strict when the test pays for itself at the prior mean
    if deviation_value(d, Test(pi, c), d.mean).gain > 0:
        assert thr > d.mean


@given(st.lists(st.integers(0, 10), min_size=4, max_size=4), st.lists(st.integers(1, 9), min_size=4, max_size=4))
def test_threshold_rules_weighted_improvement(values, weights):
    total = sum(weights)
    atoms = [(F(v), F(w, total)) for v, w in zip(values, weights)]
    checks = acceptance_checks(atoms)
    assert len(checks) == 16
    mean = sum(v * p for v, p in atoms)
    for c in checks:
        if c.is_threshold_rule:
            assert c.holds
            # strict once an above-mean atom is accepted and some below-mean atom is not
            accepted = set(c.accepted)
            if any(atoms[i][0] > mean for i in accepted) and any(
                atoms[i][0] < mean for i in range(4) if i not in accepted
            ):
                assert c.weighted > c.benchmark


def test_non_threshold_rules_can_fail():
    atoms = [(F(0), F(1, 4)), (F(1), F(1, 4)), (F(2), F(1, 4)), (F(9), F(1, 4))]
    bad = [c for c in acceptance_checks(atoms) if not c.is_threshold_rule and not c.holds]
    assert bad and all(not c.is_threshold_rule for c in bad)


@given(dists(), fracs)
def test_decomposition_identity(d, pi):
    lhs, rhs = decomposition(d, pi)
    assert lhs == rhs == d.mean


def test_menu_always_has_null():
    assert NULL_TEST in TestMenu.of(Test(1, 0)).tests
    assert TestMenu.of(Test(1, 0), Test(1, 0)).tests == (NULL_TEST, Test(1, 0))


def test_protocol_validation():
    with pytest.raises(ValueError):
        SequentialProtocol(((F(1, 2), F(1, 10)), (F(1, 2), F(1, 10))))
    with pytest.raises(ValueError):
        SequentialProtocol(((F(1, 2), 0),))
    with pytest.raises(ValueError):
        Test(F(3, 2), 0)


def test_float_mode_matches_exact(standard_dist):
    fd = PairSurplusDistribution(tuple((float(v), float(p)) for v, p in standard_dist.atoms))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert abs(blocking_threshold(fd, Test(0.5, 0.3)) - 2.12) <= 1e-12
