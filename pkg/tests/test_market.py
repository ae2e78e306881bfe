from fractions import Fraction as F
from math import comb, factorial

import pytest
from hypothesis import given
from hypothesis import strategies as st
from icps.market import (
    InfeasibleCorrelation,
    InvalidMarket,
    Matching,
    MissingRealizedTypes,
    NoSortKey,
    PairSurplusDistribution,
    SizeCapExceeded,
    SurplusTable,
    assortative_matching,
    build_joint_distribution,
    count_matchings,
    enumerate_matchings,
    expected_pair_surplus,
    expected_welfare,
    hl_market,
    is_positively_assortative,
    pair_surplus_distribution,
    test_power_delta,
)

probs = st.fractions(min_value=F(1, 100), max_value=F(99, 100), max_denominator=100)


def test_joint_cells_examples():
    half = F(1, 2)
    assert build_joint_distribution(half, 0).probabilities == {
        ("H", "H"): F(1, 4), ("H", "L"): F(1, 4), ("L", "H"): F(1, 4), ("L", "L"): F(1, 4)
    }
    anti = build_joint_distribution(half, -1).probabilities
    assert anti[("H", "H")] == 0 and anti[("L", "L")] == 0 and anti[("H", "L")] == half
    perfect = build_joint_distribution(half, 1).probabilities
    assert perfect[("H", "H")] == half and perfect[("H", "L")] == 0


def test_infeasible_correlation():
    # rho below -min(p/(1-p), (1-p)/p) drives a cell negative
    with pytest.raises(InfeasibleCorrelation):
        build_joint_distribution(F(1, 5), F(-1, 2))
    build_joint_distribution(F(1, 5), F(-1, 4))


@given(probs, st.fractions(min_value=-1, max_value=1, max_denominator=20))
def test_joint_marginals_exact(p, rho):
    try:
        d = build_joint_distribution(p, rho)
    except InfeasibleCorrelation:
        assert rho < -min(p / (1 - p), (1 - p) / p)
        return
    cells = d.probabilities
    assert sum(cells.values()) == 1
    assert cells[("H", "H")] + cells[("H", "L")] == p
    assert cells[("H", "H")] + cells[("L", "H")] == p
    assert cells[("L", "L")] + cells[("H", "L")] == 1 - p
    assert all(v >= 0 for v in cells.values())


@given(probs, probs)
def test_zero_correlation_is_product(pf, pw):
    cells = build_joint_distribution(pf, 0, pw).probabilities
    assert cells[("H", "H")] == pf * pw
    assert cells[("H", "L")] == pf * (1 - pw)
    assert cells[("L", "L")] == (1 - pf) * (1 - pw)


def test_pair_distribution_examples(standard_dist):
    assert standard_dist.atoms == ((1, F(1, 4)), (2, F(1, 2)), (4, F(1, 4)))
    assert standard_dist.mean == F(9, 4)
    realized = hl_market([F(1, 2)], [F(1, 2)], realized={"f1": "H", "w1": "L"})
    d = pair_surplus_distribution(realized, "f1", "w1")
    assert d.atoms == ((2, 1),) and d.mean == 2
    anti = hl_market([F(1, 2)], [F(1, 2)], rho=-1)
    assert pair_surplus_distribution(anti, "f1", "w1").atoms == ((2, 1),)


@given(probs, st.integers(0, 20), st.integers(1, 20), st.integers(1, 20))
def test_mean_matches_closed_form(p, g, db, da):
    gamma, beta, alpha = F(g), F(g + db), F(g + db + da)
    m = hl_market([p], [p], alpha, beta, gamma)
    d = pair_surplus_distribution(m, "f1", "w1")
    assert expected_pair_surplus(d) == p * p * alpha + 2 * p * (1 - p) * beta + (1 - p) ** 2 * gamma


def test_mean_point_mass_and_limit():
    assert expected_pair_surplus(PairSurplusDistribution(((4, 1),))) == 4
    near_one = hl_market([F(999999, 1000000)], [F(999999, 1000000)])
    assert abs(pair_surplus_distribution(near_one, "f1", "w1").mean - 4) < F(1, 10**4)


def test_distribution_invariants():
    d = PairSurplusDistribution(((2, F(1, 2)), (1, F(1, 4)), (2, F(1, 4))))
    assert d.atoms == ((1, F(1, 4)), (2, F(3, 4)))
    with pytest.raises(ValueError):
        PairSurplusDistribution(((1, F(1, 2)),))


def test_missing_realized_types():
    with pytest.raises((MissingRealizedTypes, InvalidMarket)):
        hl_market([F(1, 2)], [F(1, 2)], realized={"f1": "H"})


def test_delta_examples():
    assert test_power_delta(SurplusTable.hl(4, 2, 1, True)) == 1
    assert test_power_delta(SurplusTable.hl(10, 3, 2, True)) == 1
    with pytest.raises(ValueError):
        SurplusTable.hl(2, 2, 1, True)


@given(st.integers(0, 10), st.integers(1, 10), st.integers(1, 10))
def test_delta_positive(g, db, da):
    assert test_power_delta(SurplusTable.hl(g + db + da, g + db, g, True)) > 0


def test_welfare_examples():
    m = hl_market([F(1, 2)] * 2, [F(1, 2)] * 2)
    assert expected_welfare(m, Matching(())) == 0
    assert expected_welfare(m, Matching((("f1", "w1"), ("f2", "w2")))) == F(9, 2)
    r = hl_market([F(1, 2)] * 2, [F(1, 2)] * 2, realized={"f1": "H", "f2": "L", "w1": "H", "w2": "L"})
    assert expected_welfare(r, Matching((("f1", "w1"), ("f2", "w2")))) == 5
    assert expected_welfare(r, Matching((("f1", "w1"),)), menu_cost=F(1, 2)) == F(7, 2)


@pytest.mark.parametrize("n,expected", [(1, 2), (2, 7), (3, 34)])
def test_matching_counts(n, expected):
    m = hl_market([F(1, 2)] * n, [F(1, 2)] * n)
    assert len(enumerate_matchings(m)) == expected


@pytest.mark.parametrize("nf", range(5))
@pytest.mark.parametrize("nw", range(5))
def test_matching_count_formula(nf, nw):
    m = hl_market([F(1, 2)] * nf, [F(1, 2)] * nw)
    ms = enumerate_matchings(m)
    closed = sum(comb(nf, k) * comb(nw, k) * factorial(k) for k in range(min(nf, nw) + 1))
    assert len(ms) == closed == count_matchings(nf, nw)
    assert len(set(ms)) == len(ms)


def test_size_cap():
    m = hl_market([F(1, 2)] * 3, [F(1, 2)] * 3)
    with pytest.raises(SizeCapExceeded):
        enumerate_matchings(m, cap=2)


def test_matching_injective():
    with pytest.raises(ValueError):
        Matching((("f1", "w1"), ("f2", "w1")))
    m = hl_market([F(1, 2)], [F(1, 2)])
    with pytest.raises(ValueError):
        m.validate_matching(Matching((("f1", "w9"),)))


def test_assortative_examples():
    r = hl_market([F(1, 2)] * 2, [F(1, 2)] * 2, realized={"f1": "H", "f2": "L", "w1": "H", "w2": "L"})
    assert is_positively_assortative(r, Matching((("f1", "w1"), ("f2", "w2"))))
    assert not is_positively_assortative(r, Matching((("f1", "w2"), ("f2", "w1"))))
    assert is_positively_assortative(r, Matching((("f1", "w2"),)))
    uneven = hl_market([F(3, 5), F(1, 5), F(2, 5)], [F(1, 2), F(7, 10)])
    am = assortative_matching(uneven)
    assert am.pairs == (("f1", "w2"), ("f3", "w1"))
    assert is_positively_assortative(uneven, am)


def test_no_sort_key():
    m = hl_market([F(1, 2)] * 2, [F(1, 2)] * 2)
    with pytest.raises(NoSortKey):
        assortative_matching(m)
