import logging
import random
from fractions import Fraction as F

import pytest
from icps.generate import MarketSpec, generate_market
from icps.information import NULL_MENU, SequentialProtocol, Test, TestMenu
from icps.market import (
    Matching,
    assortative_matching,
    enumerate_matchings,
    expected_welfare,
    hl_market,
    test_power_delta,
)
from icps.solver import (
    TESTED,
    EmptyStableSet,
    NoDistinctTypes,
    all_assortative,
    complete_information_stable,
    lone_wolf_report,
    max_welfare_matching,
    refinement_magnitude,
    stable_matchings,
    uniqueness_report,
)
from icps.stability import Allocation, Concept, find_blocking_pair

from conftest import perfect_menu, suite
from oracles import core_oracle


def test_stable_set_examples(standard_market):
    bayes = stable_matchings(standard_market, NULL_MENU, Concept.BAYES)
    assert bayes.matchings == [Matching((("f1", "w1"),))]
    assert bayes.examined == 2
    assert stable_matchings(standard_market, perfect_menu(), Concept.ICPS).count == 0
    tested = stable_matchings(standard_market, perfect_menu(), Concept.ICPS, standing=TESTED)
    assert tested.count == 1 and tested.welfare == [4]
    realized = hl_market([F(1, 2)], [F(1, 2)], realized={"f1": "H", "w1": "H"})
    assert stable_matchings(realized, perfect_menu(), Concept.ICPS).count == 1


def test_report_members_pass_blocking_check():
    for m, menu in suite(40, seed=3):
        for concept in (Concept.BAYES, Concept.ICPS):
            rep = stable_matchings(m, menu, concept)
            assert rep.count == len(rep.stable) == len(rep.welfare)
            for alloc in rep.allocations():
                assert find_blocking_pair(m, alloc, menu, concept) is None


def test_max_welfare_examples():
    r = hl_market([F(1, 2)] * 2, [F(1, 2)] * 2, realized={"f1": "H", "f2": "L", "w1": "H", "w2": "L"})
    best = max_welfare_matching(r)
    assert best.pairs == (("f1", "w1"), ("f2", "w2")) and expected_welfare(r, best) == 5
    same = hl_market([F(1, 2)] * 2, [F(1, 2)] * 2)
    assert max_welfare_matching(same).pairs == (("f1", "w1"), ("f2", "w2"))
    empty = hl_market([], [])
    assert max_welfare_matching(empty) == Matching(()) and expected_welfare(empty, Matching(())) == 0


def test_refinement_magnitude_examples():
    # alpha - 2 beta + gamma < 0 makes expected surplus submodular in priors
    m = hl_market([F(3, 5), F(1, 5)], [F(7, 10), F(3, 10)], 4, 3, 1)
    assert refinement_magnitude(m, NULL_MENU)["bayes_minus_icps"] == 0
    bayes = stable_matchings(m, NULL_MENU, Concept.BAYES)
    assert any(mt != assortative_matching(m) for mt in bayes.matchings)
    assert refinement_magnitude(m, perfect_menu())["bayes_minus_icps"] >= 1


def test_inclusion_chain_suite():
    proto = SequentialProtocol(((F(1, 2), F(1, 10)), (F(1), F(1, 10))))
    for m, menu in suite(60, seed=4):
        mag = refinement_magnitude(m, menu, proto)
        assert mag["n_seq"] <= mag["n_endog"] <= mag["n_icps"] <= mag["n_bayes"]


def test_perfect_test_equals_core():
    for seed in range(60):
        m = generate_market(seed, MarketSpec(3, 3, mode="realized"))
        icps = set(stable_matchings(m, perfect_menu(), Concept.ICPS).matchings)
        lp = {mt for mt in enumerate_matchings(m) if core_oracle(m, mt)}
        assert icps == lp == set(complete_information_stable(m))


def test_existence_realized_suite():
    for m, menu in suite(80, seed=5):
        if m.mode != "realized":
            continue
        best = max_welfare_matching(m)
        assert best in stable_matchings(m, menu, Concept.ICPS).matchings


def test_tested_standing_always_nonempty():
    for m, menu in suite(60, seed=6):
        assert stable_matchings(m, menu, Concept.ICPS, standing=TESTED).count >= 1


def _distinct(seed, lo=2, hi=4):
    rng = random.Random(seed)
    m = generate_market(seed, MarketSpec(rng.randint(lo, hi), rng.randint(lo, hi), mode="realized", distinct_types=True))
    d = test_power_delta(m.surplus)
    pi = F(rng.randint(5, 10), 10)
    return m, TestMenu.of(Test(pi, pi * d * F(rng.randint(0, 9), 10)))


def test_uniqueness_examples():
    for seed in range(30):
        m, _ = _distinct(seed, 3, 3)
        d = test_power_delta(m.surplus)
        u = uniqueness_report(m, TestMenu.of(Test(F(9, 10), F(1, 2) * d)))
        assert u.assumption4_satisfied and u.unique and u.matches_assortative
        assert not uniqueness_report(m, NULL_MENU).assumption4_satisfied
        perfect = uniqueness_report(m, perfect_menu())
        assert perfect.unique and perfect.matches_assortative


def test_sorting_under_power_condition():
    for seed in range(50):
        m, menu = _distinct(seed)
        assert all_assortative(m, stable_matchings(m, menu, Concept.ICPS))


def test_uniqueness_needs_distinct_types(standard_market):
    with pytest.raises(NoDistinctTypes):
        uniqueness_report(standard_market, NULL_MENU)


def test_lone_wolf_singleton_and_empty(standard_market):
    rep = stable_matchings(standard_market, NULL_MENU, Concept.BAYES)
    assert lone_wolf_report(standard_market, rep).holds
    with pytest.raises(EmptyStableSet):
        lone_wolf_report(standard_market, stable_matchings(standard_market, perfect_menu(), Concept.ICPS))


def test_lone_wolf_counter_witness(caplog):
    found = None
    with caplog.at_level(logging.INFO, logger="icps.solver"):
        for m, menu in suite(200, seed=8):
            rep = stable_matchings(m, NULL_MENU, Concept.ICPS)
            if rep.count < 2:
                continue
            res = lone_wolf_report(m, rep)
            if not res.holds:
                found = (m, rep, res)
                break
    assert found is not None
    m, rep, res = found
    a, b = res.witness
    assert a in rep.matchings and b in rep.matchings and a.matched() != b.matched()
    assert "unmatched set differs" in caplog.text


def test_stable_set_order_deterministic():
    m, menu = suite(1, seed=9)[0]
    assert stable_matchings(m, menu).to_record() == stable_matchings(m, menu).to_record()


def test_ntu_concept_rejected_here(standard_market):
    with pytest.raises(ValueError):
        stable_matchings(standard_market, NULL_MENU, Concept.NTU)


def test_report_allocations_are_supported(standard_market):
    rep = stable_matchings(standard_market, NULL_MENU, Concept.BAYES)
    (alloc,) = rep.allocations()
    assert isinstance(alloc, Allocation) and alloc.payoff("f1") == F(9, 8)
