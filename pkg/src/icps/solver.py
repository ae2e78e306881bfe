"""Whole-market analysis: stable sets per concept and the reports built on them."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .information import SequentialProtocol, TestMenu
from .market import (
    DEFAULT_CAP,
    Market,
    MarketError,
    Matching,
    Number,
    assortative_matching,
    enumerate_matchings,
    expected_welfare,
    is_positively_assortative,
    test_power_delta,
)
from .stability import (
    Allocation,
    Concept,
    NtuUtilityTable,
    concept_thresholds,
    find_ntu_blocking_pair,
    ntu_status_quo,
    supporting_payoffs,
)

log = logging.getLogger(__name__)

PRIOR = "prior"
TESTED = "tested"


class EmptyStableSet(MarketError):
    pass


class NoDistinctTypes(MarketError):
    pass


@dataclass
class StableSetReport:
    concept: Concept
    stable: list[tuple[Matching, dict]] = field(default_factory=list)
    examined: int = 0
    standing: str = PRIOR
    welfare: list[Number] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.stable)

    @property
    def matchings(self) -> list[Matching]:
        return [m for m, _ in self.stable]

    @property
    def welfare_range(self) -> tuple[Number, Number] | None:
        if not self.welfare:
            return None
        return min(self.welfare), max(self.welfare)

    def allocations(self) -> list[Allocation]:
        return [Allocation(m, pay) for m, pay in self.stable]

    def to_record(self) -> dict:
        from .serialize import num_out

        rng = self.welfare_range
        return {
            "concept": self.concept.value,
            "standing": self.standing,
            "examined": self.examined,
            "count": self.count,
            "welfare_min": num_out(rng[0]) if rng else None,
            "welfare_max": num_out(rng[1]) if rng else None,
            "stable": [
                {
                    "matching": m.to_list(),
                    "payoffs": {k: num_out(v) for k, v in sorted(pay.items())},
                }
                for m, pay in self.stable
            ],
        }


def standing_values(market: Market, matching: Matching, thresholds) -> dict | None:
    """Joint values of standing pairs when they too are credited with testing.

    Each matched pair is worth its own blocking threshold: the status quo at
    which it would be indifferent to forming with its best test.
    """
    return {(f, w): thresholds[(f, w)] for f, w in matching}


def stable_matchings(
    market: Market,
    menu: TestMenu,
    concept: Concept | str = Concept.ICPS,
    protocol: SequentialProtocol | None = None,
    standing: str = PRIOR,
    cap: int = DEFAULT_CAP,
) -> StableSetReport:
    concept = Concept(concept)
    if concept is Concept.NTU:
        raise MarketError("NTU stable sets need utilities; use ntu_stable_matchings")
    if standing not in (PRIOR, TESTED):
        raise ValueError(f"unknown standing rule {standing!r}")
    matchings = enumerate_matchings(market, cap)
    thresholds = concept_thresholds(market, concept, menu, protocol)
    report = StableSetReport(concept, examined=len(matchings), standing=standing)
    for m in matchings:
        values = standing_values(market, m, thresholds) if standing == TESTED else None
        payoffs = supporting_payoffs(market, m, thresholds, values)
        if payoffs is not None:
            report.stable.append((m, payoffs))
            if values is None:
                report.welfare.append(expected_welfare(market, m))
            else:
                report.welfare.append(sum(values.values(), 0 * thresholds[next(iter(thresholds))]))
    return report


def ntu_stable_matchings(
    market: Market, utilities: NtuUtilityTable, menu: TestMenu, cap: int = DEFAULT_CAP
) -> list[Matching]:
    out = []
    for m in enumerate_matchings(market, cap):
        sq = ntu_status_quo(market, m, utilities)
        if any(v < 0 for v in sq.values()):
            continue
        if find_ntu_blocking_pair(market, m, utilities, menu, sq) is None:
            out.append(m)
    return out


def max_welfare_matching(market: Market, menu_cost=None, cap: int = DEFAULT_CAP) -> Matching:
    best, best_w = None, None
    for m in enumerate_matchings(market, cap):
        w = expected_welfare(market, m, menu_cost)
        if best_w is None or w > best_w:
            best, best_w = m, w
    return best


def complete_information_stable(market: Market, cap: int = DEFAULT_CAP) -> list[Matching]:
    """Stable matchings when every agent's type is known, without thresholds.

    With transferable utility a matching can be supported against every
    pair's realized surplus iff it maximizes total realized surplus, so the
    stable set is the set of welfare maximizers.
    """
    if market.mode != "realized":
        raise MarketError("complete-information stability needs realized types")
    ms = enumerate_matchings(market, cap)
    welfare = [expected_welfare(market, m) for m in ms]
    best = max(welfare)
    tol = 1e-9 if not market.exact else 0
    return [m for m, w in zip(ms, welfare) if w >= best - tol]


def refinement_magnitude(
    market: Market, menu: TestMenu, protocol: SequentialProtocol | None = None
) -> dict:
    """Set sizes per concept and the differences along the inclusion chain."""
    sets = {
        Concept.BAYES: stable_matchings(market, menu, Concept.BAYES),
        Concept.ICPS: stable_matchings(market, menu, Concept.ICPS),
        Concept.ENDOG: stable_matchings(market, menu, Concept.ENDOG, protocol),
    }
    if protocol is not None:
        sets[Concept.SEQ] = stable_matchings(market, menu, Concept.SEQ, protocol)
    members = {c: set(r.matchings) for c, r in sets.items()}
    chain = [c for c in (Concept.SEQ, Concept.ENDOG, Concept.ICPS, Concept.BAYES) if c in members]
    for inner, outer in zip(chain, chain[1:]):
        missing = members[inner] - members[outer]
        assert not missing, f"{inner.value} set not contained in {outer.value}: {sorted(m.pairs for m in missing)}"
    out = {f"n_{c.value}": len(members[c]) for c in chain}
    out["bayes_minus_icps"] = len(members[Concept.BAYES] - members[Concept.ICPS])
    out["icps_minus_endog"] = len(members[Concept.ICPS] - members[Concept.ENDOG])
    if Concept.SEQ in members:
        out["endog_minus_seq"] = len(members[Concept.ENDOG] - members[Concept.SEQ])
    out["reports"] = sets
    return out


@dataclass
class LoneWolfResult:
    holds: bool
    witness: tuple[Matching, Matching] | None = None
    unmatched: frozenset | None = None


def lone_wolf_report(market: Market, report: StableSetReport) -> LoneWolfResult:
    if not report.stable:
        raise EmptyStableSet(f"no {report.concept.value}-stable matching")
    everyone = set(market.firm_names + market.worker_names)
    first = report.matchings[0]
    base = frozenset(everyone - first.matched())
    for m in report.matchings[1:]:
        other = frozenset(everyone - m.matched())
        if other != base:
            log.info("unmatched set differs between %s and %s", first.pairs, m.pairs)
            return LoneWolfResult(False, (first, m))
    return LoneWolfResult(True, unmatched=base)


@dataclass
class UniquenessResult:
    assumption4_satisfied: bool
    unique: bool
    matches_assortative: bool
    count: int
    assortative: Matching


def test_power_satisfied(market: Market, menu: TestMenu) -> bool:
    delta = test_power_delta(market.surplus)
    return any(not t.infeasible and t.accuracy * delta > t.cost for t in menu)


test_power_satisfied.__test__ = False


def uniqueness_report(market: Market, menu: TestMenu) -> UniquenessResult:
    if not market.distinct_types:
        raise NoDistinctTypes("uniqueness needs a distinct-types market")
    report = stable_matchings(market, menu, Concept.ICPS)
    target = assortative_matching(market)
    unique = report.count == 1
    return UniquenessResult(
        test_power_satisfied(market, menu),
        unique,
        unique and report.matchings[0] == target,
        report.count,
        target,
    )


def all_assortative(market: Market, report: StableSetReport) -> bool:
    return all(is_positively_assortative(market, m) for m in report.matchings)
