"""Blocking pairs, individual rationality, supporting payoffs and dynamics."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .information import (
    NULL_MENU,
    DeviationQuote,
    SequentialProtocol,
    StoppingPolicy,
    Test,
    TestMenu,
    best_quote,
    menu_threshold,
    sequential_threshold,
    sequential_value,
)
from .market import (
    Market,
    MarketError,
    Matching,
    Number,
    PairSurplusDistribution,
    as_number,
    enumerate_matchings,
    nonnegative,
    pair_profile_distribution,
    pair_surplus_distribution,
    positive,
)

log = logging.getLogger(__name__)


class Concept(str, enum.Enum):
    BAYES = "bayes"
    ICPS = "icps"
    ENDOG = "endog"
    SEQ = "seq"
    NTU = "ntu"


class NonIrStart(MarketError):
    pass


class ConceptError(MarketError):
    pass


@dataclass(frozen=True)
class Allocation:
    """A matching with payoffs; ``pair_values`` overrides a pair's joint value.

    Overrides record pairs formed through tested deviations, whose joint
    value is the deviation value rather than the plain expected surplus.
    """

    matching: Matching
    payoffs: Mapping[str, Number]
    pair_values: Mapping[tuple[str, str], Number] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "payoffs", dict(self.payoffs))
        object.__setattr__(self, "pair_values", dict(self.pair_values))

    def payoff(self, agent: str) -> Number:
        return self.payoffs.get(agent, 0)

    def joint_value(self, market: Market, firm: str, worker: str) -> Number:
        if (firm, worker) in self.pair_values:
            return self.pair_values[(firm, worker)]
        return market.pair_value(firm, worker)

    def welfare(self, market: Market) -> Number:
        total = as_number(0, market.exact)
        for f, w in self.matching:
            total += self.joint_value(market, f, w)
        return total

    def to_record(self) -> dict:
        from .serialize import num_out

        return {
            "matching": self.matching.to_list(),
            "payoffs": {k: num_out(v) for k, v in sorted(self.payoffs.items())},
        }


def validate_allocation(market: Market, alloc: Allocation) -> None:
    market.validate_matching(alloc.matching)
    matched = alloc.matching.matched()
    for f, w in alloc.matching:
        total = alloc.payoff(f) + alloc.payoff(w)
        value = alloc.joint_value(market, f, w)
        if isinstance(total, float) or isinstance(value, float):
            if abs(total - value) > 1e-9:
                raise MarketError(f"payoffs of {(f, w)} sum to {total}, not {value}")
        elif total != value:
            raise MarketError(f"payoffs of {(f, w)} sum to {total}, not {value}")
    for name in market.firm_names + market.worker_names:
        if name not in matched and alloc.payoff(name) != 0:
            raise MarketError(f"unmatched {name} has nonzero payoff")


def check_individual_rationality(alloc: Allocation) -> bool:
    return all(nonnegative(v) for v in alloc.payoffs.values())


@dataclass(frozen=True)
class BlockingCertificate:
    firm: str
    worker: str
    concept: Concept
    instrument: Test | StoppingPolicy
    status_quo: Number
    deviation_value: Number
    gain: Number

    def to_record(self) -> dict:
        from .serialize import num_out

        return {
            "firm": self.firm,
            "worker": self.worker,
            "concept": self.concept.value,
            "instrument": self.instrument.to_record(),
            "status_quo": num_out(self.status_quo),
            "deviation_value": num_out(self.deviation_value),
            "gain": num_out(self.gain),
        }


def concept_menus(
    concept: Concept, menu: TestMenu, protocol: SequentialProtocol | None = None
) -> TestMenu:
    """One-shot menu a concept may draw on.

    Bayesian pairs only have the null test.  Endogenous selection adds the
    protocol's stop-after-stage-k tests, so the sequential concept (which
    also keeps the one-shot menu) is never weaker than it.
    """
    concept = Concept(concept)
    if concept is Concept.BAYES:
        return NULL_MENU
    if concept is Concept.ICPS or protocol is None:
        return menu
    return menu.union(protocol.collapsed_menu())


def _require_protocol(concept: Concept, protocol):
    if concept is Concept.SEQ and protocol is None:
        raise ConceptError("sequential concept needs a protocol")
    if concept is Concept.NTU:
        raise ConceptError("use find_ntu_blocking_pair for the NTU concept")


def concept_quote(
    dist: PairSurplusDistribution,
    status_quo: Number,
    concept: Concept,
    menu: TestMenu,
    protocol: SequentialProtocol | None = None,
) -> DeviationQuote:
    concept = Concept(concept)
    _require_protocol(concept, protocol)
    quote = best_quote(dist, concept_menus(concept, menu, protocol), status_quo)
    if concept is Concept.SEQ:
        seq = sequential_value(dist, protocol, status_quo)
        if seq.value > quote.value:
            quote = seq
    return quote


def concept_threshold(
    dist: PairSurplusDistribution,
    concept: Concept,
    menu: TestMenu,
    protocol: SequentialProtocol | None = None,
) -> Number:
    concept = Concept(concept)
    _require_protocol(concept, protocol)
    value, _ = menu_threshold(dist, concept_menus(concept, menu, protocol))
    if concept is Concept.SEQ:
        value = max(value, sequential_threshold(dist, protocol))
    return value


def find_blocking_pair(
    market: Market,
    alloc: Allocation,
    menu: TestMenu,
    concept: Concept = Concept.ICPS,
    protocol: SequentialProtocol | None = None,
) -> BlockingCertificate | None:
    """First pair, in firm-then-worker order, with a strictly positive gain.

    Pairs matched to each other are skipped: standing matches do not test.
    """
    concept = Concept(concept)
    for f in market.firm_names:
        for w in market.worker_names:
            if (f, w) in alloc.matching:
                continue
            status_quo = alloc.payoff(f) + alloc.payoff(w)
            dist = pair_surplus_distribution(market, f, w)
            quote = concept_quote(dist, status_quo, concept, menu, protocol)
            if quote.blocks:
                return BlockingCertificate(
                    f, w, concept, quote.instrument, status_quo, quote.value, quote.gain
                )
    return None


# ---------------------------------------------------------------------------
# NTU


@dataclass(frozen=True)
class NtuUtilityTable:
    """Per-profile utilities keyed by (firm grade, worker grade)."""

    firm_utility: Mapping[tuple[str, str], Number]
    worker_utility: Mapping[tuple[str, str], Number]
    firm_cost_share: Number = None

    def __post_init__(self):
        object.__setattr__(self, "firm_utility", dict(self.firm_utility))
        object.__setattr__(self, "worker_utility", dict(self.worker_utility))
        if set(self.firm_utility) != set(self.worker_utility):
            raise MarketError("firm and worker utility tables cover different profiles")
        if self.firm_cost_share is None:
            object.__setattr__(self, "firm_cost_share", Fraction(1, 2))
        if not (0 <= self.firm_cost_share <= 1):
            raise MarketError("firm cost share must lie in [0, 1]")

    def costs(self, test: Test) -> tuple[Number, Number]:
        return self.firm_cost_share * test.cost, (1 - self.firm_cost_share) * test.cost


def ntu_profiles(
    market: Market, utilities: NtuUtilityTable, firm: str, worker: str
) -> list[tuple[tuple[Number, Number], Number]]:
    return [
        ((utilities.firm_utility[prof], utilities.worker_utility[prof]), pr)
        for prof, pr in pair_profile_distribution(market, firm, worker)
        if pr
    ]


def ntu_deviation(
    profiles, status_quo: tuple[Number, Number], test: Test, firm_cost_share=None
) -> tuple[Number, Number]:
    """Expected utilities (firm, worker) from deviating with ``test``.

    Revealed profiles are consummated only when both sides strictly gain;
    without a reveal the pair deviates only if both prior means strictly
    exceed the status quo.  Each side nets its own share of the cost.
    """
    if firm_cost_share is None:
        firm_cost_share = Fraction(1, 2)
    sf, sw = status_quo
    pi = test.accuracy
    inf_f = inf_w = 0 * sf
    mean_f = mean_w = 0 * sf
    for (uf, uw), pr in profiles:
        mean_f += uf * pr
        mean_w += uw * pr
        if uf > sf and uw > sw:
            inf_f += uf * pr
            inf_w += uw * pr
        else:
            inf_f += sf * pr
            inf_w += sw * pr
    if mean_f > sf and mean_w > sw:
        blind_f, blind_w = mean_f, mean_w
    else:
        blind_f, blind_w = sf, sw
    cf = firm_cost_share * test.cost
    cw = (1 - firm_cost_share) * test.cost
    return (
        pi * inf_f + (1 - pi) * blind_f - cf,
        pi * inf_w + (1 - pi) * blind_w - cw,
    )


def ntu_status_quo(market: Market, matching: Matching, utilities: NtuUtilityTable) -> dict[str, Number]:
    zero = as_number(0, market.exact)
    out = {n: zero for n in market.firm_names + market.worker_names}
    for f, w in matching:
        for (uf, uw), pr in ntu_profiles(market, utilities, f, w):
            out[f] += uf * pr
            out[w] += uw * pr
    return out


def find_ntu_blocking_pair(
    market: Market,
    matching: Matching,
    utilities: NtuUtilityTable,
    menu: TestMenu,
    status_quo: Mapping[str, Number] | None = None,
) -> BlockingCertificate | None:
    """First pair and test, in menu order, under which both sides strictly gain.

    ``menu`` may also be a plain sequence of tests, used as given; a
    ``TestMenu`` always carries the null test, so uninformed deviations
    are then considered too.
    """
    sq = dict(status_quo) if status_quo is not None else ntu_status_quo(market, matching, utilities)
    for f in market.firm_names:
        for w in market.worker_names:
            if (f, w) in matching:
                continue
            profiles = ntu_profiles(market, utilities, f, w)
            base = (sq[f], sq[w])
            for test in menu:
                if test.infeasible:
                    continue
                ef, ew = ntu_deviation(profiles, base, test, utilities.firm_cost_share)
                if positive(ef - base[0]) and positive(ew - base[1]):
                    return BlockingCertificate(
                        f, w, Concept.NTU, test, base[0] + base[1], ef + ew, ef + ew - base[0] - base[1]
                    )
    return None


def ntu_hidden_gains(
    market: Market,
    matching: Matching,
    utilities: NtuUtilityTable,
    menu: TestMenu,
    status_quo: Mapping[str, Number] | None = None,
) -> list[dict]:
    """Pairs whose joint surplus would rise under transfers yet cannot block.

    Only meaningful when ``find_ntu_blocking_pair`` found nothing; each hit is
    also logged.
    """
    sq = dict(status_quo) if status_quo is not None else ntu_status_quo(market, matching, utilities)
    hits = []
    for f in market.firm_names:
        for w in market.worker_names:
            if (f, w) in matching:
                continue
            profiles = ntu_profiles(market, utilities, f, w)
            joint = PairSurplusDistribution(tuple((uf + uw, pr) for (uf, uw), pr in profiles))
            quote = best_quote(joint, menu, sq[f] + sq[w])
            if quote.blocks:
                hits.append(
                    {"firm": f, "worker": w, "joint_value": quote.value, "status_quo": sq[f] + sq[w]}
                )
                log.info(
                    "NTU pair (%s, %s): joint value %s exceeds status quo %s without a block",
                    f, w, quote.value, sq[f] + sq[w],
                )
    return hits


# ---------------------------------------------------------------------------
# Supporting payoffs as a system of difference constraints


def _shortest_paths(n: int, edges, tol) -> list | None:
    """Bellman-Ford from node 0; None on a negative cycle."""
    dist = [None] * n
    dist[0] = 0
    for _ in range(n - 1):
        changed = False
        for u, v, w in edges:
            if dist[u] is None:
                continue
            cand = dist[u] + w
            if dist[v] is None or cand < dist[v] - tol:
                dist[v] = cand
                changed = True
        if not changed:
            break
    for u, v, w in edges:
        if dist[u] is not None and (dist[v] is None or dist[u] + w < dist[v] - tol):
            return None
    return dist


def supporting_payoffs(
    market: Market,
    matching: Matching,
    thresholds: Mapping[tuple[str, str], Number],
    pair_values: Mapping[tuple[str, str], Number] | None = None,
) -> dict[str, Number] | None:
    """Individually rational payoffs meeting every cross-pair threshold.

    Matched pairs split their value, unmatched agents get 0, and every pair
    needs ``u_f + v_w >= threshold``; for a matched pair that is simply
    ``value >= threshold``, so a standing match worth less than what a test
    would let it demand is never supported.  With one free
    variable per matched pair (the firm's share) every constraint is a
    difference constraint, so feasibility is a negative-cycle test.  The
    witness is the midpoint of the pointwise-smallest and largest solutions.
    """
    exact = market.exact
    tol = 0 if exact else 1e-9
    pairs = list(matching)
    index = {f: i + 1 for i, (f, _) in enumerate(pairs)}
    windex = {w: i + 1 for i, (_, w) in enumerate(pairs)}
    value = {}
    for i, (f, w) in enumerate(pairs):
        v = (pair_values or {}).get((f, w))
        value[i + 1] = market.pair_value(f, w) if v is None else v
    zero = as_number(0, exact)
    edges = []  # (u, v, w): x_v - x_u <= w
    for k, val in value.items():
        edges.append((0, k, val))
        edges.append((k, 0, zero))
    for k, (f, w) in enumerate(pairs, start=1):
        if value[k] < thresholds[(f, w)] - tol:
            return None
    for f in market.firm_names:
        for w in market.worker_names:
            if (f, w) in matching:
                continue
            t = thresholds[(f, w)]
            a, b = index.get(f), windex.get(w)
            if a is None and b is None:
                if positive(t):
                    return None
            elif b is None:
                edges.append((a, 0, -t))
            elif a is None:
                edges.append((0, b, value[b] - t))
            else:
                edges.append((a, b, value[b] - t))
    n = len(pairs) + 1
    upper = _shortest_paths(n, edges, tol)
    if upper is None:
        return None
    lower = _shortest_paths(n, [(v, u, w) for u, v, w in edges], tol)
    if lower is None:
        return None
    payoffs = {name: zero for name in market.firm_names + market.worker_names}
    half = as_number(1, exact) / 2
    for k, (f, w) in enumerate(pairs, start=1):
        x = (upper[k] - upper[0] + (-lower[k] + lower[0])) * half
        payoffs[f] = x
        payoffs[w] = value[k] - x
    return payoffs


def concept_thresholds(
    market: Market,
    concept: Concept,
    menu: TestMenu,
    protocol: SequentialProtocol | None = None,
) -> dict[tuple[str, str], Number]:
    concept = Concept(concept)
    key = ("thresholds", concept, menu, protocol)
    if key not in market._cache:
        market._cache[key] = {
            (f, w): concept_threshold(pair_surplus_distribution(market, f, w), concept, menu, protocol)
            for f in market.firm_names
            for w in market.worker_names
        }
    return market._cache[key]


# ---------------------------------------------------------------------------
# Improvement dynamics


@dataclass
class ImprovementStep:
    allocation: Allocation
    certificate: BlockingCertificate | None
    ledger_welfare: Number
    welfare: Number


@dataclass
class ImprovementTrace:
    steps: list[ImprovementStep]
    terminated: bool
    max_steps: int

    @property
    def final(self) -> Allocation:
        return self.steps[-1].allocation

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def jilted_losses(self) -> list:
        """Steps where realized welfare fell short of the deviators' ledger gain."""
        out = []
        for prev, cur in zip(self.steps, self.steps[1:]):
            gain = prev.certificate.gain
            if cur.welfare - prev.welfare < gain:
                out.append((prev.certificate.firm, prev.certificate.worker, gain, cur.welfare - prev.welfare))
        return out

    def to_record(self) -> dict:
        from .serialize import num_out

        return {
            "terminated": self.terminated,
            "steps": [
                {
                    "allocation": s.allocation.to_record(),
                    "certificate": s.certificate.to_record() if s.certificate else None,
                    "ledger_welfare": num_out(s.ledger_welfare),
                    "welfare": num_out(s.welfare),
                }
                for s in self.steps
            ],
        }


def default_step_cap(market: Market, menu: TestMenu) -> int:
    breakpoints = 0
    for f in market.firm_names:
        for w in market.worker_names:
            breakpoints = max(breakpoints, len(pair_surplus_distribution(market, f, w).atoms) + 1)
    return len(enumerate_matchings(market)) * max(breakpoints, 1) * max(len(menu), 1)


def improvement_path(
    market: Market,
    start: Allocation,
    menu: TestMenu,
    concept: Concept = Concept.ICPS,
    protocol: SequentialProtocol | None = None,
    max_steps: int | None = None,
) -> ImprovementTrace:
    """Execute blocking deviations until none remains.

    The deviators' new joint value is their deviation value (the expected
    surplus with the test's acceptance rule folded in) and each keeps its old
    payoff plus half the gain.  Former partners are left unmatched at 0.
    ``ledger_welfare`` adds each step's gain to the starting welfare.
    """
    if not check_individual_rationality(start):
        raise NonIrStart("improvement path needs an individually rational start")
    cap = default_step_cap(market, menu) if max_steps is None else max_steps
    alloc = start
    ledger = start.welfare(market)
    steps = []
    while True:
        cert = find_blocking_pair(market, alloc, menu, concept, protocol)
        steps.append(ImprovementStep(alloc, cert, ledger, alloc.welfare(market)))
        if cert is None:
            return ImprovementTrace(steps, True, cap)
        if len(steps) > cap:
            log.warning("improvement path hit the %d-step cap without terminating", cap)
            return ImprovementTrace(steps, False, cap)
        alloc = _execute(market, alloc, cert)
        ledger = ledger + cert.gain


def _execute(market: Market, alloc: Allocation, cert: BlockingCertificate) -> Allocation:
    f, w = cert.firm, cert.worker
    old_w, old_f = alloc.matching.partner(f), alloc.matching.partner(w)
    pairs = [p for p in alloc.matching if p[0] != f and p[1] != w]
    pairs.append((f, w))
    payoffs = dict(alloc.payoffs)
    half = cert.gain / 2
    payoffs[f] = alloc.payoff(f) + half
    payoffs[w] = alloc.payoff(w) + half
    zero = 0 * half
    for jilted in (old_w, old_f):
        if jilted is not None:
            payoffs[jilted] = zero
    values = {p: v for p, v in alloc.pair_values.items() if p in pairs}
    if cert.deviation_value != market.pair_value(f, w):
        values[(f, w)] = cert.deviation_value
    else:
        values.pop((f, w), None)
    return Allocation(Matching(tuple(pairs)), payoffs, values)
