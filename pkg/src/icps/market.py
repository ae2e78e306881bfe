"""Markets, type distributions, pair surplus and matching enumeration.

Numbers are either ``Fraction`` (exact mode, the default) or ``float``
(sweep mode).  Every constructor coerces its inputs through
:func:`as_number` so a market never mixes the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, permutations
from typing import Iterator, Mapping, Sequence, Union

Number = Union[Fraction, float]

FLOAT_TOL = 1e-9
EX_ANTE = "ex-ante"
REALIZED = "realized"
MODES = (EX_ANTE, REALIZED)
DEFAULT_CAP = 6


class MarketError(ValueError):
    pass


class InvalidMarket(MarketError):
    pass


class InfeasibleCorrelation(MarketError):
    pass


class InexactCorrelation(MarketError):
    """Correlated cell probabilities would need an irrational square root."""


class MissingRealizedTypes(MarketError):
    pass


class SizeCapExceeded(MarketError):
    pass


class NoSortKey(MarketError):
    pass


def as_number(x, exact: bool = True) -> Number:
    if exact:
        if isinstance(x, Fraction):
            return x
        if isinstance(x, float):
            if math.isinf(x):
                raise ValueError("infinite value in exact mode")
            return Fraction(repr(x))
        return Fraction(x)
    if isinstance(x, str):
        return float(Fraction(x))
    return float(x)


def positive(x: Number) -> bool:
    """Strict positivity; floats get the 1e-9 tolerance."""
    if isinstance(x, float):
        return x > FLOAT_TOL
    return x > 0


def nonnegative(x: Number) -> bool:
    if isinstance(x, float):
        return x >= -FLOAT_TOL
    return x >= 0


def exact_sqrt(x: Fraction) -> Fraction | None:
    if x < 0:
        return None
    n, d = x.numerator, x.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


@dataclass(frozen=True)
class TypeGrade:
    label: str
    value: Number


@dataclass(frozen=True)
class SurplusTable:
    """Surplus for every (firm grade, worker grade), grades sorted high to low."""

    firm_grades: tuple[TypeGrade, ...]
    worker_grades: tuple[TypeGrade, ...]
    entries: Mapping[tuple[str, str], Number]

    def __post_init__(self):
        fg = tuple(sorted(self.firm_grades, key=lambda g: g.value, reverse=True))
        wg = tuple(sorted(self.worker_grades, key=lambda g: g.value, reverse=True))
        object.__setattr__(self, "firm_grades", fg)
        object.__setattr__(self, "worker_grades", wg)
        object.__setattr__(self, "entries", dict(self.entries))
        for side in (fg, wg):
            if not side:
                raise InvalidMarket("empty grade set")
            if len({g.label for g in side}) != len(side):
                raise InvalidMarket("duplicate grade labels")
            vals = [g.value for g in side]
            if any(a <= b for a, b in zip(vals, vals[1:])):
                raise InvalidMarket("grade values must be strictly ordered")
        for x in fg:
            for y in wg:
                if (x.label, y.label) not in self.entries:
                    raise InvalidMarket(f"missing surplus entry {(x.label, y.label)}")
                if not nonnegative(self.entries[(x.label, y.label)]):
                    raise InvalidMarket("surplus entries must be nonnegative")
        # strictly increasing in both arguments
        for y in wg:
            col = [self.entries[(x.label, y.label)] for x in fg]
            if any(a <= b for a, b in zip(col, col[1:])):
                raise InvalidMarket("surplus not strictly increasing in firm grade")
        for x in fg:
            row = [self.entries[(x.label, y.label)] for y in wg]
            if any(a <= b for a, b in zip(row, row[1:])):
                raise InvalidMarket("surplus not strictly increasing in worker grade")
        labels_f = [g.label for g in fg]
        if len(fg) == 2 and labels_f == [g.label for g in wg]:
            hi, lo = labels_f
            if self.entries[(hi, lo)] != self.entries[(lo, hi)]:
                raise InvalidMarket("two-grade table needs S(H,L) == S(L,H)")

    @classmethod
    def hl(cls, alpha, beta, gamma, exact: bool = True) -> "SurplusTable":
        a, b, g = (as_number(v, exact) for v in (alpha, beta, gamma))
        grades = (TypeGrade("H", as_number(1, exact)), TypeGrade("L", as_number(0, exact)))
        entries = {("H", "H"): a, ("H", "L"): b, ("L", "H"): b, ("L", "L"): g}
        return cls(grades, grades, entries)

    def __call__(self, firm_grade: str, worker_grade: str) -> Number:
        return self.entries[(firm_grade, worker_grade)]

    def firm_grade(self, label: str) -> TypeGrade:
        for g in self.firm_grades:
            if g.label == label:
                return g
        raise KeyError(label)

    def worker_grade(self, label: str) -> TypeGrade:
        for g in self.worker_grades:
            if g.label == label:
                return g
        raise KeyError(label)

    @property
    def max_surplus(self) -> Number:
        return max(self.entries.values())


@dataclass(frozen=True)
class JointTypeDistribution:
    """Joint law of (firm grade, worker grade) in the two-grade case.

    Keys of ``probabilities`` are ``("H", "H")``, ``("H", "L")`` etc., with
    the firm coordinate first.
    """

    probabilities: Mapping[tuple[str, str], Number]
    p: Number
    rho: Number
    p_worker: Number

    def marginals(self) -> tuple[Number, Number]:
        pr = self.probabilities
        return pr[("H", "H")] + pr[("H", "L")], pr[("H", "H")] + pr[("L", "H")]


def build_joint_distribution(p, rho, p_worker=None, exact: bool = True) -> JointTypeDistribution:
    """Cell probabilities with marginals ``p`` (firm) and ``p_worker``.

    The covariance is ``rho * sqrt(p(1-p) q(1-q))``; with a common marginal
    this is ``rho * p * (1 - p)``.
    """
    pf = as_number(p, exact)
    pw = pf if p_worker is None else as_number(p_worker, exact)
    r = as_number(rho, exact)
    if not (0 < pf < 1 and 0 < pw < 1):
        raise InvalidMarket("marginal probabilities must lie in (0, 1)")
    if not (-1 <= r <= 1):
        raise InfeasibleCorrelation(f"rho={r} outside [-1, 1]")
    if pf == pw:
        cov = r * pf * (1 - pf)
    elif exact:
        root = exact_sqrt(pf * (1 - pf) * pw * (1 - pw))
        if root is None:
            if r != 0:
                raise InexactCorrelation(
                    f"rho={r} with marginals {pf}, {pw} needs an irrational root; use float mode"
                )
            root = Fraction(0)
        cov = r * root
    else:
        cov = r * math.sqrt(pf * (1 - pf) * pw * (1 - pw))
    hh = pf * pw + cov
    hl = pf - hh
    lh = pw - hh
    ll = 1 - pf - pw + hh
    cells = {("H", "H"): hh, ("H", "L"): hl, ("L", "H"): lh, ("L", "L"): ll}
    for key, v in cells.items():
        if not nonnegative(v):
            raise InfeasibleCorrelation(f"rho={r} gives P{key}={v} < 0 for p={pf}, q={pw}")
        if isinstance(v, float) and v < 0:
            cells[key] = 0.0
    return JointTypeDistribution(cells, pf, r, pw)


@dataclass(frozen=True)
class Agent:
    name: str
    prior: Number


@dataclass(frozen=True)
class Matching:
    """Injective partial map firm -> worker, stored as sorted pairs."""

    pairs: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        pairs = tuple(sorted((str(f), str(w)) for f, w in self.pairs))
        firms = [f for f, _ in pairs]
        workers = [w for _, w in pairs]
        if len(set(firms)) != len(firms) or len(set(workers)) != len(workers):
            raise MarketError("matching is not injective")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def from_dict(cls, mapping: Mapping[str, str | None]) -> "Matching":
        return cls(tuple((f, w) for f, w in mapping.items() if w is not None))

    def partner(self, agent: str) -> str | None:
        for f, w in self.pairs:
            if f == agent:
                return w
            if w == agent:
                return f
        return None

    def matched(self) -> set[str]:
        return {a for pair in self.pairs for a in pair}

    def __contains__(self, pair) -> bool:
        return tuple(pair) in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[tuple[str, str]]:
        return iter(self.pairs)

    def to_list(self) -> list[list[str]]:
        return [list(p) for p in self.pairs]


@dataclass(frozen=True)
class PairSurplusDistribution:
    atoms: tuple[tuple[Number, Number], ...]
    mean: Number = field(default=None)

    def __post_init__(self):
        merged: dict = {}
        for value, prob in self.atoms:
            if prob:
                merged[value] = merged.get(value, 0) + prob
        atoms = tuple(sorted(merged.items()))
        if not atoms:
            raise MarketError("distribution has no mass")
        total = sum(p for _, p in atoms)
        if isinstance(total, float):
            if abs(total - 1) > 1e-12:
                raise MarketError(f"probabilities sum to {total}")
        elif total != 1:
            raise MarketError(f"probabilities sum to {total}")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "mean", sum(v * p for v, p in atoms))

    @classmethod
    def point(cls, value) -> "PairSurplusDistribution":
        one = Fraction(1) if isinstance(value, Fraction) else 1.0
        return cls(((value, one),))

    @property
    def max(self) -> Number:
        return self.atoms[-1][0]

    @property
    def min(self) -> Number:
        return self.atoms[0][0]


@dataclass(frozen=True)
class Market:
    firms: tuple[Agent, ...]
    workers: tuple[Agent, ...]
    surplus: SurplusTable
    rho: Number = Fraction(0)
    realized_types: Mapping[str, str] | None = None
    mode: str = EX_ANTE
    distinct_types: bool = False
    exact: bool = True
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "firms", tuple(self.firms))
        object.__setattr__(self, "workers", tuple(self.workers))
        object.__setattr__(self, "rho", as_number(self.rho, self.exact))
        if self.realized_types is not None:
            object.__setattr__(self, "realized_types", dict(self.realized_types))
        if self.mode not in MODES:
            raise InvalidMarket(f"unknown mode {self.mode!r}")
        names = [a.name for a in self.firms + self.workers]
        if len(set(names)) != len(names):
            raise InvalidMarket("agent names must be unique across both sides")
        for a in self.firms + self.workers:
            if not (0 < a.prior < 1):
                raise InvalidMarket(f"prior of {a.name} must lie in (0, 1)")
        types = self.realized_types or {}
        for a in self.firms:
            if a.name in types and types[a.name] not in {g.label for g in self.surplus.firm_grades}:
                raise InvalidMarket(f"unknown grade {types[a.name]!r} for {a.name}")
        for a in self.workers:
            if a.name in types and types[a.name] not in {g.label for g in self.surplus.worker_grades}:
                raise InvalidMarket(f"unknown grade {types[a.name]!r} for {a.name}")
        if self.mode == REALIZED:
            missing = [n for n in names if n not in types]
            if missing:
                raise MissingRealizedTypes(f"realized mode without types for {missing}")
        else:
            if len(self.surplus.firm_grades) != 2 or len(self.surplus.worker_grades) != 2:
                raise InvalidMarket("ex-ante mode needs exactly two grades per side")
        if self.distinct_types and types:
            for side in (self.firms, self.workers):
                vals = [self.grade(a.name).value for a in side if a.name in types]
                if len(set(vals)) != len(vals):
                    raise InvalidMarket("distinct-types market has tied realized grades")

    @property
    def firm_names(self) -> list[str]:
        return [a.name for a in self.firms]

    @property
    def worker_names(self) -> list[str]:
        return [a.name for a in self.workers]

    def is_firm(self, name: str) -> bool:
        return name in self.firm_names

    def agent(self, name: str) -> Agent:
        for a in self.firms + self.workers:
            if a.name == name:
                return a
        raise KeyError(name)

    def prior(self, name: str) -> Number:
        return self.agent(name).prior

    def grade(self, name: str) -> TypeGrade:
        if not self.realized_types or name not in self.realized_types:
            raise MissingRealizedTypes(f"no realized type for {name}")
        label = self.realized_types[name]
        if self.is_firm(name):
            return self.surplus.firm_grade(label)
        return self.surplus.worker_grade(label)

    def replace(self, **changes) -> "Market":
        fields = dict(
            firms=self.firms,
            workers=self.workers,
            surplus=self.surplus,
            rho=self.rho,
            realized_types=self.realized_types,
            mode=self.mode,
            distinct_types=self.distinct_types,
            exact=self.exact,
        )
        fields.update(changes)
        return Market(**fields)

    def validate_matching(self, matching: Matching) -> None:
        firms, workers = set(self.firm_names), set(self.worker_names)
        for f, w in matching:
            if f not in firms or w not in workers:
                raise MarketError(f"pair {(f, w)} not in market")

    def pair_value(self, firm: str, worker: str) -> Number:
        return pair_surplus_distribution(self, firm, worker).mean


def pair_profile_distribution(market: Market, firm: str, worker: str) -> list[tuple[tuple[str, str], Number]]:
    """Probabilities of (firm grade label, worker grade label) for one pair."""
    if not market.is_firm(firm) or worker not in market.worker_names:
        raise MarketError(f"{firm!r}, {worker!r} are not a firm and a worker")
    key = ("profile", firm, worker)
    if key in market._cache:
        return market._cache[key]
    if market.mode == REALIZED:
        one = as_number(1, market.exact)
        out = [((market.grade(firm).label, market.grade(worker).label), one)]
    else:
        joint = build_joint_distribution(
            market.prior(firm), market.rho, market.prior(worker), exact=market.exact
        )
        fh, fl = (g.label for g in market.surplus.firm_grades)
        wh, wl = (g.label for g in market.surplus.worker_grades)
        names_f = {"H": fh, "L": fl}
        names_w = {"H": wh, "L": wl}
        out = [((names_f[a], names_w[b]), pr) for (a, b), pr in joint.probabilities.items()]
    market._cache[key] = out
    return out


def pair_surplus_distribution(market: Market, firm: str, worker: str) -> PairSurplusDistribution:
    key = ("dist", firm, worker)
    if key not in market._cache:
        profiles = pair_profile_distribution(market, firm, worker)
        market._cache[key] = PairSurplusDistribution(
            tuple((market.surplus(gf, gw), pr) for (gf, gw), pr in profiles)
        )
    return market._cache[key]


def expected_pair_surplus(dist: PairSurplusDistribution) -> Number:
    return dist.mean


def test_power_delta(table: SurplusTable) -> Number:
    """Smallest one-step surplus loss from degrading either partner's grade.

    In the two-grade table this is ``min(alpha - beta, beta - gamma)``.
    """
    gaps = []
    fg, wg = table.firm_grades, table.worker_grades
    for y in wg:
        for hi, lo in zip(fg, fg[1:]):
            gaps.append(table(hi.label, y.label) - table(lo.label, y.label))
    for x in fg:
        for hi, lo in zip(wg, wg[1:]):
            gaps.append(table(x.label, hi.label) - table(x.label, lo.label))
    if not gaps:
        return as_number(0, not isinstance(table.max_surplus, float))
    return min(gaps)


test_power_delta.__test__ = False  # keep pytest from collecting it


def expected_welfare(market: Market, matching: Matching, menu_cost=None) -> Number:
    total = as_number(0, market.exact)
    for f, w in matching:
        total += market.pair_value(f, w)
    if menu_cost is not None:
        total -= as_number(menu_cost, market.exact) * len(matching)
    return total


def count_matchings(n_firms: int, n_workers: int) -> int:
    return sum(
        math.comb(n_firms, k) * math.comb(n_workers, k) * math.factorial(k)
        for k in range(min(n_firms, n_workers) + 1)
    )


def enumerate_matchings(market: Market, cap: int = DEFAULT_CAP) -> list[Matching]:
    """All injective partial matchings, smallest first, then lexicographic."""
    firms, workers = market.firm_names, market.worker_names
    if len(firms) > cap or len(workers) > cap:
        raise SizeCapExceeded(f"{len(firms)}x{len(workers)} exceeds enumeration cap {cap}")
    key = ("matchings",)
    if key in market._cache:
        return market._cache[key]
    out = []
    for k in range(min(len(firms), len(workers)) + 1):
        for fs in combinations(firms, k):
            for ws in permutations(workers, k):
                out.append(Matching(tuple(zip(fs, ws))))
    market._cache[key] = out
    return out


def sort_keys(market: Market) -> dict[str, Number]:
    """Realized grade values, or priors when they are distinct on each side."""
    if market.realized_types and all(
        n in market.realized_types for n in market.firm_names + market.worker_names
    ):
        return {n: market.grade(n).value for n in market.firm_names + market.worker_names}
    for side in (market.firms, market.workers):
        priors = [a.prior for a in side]
        if len(set(priors)) != len(priors):
            raise NoSortKey("no realized types and tied priors")
    return {a.name: a.prior for a in market.firms + market.workers}


def is_positively_assortative(market: Market, matching: Matching) -> bool:
    key = sort_keys(market)
    pairs = list(matching)
    for (f, w), (f2, w2) in combinations(pairs, 2):
        if (key[f] - key[f2]) * (key[w] - key[w2]) < 0:
            return False
    return True


def assortative_matching(market: Market) -> Matching:
    key = sort_keys(market)
    firms = sorted(market.firm_names, key=lambda n: key[n], reverse=True)
    workers = sorted(market.worker_names, key=lambda n: key[n], reverse=True)
    return Matching(tuple(zip(firms, workers)))


def hl_market(
    firm_priors: Sequence,
    worker_priors: Sequence,
    alpha=4,
    beta=2,
    gamma=1,
    rho=0,
    realized: Mapping[str, str] | None = None,
    exact: bool = True,
    distinct_types: bool = False,
) -> Market:
    """Two-grade market with firms ``f1..`` and workers ``w1..``."""
    firms = tuple(Agent(f"f{i + 1}", as_number(p, exact)) for i, p in enumerate(firm_priors))
    workers = tuple(Agent(f"w{i + 1}", as_number(p, exact)) for i, p in enumerate(worker_priors))
    return Market(
        firms,
        workers,
        SurplusTable.hl(alpha, beta, gamma, exact),
        rho=rho,
        realized_types=realized,
        mode=REALIZED if realized else EX_ANTE,
        distinct_types=distinct_types,
        exact=exact,
    )
