"""Seeded random markets for the property and acceptance suites."""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .information import Test, TestMenu
from .market import EX_ANTE, REALIZED, Agent, Market, MarketError, SurplusTable, TypeGrade, as_number


class InvalidSpec(MarketError):
    pass


@dataclass(frozen=True)
class MarketSpec:
    """What :func:`generate_market` draws from.

    ``prior_range`` is open on both ends.  Realized distinct-type markets
    get one grade per agent and a supermodular surplus
    ``S(x, y) = x*y + b*(x + y)``; other markets use the two-grade table.
    """

    n_firms: int = 2
    n_workers: int = 2
    mode: str = EX_ANTE
    prior_range: tuple = (Fraction(1, 10), Fraction(9, 10))
    prior_denominator: int = 20
    surplus_range: tuple = (0, 10)
    surplus_denominator: int = 4
    rho: Fraction | float = Fraction(0)
    distinct_types: bool = False
    exact: bool = True
    max_grade: int = 9

    def __post_init__(self):
        if self.n_firms < 0 or self.n_workers < 0:
            raise InvalidSpec("negative side size")
        if self.mode not in (EX_ANTE, REALIZED):
            raise InvalidSpec(f"unknown mode {self.mode!r}")
        lo, hi = (Fraction(v) for v in self.prior_range)
        if not (0 <= lo < hi <= 1):
            raise InvalidSpec("prior range must satisfy 0 <= lo < hi <= 1")
        if not any(lo < Fraction(k, self.prior_denominator) < hi for k in range(1, self.prior_denominator)):
            raise InvalidSpec("prior range contains no grid point")
        slo, shi = (Fraction(v) for v in self.surplus_range)
        if slo < 0 or (shi - slo) * self.surplus_denominator < 2:
            raise InvalidSpec("surplus range must be nonnegative and hold three grid values")
        if self.distinct_types and self.mode != REALIZED:
            raise InvalidSpec("distinct types need realized mode")
        if self.distinct_types and max(self.n_firms, self.n_workers) > self.max_grade:
            raise InvalidSpec("not enough grade values for distinct types")


def _grid(rng: random.Random, lo: Fraction, hi: Fraction, denom: int, inclusive: bool) -> list[Fraction]:
    pts = [Fraction(k, denom) for k in range(int(lo * denom) - 1, int(hi * denom) + 2)]
    if inclusive:
        return [x for x in pts if lo <= x <= hi]
    return [x for x in pts if lo < x < hi]


def generate_market(seed: int, spec: MarketSpec = MarketSpec()) -> Market:
    """Deterministic market for ``seed``; equal seeds give equal markets."""
    rng = random.Random(seed)
    lo, hi = (Fraction(v) for v in spec.prior_range)
    prior_grid = _grid(rng, lo, hi, spec.prior_denominator, inclusive=False)
    priors_f = [rng.choice(prior_grid) for _ in range(spec.n_firms)]
    priors_w = [rng.choice(prior_grid) for _ in range(spec.n_workers)]
    num = lambda v: as_number(v, spec.exact)  # noqa: E731
    firms = tuple(Agent(f"f{i + 1}", num(p)) for i, p in enumerate(priors_f))
    workers = tuple(Agent(f"w{i + 1}", num(p)) for i, p in enumerate(priors_w))
    types = None
    if spec.distinct_types:
        fvals = rng.sample(range(1, spec.max_grade + 1), spec.n_firms)
        wvals = rng.sample(range(1, spec.max_grade + 1), spec.n_workers)
        b = rng.randint(0, 2)
        fgr = tuple(TypeGrade(f"g{v}", num(v)) for v in sorted(fvals, reverse=True))
        wgr = tuple(TypeGrade(f"g{v}", num(v)) for v in sorted(wvals, reverse=True))
        entries = {
            (x.label, y.label): num(x.value * y.value + b * (x.value + y.value)) for x in fgr for y in wgr
        }
        table = SurplusTable(fgr, wgr, entries)
        types = {a.name: f"g{v}" for a, v in zip(firms, fvals)}
        types.update({a.name: f"g{v}" for a, v in zip(workers, wvals)})
    else:
        slo, shi = (Fraction(v) for v in spec.surplus_range)
        values = sorted(rng.sample(_grid(rng, slo, shi, spec.surplus_denominator, inclusive=True), 3))
        gamma, beta, alpha = values
        table = SurplusTable.hl(alpha, beta, gamma, spec.exact)
        if spec.mode == REALIZED:
            types = {a.name: ("H" if rng.random() < a.prior else "L") for a in firms + workers}
    return Market(
        firms,
        workers,
        table,
        rho=spec.rho,
        realized_types=types,
        mode=spec.mode,
        distinct_types=spec.distinct_types,
        exact=spec.exact,
    )


def generate_menu(seed: int, n_tests: int = 1, exact: bool = True, max_cost=Fraction(3, 2)) -> TestMenu:
    """Random menu of tests on a quarter/tenth grid, null test included."""
    rng = random.Random(seed)
    tests = []
    for _ in range(n_tests):
        acc = Fraction(rng.randint(1, 10), 10)
        cost = Fraction(rng.randint(0, int(max_cost * 20)), 20)
        tests.append(Test(as_number(acc, exact), as_number(cost, exact)))
    return TestMenu(tuple(tests))


def market_suite(n: int, seed: int, **spec_kwargs):
    """``n`` markets from consecutive seeds; each side is drawn from 1 up to the base sizes."""
    out = []
    base = MarketSpec(**spec_kwargs)
    for i in range(n):
        rng = random.Random(seed * 100_003 + i)
        nf = rng.randint(1, base.n_firms)
        nw = rng.randint(1, base.n_workers)
        spec = MarketSpec(**{**spec_kwargs, "n_firms": nf, "n_workers": nw})
        out.append(generate_market(seed * 100_003 + i, spec))
    return out
