import random
from fractions import Fraction as F

import pytest
from hypothesis import settings
from icps.generate import MarketSpec, generate_market, generate_menu
from icps.information import Test, TestMenu
from icps.market import hl_market, pair_surplus_distribution

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def standard_market():
    return hl_market([F(1, 2)], [F(1, 2)])


@pytest.fixture
def standard_dist(standard_market):
    return pair_surplus_distribution(standard_market, "f1", "w1")


def suite(n, seed=1, max_side=3):
    """Seeded markets alternating ex-ante and realized mode, each with a two-test menu."""
    out = []
    for i in range(n):
        rng = random.Random(seed * 7919 + i)
        spec = MarketSpec(
            rng.randint(1, max_side),
            rng.randint(1, max_side),
            mode="ex-ante" if i % 2 == 0 else "realized",
        )
        out.append((generate_market(seed * 7919 + i, spec), generate_menu(seed * 7919 + i, 2)))
    return out


def perfect_menu():
    return TestMenu.of(Test(1, 0))


ACCEPTANCE_LINES = []


def criterion(number, ok, detail):
    """Record one acceptance line; printed again in the terminal summary."""
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
