"""Scenario runs, proposition checks, parameter sweeps and surface data."""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .config import Scenario
from .information import NULL_MENU, Test, TestMenu, acceptance_checks, option_value, sequential_value, deviation_value
from .market import (
    Agent,
    Market,
    Matching,
    SurplusTable,
    as_number,
    enumerate_matchings,
    hl_market,
    pair_profile_distribution,
    pair_surplus_distribution,
)
from .serialize import csv_num, market_to_dict, num_out
from .solver import (
    TESTED,
    all_assortative,
    complete_information_stable,
    lone_wolf_report,
    max_welfare_matching,
    ntu_stable_matchings,
    refinement_magnitude,
    stable_matchings,
    test_power_satisfied,
    uniqueness_report,
)
from .stability import (
    Allocation,
    Concept,
    check_individual_rationality,
    concept_thresholds,
    find_blocking_pair,
    find_ntu_blocking_pair,
    improvement_path,
    ntu_hidden_gains,
    ntu_status_quo,
    supporting_payoffs,
    validate_allocation,
)

log = logging.getLogger(__name__)

PASS, FAIL, REPORTED, SKIPPED = "pass", "fail", "reported", "skipped"
HARD = (PASS, FAIL)


# ---------------------------------------------------------------------------
# Output helpers


def atomic_write(path: str | Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=num_out) + "\n"


def rows_to_csv(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([csv_num(r[c]) for c in columns])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Proposition checks


@dataclass
class Check:
    name: str
    status: str
    detail: str = ""
    data: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {"name": self.name, "status": self.status, "detail": self.detail, "data": self.data}


def _pairs(ms) -> list:
    return sorted(m.to_list() for m in ms)


def check_inclusion(market: Market, menu: TestMenu, protocol=None) -> Check:
    try:
        mag = refinement_magnitude(market, menu, protocol)
    except AssertionError as exc:
        return Check("refinement-inclusion", FAIL, str(exc))
    data = {k: v for k, v in mag.items() if k != "reports"}
    return Check("refinement-inclusion", PASS, "inclusion chain holds", data)


def check_null_collapse(market: Market) -> Check:
    bayes = stable_matchings(market, NULL_MENU, Concept.BAYES).matchings
    icps = stable_matchings(market, NULL_MENU, Concept.ICPS).matchings
    ok = bayes == icps
    return Check("null-menu-collapse", PASS if ok else FAIL, "ICPS = Bayesian" if ok else "sets differ")


def check_complete_information(market: Market) -> Check:
    if market.mode != "realized":
        return Check("perfect-test-collapse", SKIPPED, "needs realized types")
    perfect = TestMenu.of(Test(1, 0))
    icps = stable_matchings(market, perfect, Concept.ICPS).matchings
    oracle = complete_information_stable(market)
    ok = set(icps) == set(oracle)
    return Check(
        "perfect-test-collapse",
        PASS if ok else FAIL,
        "ICPS = complete-information" if ok else "sets differ",
        {"icps": _pairs(icps), "oracle": _pairs(oracle)},
    )


def check_existence(market: Market, menu: TestMenu) -> Check:
    best = max_welfare_matching(market)
    thresholds = concept_thresholds(market, Concept.ICPS, menu)
    witness = supporting_payoffs(market, best, thresholds)
    tested = stable_matchings(market, menu, Concept.ICPS, standing=TESTED)
    data = {"matching": best.to_list(), "supported": witness is not None, "tested_standing_count": tested.count}
    if market.mode == "realized":
        return Check("existence", PASS if witness is not None else FAIL, "", data)
    if witness is None:
        log.warning(
            "welfare-maximal matching %s has no supporting payoffs in ex-ante mode; "
            "with tested standing matches %d matchings are stable",
            best.pairs,
            tested.count,
        )
        return Check("existence", REPORTED, "ex-ante failure; see tested_standing_count", data)
    return Check("existence", REPORTED, "supported in ex-ante mode", data)


def check_welfare_paths(market: Market, menu: TestMenu, max_steps: int = 7) -> tuple[Check, list]:
    traces = []
    bad = []
    unfinished = 0
    for alloc in stable_matchings(market, NULL_MENU, Concept.BAYES).allocations():
        tr = improvement_path(market, alloc, menu, Concept.ICPS, max_steps=max_steps)
        traces.append(tr)
        ledger = [s.ledger_welfare for s in tr.steps]
        if any(a >= b for a, b in zip(ledger, ledger[1:])):
            bad.append(("ledger not increasing", alloc.matching.to_list()))
        if tr.terminated and find_blocking_pair(market, tr.final, menu, Concept.ICPS) is not None:
            bad.append(("terminal allocation blocked", alloc.matching.to_list()))
        if not tr.terminated:
            unfinished += 1
    data = {"paths": len(traces), "unterminated": unfinished, "violations": bad}
    if bad:
        return Check("welfare-improvement", FAIL, "invariant violated", data), traces
    if unfinished:
        status = FAIL if market.mode == "realized" else REPORTED
        return Check("welfare-improvement", status, f"{unfinished} paths hit the step cap", data), traces
    return Check("welfare-improvement", PASS, "all paths terminate", data), traces


def check_weighted_improvement(market: Market) -> Check:
    if not market.firms or not market.workers:
        return Check("weighted-improvement", SKIPPED, "empty side")
    f, w = market.firm_names[0], market.worker_names[0]
    table = market.surplus
    atoms = [(table(gf, gw), pr) for (gf, gw), pr in pair_profile_distribution(market, f, w)]
    checks = acceptance_checks(atoms)
    thr_fail = [c.accepted for c in checks if c.is_threshold_rule and not c.holds]
    other_fail = [c.accepted for c in checks if not c.is_threshold_rule and not c.holds]
    for acc in other_fail:
        log.info("non-threshold acceptance set %s violates the weighted-improvement inequality", acc)
    data = {"subsets": len(checks), "threshold_violations": thr_fail, "non_threshold_violations": other_fail}
    return Check("weighted-improvement", FAIL if thr_fail else PASS, "", data)


def check_sequential(market: Market, protocol) -> Check:
    if protocol is None:
        return Check("sequential-dominance", SKIPPED, "no protocol")
    collapsed = list(protocol.collapsed_menu())
    bad = []
    for f in market.firm_names:
        for w in market.worker_names:
            dist = pair_surplus_distribution(market, f, w)
            pi = dist.mean
            seq = sequential_value(dist, protocol, pi).value
            for t in collapsed:
                if seq < deviation_value(dist, t, pi).value:
                    bad.append((f, w, t.to_record()))
    return Check("sequential-dominance", FAIL if bad else PASS, "", {"violations": bad})


def check_sorting(market: Market, menu: TestMenu) -> list[Check]:
    if not market.distinct_types:
        return []
    out = []
    report = stable_matchings(market, menu, Concept.ICPS)
    strong = test_power_satisfied(market, menu)
    u = uniqueness_report(market, menu)
    data = {"count": u.count, "assortative": u.assortative.to_list(), "power_condition": strong}
    if strong and market.mode == "realized":
        out.append(Check("sorting", PASS if all_assortative(market, report) else FAIL, "", data))
        ok = u.unique and u.matches_assortative
        out.append(Check("uniqueness", PASS if ok else FAIL, "", data))
    else:
        out.append(Check("uniqueness", REPORTED, "power condition not met", data))
    return out


def check_lone_wolf(market: Market, menu: TestMenu) -> Check:
    report = stable_matchings(market, menu, Concept.ICPS)
    if not report.stable:
        return Check("lone-wolf", SKIPPED, "empty stable set")
    res = lone_wolf_report(market, report)
    if res.holds:
        return Check("lone-wolf", REPORTED, "unmatched set constant", {"unmatched": sorted(res.unmatched)})
    a, b = res.witness
    valid = a in report.matchings and b in report.matchings and a.matched() != b.matched()
    return Check(
        "lone-wolf",
        PASS if valid else FAIL,
        "counter-witness",
        {"witness": [a.to_list(), b.to_list()]},
    )


def check_ntu(scn: Scenario) -> list[Check]:
    if scn.ntu is None:
        return []
    market, util = scn.market, scn.ntu
    matching = scn.ntu_matching or Matching(())
    sq = ntu_status_quo(market, matching, util)
    if scn.ntu_status_quo:
        sq.update(scn.ntu_status_quo)
    informative = [t for t in scn.menu if not t.is_null]
    cert = find_ntu_blocking_pair(market, matching, util, informative, sq)
    uninformed = find_ntu_blocking_pair(market, matching, util, NULL_MENU, sq)
    hidden = ntu_hidden_gains(market, matching, util, scn.menu, sq) if cert is None else []
    data = {
        "hidden": hidden,
        "uninformed_block": uninformed.to_record() if uninformed else None,
    }
    out = []
    if cert is None and hidden:
        h = hidden[0]
        detail = f"stable despite surplus {num_out(h['joint_value'])} > {num_out(h['status_quo'])}"
        out.append(Check("ntu-information-without-blocking", REPORTED, detail, data))
    elif cert is None:
        out.append(Check("ntu-information-without-blocking", REPORTED, "stable", data))
    else:
        data["certificate"] = cert.to_record()
        out.append(Check("ntu-information-without-blocking", REPORTED, "blocked", data))
    icps = set(ntu_stable_matchings(market, util, scn.menu))
    bayes = set(ntu_stable_matchings(market, util, NULL_MENU))
    extra = icps - bayes
    out.append(
        Check(
            "ntu-refinement",
            FAIL if extra else PASS,
            "",
            {"n_icps": len(icps), "n_bayes": len(bayes), "extra": _pairs(extra)},
        )
    )
    return out


def proposition_checks(scn: Scenario) -> tuple[list[Check], list]:
    market, menu = scn.market, scn.menu
    checks = [check_inclusion(market, menu, scn.protocol), check_null_collapse(market)]
    if all(t.is_null for t in menu):
        checks.append(Check("null-menu-scenario", PASS, "ICPS = Bayesian"))
    checks.append(check_complete_information(market))
    checks.append(check_existence(market, menu))
    wp, traces = check_welfare_paths(market, menu)
    checks.append(wp)
    checks.append(check_weighted_improvement(market))
    checks.append(check_sequential(market, scn.protocol))
    checks.extend(check_sorting(market, menu))
    checks.append(check_lone_wolf(market, menu))
    checks.extend(check_ntu(scn))
    return checks, traces


def exit_code(checks: list[Check]) -> int:
    return 1 if any(c.status == FAIL for c in checks) else 0


# ---------------------------------------------------------------------------
# Scenario driver


def solve_records(scn: Scenario) -> list[dict]:
    out = []
    for concept in scn.concepts:
        if concept is Concept.NTU:
            if scn.ntu is None:
                continue
            ms = ntu_stable_matchings(scn.market, scn.ntu, scn.menu)
            out.append({"concept": "ntu", "count": len(ms), "stable": [{"matching": m.to_list()} for m in ms]})
            continue
        if concept is Concept.SEQ and scn.protocol is None:
            continue
        rep = stable_matchings(scn.market, scn.menu, concept, scn.protocol, standing=scn.standing)
        out.append(rep.to_record())
    return out


def check_records(scn: Scenario) -> dict:
    alloc = scn.allocation
    if alloc is None:
        raise ValueError("check needs an allocation in the config")
    validate_allocation(scn.market, alloc)
    out = {"allocation": alloc.to_record(), "individually_rational": check_individual_rationality(alloc), "concepts": {}}
    for concept in scn.concepts:
        if concept is Concept.NTU:
            if scn.ntu is None:
                continue
            cert = find_ntu_blocking_pair(scn.market, alloc.matching, scn.ntu, scn.menu)
        elif concept is Concept.SEQ and scn.protocol is None:
            continue
        else:
            cert = find_blocking_pair(scn.market, alloc, scn.menu, concept, scn.protocol)
        out["concepts"][concept.value] = cert.to_record() if cert else None
    return out


def dynamics_records(scn: Scenario, concept: Concept = Concept.ICPS, max_steps: int | None = None) -> list[dict]:
    starts = [scn.allocation] if scn.allocation is not None else stable_matchings(
        scn.market, NULL_MENU, Concept.BAYES
    ).allocations()
    out = []
    for alloc in starts:
        tr = improvement_path(scn.market, alloc, scn.menu, concept, scn.protocol, max_steps)
        out.append(tr.to_record())
    return out


def run_scenario(scn: Scenario, out_dir: str | Path) -> tuple[list[Check], int]:
    """Write the report files and return the checks and the exit code."""
    out_dir = Path(out_dir)
    checks, traces = proposition_checks(scn)
    certificates = []
    for concept in scn.concepts:
        if concept in (Concept.NTU,) or (concept is Concept.SEQ and scn.protocol is None):
            continue
        for m in enumerate_matchings(scn.market):
            thresholds = concept_thresholds(scn.market, Concept.BAYES, NULL_MENU)
            pay = supporting_payoffs(scn.market, m, thresholds)
            if pay is None:
                continue
            cert = find_blocking_pair(scn.market, Allocation(m, pay), scn.menu, concept, scn.protocol)
            if cert is not None:
                certificates.append({"matching": m.to_list(), "certificate": cert.to_record()})
    report = {"market": market_to_dict(scn.market), "menu": scn.menu.to_records(), "stable_sets": solve_records(scn)}
    atomic_write(out_dir / "stability_report.json", dump_json(report))
    atomic_write(out_dir / "certificates.json", dump_json(certificates))
    atomic_write(out_dir / "traces.json", dump_json([t.to_record() for t in traces]))
    code = exit_code(checks)
    summary = {"exit_code": code, "checks": [c.to_record() for c in checks]}
    atomic_write(out_dir / "propositions.json", dump_json(summary))
    return checks, code


# ---------------------------------------------------------------------------
# Sweeps


SWEEP_COLUMNS = [
    "p",
    "rho",
    "pi",
    "cost",
    "n_bayes",
    "n_icps",
    "difference",
    "bayes_welfare_min",
    "bayes_welfare_max",
    "icps_welfare_min",
    "icps_welfare_max",
    "n_icps_tested",
]


@dataclass(frozen=True)
class SweepGrid:
    p: tuple = (Fraction(1, 2),)
    rho: tuple = (Fraction(0),)
    pi: tuple = (Fraction(1),)
    cost: tuple = (Fraction(0),)
    n_firms: int = 2
    n_workers: int = 2
    alpha: Fraction = Fraction(4)
    beta: Fraction = Fraction(2)
    gamma: Fraction = Fraction(1)
    exact: bool = True

    @classmethod
    def from_document(cls, doc: dict, exact: bool | None = None) -> "SweepGrid":
        s = doc.get("sweep", {})
        ex = s.get("exact", doc.get("exact", True)) if exact is None else exact
        kw = {k: tuple(Fraction(v) for v in s[k]) for k in ("p", "rho", "pi", "cost") if k in s}
        if "surplus" in s:
            kw.update({k: Fraction(s["surplus"][k]) for k in ("alpha", "beta", "gamma")})
        for k in ("n_firms", "n_workers"):
            if k in s:
                kw[k] = s[k]
        return cls(exact=ex, **kw)

    def cells(self):
        return itertools.product(self.p, self.rho, self.pi, self.cost)


def sweep_cell(grid: SweepGrid, p, rho, pi, cost) -> dict:
    """One grid cell: common-prior market, menu {null, (pi, cost)}."""
    ex = grid.exact
    num = lambda v: as_number(v, ex)  # noqa: E731
    market = hl_market(
        [num(p)] * grid.n_firms,
        [num(p)] * grid.n_workers,
        grid.alpha,
        grid.beta,
        grid.gamma,
        rho=num(rho),
        exact=ex,
    )
    menu = TestMenu.of(Test(num(pi), num(cost)))
    bayes = stable_matchings(market, menu, Concept.BAYES)
    icps = stable_matchings(market, menu, Concept.ICPS)
    tested = stable_matchings(market, menu, Concept.ICPS, standing=TESTED)
    brange = bayes.welfare_range or ("", "")
    irange = icps.welfare_range or ("", "")
    return {
        "p": num(p),
        "rho": num(rho),
        "pi": num(pi),
        "cost": num(cost),
        "n_bayes": bayes.count,
        "n_icps": icps.count,
        "difference": len(set(bayes.matchings) - set(icps.matchings)),
        "bayes_welfare_min": brange[0],
        "bayes_welfare_max": brange[1],
        "icps_welfare_min": irange[0],
        "icps_welfare_max": irange[1],
        "n_icps_tested": tested.count,
    }


def sweep(grid: SweepGrid) -> list[dict]:
    return [sweep_cell(grid, *cell) for cell in grid.cells()]


def sweep_summary(grid: SweepGrid, rows: list[dict]) -> dict:
    """Monotonicity of the difference in rho per (p, pi, cost) slice, plus a rho = 1 probe."""
    flags = []
    for p, pi, cost in itertools.product(grid.p, grid.pi, grid.cost):
        sl = [r for r in rows if r["p"] == as_number(p, grid.exact) and r["pi"] == as_number(pi, grid.exact)
              and r["cost"] == as_number(cost, grid.exact)]
        sl.sort(key=lambda r: r["rho"])
        diffs = [r["difference"] for r in sl]
        decreasing = all(a >= b for a, b in zip(diffs, diffs[1:]))
        if not decreasing:
            log.info("difference not weakly decreasing in rho at p=%s pi=%s c=%s: %s", p, pi, cost, diffs)
        probe = sweep_cell(grid, p, 1, pi, cost)
        flags.append(
            {
                "p": num_out(as_number(p, grid.exact)),
                "pi": num_out(as_number(pi, grid.exact)),
                "cost": num_out(as_number(cost, grid.exact)),
                "rho": [num_out(r["rho"]) for r in sl],
                "difference": diffs,
                "weakly_decreasing": decreasing,
                "difference_at_rho_1": probe["difference"],
                "n_bayes_at_rho_1": probe["n_bayes"],
                "n_icps_at_rho_1": probe["n_icps"],
            }
        )
    return {"slices": flags}


def write_sweep(grid: SweepGrid, out_dir: str | Path) -> list[dict]:
    rows = sweep(grid)
    out_dir = Path(out_dir)
    atomic_write(out_dir / "sweep.csv", rows_to_csv(SWEEP_COLUMNS, rows))
    atomic_write(out_dir / "sweep_summary.json", dump_json(sweep_summary(grid, rows)))
    return rows


# ---------------------------------------------------------------------------
# Surface data


SURFACE_COLUMNS = ["p", "Pi", "value", "option_value"]


@dataclass(frozen=True)
class SurfaceGrid:
    p: tuple = tuple(Fraction(k, 10) for k in range(1, 10))
    rho: Fraction = Fraction(0)
    status_quo_min: Fraction = Fraction(0)
    status_quo_max: Fraction | None = None
    resolution: int = 101
    alpha: Fraction = Fraction(4)
    beta: Fraction = Fraction(2)
    gamma: Fraction = Fraction(1)

    @classmethod
    def from_document(cls, doc: dict) -> "SurfaceGrid":
        s = doc.get("surface", {})
        kw = {}
        if "p" in s:
            kw["p"] = tuple(Fraction(v) for v in s["p"])
        for k in ("rho", "status_quo_min", "status_quo_max"):
            if k in s:
                kw[k] = Fraction(s[k])
        if "resolution" in s:
            kw["resolution"] = s["resolution"]
        if "surplus" in s:
            kw.update({k: Fraction(s["surplus"][k]) for k in ("alpha", "beta", "gamma")})
        return cls(**kw)

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("resolution must be at least 2")
        hi = self.status_quo_max if self.status_quo_max is not None else self.alpha + 1
        if self.status_quo_min > 0 or hi < self.alpha:
            raise ValueError("status-quo range must cover [0, max surplus]")

    @property
    def upper(self) -> Fraction:
        return self.status_quo_max if self.status_quo_max is not None else self.alpha + 1


def surface_grid(grid: SurfaceGrid = SurfaceGrid()) -> list[dict]:
    """Rows of (p, Pi, value, option_value) with value = Pi + option value, exact."""
    rows = []
    lo, hi, n = grid.status_quo_min, grid.upper, grid.resolution
    table = SurplusTable.hl(grid.alpha, grid.beta, grid.gamma, True)
    for p in grid.p:
        market = Market(
            (Agent("f", p),), (Agent("w", p),), table, rho=grid.rho, exact=True
        )
        dist = pair_surplus_distribution(market, "f", "w")
        for k in range(n):
            pi = lo + (hi - lo) * Fraction(k, n - 1)
            ov = option_value(dist, pi)
            rows.append({"p": p, "Pi": pi, "value": pi + ov, "option_value": ov})
    return rows


def write_surface(grid: SurfaceGrid, out_dir: str | Path) -> list[dict]:
    rows = surface_grid(grid)
    atomic_write(Path(out_dir) / "surface.csv", rows_to_csv(SURFACE_COLUMNS, rows))
    return rows
