"""Number formatting and market (de)serialization for JSON documents."""

from __future__ import annotations

from fractions import Fraction

from .market import Agent, Market, SurplusTable, TypeGrade, as_number


def num_out(x):
    """Integers stay integers, other fractions become ``"p/q"`` strings."""
    if isinstance(x, Fraction):
        return x.numerator if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, float) and x.is_integer():
        return x
    return x


def csv_num(x) -> str:
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return str(x.numerator)
        return repr(float(x))
    if isinstance(x, float):
        return repr(x)
    return str(x)


def market_to_dict(market: Market) -> dict:
    table = market.surplus
    out = {
        "mode": market.mode,
        "exact": market.exact,
        "rho": num_out(market.rho),
        "distinct_types": market.distinct_types,
        "grades": {
            "firms": [{"label": g.label, "value": num_out(g.value)} for g in table.firm_grades],
            "workers": [{"label": g.label, "value": num_out(g.value)} for g in table.worker_grades],
        },
        "surplus": {
            "entries": [
                {"firm": x.label, "worker": y.label, "value": num_out(table(x.label, y.label))}
                for x in table.firm_grades
                for y in table.worker_grades
            ]
        },
        "firms": [],
        "workers": [],
    }
    types = market.realized_types or {}
    for side, agents in (("firms", market.firms), ("workers", market.workers)):
        for a in agents:
            rec = {"name": a.name, "prior": num_out(a.prior)}
            if a.name in types:
                rec["type"] = types[a.name]
            out[side].append(rec)
    return out


def market_from_dict(doc: dict, exact: bool | None = None, mode: str | None = None) -> Market:
    exact = doc.get("exact", True) if exact is None else exact
    num = lambda v: as_number(v, exact)  # noqa: E731
    surplus = doc["surplus"]
    if "entries" in surplus:
        grades = doc.get("grades")
        if grades is None:
            grades = {
                "firms": [{"label": "H", "value": 1}, {"label": "L", "value": 0}],
                "workers": [{"label": "H", "value": 1}, {"label": "L", "value": 0}],
            }
        table = SurplusTable(
            tuple(TypeGrade(g["label"], num(g["value"])) for g in grades["firms"]),
            tuple(TypeGrade(g["label"], num(g["value"])) for g in grades["workers"]),
            {(e["firm"], e["worker"]): num(e["value"]) for e in surplus["entries"]},
        )
    else:
        table = SurplusTable.hl(surplus["alpha"], surplus["beta"], surplus["gamma"], exact)
    firms = tuple(Agent(a["name"], num(a.get("prior", Fraction(1, 2)))) for a in doc["firms"])
    workers = tuple(Agent(a["name"], num(a.get("prior", Fraction(1, 2)))) for a in doc["workers"])
    types = {a["name"]: a["type"] for a in doc["firms"] + doc["workers"] if "type" in a}
    return Market(
        firms,
        workers,
        table,
        rho=doc.get("rho", 0),
        realized_types=types or None,
        mode=mode or doc.get("mode", "ex-ante"),
        distinct_types=doc.get("distinct_types", False),
        exact=exact,
    )
