"""Scenario documents: JSON schema, loading and conversion to model objects.

Numbers may be JSON numbers or ``"p/q"`` strings.  Decimal literals are read
as exact fractions, so ``0.1`` means 1/10 in exact mode.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import jsonschema

from .generate import MarketSpec, generate_market
from .information import SequentialProtocol, Test, TestMenu
from .market import MODES, Market, MarketError, Matching, as_number
from .serialize import market_from_dict
from .stability import Allocation, Concept, NtuUtilityTable


class ConfigError(MarketError):
    pass


_NUM = {
    "oneOf": [
        {"type": "number"},
        {"type": "string", "pattern": r"^\s*-?\d+(\s*/\s*\d+)?\s*$"},
    ]
}
_NUM_LIST = {"type": "array", "items": _NUM, "minItems": 1}
_TEST = {
    "type": "object",
    "additionalProperties": False,
    "required": ["pi", "cost"],
    "properties": {"pi": _NUM, "cost": {"oneOf": [_NUM, {"const": "inf"}]}},
}
_AGENT = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name"],
    "properties": {"name": {"type": "string"}, "prior": _NUM, "type": {"type": "string"}},
}
_GRADE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["label", "value"],
    "properties": {"label": {"type": "string"}, "value": _NUM},
}
_ENTRY = {
    "type": "object",
    "additionalProperties": False,
    "required": ["firm", "worker", "value"],
    "properties": {"firm": {"type": "string"}, "worker": {"type": "string"}, "value": _NUM},
}
_HL = {
    "type": "object",
    "additionalProperties": False,
    "required": ["alpha", "beta", "gamma"],
    "properties": {"alpha": _NUM, "beta": _NUM, "gamma": _NUM},
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer"},
        "mode": {"enum": list(MODES)},
        "exact": {"type": "boolean"},
        "concepts": {"type": "array", "items": {"enum": [c.value for c in Concept]}},
        "standing": {"enum": ["prior", "tested"]},
        "market": {
            "type": "object",
            "additionalProperties": False,
            "required": ["firms", "workers", "surplus"],
            "properties": {
                "mode": {"enum": list(MODES)},
                "exact": {"type": "boolean"},
                "rho": _NUM,
                "distinct_types": {"type": "boolean"},
                "grades": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["firms", "workers"],
                    "properties": {
                        "firms": {"type": "array", "items": _GRADE},
                        "workers": {"type": "array", "items": _GRADE},
                    },
                },
                "surplus": {
                    "oneOf": [
                        _HL,
                        {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["entries"],
                            "properties": {"entries": {"type": "array", "items": _ENTRY}},
                        },
                    ]
                },
                "firms": {"type": "array", "items": _AGENT},
                "workers": {"type": "array", "items": _AGENT},
            },
        },
        "generate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_firms": {"type": "integer", "minimum": 0},
                "n_workers": {"type": "integer", "minimum": 0},
                "mode": {"enum": list(MODES)},
                "prior_range": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                "surplus_range": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                "rho": _NUM,
                "distinct_types": {"type": "boolean"},
            },
        },
        "menu": {"type": "array", "items": _TEST},
        "protocol": {"type": "array", "items": _TEST, "minItems": 1},
        "allocation": {
            "type": "object",
            "additionalProperties": False,
            "required": ["matching", "payoffs"],
            "properties": {
                "matching": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2},
                },
                "payoffs": {"type": "object", "additionalProperties": _NUM},
            },
        },
        "ntu": {
            "type": "object",
            "additionalProperties": False,
            "required": ["firm_utility", "worker_utility"],
            "properties": {
                "firm_utility": {"type": "array", "items": _ENTRY},
                "worker_utility": {"type": "array", "items": _ENTRY},
                "firm_cost_share": _NUM,
                "status_quo": {"type": "object", "additionalProperties": _NUM},
                "matching": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2},
                },
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "p": _NUM_LIST,
                "rho": _NUM_LIST,
                "pi": _NUM_LIST,
                "cost": _NUM_LIST,
                "n_firms": {"type": "integer", "minimum": 1, "maximum": 6},
                "n_workers": {"type": "integer", "minimum": 1, "maximum": 6},
                "surplus": _HL,
                "exact": {"type": "boolean"},
            },
        },
        "surface": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "p": _NUM_LIST,
                "rho": _NUM,
                "status_quo_min": _NUM,
                "status_quo_max": _NUM,
                "resolution": {"type": "integer", "minimum": 2},
                "surplus": _HL,
            },
        },
    },
}


def _fraction_hook(s: str) -> Fraction:
    return Fraction(s)


def load_document(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh, parse_float=_fraction_hook)
    validate(doc)
    return doc


def _jsonable(x):
    # jsonschema needs plain JSON types; fractions validate as numbers
    if isinstance(x, Fraction):
        return float(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_jsonable(v) for v in x]
    return x


def validate(doc: dict) -> None:
    try:
        jsonschema.validate(_jsonable(doc), SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None


def _num(x, exact: bool):
    if x == "inf":
        return float("inf")
    return as_number(x, exact)


def tests_from(records, exact: bool) -> list[Test]:
    return [Test(_num(r["pi"], exact), _num(r["cost"], exact)) for r in records]


@dataclass
class Scenario:
    market: Market
    menu: TestMenu
    protocol: SequentialProtocol | None = None
    concepts: list[Concept] = field(default_factory=lambda: [Concept.BAYES, Concept.ICPS])
    standing: str = "prior"
    allocation: Allocation | None = None
    ntu: NtuUtilityTable | None = None
    ntu_matching: Matching | None = None
    ntu_status_quo: dict | None = None
    seed: int | None = None
    doc: dict = field(default_factory=dict)


def scenario_from_document(
    doc: dict, seed: int | None = None, mode: str | None = None, exact: bool | None = None
) -> Scenario:
    """Build a scenario; ``seed``, ``mode`` and ``exact`` override the document."""
    validate(doc)
    doc = copy.deepcopy(doc)
    exact = doc.get("exact", True) if exact is None else exact
    mode = mode or doc.get("mode")
    seed = doc.get("seed") if seed is None else seed
    if "market" in doc:
        market = market_from_dict(doc["market"], exact=exact, mode=mode)
    elif "generate" in doc:
        if seed is None:
            raise ConfigError("generated markets need a seed")
        g = dict(doc["generate"])
        if mode:
            g["mode"] = mode
        market = generate_market(seed, MarketSpec(exact=exact, **g))
    else:
        market = None
    menu = TestMenu(tuple(tests_from(doc.get("menu", []), exact)))
    protocol = None
    if "protocol" in doc:
        protocol = SequentialProtocol(
            tuple((_num(r["pi"], exact), _num(r["cost"], exact)) for r in doc["protocol"])
        )
    concepts = [Concept(c) for c in doc.get("concepts", ["bayes", "icps"])]
    alloc = None
    if "allocation" in doc:
        a = doc["allocation"]
        alloc = Allocation(
            Matching(tuple(tuple(p) for p in a["matching"])),
            {k: as_number(v, exact) for k, v in a["payoffs"].items()},
        )
    ntu = ntu_matching = ntu_sq = None
    if "ntu" in doc:
        n = doc["ntu"]
        ntu = NtuUtilityTable(
            {(e["firm"], e["worker"]): as_number(e["value"], exact) for e in n["firm_utility"]},
            {(e["firm"], e["worker"]): as_number(e["value"], exact) for e in n["worker_utility"]},
            as_number(n["firm_cost_share"], exact) if "firm_cost_share" in n else None,
        )
        if "matching" in n:
            ntu_matching = Matching(tuple(tuple(p) for p in n["matching"]))
        if "status_quo" in n:
            ntu_sq = {k: as_number(v, exact) for k, v in n["status_quo"].items()}
    return Scenario(
        market=market,
        menu=menu,
        protocol=protocol,
        concepts=concepts,
        standing=doc.get("standing", "prior"),
        allocation=alloc,
        ntu=ntu,
        ntu_matching=ntu_matching,
        ntu_status_quo=ntu_sq,
        seed=seed,
        doc=doc,
    )


def load_scenario(path: str | Path, **overrides) -> Scenario:
    return scenario_from_document(load_document(path), **overrides)
