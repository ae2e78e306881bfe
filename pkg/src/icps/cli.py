"""Command-line front end."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from .config import ConfigError, load_document, scenario_from_document
from .experiments import (
    SurfaceGrid,
    SweepGrid,
    atomic_write,
    check_records,
    dump_json,
    dynamics_records,
    run_scenario,
    solve_records,
    write_surface,
    write_sweep,
)
from .market import MODES, MarketError
from .stability import Concept

CONCEPTS = [c.value for c in Concept]


def _scenario(ctx, concept=None):
    o = ctx.obj
    if o["config"] is None:
        raise click.UsageError("--config is required")
    try:
        scn = scenario_from_document(load_document(o["config"]), seed=o["seed"], mode=o["mode"], exact=o["exact"])
    except (ConfigError, MarketError, ValueError) as exc:
        raise click.ClickException(str(exc)) from None
    if scn.market is None:
        raise click.ClickException("config has neither 'market' nor 'generate'")
    if concept:
        scn.concepts = [Concept(concept)]
    return scn


def _emit(ctx, name: str, obj) -> None:
    text = dump_json(obj)
    out = ctx.obj["out"]
    if out is None:
        click.echo(text, nl=False)
    else:
        atomic_write(Path(out) / name, text)
        click.echo(str(Path(out) / name))


@click.group()
@click.option("--config", "config", type=click.Path(exists=True, dir_okay=False), help="Scenario JSON file.")
@click.option("--seed", type=int, default=None, help="Seed for generated markets.")
@click.option("--mode", type=click.Choice(MODES), default=None, help="Override the market mode.")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory.")
@click.option("--exact/--float", "exact", default=None, help="Rational or float arithmetic.")
@click.option("-v", "--verbose", count=True)
@click.pass_context
def main(ctx, config, seed, mode, out, exact, verbose):
    """Stability checks for matching markets with credible bilateral tests."""
    logging.basicConfig(level=logging.WARNING - 10 * verbose, format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"config": config, "seed": seed, "mode": mode, "out": out, "exact": exact}


@main.command()
@click.option("--concept", type=click.Choice(CONCEPTS), default=None)
@click.pass_context
def check(ctx, concept):
    """Look for a blocking pair against the config's allocation."""
    scn = _scenario(ctx, concept)
    try:
        rec = check_records(scn)
    except (MarketError, ValueError) as exc:
        raise click.ClickException(str(exc)) from None
    _emit(ctx, "check.json", rec)


@main.command()
@click.option("--concept", type=click.Choice(CONCEPTS), default=None)
@click.pass_context
def solve(ctx, concept):
    """Enumerate stable matchings per concept."""
    scn = _scenario(ctx, concept)
    _emit(ctx, "stable_sets.json", solve_records(scn))


@main.command()
@click.option("--concept", type=click.Choice(CONCEPTS), default="icps")
@click.option("--max-steps", type=int, default=None)
@click.pass_context
def dynamics(ctx, concept, max_steps):
    """Improvement paths from the config allocation or every Bayesian-stable one."""
    scn = _scenario(ctx)
    try:
        rec = dynamics_records(scn, Concept(concept), max_steps)
    except (MarketError, ValueError) as exc:
        raise click.ClickException(str(exc)) from None
    _emit(ctx, "traces.json", rec)


@main.command()
@click.pass_context
def sweep(ctx):
    """Grid over (p, rho, pi, cost); writes sweep.csv and sweep_summary.json."""
    o = ctx.obj
    doc = load_document(o["config"]) if o["config"] else {}
    grid = SweepGrid.from_document(doc, exact=o["exact"])
    out = o["out"] or "."
    write_sweep(grid, out)
    click.echo(str(Path(out) / "sweep.csv"))


@main.command()
@click.pass_context
def surface(ctx):
    """Deviation-value surface over (p, Pi); writes surface.csv."""
    o = ctx.obj
    doc = load_document(o["config"]) if o["config"] else {}
    out = o["out"] or "."
    write_surface(SurfaceGrid.from_document(doc), out)
    click.echo(str(Path(out) / "surface.csv"))


@main.command()
@click.pass_context
def props(ctx):
    """Run the proposition checks; exit code 1 if a hard check fails."""
    scn = _scenario(ctx)
    out = ctx.obj["out"] or "."
    checks, code = run_scenario(scn, out)
    for c in checks:
        click.echo(f"{c.status:9s} {c.name}: {c.detail}")
    sys.exit(code)


if __name__ == "__main__":
    main()
