"""Run the correlation sweep and print the per-slice monotonicity summary.

    python3 scripts/correlation_sweep.py [--config scenarios/correlation_sweep.json] [--out runs/sweep]
"""

import argparse
import json
from pathlib import Path

from icps.config import load_document
from icps.experiments import SweepGrid, sweep_summary, write_sweep

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=ROOT / "scenarios" / "correlation_sweep.json")
    ap.add_argument("--out", default="runs/sweep")
    args = ap.parse_args()
    grid = SweepGrid.from_document(load_document(args.config))
    rows = write_sweep(grid, args.out)
    for s in sweep_summary(grid, rows)["slices"]:
        print(json.dumps(s))
    print(f"wrote {len(rows)} rows to {Path(args.out) / 'sweep.csv'}")


if __name__ == "__main__":
    main()
