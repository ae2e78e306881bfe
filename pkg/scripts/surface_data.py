"""Write the deviation-value surface over (p, status quo) to CSV.

    python3 scripts/surface_data.py [--resolution 101] [--out runs/surface]
"""

import argparse
from fractions import Fraction

from icps.experiments import SurfaceGrid, write_surface


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--resolution", type=int, default=101)
    ap.add_argument("--p", nargs="*", default=None, help="priors, e.g. 1/10 1/2 9/10")
    ap.add_argument("--out", default="runs/surface")
    args = ap.parse_args()
    kw = {"resolution": args.resolution}
    if args.p:
        kw["p"] = tuple(Fraction(x) for x in args.p)
    rows = write_surface(SurfaceGrid(**kw), args.out)
    print(f"wrote {len(rows)} rows to {args.out}/surface.csv")


if __name__ == "__main__":
    main()
