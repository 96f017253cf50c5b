"""Weak-type constant of S_1 as the grid is refined, for the standard family and a grid-width spike."""
import argparse
import time

import numpy as np

from lpsquare.families import GridSpike, standard_family
from lpsquare.grid import make_grid
from lpsquare.kernel import builtin_kernel
from lpsquare.operators import default_ladder, psi_transform, square_function
from lpsquare.verify import weak_ratios


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cells", type=int, nargs="+", default=[512, 1024, 2048, 4096, 8192])
    ap.add_argument("--box", type=float, default=8.0, help="half side of the box")
    args = ap.parse_args()
    k = builtin_kernel("gauss_derivative", 1)
    rhos = np.logspace(-2, 1.5, 16)
    members = standard_family(1) + [GridSpike((0.0,), 2.0)]
    print(f"{'cells':>6} {'family sup':>11} {'grid spike':>11} {'argmax':>20} {'secs':>6}")
    for cells in args.cells:
        start = time.time()
        g = make_grid(1, [-args.box], [args.box], cells)
        L = default_ladder(g)
        vals = {}
        for fn in members:
            f = fn.sample(g)
            vals[fn.name] = float(weak_ratios(square_function(psi_transform(k, f, L), 1.0), f, rhos).max())
        fam = {n: v for n, v in vals.items() if not n.startswith("grid_spike")}
        top = max(fam, key=fam.get)
        print(f"{cells:6d} {fam[top]:11.4f} {vals[members[-1].name]:11.4f} {top:>20} {time.time() - start:6.1f}")


if __name__ == "__main__":
    main()
