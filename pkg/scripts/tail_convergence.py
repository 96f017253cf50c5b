"""Tail L1 of S_1 f outside Q(c, 6nr) over ||f||_1 as the box grows at fixed spacing.

In one dimension the tail integral settles quickly. In two dimensions the
truncated t-ladder leaves a tail deficit decaying like 1/box, so box doubling
keeps changing the value by tens of percent at desk-scale boxes.
"""
import argparse
import time

from lpsquare.families import mean_zero_inputs
from lpsquare.grid import Grid
from lpsquare.kernel import builtin_kernel
from lpsquare.ntv_decomposition import mean_zero_tail_check
from lpsquare.operators import default_ladder


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=2, choices=(1, 2))
    ap.add_argument("--spacing", type=float, default=1 / 32)
    ap.add_argument("--halves", type=float, nargs="+", default=[4.0, 8.0, 16.0])
    args = ap.parse_args()
    n = args.dim
    k = builtin_kernel("gauss_derivative", n)
    inp = mean_zero_inputs(n, 1, seed=0, side_range=(0.25, 0.25))[0]
    prev = None
    for half in args.halves:
        start = time.time()
        cells = int(round(2 * half / args.spacing))
        g = Grid(n, (-half,) * n, (half,) * n, cells)
        ratio = mean_zero_tail_check(k, inp.center, inp.side, inp.sample(g), default_ladder(g))[1]
        change = "" if prev is None else f"{(ratio - prev) / prev:+.1%}"
        print(f"box [-{half:g}, {half:g}]^{n} cells {cells}: tail ratio {ratio:.4f} {change:>8} "
              f"({time.time() - start:.1f} s)")
        prev = ratio


if __name__ == "__main__":
    main()
