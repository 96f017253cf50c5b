"""Per-input domination constants max g*_lam f / sum_k 2^(-k lam n/2) S_{2^k} f in one and two dimensions."""
import argparse

import numpy as np

from lpsquare.families import standard_family
from lpsquare.grid import make_grid
from lpsquare.kernel import builtin_kernel
from lpsquare.verify import check_g_star_domination


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lam", type=float, default=3.0)
    ap.add_argument("--K", type=int, default=8)
    ap.add_argument("--cells-1d", type=int, default=2048)
    ap.add_argument("--cells-2d", type=int, default=64)
    args = ap.parse_args()
    for dim, cells, half in ((1, args.cells_1d, 8.0), (2, args.cells_2d, 4.0)):
        g = make_grid(dim, [-half] * dim, [half] * dim, cells)
        rep = check_g_star_domination(standard_family(dim), g, builtin_kernel("gauss_derivative", dim),
                                      args.lam, args.K, refine=False)
        print(f"n={dim} cells={cells}: C={rep.lhs:.4f} min={rep.rhs:.4f} spread={rep.ratio:.1%}")
        for name, c in sorted(rep.details["per_input"].items(), key=lambda kv: -kv[1]):
            print(f"   {name:>22} {c:.4f}")


if __name__ == "__main__":
    main()
