"""Table of lhs/rhs for the series bound over (r, dist); the bound holds with C = max of the table."""
import argparse

import numpy as np

from lpsquare.verify import _series_lhs, _series_rhs, check_series_family


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=1)
    ap.add_argument("--delta", type=float, default=0.4)
    ap.add_argument("--K", type=int, default=64)
    ap.add_argument("--points", type=int, default=9)
    args = ap.parse_args()
    rs = ds = np.logspace(-2, 2, args.points)
    print("r \\ dist " + " ".join(f"{d:8.2g}" for d in ds))
    for r in rs:
        row = [_series_lhs(r, d, args.n, args.delta) / _series_rhs(r, d, args.n, args.delta, args.K) for d in ds]
        print(f"{r:8.2g} " + " ".join(f"{v:8.4f}" for v in row))
    rep = check_series_family(args.n, args.delta, args.K)
    print(f"C = {rep.lhs:.4f}; variant changes {rep.details['relative_changes']}; "
          f"scale error {rep.details['scale_invariance_error']:.1e}; pass={rep.passed}")


if __name__ == "__main__":
    main()
