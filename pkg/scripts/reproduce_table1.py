"""Recompute the K-series of threshold brackets and compare with the published table.

Usage: python3 scripts/reproduce_table1.py [--max-K 17] [--out table1.csv]
"""

import argparse
import time

from peelperc.bounds import bracket_series, ceil_dp, floor_dp

PUBLISHED = {4: ("0.5382", "0.5656"), 6: ("0.5436", "0.5625"), 8: ("0.5464", "0.5609"),
             10: ("0.5482", "0.5598"), 12: ("0.5493", "0.5591"), 14: ("0.5502", "0.5586"),
             16: ("0.5508", "0.5583"), 17: ("0.5511", "0.5581")}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-K", dest="max_K", type=int, default=17)
    ap.add_argument("--out", default="")
    args = ap.parse_args()
    t0 = time.perf_counter()
    res = bracket_series(args.max_K)
    print(f"{'K':>3} {'lower':>9} {'upper':>9} {'width':>9}  published")
    for r in res.rows:
        lo, hi = floor_dp(r.p_lower, 4), ceil_dp(r.p_upper, 4)
        pub = PUBLISHED.get(r.K)
        mark = "" if pub is None else f"{pub[0]} {pub[1]} {'match' if pub == (lo, hi) else 'DIFF'}"
        print(f"{r.K:>3} {r.p_lower:.7f} {r.p_upper:.7f} {r.p_upper - r.p_lower:.7f}  {mark}")
    for v in res.violations:
        print("monotonicity:", v)
    print(f"done in {time.perf_counter() - t0:.1f} s")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(res.to_csv())


if __name__ == "__main__":
    main()
