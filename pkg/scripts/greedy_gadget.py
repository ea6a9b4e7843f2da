"""Greedy versus Mix-R on the two-packet gadget where greedy loses half.

Every other step a slightly heavier long-lived packet and a short-lived one
arrive together. Greedy always takes the heavier one and lets the other
expire.
"""

import argparse

from bdsched import harness as hz
from bdsched.model import Trace


def gadget(eps: float, reps: int) -> Trace:
    return Trace([(2 * i, [(1.0 + eps, 2), (1.0, 1)]) for i in range(reps)])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=2000)
    ap.add_argument("--runs", type=int, default=5)
    args = ap.parse_args()
    print(f"{'eps':>8}  {'greedy':>8}  {'mixr':>8}")
    for eps in (0.5, 0.1, 0.01, 0.001):
        trace = gadget(eps, args.reps)
        g = hz.estimate_ratio("greedy", trace, 1).ratio
        m = hz.estimate_ratio("mixr", trace, args.runs).ratio
        print(f"{eps:>8}  {g:>8.4f}  {m:>8.4f}")


if __name__ == "__main__":
    main()
