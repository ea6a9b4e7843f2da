"""Empirical OPT / Mix-R ratios on random oblivious traces of each generator family."""

import argparse

from bdsched import adversary as adv
from bdsched import harness as hz


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--s", type=int, nargs="+", default=[2, 3, 5, 8])
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--rate", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'kind':<11}{'s':>3}  {'alg':<10}{'ratio':>9}{'stderr':>9}{'N':>4}{'bound(N)':>10}")
    for kind in adv.GENERATOR_KINDS:
        for s in args.s:
            spec = adv.GeneratorSpec(kind, s=s, steps=args.steps, rate=args.rate)
            for alg in ("mixr", "mixr-prov", "greedy"):
                est = hz.estimate_ratio(alg, spec, args.runs, base_seed=args.seed)
                N = est.track_N
                bound = f"{hz.ratio_bound(N):.4f}" if N else "-"
                print(f"{kind:<11}{s:>3}  {alg:<10}{est.ratio:>9.4f}{est.stderr:>9.4f}{N:>4}{bound:>10}")


if __name__ == "__main__":
    main()
