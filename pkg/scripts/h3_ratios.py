"""Neighborhood ratios meas(G^eps)/eps for the set {0} U {1/sqrt(i)} and their fitted growth exponent.

The measure is exact. Counting shows meas(G^eps) ~ c eps^(1/3), so the
ratio grows like eps^(-2/3).
"""
import argparse

from tnlab.hypotheses import PointSequenceSet, fitted_exponent, neighborhood_ratio


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[8, 64, 512, 4096, 32768])
    args = ap.parse_args()
    G = PointSequenceSet.inverse_sqrt()
    eps = [1.0 / n for n in args.n]
    ratios = [neighborhood_ratio(G, e) for e in eps]
    for n, e, r in zip(args.n, eps, ratios):
        print(f"n={n:6d}  eps={e:.3e}  meas/eps={r:.6g}  meas={r * e:.6g}")
    print(f"fitted exponent over all: {fitted_exponent(eps, ratios):.4f}")
    print(f"fitted exponent over first three: {fitted_exponent(eps[:3], ratios[:3]):.4f}")


if __name__ == "__main__":
    main()
