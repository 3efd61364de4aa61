"""Cost of exact SHAP as the feature count grows.

For each n, draws a random net and (x, baseline) pair and reports the number of
coalitions, the distinct activation regions they touch, unwraps performed by
the memoized global mode, and wall time for global vs brute-force evaluation.
Output is CSV on stdout.
"""

import argparse
import csv
import sys
import time

import numpy as np

from relu_unwrap.generators import random_feedforward
from relu_unwrap.shap import shap_bruteforce, shap_global


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--min-features", type=int, default=4)
    ap.add_argument("--max-features", type=int, default=14)
    ap.add_argument("--hidden", type=int, nargs="+", default=[16, 16])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--no-bruteforce", action="store_true", help="skip the forward-pass oracle")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    out = csv.writer(sys.stdout)
    out.writerow(["n", "coalitions", "unwraps", "cache_hits", "global_s", "bruteforce_s", "max_abs_diff"])
    for n in range(args.min_features, args.max_features + 1):
        net = random_feedforward(rng, [n, *args.hidden, 1])
        x, b = rng.normal(size=(2, n))
        t0 = time.perf_counter()
        g = shap_global(net, x, b)
        t_global = time.perf_counter() - t0
        t_brute, diff = "", ""
        if not args.no_bruteforce:
            t0 = time.perf_counter()
            bf = shap_bruteforce(net, x, b)
            t_brute = f"{time.perf_counter() - t0:.4f}"
            diff = f"{np.max(np.abs(g.values - bf.values)):.2e}"
        out.writerow([n, 2 ** n, g.stats["unwraps"], g.stats["hits"], f"{t_global:.4f}", t_brute, diff])


if __name__ == "__main__":
    main()
